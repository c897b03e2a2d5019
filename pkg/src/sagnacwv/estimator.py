"""Per-pulse Gaussian fitting and inversion of fitted pulses to (phi, omega0)."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AmplitudeRatioOutOfRange, DegenerateData, DegeneratePhi, TooFewSamples
from .instrument import SampledTrace
from .signal_model import InterferometerGeometry, Mode

MAX_ITERATIONS = 200
SSE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianFit:
    amplitude: float
    center: float
    sigma: float
    baseline: float
    residual_rms: float
    iterations: int
    converged: bool
    covariance: np.ndarray = field(repr=False)

    @property
    def params(self) -> np.ndarray:
        return np.array([self.amplitude, self.center, self.sigma, self.baseline])

    def stderr(self, index: int) -> float:
        return math.sqrt(max(self.covariance[index, index], 0.0))


def gaussian_model(t, params) -> np.ndarray:
    """``b + A exp(-(t - t0)^2 / 2 sigma^2)`` for ``params = (A, t0, sigma, b)``."""
    A, t0, sigma, b = params
    u = (np.asarray(t, dtype=float) - t0) / sigma
    return b + A * np.exp(-0.5 * u * u)


def gaussian_jacobian(t, params) -> np.ndarray:
    """Analytic derivatives of :func:`gaussian_model`, shape ``(len(t), 4)``."""
    A, t0, sigma, _ = params
    u = (np.asarray(t, dtype=float) - t0) / sigma
    g = np.exp(-0.5 * u * u)
    J = np.empty((u.size, 4))
    J[:, 0] = g
    J[:, 1] = A * g * u / sigma
    J[:, 2] = A * g * u * u / sigma
    J[:, 3] = 1.0
    return J


def _initial_guess(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    m = max(1, int(0.05 * y.size))
    b = float(np.median(np.concatenate([y[:m], y[-m:]])))
    hi, lo = y.max() - b, y.min() - b
    A = lo if abs(lo) > abs(hi) else hi
    w = np.abs(y - b)
    total = w.sum()
    t0 = float((w * t).sum() / total)
    sigma = math.sqrt(float((w * (t - t0) ** 2).sum() / total))
    span = t[-1] - t[0]
    dt = span / (t.size - 1)
    sigma = min(max(sigma, 3 * dt), span / 2)
    return np.array([A, t0, sigma, b])


def fit_gaussian(pulse: SampledTrace, init=None, fit_baseline: bool = True) -> GaussianFit:
    """Least-squares Gaussian-plus-baseline fit of one pulse window.

    Levenberg-Marquardt with Marquardt's diagonal scaling.  Iteration stops
    when an accepted step changes the sum of squares by less than ``1e-12``
    relative, or when no damping level lowers it any further (the minimum is
    reached to rounding).  Hitting :data:`MAX_ITERATIONS` leaves
    ``converged=False``.

    Parameters
    ----------
    pulse : SampledTrace
        At least 16 samples.
    init : sequence of 4 floats, optional
        Starting ``(A, t0, sigma, b)``; moment estimates are used otherwise.
    fit_baseline : bool
        If False the baseline is held at its initial value (0 unless given).
    """
    y = np.asarray(pulse.samples, dtype=float)
    if y.size < 16:
        raise DegenerateData("need at least 16 samples to fit a pulse")
    if np.ptp(y) == 0:
        raise DegenerateData("flat trace")
    # local time axis keeps the jacobian well conditioned for late windows
    t_ref = pulse.t0
    t = pulse.dt * np.arange(y.size)

    if init is None:
        p = _initial_guess(t, y)
        if not fit_baseline:
            p[3] = 0.0
    else:
        p = np.array(init, dtype=float)
        p[1] -= t_ref
    free = [0, 1, 2, 3] if fit_baseline else [0, 1, 2]

    def sse_of(q):
        r = y - gaussian_model(t, q)
        return float(r @ r), r

    sse, r = sse_of(p)
    lam = 1e-3
    converged = False
    iterations = 0
    while iterations < MAX_ITERATIONS:
        iterations += 1
        J = gaussian_jacobian(t, p)[:, free]
        JTJ = J.T @ J
        grad = J.T @ r
        diag = np.diag(JTJ).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(JTJ + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p.copy()
            trial[free] += step
            if trial[2] > 0:
                sse_new, r_new = sse_of(trial)
                if sse_new < sse:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            converged = True
            break
        rel_change = (sse - sse_new) / sse
        p, sse, r = trial, sse_new, r_new
        lam = max(lam / 10.0, 1e-12)
        if rel_change < SSE_RTOL or sse == 0.0:
            converged = True
            break

    J = gaussian_jacobian(t, p)[:, free]
    dof = max(y.size - len(free), 1)
    cov = np.zeros((4, 4))
    try:
        cov_free = np.linalg.inv(J.T @ J) * (sse / dof)
        cov[np.ix_(free, free)] = cov_free
    except np.linalg.LinAlgError:
        cov[:] = np.nan
    return GaussianFit(
        amplitude=float(p[0]),
        center=float(p[1] + t_ref),
        sigma=float(p[2]),
        baseline=float(p[3]),
        residual_rms=math.sqrt(sse / y.size),
        iterations=iterations,
        converged=converged and p[2] > 0,
        covariance=cov,
    )


# --- ensemble statistics ---------------------------------------------------


@dataclass(frozen=True)
class EnsembleStats:
    mean: float
    std: float | None
    sem: float | None
    n: int


def ensemble_stats(values: Sequence[float]) -> EnsembleStats:
    """Sample mean, Bessel-corrected standard deviation and standard error."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise TooFewSamples("need at least two values for a spread estimate")
    std = float(x.std(ddof=1))
    return EnsembleStats(float(x.mean()), std, std / math.sqrt(x.size), int(x.size))


def _stats_or_mean(values) -> EnsembleStats:
    try:
        return ensemble_stats(values)
    except TooFewSamples:
        return EnsembleStats(float(np.mean(values)), None, None, len(values))


# --- inversion -------------------------------------------------------------


@dataclass(frozen=True)
class PulseEstimate:
    phi_hat: float
    omega0_hat: float
    delta_t: float
    tau_hat: float


@dataclass(frozen=True)
class VelocityEstimate:
    mode: Mode
    per_pulse: tuple[PulseEstimate, ...]
    n_excluded: int = 0

    def stats(self, name: str) -> EnsembleStats:
        return _stats_or_mean([getattr(p, name) for p in self.per_pulse])

    @property
    def phi_hat(self) -> float:
        return self.stats("phi_hat").mean

    @property
    def omega0_hat(self) -> float:
        return self.stats("omega0_hat").mean

    @property
    def delta_t(self) -> float:
        return self.stats("delta_t").mean

    @property
    def tau_hat(self) -> float:
        return self.stats("tau_hat").mean

    @property
    def amplification(self) -> float:
        """Time shift per ``omega0 tau^2``: 1/phi for ABWV, 2/phi for WVA."""
        return (2.0 if self.mode is Mode.WVA else 1.0) / self.phi_hat


def _ratio_with_error(num: GaussianFit, den: GaussianFit) -> tuple[float, float]:
    r = num.amplitude / den.amplitude
    # absolute error propagation stays finite when the numerator vanishes
    err = math.hypot(num.stderr(0), r * den.stderr(0)) / abs(den.amplitude)
    return r, err


def abwv_estimate(
    sum_fits: Sequence[GaussianFit],
    diff_fits: Sequence[GaussianFit],
    geom: InterferometerGeometry,
) -> VelocityEstimate:
    """Self-referenced ABWV inversion, pulse by pulse.

    The sum channel provides the pulse width and timing reference, so no
    calibration input is taken.  Non-converged pulse pairs are excluded and
    counted in ``n_excluded``.
    """
    if len(sum_fits) != len(diff_fits):
        raise ValueError("sum and difference fits must pair up pulse by pulse")
    pulses = []
    excluded = 0
    for s, d in zip(sum_fits, diff_fits):
        if not (s.converged and d.converged):
            excluded += 1
            continue
        ratio, err = _ratio_with_error(d, s)
        if abs(ratio) > 1.0 + 3.0 * err:
            raise AmplitudeRatioOutOfRange(f"|A_diff/A_sum| = {abs(ratio):.4g} exceeds 1")
        phi = math.asin(min(max(ratio, -1.0), 1.0)) / geom.phase_gain
        dt = d.center - s.center
        tau = s.sigma
        pulses.append(PulseEstimate(phi, dt * phi / tau**2, dt, tau))
    return VelocityEstimate(Mode.ABWV, tuple(pulses), excluded)


def wva_estimate(
    dark_fits: Sequence[GaussianFit],
    bright_reference: GaussianFit | Sequence[GaussianFit],
    geom: InterferometerGeometry,
) -> VelocityEstimate:
    """WVA inversion against a bright-port calibration pulse.

    ``bright_reference`` is either one fit shared by every dark pulse (its
    center must then be on the same clock as the dark centers) or one fit per
    dark pulse taken in matching windows.
    """
    if isinstance(bright_reference, GaussianFit):
        refs = [bright_reference] * len(dark_fits)
    else:
        refs = list(bright_reference)
        if len(refs) != len(dark_fits):
            raise ValueError("need one bright reference per dark pulse")
    pulses = []
    excluded = 0
    for d, b in zip(dark_fits, refs):
        if not b.converged:
            raise ValueError("bright reference fit did not converge")
        if not d.converged:
            excluded += 1
            continue
        ratio, err = _ratio_with_error(d, b)
        if ratio > 1.0 + 3.0 * err:
            raise AmplitudeRatioOutOfRange(f"A_dark/A_bright = {ratio:.4g} exceeds 1")
        phi = math.asin(math.sqrt(min(max(ratio, 0.0), 1.0))) / (geom.k0 * geom.lever_arm)
        if phi == 0:
            raise DegeneratePhi("dark-port amplitude is zero; omega0 is undefined")
        dt = d.center - b.center
        tau = b.sigma
        pulses.append(PulseEstimate(phi, dt * phi / (2.0 * tau**2), dt, tau))
    return VelocityEstimate(Mode.WVA, tuple(pulses), excluded)


FIT_COLUMNS = ["pulse_index", "amplitude", "center_s", "sigma_s", "baseline", "residual_rms", "converged"]


def write_fits_csv(fits: Sequence[GaussianFit], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIT_COLUMNS)
        for i, f in enumerate(fits):
            writer.writerow(
                [i, repr(f.amplitude), repr(f.center), repr(f.sigma), repr(f.baseline),
                 repr(f.residual_rms), int(f.converged)]
            )
