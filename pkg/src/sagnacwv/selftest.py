"""Fast, noise-free invariant checks runnable without the test suite."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.optimize import brentq

from .estimator import fit_gaussian, gaussian_jacobian, gaussian_model
from .harness import SweepConfig, rows_to_csv, run_sweep
from .instrument import FilterConfig, NoiseConfig, PulseTrainConfig, SampledTrace, apply_lowpass
from .signal_model import (
    InterferometerGeometry,
    Mode,
    PulseEnvelope,
    TiltState,
    WorkingPoint,
    exact_port_intensities,
    predicted_time_shift,
)


def check_energy():
    rng = np.random.default_rng(1)
    worst = 0.0
    t = np.linspace(0, 1, 2001)
    env = PulseEnvelope(1.0, 0.1, 0.5)
    for _ in range(50):
        geom = InterferometerGeometry(
            working_point=list(WorkingPoint)[rng.integers(2)],
            leakage_epsilon=float(rng.uniform(0, 0.3)),
            symmetric_leakage=bool(rng.integers(2)),
        )
        tilt = TiltState(float(rng.uniform(-1e-5, 1e-5)), float(rng.uniform(-1e-6, 1e-6)))
        p1, p2 = exact_port_intensities(t, tilt, geom, env)
        E = env(t)
        worst = max(worst, float(np.max(np.abs(p1 + p2 - E) / E)))
    return worst <= 1e-12, f"max relative energy error {worst:.2e}"


def peak_time(f, lo: float, hi: float, h: float = 1e-4) -> float:
    """Location of the maximum of ``f`` in [lo, hi] as a root of its central difference."""
    return brentq(lambda t: f(t + h) - f(t - h), lo, hi, xtol=1e-16, rtol=1e-15)


def check_first_order():
    """Peak shift of the exact difference signal approaches the first-order law quadratically."""
    geom = InterferometerGeometry()
    env = PulseEnvelope(1.0, 0.1, 0.0)
    phis = np.geomspace(25e-9, 2.5e-6, 5)
    errs = []
    for phi in phis:
        tilt = TiltState(phi, 1e-4 * phi / env.tau)

        def diff(t):
            p1, p2 = exact_port_intensities(np.array([t]), tilt, geom, env)
            return float(p2[0] - p1[0])

        shift = predicted_time_shift(Mode.ABWV, tilt.omega0, env.tau, phi)
        errs.append(abs(peak_time(diff, -0.01, 0.01) / shift - 1))
    slope = float(np.polyfit(np.log(phis), np.log(errs), 1)[0])
    return abs(slope - 2) < 0.1, f"relative shift error {errs[0]:.1e} .. {errs[-1]:.1e}, log-log slope {slope:.3f}"


def check_jacobian():
    rng = np.random.default_rng(2)
    t = np.linspace(0, 1, 400)
    worst = 0.0
    for _ in range(20):
        p = np.array([rng.uniform(-2, 2), rng.uniform(0.3, 0.7), rng.uniform(0.05, 0.2), rng.uniform(-1, 1)])
        J = gaussian_jacobian(t, p)
        for k in range(4):
            h = 1e-6 * max(abs(p[k]), 1e-3)
            dp = np.zeros(4)
            dp[k] = h
            fd = (gaussian_model(t, p + dp) - gaussian_model(t, p - dp)) / (2 * h)
            scale = np.max(np.abs(fd)) or 1.0
            worst = max(worst, float(np.max(np.abs(J[:, k] - fd)) / scale))
    return worst <= 1e-6, f"max relative jacobian deviation {worst:.2e}"


def check_exact_recovery():
    dt = 20e-6
    t = dt * np.arange(50_000)
    truth = np.array([1.0, 0.5, 0.1, 0.0])
    fit = fit_gaussian(SampledTrace(0.0, dt, gaussian_model(t, truth)))
    dev = float(np.max(np.abs(fit.params - truth)))
    return fit.converged and dev < 1e-9, f"max parameter deviation {dev:.1e}"


def check_filter():
    dt = 20e-6
    filt = FilterConfig(30.0, 2)
    dc = apply_lowpass(SampledTrace(0.0, dt, np.ones(20_000)), filt).samples[-1]
    t = dt * np.arange(100_000)
    y = apply_lowpass(SampledTrace(0.0, dt, np.sin(2 * math.pi * 30.0 * t)), filt).samples
    gain = float(np.max(np.abs(y[len(y) // 2 :])))
    ok = abs(dc - 1) <= 1e-9 and abs(gain - 0.5) <= 0.02 * 0.5
    return ok, f"DC gain {dc:.12f}, 30 Hz gain {gain:.4f}"


def check_determinism():
    cfg = SweepConfig(
        modes=(Mode.ABWV,),
        abwv_grid=(1e-6,),
        train=replace(PulseTrainConfig(), n_pulses=2),
        noise=NoiseConfig(additive_rms=0.005),
        omega0=156e-9,
        seed=7,
    )
    a, b = rows_to_csv(run_sweep(cfg)), rows_to_csv(run_sweep(cfg))
    return a == b, "identical CSV across runs" if a == b else "CSV differs between runs"


CHECKS = {
    "energy_conservation": check_energy,
    "first_order_agreement": check_first_order,
    "jacobian_vs_finite_differences": check_jacobian,
    "exact_recovery": check_exact_recovery,
    "filter_dc_and_corner_gain": check_filter,
    "determinism": check_determinism,
}


def run_selftest(echo=print) -> bool:
    ok_all = True
    for name, check in CHECKS.items():
        ok, detail = check()
        ok_all &= bool(ok)
        echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok_all
