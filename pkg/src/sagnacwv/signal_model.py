"""Closed-form intensity models for the tilted-mirror Sagnac interferometer.

Two families live here: the exact two-port interference law, and the
first-order (weak-value) forms of the sum, difference and dark-port signals.
Geometry and piezo-ramp calibration helpers sit alongside them.

Conventions
-----------
* The tilt seen by a pulse is ``phi + omega0 * (t - center)``, i.e. ``phi`` is
  the mirror angle at the pulse peak.
* Port 1 is the nominally dark (weaker) port.  ``DarkPort`` biases it to
  destructive interference, ``Balanced`` biases the pair to equal outputs.
* The ABWV difference channel is ``port2 - port1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegeneratePhi, NonPositiveLeverArm


class WorkingPoint(str, Enum):
    DARK_PORT = "dark"
    BALANCED = "balanced"


class Mode(str, Enum):
    WVA = "wva"
    ABWV = "abwv"


@dataclass(frozen=True)
class BeamGeometry:
    """Pivot distances (m) and incidence angles (rad) of the two beams."""

    L1: float
    L2: float
    theta1: float
    theta2: float


def effective_lever_arm(beam: BeamGeometry) -> float:
    """Lever arm ``L1 cos(theta1) - L2 cos(theta2)`` converting tilt to path phase.

    Raises
    ------
    NonPositiveLeverArm
        If the result is zero or negative.
    """
    for theta in (beam.theta1, beam.theta2):
        if not 0.0 <= theta < math.pi / 2:
            raise ValueError(f"incidence angle {theta!r} outside [0, pi/2)")
    if beam.L1 < 0 or beam.L2 < 0:
        raise ValueError("pivot distances must be non-negative")
    L = beam.L1 * math.cos(beam.theta1) - beam.L2 * math.cos(beam.theta2)
    if L <= 0:
        raise NonPositiveLeverArm(f"effective lever arm {L!r} m is not positive")
    return L


@dataclass(frozen=True)
class InterferometerGeometry:
    """Optical layout and bias of the interferometer.

    ``lever_arm`` is derived from ``beam_geometry`` when the latter is given.
    ``leakage_epsilon`` models imperfect optics as phase-independent envelope
    light.  By default it all lands in port 1 (the dark port); with
    ``symmetric_leakage`` an amount ``epsilon`` lands in each port so that it
    cancels in the difference channel.
    """

    wavelength: float = 795e-9
    lever_arm: float | None = 5.64e-3
    beam_geometry: BeamGeometry | None = None
    working_point: WorkingPoint = WorkingPoint.BALANCED
    leakage_epsilon: float = 0.0
    symmetric_leakage: bool = False

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.beam_geometry is not None:
            derived = effective_lever_arm(self.beam_geometry)
            if self.lever_arm is not None and not math.isclose(
                self.lever_arm, derived, rel_tol=1e-12
            ):
                raise ValueError(
                    f"lever_arm {self.lever_arm!r} disagrees with beam geometry ({derived!r})"
                )
            object.__setattr__(self, "lever_arm", derived)
        if self.lever_arm is None or not self.lever_arm > 0:
            raise NonPositiveLeverArm("lever arm must be positive")
        eps_max = 0.5 if self.symmetric_leakage else 1.0
        if not 0.0 <= self.leakage_epsilon < eps_max:
            raise ValueError(f"leakage_epsilon must lie in [0, {eps_max})")
        object.__setattr__(self, "working_point", WorkingPoint(self.working_point))

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def phase_gain(self) -> float:
        """Differential phase per radian of tilt, ``2 k0 L``."""
        return 2.0 * self.k0 * self.lever_arm


@dataclass(frozen=True)
class TiltState:
    phi: float
    omega0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.omega0)):
            raise ValueError("tilt state must be finite")


@dataclass(frozen=True)
class PulseEnvelope:
    """Gaussian intensity envelope ``I0 exp(-(t - center)^2 / 2 tau^2)``."""

    peak_intensity: float = 1.0
    tau: float = 0.1
    center: float = 0.5

    def __post_init__(self):
        if not self.peak_intensity > 0:
            raise ValueError("peak_intensity must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def __call__(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.tau
        return self.peak_intensity * np.exp(-0.5 * u * u)


@dataclass(frozen=True)
class RampDrive:
    """Triangle ramp applied to the piezo mirror mount."""

    vpp: float = 30e-3
    alpha: float = 3.12e-6
    f_r: float = 1.0
    duty_cycle: float = 0.6

    def __post_init__(self):
        # vpp = 0 is accepted as "drive off"
        if self.vpp < 0 or not self.alpha > 0 or not self.f_r > 0:
            raise ValueError("ramp parameters must be positive")
        if not 0.0 < self.duty_cycle < 1.0:
            raise ValueError("duty_cycle must lie in (0, 1)")


def ramp_angular_velocity(drive: RampDrive) -> float:
    """Mirror angular velocity on the rising edge of the ramp.

    The rising edge sweeps ``alpha * vpp`` radians in ``duty_cycle / f_r``
    seconds, which for the 60 % ramp is ``5 alpha vpp f_r / 3``.  Other duty
    cycles use the same geometry.
    """
    return drive.alpha * drive.vpp * drive.f_r / drive.duty_cycle


def _tilt_phase(t, tilt: TiltState, geom: InterferometerGeometry, env: PulseEnvelope):
    t = np.asarray(t, dtype=float)
    return geom.phase_gain * (tilt.phi + tilt.omega0 * (t - env.center))


def exact_port_intensities(t, tilt: TiltState, geom: InterferometerGeometry, env: PulseEnvelope):
    """Exact two-port interference law including optical leakage.

    With ``delta = 2 k0 L (phi + omega0 (t - center)) + bias`` (bias 0 for the
    dark port, -pi/2 when balanced)::

        I1 = E(t) [(1 - s eps) sin^2(delta/2) + eps]
        I2 = E(t) [(1 - s eps) cos^2(delta/2) + (s - 1) eps]

    where ``s`` is 1 for dark-port leakage and 2 for symmetric leakage.  The two
    ports always sum to ``E(t)``.

    Returns
    -------
    (ndarray, ndarray)
        Port 1 and port 2 intensities at ``t``.
    """
    E = env(t)
    delta = _tilt_phase(t, tilt, geom, env)
    eps = geom.leakage_epsilon
    share = 2.0 if geom.symmetric_leakage else 1.0
    if geom.working_point is WorkingPoint.BALANCED:
        # half-angle form of the -pi/2 bias: exact balance at delta = 0
        sd = np.sin(delta)
        s2, c2 = 0.5 * (1.0 - sd), 0.5 * (1.0 + sd)
    else:
        s2, c2 = np.sin(0.5 * delta) ** 2, np.cos(0.5 * delta) ** 2
    port1 = E * ((1.0 - share * eps) * s2 + eps)
    port2 = E * ((1.0 - share * eps) * c2 + (share - 1.0) * eps)
    return port1, port2


def _require_phi(phi: float) -> None:
    if phi == 0:
        raise DegeneratePhi("time shift is undefined at phi = 0; use the exact model")


def sum_signal_approx(t, tilt: TiltState, geom: InterferometerGeometry, env: PulseEnvelope):
    return env(t)


def diff_signal_approx(t, tilt: TiltState, geom: InterferometerGeometry, env: PulseEnvelope):
    """First-order ABWV difference signal: shifted Gaussian of amplitude I0 sin(2k0L phi)."""
    _require_phi(tilt.phi)
    shift = tilt.omega0 * env.tau**2 / tilt.phi
    u = (np.asarray(t, dtype=float) - env.center - shift) / env.tau
    return env.peak_intensity * math.sin(geom.phase_gain * tilt.phi) * np.exp(-0.5 * u * u)


def wva_dark_approx(t, tilt: TiltState, geom: InterferometerGeometry, env: PulseEnvelope):
    _require_phi(tilt.phi)
    shift = 2.0 * tilt.omega0 * env.tau**2 / tilt.phi
    u = (np.asarray(t, dtype=float) - env.center - shift) / env.tau
    return env.peak_intensity * postselection_probability(tilt.phi, geom) * np.exp(-0.5 * u * u)


def postselection_probability(phi, geom: InterferometerGeometry):
    """Fraction of input photons reaching the dark port, ``sin^2(k0 L phi)``."""
    p = np.sin(geom.k0 * geom.lever_arm * np.asarray(phi, dtype=float)) ** 2
    return float(p) if np.ndim(p) == 0 else p


def predicted_time_shift(mode: Mode, omega0: float, tau: float, phi: float) -> float:
    """First-order pointer shift: ``omega0 tau^2 / phi`` (ABWV), twice that for WVA."""
    _require_phi(phi)
    factor = 2.0 if Mode(mode) is Mode.WVA else 1.0
    return factor * omega0 * tau**2 / phi


@dataclass(frozen=True)
class ValidityMargin:
    weak1: float  # omega0 tau / phi
    weak2: float  # 2 k0 L phi


def validity_margin(tilt: TiltState, geom: InterferometerGeometry, env: PulseEnvelope) -> ValidityMargin:
    _require_phi(tilt.phi)
    return ValidityMargin(
        weak1=tilt.omega0 * env.tau / tilt.phi,
        weak2=geom.phase_gain * tilt.phi,
    )
