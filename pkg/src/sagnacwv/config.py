"""INI-style experiment configuration.

Every key is optional; an empty file reproduces the headline setup
(795 nm, L = 5.64 mm, 60 pulses at 1 Hz sampled every 20 us, 30 Hz two-pole
preamp, 30 mV ramp on a 3.12 urad/V piezo, i.e. omega0 = 156 nrad/s).

Sections and keys::

    [geometry]  wavelength, lever_arm, L1, L2, theta1, theta2,
                leakage_epsilon, symmetric_leakage
    [pulse]     peak_intensity, tau, center, f_r, n_pulses, sample_dt, photon_scale
    [drive]     vpp, alpha, duty_cycle, omega0
    [noise]     additive_rms, shot_noise, baseline_offset
    [filter]    corner_hz, poles, enabled
    [sweep]     modes, abwv_grid, abwv_phi_min, abwv_phi_max, abwv_points,
                wva_grid, wva_phi_min, wva_phi_max, wva_points,
                repeats, seed, workers, rel_tol, fit_baseline

Grids are either an explicit comma-separated list or log-spaced
``*_phi_min``/``*_phi_max``/``*_points``.  SI units throughout.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .harness import DEFAULT_ABWV_GRID, DEFAULT_WVA_GRID, SweepConfig
from .instrument import FilterConfig, NoiseConfig, PulseTrainConfig
from .signal_model import BeamGeometry, InterferometerGeometry, Mode, PulseEnvelope, RampDrive

DEFAULTS = {
    "geometry": {
        "wavelength": "795e-9",
        "lever_arm": "5.64e-3",
        "L1": "",
        "L2": "",
        "theta1": "",
        "theta2": "",
        "leakage_epsilon": "0.03",
        "symmetric_leakage": "true",
    },
    "pulse": {
        "peak_intensity": "1.0",
        "tau": "0.1",
        "center": "",
        "f_r": "1.0",
        "n_pulses": "60",
        "sample_dt": "20e-6",
        "photon_scale": "",
    },
    "drive": {"vpp": "30e-3", "alpha": "3.12e-6", "duty_cycle": "0.6", "omega0": ""},
    "noise": {"additive_rms": "0.005", "shot_noise": "false", "baseline_offset": "0.0"},
    "filter": {"corner_hz": "30", "poles": "2", "enabled": "true"},
    "sweep": {
        "modes": "both",
        "abwv_grid": "",
        "abwv_phi_min": "",
        "abwv_phi_max": "",
        "abwv_points": "",
        "wva_grid": "",
        "wva_phi_min": "",
        "wva_phi_max": "",
        "wva_points": "",
        "repeats": "1",
        "seed": "0",
        "workers": "1",
        "rel_tol": "0.15",
        "fit_baseline": "true",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    sweep: SweepConfig = field(default_factory=SweepConfig)
    rel_tol: float = 0.15


def parse_modes(text: str) -> tuple[Mode, ...]:
    text = text.strip().lower()
    if text == "both":
        return (Mode.ABWV, Mode.WVA)
    try:
        return tuple(Mode(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"unknown mode in {text!r}") from exc


def _grid(sec, prefix: str, default: tuple[float, ...]) -> tuple[float, ...]:
    explicit = sec[f"{prefix}_grid"].strip()
    if explicit:
        return tuple(float(x) for x in explicit.split(","))
    lo, hi, n = (sec[f"{prefix}_{k}"].strip() for k in ("phi_min", "phi_max", "points"))
    if not (lo or hi or n):
        return default
    if not (lo and hi and n):
        raise ConfigError(f"{prefix}_phi_min, {prefix}_phi_max and {prefix}_points go together")
    return tuple(np.geomspace(float(lo), float(hi), int(n)).tolist())


def _opt_float(text: str) -> float | None:
    text = text.strip()
    return float(text) if text else None


def load_config(path=None, text: str | None = None) -> ExperimentConfig:
    """Parse a config file (or string); unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(DEFAULTS)
    try:
        if path is not None:
            with open(path) as fh:
                user = fh.read()
        else:
            user = text or ""
        overlay = configparser.ConfigParser(interpolation=None)
        overlay.optionxform = str
        overlay.read_string(user)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from exc
    for name in overlay.sections():
        if name not in DEFAULTS:
            raise ConfigError(f"unknown section [{name}]")
        for key, value in overlay[name].items():
            if key not in DEFAULTS[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            parser[name][key] = value

    try:
        return _build(parser)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(p: configparser.ConfigParser) -> ExperimentConfig:
    g = p["geometry"]
    beam_keys = ("L1", "L2", "theta1", "theta2")
    beam_vals = [g[k].strip() for k in beam_keys]
    beam = None
    lever_arm = _opt_float(g["lever_arm"])
    if any(beam_vals):
        if not all(beam_vals):
            raise ConfigError("L1, L2, theta1 and theta2 must be given together")
        beam = BeamGeometry(*(float(v) for v in beam_vals))
        # derived lever arm replaces the scalar one
        lever_arm = None
    geometry = InterferometerGeometry(
        wavelength=float(g["wavelength"]),
        lever_arm=lever_arm,
        beam_geometry=beam,
        leakage_epsilon=float(g["leakage_epsilon"]),
        symmetric_leakage=g.getboolean("symmetric_leakage"),
    )

    pu = p["pulse"]
    f_r = float(pu["f_r"])
    center = _opt_float(pu["center"])
    envelope = PulseEnvelope(
        peak_intensity=float(pu["peak_intensity"]),
        tau=float(pu["tau"]),
        center=0.5 / f_r if center is None else center,
    )
    train = PulseTrainConfig(
        envelope=envelope,
        f_r=f_r,
        n_pulses=int(pu["n_pulses"]),
        sample_dt=float(pu["sample_dt"]),
        photon_scale=_opt_float(pu["photon_scale"]),
    )

    d = p["drive"]
    drive = RampDrive(
        vpp=float(d["vpp"]), alpha=float(d["alpha"]), f_r=f_r, duty_cycle=float(d["duty_cycle"])
    )

    n = p["noise"]
    noise = NoiseConfig(
        additive_rms=float(n["additive_rms"]),
        shot_noise=n.getboolean("shot_noise"),
        baseline_offset=float(n["baseline_offset"]),
    )
    f = p["filter"]
    filt = FilterConfig(
        corner_hz=float(f["corner_hz"]), poles=int(f["poles"]), enabled=f.getboolean("enabled")
    )

    s = p["sweep"]
    sweep = SweepConfig(
        modes=parse_modes(s["modes"]),
        abwv_grid=_grid(s, "abwv", DEFAULT_ABWV_GRID),
        wva_grid=_grid(s, "wva", DEFAULT_WVA_GRID),
        repeats=int(s["repeats"]),
        geometry=geometry,
        train=train,
        drive=drive,
        omega0=_opt_float(d["omega0"]),
        noise=noise,
        filt=filt,
        seed=int(s["seed"]),
        workers=int(s["workers"]),
        fit_baseline=s.getboolean("fit_baseline"),
    )
    return ExperimentConfig(sweep=sweep, rel_tol=float(s["rel_tol"]))
