"""Sweep runner: phi sweeps for both techniques, interval detection, reporting."""
from __future__ import annotations

import csv
import io
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import NoValidPoints, SagnacError
from .estimator import VelocityEstimate, abwv_estimate, fit_gaussian, wva_estimate
from .instrument import (
    FilterConfig,
    NoiseConfig,
    PulseTrainConfig,
    generate_pulse_train,
    slice_pulses,
)
from .signal_model import (
    InterferometerGeometry,
    Mode,
    RampDrive,
    TiltState,
    WorkingPoint,
    postselection_probability,
    predicted_time_shift,
    ramp_angular_velocity,
    validity_margin,
)

DEFAULT_ABWV_GRID = tuple(np.geomspace(83e-9, 2.5e-6, 12).tolist())
DEFAULT_WVA_GRID = tuple(np.geomspace(1e-6, 9e-6, 8).tolist())

_WORKING_POINT = {Mode.WVA: WorkingPoint.DARK_PORT, Mode.ABWV: WorkingPoint.BALANCED}
_MODE_ID = {Mode.WVA: 1, Mode.ABWV: 2}


@dataclass(frozen=True)
class SweepConfig:
    modes: tuple[Mode, ...] = (Mode.ABWV, Mode.WVA)
    abwv_grid: tuple[float, ...] = DEFAULT_ABWV_GRID
    wva_grid: tuple[float, ...] = DEFAULT_WVA_GRID
    repeats: int = 1
    geometry: InterferometerGeometry = field(default_factory=InterferometerGeometry)
    train: PulseTrainConfig = field(default_factory=PulseTrainConfig)
    drive: RampDrive = field(default_factory=RampDrive)
    omega0: float | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    filt: FilterConfig = field(default_factory=FilterConfig)
    seed: int = 0
    workers: int = 1
    fit_baseline: bool = True

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(Mode(m) for m in self.modes))
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        for mode in self.modes:
            for phi in self.grid(mode):
                if not phi > 0:
                    raise ValueError("phi grid values must be positive")
                if not abs(self.geometry.phase_gain * phi) < math.pi / 2:
                    raise ValueError(f"phi = {phi} leaves the principal arcsin branch")

    def grid(self, mode: Mode) -> tuple[float, ...]:
        return self.abwv_grid if Mode(mode) is Mode.ABWV else self.wva_grid

    @property
    def omega0_true(self) -> float:
        return self.omega0 if self.omega0 is not None else ramp_angular_velocity(self.drive)


@dataclass(frozen=True)
class SweepRow:
    mode: Mode
    phi_set: float
    phi_hat: float = math.nan
    phi_hat_std: float | None = None
    phi_hat_sem: float | None = None
    delta_t: float = math.nan
    delta_t_std: float | None = None
    delta_t_sem: float | None = None
    omega0_hat: float = math.nan
    omega0_hat_std: float | None = None
    omega0_hat_sem: float | None = None
    tau_hat: float = math.nan
    amplification: float = math.nan
    weak1: float = math.nan
    weak2: float = math.nan
    postselection_prob: float = math.nan
    delta_t_theory: float = math.nan
    omega0_true: float = math.nan
    n_pulses: int = 0
    n_excluded: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and math.isfinite(self.omega0_hat)


ROW_COLUMNS = [f.name for f in fields(SweepRow)]


def point_seed(seed: int, mode: Mode, phi: float, repeat: int) -> int:
    """64-bit stream seed keyed on the point itself, not its position in the grid."""
    (bits,) = struct.unpack("<Q", struct.pack("<d", float(phi)))
    ss = np.random.SeedSequence(
        [seed & 0xFFFFFFFF, seed >> 32, _MODE_ID[mode], bits & 0xFFFFFFFF, bits >> 32, repeat]
    )
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def _estimate_once(cfg: SweepConfig, mode: Mode, phi: float, repeat: int) -> VelocityEstimate:
    geom = replace(cfg.geometry, working_point=_WORKING_POINT[mode])
    train = replace(cfg.train, seed=point_seed(cfg.seed, mode, phi, repeat))
    tilt = TiltState(phi, cfg.omega0_true)
    traces = generate_pulse_train(
        train, tilt, geom, mode, cfg.noise, cfg.filt, bright=(mode is Mode.WVA)
    )
    fits = [
        [fit_gaussian(p, fit_baseline=cfg.fit_baseline) for p in slice_pulses(tr, train.period)]
        for tr in traces
    ]
    if mode is Mode.ABWV:
        return abwv_estimate(fits[0], fits[1], geom)
    return wva_estimate(fits[0], fits[1], geom)


def run_point(cfg: SweepConfig, mode: Mode, phi: float) -> SweepRow:
    """Simulate, fit and invert one (mode, phi) point over all repeats."""
    mode = Mode(mode)
    env = cfg.train.envelope
    w0 = cfg.omega0_true
    geom = cfg.geometry
    margin = validity_margin(TiltState(phi, w0), geom, env)
    theory = dict(
        mode=mode,
        phi_set=phi,
        weak1=margin.weak1,
        weak2=margin.weak2,
        postselection_prob=postselection_probability(phi, geom),
        delta_t_theory=predicted_time_shift(mode, w0, env.tau, phi),
        omega0_true=w0,
    )
    try:
        per_pulse = []
        excluded = 0
        for r in range(cfg.repeats):
            est = _estimate_once(cfg, mode, phi, r)
            per_pulse.extend(est.per_pulse)
            excluded += est.n_excluded
        if not per_pulse:
            return SweepRow(**theory, n_excluded=excluded, error="NoConvergedPulses")
        pooled = VelocityEstimate(mode, tuple(per_pulse), excluded)
    except SagnacError as exc:
        return SweepRow(**theory, error=type(exc).__name__)

    values = {}
    for name in ("phi_hat", "delta_t", "omega0_hat"):
        s = pooled.stats(name)
        values[name] = s.mean
        values[f"{name}_std"] = s.std
        values[f"{name}_sem"] = s.sem
    return SweepRow(
        **theory,
        **values,
        tau_hat=pooled.tau_hat,
        amplification=pooled.amplification,
        n_pulses=len(per_pulse),
        n_excluded=excluded,
    )


def _run_point_args(args):
    return run_point(*args)


def run_sweep(cfg: SweepConfig, modes: Iterable[Mode] | None = None) -> list[SweepRow]:
    """Run every (mode, phi) point; rows come back in grid order per mode.

    Points never share random streams, so running them in parallel or in
    subsets gives identical rows.  A failing point yields a row carrying the
    error name instead of aborting the sweep.
    """
    modes = cfg.modes if modes is None else tuple(Mode(m) for m in modes)
    jobs = [(cfg, mode, phi) for mode in modes for phi in cfg.grid(mode)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_point_args, jobs))
    return [run_point(*job) for job in jobs]


# --- well-behaved intervals --------------------------------------------------


@dataclass(frozen=True)
class Interval:
    mode: Mode
    phi_min: float
    phi_max: float
    n_points: int


def detect_well_behaved_interval(rows: Sequence[SweepRow], rel_tol: float = 0.15) -> Interval:
    """Longest contiguous run of grid points recovering omega0 within ``rel_tol``.

    ``rows`` must belong to a single mode and be sorted by phi.  Ties go to
    the run at smaller phi (larger amplification).
    """
    if not rows:
        raise NoValidPoints("no rows")
    modes = {r.mode for r in rows}
    if len(modes) != 1:
        raise ValueError("rows must come from a single mode")
    phis = [r.phi_set for r in rows]
    if phis != sorted(phis):
        raise ValueError("rows must be sorted by phi")

    def good(r: SweepRow) -> bool:
        if not r.ok or r.omega0_true == 0:
            return False
        errs = (r.phi_hat_sem, r.delta_t_sem, r.omega0_hat_sem)
        if any(e is not None and not math.isfinite(e) for e in errs):
            return False
        return abs(r.omega0_hat - r.omega0_true) / abs(r.omega0_true) <= rel_tol

    best = None
    start = None
    for i, r in enumerate(list(rows) + [None]):
        if r is not None and good(r):
            if start is None:
                start = i
            continue
        if start is not None:
            if best is None or i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if best is None:
        raise NoValidPoints(f"no {rows[0].mode.value} point within {rel_tol:.0%}")
    lo, hi = best
    return Interval(rows[0].mode, rows[lo].phi_set, rows[hi - 1].phi_set, hi - lo)


def rows_by_mode(rows: Iterable[SweepRow]) -> dict[Mode, list[SweepRow]]:
    grouped: dict[Mode, list[SweepRow]] = {}
    for r in rows:
        grouped.setdefault(r.mode, []).append(r)
    return {m: sorted(rs, key=lambda r: r.phi_set) for m, rs in grouped.items()}


def well_behaved_intervals(rows: Iterable[SweepRow], rel_tol: float = 0.15) -> dict[Mode, Interval | None]:
    out: dict[Mode, Interval | None] = {}
    for mode, rs in rows_by_mode(rows).items():
        try:
            out[mode] = detect_well_behaved_interval(rs, rel_tol)
        except NoValidPoints:
            out[mode] = None
    return out


# --- reporting -------------------------------------------------------------

AMPLIFICATION_CONVENTION = (
    "max amplification = time shift per omega0*tau^2 at the smallest phi of each "
    "technique's well-behaved interval (1/phi_hat for ABWV, 2/phi_hat for WVA)"
)


@dataclass(frozen=True)
class Report:
    max_amplification: dict
    amplification_ratio: float | None
    intervals: dict
    geometric_enhancement: float
    text: str


def report(
    rows: Sequence[SweepRow],
    intervals: dict[Mode, Interval | None],
    geometry: InterferometerGeometry,
) -> Report:
    """Summarize a sweep: best amplification per technique, their ratio, intervals."""
    if not rows:
        raise ValueError("nothing to report")
    grouped = rows_by_mode(rows)
    max_amp: dict[Mode, float | None] = {}
    lines = ["sweep summary", "============="]
    enhancement = geometry.phase_gain
    lines.append(f"geometric enhancement 2*k0*L = {enhancement:.4g} "
                 f"(lambda = {geometry.wavelength:.4g} m, L = {geometry.lever_arm:.4g} m)")
    for mode in (Mode.ABWV, Mode.WVA):
        if mode not in grouped:
            continue
        iv = intervals.get(mode)
        if iv is None:
            lines.append(f"{mode.value.upper()}: well-behaved interval none detected")
            max_amp[mode] = None
            continue
        best = next(r for r in grouped[mode] if r.phi_set == iv.phi_min)
        max_amp[mode] = best.amplification
        lines.append(
            f"{mode.value.upper()}: well-behaved interval phi in [{iv.phi_min:.4g}, {iv.phi_max:.4g}] rad "
            f"({iv.n_points} points); max amplification {best.amplification:.4g} at phi = {best.phi_set:.4g} rad"
        )
    ratio = None
    if max_amp.get(Mode.ABWV) and max_amp.get(Mode.WVA):
        ratio = max_amp[Mode.ABWV] / max_amp[Mode.WVA]
        lines.append(f"amplification ratio ABWV/WVA = {ratio:.4g}")
    else:
        lines.append("amplification ratio ABWV/WVA = n/a")
    lines.append(f"convention: {AMPLIFICATION_CONVENTION}")
    failed = [r for r in rows if r.error]
    if failed:
        lines.append(f"{len(failed)} point(s) failed: " + ", ".join(
            f"{r.mode.value}@{r.phi_set:.3g}:{r.error}" for r in failed))
    return Report(max_amp, ratio, dict(intervals), enhancement, "\n".join(lines) + "\n")


# --- CSV -------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, Mode):
        return v.value
    if isinstance(v, float):
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in ROW_COLUMNS])
    return buf.getvalue()


def write_rows_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def read_rows_csv(path) -> list[SweepRow]:
    types = {f.name: f.type for f in fields(SweepRow)}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for name, raw in rec.items():
                kind = types[name]
                if name == "mode":
                    kw[name] = Mode(raw)
                elif name == "error":
                    kw[name] = raw
                elif raw == "NA":
                    kw[name] = None if "None" in str(kind) else math.nan
                elif kind in ("int", int):
                    kw[name] = int(raw)
                else:
                    kw[name] = float(raw)
            rows.append(SweepRow(**kw))
    return rows


def intervals_to_csv(intervals: dict[Mode, Interval | None]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mode", "phi_min", "phi_max", "n_points"])
    for mode, iv in intervals.items():
        if iv is None:
            writer.writerow([mode.value, "NA", "NA", 0])
        else:
            writer.writerow([mode.value, repr(iv.phi_min), repr(iv.phi_max), iv.n_points])
    return buf.getvalue()
