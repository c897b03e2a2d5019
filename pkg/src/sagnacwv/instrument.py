"""Acquisition chain: pulse trains, noise, preamplifier low-pass and trace I/O."""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigMismatch, InvalidWindow, MisalignedWindow
from .signal_model import (
    InterferometerGeometry,
    Mode,
    PulseEnvelope,
    TiltState,
    WorkingPoint,
    exact_port_intensities,
)

# above this many expected photons per sample the Poisson draw is replaced by
# its Gaussian limit
GAUSSIAN_PHOTON_LIMIT = 1e4


class Channel(str, Enum):
    SUM = "sum"
    DIFFERENCE = "difference"
    DARK = "dark"
    BRIGHT = "bright"


# RNG stream identifiers; ports get their own streams for shot noise
_STREAM_ID = {
    Channel.SUM: 1,
    Channel.DIFFERENCE: 2,
    Channel.DARK: 3,
    Channel.BRIGHT: 4,
    "port1": 11,
    "port2": 12,
    "bright_port": 13,
}


@dataclass(frozen=True)
class PulseTrainConfig:
    """Pulse train timing.  ``envelope.center`` is the offset within each period."""

    envelope: PulseEnvelope = field(default_factory=PulseEnvelope)
    f_r: float = 1.0
    n_pulses: int = 60
    sample_dt: float = 20e-6
    photon_scale: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.sample_dt > 0 or not self.f_r > 0:
            raise ValueError("sample_dt and f_r must be positive")
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if not self.f_r * self.sample_dt < 1:
            raise ValueError("need more than one sample per period")
        ratio = 1.0 / (self.f_r * self.sample_dt)
        if abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise MisalignedWindow("repetition period is not an integer number of samples")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def period(self) -> float:
        return 1.0 / self.f_r

    @property
    def samples_per_period(self) -> int:
        return int(round(1.0 / (self.f_r * self.sample_dt)))

    @property
    def n_samples(self) -> int:
        return self.n_pulses * self.samples_per_period


@dataclass(frozen=True)
class NoiseConfig:
    additive_rms: float = 0.0
    shot_noise: bool = False
    baseline_offset: float = 0.0

    def __post_init__(self):
        if self.additive_rms < 0:
            raise ValueError("additive_rms must be >= 0")


@dataclass(frozen=True)
class FilterConfig:
    """Cascade of identical one-pole low-pass sections (6 dB/oct each)."""

    corner_hz: float = 30.0
    poles: int = 2
    enabled: bool = True

    def __post_init__(self):
        if not self.corner_hz > 0:
            raise ValueError("corner_hz must be positive")
        if self.poles not in (1, 2, 3, 4):
            raise ValueError("poles must be 1..4")


@dataclass(frozen=True, eq=False)
class SampledTrace:
    t0: float
    dt: float
    samples: np.ndarray
    channel: Channel = Channel.SUM

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel", Channel(self.channel))

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    def with_samples(self, samples) -> "SampledTrace":
        return replace(self, samples=samples)


def rng_stream(seed: int, stream, pulse_index: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed on (seed, stream, pulse).

    Any pulse of any channel can be regenerated on its own, so slicing or
    parallel generation reproduce the same numbers.
    """
    stream_id = _STREAM_ID[stream] if not isinstance(stream, int) else stream
    key = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, stream_id, pulse_index])
    return np.random.Generator(np.random.Philox(key))


def lowpass_coefficients(corner_hz: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear-transform coefficients of ``1 / (1 + s / w_c)`` with a prewarped corner."""
    wT = 2.0 * math.tan(math.pi * corner_hz * dt)
    b0 = wT / (2.0 + wT)
    a1 = (2.0 - wT) / (2.0 + wT)
    return np.array([b0, b0]), np.array([1.0, -a1])


def apply_lowpass(trace: SampledTrace, filt: FilterConfig) -> SampledTrace:
    if not filt.enabled:
        return trace
    b, a = lowpass_coefficients(filt.corner_hz, trace.dt)
    y = np.asarray(trace.samples, dtype=float)
    for _ in range(filt.poles):
        y = lfilter(b, a, y)
    return trace.with_samples(y)


def add_noise(trace: SampledTrace, noise: NoiseConfig, rng: np.random.Generator) -> SampledTrace:
    """Add the channel's baseline offset and white Gaussian read noise."""
    y = trace.samples + noise.baseline_offset
    if noise.additive_rms > 0:
        y = y + rng.normal(0.0, noise.additive_rms, size=y.size)
    return trace.with_samples(y)


def _shot_noise(intensity: np.ndarray, photon_scale: float, rng: np.random.Generator) -> np.ndarray:
    mean = np.clip(intensity, 0.0, None) * photon_scale
    counts = np.empty_like(mean)
    big = mean > GAUSSIAN_PHOTON_LIMIT
    counts[big] = rng.normal(mean[big], np.sqrt(mean[big]))
    counts[~big] = rng.poisson(mean[~big])
    return counts / photon_scale


def _check_mode(mode: Mode, geom: InterferometerGeometry) -> None:
    expected = WorkingPoint.DARK_PORT if mode is Mode.WVA else WorkingPoint.BALANCED
    if geom.working_point is not expected:
        raise ConfigMismatch(
            f"{mode.value} needs working point {expected.value!r}, got {geom.working_point.value!r}"
        )


def generate_pulse_train(
    train: PulseTrainConfig,
    tilt: TiltState,
    geom: InterferometerGeometry,
    mode: Mode,
    noise: NoiseConfig = NoiseConfig(),
    filt: FilterConfig = FilterConfig(),
    bright: bool = False,
) -> tuple[SampledTrace, ...]:
    """Simulate the recorded traces of one acquisition set.

    ABWV returns ``(sum, difference)``.  WVA returns ``(dark,)``, or
    ``(dark, bright)`` when ``bright`` is set; the bright trace is the same
    detector with the interferometer moved to constructive interference, as
    used for the WVA amplitude and timing calibration.

    Every pulse sees the same ramp (tilt measured from its own peak), so the
    noiseless waveform is periodic; noise streams are keyed per pulse.
    """
    mode = Mode(mode)
    _check_mode(mode, geom)
    env = train.envelope
    if env.tau > 0.15 * train.period:
        raise InvalidWindow(f"tau = {env.tau} s does not fit a {train.period} s period")
    if not 0.0 <= env.center < train.period:
        raise InvalidWindow("pulse center must lie inside the repetition period")

    n = train.samples_per_period
    t_local = train.sample_dt * np.arange(n)
    port1, port2 = exact_port_intensities(t_local, tilt, geom, env)

    if mode is Mode.ABWV:
        channels = [Channel.SUM, Channel.DIFFERENCE]
    else:
        channels = [Channel.DARK]
        if bright:
            # constructive interference at the same detector: shift the tilt by half a fringe
            bright_tilt = replace(tilt, phi=math.pi / geom.phase_gain)
            bright_port, _ = exact_port_intensities(t_local, bright_tilt, geom, env)
            channels.append(Channel.BRIGHT)

    out = []
    for channel in channels:
        y = np.empty(train.n_samples)
        for k in range(train.n_pulses):
            p1, p2 = port1, port2
            if noise.shot_noise and train.photon_scale:
                p1 = _shot_noise(port1, train.photon_scale, rng_stream(train.seed, "port1", k))
                p2 = _shot_noise(port2, train.photon_scale, rng_stream(train.seed, "port2", k))
            if channel is Channel.SUM:
                clean = p1 + p2
            elif channel is Channel.DIFFERENCE:
                clean = p2 - p1
            elif channel is Channel.DARK:
                clean = p1
            else:
                clean = bright_port
                if noise.shot_noise and train.photon_scale:
                    clean = _shot_noise(
                        bright_port, train.photon_scale, rng_stream(train.seed, "bright_port", k)
                    )
            window = SampledTrace(k * train.period, train.sample_dt, clean, channel)
            window = add_noise(window, noise, rng_stream(train.seed, channel, k))
            y[k * n : (k + 1) * n] = window.samples
        trace = SampledTrace(0.0, train.sample_dt, y, channel)
        out.append(apply_lowpass(trace, filt))
    return tuple(out)


def slice_pulses(trace: SampledTrace, period: float) -> list[SampledTrace]:
    """Cut a trace into consecutive windows of one repetition period each."""
    ratio = period / trace.dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-6 * ratio or len(trace) % n:
        raise MisalignedWindow(
            f"trace of {len(trace)} samples is not a whole number of {ratio:g}-sample periods"
        )
    return [
        SampledTrace(trace.t0 + k * n * trace.dt, trace.dt, trace.samples[k * n : (k + 1) * n], trace.channel)
        for k in range(len(trace) // n)
    ]


# --- trace files -----------------------------------------------------------

# header: magic, dt, t0, channel code, sample count; little-endian throughout
TRACE_MAGIC = b"SWVTRC01"
_HEADER = struct.Struct("<8sddIQ")
_CHANNEL_CODE = {Channel.SUM: 0, Channel.DIFFERENCE: 1, Channel.DARK: 2, Channel.BRIGHT: 3}


def write_trace_binary(trace: SampledTrace, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TRACE_MAGIC, trace.dt, trace.t0, _CHANNEL_CODE[trace.channel], len(trace)))
        fh.write(np.asarray(trace.samples, dtype="<f8").tobytes())


def read_trace_binary(path) -> SampledTrace:
    data = Path(path).read_bytes()
    magic, dt, t0, code, count = _HEADER.unpack_from(data)
    if magic != TRACE_MAGIC:
        raise ValueError(f"{path}: not a trace file")
    samples = np.frombuffer(data, dtype="<f8", count=count, offset=_HEADER.size)
    channel = {v: k for k, v in _CHANNEL_CODE.items()}[code]
    return SampledTrace(t0, dt, samples.astype(float), channel)


def write_trace_csv(trace: SampledTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "value"])
        for t, v in zip(trace.times.tolist(), trace.samples.tolist()):
            writer.writerow([repr(t), repr(v)])


def read_trace_csv(path, channel: Channel = Channel.SUM) -> SampledTrace:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if header != ["time_s", "value"]:
            raise ValueError(f"{path}: expected a time_s,value header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] == 0 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns of samples")
    t, v = data[:, 0], data[:, 1]
    dt = (t[-1] - t[0]) / (len(t) - 1) if len(t) > 1 else 1.0
    return SampledTrace(float(t[0]), float(dt), v, channel)


def read_trace(path, channel: Channel = Channel.SUM) -> SampledTrace:
    """Read either trace format, sniffing the binary magic."""
    with open(path, "rb") as fh:
        head = fh.read(len(TRACE_MAGIC))
    if head == TRACE_MAGIC:
        return read_trace_binary(path)
    return read_trace_csv(path, channel)
