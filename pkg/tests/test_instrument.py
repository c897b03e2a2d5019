import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagnacwv.errors import ConfigMismatch, InvalidWindow, MisalignedWindow
from sagnacwv.estimator import fit_gaussian
from sagnacwv.instrument import (
    Channel,
    FilterConfig,
    NoiseConfig,
    PulseTrainConfig,
    SampledTrace,
    add_noise,
    apply_lowpass,
    generate_pulse_train,
    read_trace,
    read_trace_binary,
    read_trace_csv,
    rng_stream,
    slice_pulses,
    write_trace_binary,
    write_trace_csv,
)
from sagnacwv.signal_model import (
    InterferometerGeometry,
    Mode,
    PulseEnvelope,
    TiltState,
    WorkingPoint,
    exact_port_intensities,
)

OFF = FilterConfig(enabled=False)
BALANCED = InterferometerGeometry()
DARK = InterferometerGeometry(working_point=WorkingPoint.DARK_PORT)


def small_train(n_pulses=3, dt=1e-4, **kw):
    return PulseTrainConfig(n_pulses=n_pulses, sample_dt=dt, **kw)


# --- pulse trains ----------------------------------------------------------------

def test_null_tilt_gives_zero_difference():
    s, d = generate_pulse_train(small_train(), TiltState(0.0, 0.0), BALANCED, Mode.ABWV, filt=OFF)
    assert s.channel is Channel.SUM and d.channel is Channel.DIFFERENCE
    assert np.all(d.samples == 0)
    env = PulseEnvelope()
    t_local = 1e-4 * np.arange(10_000)
    for k in range(3):
        np.testing.assert_allclose(s.samples[k * 10_000:(k + 1) * 10_000], env(t_local), rtol=1e-14)


def test_difference_to_sum_ratio_matches_first_order():
    phi = 1e-7
    s, d = generate_pulse_train(small_train(1, dt=1e-5), TiltState(phi, 156e-9), BALANCED, Mode.ABWV, filt=OFF)
    ratio = fit_gaussian(d).amplitude / fit_gaussian(s).amplitude
    assert ratio == pytest.approx(math.sin(BALANCED.phase_gain * phi), rel=1e-6 + 0.5 * (156e-9 * 0.1 / phi) ** 2)
    # with the ramp stopped the difference is an exact scaled copy of the sum
    s, d = generate_pulse_train(small_train(1), TiltState(phi, 0.0), BALANCED, Mode.ABWV, filt=OFF)
    peak = np.argmax(s.samples)
    assert d.samples[peak] / s.samples[peak] == pytest.approx(math.sin(BALANCED.phase_gain * phi), rel=1e-6)


def test_default_trace_length():
    train = PulseTrainConfig()
    assert train.n_samples == 3_000_000
    (dark,) = generate_pulse_train(train, TiltState(4e-6, 156e-9), DARK, Mode.WVA, filt=OFF)
    assert len(dark) == 3_000_000
    assert dark.dt == 20e-6


def test_mode_must_match_working_point():
    with pytest.raises(ConfigMismatch):
        generate_pulse_train(small_train(), TiltState(1e-6), DARK, Mode.ABWV)
    with pytest.raises(ConfigMismatch):
        generate_pulse_train(small_train(), TiltState(1e-6), BALANCED, Mode.WVA)


def test_pulse_must_fit_period():
    train = small_train(envelope=PulseEnvelope(tau=0.2))
    with pytest.raises(InvalidWindow):
        generate_pulse_train(train, TiltState(1e-6), BALANCED, Mode.ABWV)


def test_wva_bright_reference_is_constructive():
    dark, bright = generate_pulse_train(small_train(1), TiltState(4e-6, 0.0), DARK, Mode.WVA, filt=OFF, bright=True)
    assert bright.channel is Channel.BRIGHT
    env = PulseEnvelope()
    np.testing.assert_allclose(bright.samples, env(bright.times), rtol=1e-12, atol=1e-300)


def test_channels_are_port_sum_and_difference():
    train = small_train(2)
    tilt = TiltState(5e-7, 156e-9)
    s, d = generate_pulse_train(train, tilt, BALANCED, Mode.ABWV, filt=OFF)
    t_local = train.sample_dt * np.arange(train.samples_per_period)
    p1, p2 = exact_port_intensities(t_local, tilt, BALANCED, train.envelope)
    np.testing.assert_allclose(s.samples[-len(t_local):], p1 + p2, rtol=1e-15)
    np.testing.assert_allclose(d.samples[-len(t_local):], p2 - p1, rtol=1e-15, atol=1e-18)


def test_channel_center_offset_is_filter_invariant():
    train = small_train(1, dt=20e-6)
    tilt = TiltState(1e-6, 156e-9)
    offsets = []
    for filt in (OFF, FilterConfig()):
        s, d = generate_pulse_train(train, tilt, BALANCED, Mode.ABWV, filt=filt)
        offsets.append(fit_gaussian(d).center - fit_gaussian(s).center)
    assert abs(offsets[0] - offsets[1]) < 0.1 * train.sample_dt


def test_generation_is_deterministic():
    train = small_train(3, seed=12345, photon_scale=1e5)
    noise = NoiseConfig(additive_rms=0.01, shot_noise=True, baseline_offset=0.002)
    a = generate_pulse_train(train, TiltState(1e-6, 1e-7), BALANCED, Mode.ABWV, noise)
    b = generate_pulse_train(train, TiltState(1e-6, 1e-7), BALANCED, Mode.ABWV, noise)
    for x, y in zip(a, b):
        assert x.samples.tobytes() == y.samples.tobytes()
    c = generate_pulse_train(PulseTrainConfig(n_pulses=3, sample_dt=1e-4, seed=12346, photon_scale=1e5),
                             TiltState(1e-6, 1e-7), BALANCED, Mode.ABWV, noise)
    assert a[0].samples.tobytes() != c[0].samples.tobytes()


def test_noise_streams_are_per_pulse():
    """Pulse k of a long train equals pulse k regenerated alone (same stream)."""
    noise = NoiseConfig(additive_rms=0.01)
    tilt = TiltState(1e-6, 1e-7)
    long = generate_pulse_train(small_train(4, seed=9), tilt, BALANCED, Mode.ABWV, noise, OFF)[1]
    short = generate_pulse_train(small_train(1, seed=9), tilt, BALANCED, Mode.ABWV, noise, OFF)[1]
    first = slice_pulses(long, 1.0)[0]
    assert first.samples.tobytes() == short.samples.tobytes()


def test_shot_noise_scales_as_inverse_sqrt_photons():
    """Relative fluctuation near the peak drops by sqrt(10) per decade of photon scale."""
    env = PulseEnvelope(tau=0.1, center=0.5)
    rel = []
    for scale in (1e2, 1e3):
        train = PulseTrainConfig(envelope=env, n_pulses=200, sample_dt=1e-3, photon_scale=scale, seed=5)
        (dark, bright) = generate_pulse_train(train, TiltState(0.0, 0.0), DARK, Mode.WVA,
                                             NoiseConfig(shot_noise=True), OFF, bright=True)
        per = bright.samples.reshape(200, -1)[:, 495:506]
        expected = env(1e-3 * np.arange(495, 506))
        rel.append(np.std(per / expected))
    assert rel[0] / rel[1] == pytest.approx(math.sqrt(10), rel=0.10)
    assert rel[1] == pytest.approx(1 / math.sqrt(1e3), rel=0.10)


def test_shot_noise_gaussian_limit_is_unbiased():
    train = PulseTrainConfig(n_pulses=20, sample_dt=1e-3, photon_scale=1e6, seed=1)
    (_, bright) = generate_pulse_train(train, TiltState(0.0, 0.0), DARK, Mode.WVA,
                                      NoiseConfig(shot_noise=True), OFF, bright=True)
    per = bright.samples.reshape(20, -1)
    assert per[:, 500].mean() == pytest.approx(1.0, abs=5e-4)


# --- low-pass ------------------------------------------------------------------

def test_lowpass_dc_gain():
    tr = SampledTrace(0.0, 20e-6, np.full(20_000, 3.5))
    y = apply_lowpass(tr, FilterConfig(poles=2)).samples
    assert y[-1] == pytest.approx(3.5, rel=1e-9)


@pytest.mark.parametrize("poles", [1, 2, 3, 4])
def test_lowpass_step_response(poles):
    dt, fc = 20e-6, 30.0
    n = int(1.0 / dt)
    y = apply_lowpass(SampledTrace(0.0, dt, np.ones(n)), FilterConfig(fc, poles)).samples
    assert np.all(np.diff(y) >= -1e-15)
    bound = 7 / (2 * math.pi * fc) * poles
    settle = np.argmax(y >= 1 - 1e-3) * dt
    assert 0 < settle <= bound
    # continuous-time oracle: cascade of identical first-order lags is an Erlang CDF
    x = 2 * math.pi * fc * dt * np.arange(n)
    erlang = 1 - np.exp(-x) * sum(x**k / math.factorial(k) for k in range(poles))
    assert np.max(np.abs(y - erlang)) < 5e-3


def test_lowpass_corner_gain_two_poles():
    dt = 20e-6
    t = dt * np.arange(200_000)
    y = apply_lowpass(SampledTrace(0.0, dt, np.sin(2 * math.pi * 30.0 * t)), FilterConfig(30.0, 2)).samples
    gain = np.max(np.abs(y[100_000:]))
    assert gain == pytest.approx(0.5, rel=0.02)


def test_lowpass_disabled_is_identity():
    tr = SampledTrace(0.0, 1e-3, np.arange(20.0))
    assert apply_lowpass(tr, OFF) is tr


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
def test_lowpass_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=2000), rng.normal(size=2000)
    f = FilterConfig(30.0, 2)
    lhs = apply_lowpass(SampledTrace(0, 20e-6, a * x + b * y), f).samples
    rhs = a * apply_lowpass(SampledTrace(0, 20e-6, x), f).samples + b * apply_lowpass(SampledTrace(0, 20e-6, y), f).samples
    scale = max(np.max(np.abs(lhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale + 1e-300


# --- noise ----------------------------------------------------------------------

def test_add_noise_identity():
    tr = SampledTrace(0.0, 1.0, np.linspace(0, 1, 50))
    out = add_noise(tr, NoiseConfig(), rng_stream(0, Channel.SUM, 0))
    np.testing.assert_array_equal(out.samples, tr.samples)


def test_add_noise_variance():
    tr = SampledTrace(0.0, 1.0, np.zeros(1_000_000))
    out = add_noise(tr, NoiseConfig(additive_rms=0.3), rng_stream(4, Channel.SUM, 0))
    assert out.samples.var() == pytest.approx(0.09, rel=0.05)


def test_add_noise_baseline():
    tr = SampledTrace(0.0, 1.0, np.zeros(100))
    out = add_noise(tr, NoiseConfig(baseline_offset=0.25), rng_stream(0, Channel.SUM, 0))
    assert np.all(out.samples == 0.25)


# --- slicing and files -----------------------------------------------------------

def test_slice_default_set():
    tr = SampledTrace(0.0, 20e-6, np.zeros(3_000_000))
    pulses = slice_pulses(tr, 1.0)
    assert len(pulses) == 60
    assert all(len(p) == 50_000 for p in pulses)
    assert pulses[7].t0 == pytest.approx(7.0)


def test_slice_single_pulse():
    tr = SampledTrace(2.0, 0.01, np.arange(100.0))
    (p,) = slice_pulses(tr, 1.0)
    np.testing.assert_array_equal(p.samples, tr.samples)
    assert p.t0 == 2.0


def test_slice_misaligned():
    with pytest.raises(MisalignedWindow):
        slice_pulses(SampledTrace(0.0, 0.01, np.zeros(150)), 1.0)
    with pytest.raises(MisalignedWindow):
        PulseTrainConfig(sample_dt=0.3)


def test_binary_round_trip(tmp_path):
    tr = SampledTrace(1.5, 20e-6, np.random.default_rng(0).normal(size=1000), Channel.DIFFERENCE)
    path = tmp_path / "t.trc"
    write_trace_binary(tr, path)
    back = read_trace_binary(path)
    assert back.samples.tobytes() == tr.samples.tobytes()
    assert (back.t0, back.dt, back.channel) == (tr.t0, tr.dt, tr.channel)
    assert path.stat().st_size == 8 + 8 + 8 + 4 + 8 + 8 * 1000
    assert read_trace(path).channel is Channel.DIFFERENCE


def test_csv_round_trip(tmp_path):
    tr = SampledTrace(0.0, 1e-3, np.random.default_rng(1).normal(size=200), Channel.DARK)
    path = tmp_path / "t.csv"
    write_trace_csv(tr, path)
    assert path.read_text().splitlines()[0] == "time_s,value"
    back = read_trace_csv(path, Channel.DARK)
    np.testing.assert_array_equal(back.samples, tr.samples)
    assert back.dt == pytest.approx(tr.dt, rel=1e-12)
    assert read_trace(path, Channel.DARK).channel is Channel.DARK


def test_trace_rejects_bad_samples():
    with pytest.raises(ValueError):
        SampledTrace(0.0, 1.0, [])
    with pytest.raises(ValueError):
        SampledTrace(0.0, 1.0, [1.0, np.nan])
    with pytest.raises(ValueError):
        SampledTrace(0.0, 0.0, [1.0])
