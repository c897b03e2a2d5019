"""Simulation of weak-value (WVA) and almost-balanced weak-value (ABWV)
readout of a slowly rotating mirror in a modified Sagnac interferometer."""

from .errors import *  # noqa: F401,F403
from .estimator import (
    EnsembleStats,
    GaussianFit,
    VelocityEstimate,
    abwv_estimate,
    ensemble_stats,
    fit_gaussian,
    wva_estimate,
)
from .harness import (
    SweepConfig,
    SweepRow,
    detect_well_behaved_interval,
    report,
    run_sweep,
    well_behaved_intervals,
)
from .instrument import (
    Channel,
    FilterConfig,
    NoiseConfig,
    PulseTrainConfig,
    SampledTrace,
    add_noise,
    apply_lowpass,
    generate_pulse_train,
    slice_pulses,
)
from .signal_model import (
    BeamGeometry,
    InterferometerGeometry,
    Mode,
    PulseEnvelope,
    RampDrive,
    TiltState,
    WorkingPoint,
    diff_signal_approx,
    effective_lever_arm,
    exact_port_intensities,
    postselection_probability,
    predicted_time_shift,
    ramp_angular_velocity,
    sum_signal_approx,
    validity_margin,
    wva_dark_approx,
)

__version__ = "0.1.0"
