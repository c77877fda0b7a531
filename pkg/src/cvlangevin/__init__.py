"""Annealed Langevin posterior sampling for photon-limited imaging.

Reconstructs real intensity images and complex-valued transmittance objects
from Poisson-noise-corrupted intensity measurements: denoising, phase
retrieval, and Fourier ptychography, with exactly verifiable analytic priors
and a wire protocol for learned ones.
"""

from .core import (
    ConfigError,
    DivergenceError,
    MeasurementStack,
    NoiseParams,
    RngStream,
    SaturationError,
    ScheduleError,
    SigmaSchedule,
    TransportError,
    default_schedule,
    make_schedule,
    normalize,
    step_size,
)
from .forward import (
    ForwardModel,
    FourierMagnitude,
    Identity,
    Ptychography,
    PupilMask,
    all_pass_pupil,
    apply,
    adjoint,
    build_led_grid,
    fft2_unitary,
    ifft2_unitary,
    intensity,
    make_pupil,
    ptychography_model,
)
from .likelihood import (
    bessel_ratio,
    complex_score_general,
    complex_score_identity,
    poisson_score,
)
from .noise import (
    poisson_sample,
    quantize_counts,
    simulate_intensity_measurements,
    simulate_measurement,
)
from .prior import (
    DiscreteComplexPrior,
    DiscreteRealPrior,
    ExternalScoreProvider,
    ZeroPrior,
    score_complex,
    score_real,
    train_target_complex,
    train_target_real,
)
from .sampler import (
    Adjoint,
    EnsembleStats,
    FromMeasurement,
    NoisyHio,
    Provided,
    SamplerConfig,
    ensemble,
    init_state,
    run_complex,
    run_real,
)
from .hio import HioResult, align_ambiguities, correlation, hio_solve
from .metrics import phase_psnr, psnr, ssim
from .container import load_container, save_container

__version__ = "0.1.0"
