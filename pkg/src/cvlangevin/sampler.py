"""Annealed Langevin samplers for the real (Poisson) and complex branches.

One update per noise level by default:

    step t:  alpha_t = eps * sigma_t^2 / sigma_T^2
             delta   = likelihood score + prior score (both at sigma_t)
             state  += alpha_t * delta + sqrt(2 alpha_t) * n_t

with standard-normal n_t per pixel (independent real and imaginary parts in
the complex branch). The final iterate is the estimate; no extra denoising
pass. Real iterates are clamped from below after every step because the
Poisson score divides by the iterate; complex iterates need no clamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    DivergenceError,
    MeasurementStack,
    RngStream,
    SigmaSchedule,
    as_complex_image,
    as_real_image,
    step_size,
)
from . import forward, hio as hio_mod, likelihood


@dataclass(frozen=True)
class FromMeasurement:
    """Start from the data: y clamped (real) or sqrt(mean y) with zero phase (complex)."""


@dataclass(frozen=True)
class NoisyHio:
    """HIO solution plus complex Gaussian noise of std noise_scale * sigma_1 per component."""

    noise_scale: float = 1.0
    beta: float = 0.9
    iters: int = 600
    restarts: int = 50


@dataclass(frozen=True)
class Adjoint:
    """Backprojected magnitudes H^H sqrt(y), normalized to unit peak amplitude."""


@dataclass(frozen=True)
class Provided:
    image: np.ndarray


InitSpec = FromMeasurement | NoisyHio | Adjoint | Provided


@dataclass(frozen=True)
class SamplerConfig:
    schedule: SigmaSchedule
    steps_per_level: int = 1
    clamp_floor: float = 1e-4
    init: InitSpec = field(default_factory=FromMeasurement)
    record_trajectory: bool = False

    def __post_init__(self):
        if self.steps_per_level < 1:
            raise ConfigError(f"steps_per_level must be >= 1, got {self.steps_per_level}")
        if not self.clamp_floor > 0:
            raise ConfigError(f"clamp_floor must be positive, got {self.clamp_floor}")


def run_real(
    y,
    provider,
    cfg: SamplerConfig,
    rng: RngStream,
    trajectory: list | None = None,
    diag: dict | None = None,
) -> np.ndarray:
    """Posterior-sample an intensity image from one noisy Poissonian measurement."""
    yv = as_real_image(y, "y")
    if np.any(yv < 0):
        raise ValueError("measurement must be non-negative")
    sched = cfg.schedule
    if isinstance(cfg.init, Provided):
        x = as_real_image(cfg.init.image, "init image").copy()
    elif isinstance(cfg.init, FromMeasurement):
        x = np.maximum(yv, cfg.clamp_floor)
    else:
        raise ConfigError(f"{type(cfg.init).__name__} initialization needs a forward model")
    gen = rng.generator()
    step_norms = []
    for t in range(1, sched.t_count + 1):
        sig = float(sched.sigmas[t - 1])
        alpha = step_size(sched, t)
        for _ in range(cfg.steps_per_level):
            delta = likelihood.poisson_score(
                yv, x, sched.sigma0, sig, floor=cfg.clamp_floor, diag=diag
            ) + provider.score_real(x, sig)
            x = x + alpha * delta + np.sqrt(2 * alpha) * gen.standard_normal(x.shape)
            x = np.maximum(x, cfg.clamp_floor)
        if not np.isfinite(x).all():
            raise DivergenceError(f"real sampler diverged at level {t}", iteration=t)
        step_norms.append(alpha * float(np.linalg.norm(delta)))
        if cfg.record_trajectory and trajectory is not None:
            trajectory.append(x.copy())
    if diag is not None:
        diag["step_norms"] = step_norms
    return x


def init_state(
    cfg: SamplerConfig,
    stack: MeasurementStack,
    model: forward.ForwardModel,
    rng: RngStream,
) -> np.ndarray:
    """Initial complex iterate per the configured strategy."""
    init = cfg.init
    if isinstance(init, Provided):
        return as_complex_image(init.image, "init image").copy()
    if isinstance(init, FromMeasurement):
        mean_y = np.mean([im for im in stack.images], axis=0)
        state = np.sqrt(np.maximum(mean_y, 0.0)).astype(np.complex128)
        if isinstance(model, forward.FourierMagnitude):
            raise ConfigError(
                "FromMeasurement lives on the measurement grid; use NoisyHio, "
                "Adjoint or Provided for the Fourier-magnitude model"
            )
        return state
    if isinstance(init, Adjoint):
        fields = [np.sqrt(np.maximum(im, 0.0)).astype(np.complex128) for im in stack.images]
        img = forward.adjoint(model, fields)
        peak = np.abs(img).max()
        return img / peak if peak > 0 else img
    if isinstance(init, NoisyHio):
        if not isinstance(model, forward.FourierMagnitude):
            raise ConfigError("NoisyHio initialization requires the Fourier-magnitude model")
        mags = np.sqrt(np.maximum(stack.images[0], 0.0))
        ph, pw = mags.shape
        f = model.pad_factor
        support = np.zeros(mags.shape, dtype=bool)
        support[: ph // f, : pw // f] = True
        gen = rng.generator()
        result = hio_mod.hio_solve(
            mags,
            support,
            beta=init.beta,
            iters=init.iters,
            restarts=init.restarts,
            rng=gen,
            real_nonneg=True,
        )
        obj = result.best[: ph // f, : pw // f]
        noise_std = init.noise_scale * float(cfg.schedule.sigmas[0])
        noise = noise_std * (
            gen.standard_normal(obj.shape) + 1j * gen.standard_normal(obj.shape)
        )
        return obj + noise
    raise ConfigError(f"unknown init spec {type(init)!r}")


def run_complex(
    stack: MeasurementStack,
    model: forward.ForwardModel,
    provider,
    cfg: SamplerConfig,
    rng: RngStream,
    trajectory: list | None = None,
    diag: dict | None = None,
) -> np.ndarray:
    """Posterior-sample a complex object from an intensity measurement stack."""
    sched = cfg.schedule
    o = init_state(cfg, stack, model, rng)
    gen = rng.generator()
    step_norms = []
    for t in range(1, sched.t_count + 1):
        sig = float(sched.sigmas[t - 1])
        alpha = step_size(sched, t)
        for _ in range(cfg.steps_per_level):
            delta = likelihood.complex_score_general(
                stack, o, model, sched.sigma0, sig
            ) + provider.score_complex(o, sig)
            noise = gen.standard_normal(o.shape) + 1j * gen.standard_normal(o.shape)
            o = o + alpha * delta + np.sqrt(2 * alpha) * noise
        if not (np.isfinite(o.real).all() and np.isfinite(o.imag).all()):
            raise DivergenceError(f"complex sampler diverged at level {t}", iteration=t)
        step_norms.append(alpha * float(np.linalg.norm(delta)))
        if cfg.record_trajectory and trajectory is not None:
            trajectory.append(o.copy())
    if diag is not None:
        diag["step_norms"] = step_norms
    return o


@dataclass(frozen=True)
class EnsembleStats:
    """Per-pixel spread of repeated stochastic reconstructions."""

    mean: np.ndarray
    variance: np.ndarray
    samples: tuple
    phase_mean: np.ndarray | None = None
    phase_variance: np.ndarray | None = None


def ensemble(run, n_runs: int, jobs: int = 1) -> EnsembleStats:
    """Statistics over n_runs calls of run(stream_id) for stream ids 0..n_runs-1.

    Amplitude mean and unbiased variance always; complex samples additionally
    get wrapped-phase variance about the per-pixel circular mean.
    """
    if n_runs < 2:
        raise ValueError(f"ensemble needs n_runs >= 2, got {n_runs}")
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(run, range(n_runs)))
    else:
        samples = [run(i) for i in range(n_runs)]
    stackv = np.stack(samples)
    is_complex = np.iscomplexobj(stackv)
    amp = np.abs(stackv) if is_complex else stackv
    mean = amp.mean(axis=0)
    var = amp.var(axis=0, ddof=1)
    phase_mean = phase_var = None
    if is_complex:
        unit = np.exp(1j * np.angle(stackv))
        phase_mean = np.angle(unit.mean(axis=0))
        d = np.angle(stackv) - phase_mean
        wrapped = (d + np.pi) % (2 * np.pi) - np.pi
        phase_var = (wrapped**2).sum(axis=0) / (stackv.shape[0] - 1)
    return EnsembleStats(
        mean=mean,
        variance=var,
        samples=tuple(samples),
        phase_mean=phase_mean,
        phase_variance=phase_var,
    )
