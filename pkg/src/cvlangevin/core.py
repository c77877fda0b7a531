"""Shared value types: images, noise parameters, annealing schedules, RNG streams.

Images are plain 2D numpy arrays (float64 for intensities, complex128 for
transmittance fields); the helpers here validate shape/finiteness at module
boundaries instead of wrapping arrays in classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ScheduleError(ValueError):
    """Invalid noise-level schedule (ordering, construction, or annealing order)."""


class SaturationError(ValueError):
    """Expected intensity exceeds the sensor's normalized range; the noise model has no clipping branch."""


class DivergenceError(RuntimeError):
    """Sampler iterate became non-finite. Carries the 1-based level index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class TransportError(RuntimeError):
    """External score endpoint failed (connection, framing, or server-side error)."""


class ConfigError(ValueError):
    """Inconsistent run configuration (e.g. initializer incompatible with the model)."""


def as_real_image(arr, name: str = "image") -> np.ndarray:
    """Validate and return a 2D float64 array with finite entries."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_complex_image(arr, name: str = "image") -> np.ndarray:
    """Validate and return a 2D complex128 array with finite real/imag parts."""
    out = np.asarray(arr, dtype=np.complex128)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {out.shape}")
    if not (np.isfinite(out.real).all() and np.isfinite(out.imag).all()):
        raise ValueError(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True)
class NoiseParams:
    """Sensor noise description: full well capacity (electrons) and quantizer depth.

    ``sigma0`` is derived as fwc**-0.5 so the invariant holds to machine
    precision by construction. ``quant_bits = 0`` disables quantization.
    """

    fwc: float
    quant_bits: int = 0

    def __post_init__(self):
        if not (self.fwc > 0 and np.isfinite(self.fwc)):
            raise ValueError(f"fwc must be a positive finite real, got {self.fwc}")
        if not (0 <= self.quant_bits <= 16):
            raise ValueError(f"quant_bits must be in 0..16, got {self.quant_bits}")

    @property
    def sigma0(self) -> float:
        return float(self.fwc) ** -0.5


@dataclass(frozen=True)
class SigmaSchedule:
    """Annealing noise levels sigma_1..sigma_T below sigma_0, plus the step-size scale eps.

    Strictness sigma_0 > sigma_1 and sigma_T > 0 guarantees sigma_0^2 - sigma_t^2 > 0
    for every level, which the likelihood scores divide by. eps = 0 is allowed
    and turns the samplers into the identity on their initial state.
    """

    sigma0: float
    sigmas: np.ndarray
    eps: float = 2e-5

    def __post_init__(self):
        object.__setattr__(self, "sigmas", np.asarray(self.sigmas, dtype=np.float64))
        s = self.sigmas
        if s.ndim != 1 or s.size == 0:
            raise ScheduleError("schedule needs at least one level")
        if not np.isfinite(s).all() or not np.isfinite(self.sigma0):
            raise ScheduleError("schedule levels must be finite")
        if not self.sigma0 > s[0]:
            raise ScheduleError(f"sigma_1 = {s[0]} must be strictly below sigma_0 = {self.sigma0}")
        if np.any(np.diff(s) > 0):
            raise ScheduleError("levels must be non-increasing")
        if not s[-1] > 0:
            raise ScheduleError("sigma_T must be strictly positive")
        if not self.eps >= 0:
            raise ScheduleError(f"eps must be non-negative, got {self.eps}")

    @property
    def t_count(self) -> int:
        return int(self.sigmas.size)


def make_schedule(
    sigma0: float,
    sigma1: float,
    sigmaT: float,
    t_count: int,
    kind: str = "geometric",
    eps: float = 2e-5,
) -> SigmaSchedule:
    """Build a schedule interpolating from sigma1 down to sigmaT in t_count levels.

    kind = "geometric" uses a constant ratio; "linear" uses constant spacing.
    """
    if t_count < 1:
        raise ScheduleError(f"t_count must be >= 1, got {t_count}")
    if not (sigma0 > sigma1 >= sigmaT > 0):
        raise ScheduleError(
            f"need sigma0 > sigma1 >= sigmaT > 0, got {sigma0}, {sigma1}, {sigmaT}"
        )
    if t_count == 1:
        if sigma1 != sigmaT:
            raise ScheduleError("t_count = 1 requires sigma1 == sigmaT")
        sigmas = np.array([sigma1])
    elif kind == "geometric":
        sigmas = sigma1 * (sigmaT / sigma1) ** (np.arange(t_count) / (t_count - 1))
    elif kind == "linear":
        sigmas = np.linspace(sigma1, sigmaT, t_count)
    else:
        raise ScheduleError(f"unknown schedule kind {kind!r}")
    return SigmaSchedule(sigma0=sigma0, sigmas=sigmas, eps=eps)


def default_schedule(sigma0: float, t_count: int = 1000, eps: float = 2e-5) -> SigmaSchedule:
    """Geometric schedule from 0.9*sigma0 to 0.01*sigma0 (the package defaults)."""
    return make_schedule(sigma0, 0.9 * sigma0, 0.01 * sigma0, t_count, "geometric", eps)


def step_size(schedule: SigmaSchedule, t: int) -> float:
    """Langevin step size alpha_t = eps * sigma_t^2 / sigma_T^2 for 1-based level t."""
    if not 1 <= t <= schedule.t_count:
        raise IndexError(f"level index {t} outside 1..{schedule.t_count}")
    s = schedule.sigmas
    return float(schedule.eps * (s[t - 1] / s[-1]) ** 2)


def normalize(counts, noise: NoiseParams) -> np.ndarray:
    """Map electron counts to unitless intensity in [0, 1] by dividing by fwc."""
    c = as_real_image(counts, "counts")
    if np.any(c < 0):
        raise ValueError("electron counts must be non-negative")
    return c / noise.fwc


@dataclass(frozen=True)
class RngStream:
    """Counter-based RNG identity: (seed, stream_id) fully determines the sample sequence.

    Distinct stream_ids give statistically independent Philox streams, so
    ensemble members and restarts can draw concurrently without coordination.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF]
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        """Derived independent stream, e.g. one per ensemble run or HIO restart."""
        return RngStream(self.seed, self.stream_id ^ (0x9E3779B97F4A7C15 * (index + 1)) & 0xFFFFFFFFFFFFFFFF)


def coerce_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    """Accept either an RngStream (materialized once) or an already-live Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


@dataclass(frozen=True)
class MeasurementStack:
    """M noisy intensity images plus the noise parameters and irradiance that produced them."""

    images: tuple
    noise: NoiseParams
    rho: float = 1.0

    def __post_init__(self):
        imgs = tuple(as_real_image(im, f"measurement {i}") for i, im in enumerate(self.images))
        if len(imgs) == 0:
            raise ValueError("measurement stack needs at least one image")
        shape = imgs[0].shape
        if any(im.shape != shape for im in imgs):
            raise ValueError("all measurement images must share one shape")
        if not self.rho > 0:
            raise ValueError(f"irradiance rho must be positive, got {self.rho}")
        object.__setattr__(self, "images", imgs)

    @property
    def m(self) -> int:
        return len(self.images)

    @property
    def shape(self) -> tuple:
        return self.images[0].shape
