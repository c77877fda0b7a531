"""Measurement synthesis: exact Poisson photon noise, graylevel quantization,
and the normalized intensity pipeline.

Generation uses the true noise model (per-pixel Poisson draws on electron
counts, then optional quantization to 2^bits levels); the Gaussian
approximation with variance sigma0^2 * x is an analysis device that lives in
the likelihood module, never here. Expected intensities must stay within
[0, 1]: the model has no saturation branch, so brighter inputs are rejected.
"""

from __future__ import annotations

import numpy as np

from .core import (
    MeasurementStack,
    NoiseParams,
    RngStream,
    SaturationError,
    as_complex_image,
    as_real_image,
    coerce_generator,
    normalize,
)
from . import forward


def poisson_sample(lambda_grid, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Per-pixel independent Poisson draws with mean lambda_grid (electron counts).

    Returns float64 values that are exact non-negative integers.
    """
    lam = as_real_image(lambda_grid, "lambda_grid")
    if np.any(lam < 0):
        raise ValueError("Poisson rates must be non-negative")
    gen = coerce_generator(rng)
    return np.asarray(gen.poisson(lam), dtype=np.float64)


def quantize_counts(counts, noise: NoiseParams) -> np.ndarray:
    """Round electron counts to the nearest of 2^quant_bits levels spanning [0, fwc].

    Mid-tread rounding (numpy's round-half-even, unbiased). Counts above fwc
    land on the top level, which is simply the nearest one. quant_bits = 0
    passes counts through untouched.
    """
    c = as_real_image(counts, "counts")
    if noise.quant_bits == 0:
        return c
    levels = 2**noise.quant_bits
    delta = noise.fwc / (levels - 1)
    idx = np.minimum(np.round(c / delta), levels - 1)
    return idx * delta


def simulate_measurement(
    clean, noise: NoiseParams, rng: RngStream | np.random.Generator
) -> np.ndarray:
    """Noisy normalized measurement of a clean image with intensities in [0, 1].

    Pipeline: scale to expected electron counts, draw exact Poisson counts,
    quantize (if enabled), normalize back by fwc.
    """
    x = as_real_image(clean, "clean")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("clean image must lie in [0, 1]")
    counts = poisson_sample(x * noise.fwc, rng)
    return normalize(quantize_counts(counts, noise), noise)


def simulate_intensity_measurements(
    obj,
    model,
    noise: NoiseParams,
    rng: RngStream | np.random.Generator,
    rho: float = 1.0,
) -> MeasurementStack:
    """Simulate the full optical measurement stack y_m = noisy(rho * |H_m o|^2).

    ``rho`` scales Identity / Fourier-magnitude intensities; a Ptychography
    model already carries its own irradiance inside H (sqrt(rho) per field),
    so pass rho = 1 there. The stack records the combined factor.
    """
    o = as_complex_image(obj, "object")
    gen = coerce_generator(rng)
    intensities = forward.intensity(model, o)
    model_rho = getattr(model, "rho", 1.0)
    images = []
    for m, intens in enumerate(intensities):
        scaled = rho * intens
        peak = float(scaled.max()) if scaled.size else 0.0
        if peak > 1.0 + 1e-12:
            raise SaturationError(
                f"expected intensity {peak:.4g} of measurement {m} exceeds 1; "
                "rescale the object or irradiance"
            )
        images.append(simulate_measurement(np.clip(scaled, 0.0, 1.0), noise, gen))
    return MeasurementStack(images=tuple(images), noise=noise, rho=rho * model_rho)
