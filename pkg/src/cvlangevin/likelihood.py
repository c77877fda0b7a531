"""Closed-form annealed likelihood scores for photon-limited measurements.

Two element-wise gradients drive the samplers:

* real branch — the signal-dependent Gaussian relaxation of Poisson noise
  gives, at annealing level sigma_t,

      score(y, x) = (y^2/x^2 - 1) / (2 (sigma0^2 - sigma_t^2)) - 1/(2 x)

* complex branch — relaxing the intensity measurement y ~ |o|^2 + noise
  yields a Rician-type conditional whose gradient is

      score(y, o) = o / (2 (sigma0^2 - sigma_t^2)) * (R(z) sqrt(y)/|o| - 1)

  with R = I1/I0 evaluated at z = |o| sqrt(y) / (sigma0^2 - sigma_t^2).

The complex score carries a factor 1/2 relative to the plain (Re, Im)
gradient of the log-density; it is implemented verbatim and the factor is
absorbed into the effective step size. For a general transform H the score
is the element-wise measurement-domain gradient pulled back through H^H,
with the same effective variance sigma0^2 - sigma_t^2 at every measurement
pixel.
"""

from __future__ import annotations

import numpy as np

from .core import MeasurementStack, ScheduleError, as_complex_image, as_real_image
from . import forward

#: x values below this are clamped before the divisions in the real-branch score.
SCORE_FLOOR = 1e-4

# I1/I0 asymptotic expansion coefficients in powers of 1/z. Six correction
# terms keep the relative error below 1e-8 at the series/asymptotic crossover.
_RATIO_ASYMPTOTIC = (1.0, -1 / 2, -1 / 8, -1 / 8, -25 / 128, -13 / 32, -1073 / 1024)
_SERIES_CUTOFF = 20.0
_SERIES_TERMS = 48


def _check_annealing(sigma0: float, sigma_t: float) -> float:
    if not (0 < sigma_t < sigma0):
        raise ScheduleError(
            f"annealing order violated: need 0 < sigma_t < sigma0, got sigma_t={sigma_t}, sigma0={sigma0}"
        )
    return sigma0 * sigma0 - sigma_t * sigma_t


def poisson_score(
    y,
    x_tilde,
    sigma0: float,
    sigma_t: float,
    floor: float = SCORE_FLOOR,
    diag: dict | None = None,
) -> np.ndarray:
    """Gradient of the annealed log-likelihood of a Poissonian intensity image.

    Iterates at or below ``floor`` are clamped before the divisions; pass a
    dict as ``diag`` to have the clamp count recorded under "clamped".
    """
    s2 = _check_annealing(sigma0, sigma_t)
    yv = as_real_image(y, "y")
    xv = as_real_image(x_tilde, "x_tilde")
    if yv.shape != xv.shape:
        raise ValueError(f"shape mismatch: y {yv.shape} vs x_tilde {xv.shape}")
    clamped = int(np.count_nonzero(xv < floor))
    if diag is not None:
        diag["clamped"] = diag.get("clamped", 0) + clamped
    xc = np.maximum(xv, floor)
    return (yv * yv / (xc * xc) - 1.0) / (2.0 * s2) - 1.0 / (2.0 * xc)


def bessel_ratio(z):
    """Numerically stable I1(z)/I0(z) for z >= 0: monotone from 0 toward 1.

    Power series below z = 20 (all-positive terms, no cancellation), ratio of
    asymptotic expansions above; neither path forms unscaled I_k, so nothing
    overflows for any finite z.
    """
    zs = np.asarray(z, dtype=np.float64)
    if np.any(~np.isfinite(zs)) or np.any(zs < 0):
        raise ValueError("bessel_ratio requires finite z >= 0")
    scalar = zs.ndim == 0
    zv = np.atleast_1d(zs)
    out = np.empty_like(zv)

    small = zv < _SERIES_CUTOFF
    if small.any():
        x = zv[small]
        half2 = (x / 2.0) ** 2
        term = np.ones_like(x)
        i0 = np.ones_like(x)
        i1 = x / 2.0  # running sum of (z/2)^(2k+1) / (k! (k+1)!)
        t1 = x / 2.0
        for k in range(1, _SERIES_TERMS):
            term = term * half2 / (k * k)
            i0 += term
            t1 = t1 * half2 / (k * (k + 1))
            i1 += t1
        out[small] = i1 / i0

    big = ~small
    if big.any():
        u = 1.0 / zv[big]
        num = np.full_like(u, _RATIO_ASYMPTOTIC[-1])
        for c in _RATIO_ASYMPTOTIC[-2::-1]:
            num = num * u + c
        out[big] = num

    return float(out[0]) if scalar else out.reshape(zs.shape)


def _rician_score_elementwise(y: np.ndarray, field: np.ndarray, s2: float) -> np.ndarray:
    """Eq.-level kernel shared by the identity and general-H complex scores."""
    amp = np.abs(field)
    sqrt_y = np.sqrt(y)
    z = amp * sqrt_y / s2
    ratio = bessel_ratio(z)
    safe_amp = np.where(amp > 0, amp, 1.0)
    bracket = np.where(amp > 0, ratio * sqrt_y / safe_amp - 1.0, 0.0)
    return field * bracket / (2.0 * s2)


def complex_score_identity(y, o_tilde, sigma0: float, sigma_t: float) -> np.ndarray:
    """Annealed likelihood score for a directly measured intensity y ~ |o|^2.

    Continuous extension at |o| = 0 returns 0 there.
    """
    s2 = _check_annealing(sigma0, sigma_t)
    yv = as_real_image(y, "y")
    if np.any(yv < 0):
        raise ValueError("intensity measurements must be non-negative")
    ov = as_complex_image(o_tilde, "o_tilde")
    if yv.shape != ov.shape:
        raise ValueError(f"shape mismatch: y {yv.shape} vs o_tilde {ov.shape}")
    return _rician_score_elementwise(yv, ov, s2)


def complex_score_general(
    stack: MeasurementStack,
    o_tilde,
    model: forward.ForwardModel,
    sigma0: float,
    sigma_t: float,
) -> np.ndarray:
    """Likelihood score through a general linear transform H.

    Element-wise Rician score in the measurement domain of each field
    u_m = H_m o, pulled back by the adjoint. With the identity model this
    reduces bit-exactly to complex_score_identity.
    """
    s2 = _check_annealing(sigma0, sigma_t)
    ov = as_complex_image(o_tilde, "o_tilde")
    if isinstance(model, forward.Identity):
        if stack.m != 1:
            raise ValueError(f"identity model expects 1 measurement, got {stack.m}")
        return complex_score_identity(stack.images[0], ov, sigma0, sigma_t)
    fields = forward.apply(model, ov)
    if len(fields) != stack.m:
        raise ValueError(f"model produces {len(fields)} fields but stack has {stack.m}")
    grads = []
    for y, u in zip(stack.images, fields):
        if y.shape != u.shape:
            raise ValueError(f"measurement shape {y.shape} does not match field {u.shape}")
        if np.any(y < 0):
            raise ValueError("intensity measurements must be non-negative")
        grads.append(_rician_score_elementwise(y, u, s2))
    return forward.adjoint(model, grads)
