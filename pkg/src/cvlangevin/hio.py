"""Fienup Hybrid Input-Output phase retrieval.

Serves two roles: a standalone baseline, and the noisy initializer for the
complex sampler. Each restart starts from uniformly random Fourier phases,
alternates the Fourier-magnitude projection with the negative-feedback
object update, and the restart with the smallest Fourier-domain residual
wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngStream, as_complex_image, as_real_image, coerce_generator
from .forward import fft2_unitary, ifft2_unitary


@dataclass(frozen=True)
class HioResult:
    best: np.ndarray
    residual: float
    restart_residuals: tuple


def project_fourier_magnitude(g: np.ndarray, magnitudes: np.ndarray) -> np.ndarray:
    """Replace |F g| with the measured magnitudes, keeping the phase of F g.

    Bins with zero measured magnitude are set to zero; bins where F g vanishes
    get phase 1 so the projection stays defined.
    """
    G = fft2_unitary(g)
    absG = np.abs(G)
    phase = np.where(absG > 0, G / np.where(absG > 0, absG, 1.0), 1.0)
    return ifft2_unitary(magnitudes * phase)


def fourier_residual(candidate: np.ndarray, magnitudes: np.ndarray) -> float:
    """Normalized magnitude mismatch ||sqrt(y) - |F c||| / ||sqrt(y)||."""
    norm = np.linalg.norm(magnitudes)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(magnitudes - np.abs(fft2_unitary(candidate))) / norm)


def hio_solve(
    magnitudes,
    support,
    beta: float = 0.9,
    iters: int = 600,
    restarts: int = 50,
    rng: RngStream | np.random.Generator = RngStream(0),
    real_nonneg: bool = False,
) -> HioResult:
    """Best-of-restarts HIO reconstruction from Fourier magnitudes sqrt(y).

    The object constraint keeps pixels that are inside the support (and
    non-negative-real when real_nonneg is set); everywhere else the input is
    driven by negative feedback g - beta * g'. Returned candidates are
    support-masked.
    """
    mags = as_real_image(magnitudes, "magnitudes")
    if np.any(mags < 0):
        raise ValueError("Fourier magnitudes must be non-negative")
    sup = np.asarray(support, dtype=bool)
    if sup.shape != mags.shape:
        raise ValueError(f"support shape {sup.shape} does not match magnitudes {mags.shape}")
    if not sup.any():
        raise ValueError("support mask is empty")
    if not 0 < beta <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    gen = coerce_generator(rng)

    best = None
    best_res = np.inf
    residuals = []
    for _ in range(restarts):
        psi = gen.random(mags.shape)
        g = ifft2_unitary(mags * np.exp(2j * np.pi * psi))
        for _ in range(iters):
            g_prime = project_fourier_magnitude(g, mags)
            ok = sup.copy()
            if real_nonneg:
                ok &= g_prime.real >= 0
            g = np.where(ok, g_prime, g - beta * g_prime)
        candidate = np.where(sup, project_fourier_magnitude(g, mags), 0.0)
        if real_nonneg:
            candidate = np.where(candidate.real >= 0, candidate, 0.0)
        res = fourier_residual(candidate, mags)
        residuals.append(res)
        if res < best_res:
            best_res = res
            best = candidate
    return HioResult(best=best, residual=best_res, restart_residuals=tuple(residuals))


def correlation(a, b) -> float:
    """|<a, b>| / (||a|| ||b||), the phase-insensitive normalized correlation."""
    av = as_complex_image(a, "a")
    bv = as_complex_image(b, "b")
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(abs(np.vdot(bv, av)) / (na * nb))


def align_ambiguities(candidate, reference) -> np.ndarray:
    """Resolve the trivial phase-retrieval ambiguities against a reference.

    Searches all cyclic shifts of the candidate and of its conjugate flip,
    picks the transform maximizing |<c, ref>|, then removes the global phase
    in closed form. The result correlates with the reference at least as well
    as the input does.
    """
    c = as_complex_image(candidate, "candidate")
    ref = as_complex_image(reference, "reference")
    if c.shape != ref.shape:
        raise ValueError(f"shape mismatch: {c.shape} vs {ref.shape}")

    ref_spec = np.fft.fft2(ref)
    best_val = -1.0
    best_img = c
    for variant in (c, np.conj(np.flip(c, axis=(0, 1)))):
        # |corr_map[s]| = |<roll(variant, s), ref>| for every cyclic shift s
        corr_map = np.fft.ifft2(ref_spec * np.conj(np.fft.fft2(variant)))
        idx = np.unravel_index(np.argmax(np.abs(corr_map)), corr_map.shape)
        val = np.abs(corr_map[idx])
        if val > best_val:
            best_val = val
            best_img = np.roll(variant, shift=idx, axis=(0, 1))
    inner = np.vdot(ref, best_img)  # sum best * conj(ref)
    if abs(inner) > 0:
        best_img = best_img * np.exp(-1j * np.angle(inner))
    return best_img
