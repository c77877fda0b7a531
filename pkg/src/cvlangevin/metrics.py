"""Image quality metrics: PSNR, SSIM, and the offset-invariant phase PSNR.

Phase recovery is only identifiable up to a global offset and per-pixel 2pi
jumps, so the phase metric wraps differences to (-pi, pi] and removes the
best global offset before averaging; its dynamic range is (2pi)^2.
"""

from __future__ import annotations

import numpy as np

from .core import as_real_image

PSNR_CAP = 200.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(est, truth, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE), capped at 200 dB (the MSE = 0 sentinel)."""
    e = as_real_image(est, "est")
    t = as_real_image(truth, "truth")
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {t.shape}")
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((e - t) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(10 * np.log10(peak * peak / mse), PSNR_CAP)


def wrap_angle(a):
    """Map angles into [-pi, pi) (squares are unchanged at the +-pi boundary)."""
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def _offset_mse(d: np.ndarray, theta: float) -> float:
    return float(np.mean(wrap_angle(d - theta) ** 2))


def phase_psnr(est_phase, truth_phase) -> float:
    """Offset-invariant phase PSNR: 10 log10((2pi)^2 / min_theta mean wrap(d - theta)^2).

    The offset search runs a 720-point grid over (-pi, pi] refined by
    golden-section to 1e-6.
    """
    e = as_real_image(est_phase, "est_phase")
    t = as_real_image(truth_phase, "truth_phase")
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {t.shape}")
    d = wrap_angle(t - e)

    # circular-mean candidate: exact for a pure global offset, where the grid
    # search alone would leave a spurious residual
    theta_cm = float(np.angle(np.mean(np.exp(1j * d))))
    cm_value = _offset_mse(d, theta_cm)

    grid = np.linspace(-np.pi, np.pi, 720, endpoint=False)
    values = [_offset_mse(d, th) for th in grid]
    k = int(np.argmin(values))
    spacing = 2 * np.pi / 720
    lo, hi = grid[k] - spacing, grid[k] + spacing

    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    g = a + invphi * (b - a)
    fc, fg = _offset_mse(d, c), _offset_mse(d, g)
    while b - a > 1e-6:
        if fc < fg:
            b, g, fg = g, c, fc
            c = b - invphi * (b - a)
            fc = _offset_mse(d, c)
        else:
            a, c, fc = c, g, fg
            g = a + invphi * (b - a)
            fg = _offset_mse(d, g)
    mse = min(values[k], fc, fg, cm_value)
    if mse <= 0:
        return PSNR_CAP
    return min(10 * np.log10((2 * np.pi) ** 2 / mse), PSNR_CAP)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, win.shape)
    return np.einsum("ijkl,kl->ij", view, win)


def ssim(est, truth, data_range: float = 1.0) -> float:
    """Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03.

    Mean of the SSIM map over valid window positions.
    """
    e = as_real_image(est, "est")
    t = as_real_image(truth, "truth")
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {t.shape}")
    if min(e.shape) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW} pixels per side")
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu1 = _filter_valid(e, win)
    mu2 = _filter_valid(t, win)
    var1 = _filter_valid(e * e, win) - mu1 * mu1
    var2 = _filter_valid(t * t, win) - mu2 * mu2
    cov = _filter_valid(e * t, win) - mu1 * mu2
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    ssim_map = ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) / (
        (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    )
    return float(ssim_map.mean())
