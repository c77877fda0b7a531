"""Optical forward models H and their adjoints.

Three variants: Identity (direct intensity imaging), FourierMagnitude
(classical phase retrieval on an oversampled Fourier grid), and Ptychography
(a bank of pupil-shifted bandpass filters, one field per LED).

All transforms use the unitary DFT normalization, so Parseval holds exactly
and noise levels transfer unchanged between object and measurement domains.
Zero-padding for phase retrieval places the object in the top-left corner;
cyclic shifts are among the trivial ambiguities anyway, so the corner
convention costs nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_complex_image


def fft2_unitary(img) -> np.ndarray:
    """Unitary 2D DFT: norm-preserving, ifft2_unitary o fft2_unitary = identity."""
    return np.fft.fft2(np.asarray(img, dtype=np.complex128), norm="ortho")


def ifft2_unitary(img) -> np.ndarray:
    """Unitary 2D inverse DFT."""
    return np.fft.ifft2(np.asarray(img, dtype=np.complex128), norm="ortho")


@dataclass(frozen=True)
class PupilMask:
    """Binary bandpass disk in the discrete frequency plane, centered at (center_kx, center_ky).

    The mask lives on the fft-ordered grid and uses the torus metric for
    distances (frequencies wrap), matching DFT geometry. Grid units: one unit
    = one DFT frequency bin.
    """

    center_kx: int
    center_ky: int
    radius: float
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("pupil mask must be 2D")
        if not np.isin(m, (0.0, 1.0)).all():
            raise ValueError("pupil mask entries must be 0 or 1")
        if not m.any():
            raise ValueError("pupil mask has no pass-band")
        object.__setattr__(self, "mask", m)


def make_pupil(shape: tuple, center_kx: int, center_ky: int, radius: float) -> PupilMask:
    """Build a binary disk pupil of the given radius (grid units) on an fft-ordered grid."""
    if not radius > 0:
        raise ValueError(f"pupil radius must be positive, got {radius}")
    h, w = shape
    ky = np.fft.fftfreq(h, d=1.0 / h).reshape(-1, 1)
    kx = np.fft.fftfreq(w, d=1.0 / w).reshape(1, -1)
    # minimal signed distance on the frequency torus
    dky = (ky - center_ky + h / 2) % h - h / 2
    dkx = (kx - center_kx + w / 2) % w - w / 2
    mask = (dkx**2 + dky**2 <= radius**2).astype(np.float64)
    return PupilMask(center_kx=center_kx, center_ky=center_ky, radius=radius, mask=mask)


def all_pass_pupil(shape: tuple) -> PupilMask:
    """Pupil passing every frequency (radius covering the whole grid)."""
    h, w = shape
    return make_pupil(shape, 0, 0, float(np.hypot(h, w)))


@dataclass(frozen=True)
class Identity:
    """H = I: the measurement grid is the object grid."""


@dataclass(frozen=True)
class FourierMagnitude:
    """H = F after zero-padding by pad_factor per axis (phase retrieval)."""

    pad_factor: int = 2

    def __post_init__(self):
        if self.pad_factor < 1:
            raise ValueError(f"pad_factor must be >= 1, got {self.pad_factor}")


@dataclass(frozen=True)
class Ptychography:
    """H_m = sqrt(rho) * F^-1 P_m F, one bandpass field per pupil."""

    pupils: tuple
    rho: float = 1.0

    def __post_init__(self):
        pupils = tuple(self.pupils)
        if len(pupils) == 0:
            raise ValueError("ptychography model needs at least one pupil")
        shape = pupils[0].mask.shape
        if any(p.mask.shape != shape for p in pupils):
            raise ValueError("all pupils must share one frequency-grid size")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "pupils", pupils)


ForwardModel = Identity | FourierMagnitude | Ptychography


def _pad(o: np.ndarray, factor: int) -> np.ndarray:
    h, w = o.shape
    out = np.zeros((h * factor, w * factor), dtype=np.complex128)
    out[:h, :w] = o
    return out


def apply(model: ForwardModel, o) -> list:
    """Fields u_m = H_m o, one complex image per measurement."""
    oc = as_complex_image(o, "object")
    if isinstance(model, Identity):
        return [oc]
    if isinstance(model, FourierMagnitude):
        return [fft2_unitary(_pad(oc, model.pad_factor))]
    if isinstance(model, Ptychography):
        if model.pupils[0].mask.shape != oc.shape:
            raise ValueError(
                f"object shape {oc.shape} does not match pupil grid {model.pupils[0].mask.shape}"
            )
        spectrum = fft2_unitary(oc)
        scale = np.sqrt(model.rho)
        return [scale * ifft2_unitary(p.mask * spectrum) for p in model.pupils]
    raise TypeError(f"unknown forward model {type(model)!r}")


def adjoint(model: ForwardModel, fields) -> np.ndarray:
    """H^H applied to a stack of measurement-domain fields.

    The unitary DFT and real binary pupils make each ptychography branch
    self-adjoint up to the same F^-1 P F sandwich as the forward direction.
    """
    flds = [as_complex_image(f, f"field {i}") for i, f in enumerate(fields)]
    if isinstance(model, Identity):
        if len(flds) != 1:
            raise ValueError(f"identity model expects 1 field, got {len(flds)}")
        return flds[0]
    if isinstance(model, FourierMagnitude):
        if len(flds) != 1:
            raise ValueError(f"fourier-magnitude model expects 1 field, got {len(flds)}")
        big = ifft2_unitary(flds[0])
        ph, pw = big.shape
        f = model.pad_factor
        if ph % f or pw % f:
            raise ValueError(f"field shape {big.shape} is not a multiple of pad_factor {f}")
        return big[: ph // f, : pw // f]
    if isinstance(model, Ptychography):
        if len(flds) != len(model.pupils):
            raise ValueError(f"expected {len(model.pupils)} fields, got {len(flds)}")
        scale = np.sqrt(model.rho)
        out = np.zeros_like(flds[0])
        for p, u in zip(model.pupils, flds):
            if u.shape != p.mask.shape:
                raise ValueError(f"field shape {u.shape} does not match pupil grid")
            out += scale * ifft2_unitary(p.mask * fft2_unitary(u))
        return out
    raise TypeError(f"unknown forward model {type(model)!r}")


def intensity(model: ForwardModel, o) -> list:
    """Noiseless intensity images |H_m o|^2 (irradiance included for ptychography)."""
    return [np.abs(u) ** 2 for u in apply(model, o)]


def build_led_grid(m_count: int, spacing: float) -> list:
    """The m_count integer lattice points closest to the origin, scaled by spacing.

    Deterministic order: by radius, ties by polar angle in [0, 2pi), then
    lexicographic. These are the pupil center offsets k_m for an LED array.
    """
    if m_count < 1:
        raise ValueError(f"m_count must be >= 1, got {m_count}")
    reach = int(np.ceil(np.sqrt(m_count))) + 1
    pts = []
    for i in range(-reach, reach + 1):
        for j in range(-reach, reach + 1):
            r2 = i * i + j * j
            ang = np.arctan2(j, i) % (2 * np.pi)
            pts.append((r2, ang, i, j))
    pts.sort()
    return [(i * spacing, j * spacing) for (_, _, i, j) in pts[:m_count]]


def ptychography_model(
    shape: tuple, m_count: int, led_spacing: float, pupil_radius: float, rho: float = 1.0
) -> Ptychography:
    """Assemble a ptychography model from an LED grid and a common pupil radius."""
    centers = build_led_grid(m_count, led_spacing)
    pupils = tuple(
        make_pupil(shape, int(round(kx)), int(round(ky)), pupil_radius) for kx, ky in centers
    )
    return Ptychography(pupils=pupils, rho=rho)
