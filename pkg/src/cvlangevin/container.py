"""Minimal self-describing binary container for image stacks.

Layout (little-endian):

    4s  magic "CVL1"
    u8  dtype: 0 = f32 real, 1 = f32 complex (interleaved re, im), 2 = u16
    u32 height
    u32 width
    u32 count (stack depth)
    ... payload, row-major, images concatenated

Chosen over image formats because the pipeline needs complex values and
more than 8 bits of depth; PNG export exists for previews only.
Save-then-load round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CVL1"
DTYPE_F32 = 0
DTYPE_C64 = 1
DTYPE_U16 = 2

_HEADER = struct.Struct("<4sBIII")


class ContainerError(ValueError):
    """Malformed or unreadable array container."""


def _normalize_stack(images) -> np.ndarray:
    arr = np.asarray(images)
    if arr.ndim == 2:
        arr = arr[None, ...]
    if arr.ndim != 3:
        raise ContainerError(f"expected 2D image or 3D stack, got shape {arr.shape}")
    return arr


def save_container(path, images, dtype: int | None = None) -> None:
    """Write a stack (2D image or 3D array / list of images) to ``path``.

    dtype is inferred from the array kind unless given explicitly: complex
    data becomes f32 pairs, uint16 stays u16, anything else real f32.
    """
    arr = _normalize_stack(images)
    if dtype is None:
        if np.iscomplexobj(arr):
            dtype = DTYPE_C64
        elif arr.dtype == np.uint16:
            dtype = DTYPE_U16
        else:
            dtype = DTYPE_F32
    count, h, w = arr.shape
    if dtype == DTYPE_F32:
        payload = np.ascontiguousarray(arr.real, dtype=np.float32).tobytes()
    elif dtype == DTYPE_C64:
        inter = np.empty((count, h, w, 2), dtype=np.float32)
        inter[..., 0] = arr.real
        inter[..., 1] = arr.imag
        payload = inter.tobytes()
    elif dtype == DTYPE_U16:
        payload = np.ascontiguousarray(arr.real, dtype=np.uint16).tobytes()
    else:
        raise ContainerError(f"unknown dtype code {dtype}")
    header = _HEADER.pack(MAGIC, dtype, h, w, count)
    Path(path).write_bytes(header + payload)


def load_container(path) -> np.ndarray:
    """Read a stack back as (count, h, w): complex128, float64, or uint16."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContainerError(f"{path}: truncated header")
    magic, dtype, h, w, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}")
    payload = raw[_HEADER.size :]
    n = count * h * w
    if dtype == DTYPE_F32:
        expected = 4 * n
        flat = np.frombuffer(payload[:expected], dtype=np.float32)
        out = flat.astype(np.float64)
    elif dtype == DTYPE_C64:
        expected = 8 * n
        flat = np.frombuffer(payload[:expected], dtype=np.float32).astype(np.float64)
        pairs = flat.reshape(-1, 2)
        out = pairs[:, 0] + 1j * pairs[:, 1]
    elif dtype == DTYPE_U16:
        expected = 2 * n
        out = np.frombuffer(payload[:expected], dtype=np.uint16).copy()
    else:
        raise ContainerError(f"{path}: unknown dtype code {dtype}")
    if len(payload) != expected:
        raise ContainerError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    return out.reshape(count, h, w)


def container_dtype(path) -> int:
    """Peek at the dtype code without loading the payload."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise ContainerError(f"{path}: truncated header")
    magic, dtype, *_ = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}")
    return dtype
