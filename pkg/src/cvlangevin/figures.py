"""Preview figures rendered next to each run's binary outputs.

8-bit PNGs only; quantitative data always lives in the containers and JSON.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_image_png(path, img, title: str = "", cmap: str = "gray", vmin=None, vmax=None):
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(np.asarray(img), cmap=cmap, vmin=vmin, vmax=vmax)
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_complex_png(prefix, obj, tag: str = "estimate"):
    """Amplitude and phase maps for a complex image; returns the written paths."""
    amp_path = f"{prefix}_amplitude.png"
    phase_path = f"{prefix}_phase.png"
    save_image_png(amp_path, np.abs(obj), f"{tag} amplitude", cmap="gray")
    save_image_png(
        phase_path,
        np.angle(obj),
        f"{tag} phase",
        cmap="twilight",
        vmin=-np.pi,
        vmax=np.pi,
    )
    return [amp_path, phase_path]


def save_variance_png(path, var_img, tag: str = "ensemble variance"):
    save_image_png(path, var_img, tag, cmap="magma")
    return [str(path)]
