"""Run configuration: flat key=value files plus command-line overrides.

Every tunable default lives here under a named key so manifests can record
the fully resolved configuration and reruns are exact.
"""

from __future__ import annotations

from pathlib import Path

DEFAULTS = {
    # annealing schedule (sigma1/sigmaT as fractions of sigma0; sigma1 ratio is a
    # package choice, the source only constrains sigma_1 < sigma_0)
    "t_count": 1000,
    "sigma1_ratio": 0.9,
    "sigmaT_ratio": 0.01,
    "schedule_kind": "geometric",
    "eps": 2e-5,
    "steps_per_level": 1,
    "clamp_floor": 1e-4,
    # measurement synthesis
    "fwc": 10000.0,
    "quant_bits": 8,
    "rho": 1.0,
    "pad_factor": 2,
    "led_count": 89,
    "led_spacing": 2.0,
    "pupil_radius": 5.0,
    # reconstruction
    "runs": 1,
    "jobs": 1,
    "init": "measurement",
    "noise_scale": 1.0,
    "complex_convention": "quarter",
    # HIO baseline
    "hio_beta": 0.9,
    "hio_iters": 600,
    "hio_restarts": 50,
}


def _coerce(value: str):
    text = value.strip()
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            continue
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def load_config(path) -> dict:
    """Parse a key=value file; '#' starts a comment, blank lines ignored."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        cfg[key.strip()] = _coerce(value)
    return cfg


def resolve(file_cfg: dict | None = None, overrides: dict | None = None) -> dict:
    """DEFAULTS <- config file <- explicit overrides, rejecting unknown keys."""
    cfg = dict(DEFAULTS)
    for source in (file_cfg or {}, overrides or {}):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ValueError(f"unknown config key {key!r}")
            if value is not None:
                cfg[key] = value
    return cfg
