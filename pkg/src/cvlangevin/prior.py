"""Prior score providers.

The sampler only ever sees the interface: score_real(x, sigma) and
score_complex(o, sigma) return the gradient of the log of the provider's
smoothed density. Analytic providers (zero, discrete mixtures) make the
whole pipeline exactly verifiable; the external provider tunnels the same
calls to a learned denoiser over the wire protocol.

Noise conventions. The real-case mixture smooths each atom with the
signal-dependent variance sigma^2 * x per pixel, so a one-atom prior
reproduces the expectation-form score (x - x')/(sigma^2 x) exactly. The
complex case defaults to independent Gaussian noise of variance sigma^2/4
on each of Re and Im ("quarter"); the alternative reading with variance
sigma^2 per component ("full") is available as an option. Scores are always
the true gradient of the density actually used, so any convention change is
a pure step-size rescaling downstream.
"""

from __future__ import annotations

import numpy as np

from .core import as_complex_image, as_real_image
from .protocol import ScoreClient

MAX_ATOMS = 64


def _normalized_weights(n: int, weights) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"need {n} weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ValueError("mixture weights must be positive")
    return w / w.sum()


class ZeroPrior:
    """No prior information: score is identically zero (the Fig.-7 style baseline)."""

    def score_real(self, x_tilde, sigma: float) -> np.ndarray:
        return np.zeros_like(as_real_image(x_tilde, "x_tilde"))

    def score_complex(self, o_tilde, sigma: float) -> np.ndarray:
        return np.zeros_like(as_complex_image(o_tilde, "o_tilde"))


class DiscreteRealPrior:
    """Finite mixture of known intensity images under signal-dependent smoothing.

    Density at level sigma: sum_i w_i prod_p N(x_p; a_ip, sigma^2 a_ip).
    The score is the posterior-weighted average of (a_i - x) / (sigma^2 a_i),
    accumulated with log-sum-exp in double precision.
    """

    def __init__(self, atoms, weights=None):
        self.atoms = [as_real_image(a, f"atom {i}") for i, a in enumerate(atoms)]
        if not 1 <= len(self.atoms) <= MAX_ATOMS:
            raise ValueError(f"need 1..{MAX_ATOMS} atoms, got {len(self.atoms)}")
        shape = self.atoms[0].shape
        if any(a.shape != shape for a in self.atoms):
            raise ValueError("atoms must share dims")
        if any(np.any(a <= 0) for a in self.atoms):
            raise ValueError("atom with a zero pixel gives a degenerate variance")
        self.weights = _normalized_weights(len(self.atoms), weights)

    def _log_likelihoods(self, x: np.ndarray, sigma: float) -> np.ndarray:
        s2 = sigma * sigma
        lls = np.empty(len(self.atoms))
        for i, a in enumerate(self.atoms):
            var = s2 * a
            lls[i] = -0.5 * np.sum(np.log(2 * np.pi * var) + (x - a) ** 2 / var)
        return lls + np.log(self.weights)

    def posterior_weights(self, x_tilde, sigma: float) -> np.ndarray:
        """P(atom i | x_tilde) under the smoothed mixture."""
        x = as_real_image(x_tilde, "x_tilde")
        ll = self._log_likelihoods(x, sigma)
        ll -= ll.max()
        w = np.exp(ll)
        return w / w.sum()

    def log_density(self, x_tilde, sigma: float) -> float:
        x = as_real_image(x_tilde, "x_tilde")
        ll = self._log_likelihoods(x, sigma)
        peak = ll.max()
        return float(peak + np.log(np.exp(ll - peak).sum()))

    def score_real(self, x_tilde, sigma: float) -> np.ndarray:
        x = as_real_image(x_tilde, "x_tilde")
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        post = self.posterior_weights(x, sigma)
        s2 = sigma * sigma
        out = np.zeros_like(x)
        for pi, a in zip(post, self.atoms):
            out += pi * (a - x) / (s2 * a)
        return out

    def score_complex(self, o_tilde, sigma: float):
        raise TypeError("DiscreteRealPrior is real-capable only")


class DiscreteComplexPrior:
    """Finite mixture of known complex objects under per-component Gaussian smoothing."""

    def __init__(self, atoms, weights=None, convention: str = "quarter"):
        self.atoms = [as_complex_image(a, f"atom {i}") for i, a in enumerate(atoms)]
        if not 1 <= len(self.atoms) <= MAX_ATOMS:
            raise ValueError(f"need 1..{MAX_ATOMS} atoms, got {len(self.atoms)}")
        shape = self.atoms[0].shape
        if any(a.shape != shape for a in self.atoms):
            raise ValueError("atoms must share dims")
        if convention not in ("quarter", "full"):
            raise ValueError(f"convention must be 'quarter' or 'full', got {convention!r}")
        self.convention = convention
        self.weights = _normalized_weights(len(self.atoms), weights)

    def _component_var(self, sigma: float) -> float:
        s2 = sigma * sigma
        return s2 / 4.0 if self.convention == "quarter" else s2

    def _log_likelihoods(self, o: np.ndarray, sigma: float) -> np.ndarray:
        var = self._component_var(sigma)
        lls = np.empty(len(self.atoms))
        for i, a in enumerate(self.atoms):
            d2 = np.abs(o - a) ** 2
            lls[i] = -np.sum(np.log(2 * np.pi * var) + d2 / (2 * var))
        return lls + np.log(self.weights)

    def posterior_weights(self, o_tilde, sigma: float) -> np.ndarray:
        o = as_complex_image(o_tilde, "o_tilde")
        ll = self._log_likelihoods(o, sigma)
        ll -= ll.max()
        w = np.exp(ll)
        return w / w.sum()

    def log_density(self, o_tilde, sigma: float) -> float:
        o = as_complex_image(o_tilde, "o_tilde")
        ll = self._log_likelihoods(o, sigma)
        peak = ll.max()
        return float(peak + np.log(np.exp(ll - peak).sum()))

    def score_complex(self, o_tilde, sigma: float) -> np.ndarray:
        o = as_complex_image(o_tilde, "o_tilde")
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        var = self._component_var(sigma)
        post = self.posterior_weights(o, sigma)
        out = np.zeros_like(o)
        for pi, a in zip(post, self.atoms):
            out += pi * (a - o) / var
        return out

    def score_real(self, x_tilde, sigma: float):
        raise TypeError("DiscreteComplexPrior is complex-capable only")


class ExternalScoreProvider:
    """Learned prior behind the score wire protocol (spawned process or TCP)."""

    def __init__(self, endpoint_or_client):
        if isinstance(endpoint_or_client, ScoreClient):
            self._client = endpoint_or_client
        else:
            self._client = ScoreClient.from_endpoint(str(endpoint_or_client))

    def score_real(self, x_tilde, sigma: float) -> np.ndarray:
        x = as_real_image(x_tilde, "x_tilde")
        return self._client.request(x, sigma, is_complex=False)

    def score_complex(self, o_tilde, sigma: float) -> np.ndarray:
        o = as_complex_image(o_tilde, "o_tilde")
        return self._client.request(o, sigma, is_complex=True)

    def close(self) -> None:
        self._client.close()


def score_real(provider, x_tilde, sigma: float) -> np.ndarray:
    return provider.score_real(x_tilde, sigma)


def score_complex(provider, o_tilde, sigma: float) -> np.ndarray:
    return provider.score_complex(o_tilde, sigma)


def train_target_real(x, x_noisy, sigma: float) -> np.ndarray:
    """Regression target (x - x') / (sigma^2 x) for the real-branch denoiser."""
    xv = as_real_image(x, "x")
    xn = as_real_image(x_noisy, "x_noisy")
    if xv.shape != xn.shape:
        raise ValueError(f"shape mismatch: {xv.shape} vs {xn.shape}")
    if np.any(xv <= 0):
        raise ValueError("real training target needs x > 0 everywhere")
    return (xv - xn) / (sigma * sigma * xv)


def train_target_complex(o, o_noisy, sigma: float) -> np.ndarray:
    """Regression target (o - o') / sigma^2 for the complex-branch denoiser.

    Literal two-channel convention; a factor 4 larger than the "quarter"
    smoothing score at the same sigma.
    """
    ov = as_complex_image(o, "o")
    on = as_complex_image(o_noisy, "o_noisy")
    if ov.shape != on.shape:
        raise ValueError(f"shape mismatch: {ov.shape} vs {on.shape}")
    return (ov - on) / (sigma * sigma)
