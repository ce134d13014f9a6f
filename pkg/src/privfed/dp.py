"""Output-perturbation differential privacy for binary predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidEpsilon, InvalidScore

MECHANISMS = ("randomized_response", "laplace_score")


@dataclass(frozen=True)
class DpConfig:
    epsilon: float = 3.5
    mechanism: str = "randomized_response"
    seed: int = 0

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")


def check_epsilon(epsilon: float) -> float:
    if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)):
        raise InvalidEpsilon(f"epsilon must be a real number, got {epsilon!r}")
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise InvalidEpsilon(f"epsilon must be finite and > 0, got {epsilon}")
    return float(epsilon)


def keep_probability(epsilon: float) -> float:
    """e^eps / (1 + e^eps), written to stay finite for huge epsilon."""
    check_epsilon(epsilon)
    return 1.0 / (1.0 + math.exp(-epsilon))


def randomize_label(y, epsilon: float, rng: np.random.Generator):
    """Randomized response: keep each label w.p. e^eps/(1+e^eps), else flip.

    Accepts a scalar label or an array of labels (one uniform draw per label).
    """
    p_keep = keep_probability(epsilon)
    y_arr = np.asarray(y)
    if not np.isin(y_arr, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    keep = rng.random(size=y_arr.shape) < p_keep
    out = np.where(keep, y_arr, 1 - y_arr).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def laplace_noise(scale: float, rng: np.random.Generator, size=None, u=None):
    """Inverse-CDF Laplace draws: -scale * sign(u) * ln(1 - 2|u|), u ~ U(-1/2, 1/2).

    ``u`` may be supplied to pin the quantile.
    """
    if u is None:
        u = rng.random(size=size) - 0.5
        # u = -0.5 maps to an infinite draw; redraw those
        bad = u == -0.5
        while np.any(bad):
            u = np.where(bad, rng.random(size=size) - 0.5, u)
            bad = u == -0.5
    u = np.asarray(u, dtype=np.float64)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_cdf(x, scale: float):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x < 0, 0.5 * np.exp(x / scale), 1.0 - 0.5 * np.exp(-x / scale))


def perturb_score(p, epsilon: float, rng: np.random.Generator, u=None):
    """clamp(p + Laplace(1/eps), 0, 1) for a scalar or an array of scores."""
    eps = check_epsilon(epsilon)
    p_arr = np.asarray(p, dtype=np.float64)
    if not (np.all(np.isfinite(p_arr)) and np.all((p_arr >= 0) & (p_arr <= 1))):
        raise InvalidScore("scores must lie in [0, 1]")
    noise = laplace_noise(1.0 / eps, rng, size=p_arr.shape, u=u)
    out = np.clip(p_arr + noise, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def expected_rr_accuracy(acc: float, epsilon: float) -> float:
    p_keep = keep_probability(epsilon)
    return acc * p_keep + (1.0 - acc) * (1.0 - p_keep)


def privatize(scores, cfg: DpConfig, threshold: float, rng: np.random.Generator) -> np.ndarray:
    """Apply the configured mechanism to ensemble scores and return labels."""
    scores = np.asarray(scores, dtype=np.float64)
    if cfg.mechanism == "randomized_response":
        labels = (scores >= threshold).astype(np.int64)
        return np.atleast_1d(randomize_label(labels, cfg.epsilon, rng))
    noisy = np.atleast_1d(perturb_score(scores, cfg.epsilon, rng))
    return (noisy >= threshold).astype(np.int64)
