"""Classical likelihood-ratio baselines and the shared thresholding rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ThresholdRule:
    """Decide 1 iff score >= gamma."""

    gamma: float


def apply_threshold(score: float, rule: ThresholdRule) -> int:
    if not math.isfinite(score):
        raise ValueError(f"score must be finite, got {score}")
    return 1 if score >= rule.gamma else 0


def lrt_score(log_p1, log_p0, x) -> float:
    """Simple-vs-simple log likelihood ratio statistic 2*(log p1(x) - log p0(x))."""
    l1 = float(log_p1(x))
    l0 = float(log_p0(x))
    if not (math.isfinite(l1) and math.isfinite(l0)):
        raise ValueError(f"non-finite log density: log_p1={l1}, log_p0={l0}")
    return 2.0 * (l1 - l0)


def glrt_gaussian_score(x) -> float:
    """Closed-form Gaussian GLRT statistic (sum x)^2 / (sum x^2).

    Scale-invariant, bounded in [0, n]; the all-zero vector maps to 0 so
    Monte Carlo pipelines stay total.
    """
    v = np.asarray(x, dtype=np.float64).ravel()
    denom = float(np.dot(v, v))
    if denom == 0.0:
        return 0.0
    s = float(np.sum(v))
    return (s * s) / denom


def glrt_gaussian_score_batch(x) -> np.ndarray:
    """Vectorized GLRT statistic over the rows of a (B, n) array."""
    m = np.asarray(x, dtype=np.float64)
    sums = m.sum(axis=1)
    denom = np.einsum("ij,ij->i", m, m)
    out = np.zeros(m.shape[0], dtype=np.float64)
    nz = denom > 0.0
    out[nz] = sums[nz] ** 2 / denom[nz]
    return out
