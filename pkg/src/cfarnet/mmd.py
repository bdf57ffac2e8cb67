"""Kernel two-sample distance between scalar score samples.

The penalty used during training is the biased (V-statistic) empirical MMD
with a Gaussian RBF kernel. The V-statistic keeps the diagonal terms, so it
is non-negative for every input and defined even for singleton samples.
Gradients with respect to the score values are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cfarnet import kernels


@dataclass(frozen=True)
class KernelConfig:
    """RBF length scale; k(a, b) = exp(-(a-b)^2 / (2 h^2))."""

    bandwidth: float

    def __post_init__(self):
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")


def rbf_kernel(a: float, b: float, cfg: KernelConfig) -> float:
    """Gaussian RBF kernel between two scalars."""
    d = a - b
    return math.exp(-(d * d) / (2.0 * cfg.bandwidth * cfg.bandwidth))


def _as_sample(s, name):
    arr = np.asarray(s, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return arr


def mmd_biased(s1, s2, cfg: KernelConfig) -> float:
    """Biased empirical MMD between two scalar samples; always >= 0."""
    a = _as_sample(s1, "s1")
    b = _as_sample(s2, "s2")
    return float(kernels.mmd_biased(a, b, cfg.bandwidth))


def mmd_gradient(s1, s2, cfg: KernelConfig):
    """Exact partial derivatives of mmd_biased w.r.t. every score entry."""
    a = _as_sample(s1, "s1")
    b = _as_sample(s2, "s2")
    _, g1, g2 = kernels.mmd_biased_grad(a, b, cfg.bandwidth)
    return g1, g2


def mmd_biased_with_gradient(s1, s2, cfg: KernelConfig):
    """(value, grad_s1, grad_s2) in one pass; used by the training loop."""
    a = _as_sample(s1, "s1")
    b = _as_sample(s2, "s2")
    value, g1, g2 = kernels.mmd_biased_grad(a, b, cfg.bandwidth)
    return float(value), g1, g2


def median_heuristic_bandwidth(samples) -> KernelConfig:
    """Median of the nonzero pairwise gaps; falls back to h=1 if all gaps are zero."""
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size < 2:
        raise ValueError("median heuristic needs at least 2 samples")
    gaps = kernels.pairwise_abs_gaps(arr)
    if gaps.size == 0:
        return KernelConfig(1.0)
    return KernelConfig(float(np.median(gaps)))
