"""Pure numpy implementations of the hot kernels.

Drop-in fallback for the compiled module `cfarnet._core`; both expose the
same four functions and are selected in `cfarnet.kernels` at import time.
All routines work on float64 and are deterministic for a fixed input.
"""

import numpy as np

BACKEND = "python"


def batch_features(x):
    """Per-row (mean, unbiased variance, median, median absolute deviation).

    `x` is a (B, n) array with n >= 2. Every statistic is computed from the
    sorted row, so permuting entries within a row cannot change the output
    even in the last bit.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("batch_features expects a (B, n) array with n >= 2")
    s = np.sort(x, axis=1)
    n = s.shape[1]
    mean = s.mean(axis=1)
    var = s.var(axis=1, ddof=1)
    if n % 2:
        med = s[:, n // 2].copy()
    else:
        med = 0.5 * (s[:, n // 2 - 1] + s[:, n // 2])
    mad = np.median(np.abs(s - med[:, None]), axis=1)
    return np.stack([mean, var, med, mad], axis=1)


def _rbf_matrix(a, b, h):
    d = a[:, None] - b[None, :]
    return np.exp(d * d * (-0.5 / (h * h)))


def mmd_biased(s1, s2, h):
    """Biased (V-statistic) MMD between two 1-D score samples, RBF kernel."""
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    n, m = s1.size, s2.size
    t11 = float(np.sum(_rbf_matrix(s1, s1, h))) / (n * n)
    t22 = float(np.sum(_rbf_matrix(s2, s2, h))) / (m * m)
    t12 = float(np.sum(_rbf_matrix(s1, s2, h))) / (n * m)
    return t11 + t22 - 2.0 * t12


def mmd_biased_grad(s1, s2, h):
    """Value of the biased MMD plus exact gradients w.r.t. both samples.

    Uses d/da exp(-(a-b)^2 / 2h^2) = -((a-b)/h^2) * k(a, b); each entry
    appears in two symmetric positions of the within-sample sums, hence the
    factor 2.
    """
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    n, m = s1.size, s2.size
    inv_h2 = 1.0 / (h * h)

    d11 = s1[:, None] - s1[None, :]
    k11 = np.exp(d11 * d11 * (-0.5 * inv_h2))
    d22 = s2[:, None] - s2[None, :]
    k22 = np.exp(d22 * d22 * (-0.5 * inv_h2))
    d12 = s1[:, None] - s2[None, :]
    k12 = np.exp(d12 * d12 * (-0.5 * inv_h2))

    value = (
        float(np.sum(k11)) / (n * n)
        + float(np.sum(k22)) / (m * m)
        - 2.0 * float(np.sum(k12)) / (n * m)
    )
    # dk/da summed over the other argument
    g11 = np.sum(-d11 * inv_h2 * k11, axis=1)
    g22 = np.sum(-d22 * inv_h2 * k22, axis=1)
    g12_1 = np.sum(-d12 * inv_h2 * k12, axis=1)
    g12_2 = np.sum(d12 * inv_h2 * k12, axis=0)
    grad1 = (2.0 / (n * n)) * g11 - (2.0 / (n * m)) * g12_1
    grad2 = (2.0 / (m * m)) * g22 - (2.0 / (n * m)) * g12_2
    return value, grad1, grad2


def pairwise_abs_gaps(x):
    """All nonzero |x_i - x_j| over unordered pairs i < j, as a flat array."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 2:
        return np.empty(0, dtype=np.float64)
    iu = np.triu_indices(n, k=1)
    gaps = np.abs(x[iu[0]] - x[iu[1]])
    return gaps[gaps > 0.0]
