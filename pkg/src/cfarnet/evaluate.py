"""Monte Carlo evaluation: rates, ROC/AUC, threshold calibration, CFAR deviation.

A scorer is any callable mapping a (B, n) observation block to a (B,) score
array. AUC uses the rank (Mann-Whitney) statistic with half credit for
ties, so auc(h0, h1) + auc(h1, h0) = 1 exactly. CFAR deviation is the worst
two-sample Kolmogorov-Smirnov distance between null score distributions
across parameter values.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from cfarnet.model import ParamVector, Scenario, sample_observations


@dataclass
class RateEstimate:
    rate: float
    std_error: float
    num_samples: int


@dataclass
class RocCurve:
    thresholds: np.ndarray  # descending, with +/-inf sentinels
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.thresholds, self.fpr, self.tpr))


def score_samples(scorer, scenario: Scenario, z: ParamVector, count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Scores of `count` fresh observations drawn at the fixed parameter value."""
    if count < 1:
        raise ValueError("count must be >= 1")
    obs = sample_observations(scenario, z, count, rng)
    return np.asarray(scorer(obs), dtype=np.float64)


def estimate_rate(scores, gamma: float) -> RateEstimate:
    """Fraction of scores >= gamma with a binomial standard error."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("scores must be non-empty")
    rate = float(np.mean(arr >= gamma))
    se = math.sqrt(rate * (1.0 - rate) / arr.size)
    return RateEstimate(rate, se, arr.size)


def _auc_mann_whitney(scores_h0, scores_h1) -> float:
    pooled = np.concatenate([scores_h0, scores_h1])
    # fractional (tie-averaged) ranks, 1-based
    _, inverse, counts = np.unique(pooled, return_inverse=True, return_counts=True)
    cum = np.concatenate([[0.0], np.cumsum(counts)])
    avg_rank = cum[:-1] + (counts + 1) / 2.0
    ranks = avg_rank[inverse]
    n0 = scores_h0.size
    n1 = scores_h1.size
    rank_sum_h1 = float(np.sum(ranks[n0:]))
    u1 = rank_sum_h1 - n1 * (n1 + 1) / 2.0
    return u1 / (n0 * n1)


def roc_curve(scores_h0, scores_h1) -> RocCurve:
    """Empirical ROC over the union of observed scores, plus AUC."""
    h0 = np.asarray(scores_h0, dtype=np.float64).ravel()
    h1 = np.asarray(scores_h1, dtype=np.float64).ravel()
    if h0.size == 0 or h1.size == 0:
        raise ValueError("both score samples must be non-empty")
    uniques = np.unique(np.concatenate([h0, h1]))  # ascending
    thresholds = np.concatenate([[np.inf], uniques[::-1], [-np.inf]])
    h0_sorted = np.sort(h0)
    h1_sorted = np.sort(h1)
    # count of scores >= t via position of t in the ascending sort
    fpr = (h0.size - np.searchsorted(h0_sorted, thresholds, side="left")) / h0.size
    tpr = (h1.size - np.searchsorted(h1_sorted, thresholds, side="left")) / h1.size
    return RocCurve(thresholds, fpr, tpr, _auc_mann_whitney(h0, h1))


def calibrate_threshold(scores_h0, target_fpr: float) -> float:
    """Smallest observed score whose exceedance rate is within the FPR budget.

    Returns +inf when even the largest score is exceeded too often.
    """
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must lie strictly inside (0, 1)")
    arr = np.asarray(scores_h0, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("scores must be non-empty")
    arr_sorted = np.sort(arr)
    uniques = np.unique(arr_sorted)
    counts_ge = arr.size - np.searchsorted(arr_sorted, uniques, side="left")
    ok = counts_ge / arr.size <= target_fpr
    if not np.any(ok):
        return math.inf
    return float(uniques[np.argmax(ok)])


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic (max ECDF gap), in [0, 1]."""
    x = np.sort(np.asarray(a, dtype=np.float64).ravel())
    y = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if x.size == 0 or y.size == 0:
        raise ValueError("samples must be non-empty")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / x.size
    cdf_y = np.searchsorted(y, pooled, side="right") / y.size
    return float(np.max(np.abs(cdf_x - cdf_y)))


def _param_stream(seed_key: int, z: ParamVector) -> np.random.Generator:
    # Key the stream on the parameter value itself: identical z values see
    # identical observations (common random numbers across detectors and
    # duplicate entries).
    a_bits, s_bits = struct.unpack("<QQ", struct.pack("<dd", z.amplitude, z.sigma))
    return np.random.default_rng(np.random.SeedSequence([seed_key, a_bits, s_bits]))


def cfar_deviation(scorer, scenario: Scenario, z_list, count: int, seed) -> float:
    """Worst pairwise KS distance between null score distributions.

    `seed` may be an int or a Generator (an entropy word is drawn from it).
    Zero exactly when all empirical null score distributions coincide.
    """
    if len(z_list) < 2:
        raise ValueError("need at least 2 parameter values")
    for z in z_list:
        if z.amplitude != 0.0:
            raise ValueError(f"null parameter values require amplitude 0, got {z.amplitude}")
    if isinstance(seed, np.random.Generator):
        seed_key = int(seed.integers(0, 2**63))
    else:
        seed_key = int(seed)
    samples = [score_samples(scorer, scenario, z, count, _param_stream(seed_key, z))
               for z in z_list]
    worst = 0.0
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            worst = max(worst, ks_statistic(samples[i], samples[j]))
    return worst


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    """Deterministic CSV: given header and row tuples, floats via repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


ROC_HEADER = ["detector", "sigma", "threshold", "fpr", "tpr"]
FPR_HEADER = ["detector", "sigma", "threshold", "fpr", "std_error"]
SUMMARY_HEADER = ["detector", "scenario", "auc_sigma_lo", "auc_sigma_hi", "cfar_deviation"]
