"""The learned scoring function: fixed features -> small MLP -> scalar score.

Observations are reduced to four permutation-invariant statistics (mean,
variance, median, MAD), affinely standardized with constants frozen at
training time, and passed through tanh hidden layers with a linear scalar
output. Forward and reverse passes are plain numpy; gradients are exact and
flow to the parameters only, never to the observation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from cfarnet import kernels

STATS4 = "stats4"
RAW = "raw"
_FEATURIZER_TAGS = {STATS4: 0, RAW: 1}
_MAGIC = b"CFNT"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    variance: float
    median: float
    mad: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mean, self.variance, self.median, self.mad])


def extract_features(x) -> FeatureVector:
    """Four summary statistics of one observation vector (length >= 2)."""
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError("extract_features needs at least 2 entries")
    row = kernels.batch_features(v[None, :])[0]
    return FeatureVector(float(row[0]), float(row[1]), float(row[2]), float(row[3]))


def sigmoid(s):
    """Logistic function, overflow-safe for arbitrarily large |s|."""
    arr = np.asarray(s, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    e = np.exp(arr[~pos])
    out[~pos] = e / (1.0 + e)
    return float(out) if np.isscalar(s) or arr.ndim == 0 else out


def bce_loss(score, y):
    """Binary cross-entropy on the logit scale; stable for large |score|."""
    s = np.asarray(score, dtype=np.float64)
    t = np.asarray(y, dtype=np.float64)
    if np.any((t != 0) & (t != 1)):
        raise ValueError("labels must be 0 or 1")
    loss = np.maximum(s, 0.0) - s * t + np.log1p(np.exp(-np.abs(s)))
    return float(loss) if loss.ndim == 0 else loss


class ScoringNetwork:
    """MLP over extracted features with frozen input standardization."""

    def __init__(self, layer_sizes, weights, biases, feat_mean, feat_scale,
                 featurizer=STATS4):
        if featurizer not in _FEATURIZER_TAGS:
            raise ValueError(f"unknown featurizer {featurizer!r}")
        if layer_sizes[-1] != 1:
            raise ValueError("output layer must be scalar")
        if len(weights) != len(layer_sizes) - 1 or len(biases) != len(weights):
            raise ValueError("layer_sizes and parameter lists disagree")
        for idx, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_sizes[idx], layer_sizes[idx + 1]) or b.shape != (layer_sizes[idx + 1],):
                raise ValueError(f"parameter shape mismatch in layer {idx}")
        if feat_mean.shape != (layer_sizes[0],) or feat_scale.shape != (layer_sizes[0],):
            raise ValueError("normalization constants must match the input width")
        self.layer_sizes = list(layer_sizes)
        self.weights = weights
        self.biases = biases
        self.feat_mean = feat_mean
        self.feat_scale = feat_scale
        self.featurizer = featurizer

    @classmethod
    def initialize(cls, layer_sizes, rng: np.random.Generator, featurizer=STATS4):
        """Symmetric uniform init with limit sqrt(6 / (fan_in + fan_out)); zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        width = layer_sizes[0]
        return cls(layer_sizes, weights, biases,
                   np.zeros(width), np.ones(width), featurizer)

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def set_normalization(self, mean, scale) -> None:
        mean = np.asarray(mean, dtype=np.float64)
        scale = np.asarray(scale, dtype=np.float64)
        if mean.shape != (self.layer_sizes[0],) or scale.shape != mean.shape:
            raise ValueError("normalization constants must match the input width")
        if np.any(scale <= 0):
            raise ValueError("normalization scale must be positive")
        self.feat_mean = mean
        self.feat_scale = scale

    def featurize(self, observations) -> np.ndarray:
        """Raw (un-normalized) feature matrix for a (B, n) observation block."""
        obs = np.asarray(observations, dtype=np.float64)
        if obs.ndim != 2:
            raise ValueError("expected a (B, n) observation block")
        if self.featurizer == STATS4:
            feats = kernels.batch_features(obs)
        else:
            feats = obs
        if feats.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"feature width {feats.shape[1]} does not match input width {self.layer_sizes[0]}")
        return feats

    def score_batch(self, observations) -> np.ndarray:
        feats = self.featurize(observations)
        scores, _ = self.run_normalized((feats - self.feat_mean) / self.feat_scale)
        return scores

    def run_normalized(self, h0):
        """Forward pass over already-normalized features; returns (scores, caches)."""
        acts = [h0]
        h = h0
        last = len(self.weights) - 1
        for idx, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if idx == last else np.tanh(z)
            acts.append(h)
        return acts[-1][:, 0], acts

    def backprop_normalized(self, acts, upstream):
        """Gradients of sum_i upstream_i * score_i w.r.t. all parameters."""
        grads = NetGradients.zeros_like(self)
        delta = np.asarray(upstream, dtype=np.float64)[:, None]
        for idx in range(len(self.weights) - 1, -1, -1):
            grads.weights[idx][...] = acts[idx].T @ delta
            grads.biases[idx][...] = delta.sum(axis=0)
            if idx > 0:
                delta = (delta @ self.weights[idx].T) * (1.0 - acts[idx] ** 2)
        return grads


class NetGradients:
    """Per-layer weight and bias gradients, same shapes as the network."""

    def __init__(self, weights, biases):
        self.weights = weights
        self.biases = biases

    @classmethod
    def zeros_like(cls, net: ScoringNetwork) -> "NetGradients":
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def add_scaled(self, other: "NetGradients", factor: float) -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine += factor * theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine += factor * theirs

    def as_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)


def forward(net: ScoringNetwork, x) -> float:
    """Score a single observation; identical arithmetic to the batch path."""
    v = np.asarray(x, dtype=np.float64).ravel()
    return float(net.score_batch(v[None, :])[0])


def backward(net: ScoringNetwork, x, upstream: float) -> NetGradients:
    """Exact gradient of (upstream * score) w.r.t. every weight and bias."""
    v = np.asarray(x, dtype=np.float64).ravel()
    feats = net.featurize(v[None, :])
    _, acts = net.run_normalized((feats - net.feat_mean) / net.feat_scale)
    return net.backprop_normalized(acts, np.array([upstream]))


def save_network(net: ScoringNetwork, path) -> None:
    """Self-describing flat binary; little-endian f64 parameters, row-major."""
    parts = [_MAGIC, struct.pack("<I", _FORMAT_VERSION),
             struct.pack("<I", _FEATURIZER_TAGS[net.featurizer]),
             struct.pack("<I", len(net.layer_sizes))]
    parts.extend(struct.pack("<I", s) for s in net.layer_sizes)
    parts.append(np.ascontiguousarray(net.feat_mean, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(net.feat_scale, dtype="<f8").tobytes())
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_network(path) -> ScoringNetwork:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError("not a scoring-network file")
    version, tag, num_sizes = struct.unpack_from("<III", blob, 4)
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    featurizer = {v: k for k, v in _FEATURIZER_TAGS.items()}.get(tag)
    if featurizer is None:
        raise ValueError(f"unknown featurizer tag {tag}")
    offset = 16
    sizes = list(struct.unpack_from(f"<{num_sizes}I", blob, offset))
    offset += 4 * num_sizes

    def take(count):
        nonlocal offset
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).copy()
        offset += 8 * count
        return arr

    feat_mean = take(sizes[0])
    feat_scale = take(sizes[0])
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(take(fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(take(fan_out))
    if offset != len(blob):
        raise ValueError("trailing bytes in network file")
    return ScoringNetwork(sizes, weights, biases, feat_mean, feat_scale, featurizer)
