"""Synthetic detection scenario: x = A*1 + sigma*n with unknown (A, sigma).

Defines the noise families, the hypothesis parameter sets (A = 0 under the
null), the uniform fake priors used to generate labelled training data, and
the dataset container. Every sampling routine takes an explicit
numpy Generator; nothing touches global RNG state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GAUSSIAN = "gaussian"
MIXTURE = "mixture"


@dataclass(frozen=True)
class ParamVector:
    """The unknown deterministic parameter z = (amplitude, noise scale)."""

    amplitude: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class NoiseModel:
    """Per-entry noise law: unit Gaussian or a two-component Gaussian mixture."""

    variant: str = GAUSSIAN
    epsilon: float = 0.1
    var_small: float = 1.0
    var_large: float = 100.0

    def __post_init__(self):
        if self.variant not in (GAUSSIAN, MIXTURE):
            raise ValueError(f"unknown noise variant {self.variant!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.var_small <= 0 or self.var_large <= 0:
            raise ValueError("mixture variances must be > 0")

    @classmethod
    def gaussian(cls) -> "NoiseModel":
        return cls(variant=GAUSSIAN)

    @classmethod
    def gaussian_mixture(cls, epsilon=0.1, var_small=1.0, var_large=100.0) -> "NoiseModel":
        return cls(MIXTURE, epsilon, var_small, var_large)

    @property
    def marginal_variance(self) -> float:
        if self.variant == GAUSSIAN:
            return 1.0
        return (1.0 - self.epsilon) * self.var_small + self.epsilon * self.var_large


@dataclass(frozen=True)
class Scenario:
    """Observation length, noise family, and the parameter ranges."""

    dim: int = 16
    noise: NoiseModel = NoiseModel()
    a_range: tuple = (-1.0, 1.0)
    sigma_range: tuple = (0.5, 1.0)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2 (spread features need two entries)")
        if not self.a_range[0] < self.a_range[1]:
            raise ValueError("a_range must be an ascending interval")
        if not 0 < self.sigma_range[0] < self.sigma_range[1]:
            raise ValueError("sigma_range must be ascending with positive lower end")


@dataclass(frozen=True)
class FakePrior:
    """Artificial prior used only to generate training data.

    y ~ Bernoulli(p1); under y=1 the amplitude is uniform on a_range, under
    y=0 it is exactly 0; sigma is uniform on sigma_range either way.
    """

    p1: float = 0.5
    a_range: tuple = (-1.0, 1.0)
    sigma_range: tuple = (0.5, 1.0)

    def __post_init__(self):
        if not 0.0 < self.p1 < 1.0:
            raise ValueError("p1 must lie strictly inside (0, 1)")

    @classmethod
    def for_scenario(cls, scenario: Scenario, p1: float = 0.5) -> "FakePrior":
        return cls(p1=p1, a_range=scenario.a_range, sigma_range=scenario.sigma_range)


@dataclass
class Dataset:
    """N records of (z_i, y_i) with M observations each, all drawn at z_i."""

    params: np.ndarray        # (N, 2) columns: amplitude, sigma
    labels: np.ndarray        # (N,) in {0, 1}
    observations: np.ndarray  # (N, M, dim)

    def __post_init__(self):
        n_rec = self.params.shape[0]
        if self.labels.shape != (n_rec,) or self.observations.shape[0] != n_rec:
            raise ValueError("params, labels and observations disagree on record count")
        if self.observations.ndim != 3:
            raise ValueError("observations must be (N, M, dim)")

    @property
    def num_records(self) -> int:
        return self.params.shape[0]

    @property
    def replicates(self) -> int:
        return self.observations.shape[1]

    @property
    def dim(self) -> int:
        return self.observations.shape[2]

    def record(self, i):
        a, s = self.params[i]
        return ParamVector(float(a), float(s)), int(self.labels[i]), self.observations[i]

    def take(self, indices) -> "Dataset":
        """Sub-dataset with the given record indices."""
        return Dataset(self.params[indices], self.labels[indices], self.observations[indices])


def sample_noise(noise: NoiseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """One i.i.d. noise vector of length n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _noise_block(noise, (n,), rng)


def _noise_block(noise: NoiseModel, shape, rng: np.random.Generator) -> np.ndarray:
    draws = rng.standard_normal(shape)
    if noise.variant == GAUSSIAN:
        return draws
    # Per-entry component indicator, so entries stay i.i.d.
    big = rng.random(shape) < noise.epsilon
    scale = np.where(big, np.sqrt(noise.var_large), np.sqrt(noise.var_small))
    return draws * scale


def sample_observation(scenario: Scenario, z: ParamVector, rng: np.random.Generator) -> np.ndarray:
    """One observation x = A*1 + sigma*n at the given parameter value."""
    if not z.sigma > 0:
        raise ValueError("sigma must be > 0")
    return z.amplitude + z.sigma * sample_noise(scenario.noise, scenario.dim, rng)


def sample_observations(scenario: Scenario, z: ParamVector, count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """(count, dim) block of independent observations at a fixed z."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not z.sigma > 0:
        raise ValueError("sigma must be > 0")
    return z.amplitude + z.sigma * _noise_block(scenario.noise, (count, scenario.dim), rng)


def sample_pooled_alternative(scenario: Scenario, sigma: float, count: int,
                              rng: np.random.Generator):
    """(observations, amplitudes) with per-row A ~ Uniform(a_range) at fixed sigma."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    amps = rng.uniform(scenario.a_range[0], scenario.a_range[1], count)
    noise = _noise_block(scenario.noise, (count, scenario.dim), rng)
    return amps[:, None] + sigma * noise, amps


def sample_params(prior: FakePrior, y: int, rng: np.random.Generator) -> ParamVector:
    """Draw z from the fake prior conditioned on the label."""
    if y not in (0, 1):
        raise ValueError("y must be 0 or 1")
    sigma = rng.uniform(*prior.sigma_range)
    if y == 0:
        return ParamVector(0.0, sigma)
    a = rng.uniform(*prior.a_range)
    while a == 0.0:  # y=1 requires A != 0; probability-zero redraw
        a = rng.uniform(*prior.a_range)
    return ParamVector(float(a), float(sigma))


def generate_dataset(scenario: Scenario, prior: FakePrior, num_records: int,
                     replicates: int, rng: np.random.Generator) -> Dataset:
    """N records with M observations each, reproducible from the generator state."""
    if num_records < 1:
        raise ValueError("num_records must be >= 1")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    labels = (rng.random(num_records) < prior.p1).astype(np.int8)
    sigmas = rng.uniform(prior.sigma_range[0], prior.sigma_range[1], num_records)
    amps = rng.uniform(prior.a_range[0], prior.a_range[1], num_records)
    zero = (amps == 0.0) & (labels == 1)
    while np.any(zero):
        amps[zero] = rng.uniform(prior.a_range[0], prior.a_range[1], int(zero.sum()))
        zero = (amps == 0.0) & (labels == 1)
    amps[labels == 0] = 0.0
    noise = _noise_block(scenario.noise, (num_records, replicates, scenario.dim), rng)
    obs = amps[:, None, None] + sigmas[:, None, None] * noise
    params = np.stack([amps, sigmas], axis=1)
    return Dataset(params=params, labels=labels, observations=obs)


def save_dataset(dataset: Dataset, scenario: Scenario, directory) -> None:
    """Write a dataset as .npy arrays plus a json description (no timestamps)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.save(d / "params.npy", dataset.params)
    np.save(d / "labels.npy", dataset.labels)
    np.save(d / "observations.npy", dataset.observations)
    meta = {
        "dim": scenario.dim,
        "noise": {
            "variant": scenario.noise.variant,
            "epsilon": scenario.noise.epsilon,
            "var_small": scenario.noise.var_small,
            "var_large": scenario.noise.var_large,
        },
        "a_range": list(scenario.a_range),
        "sigma_range": list(scenario.sigma_range),
        "num_records": dataset.num_records,
        "replicates": dataset.replicates,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dataset(directory):
    """Inverse of save_dataset; returns (Dataset, Scenario)."""
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    noise = NoiseModel(
        variant=meta["noise"]["variant"],
        epsilon=meta["noise"]["epsilon"],
        var_small=meta["noise"]["var_small"],
        var_large=meta["noise"]["var_large"],
    )
    scenario = Scenario(
        dim=meta["dim"],
        noise=noise,
        a_range=tuple(meta["a_range"]),
        sigma_range=tuple(meta["sigma_range"]),
    )
    dataset = Dataset(
        params=np.load(d / "params.npy"),
        labels=np.load(d / "labels.npy"),
        observations=np.load(d / "observations.npy"),
    )
    return dataset, scenario
