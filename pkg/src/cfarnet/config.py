"""Experiment configuration: strict JSON with defaults and dotted-path errors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from cfarnet.model import GAUSSIAN, MIXTURE, FakePrior, NoiseModel, Scenario
from cfarnet.training import TrainConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


@dataclass
class EvalConfig:
    mc_samples: int = 200_000
    roc_samples: int = 100_000
    sigma_grid: tuple = (0.5, 1.0)
    a_grid: tuple = (0.25, 0.5, 1.0)
    target_fpr: tuple = (0.1,)


@dataclass
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    prior: FakePrior = field(default_factory=FakePrior)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "out"


def _check_keys(mapping, allowed, path):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}{key}" if path else f"unknown key {key}")


def _get_number(mapping, key, path, default, *, integer=False, minimum=None,
                maximum=None, strict_min=None, strict_max=None):
    value = mapping.get(key, default)
    full = f"{path}.{key}" if path else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{full} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{full} must be an integer")
    value = int(value) if integer else float(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{full} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{full} must be <= {maximum}, got {value}")
    if strict_min is not None and value <= strict_min:
        raise ConfigError(f"{full} must be > {strict_min}, got {value}")
    if strict_max is not None and value >= strict_max:
        raise ConfigError(f"{full} must be < {strict_max}, got {value}")
    return value


def _get_interval(mapping, key, path, default, *, positive_low=False):
    value = mapping.get(key, default)
    full = f"{path}.{key}" if path else key
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"{full} must be a two-element numeric interval")
    lo, hi = float(value[0]), float(value[1])
    if not lo < hi:
        raise ConfigError(f"{full} must be ascending, got [{lo}, {hi}]")
    if positive_low and lo <= 0:
        raise ConfigError(f"{full} lower end must be > 0")
    return (lo, hi)


def _get_grid(mapping, key, path, default, *, strict_min=None, strict_max=None,
              nonzero=False):
    value = mapping.get(key, default)
    full = f"{path}.{key}" if path else key
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{full} must be a non-empty list of numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{full} must contain numbers only")
        v = float(v)
        if strict_min is not None and v <= strict_min:
            raise ConfigError(f"{full} entries must be > {strict_min}")
        if strict_max is not None and v >= strict_max:
            raise ConfigError(f"{full} entries must be < {strict_max}")
        if nonzero and v == 0:
            raise ConfigError(f"{full} entries must be nonzero")
        out.append(v)
    return tuple(out)


def _parse_scenario(raw):
    _check_keys(raw, {"noise", "dim", "epsilon", "var_small", "var_large",
                      "a_range", "sigma_range"}, "scenario.")
    variant = raw.get("noise", GAUSSIAN)
    if variant not in (GAUSSIAN, MIXTURE):
        raise ConfigError(f"scenario.noise must be '{GAUSSIAN}' or '{MIXTURE}', got {variant!r}")
    noise = NoiseModel(
        variant=variant,
        epsilon=_get_number(raw, "epsilon", "scenario", 0.1, minimum=0.0, maximum=1.0),
        var_small=_get_number(raw, "var_small", "scenario", 1.0, strict_min=0.0),
        var_large=_get_number(raw, "var_large", "scenario", 100.0, strict_min=0.0),
    )
    return Scenario(
        dim=_get_number(raw, "dim", "scenario", 16, integer=True, minimum=2),
        noise=noise,
        a_range=_get_interval(raw, "a_range", "scenario", [-1.0, 1.0]),
        sigma_range=_get_interval(raw, "sigma_range", "scenario", [0.5, 1.0], positive_low=True),
    )


def _parse_train(raw):
    _check_keys(raw, {"num_records", "replicates", "alpha", "epochs", "batch_size",
                      "learning_rate", "seed", "penalty_pairs_per_batch",
                      "hidden_sizes"}, "train.")
    num_records = _get_number(raw, "num_records", "train", 50_000, integer=True, minimum=1)
    hidden = raw.get("hidden_sizes", [16, 16])
    if (not isinstance(hidden, (list, tuple)) or not hidden
            or not all(isinstance(h, int) and not isinstance(h, bool) and h >= 1 for h in hidden)):
        raise ConfigError("train.hidden_sizes must be a non-empty list of positive integers")
    return TrainConfig(
        num_records=num_records,
        replicates=_get_number(raw, "replicates", "train", 10, integer=True, minimum=1),
        penalty_weight=_get_number(raw, "alpha", "train", 1.0, minimum=0.0),
        epochs=_get_number(raw, "epochs", "train", 50, integer=True, minimum=1),
        batch_size=_get_number(raw, "batch_size", "train", min(256, num_records),
                               integer=True, minimum=1, maximum=num_records),
        learning_rate=_get_number(raw, "learning_rate", "train", 1e-3, strict_min=0.0),
        seed=_get_number(raw, "seed", "train", 0, integer=True),
        penalty_pairs_per_batch=_get_number(raw, "penalty_pairs_per_batch", "train", 32,
                                            integer=True, minimum=1),
        hidden_sizes=tuple(hidden),
    )


def _parse_eval(raw):
    _check_keys(raw, {"mc_samples", "roc_samples", "sigma_grid", "a_grid",
                      "target_fpr"}, "eval.")
    return EvalConfig(
        mc_samples=_get_number(raw, "mc_samples", "eval", 200_000, integer=True, minimum=1),
        roc_samples=_get_number(raw, "roc_samples", "eval", 100_000, integer=True, minimum=1),
        sigma_grid=_get_grid(raw, "sigma_grid", "eval", [0.5, 1.0], strict_min=0.0),
        a_grid=_get_grid(raw, "a_grid", "eval", [0.25, 0.5, 1.0], nonzero=True),
        target_fpr=_get_grid(raw, "target_fpr", "eval", [0.1], strict_min=0.0, strict_max=1.0),
    )


def parse_config(path=None, overrides=None) -> ExperimentConfig:
    """Load and validate a JSON experiment config; unknown keys are rejected.

    `overrides` may carry CLI-level settings: seed (int), out (str),
    quick (bool).
    """
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {p}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("top-level config must be a JSON object")

    _check_keys(raw, {"scenario", "prior", "train", "eval", "output_dir"}, "")
    for section in ("scenario", "prior", "train", "eval"):
        if section in raw and not isinstance(raw[section], dict):
            raise ConfigError(f"{section} must be a JSON object")

    prior_raw = raw.get("prior", {})
    _check_keys(prior_raw, {"p1"}, "prior.")
    p1 = _get_number(prior_raw, "p1", "prior", 0.5, strict_min=0.0, strict_max=1.0)

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")

    try:
        scenario = _parse_scenario(raw.get("scenario", {}))
        train = _parse_train(raw.get("train", {}))
        eval_cfg = _parse_eval(raw.get("eval", {}))
    except ConfigError:
        raise
    except ValueError as exc:  # dataclass-level invariant
        raise ConfigError(str(exc)) from exc

    overrides = overrides or {}
    if overrides.get("quick"):
        train.num_records = 2000
        train.batch_size = min(train.batch_size, 256)
        train.epochs = min(train.epochs, 20)
        eval_cfg.mc_samples = 10_000
        eval_cfg.roc_samples = 10_000
    if overrides.get("seed") is not None:
        train.seed = int(overrides["seed"])
    if overrides.get("out") is not None:
        output_dir = str(overrides["out"])

    prior = FakePrior(p1=p1, a_range=scenario.a_range, sigma_range=scenario.sigma_range)
    return ExperimentConfig(scenario=scenario, prior=prior, train=train,
                            eval=eval_cfg, output_dir=output_dir)
