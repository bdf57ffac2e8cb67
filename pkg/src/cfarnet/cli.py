"""Command-line experiment runner.

Subcommands: generate (dataset), train (NET and CFAR-NET), eval (GLRT /
NET / CFAR-NET on the sigma/A grid), and reproduce-fig1 (the full
two-noise-model comparison). Stages are resumable: each reads the previous
stage's artifacts from the output directory. Everything except the
run_meta.json sidecar is byte-deterministic for a fixed config and seed.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from cfarnet import __version__, evaluate, svg
from cfarnet.config import ConfigError, ExperimentConfig, parse_config
from cfarnet.detectors import glrt_gaussian_score_batch
from cfarnet.kernels import BACKEND
from cfarnet.model import (GAUSSIAN, MIXTURE, FakePrior, NoiseModel, ParamVector,
                           Scenario, generate_dataset, load_dataset, save_dataset,
                           sample_observations, sample_pooled_alternative)
from cfarnet.net import load_network, save_network
from cfarnet.training import train_detector

DETECTOR_GLRT = "GLRT"
DETECTOR_NET = "NET"
DETECTOR_CFAR_NET = "CFAR-NET"

_STREAM_DATASET = 1
_STREAM_EVAL_NULL = 2
_STREAM_EVAL_ROC = 3
_STREAM_EVAL_TPR = 4
_STREAM_CFAR_DEV = 5

_ROC_MAX_CSV_POINTS = 400
_FPR_GRID_POINTS = 101


class PipelineError(RuntimeError):
    """A stage failed at runtime (exit code 2)."""


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _threads() -> int:
    raw = os.environ.get("CFARNET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_tasks(tasks):
    """Run zero-arg callables, optionally in a thread pool; order preserved."""
    workers = _threads()
    if workers == 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: t(), tasks))


class _Lock:
    """One experiment directory is owned by one process."""

    def __init__(self, out_dir: Path):
        self.path = out_dir / ".lock"
        self.held = False

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise PipelineError(
                f"output directory is locked by another run: {self.path} "
                "(remove the file if that run is dead)") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        self.held = True
        return self

    def __exit__(self, *exc):
        if self.held:
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass
        return False


def _stream_seed(seed: int, stream: int, extra=()) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(stream), *map(int, extra)])


def _variant_scenario(cfg: ExperimentConfig, variant: str) -> Scenario:
    noise = NoiseModel(variant=variant, epsilon=cfg.scenario.noise.epsilon,
                       var_small=cfg.scenario.noise.var_small,
                       var_large=cfg.scenario.noise.var_large)
    return dataclasses.replace(cfg.scenario, noise=noise)


def _dataset_dir(out: Path, variant: str) -> Path:
    return out / f"dataset_{variant}"


def _net_path(out: Path, detector: str, variant: str) -> Path:
    stem = "net" if detector == DETECTOR_NET else "cfar_net"
    return out / f"{stem}_{variant}.cfnet"


def _slug(detector: str) -> str:
    return detector.lower().replace("-", "_")


def _dataset_rng(cfg: ExperimentConfig, variant: str) -> np.random.Generator:
    key = 0 if variant == GAUSSIAN else 1
    return np.random.default_rng(_stream_seed(cfg.train.seed, _STREAM_DATASET, [key]))


def cmd_generate(cfg: ExperimentConfig, out: Path) -> None:
    variant = cfg.scenario.noise.variant
    rng = _dataset_rng(cfg, variant)
    dataset = generate_dataset(cfg.scenario, cfg.prior, cfg.train.num_records,
                               cfg.train.replicates, rng)
    save_dataset(dataset, cfg.scenario, _dataset_dir(out, variant))
    print(f"generated dataset: {dataset.num_records} records x {dataset.replicates} "
          f"replicates, dim {dataset.dim}, noise {variant}")


def _train_pair(cfg: ExperimentConfig, dataset, variant: str, out: Path):
    nets = {}
    for detector, alpha in ((DETECTOR_NET, 0.0), (DETECTOR_CFAR_NET, cfg.train.penalty_weight)):
        train_cfg = dataclasses.replace(cfg.train, penalty_weight=alpha)
        started = time.perf_counter()
        net, report = train_detector(dataset, train_cfg)
        elapsed = time.perf_counter() - started
        save_network(net, _net_path(out, detector, variant))
        report.write_csv(out / f"train_report_{_slug(detector)}_{variant}.csv")
        nets[detector] = net
        print(f"trained {detector} ({variant}): final class loss "
              f"{report.class_loss[-1]:.4f}, penalty {report.penalty[-1]:.5f} "
              f"[{elapsed:.1f}s]")
    return nets


def cmd_train(cfg: ExperimentConfig, out: Path) -> None:
    variant = cfg.scenario.noise.variant
    ds_dir = _dataset_dir(out, variant)
    if not (ds_dir / "meta.json").exists():
        raise ConfigError(f"no dataset at {ds_dir}; run the generate stage first")
    dataset, _ = load_dataset(ds_dir)
    if (dataset.num_records != cfg.train.num_records
            or dataset.replicates != cfg.train.replicates):
        raise ConfigError(
            f"dataset at {ds_dir} has {dataset.num_records} records x "
            f"{dataset.replicates} replicates but the config asks for "
            f"{cfg.train.num_records} x {cfg.train.replicates}; regenerate it")
    _train_pair(cfg, dataset, variant, out)


def _load_detectors(out: Path, variant: str):
    scorers = {DETECTOR_GLRT: glrt_gaussian_score_batch}
    for detector in (DETECTOR_NET, DETECTOR_CFAR_NET):
        path = _net_path(out, detector, variant)
        if not path.exists():
            raise ConfigError(f"missing trained network {path}; run the train stage first")
        net = load_network(path)
        scorers[detector] = net.score_batch
    return scorers


def _downsample(arr: np.ndarray, limit: int) -> np.ndarray:
    if arr.size <= limit:
        return arr
    idx = np.linspace(0, arr.size - 1, limit).round().astype(int)
    return arr[np.unique(idx)]


def _evaluate_scenario(cfg: ExperimentConfig, scenario: Scenario, scorers, dest: Path):
    """Score all detectors on the sigma/A grid; write CSVs and SVG panels."""
    dest.mkdir(parents=True, exist_ok=True)
    ev = cfg.eval
    seed = cfg.train.seed
    sigma_grid = list(ev.sigma_grid)
    names = list(scorers)

    def sigma_cell(index, sigma):
        def run():
            rng_null = np.random.default_rng(_stream_seed(seed, _STREAM_EVAL_NULL, [index]))
            null_obs = sample_observations(scenario, ParamVector(0.0, sigma),
                                           ev.mc_samples, rng_null)
            rng_roc = np.random.default_rng(_stream_seed(seed, _STREAM_EVAL_ROC, [index]))
            h1_obs, _ = sample_pooled_alternative(scenario, sigma, ev.roc_samples, rng_roc)
            cell = {"null": {}, "h1": {}, "tpr": {}}
            for name in names:
                cell["null"][name] = np.asarray(scorers[name](null_obs), dtype=np.float64)
                cell["h1"][name] = np.asarray(scorers[name](h1_obs), dtype=np.float64)
            for a_idx, amp in enumerate(ev.a_grid):
                rng_tpr = np.random.default_rng(
                    _stream_seed(seed, _STREAM_EVAL_TPR, [index, a_idx]))
                obs = sample_observations(scenario, ParamVector(amp, sigma),
                                          ev.roc_samples, rng_tpr)
                for name in names:
                    cell["tpr"].setdefault(name, {})[amp] = np.asarray(
                        scorers[name](obs), dtype=np.float64)
            return cell
        return run

    cells = _run_tasks([sigma_cell(i, s) for i, s in enumerate(sigma_grid)])
    by_sigma = dict(zip(sigma_grid, cells))

    # ROC curves and csv
    roc_rows = []
    curves = {}
    for sigma in sigma_grid:
        for name in names:
            curve = evaluate.roc_curve(by_sigma[sigma]["null"][name],
                                       by_sigma[sigma]["h1"][name])
            curves[(name, sigma)] = curve
            keep = _downsample(np.arange(curve.thresholds.size), _ROC_MAX_CSV_POINTS)
            for k in keep:
                roc_rows.append((name, sigma, float(curve.thresholds[k]),
                                 float(curve.fpr[k]), float(curve.tpr[k])))
    evaluate.write_csv(dest / "roc.csv", evaluate.ROC_HEADER, roc_rows)

    # FPR vs threshold on a per-detector grid of pooled-null quantiles
    fpr_rows = []
    fpr_curves = {}
    for name in names:
        pooled = np.concatenate([by_sigma[s]["null"][name] for s in sigma_grid])
        qs = np.linspace(0.0, 1.0, _FPR_GRID_POINTS)
        grid = np.unique(np.quantile(pooled, qs))
        for sigma in sigma_grid:
            scores = by_sigma[sigma]["null"][name]
            rates = [evaluate.estimate_rate(scores, g) for g in grid]
            fpr_curves[(name, sigma)] = (grid, np.array([r.rate for r in rates]))
            for g, r in zip(grid, rates):
                fpr_rows.append((name, sigma, float(g), r.rate, r.std_error))
    evaluate.write_csv(dest / "fpr_vs_threshold.csv", evaluate.FPR_HEADER, fpr_rows)

    # CFAR deviation across the null grid and summary rows
    dev_seed = int(_stream_seed(seed, _STREAM_CFAR_DEV).generate_state(1)[0])
    z_list = [ParamVector(0.0, s) for s in sigma_grid]
    sig_lo, sig_hi = min(sigma_grid), max(sigma_grid)
    summary_rows = []
    deviations = {}
    for name in names:
        deviations[name] = evaluate.cfar_deviation(scorers[name], scenario, z_list,
                                                   ev.mc_samples, dev_seed)
        summary_rows.append((name, scenario.noise.variant,
                             curves[(name, sig_lo)].auc, curves[(name, sig_hi)].auc,
                             deviations[name]))

    # FPR spread at thresholds calibrated on the pooled null scores
    calib = {}
    for name in names:
        pooled = np.concatenate([by_sigma[s]["null"][name] for s in sigma_grid])
        for target in ev.target_fpr:
            gamma = evaluate.calibrate_threshold(pooled, target)
            per_sigma = {s: evaluate.estimate_rate(by_sigma[s]["null"][name], gamma).rate
                         for s in sigma_grid}
            calib[(name, target)] = (gamma, per_sigma)

    _emit_panels(dest, scenario, sigma_grid, names, curves, fpr_curves, by_sigma)
    _print_summary(scenario, names, curves, deviations, calib, sig_lo, sig_hi)
    return summary_rows


def _emit_panels(dest, scenario, sigma_grid, names, curves, fpr_curves, by_sigma):
    variant = scenario.noise.variant
    for sigma in sigma_grid:
        tag = f"sigma{sigma:g}"
        roc_series = []
        for name in names:
            curve = curves[(name, sigma)]
            roc_series.append((name, curve.fpr, curve.tpr))
        svg.emit_svg_plot(roc_series, svg.AxesMeta(
            title=f"ROC, {variant} noise, sigma={sigma:g}",
            xlabel="FPR", ylabel="TPR", xlog=True,
            xlim=(1e-4, 1.0), ylim=(0.0, 1.0)), dest / f"roc_{tag}.svg")

        fpr_series = [(name, *fpr_curves[(name, sigma)]) for name in names]
        svg.emit_svg_plot(fpr_series, svg.AxesMeta(
            title=f"FPR vs threshold, {variant} noise, sigma={sigma:g}",
            xlabel="threshold", ylabel="FPR", ylim=(0.0, 1.0)),
            dest / f"fpr_vs_threshold_{tag}.svg")

        tpr_series = []
        for name in names:
            grid, _ = fpr_curves[(name, sigma)]
            pooled_h1 = by_sigma[sigma]["h1"][name]
            tpr = [float(np.mean(pooled_h1 >= g)) for g in grid]
            tpr_series.append((name, grid, np.array(tpr)))
        svg.emit_svg_plot(tpr_series, svg.AxesMeta(
            title=f"TPR vs threshold, {variant} noise, sigma={sigma:g}",
            xlabel="threshold", ylabel="TPR", ylim=(0.0, 1.0)),
            dest / f"tpr_vs_threshold_{tag}.svg")


def _print_summary(scenario, names, curves, deviations, calib, sig_lo, sig_hi):
    variant = scenario.noise.variant
    print(f"\n== {variant} noise ==")
    print(f"{'detector':<10} {'auc(s=' + format(sig_lo, 'g') + ')':<14} "
          f"{'auc(s=' + format(sig_hi, 'g') + ')':<14} {'cfar_dev':<10} fpr by sigma at calibrated gamma")
    for name in names:
        fpr_bits = []
        for (det, target), (gamma, per_sigma) in calib.items():
            if det != name:
                continue
            parts = ", ".join(f"{s:g}:{r:.3f}" for s, r in per_sigma.items())
            fpr_bits.append(f"target {target:g} -> {parts}")
        print(f"{name:<10} {curves[(name, sig_lo)].auc:<14.4f} "
              f"{curves[(name, sig_hi)].auc:<14.4f} {deviations[name]:<10.4f} "
              f"{'; '.join(fpr_bits)}")


def cmd_eval(cfg: ExperimentConfig, out: Path) -> None:
    variant = cfg.scenario.noise.variant
    scorers = _load_detectors(out, variant)
    summary_rows = _evaluate_scenario(cfg, cfg.scenario, scorers, out / variant)
    evaluate.write_csv(out / "summary.csv", evaluate.SUMMARY_HEADER, summary_rows)


def cmd_reproduce_fig1(cfg: ExperimentConfig, out: Path) -> None:
    all_rows = []
    for variant in (GAUSSIAN, MIXTURE):
        scenario = _variant_scenario(cfg, variant)
        prior = FakePrior(p1=cfg.prior.p1, a_range=scenario.a_range,
                          sigma_range=scenario.sigma_range)
        dataset = generate_dataset(scenario, prior, cfg.train.num_records,
                                   cfg.train.replicates, _dataset_rng(cfg, variant))
        nets = _train_pair(cfg, dataset, variant, out)
        scorers = {DETECTOR_GLRT: glrt_gaussian_score_batch,
                   DETECTOR_NET: nets[DETECTOR_NET].score_batch,
                   DETECTOR_CFAR_NET: nets[DETECTOR_CFAR_NET].score_batch}
        all_rows.extend(_evaluate_scenario(cfg, scenario, scorers, out / variant))
    evaluate.write_csv(out / "summary.csv", evaluate.SUMMARY_HEADER, all_rows)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; spec wants 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfarnet",
                     description="Learned CFAR detectors: data generation, training, "
                                 "Monte Carlo evaluation, and figure reproduction.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("generate", cmd_generate), ("train", cmd_train),
                     ("eval", cmd_eval), ("reproduce-fig1", cmd_reproduce_fig1)):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--quick", action="store_true",
                       help="small N and MC sample counts for a fast smoke run")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    started = _utc_now()
    t0 = time.perf_counter()
    try:
        cfg = parse_config(args.config, {"seed": args.seed, "out": args.out,
                                         "quick": args.quick})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {out}: {exc}", file=sys.stderr)
        return 1

    failed_marker = out / "FAILED"
    try:
        with _Lock(out):
            if failed_marker.exists():
                failed_marker.unlink()
            args.func(cfg, out)
            _write_meta(out, args, started, time.perf_counter() - t0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any stage failure flags the dir
        try:
            failed_marker.write_text(f"{type(exc).__name__}: {exc}\n")
        except OSError:
            pass
        print(f"stage failed: {exc}", file=sys.stderr)
        return 2
    return 0


def _write_meta(out: Path, args, started: str, elapsed: float) -> None:
    # The only file allowed to carry timestamps.
    meta = {
        "command": args.command,
        "started": started,
        "finished": _utc_now(),
        "elapsed_seconds": round(elapsed, 3),
        "backend": BACKEND,
        "version": __version__,
        "threads": _threads(),
    }
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
