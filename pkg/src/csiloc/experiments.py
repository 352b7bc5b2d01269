"""Config-driven experiment runner: sweep one variable, emit CSV artifacts.

For each sweep value the runner synthesizes (or loads from cache) a dataset,
trains a classifier, evaluates, and appends one row to results.csv. Sweep
axes that only change evaluation (n_targets) train a single network per run
and reuse it across points.

Determinism contract: every byte of results.csv, the per-point CSVs, and the
checkpoints is a pure function of (config, seed). Wall-clock training time is
inherently unrepeatable, so the results.csv train_seconds column is written
as nan and the measured values go to the timings.csv sidecar instead.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from .config import EVAL_ONLY_VARIABLES, ExperimentConfig, build_config
from .mltf import Dataset, load_dataset, save_dataset
from .nn import Network, make_classifier, save_checkpoint
from .pipeline import (EpochRecord, EvalResult, MissingGridTemplates,
                       TrainResult, evaluate, evaluate_baseline,
                       synthesize_dataset, synthesize_eval_images, train)

log = logging.getLogger(__name__)

RESULTS_COLUMNS = ("sweep_value", "f1_micro", "hamming_loss", "mde_thresholded",
                   "mde_known_k", "baseline_mde", "train_seconds")


@dataclass
class PointResult:
    sweep_value: object
    eval_result: EvalResult
    baseline_mde: float
    train_seconds: float
    log: list[EpochRecord]
    point_dir: Path


def config_hash(cfg: ExperimentConfig) -> str:
    payload = "\n".join(f"{k}={v}" for k, v in sorted(cfg.normalized.items()))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def dataset_cache_key(cfg: ExperimentConfig) -> str:
    keys = sorted(k for k in cfg.normalized
                  if k.startswith(("scenario.", "channel.", "dataset.")))
    payload = "\n".join(f"{k}={cfg.normalized[k]}" for k in keys)
    payload += f"\nseed={cfg.seed}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def get_dataset(cfg: ExperimentConfig, cache_dir: str | Path | None) -> Dataset:
    """Load the dataset for this config from cache, synthesizing on a miss."""
    if cache_dir is None:
        return synthesize_dataset(cfg.dataset_spec())
    path = Path(cache_dir) / dataset_cache_key(cfg)
    if (path / "manifest.txt").exists():
        log.info("dataset cache hit: %s", path)
        return load_dataset(path)
    ds = synthesize_dataset(cfg.dataset_spec())
    save_dataset(ds, path)
    log.info("dataset cached: %s", path)
    return ds


def point_config(cfg: ExperimentConfig, value) -> ExperimentConfig:
    """Rebuild the config with one sweep value applied and the sweep cleared."""
    entries = dict(cfg.normalized)
    entries["sweep.variable"] = ""
    entries["sweep.values"] = ""
    if value is not None:
        variable = cfg.sweep_variable
        if variable == "learning_rate":
            entries["training.learning_rate"] = repr(float(value))
        elif variable == "optimizer":
            entries["training.optimizer"] = str(value)
        elif variable == "n_links":
            entries["scenario.n_links"] = str(int(value))
        elif variable == "cell_width":
            entries["scenario.cell_width"] = repr(float(value))
        elif variable == "n_targets":
            entries["eval.n_targets"] = str(int(value))
        else:
            raise ValueError(f"unknown sweep variable {variable!r}")
    return build_config(entries, desk_scale=False, seed=cfg.seed)


def build_point_network(cfg: ExperimentConfig) -> Network:
    return make_classifier(
        input_shape=(cfg.window, cfg.channel.d, cfg.scenario.n_links),
        n_labels=cfg.scenario.n_grids,
        n_conv_layers=cfg.network.conv_layers,
        n_kernels=cfg.network.kernels,
        kernel_size=cfg.network.kernel_size,
        hidden_units=cfg.network.hidden_units,
        dropout_rate=cfg.network.dropout_rate,
        seed=cfg.seed,
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: tuple[str, ...], rows: list[tuple],
              preamble: list[str] | None = None) -> None:
    lines = list(preamble or [])
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_train_log(path: Path, records: list[EpochRecord]) -> None:
    write_csv(path, ("epoch", "train_loss", "val_loss", "val_f1_micro"),
              [(r.epoch, r.train_loss, r.val_loss, r.val_f1_micro) for r in records])


def write_cdf(path: Path, errors: list[float]) -> None:
    ordered = sorted(errors)
    n = len(ordered)
    rows = [(e, (i + 1) / n) for i, e in enumerate(ordered)]
    write_csv(path, ("distance_error", "cumulative_fraction"), rows)


def _run_training(pcfg: ExperimentConfig, cache_dir) -> tuple[Dataset, TrainResult, float]:
    ds = get_dataset(pcfg, cache_dir)
    net = build_point_network(pcfg)
    started = time.perf_counter()
    result = train(ds, net, pcfg.training)
    elapsed = time.perf_counter() - started
    log.info("trained %d epochs (best %d, val loss %.4g) in %.1fs",
             len(result.log), result.best_epoch, result.best_val_loss, elapsed)
    return ds, result, elapsed


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path,
                   cache_dir: str | Path | None = None) -> list[PointResult]:
    """Execute the sweep and write all artifacts under out_dir.

    Returns the per-point results in sweep order. With no sweep variable a
    single point labeled "default" runs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cache_dir) if cache_dir is not None else out / "datasets"
    values: list = list(cfg.sweep_values) if cfg.sweep_variable else [None]
    eval_only = cfg.sweep_variable in EVAL_ONLY_VARIABLES

    results: list[PointResult] = []
    shared: tuple[Dataset, TrainResult, float] | None = None
    for index, value in enumerate(values):
        pcfg = point_config(cfg, value)
        label = "default" if value is None else _fmt(value)
        point_dir = out / f"point_{index}_{label}"
        point_dir.mkdir(parents=True, exist_ok=True)
        log.info("sweep point %d/%d: %s=%s", index + 1, len(values),
                 cfg.sweep_variable or "run", label)

        if eval_only and shared is not None:
            ds, train_result, train_seconds = shared
        else:
            ds, train_result, train_seconds = _run_training(pcfg, cache)
            if eval_only:
                shared = (ds, train_result, train_seconds)

        if eval_only:
            channel = dataclasses.replace(pcfg.channel, seed=pcfg.seed)
            images = synthesize_eval_images(pcfg.scenario, channel,
                                            pcfg.eval_n_targets, pcfg.eval_n_images,
                                            pcfg.window, pcfg.seed)
        else:
            images = ds.test
        ev = evaluate(train_result.net, images, train_result.norm_stats,
                      pcfg.training.threshold, pcfg.scenario)
        try:
            baseline_mde, _ = evaluate_baseline(ds.train, images, pcfg.scenario)
        except MissingGridTemplates:
            baseline_mde = float("nan")

        save_checkpoint(train_result.net, point_dir / "checkpoint.ckpt",
                        train_result.optimizer)
        write_train_log(point_dir / "train_log.csv", train_result.log)
        write_cdf(point_dir / "cdf.csv", ev.errors_thresholded)
        results.append(PointResult(sweep_value=value, eval_result=ev,
                                   baseline_mde=baseline_mde,
                                   train_seconds=train_seconds,
                                   log=train_result.log, point_dir=point_dir))

    digest = config_hash(cfg)
    preamble = [f"# config_hash={digest}", f"# seed={cfg.seed}"]
    rows = []
    for value, point in zip(values, results):
        label = "default" if value is None else _fmt(value)
        ev = point.eval_result
        rows.append((label, ev.f1_micro, ev.hamming_loss, ev.mde_thresholded,
                     ev.mde_known_k, point.baseline_mde, float("nan")))
    write_csv(out / "results.csv", RESULTS_COLUMNS, rows, preamble)
    write_csv(out / "timings.csv", ("sweep_value", "train_seconds"),
              [("default" if v is None else _fmt(v), p.train_seconds)
               for v, p in zip(values, results)], preamble)

    config_lines = [f"# config_hash={digest}", f"seed={cfg.seed}"]
    config_lines.extend(f"{k}={v}" for k, v in sorted(cfg.normalized.items()))
    (out / "config.txt").write_text("\n".join(config_lines) + "\n", encoding="utf-8")
    return results
