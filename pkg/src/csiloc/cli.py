"""Command-line entry point.

Verbs: synth (dataset only), train, eval, sweep, gradcheck, baseline, report.
All verbs accept --config/--seed/--out; runs are desk-scale by default, with
the full-scale reference values behind --full-scale. The report verb renders
figures from a finished sweep directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigInvalid, ExperimentConfig, validate_config
from .experiments import (build_point_network, run_experiment, write_cdf,
                          write_csv, write_train_log)
from .mltf import load_dataset, save_dataset
from .nn import gradient_check, load_checkpoint, make_classifier, save_checkpoint
from .pipeline import evaluate, evaluate_baseline, synthesize_dataset, train

log = logging.getLogger("csiloc")


def _load_config(args) -> ExperimentConfig:
    return validate_config(args.config, desk_scale=not args.full_scale,
                           seed=args.seed)


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out or "dataset")
    ds = synthesize_dataset(cfg.dataset_spec())
    save_dataset(ds, out)
    log.info("dataset written to %s (%d/%d/%d train/val/test images)",
             out, len(ds.train), len(ds.val), len(ds.test))
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    ds = load_dataset(args.data)
    net = make_classifier(
        input_shape=(ds.window, ds.d, ds.n_links),
        n_labels=ds.n_grids,
        n_conv_layers=cfg.network.conv_layers,
        n_kernels=cfg.network.kernels,
        kernel_size=cfg.network.kernel_size,
        hidden_units=cfg.network.hidden_units,
        dropout_rate=cfg.network.dropout_rate,
        seed=cfg.seed,
    )
    result = train(ds, net, cfg.training)
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.net, out / "checkpoint.ckpt", result.optimizer)
    write_train_log(out / "train_log.csv", result.log)
    log.info("trained %d epochs, best validation loss %.4g at epoch %d",
             len(result.log), result.best_val_loss, result.best_epoch)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    ds = load_dataset(args.data)
    net, _ = load_checkpoint(args.checkpoint)
    from .mltf import compute_norm_stats

    stats = compute_norm_stats(ds.train)
    ev = evaluate(net, ds.test, stats, cfg.training.threshold, cfg.scenario)
    print(f"images           {ev.n_images}")
    print(f"precision_micro  {ev.precision_micro:.4f}")
    print(f"recall_micro     {ev.recall_micro:.4f}")
    print(f"f1_micro         {ev.f1_micro:.4f}")
    print(f"hamming_loss     {ev.hamming_loss:.4f}")
    print(f"exact_match      {ev.exact_match:.4f}")
    print(f"mde_thresholded  {ev.mde_thresholded:.4f} m")
    print(f"mde_known_k      {ev.mde_known_k:.4f} m")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "eval.csv",
                  ("f1_micro", "hamming_loss", "exact_match",
                   "mde_thresholded", "mde_known_k"),
                  [(ev.f1_micro, ev.hamming_loss, ev.exact_match,
                    ev.mde_thresholded, ev.mde_known_k)])
        write_cdf(out / "cdf.csv", ev.errors_thresholded)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out or "results")
    run_experiment(cfg, out)
    log.info("sweep artifacts in %s", out)
    return 0


def cmd_gradcheck(args) -> int:
    # fixed tiny topology: cheap enough to sweep every parameter in 64-bit
    seed = args.seed if args.seed is not None else 0
    net = make_classifier(input_shape=(8, 8, 2), n_labels=3, n_conv_layers=1,
                          n_kernels=2, kernel_size=3, hidden_units=4,
                          dropout_rate=0.5, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 99)))
    x = rng.standard_normal((2, 8, 8, 2))
    y = (rng.random((2, 3)) < 0.5).astype(np.float64)
    report = gradient_check(net, x, y, step=1e-5, tol=1e-4)
    print(report.summary())
    return 0 if report.passed else 1


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    ds = load_dataset(args.data)
    mde, errors = evaluate_baseline(ds.train, ds.test, cfg.scenario)
    print(f"template baseline known-K distance error: {mde:.4f} m "
          f"over {len(errors)} images")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_cdf(out / "baseline_cdf.csv", errors)
    return 0


def cmd_report(args) -> int:
    from .plots import render_report

    written = render_report(args.results)
    if not written:
        log.warning("no renderable artifacts found in %s", args.results)
        return 1
    for path in written:
        log.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--seed", type=int, default=None, help="global seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--full-scale", action="store_true",
                        help="use the full-scale reference defaults "
                             "(20 grids, 9 links, 900 epochs; hours of compute)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="csiloc",
        description="Synthetic CSI fingerprinting lab: data synthesis, CNN "
                    "training, multi-label localization, experiment sweeps.")
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("synth", parents=[common],
                   help="synthesize a dataset and write it to --out")
    p_train = sub.add_parser("train", parents=[common],
                             help="train a classifier on a dataset directory")
    p_train.add_argument("--data", required=True, help="dataset directory")
    p_eval = sub.add_parser("eval", parents=[common],
                            help="evaluate a checkpoint on a dataset's test split")
    p_eval.add_argument("--data", required=True, help="dataset directory")
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint file")
    sub.add_parser("sweep", parents=[common],
                   help="run the configured sweep and write CSV artifacts")
    sub.add_parser("gradcheck", parents=[common],
                   help="finite-difference check of backpropagation")
    p_base = sub.add_parser("baseline", parents=[common],
                            help="nearest-fingerprint baseline on a dataset")
    p_base.add_argument("--data", required=True, help="dataset directory")
    p_report = sub.add_parser("report", parents=[common],
                              help="render PNG figures from sweep CSV artifacts")
    p_report.add_argument("--results", required=True, help="sweep output directory")
    return parser


_HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
    "baseline": cmd_baseline,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return _HANDLERS[args.verb](args)
    except ConfigInvalid as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
