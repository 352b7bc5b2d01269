"""Render sweep artifacts (results.csv, cdf.csv, train_log.csv) to PNG files.

Purely presentational: reads the delimited outputs back in and draws them,
so a report can be regenerated from any results directory without rerunning
the experiment. All figures are written next to the CSVs they come from.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

log = logging.getLogger(__name__)


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    header: list[str] = []
    rows: list[list[str]] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        if not header:
            header = cells
        else:
            rows.append(cells)
    return header, rows


def _column(header: list[str], rows: list[list[str]], name: str) -> list[str]:
    idx = header.index(name)
    return [row[idx] for row in rows]


def plot_results(results_csv: Path, out_png: Path) -> None:
    """Two panels: micro-F1 and the distance-error variants across the sweep."""
    header, rows = _read_csv(results_csv)
    if not rows:
        log.warning("no rows in %s, skipping plot", results_csv)
        return
    labels = _column(header, rows, "sweep_value")
    x = np.arange(len(labels))
    f1 = [float(v) for v in _column(header, rows, "f1_micro")]
    mde_thr = [float(v) for v in _column(header, rows, "mde_thresholded")]
    mde_known = [float(v) for v in _column(header, rows, "mde_known_k")]
    baseline = [float(v) for v in _column(header, rows, "baseline_mde")]

    fig, (ax_f1, ax_mde) = plt.subplots(1, 2, figsize=(10, 4))
    ax_f1.plot(x, f1, marker="o", color="tab:blue")
    ax_f1.set_ylabel("micro-F1")
    ax_f1.set_ylim(0.0, 1.05)
    ax_mde.plot(x, mde_thr, marker="o", label="thresholded")
    ax_mde.plot(x, mde_known, marker="s", label="known K")
    ax_mde.plot(x, baseline, marker="^", linestyle="--", label="template baseline")
    ax_mde.set_ylabel("mean distance error (m)")
    ax_mde.legend(fontsize=8)
    for ax in (ax_f1, ax_mde):
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, fontsize=8)
        ax.set_xlabel("sweep value")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_cdf(cdf_csv: Path, out_png: Path) -> None:
    header, rows = _read_csv(cdf_csv)
    if not rows:
        log.warning("no rows in %s, skipping plot", cdf_csv)
        return
    errors = [float(v) for v in _column(header, rows, "distance_error")]
    fraction = [float(v) for v in _column(header, rows, "cumulative_fraction")]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.step([0.0] + errors, [0.0] + fraction, where="post")
    ax.set_xlabel("distance error (m)")
    ax.set_ylabel("cumulative fraction")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_train_log(log_csv: Path, out_png: Path) -> None:
    header, rows = _read_csv(log_csv)
    if not rows:
        log.warning("no rows in %s, skipping plot", log_csv)
        return
    epochs = [int(v) for v in _column(header, rows, "epoch")]
    train_loss = [float(v) for v in _column(header, rows, "train_loss")]
    val_loss = [float(v) for v in _column(header, rows, "val_loss")]
    val_f1 = [float(v) for v in _column(header, rows, "val_f1_micro")]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, train_loss, label="train loss")
    ax.plot(epochs, val_loss, label="val loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    twin = ax.twinx()
    twin.plot(epochs, val_f1, color="tab:green", alpha=0.6, label="val micro-F1")
    twin.set_ylabel("val micro-F1")
    twin.set_ylim(0.0, 1.05)
    handles, names = ax.get_legend_handles_labels()
    h2, n2 = twin.get_legend_handles_labels()
    ax.legend(handles + h2, names + n2, fontsize=8, loc="center right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def render_report(results_dir: str | Path) -> list[Path]:
    """Draw every known artifact in a results directory; returns written PNGs."""
    root = Path(results_dir)
    written: list[Path] = []
    results_csv = root / "results.csv"
    if results_csv.exists():
        out = root / "results.png"
        plot_results(results_csv, out)
        written.append(out)
    for point_dir in sorted(root.glob("point_*")):
        cdf = point_dir / "cdf.csv"
        if cdf.exists():
            out = point_dir / "cdf.png"
            plot_cdf(cdf, out)
            written.append(out)
        tlog = point_dir / "train_log.csv"
        if tlog.exists():
            out = point_dir / "train_log.png"
            plot_train_log(tlog, out)
            written.append(out)
    return written
