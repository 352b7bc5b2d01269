"""Multi-label evaluation: micro-averaged F1, Hamming loss, distance error.

All scores take binary prediction and truth matrices of shape
(n_samples, n_labels). Distance error works on decoded grid index sets and
charges unmatched detections the area diagonal, so false positives and
misses cost the worst-case in-area distance rather than being ignored.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Scenario, grid_center


def _as_binary(arr: np.ndarray, name: str) -> np.ndarray:
    out = np.asarray(arr)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D (samples, labels), got {out.shape}")
    if not np.isin(out, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return out.astype(np.int64)


def confusion_counts(pred: np.ndarray, truth: np.ndarray) -> tuple[int, int, int, int]:
    """Pooled (tp, fp, fn, tn) over every (sample, label) cell."""
    p = _as_binary(pred, "pred")
    t = _as_binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    tp = int(((p == 1) & (t == 1)).sum())
    fp = int(((p == 1) & (t == 0)).sum())
    fn = int(((p == 0) & (t == 1)).sum())
    tn = int(((p == 0) & (t == 0)).sum())
    return tp, fp, fn, tn


def micro_precision_recall_f1(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """Micro-averaged precision, recall, F1 from pooled counts.

    Empty ratios follow the 0/0 -> 1 convention: with no predicted positives
    precision is perfect, with no true positives recall is perfect.
    """
    tp, fp, fn, _ = confusion_counts(pred, truth)
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
    f1 = 1.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
    return precision, recall, f1


def micro_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    return micro_precision_recall_f1(pred, truth)[2]


def hamming_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of (sample, label) cells where prediction and truth disagree."""
    tp, fp, fn, tn = confusion_counts(pred, truth)
    total = tp + fp + fn + tn
    return (fp + fn) / total


def exact_match_ratio(pred: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of samples whose full label vector is predicted exactly."""
    p = _as_binary(pred, "pred")
    t = _as_binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.shape[0] == 0:
        return 1.0
    return float((p == t).all(axis=1).mean())


def set_distance_error(pred_grids: set[int], true_grids: set[int],
                       scenario: Scenario) -> float:
    """Mean matched distance between two grid index sets.

    Pairs are chosen by a minimum-cost assignment over center-to-center
    distances; any unmatched grid on either side (cardinality mismatch)
    costs the area diagonal. The total is divided by max(|pred|, |truth|).
    Both sets empty scores 0 by convention.
    """
    n_p, n_t = len(pred_grids), len(true_grids)
    if n_p == 0 and n_t == 0:
        return 0.0
    size = max(n_p, n_t)
    pad = scenario.diagonal
    cost = np.full((size, size), pad, dtype=np.float64)
    p_list = sorted(pred_grids)
    t_list = sorted(true_grids)
    for i, g_p in enumerate(p_list):
        cx_p, cy_p = grid_center(scenario, g_p)
        for j, g_t in enumerate(t_list):
            cx_t, cy_t = grid_center(scenario, g_t)
            cost[i, j] = np.hypot(cx_p - cx_t, cy_p - cy_t)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / size)


def mean_distance_error(pred: np.ndarray, truth: np.ndarray,
                        scenario: Scenario) -> float:
    """Mean over samples of the per-sample set distance error."""
    p = _as_binary(pred, "pred")
    t = _as_binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.shape[1] != scenario.n_grids:
        raise ValueError(f"{p.shape[1]} labels vs {scenario.n_grids} grids")
    if p.shape[0] == 0:
        return 0.0
    errors = []
    for row_p, row_t in zip(p, t):
        pred_set = set(np.flatnonzero(row_p).tolist())
        true_set = set(np.flatnonzero(row_t).tolist())
        errors.append(set_distance_error(pred_set, true_set, scenario))
    return float(np.mean(errors))
