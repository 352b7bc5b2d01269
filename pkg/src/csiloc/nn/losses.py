"""Sigmoid activation and binary cross-entropy for multi-label targets.

The loss averages over every (sample, label) entry, matching a gradient at
the logits of (prediction - truth) / (batch * n_labels). Two evaluation
routes are kept: one from probabilities and one straight from logits via
softplus, which stays finite for any input.
"""

from __future__ import annotations

import numpy as np

# |logit| beyond this saturates sigmoid to ~1e-13 from the rail; capping here
# keeps exp() in range and log(p) finite in float64
LOGIT_CLAMP = 30.0


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Elementwise logistic function with clamped input."""
    z = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
    return 1.0 / (1.0 + np.exp(-z))


def bce_loss(probs: np.ndarray, truth: np.ndarray) -> float:
    """Mean binary cross-entropy from probabilities.

    Probabilities are clipped to the sigmoid saturation band before the log,
    so entries at exactly 0 or 1 cannot produce infinities.
    """
    if probs.shape != truth.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {truth.shape}")
    p = np.clip(probs.astype(np.float64), sigmoid(np.float64(-LOGIT_CLAMP)),
                sigmoid(np.float64(LOGIT_CLAMP)))
    t = truth.astype(np.float64)
    terms = t * np.log(p) + (1.0 - t) * np.log(1.0 - p)
    return float(-terms.mean())


def bce_loss_logits(logits: np.ndarray, truth: np.ndarray) -> float:
    """Mean binary cross-entropy straight from logits.

    Uses softplus(z) - z*t with softplus(z) = log(1 + exp(z)) evaluated via
    logaddexp, which is stable for large |z|.
    """
    if logits.shape != truth.shape:
        raise ValueError(f"shape mismatch: {logits.shape} vs {truth.shape}")
    z = logits.astype(np.float64)
    t = truth.astype(np.float64)
    terms = np.logaddexp(0.0, z) - z * t
    return float(terms.mean())
