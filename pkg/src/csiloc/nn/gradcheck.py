"""Central-difference verification of the analytic gradients.

Every trainable scalar is perturbed by +/-step and the finite-difference
slope is compared against the backprop gradient. Dropout masks are keyed by
seed, so the loss surface is frozen during the sweep and the comparison is
exact up to float64 rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network

# entries where both gradients are below this band are compared absolutely;
# a relative test on near-zero slopes would only amplify rounding noise
_DENOM_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    max_rel_error: float
    tol: float
    n_checked: int
    worst_label: str
    passed: bool

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return (f"{state}: max rel error {self.max_rel_error:.3e} over "
                f"{self.n_checked} parameters (tol {self.tol:.1e}, worst {self.worst_label})")


def _param_labels(net: Network) -> list[str]:
    labels = []
    for i, layer in enumerate(net.layers):
        for j in range(len(layer.params())):
            labels.append(f"layer{i}.{layer.kind}.param{j}")
    return labels


def gradient_check(net: Network, x: np.ndarray, truth: np.ndarray,
                   step: float = 1e-5, tol: float = 1e-4,
                   mask_seed: int = 0) -> GradCheckResult:
    """Compare backprop gradients against central differences on every scalar.

    The network must be float64; float32 arithmetic cannot resolve the
    default tolerance. Returns the worst relative error found, where the
    denominator is max(|analytic|, |numeric|, 1e-6).
    """
    if net.dtype != np.float64:
        raise ValueError("gradient_check requires a float64 network")
    net.loss_and_grads(x, truth, mask_seed=mask_seed)
    analytic = [g.copy() for g in net.grads()]
    labels = _param_labels(net)

    worst = 0.0
    worst_label = "none"
    n_checked = 0
    for p_idx, param in enumerate(net.params()):
        flat = param.reshape(-1)
        grad_flat = analytic[p_idx].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up, _ = net.loss(x, truth, train=True, mask_seed=mask_seed)
            flat[i] = original - step
            down, _ = net.loss(x, truth, train=True, mask_seed=mask_seed)
            flat[i] = original
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(numeric), abs(grad_flat[i]), _DENOM_FLOOR)
            rel = abs(numeric - grad_flat[i]) / denom
            if rel > worst:
                worst = rel
                worst_label = f"{labels[p_idx]}[{i}]"
            n_checked += 1
    return GradCheckResult(max_rel_error=worst, tol=tol, n_checked=n_checked,
                           worst_label=worst_label, passed=worst <= tol)
