"""Plain SGD and Adam, operating in place on lists of parameter arrays.

Adam keeps its first and second moments in float64 regardless of parameter
dtype; the computed update is cast back to the parameter dtype at the end of
each step. Both optimizers are stateless across processes only through the
checkpoint format, which serializes the moments and step counter.
"""

from __future__ import annotations

import numpy as np

from .layers import ShapeMismatch


class Sgd:
    kind = "sgd"

    def __init__(self, learning_rate: float = 0.01):
        self.learning_rate = learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ShapeMismatch(f"{len(params)} params vs {len(grads)} grads")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")
            p -= (self.learning_rate * g.astype(np.float64)).astype(p.dtype)

    def config(self) -> dict:
        return {"learning_rate": self.learning_rate}


class Adam:
    """Adam with bias correction: theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)."""

    kind = "adam"

    def __init__(self, learning_rate: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def _init_state(self, params: list[np.ndarray]) -> None:
        self.m = [np.zeros(p.shape, dtype=np.float64) for p in params]
        self.v = [np.zeros(p.shape, dtype=np.float64) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ShapeMismatch(f"{len(params)} params vs {len(grads)} grads")
        if self.m is None:
            self._init_state(params)
        if len(self.m) != len(params):
            raise ShapeMismatch(f"optimizer state holds {len(self.m)} arrays, "
                                f"got {len(params)} params")
        self.step_count += 1
        b1_corr = 1.0 - self.beta1 ** self.step_count
        b2_corr = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape or p.shape != m.shape:
                raise ShapeMismatch(f"param {p.shape} vs grad {g.shape} vs state {m.shape}")
            g64 = g.astype(np.float64)
            m *= self.beta1
            m += (1.0 - self.beta1) * g64
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g64)
            m_hat = m / b1_corr
            v_hat = v / b2_corr
            p -= (self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)).astype(p.dtype)

    def config(self) -> dict:
        return {"learning_rate": self.learning_rate, "beta1": self.beta1,
                "beta2": self.beta2, "epsilon": self.epsilon}


def make_optimizer(name: str, learning_rate: float):
    if name == "adam":
        return Adam(learning_rate=learning_rate)
    if name == "sgd":
        return Sgd(learning_rate=learning_rate)
    raise ValueError(f"unknown optimizer {name!r}, expected adam or sgd")
