"""Sequential network container and the standard multi-label classifier stack.

The container runs plain layer-by-layer forward/backward. For the training
loss it uses the algebraic shortcut for sigmoid + binary cross-entropy: the
gradient at the logits is (probs - truth) / (batch * n_labels), so the
sigmoid layer itself is never differentiated on the loss path.
"""

from __future__ import annotations

import numpy as np

from .layers import (Conv2D, Dense, Dropout, Flatten, Layer, ReLU,
                     ShapeMismatch, Sigmoid, StaleForwardState)
from .losses import bce_loss_logits, sigmoid


class Network:
    """Ordered stack of layers ending in an elementwise sigmoid."""

    def __init__(self, layers: list[Layer], seed: int = 0, dtype=np.float32):
        if not layers or not isinstance(layers[-1], Sigmoid):
            raise ShapeMismatch("network must end with a sigmoid layer")
        self.layers = layers
        self.seed = seed
        self.dtype = dtype
        self._logits = None

    def forward(self, x: np.ndarray, train: bool = False, mask_seed: int = 0) -> np.ndarray:
        """Run the stack; returns per-label probabilities in [0, 1].

        Dropout masks are keyed by (mask_seed, layer position), so a repeated
        call with the same seed is bit-reproducible.
        """
        h = np.ascontiguousarray(x, dtype=self.dtype)
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dropout):
                h = layer.forward(h, train=train, mask_key=(self.seed, mask_seed, i))
            elif isinstance(layer, Sigmoid):
                self._logits = h
                h = layer.forward(h)
            else:
                h = layer.forward(h)
        return h

    def loss(self, x: np.ndarray, truth: np.ndarray, train: bool = False,
             mask_seed: int = 0) -> tuple[float, np.ndarray]:
        probs = self.forward(x, train=train, mask_seed=mask_seed)
        if probs.shape != truth.shape:
            raise ShapeMismatch(f"labels {truth.shape} vs outputs {probs.shape}")
        return bce_loss_logits(self._logits, truth), probs

    def backward(self, truth: np.ndarray) -> np.ndarray:
        """Backprop the mean-BCE gradient; fills each layer's grads in place."""
        if self._logits is None:
            raise StaleForwardState("backward before forward")
        probs = sigmoid(self._logits)
        grad = ((probs - truth) / truth.size).astype(self.dtype)
        self._logits = None
        for layer in reversed(self.layers[:-1]):
            grad = layer.backward(grad)
        return grad

    def loss_and_grads(self, x: np.ndarray, truth: np.ndarray,
                       mask_seed: int = 0) -> tuple[float, np.ndarray]:
        value, probs = self.loss(x, truth, train=True, mask_seed=mask_seed)
        self.backward(truth)
        return value, probs

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grads(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def get_state(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params()]

    def set_state(self, state: list[np.ndarray]) -> None:
        live = self.params()
        if len(live) != len(state):
            raise ShapeMismatch(f"state has {len(state)} arrays, network has {len(live)}")
        for dst, src in zip(live, state):
            if dst.shape != src.shape:
                raise ShapeMismatch(f"state shape {src.shape} vs parameter {dst.shape}")
            np.copyto(dst, src)


def make_classifier(input_shape: tuple[int, int, int], n_labels: int,
                    n_conv_layers: int = 3, n_kernels: int = 16, kernel_size: int = 5,
                    hidden_units: int = 128, dropout_rate: float = 0.6,
                    seed: int = 0, dtype=np.float32) -> Network:
    """Build the conv stack: [conv+relu]*n, flatten, dense+relu, dropout, dense, sigmoid.

    Same-padded convolutions keep the spatial size, so the flattened width is
    height * width * n_kernels. Each parameterized layer draws its init from
    an independent stream keyed by (seed, layer index).
    """
    height, width, channels = input_shape
    layers: list[Layer] = []
    in_ch = channels
    idx = 0
    for _ in range(n_conv_layers):
        rng = np.random.default_rng(np.random.SeedSequence((seed, idx)))
        layers.append(Conv2D(in_ch, n_kernels, kernel_size, rng=rng, dtype=dtype))
        layers.append(ReLU())
        in_ch = n_kernels
        idx += 1
    layers.append(Flatten())
    flat = height * width * in_ch
    rng = np.random.default_rng(np.random.SeedSequence((seed, idx)))
    layers.append(Dense(flat, hidden_units, rng=rng, dtype=dtype))
    layers.append(ReLU())
    layers.append(Dropout(dropout_rate))
    idx += 1
    rng = np.random.default_rng(np.random.SeedSequence((seed, idx)))
    layers.append(Dense(hidden_units, n_labels, rng=rng, dtype=dtype))
    layers.append(Sigmoid())
    return Network(layers, seed=seed, dtype=dtype)
