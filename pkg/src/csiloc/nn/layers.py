"""Layer set for the from-scratch CNN: conv2d, relu, dropout, flatten, dense, sigmoid.

Convolutions are stride-1 with zero same-padding, so spatial size never
changes through the stack. Each layer stores whatever the backward pass needs
during forward and exposes its parameters and gradients as flat lists of
arrays the optimizers update in place.

Layout convention: activations are (batch, height, width, channels) for the
convolutional part and (batch, features) after flattening; conv kernels are
(k, k, in_channels, out_channels).
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible with the layer configuration."""


class StaleForwardState(RuntimeError):
    """backward() called without a preceding forward() on this layer."""


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Layer:
    kind = "base"

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def config(self) -> dict:
        return {}


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Zero-pad by k//2 and gather k x k patches into rows of (P*H*W, k*k*C)."""
    p = k // 2
    padded = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(1, 2))
    # (P, H, W, C, k, k) -> (P, H, W, k, k, C) flattened in kernel-row order
    cols = np.ascontiguousarray(windows.transpose(0, 1, 2, 4, 5, 3))
    return cols.reshape(-1, k * k * x.shape[3])


class Conv2D(Layer):
    """Same-padded stride-1 cross-correlation, computed as im2col + matmul."""

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if kernel_size % 2 != 1:
            raise ShapeMismatch("kernel size must be odd for same-padding")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dtype = dtype
        if rng is None:
            rng = np.random.default_rng(0)
        fan_in = kernel_size * kernel_size * in_channels
        self.kernels = he_normal(rng, (kernel_size, kernel_size, in_channels, out_channels),
                                 fan_in, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.grad_kernels = np.zeros_like(self.kernels)
        self.grad_bias = np.zeros_like(self.bias)
        self._cols = None
        self._in_shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ShapeMismatch(
                f"conv2d expects (P, H, W, {self.in_channels}), got {x.shape}")
        k = self.kernel_size
        self._in_shape = x.shape
        self._cols = _im2col(x, k)
        w_mat = self.kernels.reshape(k * k * self.in_channels, self.out_channels)
        out = self._cols @ w_mat + self.bias
        return out.reshape(x.shape[0], x.shape[1], x.shape[2], self.out_channels)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._cols is None:
            raise StaleForwardState("conv2d backward before forward")
        k = self.kernel_size
        p_, h, w, _ = self._in_shape
        dout_mat = dout.reshape(-1, self.out_channels)
        self.grad_kernels = (self._cols.T @ dout_mat).reshape(self.kernels.shape)
        self.grad_bias = dout_mat.sum(axis=0)
        # dx is the same-padded correlation of dout with the 180-degree-rotated
        # kernels, channels swapped
        rot = self.kernels[::-1, ::-1].transpose(0, 1, 3, 2)
        rot_mat = np.ascontiguousarray(rot).reshape(k * k * self.out_channels, self.in_channels)
        dcols = _im2col(dout, k)
        dx = (dcols @ rot_mat).reshape(self._in_shape)
        self._cols = None
        return dx

    def params(self):
        return [self.kernels, self.bias]

    def grads(self):
        return [self.grad_kernels, self.grad_bias]

    def config(self):
        return {"in": self.in_channels, "out": self.out_channels, "k": self.kernel_size}


class ReLU(Layer):
    kind = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise StaleForwardState("relu backward before forward")
        return dout * self._mask


class Dropout(Layer):
    """Inverted dropout: survivors scaled by 1/(1-p), inference is identity.

    The mask is a pure function of the seed key passed at forward time, so a
    repeated forward with the same key reproduces the mask exactly.
    """

    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._scale = None

    def forward(self, x: np.ndarray, train: bool = False,
                mask_key: tuple[int, ...] = (0,)) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._scale = None
            return x
        rng = np.random.default_rng(np.random.SeedSequence(mask_key))
        keep = rng.random(x.shape) >= self.rate
        self._scale = keep.astype(x.dtype) / np.asarray(1.0 - self.rate, dtype=x.dtype)
        return x * self._scale

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._scale is None:
            return dout
        return dout * self._scale

    def config(self):
        return {"rate": self.rate}


class Flatten(Layer):
    kind = "flatten"

    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._shape is None:
            raise StaleForwardState("flatten backward before forward")
        return dout.reshape(self._shape)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.dtype = dtype
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights = he_normal(rng, (in_features, out_features), in_features, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"dense expects (P, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.weights + self.bias

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise StaleForwardState("dense backward before forward")
        self.grad_weights = self._x.T @ dout
        self.grad_bias = dout.sum(axis=0)
        dx = dout @ self.weights.T
        self._x = None
        return dx

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.grad_weights, self.grad_bias]

    def config(self):
        return {"in": self.in_features, "out": self.out_features}


class Sigmoid(Layer):
    """Elementwise logistic output; logits are clamped so exp never overflows."""

    kind = "sigmoid"

    def __init__(self):
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        from .losses import sigmoid

        self._out = sigmoid(x)
        return self._out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._out is None:
            raise StaleForwardState("sigmoid backward before forward")
        return dout * self._out * (1.0 - self._out)
