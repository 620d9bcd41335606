"""Network layers: valid-padding convolution, 2x2 max pooling, flatten, dense.

Every layer implements ``forward(x, training=...)`` and ``backward(dout)``.
Training-mode forward caches whatever the backward pass needs; backward
raises if no cache is present. Parameterized layers keep their parameters
and gradient buffers in the ``params`` / ``grads`` dicts (same keys, same
shapes) so the optimizer can walk them uniformly.

Convolution is cross-correlation (no kernel flip). Two engines are
provided: ``im2col`` (patch matrix + BLAS matmul, the optimized path) and
``direct`` (kernel-offset accumulation, the unoptimized reference path).
Both compute the same function; tests pin them against a scalar oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .tensor import Tensor, im2col


def relu(t: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    return np.maximum(t, 0)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for overflow safety."""
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise ShapeError(f"softmax expects (batch, k>=1), got {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class Layer:
    """Common layer interface; stateless layers inherit the empty dicts."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        raise NotImplementedError

    def backward(self, dout: Tensor) -> Tensor:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise RuntimeError(
                f"{type(self).__name__}.backward called without a training-mode forward"
            )
        return self._cache


class Conv2D(Layer):
    """Valid-padding stride-1 cross-correlation with optional fused ReLU.

    kernel: (kh, kw, in_channels, out_channels), bias: (out_channels,).
    """

    def __init__(self, kernel: np.ndarray, bias: np.ndarray, activation: str | None = None,
                 engine: str = "im2col"):
        super().__init__()
        if kernel.ndim != 4:
            raise ShapeError(f"conv kernel must be rank 4, got {kernel.shape}")
        if bias.shape != (kernel.shape[3],):
            raise ShapeError(f"bias {bias.shape} does not match {kernel.shape[3]} filters")
        if activation not in (None, "relu"):
            raise ValueError(f"unsupported conv activation {activation!r}")
        self.params = {"kernel": kernel, "bias": bias}
        self.grads = {"kernel": np.zeros_like(kernel), "bias": np.zeros_like(bias)}
        self.activation = activation
        self.engine = engine

    def out_shape(self, in_shape):
        h, w, _ = in_shape
        kh, kw, _, co = self.params["kernel"].shape
        return (h - kh + 1, w - kw + 1, co)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        kernel = self.params["kernel"]
        bias = self.params["bias"]
        kh, kw, ci, co = kernel.shape
        b, h, w, c = x.shape
        if c != ci:
            raise ShapeError(f"input has {c} channels, kernel expects {ci}")
        if h < kh or w < kw:
            raise ShapeError(f"input {h}x{w} smaller than kernel {kh}x{kw}")
        ho, wo = h - kh + 1, w - kw + 1

        if self.engine == "im2col":
            cols = im2col(x, kh, kw)
            z = (cols @ kernel.reshape(kh * kw * ci, co) + bias).reshape(b, ho, wo, co)
            cache_x = cols
        elif self.engine == "direct":
            z = np.broadcast_to(bias, (b, ho, wo, co)).astype(x.dtype, copy=True)
            for u in range(kh):
                for v in range(kw):
                    z += x[:, u:u + ho, v:v + wo, :] @ kernel[u, v]
            cache_x = x
        else:
            raise ValueError(f"unknown conv engine {self.engine!r}")

        if self.activation == "relu":
            out = np.maximum(z, 0)
            mask = z > 0
        else:
            out = z
            mask = None
        if training:
            self._cache = (cache_x, x.shape, mask)
        return out

    def backward(self, dout: Tensor) -> Tensor:
        cache_x, x_shape, mask = self._take_cache()
        kernel = self.params["kernel"]
        kh, kw, ci, co = kernel.shape
        b, ho, wo, _ = dout.shape
        if mask is not None:
            dout = dout * mask

        dx = np.zeros(x_shape, dtype=dout.dtype)
        if self.engine == "im2col":
            dmat = dout.reshape(b * ho * wo, co)
            self.grads["kernel"][...] = (cache_x.T @ dmat).reshape(kernel.shape)
            for u in range(kh):
                for v in range(kw):
                    dx[:, u:u + ho, v:v + wo, :] += dout @ kernel[u, v].T
        else:
            x = cache_x
            for u in range(kh):
                for v in range(kw):
                    patch = x[:, u:u + ho, v:v + wo, :]
                    self.grads["kernel"][u, v] = np.tensordot(patch, dout, axes=([0, 1, 2], [0, 1, 2]))
                    dx[:, u:u + ho, v:v + wo, :] += dout @ kernel[u, v].T
        self.grads["bias"][...] = dout.sum(axis=(0, 1, 2))
        return dx


class MaxPool2x2(Layer):
    """Non-overlapping 2x2 max pooling; odd trailing rows/columns are dropped.

    Ties go to the first maximal element in row-major window order, which
    fixes the backward routing deterministically.
    """

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        b, h, w, c = x.shape
        if h < 2 or w < 2:
            raise ShapeError(f"cannot 2x2-pool a {h}x{w} input")
        ho, wo = h // 2, w // 2
        windows = (
            x[:, : 2 * ho, : 2 * wo, :]
            .reshape(b, ho, 2, wo, 2, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(b, ho, wo, c, 4)
        )
        arg = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
        if training:
            self._cache = (x.shape, arg)
        return out

    def backward(self, dout: Tensor) -> Tensor:
        x_shape, arg = self._take_cache()
        b, h, w, c = x_shape
        ho, wo = h // 2, w // 2
        dwin = np.zeros((b, ho, wo, c, 4), dtype=dout.dtype)
        np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        dx[:, : 2 * ho, : 2 * wo, :] = (
            dwin.reshape(b, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(b, 2 * ho, 2 * wo, c)
        )
        return dx


class Flatten(Layer):
    """Collapse everything after the batch axis, row-major."""

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        if training:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: Tensor) -> Tensor:
        return dout.reshape(self._take_cache())


class Dense(Layer):
    """Affine layer with optional fused ReLU or softmax activation."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray, activation: str | None = None):
        super().__init__()
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ShapeError(f"bad dense shapes: weights {weights.shape}, bias {bias.shape}")
        if activation not in (None, "relu", "softmax"):
            raise ValueError(f"unsupported dense activation {activation!r}")
        self.params = {"weights": weights, "bias": bias}
        self.grads = {"weights": np.zeros_like(weights), "bias": np.zeros_like(bias)}
        self.activation = activation

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        w = self.params["weights"]
        if x.ndim != 2 or x.shape[1] != w.shape[0]:
            raise ShapeError(f"dense input {x.shape} does not match weights {w.shape}")
        z = x @ w + self.params["bias"]
        if self.activation == "relu":
            out = np.maximum(z, 0)
            act_cache = z > 0
        elif self.activation == "softmax":
            out = softmax(z)
            act_cache = out
        else:
            out = z
            act_cache = None
        if training:
            self._cache = (x, act_cache)
        return out

    def _preact_grad(self, dout: Tensor, act_cache) -> Tensor:
        if self.activation == "relu":
            return dout * act_cache
        if self.activation == "softmax":
            p = act_cache
            return p * (dout - (dout * p).sum(axis=1, keepdims=True))
        return dout

    def backward(self, dout: Tensor) -> Tensor:
        x, act_cache = self._take_cache()
        dz = self._preact_grad(dout, act_cache)
        return self._backward_preact(x, dz)

    def backward_from_preact(self, dz: Tensor) -> Tensor:
        """Backward entry for gradients already taken w.r.t. the pre-activation."""
        x, _ = self._take_cache()
        return self._backward_preact(x, dz)

    def _backward_preact(self, x: Tensor, dz: Tensor) -> Tensor:
        self.grads["weights"][...] = x.T @ dz
        self.grads["bias"][...] = dz.sum(axis=0)
        return dz @ self.params["weights"].T
