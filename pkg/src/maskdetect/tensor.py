"""Dense tensor kernels the rest of the package builds on.

Tensors are plain numpy arrays in row-major, channels-last layout
(batch, height, width, channels). float64 is the reference precision;
float32 is an accepted fast path for inference only.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

FLOAT = np.float64
FAST_FLOAT = np.float32

Tensor = np.ndarray


def reshape(t: Tensor, new_shape) -> Tensor:
    """Reshape preserving row-major element order; element count must match."""
    new_shape = tuple(int(d) for d in new_shape)
    if any(d < 1 for d in new_shape):
        raise ShapeError(f"extents must be >= 1, got {new_shape}")
    if int(np.prod(new_shape)) != t.size:
        raise ShapeError(
            f"cannot reshape {t.size} elements into shape {new_shape} "
            f"({int(np.prod(new_shape))} elements)"
        )
    return t.reshape(new_shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Rank-2 matrix product (m,k) @ (k,p) -> (m,p) on the optimized BLAS path."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents differ: {a.shape} @ {b.shape}")
    return a @ b


def im2col(x: Tensor, kh: int, kw: int) -> Tensor:
    """Rearrange (b,H,W,C) into patch rows so valid convolution becomes a matmul.

    Output is (b*(H-kh+1)*(W-kw+1), kh*kw*C) with elements ordered
    (row offset, col offset, channel), matching a (kh,kw,C,out) kernel
    flattened in C order.
    """
    b, h, w, c = x.shape
    if h < kh or w < kw:
        raise ShapeError(f"input {h}x{w} smaller than {kh}x{kw} window")
    # windows: (b, H-kh+1, W-kw+1, C, kh, kw) -> reorder window dims before channel
    v = sliding_window_view(x, (kh, kw), axis=(1, 2))
    cols = v.transpose(0, 1, 2, 4, 5, 3)
    return np.ascontiguousarray(cols).reshape(b * (h - kh + 1) * (w - kw + 1), kh * kw * c)
