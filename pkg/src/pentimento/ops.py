"""Rank-4 tensor primitives: convolution, average pooling, ReLU.

Tensors are plain ``numpy`` arrays of shape ``(batch, channels, height,
width)`` stored in single precision. Every contraction accumulates in
double precision before the result is cast back to float32, which keeps
drift small enough for finite-difference verification. All functions are
pure and therefore safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ShapeError

PAD_ZERO = "zero"
PAD_REFLECT = "reflect"

# Upper bound on float64 elements held by one im2col chunk (~64 MB).
_CHUNK_ELEMS = 8_000_000


def as_tensor(data, dims=None) -> np.ndarray:
    """Coerce ``data`` to a float32 (n, c, h, w) array, reshaping if asked."""
    arr = np.asarray(data, dtype=np.float32)
    if dims is not None:
        arr = arr.reshape(dims)
    if arr.ndim != 4:
        raise ShapeError(f"expected a rank-4 tensor, got shape {arr.shape}")
    return arr


def work_dtype(arr: np.ndarray) -> np.dtype:
    """float32 unless the caller is already running in float64.

    Storage is single precision by default; float64 inputs flow through
    unchanged so gradient checks can run the same code at full precision.
    """
    return np.float64 if arr.dtype == np.float64 else np.float32


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class ConvParams:
    """Convolution kernel, bias and geometry.

    ``kernel`` has shape (c_out, c_in, k, k) with odd k so that stride-1
    output keeps the input's spatial size under (k-1)/2 padding.
    ``padding`` selects the border fill: "zero" or "reflect".
    """

    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: str = PAD_REFLECT

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float32)
        bias = np.asarray(self.bias, dtype=np.float32)
        if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
            raise ShapeError(f"kernel must be (c_out, c_in, k, k), got {kernel.shape}")
        if kernel.shape[2] % 2 == 0:
            raise ShapeError(f"kernel size must be odd, got k={kernel.shape[2]}")
        if bias.ndim != 1 or bias.shape[0] != kernel.shape[0]:
            raise ShapeError(
                f"bias shape {bias.shape} does not match c_out={kernel.shape[0]}"
            )
        if self.stride < 1:
            raise ShapeError(f"stride must be positive, got {self.stride}")
        if self.padding not in (PAD_ZERO, PAD_REFLECT):
            raise ShapeError(f"unknown padding mode {self.padding!r}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "bias", bias)

    @property
    def c_out(self) -> int:
        return self.kernel.shape[0]

    @property
    def c_in(self) -> int:
        return self.kernel.shape[1]

    @property
    def k(self) -> int:
        return self.kernel.shape[2]

    @property
    def pad(self) -> int:
        return (self.k - 1) // 2


def conv_output_dims(input_dims, params: ConvParams):
    """Output (n, c_out, h', w') for a given input shape."""
    n, c, h, w = input_dims
    if c != params.c_in:
        raise ShapeError(
            f"input shape {tuple(input_dims)} has {c} channels, kernel "
            f"{params.kernel.shape} expects {params.c_in}"
        )
    p, k, s = params.pad, params.k, params.stride
    if params.padding == PAD_ZERO and (h < k or w < k):
        raise ShapeError(f"input {h}x{w} smaller than kernel {k}x{k} with zero padding")
    if params.padding == PAD_REFLECT and (h < p + 1 or w < p + 1):
        raise ShapeError(f"input {h}x{w} too small to reflect-pad by {p}")
    ho = (h + 2 * p - k) // s + 1
    wo = (w + 2 * p - k) // s + 1
    return (n, params.c_out, ho, wo)


def _pad_input(x: np.ndarray, pad: int, mode: str) -> np.ndarray:
    if pad == 0:
        return x
    spec = ((0, 0), (0, 0), (pad, pad), (pad, pad))
    if mode == PAD_ZERO:
        return np.pad(x, spec, mode="constant")
    return np.pad(x, spec, mode="reflect")


def _row_chunks(ho: int, wo: int, ckk: int):
    rows = max(1, _CHUNK_ELEMS // max(1, wo * ckk))
    for r0 in range(0, ho, rows):
        yield r0, min(r0 + rows, ho)


def _corr2d(xp: np.ndarray, kernel: np.ndarray, stride: int, bias=None) -> np.ndarray:
    """Valid cross-correlation of a pre-padded input, float64 accumulation.

    Works in spatial-row chunks so the float64 im2col buffer stays small.
    The result keeps ``xp``'s float dtype.
    """
    n, _, hp, wp = xp.shape
    c_out, c_in, k, _ = kernel.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    ckk = c_in * k * k
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    w_mat = kernel.reshape(c_out, ckk).astype(np.float64).T
    bias64 = None if bias is None else np.asarray(bias, dtype=np.float64)

    out = np.empty((n, ho, wo, c_out), dtype=xp.dtype)
    for r0, r1 in _row_chunks(ho, wo, ckk):
        cols = np.ascontiguousarray(
            win[:, :, r0:r1].transpose(0, 2, 3, 1, 4, 5), dtype=np.float64
        ).reshape(n, (r1 - r0) * wo, ckk)
        acc = cols @ w_mat
        if bias64 is not None:
            acc += bias64
        out[:, r0:r1] = acc.reshape(n, r1 - r0, wo, c_out)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_forward(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """2-D convolution (cross-correlation) with bias.

    Returns a float32 tensor of shape ``conv_output_dims(x.shape, params)``;
    each output element is the windowed dot product plus the channel bias.
    """
    if x.ndim != 4:
        raise ShapeError(f"expected (n, c, h, w) input, got shape {x.shape}")
    _require_finite("conv2d input", x)
    conv_output_dims(x.shape, params)
    dtype = work_dtype(np.asarray(x))
    xp = _pad_input(np.asarray(x, dtype=dtype), params.pad, params.padding)
    return _corr2d(xp, params.kernel, params.stride, bias=params.bias)


def conv2d_backward_input(
    grad_out: np.ndarray, params: ConvParams, input_dims
) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the convolution input.

    ``grad_out`` is dL/d(output) for an input of shape ``input_dims``;
    the result is dL/d(input). Exact adjoint of :func:`conv2d_forward`
    (bias excluded), including the padding operator.
    """
    expected = conv_output_dims(input_dims, params)
    if tuple(grad_out.shape) != expected:
        raise ShapeError(
            f"grad_out shape {tuple(grad_out.shape)} does not match expected "
            f"output shape {expected} for input {tuple(input_dims)}"
        )
    n, c, h, w = input_dims
    _, c_out, ho, wo = expected
    k, s, p = params.k, params.stride, params.pad
    dtype = work_dtype(np.asarray(grad_out))
    hp, wp = h + 2 * p, w + 2 * p

    if s == 1:
        # Adjoint of a stride-1 valid correlation is a full correlation
        # with the kernel rotated 180 degrees and channels transposed,
        # which keeps everything in BLAS-friendly im2col matmuls.
        kt = np.ascontiguousarray(
            params.kernel[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        )
        gp = np.pad(
            np.asarray(grad_out, dtype=np.float64),
            ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)),
        )
        gpad = _corr2d(gp, kt, 1)
    else:
        gpad = np.zeros((n, params.c_in, hp, wp), dtype=np.float64)
        ckk = params.c_in * k * k
        w_mat = params.kernel.reshape(c_out, ckk).astype(np.float64)
        for r0, r1 in _row_chunks(ho, wo, ckk):
            g = (
                np.asarray(grad_out[:, :, r0:r1], dtype=np.float64)
                .transpose(0, 2, 3, 1)
                .reshape(n, (r1 - r0) * wo, c_out)
            )
            gcols = (g @ w_mat).reshape(n, r1 - r0, wo, params.c_in, k, k)
            gcols = gcols.transpose(0, 3, 1, 2, 4, 5)
            for ki in range(k):
                for kj in range(k):
                    gpad[
                        :,
                        :,
                        r0 * s + ki : (r1 - 1) * s + ki + 1 : s,
                        kj : (wo - 1) * s + kj + 1 : s,
                    ] += gcols[..., ki, kj]

    if p == 0:
        grad = gpad
    elif params.padding == PAD_ZERO:
        grad = gpad[:, :, p : p + h, p : p + w]
    else:
        # Fold reflected border gradients back onto their source pixels.
        idx = np.pad(np.arange(h * w).reshape(h, w), p, mode="reflect").ravel()
        grad = np.zeros((n, params.c_in, h * w), dtype=np.float64)
        np.add.at(grad, (slice(None), slice(None), idx), gpad.reshape(n, c, hp * wp))
        grad = grad.reshape(n, c, h, w)
    return grad.astype(dtype)


def avg_pool_forward(x: np.ndarray, window: int = 2, stride: int = 2) -> np.ndarray:
    """Non-overlapping average pooling; requires window == stride."""
    if x.ndim != 4:
        raise ShapeError(f"expected (n, c, h, w) input, got shape {x.shape}")
    if window != stride:
        raise ShapeError(f"only window == stride supported, got {window}/{stride}")
    n, c, h, w = x.shape
    if h % stride or w % stride:
        raise ShapeError(f"spatial dims {h}x{w} not divisible by stride {stride}")
    ho, wo = h // stride, w // stride
    blocks = x.reshape(n, c, ho, window, wo, window)
    return blocks.mean(axis=(3, 5), dtype=np.float64).astype(work_dtype(x))


def avg_pool_backward(
    grad_out: np.ndarray, input_dims, window: int = 2, stride: int = 2
) -> np.ndarray:
    """Distribute each output gradient uniformly over its pooling window."""
    n, c, h, w = input_dims
    if window != stride:
        raise ShapeError(f"only window == stride supported, got {window}/{stride}")
    if h % stride or w % stride:
        raise ShapeError(f"spatial dims {h}x{w} not divisible by stride {stride}")
    expected = (n, c, h // stride, w // stride)
    if tuple(grad_out.shape) != expected:
        raise ShapeError(
            f"grad_out shape {tuple(grad_out.shape)} does not match {expected}"
        )
    dtype = work_dtype(np.asarray(grad_out))
    g = np.asarray(grad_out, dtype=dtype) / dtype(window * window)
    return np.repeat(np.repeat(g, window, axis=2), window, axis=3)


def relu_forward(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    x = np.asarray(x)
    return np.maximum(x.astype(work_dtype(x)), 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gate the gradient by x > 0; the subgradient at exactly 0 is 0."""
    if grad_out.shape != x.shape:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match input {x.shape}"
        )
    grad_out = np.asarray(grad_out)
    dtype = work_dtype(grad_out)
    return (grad_out.astype(dtype) * (x > 0)).astype(dtype)
