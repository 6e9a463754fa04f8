"""Layer primitives: convolution, max-pooling, cross-channel response
normalization, fully-connected maps, and the two activations.

Every forward returns ``(output, ctx)`` where ``ctx`` carries exactly what the
matching backward needs.  Inputs may be single samples (``C,H,W`` / ``D,``) or
batches with one leading axis; outputs follow suit.

Determinism contract: forward accumulation for conv and fc runs element by
element in ascending (channel, kernel-row, kernel-col) / ascending input-index
order, with the bias added last.  Output bits therefore do not depend on batch
size or on how the arithmetic is vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


@dataclass
class ConvCtx:
    x: np.ndarray          # batched view, (N, C, H, W)
    w: np.ndarray
    stride: int
    out_shape: tuple[int, ...]
    batched: bool


def _as_batched_images(x: np.ndarray, who: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], False
    if x.ndim == 4:
        return x, True
    raise ValueError(f"{who}: expected a (C,H,W) or (N,C,H,W) array, got ndim={x.ndim}")


def conv_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1
) -> tuple[np.ndarray, ConvCtx]:
    """Valid (no padding) cross-correlation with square kernels.

    ``w`` has shape (filters, in_channels, k, k); ``b`` has shape (filters,).
    Output extent per spatial axis is ``(in - k) // stride + 1``.
    """
    x4, batched = _as_batched_images(x, "conv_forward")
    w = np.asarray(w)
    b = np.asarray(b)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ValueError(f"conv_forward: weights must be (F,C,k,k), got {w.shape}")
    n, c_in, h, wd = x4.shape
    f, c_w, k, _ = w.shape
    if c_w != c_in:
        raise ValueError(
            f"conv_forward: channel axis mismatch, input has {c_in} channels "
            f"but weights expect {c_w}"
        )
    if b.shape != (f,):
        raise ValueError(f"conv_forward: bias must have shape ({f},), got {b.shape}")
    if stride < 1:
        raise ValueError(f"conv_forward: stride must be >= 1, got {stride}")
    if h < k:
        raise ValueError(f"conv_forward: height axis {h} admits no {k}x{k} kernel placement")
    if wd < k:
        raise ValueError(f"conv_forward: width axis {wd} admits no {k}x{k} kernel placement")

    ho = (h - k) // stride + 1
    wo = (wd - k) // stride + 1
    out = np.zeros((n, f, ho, wo), dtype=np.result_type(x4, w, b))
    for c in range(c_in):
        for i in range(k):
            for j in range(k):
                patch = x4[:, c, i : i + ho * stride : stride, j : j + wo * stride : stride]
                out += w[:, c, i, j][None, :, None, None] * patch[:, None, :, :]
    out += b[None, :, None, None]

    ctx = ConvCtx(x4, w, stride, out.shape, batched)
    return (out if batched else out[0]), ctx


def conv_backward(
    ctx: ConvCtx, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of ``conv_forward`` w.r.t. input, weights, and bias."""
    if ctx is None:
        raise ValueError("conv_backward: forward context is required")
    up4, _ = _as_batched_images(upstream, "conv_backward")
    if up4.shape != ctx.out_shape:
        raise ValueError(
            f"conv_backward: upstream shape {up4.shape} does not match "
            f"forward output {ctx.out_shape}"
        )
    x4, w, s = ctx.x, ctx.w, ctx.stride
    _, _, k, _ = w.shape
    _, _, ho, wo = ctx.out_shape

    db = up4.sum(axis=(0, 2, 3))
    dw = np.zeros_like(w)
    dx = np.zeros_like(x4)
    for i in range(k):
        for j in range(k):
            for c in range(x4.shape[1]):
                patch = x4[:, c, i : i + ho * s : s, j : j + wo * s : s]
                dw[:, c, i, j] = np.tensordot(up4, patch, axes=([0, 2, 3], [0, 1, 2]))
            contrib = np.tensordot(up4, w[:, :, i, j], axes=([1], [0]))  # (N,Ho,Wo,C)
            dx[:, :, i : i + ho * s : s, j : j + wo * s : s] += contrib.transpose(0, 3, 1, 2)

    if not ctx.batched:
        dx = dx[0]
    return dx, dw, db


# ---------------------------------------------------------------------------
# max-pooling
# ---------------------------------------------------------------------------


@dataclass
class PoolArgmax:
    """Flat per-sample source index (into C*H*W) for every pooled output."""

    indices: np.ndarray    # (N, C, Ho, Wo), int64
    input_shape: tuple[int, int, int, int]
    batched: bool
    kernel: int = 0
    stride: int = 0


def maxpool_forward(
    x: np.ndarray, kernel: int, stride: int
) -> tuple[np.ndarray, PoolArgmax]:
    """Window maxima with argmax bookkeeping; ties go to the lowest flat index."""
    x4, batched = _as_batched_images(x, "maxpool_forward")
    n, c, h, wd = x4.shape
    if kernel < 1 or stride < 1:
        raise ValueError("maxpool_forward: kernel and stride must be >= 1")
    if kernel > h or kernel > wd:
        raise ValueError(
            f"maxpool_forward: kernel {kernel} exceeds input extent ({h}x{wd})"
        )
    ho = (h - kernel) // stride + 1
    wo = (wd - kernel) // stride + 1

    # Window elements stacked in ascending (dy, dx) order; argmax then picks
    # the first maximum, which is exactly the lowest flat source index.
    parts = []
    for dy in range(kernel):
        for dx in range(kernel):
            parts.append(x4[:, :, dy : dy + ho * stride : stride, dx : dx + wo * stride : stride])
    stack = np.stack(parts, axis=-1)
    win_arg = stack.argmax(axis=-1)
    out = np.take_along_axis(stack, win_arg[..., None], axis=-1)[..., 0]

    dy = win_arg // kernel
    dx = win_arg % kernel
    oy = np.arange(ho)[None, None, :, None]
    ox = np.arange(wo)[None, None, None, :]
    ch = np.arange(c)[None, :, None, None]
    flat = ch * (h * wd) + (oy * stride + dy) * wd + (ox * stride + dx)

    argmax = PoolArgmax(flat.astype(np.int64), (n, c, h, wd), batched, kernel, stride)
    return (out if batched else out[0]), argmax


def maxpool_backward(argmax: PoolArgmax, upstream: np.ndarray) -> np.ndarray:
    """Route upstream gradient to the recorded argmax positions."""
    if argmax is None:
        raise ValueError("maxpool_backward: argmax record is required")
    up4, _ = _as_batched_images(upstream, "maxpool_backward")
    if up4.shape != argmax.indices.shape:
        raise ValueError(
            f"maxpool_backward: upstream shape {up4.shape} does not match "
            f"argmax shape {argmax.indices.shape}"
        )
    n, c, h, wd = argmax.input_shape
    flat_size = c * h * wd
    idx = argmax.indices.reshape(n, -1)
    if idx.size and (idx.min() < 0 or idx.max() >= flat_size):
        raise ValueError("maxpool_backward: argmax index out of range")

    dx = np.zeros((n, flat_size), dtype=up4.dtype)
    np.add.at(dx, (np.arange(n)[:, None], idx), up4.reshape(n, -1))
    dx = dx.reshape(n, c, h, wd)
    return dx if argmax.batched else dx[0]


# ---------------------------------------------------------------------------
# local response normalization (cross-channel)
# ---------------------------------------------------------------------------


@dataclass
class LrnCtx:
    x: np.ndarray
    base: np.ndarray       # k + alpha * windowed sum of squares
    n: int
    alpha: float
    beta: float
    batched: bool


def _channel_window_sum(v: np.ndarray, n: int) -> np.ndarray:
    """Sum ``v`` over the clipped channel window [c - n//2, c + n//2]."""
    c = v.shape[1]
    half = n // 2
    out = np.zeros_like(v)
    for d in range(-half, half + 1):
        lo = max(0, -d)
        hi = min(c, c - d)
        if lo < hi:
            out[:, lo:hi] += v[:, lo + d : hi + d]
    return out


def lrn_forward(
    x: np.ndarray, n: int, k: float, alpha: float, beta: float
) -> tuple[np.ndarray, LrnCtx]:
    """Cross-channel normalization: ``x_c / (k + alpha * sum sq)**beta``.

    The window around channel ``c`` spans ``n // 2`` channels to either side,
    clipped at the tensor edges.
    """
    x4, batched = _as_batched_images(x, "lrn_forward")
    if n < 1:
        raise ValueError(f"lrn_forward: window depth must be >= 1, got {n}")
    base = k + alpha * _channel_window_sum(x4 * x4, n)
    if np.any(base <= 0):
        raise ValueError("lrn_forward: non-positive normalization denominator")
    out = x4 / np.power(base, beta)
    ctx = LrnCtx(x4, base, n, alpha, beta, batched)
    return (out if batched else out[0]), ctx


def lrn_backward(ctx: LrnCtx, upstream: np.ndarray) -> np.ndarray:
    if ctx is None:
        raise ValueError("lrn_backward: forward context is required")
    up4, _ = _as_batched_images(upstream, "lrn_backward")
    if up4.shape != ctx.x.shape:
        raise ValueError(
            f"lrn_backward: upstream shape {up4.shape} does not match input {ctx.x.shape}"
        )
    inv_pow = np.power(ctx.base, -ctx.beta)
    t = up4 * ctx.x * inv_pow / ctx.base
    dx = up4 * inv_pow - 2.0 * ctx.alpha * ctx.beta * ctx.x * _channel_window_sum(t, ctx.n)
    return dx if ctx.batched else dx[0]


# ---------------------------------------------------------------------------
# fully connected
# ---------------------------------------------------------------------------


@dataclass
class FcCtx:
    x: np.ndarray
    w: np.ndarray
    batched: bool


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, FcCtx]:
    """Affine map ``out = w^T x + b`` with ``w`` of shape (in, out)."""
    x = np.asarray(x)
    w = np.asarray(w)
    b = np.asarray(b)
    if x.ndim not in (1, 2):
        raise ValueError(f"fc_forward: expected (D,) or (N,D) input, got ndim={x.ndim}")
    if w.ndim != 2:
        raise ValueError(f"fc_forward: weights must be 2-D (in,out), got {w.shape}")
    d_in, d_out = w.shape
    if x.shape[-1] != d_in:
        raise ValueError(
            f"fc_forward: input length {x.shape[-1]} does not match weight "
            f"inner extent {d_in}"
        )
    if b.shape != (d_out,):
        raise ValueError(f"fc_forward: bias must have shape ({d_out},), got {b.shape}")

    out = np.zeros(x.shape[:-1] + (d_out,), dtype=np.result_type(x, w, b))
    for i in range(d_in):
        out += x[..., i : i + 1] * w[i]
    out += b
    return out, FcCtx(x, w, x.ndim == 2)


def fc_backward(ctx: FcCtx, upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if ctx is None:
        raise ValueError("fc_backward: forward context is required")
    up = np.asarray(upstream)
    x2 = ctx.x if ctx.batched else ctx.x[None]
    up2 = up if ctx.batched else up[None]
    if up2.shape != (x2.shape[0], ctx.w.shape[1]):
        raise ValueError(
            f"fc_backward: upstream shape {up.shape} does not match output "
            f"({x2.shape[0]}, {ctx.w.shape[1]})"
        )
    dx = up2 @ ctx.w.T
    dw = x2.T @ up2
    db = up2.sum(axis=0)
    return (dx if ctx.batched else dx[0]), dw, db


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x), 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    up = np.asarray(upstream)
    if up.shape != x.shape:
        raise ValueError(f"relu_backward: shape mismatch {up.shape} vs {x.shape}")
    return up * (x > 0)


def sigmoid(z):
    """Numerically stable logistic function; never overflows for finite z."""
    z = np.asarray(z, dtype=np.float64)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z)
    out = np.empty_like(zf)
    pos = zf >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-zf[pos]))
    ez = np.exp(zf[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def sigmoid_backward(s: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient through the logistic map given its forward output ``s``."""
    return np.asarray(upstream) * s * (1.0 - s)
