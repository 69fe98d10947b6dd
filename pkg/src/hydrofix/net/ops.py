"""Array primitives for the segmenter: convolution, activations, resampling.

Activations are channels-last ``(batch, rows, cols, channels)``; kernels are
``(out_ch, in_ch, kh, kw)``. Convolutions use zero 'same' padding for odd
kernels. Everything is plain numpy with fixed iteration order, so results
are bitwise reproducible run to run.
"""

from __future__ import annotations

import numpy as np


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
           stride: int = 1) -> np.ndarray:
    n, h, w, c = x.shape
    out_ch, in_ch, kh, kw = kernel.shape
    if in_ch != c:
        raise ValueError(f"conv expects {in_ch} input channels, got {c}")
    pad = (kh - 1) // 2
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    xp = x
    if pad:
        xp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + w, :] = x
    kmat = np.ascontiguousarray(kernel.transpose(2, 3, 1, 0))  # (kh, kw, C, O)
    acc = np.zeros((n * ho * wo, out_ch), dtype=x.dtype)
    for di in range(kh):
        for dj in range(kw):
            v = xp[:, di:di + stride * (ho - 1) + 1:stride,
                   dj:dj + stride * (wo - 1) + 1:stride, :]
            acc += v.reshape(-1, c) @ kmat[di, dj]
    acc += bias
    return acc.reshape(n, ho, wo, out_ch)


def conv2d_backward(dy: np.ndarray, x: np.ndarray, kernel: np.ndarray,
                    stride: int = 1, need_dx: bool = True):
    """Gradients of conv2d: returns (dx, dkernel, dbias)."""
    n, h, w, c = x.shape
    out_ch, in_ch, kh, kw = kernel.shape
    pad = (kh - 1) // 2
    _, ho, wo, _ = dy.shape
    xp = x
    if pad:
        xp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + w, :] = x
    dy2 = dy.reshape(-1, out_ch)
    dbias = dy2.sum(axis=0)
    dkernel = np.empty_like(kernel)
    dxp = np.zeros_like(xp) if need_dx else None
    kmat = kernel.transpose(2, 3, 1, 0)  # (kh, kw, C, O)
    for di in range(kh):
        for dj in range(kw):
            sl = np.s_[:, di:di + stride * (ho - 1) + 1:stride,
                       dj:dj + stride * (wo - 1) + 1:stride, :]
            v = xp[sl].reshape(-1, c)
            dkernel[:, :, di, dj] = (v.T @ dy2).T
            if need_dx:
                dxp[sl] += (dy2 @ np.ascontiguousarray(kmat[di, dj]).T).reshape(n, ho, wo, c)
    dx = None
    if need_dx:
        dx = dxp[:, pad:pad + h, pad:pad + w, :] if pad else dxp
    return dx, dkernel, dbias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dy: np.ndarray, out: np.ndarray) -> np.ndarray:
    return dy * (out > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def upsample2(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x on rows and cols."""
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upsample2_backward(dy: np.ndarray) -> np.ndarray:
    n, h, w, c = dy.shape
    return dy.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))
