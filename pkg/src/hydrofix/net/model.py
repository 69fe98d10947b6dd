"""Encoder-decoder segmenter with explicit reverse-mode gradients.

Each input feature layer gets its own encoder: a stem conv, then ``depth``
levels of [residual block -> stride-2 conv doubling channels]. The merged
bottom features pass through a neck conv; the decoder runs ``depth`` levels
of [2x nearest upsample -> conv] and concatenates the residual-block outputs
of every encoder at the matching resolution. A final residual-style head
reduces to one channel; the sigmoid of that logit map is the per-cell
probability of belonging to a correction.

Parameters live in a flat name -> array map. The forward pass reads them by
name only, so map iteration order never affects the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..raster import Grid
from ..rng import Rng
from .ops import (conv2d, conv2d_backward, relu, relu_backward, sigmoid,
                  upsample2, upsample2_backward)
from .loss import focal_grad_logits


@dataclass(frozen=True)
class ModelSpec:
    depth: int = 3
    base_channels: int = 8
    in_features: int = 1

    def __post_init__(self):
        if self.depth < 1 or self.base_channels < 1 or self.in_features < 1:
            raise ValueError("depth, base_channels and in_features must be >= 1")

    def channels(self, level: int) -> int:
        return self.base_channels * (1 << level)

    def decoder_in_channels(self, level: int) -> int:
        """Channels entering the upsample conv of decoder level ``level``."""
        if level == self.depth - 1:
            return self.channels(self.depth)
        return (1 + self.in_features) * self.channels(level + 1)

    def head_in_channels(self) -> int:
        return (1 + self.in_features) * self.base_channels


def _uniform_kernel(rng: Rng, shape: tuple[int, ...], dtype) -> np.ndarray:
    fan_in = shape[1] * shape[2] * shape[3]
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform_array(shape, -bound, bound).astype(dtype)


def init_params(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> dict[str, np.ndarray]:
    """Kernels uniform in +-1/sqrt(fan_in); biases zero.

    The head's second conv and skip conv start at zero so the untrained
    network outputs exactly 0.5 everywhere; they pick up gradient from the
    first step onward, which avoids starting inside a dead rectifier region.
    """
    rng = Rng(seed)
    p: dict[str, np.ndarray] = {}

    def kernel(name, out_ch, in_ch, k=3, zero=False):
        shape = (out_ch, in_ch, k, k)
        p[f"{name}.k"] = np.zeros(shape, dtype) if zero else _uniform_kernel(rng, shape, dtype)
        p[f"{name}.b"] = np.zeros(out_ch, dtype)

    for e in range(spec.in_features):
        kernel(f"enc{e}.stem", spec.base_channels, 1)
        for l in range(spec.depth):
            ch = spec.channels(l)
            kernel(f"enc{e}.lvl{l}.c1", ch, ch)
            kernel(f"enc{e}.lvl{l}.c2", ch, ch)
            kernel(f"enc{e}.lvl{l}.down", spec.channels(l + 1), ch)
    kernel("neck", spec.channels(spec.depth),
           spec.in_features * spec.channels(spec.depth))
    for l in range(spec.depth - 1, -1, -1):
        kernel(f"dec.lvl{l}.up", spec.channels(l), spec.decoder_in_channels(l))
    kernel("head.c1", 1, spec.head_in_channels())
    kernel("head.c2", 1, 1, zero=True)
    kernel("head.skip", 1, spec.head_in_channels(), k=1, zero=True)
    return p


def _check_input(spec: ModelSpec, x: np.ndarray) -> None:
    n, h, w, c = x.shape
    if c != spec.in_features:
        raise ValueError(f"model expects {spec.in_features} feature layers, got {c}")
    div = 1 << spec.depth
    if h % div or w % div:
        raise ValueError(f"spatial dims {h}x{w} not divisible by 2^{spec.depth}")


def forward_batch(params: dict[str, np.ndarray], spec: ModelSpec,
                  x: np.ndarray, with_cache: bool = False):
    """Logit map for a batch. Returns (logits, cache); probabilities are
    ``sigmoid(logits)``."""
    _check_input(spec, x)
    x = x.astype(params["neck.k"].dtype, copy=False)
    cache: dict = {"x": x, "enc": [], "dec": []}

    laterals = []
    bottoms = []
    for e in range(spec.in_features):
        ecache = {"lvl": []}
        xe = np.ascontiguousarray(x[..., e:e + 1])
        t = relu(conv2d(xe, params[f"enc{e}.stem.k"], params[f"enc{e}.stem.b"]))
        ecache["stem"] = (xe, t)
        lats = []
        for l in range(spec.depth):
            pre = f"enc{e}.lvl{l}"
            a = relu(conv2d(t, params[f"{pre}.c1.k"], params[f"{pre}.c1.b"]))
            b = conv2d(a, params[f"{pre}.c2.k"], params[f"{pre}.c2.b"])
            lat = relu(t + b)
            down = relu(conv2d(lat, params[f"{pre}.down.k"], params[f"{pre}.down.b"],
                               stride=2))
            ecache["lvl"].append((t, a, lat, down))
            lats.append(lat)
            t = down
        laterals.append(lats)
        bottoms.append(t)
        cache["enc"].append(ecache)

    merged = np.concatenate(bottoms, axis=-1) if spec.in_features > 1 else bottoms[0]
    s = relu(conv2d(merged, params["neck.k"], params["neck.b"]))
    cache["neck"] = (merged, s)

    for l in range(spec.depth - 1, -1, -1):
        sup = upsample2(s)
        u = relu(conv2d(sup, params[f"dec.lvl{l}.up.k"], params[f"dec.lvl{l}.up.b"]))
        s = np.concatenate([u] + [laterals[e][l] for e in range(spec.in_features)],
                           axis=-1)
        cache["dec"].append((l, sup, u))

    a = relu(conv2d(s, params["head.c1.k"], params["head.c1.b"]))
    main = conv2d(a, params["head.c2.k"], params["head.c2.b"])
    skip = conv2d(s, params["head.skip.k"], params["head.skip.b"])
    logits = main + skip
    cache["head"] = (s, a)
    return (logits, cache) if with_cache else (logits, None)


def forward(params: dict[str, np.ndarray], spec: ModelSpec, tile) -> Grid:
    """Probability grid for one input tile.

    ``tile`` is either an (h, w, layers) array or anything with an
    ``as_array``/``values`` view of one; georeference is taken from it when
    available, else defaults to unit cells at the origin.
    """
    if isinstance(tile, np.ndarray):
        arr = tile if tile.ndim == 3 else tile[..., None]
        geo = None
    else:
        arr = tile.as_array()
        geo = tile.layers[0]
    logits, _ = forward_batch(params, spec, arr[None])
    probs = sigmoid(logits[0, :, :, 0]).astype(np.float32)
    if geo is not None:
        return geo.with_values(probs)
    h, w = probs.shape
    return Grid(w, h, 1.0, 0.0, 0.0, -9999.0, probs)


def backward_arrays(params: dict[str, np.ndarray], spec: ModelSpec,
                    x: np.ndarray, y: np.ndarray, weight: np.ndarray,
                    gamma: float):
    """Gradients of the summed weighted focal loss for a stacked batch.

    ``x`` is (n, h, w, layers); ``y`` and ``weight`` are (n, h, w). Returns
    (loss, gradient map) with one gradient array per parameter.
    """
    logits, cache = forward_batch(params, spec, x, with_cache=True)
    loss, dlogits = focal_grad_logits(logits[..., 0], y, weight, gamma)
    dlogits = dlogits[..., None].astype(logits.dtype)

    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    s, a = cache["head"]

    dskip_in, grads["head.skip.k"][...], grads["head.skip.b"][...] = \
        conv2d_backward(dlogits, s, params["head.skip.k"])
    da, grads["head.c2.k"][...], grads["head.c2.b"][...] = \
        conv2d_backward(dlogits, a, params["head.c2.k"])
    da = relu_backward(da, a)
    dmain_in, grads["head.c1.k"][...], grads["head.c1.b"][...] = \
        conv2d_backward(da, s, params["head.c1.k"])
    ds = dskip_in + dmain_in

    # decoder, walking back up; laterals collect gradient for the encoders
    dlat = [[None] * spec.depth for _ in range(spec.in_features)]
    for l, sup, u in reversed(cache["dec"]):
        ch = spec.channels(l)
        du = ds[..., :ch]
        for e in range(spec.in_features):
            dlat[e][l] = np.ascontiguousarray(
                ds[..., ch * (1 + e):ch * (2 + e)])
        du = relu_backward(du, u)
        dsup, grads[f"dec.lvl{l}.up.k"][...], grads[f"dec.lvl{l}.up.b"][...] = \
            conv2d_backward(du, sup, params[f"dec.lvl{l}.up.k"])
        ds = upsample2_backward(dsup)

    merged, s_neck = cache["neck"]
    ds = relu_backward(ds, s_neck)
    dmerged, grads["neck.k"][...], grads["neck.b"][...] = \
        conv2d_backward(ds, merged, params["neck.k"])

    cb = spec.channels(spec.depth)
    for e in range(spec.in_features):
        dt = np.ascontiguousarray(dmerged[..., cb * e:cb * (e + 1)])
        ecache = cache["enc"][e]
        for l in range(spec.depth - 1, -1, -1):
            pre = f"enc{e}.lvl{l}"
            t, a_blk, lat, down = ecache["lvl"][l]
            dt = relu_backward(dt, down)
            dlat_down, grads[f"{pre}.down.k"][...], grads[f"{pre}.down.b"][...] = \
                conv2d_backward(dt, lat, params[f"{pre}.down.k"], stride=2)
            dl = relu_backward(dlat_down + dlat[e][l], lat)
            da_blk, grads[f"{pre}.c2.k"][...], grads[f"{pre}.c2.b"][...] = \
                conv2d_backward(dl, a_blk, params[f"{pre}.c2.k"])
            da_blk = relu_backward(da_blk, a_blk)
            dt_conv, grads[f"{pre}.c1.k"][...], grads[f"{pre}.c1.b"][...] = \
                conv2d_backward(da_blk, t, params[f"{pre}.c1.k"])
            dt = dl + dt_conv
        xe, t_stem = ecache["stem"]
        dt = relu_backward(dt, t_stem)
        _, grads[f"enc{e}.stem.k"][...], grads[f"enc{e}.stem.b"][...] = \
            conv2d_backward(dt, xe, params[f"enc{e}.stem.k"], need_dx=False)
    return loss, grads


def backward(params: dict[str, np.ndarray], spec: ModelSpec, batch,
             gamma: float):
    """Gradient map of the summed loss over a batch of dataset tiles."""
    if not batch:
        raise ValueError("backward needs a nonempty batch")
    x = np.stack([tile.features for tile in batch])
    y = np.stack([tile.label.grid.values for tile in batch])
    w = np.stack([tile.weight.values for tile in batch])
    return backward_arrays(params, spec, x, y, w, gamma)
