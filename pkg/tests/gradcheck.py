"""Finite-difference gradient checking helpers shared by the test modules.

The loss is piecewise smooth (rectifiers), so a central difference is only a
derivative estimate when both evaluations share the same activation pattern.
Entries whose +-h probes land on different sides of any rectifier boundary
are excluded; the comparison is the L2 relative error per parameter tensor
over the surviving entries, with the difference quotient always evaluated in
float64 so the check measures gradient quality, not probe noise.
"""

from __future__ import annotations

import numpy as np

from hydrofix.net import init_params
from hydrofix.net.loss import focal_grad_logits
from hydrofix.net.model import ModelSpec, forward_batch
from hydrofix.rng import Rng


def make_problem(spec: ModelSpec, seed: int, dtype=np.float64,
                 size: int = 8, batch: int = 2):
    """Random parameters (zero-init tensors re-rolled), input, labels, weights."""
    params = {k: v.astype(dtype) for k, v in init_params(spec, seed=seed).items()}
    rng = Rng(seed + 1)
    for name in params:
        if not params[name].any():
            params[name] = rng.uniform_array(params[name].shape, -0.3, 0.3).astype(dtype)
    x = rng.uniform_array((batch, size, size, spec.in_features), -1, 1).astype(dtype)
    y = (rng.uniform_array((batch, size, size), 0, 1) > 0.7).astype(dtype)
    w = rng.uniform_array((batch, size, size), 0.1, 2.0).astype(dtype)
    return params, x, y, w


def loss_and_pattern(params, spec, x, y, w, gamma):
    """Loss in float64 plus a hash of every rectifier's activation pattern."""
    p64 = {k: v.astype(np.float64) for k, v in params.items()}
    logits, cache = forward_batch(p64, spec, x.astype(np.float64), with_cache=True)
    loss = focal_grad_logits(logits[..., 0], y.astype(np.float64),
                             w.astype(np.float64), gamma)[0]
    bits = []
    for enc in cache["enc"]:
        bits.append((enc["stem"][1] > 0).tobytes())
        for _, a, lat, down in enc["lvl"]:
            bits.extend(((a > 0).tobytes(), (lat > 0).tobytes(), (down > 0).tobytes()))
    bits.append((cache["neck"][1] > 0).tobytes())
    for _, _, u in cache["dec"]:
        bits.append((u > 0).tobytes())
    bits.append((cache["head"][1] > 0).tobytes())
    return loss, hash(b"".join(bits))


def tensor_fd_errors(params, spec, x, y, w, gamma, grads, h) -> dict[str, tuple[float, float]]:
    """Per-tensor (relative error, coverage) of gradients vs central differences."""
    out = {}
    for name, grad in grads.items():
        flat = params[name].ravel()
        fd, got = [], []
        skipped = 0
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            hi = flat[idx]
            up, sig_up = loss_and_pattern(params, spec, x, y, w, gamma)
            flat[idx] = orig - h
            lo = flat[idx]
            down, sig_dn = loss_and_pattern(params, spec, x, y, w, gamma)
            flat[idx] = orig
            if sig_up != sig_dn:
                skipped += 1
                continue
            fd.append((up - down) / (float(hi) - float(lo)))
            got.append(float(grad.ravel()[idx]))
        if not fd:
            out[name] = (0.0, 0.0)
            continue
        fd = np.array(fd)
        got = np.array(got)
        denom = max(np.linalg.norm(fd), np.linalg.norm(got), 1e-12)
        out[name] = (float(np.linalg.norm(fd - got) / denom),
                     len(fd) / (len(fd) + skipped))
    return out
