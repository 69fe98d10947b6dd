"""Weighted focal loss.

Per cell, with p_t = p for positive cells and 1 - p otherwise:

    loss = -(1 - p_t)^gamma * log(p_t)

summed over cells after multiplying by the per-cell weight map. gamma = 0
recovers plain cross-entropy. Predictions are clamped to [eps, 1 - eps]
before the log; the clamp region contributes zero gradient.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-7


def focal_loss_elementwise(p: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    pc = np.clip(p.astype(np.float64), EPS, 1.0 - EPS)
    pt = np.where(y > 0.5, pc, 1.0 - pc)
    return -np.power(1.0 - pt, gamma) * np.log(pt)


def focal_loss(pred, label, weight, gamma: float) -> float:
    """Sum of weighted per-cell focal losses.

    Accepts Grids/LabelMasks or bare arrays for the three inputs.
    """
    p = pred.values if hasattr(pred, "values") else np.asarray(pred)
    y = label.grid.values if hasattr(label, "grid") else (
        label.values if hasattr(label, "values") else np.asarray(label))
    w = weight.values if hasattr(weight, "values") else np.asarray(weight)
    if p.shape != y.shape or p.shape != w.shape:
        raise ValueError(f"shape mismatch: pred {p.shape}, label {y.shape}, weight {w.shape}")
    return float((w.astype(np.float64) * focal_loss_elementwise(p, y, gamma)).sum())


def focal_grad_logits(logits: np.ndarray, y: np.ndarray, weight: np.ndarray,
                      gamma: float):
    """(loss, d loss / d logits) with p = sigmoid(logits), in float64."""
    z = logits.astype(np.float64)
    p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                 np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    pc = np.clip(p, EPS, 1.0 - EPS)
    pos = y > 0.5
    pt = np.where(pos, pc, 1.0 - pc)
    w = weight.astype(np.float64)
    one_m = 1.0 - pt
    loss = float((w * -np.power(one_m, gamma) * np.log(pt)).sum())
    if gamma == 0.0:
        dl_dpt = -1.0 / pt
    else:
        dl_dpt = gamma * np.power(one_m, gamma - 1.0) * np.log(pt) \
            - np.power(one_m, gamma) / pt
    dpt_dp = np.where(pos, 1.0, -1.0)
    clamped = (p < EPS) | (p > 1.0 - EPS)
    dloss = w * dl_dpt * dpt_dp * p * (1.0 - p)
    dloss[clamped] = 0.0
    return loss, dloss
