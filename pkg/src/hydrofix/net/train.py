"""Training loop: seeded shuffling, augmentation, ADAM, best-on-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..labels import augment
from ..rng import Rng
from .adam import AdamState, adam_step
from .loss import focal_loss
from .model import ModelSpec, backward, forward_batch, init_params
from .ops import sigmoid


class DivergenceError(Exception):
    """Loss became non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 50
    gamma: float = 2.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    crop_cells: int | None = None   # None: largest 2^depth multiple <= 7/8 tile

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.epochs + 1,
               self.beta1, self.beta2, self.eps) <= 0:
            raise ValueError("training hyperparameters must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


def _default_crop(tile_side: int, depth: int) -> int:
    div = 1 << depth
    crop = (tile_side * 7 // 8) // div * div
    return max(crop, div)


def validation_loss(params, spec: ModelSpec, tiles, gamma: float) -> float:
    total = 0.0
    for i in range(0, len(tiles), 32):
        chunk = tiles[i:i + 32]
        x = np.stack([t.features for t in chunk])
        logits, _ = forward_batch(params, spec, x)
        probs = sigmoid(logits[..., 0])
        for j, tile in enumerate(chunk):
            total += focal_loss(probs[j], tile.label.grid.values,
                                tile.weight.values, gamma)
    return total / len(tiles)


def train(train_set, val_set, spec: ModelSpec, cfg: TrainConfig,
          params: dict[str, np.ndarray] | None = None,
          progress=None, with_state: bool = False):
    """Returns (best-on-validation parameters, per-epoch history).

    Each epoch shuffles the training tiles, augments every tile with a
    random crop and flips, then applies summed-batch gradients through ADAM.
    Validation runs unaugmented; the parameters with the lowest validation
    loss seen so far are the ones returned. ``with_state`` appends the final
    optimizer state to the result for checkpointing.
    """
    if not train_set or not val_set:
        raise ValueError("train and validation sets must be nonempty")
    if params is None:
        params = init_params(spec, seed=cfg.seed)
    state = AdamState.initial(params)
    tile_side = train_set[0].features.shape[0]
    crop_cells = cfg.crop_cells or _default_crop(tile_side, spec.depth)
    if crop_cells % (1 << spec.depth):
        raise ValueError(f"crop_cells {crop_cells} not divisible by 2^{spec.depth}")

    best_params = {k: v.copy() for k, v in params.items()}
    best_val = math.inf
    history: list[dict] = []

    for epoch in range(cfg.epochs):
        rng = Rng(cfg.seed).fork("epoch", epoch)
        order = list(range(len(train_set)))
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [augment(train_set[i], crop_cells, rng.fork("aug", i))
                     for i in order[start:start + cfg.batch_size]]
            loss, grads = backward(params, spec, batch, cfg.gamma)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            epoch_loss += loss
            params, state = adam_step(params, grads, state, cfg)
        train_loss = epoch_loss / len(order)
        val_loss = validation_loss(params, spec, val_set, cfg.gamma)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss})
        if progress is not None:
            progress(epoch, train_loss, val_loss)
    if with_state:
        return best_params, history, state
    return best_params, history
