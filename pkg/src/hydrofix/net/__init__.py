from .model import ModelSpec, init_params, forward, forward_batch, backward, backward_arrays
from .loss import focal_loss, focal_loss_elementwise, focal_grad_logits
from .adam import AdamState, adam_step
from .train import TrainConfig, DivergenceError, train
from .checkpoint import (CheckpointError, save_checkpoint, load_checkpoint,
                         save_adam_state, load_adam_state)

__all__ = [
    "ModelSpec", "init_params", "forward", "forward_batch", "backward",
    "backward_arrays", "focal_loss", "focal_loss_elementwise",
    "focal_grad_logits", "AdamState", "adam_step", "TrainConfig",
    "DivergenceError", "train", "CheckpointError", "save_checkpoint",
    "load_checkpoint", "save_adam_state", "load_adam_state",
]
