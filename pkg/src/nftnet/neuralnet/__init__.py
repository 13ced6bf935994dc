"""Conv/LSTM autoencoder for learned forward and inverse transforms."""

from .checkpoint import checkpoint_bytes, load_checkpoint, save_checkpoint
from .layers import (
    activation,
    conv1d_forward,
    conv_transpose1d_forward,
    lstm_forward,
)
from .model import (
    Direction,
    ModelSpec,
    ModelState,
    count_flops,
    count_params,
    init_state,
    layer_table,
    model_backward,
    model_forward,
    rmse_loss,
)
from .training import adam_step, complex_to_rows, rows_to_complex, train, training_pairs

__all__ = [
    "Direction",
    "ModelSpec",
    "ModelState",
    "activation",
    "adam_step",
    "checkpoint_bytes",
    "complex_to_rows",
    "conv1d_forward",
    "conv_transpose1d_forward",
    "count_flops",
    "count_params",
    "init_state",
    "layer_table",
    "load_checkpoint",
    "lstm_forward",
    "model_backward",
    "model_forward",
    "rmse_loss",
    "rows_to_complex",
    "save_checkpoint",
    "train",
    "training_pairs",
]
