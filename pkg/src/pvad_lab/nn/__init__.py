"""Minimal differentiable-computation substrate (numpy, full BPTT)."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import NonDeterministicClosureError, grad_check
from .layers import (
    attention_backward,
    attention_forward,
    blstm_backward,
    blstm_forward,
    dropout,
    dropout_backward,
    linear_backward,
    linear_forward,
    lstm_backward,
    lstm_forward,
)
from .loss import softmax, softmax_ce, softmax_ce_backward
from .optim import AdamState, adam_step, clip_gradients, global_grad_norm, init_adam
from .params import (
    ModelParams,
    ShapeMismatchError,
    init_attention,
    init_blstm,
    init_linear,
    init_lstm,
)

__all__ = [
    "AdamState",
    "ModelParams",
    "NonDeterministicClosureError",
    "ShapeMismatchError",
    "adam_step",
    "attention_backward",
    "attention_forward",
    "blstm_backward",
    "blstm_forward",
    "clip_gradients",
    "dropout",
    "dropout_backward",
    "global_grad_norm",
    "grad_check",
    "init_adam",
    "init_attention",
    "init_blstm",
    "init_linear",
    "init_lstm",
    "linear_backward",
    "linear_forward",
    "load_checkpoint",
    "lstm_backward",
    "lstm_forward",
    "save_checkpoint",
    "softmax",
    "softmax_ce",
    "softmax_ce_backward",
]
