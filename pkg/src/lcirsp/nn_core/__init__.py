"""Differentiable-tensor core: autograd, layers, losses, optimizers."""

from .tensor import (
    Parameter,
    Tensor,
    as_tensor,
    backward,
    no_grad,
)
from .layers import (
    BatchNormSeq,
    CausalConv,
    ChannelRescale,
    Dense,
    LstmLayer,
    Module,
    ResidualBlock,
    TcnConfig,
    dense,
    dilated_causal_conv,
    dropout,
    effective_span,
    lstm_sequence,
    lstm_step,
    receptive_field,
)
from .losses import categorical_cross_entropy, mse_loss, one_hot
from .optim import Adam, RmsProp, adam_step, rmsprop_step

__all__ = [
    "Adam", "BatchNormSeq", "CausalConv", "ChannelRescale", "Dense",
    "LstmLayer", "Module", "Parameter", "ResidualBlock", "RmsProp",
    "TcnConfig", "Tensor", "adam_step", "as_tensor", "backward",
    "categorical_cross_entropy", "dense", "dilated_causal_conv", "dropout",
    "effective_span", "lstm_sequence", "lstm_step", "mse_loss", "no_grad",
    "one_hot", "receptive_field", "rmsprop_step",
]
