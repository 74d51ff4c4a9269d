"""Self-contained numerics: tensors with reverse-mode autodiff, GRU/MLP
building blocks, diagonal Gaussians, Adam, and gradient verification."""

from .tensor import (ParamSet, Tensor, abs_mean, add, concat, constant, exp,
                     matmul, mean, mul, narrow, parameter, relu, scale,
                     sigmoid, sub, sum_last, tanh)
from .nn import (GRUParams, LinearParams, MLPParams, bigru_encode, gru_cell,
                 gru_sequence, gru_step_from_preact, gru_view, linear,
                 linear_view, mlp_forward, mlp_view, orthogonal, stage_gru,
                 stage_linear, stage_mlp, fan_in_uniform, zeros_hidden)
from .dists import DiagGaussian, kl_diag, reparam_sample
from .optim import AdamState, adam_init, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numeric_gradient, relative_error

__all__ = [
    "ParamSet", "Tensor", "abs_mean", "add", "concat", "constant", "exp",
    "matmul", "mean", "mul", "narrow", "parameter", "relu", "scale",
    "sigmoid", "sub", "sum_last", "tanh",
    "GRUParams", "LinearParams", "MLPParams", "bigru_encode", "gru_cell",
    "gru_sequence", "gru_step_from_preact", "gru_view", "linear",
    "linear_view", "mlp_forward", "mlp_view", "orthogonal", "stage_gru",
    "stage_linear", "stage_mlp", "fan_in_uniform", "zeros_hidden",
    "DiagGaussian", "kl_diag", "reparam_sample",
    "AdamState", "adam_init", "adam_step",
    "load_checkpoint", "save_checkpoint",
    "check_gradients", "numeric_gradient", "relative_error",
]
