"""GRU cells, sequence encoders, and MLPs on top of the autodiff core.

Gate convention for the GRU: the input projection packs [reset | update |
candidate] column blocks into one matrix so a whole sequence's input side is a
single matmul; the recurrent side packs [reset | update] and keeps the
candidate separate because it sees the reset-gated hidden state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .tensor import (ParamSet, Tensor, add, concat, matmul, mul, narrow,
                     sigmoid, sub, tanh, relu)


def orthogonal(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    a = rng.standard_normal(shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == shape else vt
    return q


def fan_in_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    bound = 1.0 / np.sqrt(shape[0])
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class GRUParams:
    w_x: Tensor    # (input_dim, 3H): [reset | update | candidate]
    w_h_ru: Tensor  # (H, 2H): [reset | update]
    w_h_c: Tensor  # (H, H)
    b: Tensor      # (3H,)

    @property
    def hidden(self) -> int:
        return self.w_h_c.shape[0]


def stage_gru(params: ParamSet, prefix: str, input_dim: int, hidden: int,
              rng: np.random.Generator) -> None:
    params.stage(f"{prefix}.w_x", fan_in_uniform(rng, (input_dim, 3 * hidden)))
    ru = np.concatenate([orthogonal(rng, (hidden, hidden)),
                         orthogonal(rng, (hidden, hidden))], axis=1)
    params.stage(f"{prefix}.w_h_ru", ru)
    params.stage(f"{prefix}.w_h_c", orthogonal(rng, (hidden, hidden)))
    params.stage(f"{prefix}.b", np.zeros(3 * hidden))


def gru_view(params: ParamSet, prefix: str) -> GRUParams:
    return GRUParams(w_x=params[f"{prefix}.w_x"],
                     w_h_ru=params[f"{prefix}.w_h_ru"],
                     w_h_c=params[f"{prefix}.w_h_c"],
                     b=params[f"{prefix}.b"])


def gru_step_from_preact(p: GRUParams, xw: Tensor, h: Tensor) -> Tensor:
    """One GRU update given the input-side preactivation xw = x @ w_x + b."""
    hidden = p.hidden
    ru = sigmoid(add(narrow(xw, -1, 0, 2 * hidden), matmul(h, p.w_h_ru)))
    r = narrow(ru, -1, 0, hidden)
    u = narrow(ru, -1, hidden, hidden)
    c = tanh(add(narrow(xw, -1, 2 * hidden, hidden), matmul(mul(r, h), p.w_h_c)))
    # h' = (1-u) h + u c
    return add(h, mul(u, sub(c, h)))


def gru_cell(p: GRUParams, x_t: Tensor, h: Tensor) -> Tensor:
    """Single-step GRU cell: gates from x_t and h, convex hidden update."""
    if x_t.shape[-1] != p.w_x.shape[0]:
        raise InputError(f"gru_cell: input dim {x_t.shape[-1]} != "
                         f"{p.w_x.shape[0]}")
    if h.shape[-1] != p.hidden:
        raise InputError(f"gru_cell: hidden dim {h.shape[-1]} != {p.hidden}")
    xw = add(matmul(x_t, p.w_x), p.b)
    return gru_step_from_preact(p, xw, h)


def zeros_hidden(batch: int, hidden: int, dtype) -> Tensor:
    return Tensor(np.zeros((batch, hidden), dtype=dtype))


def gru_sequence(p: GRUParams, seq: np.ndarray, dtype,
                 h0: Tensor | None = None,
                 extra_preact: Tensor | None = None) -> list[Tensor]:
    """Run a GRU over a constant input sequence of shape (B, T, D).

    The whole input side is computed as one matmul over the time-major
    flattened sequence; `extra_preact` (B, 3H), when given, is added to every
    step's preactivation (used for per-window constant inputs such as goals
    and latents). Returns the hidden state after every step.
    """
    b, t, d = seq.shape
    flat = np.ascontiguousarray(np.swapaxes(seq, 0, 1)).reshape(t * b, d)
    xw_all = add(matmul(Tensor(flat.astype(dtype, copy=False)), p.w_x), p.b)
    h = h0 if h0 is not None else zeros_hidden(b, p.hidden, dtype)
    out = []
    for i in range(t):
        xw = narrow(xw_all, 0, i * b, b)
        if extra_preact is not None:
            xw = add(xw, extra_preact)
        h = gru_step_from_preact(p, xw, h)
        out.append(h)
    return out


def bigru_encode(p_fwd: GRUParams, p_bwd: GRUParams, seq: np.ndarray,
                 dtype) -> Tensor:
    """Concat of final forward and final backward hidden states, (B, 2H)."""
    if seq.ndim != 3 or seq.shape[1] == 0:
        raise InputError(f"bigru_encode: need a non-empty (B, T, D) sequence, "
                         f"got shape {seq.shape}")
    h_fwd = gru_sequence(p_fwd, seq, dtype)[-1]
    h_bwd = gru_sequence(p_bwd, seq[:, ::-1], dtype)[-1]
    return concat([h_fwd, h_bwd], axis=-1)


@dataclass
class LinearParams:
    w: Tensor
    b: Tensor


def stage_linear(params: ParamSet, prefix: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator, bias_init: float = 0.0) -> None:
    params.stage(f"{prefix}.w", fan_in_uniform(rng, (in_dim, out_dim)))
    params.stage(f"{prefix}.b", np.full(out_dim, bias_init, dtype=np.float64))


def linear_view(params: ParamSet, prefix: str) -> LinearParams:
    return LinearParams(w=params[f"{prefix}.w"], b=params[f"{prefix}.b"])


def linear(p: LinearParams, x: Tensor) -> Tensor:
    return add(matmul(x, p.w), p.b)


@dataclass
class MLPParams:
    layers: list[LinearParams]
    activation: str = "relu"


def stage_mlp(params: ParamSet, prefix: str, dims: list[int],
              rng: np.random.Generator) -> None:
    """dims = [in, hidden..., out]; activations between all but the last."""
    for i in range(len(dims) - 1):
        stage_linear(params, f"{prefix}.{i}", dims[i], dims[i + 1], rng)


def mlp_view(params: ParamSet, prefix: str, n_layers: int,
             activation: str = "relu") -> MLPParams:
    return MLPParams(layers=[linear_view(params, f"{prefix}.{i}")
                             for i in range(n_layers)],
                     activation=activation)


_ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid}


def mlp_forward(p: MLPParams, x: Tensor) -> Tensor:
    act = _ACTIVATIONS[p.activation]
    for i, layer in enumerate(p.layers):
        x = linear(layer, x)
        if i < len(p.layers) - 1:
            x = act(x)
    return x
