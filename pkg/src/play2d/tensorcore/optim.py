"""Adam optimizer over a ParamSet's flat buffers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from .tensor import ParamSet


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = field(default=None)  # type: ignore[assignment]
    v: np.ndarray = field(default=None)  # type: ignore[assignment]


def adam_init(params: ParamSet, lr: float = 3e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                     m=np.zeros(params.size, dtype=np.float64),
                     v=np.zeros(params.size, dtype=np.float64))


def adam_step(params: ParamSet, state: AdamState) -> None:
    """Bias-corrected moment update applied in place to the flat parameters."""
    g = params.flat_grad
    if g.shape != state.m.shape:
        raise InputError(f"gradient size {g.shape} != state size {state.m.shape}")
    state.step_count += 1
    t = state.step_count
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * np.square(g, dtype=np.float64)
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    params.flat_data -= update.astype(params.dtype, copy=False)
