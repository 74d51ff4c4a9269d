"""Diagonal Gaussians: reparameterized sampling and closed-form KL."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .tensor import Tensor, add, exp, mul, scale, sub, sum_last


@dataclass
class DiagGaussian:
    """Distribution parameters as tensors of matching shape (..., D)."""

    mu: Tensor
    log_sigma: Tensor

    def __post_init__(self):
        if self.mu.shape != self.log_sigma.shape:
            raise InputError(f"mu shape {self.mu.shape} != log_sigma shape "
                             f"{self.log_sigma.shape}")

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma.data)


def reparam_sample(d: DiagGaussian, noise: np.ndarray) -> Tensor:
    """z = mu + exp(log_sigma) * noise, differentiable in both parameters."""
    if tuple(noise.shape) != tuple(d.mu.shape):
        raise InputError(f"noise shape {noise.shape} != {d.mu.shape}")
    eps = Tensor(np.asarray(noise, dtype=d.mu.dtype))
    return add(d.mu, mul(exp(d.log_sigma), eps))


def kl_diag(p: DiagGaussian, q: DiagGaussian) -> Tensor:
    """KL(p || q) summed over the last axis.

    Per dimension: log(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2.
    """
    if p.mu.shape != q.mu.shape:
        raise InputError(f"kl_diag: dim mismatch {p.mu.shape} vs {q.mu.shape}")
    log_ratio = sub(q.log_sigma, p.log_sigma)             # log(sq/sp)
    var_ratio = exp(scale(log_ratio, -2.0))               # sp^2 / sq^2
    dmu = sub(p.mu, q.mu)
    inv_var_q = exp(scale(q.log_sigma, -2.0))             # 1 / sq^2
    quad = mul(mul(dmu, dmu), inv_var_q)
    inner = add(log_ratio, scale(add(var_ratio, quad), 0.5))
    total = sum_last(inner)
    n = p.mu.shape[-1]
    return add(total, Tensor(np.full_like(total.data, -0.5 * n)))
