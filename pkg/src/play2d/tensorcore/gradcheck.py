"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import ParamSet


def numeric_gradient(loss_fn, params: ParamSet, h: float = 1e-5) -> np.ndarray:
    """Central differences of loss_fn() w.r.t. every flat parameter entry.

    loss_fn must read the (float64) params and return a python float. The
    parameters are restored exactly after probing.
    """
    assert params.dtype == np.float64, "finite differences need float64 params"
    flat = params.flat_data
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = loss_fn()
        flat[i] = orig - h
        f_minus = loss_fn()
        flat[i] = orig
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def analytic_gradient(loss_fn, params: ParamSet) -> np.ndarray:
    params.zero_grad()
    loss = loss_fn(as_tensor=True)
    loss.backward()
    return params.flat_grad.copy()


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(num / den)


def check_gradients(loss_fn, params: ParamSet, h: float = 1e-5) -> float:
    """Relative error between backprop and finite differences.

    loss_fn(as_tensor=False) -> float; loss_fn(as_tensor=True) -> Tensor.
    """
    ana = analytic_gradient(loss_fn, params)
    num = numeric_gradient(lambda: float(loss_fn(as_tensor=True).item()),
                           params, h=h)
    return relative_error(ana, num)
