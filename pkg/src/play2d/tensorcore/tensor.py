"""Reverse-mode autodiff over dense numpy arrays.

Small, fixed model zoo, so the op set is deliberately minimal: 2-D matmul,
elementwise arithmetic, concat/narrow on an axis, a few activations, and
scalar reductions. Broadcasting is limited to bias-add of a vector onto rows.
Gradients accumulate into per-tensor buffers; parameter tensors may share one
flat backing buffer (see ParamSet) so the optimizer can update vectorized.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data: np.ndarray, requires_grad: bool = False,
                 parents=(), backward=None):
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray, owned: bool = False) -> None:
        if self.grad is None:
            self.grad = g if owned else g.copy()
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this (scalar) tensor through the graph."""
        if self.data.ndim != 0:
            raise InputError("backward() expects a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()


def constant(data, dtype=None) -> Tensor:
    arr = np.asarray(data)
    if dtype is not None and arr.dtype != dtype:
        arr = arr.astype(dtype)
    return Tensor(arr)


def parameter(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True)


def _unary(x: Tensor, out_data: np.ndarray, grad_fn) -> Tensor:
    if not x.requires_grad:
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=(x,))

    def backward():
        x.accumulate(grad_fn(out.grad), owned=True)

    out._backward = backward
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise InputError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise InputError(f"matmul: incompatible shapes {a.data.shape} "
                         f"and {b.data.shape}")
    out_data = a.data @ b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=(a, b))

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g @ b.data.T, owned=True)
        if b.requires_grad:
            b.accumulate(a.data.T @ g, owned=True)

    out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also supports adding a (n,) bias onto (..., n) rows."""
    bias_mode = a.data.shape != b.data.shape
    if bias_mode:
        if b.data.ndim != 1 or a.data.shape[-1] != b.data.shape[0]:
            raise InputError(f"add: shape mismatch {a.data.shape} vs "
                             f"{b.data.shape}")
    out_data = a.data + b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=(a, b))

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            if bias_mode:
                b.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0), owned=True)
            else:
                b.accumulate(g)

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    out_data = a.data - b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=(a, b))

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g, owned=True)

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    out_data = a.data * b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=(a, b))

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g * b.data, owned=True)
        if b.requires_grad:
            b.accumulate(g * a.data, owned=True)

    out._backward = backward
    return out


def scale(x: Tensor, k: float) -> Tensor:
    return _unary(x, x.data * k, lambda g: g * k)


def concat(tensors, axis: int = -1) -> Tensor:
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    if not any(t.requires_grad for t in tensors):
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=tuple(tensors))
    sizes = [d.shape[axis] for d in datas]

    def backward():
        g = out.grad
        offset = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + size)
                t.accumulate(g[tuple(idx)])
            offset += size

    out._backward = backward
    return out


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out_data = x.data[idx]
    if not x.requires_grad:
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, parents=(x,))

    def backward():
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        x.grad[idx] += out.grad

    out._backward = backward
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _unary(x, y, lambda g, y=y: g * (1.0 - y * y))


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    return _unary(x, y, lambda g, y=y: g * (y * (1.0 - y)))


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0.0)
    return _unary(x, y, lambda g, x=x: g * (x.data > 0))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _unary(x, y, lambda g, y=y: g * y)


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    out_data = np.asarray(x.data.mean(), dtype=x.data.dtype)
    return _unary(x, out_data, lambda g: np.full_like(x.data, g / n))


def abs_mean(x: Tensor) -> Tensor:
    """Mean absolute value; subgradient 0 at exact zeros."""
    n = x.data.size
    out_data = np.asarray(np.abs(x.data).mean(), dtype=x.data.dtype)
    return _unary(x, out_data, lambda g: np.sign(x.data) * (g / n))


def sum_last(x: Tensor) -> Tensor:
    """Sum over the final axis."""
    out_data = x.data.sum(axis=-1)
    return _unary(x, out_data,
                  lambda g: np.broadcast_to(np.expand_dims(g, -1),
                                            x.data.shape).copy())


class ParamSet:
    """Named parameters backed by one flat value buffer and one flat gradient
    buffer, so optimizer updates and checkpoint payloads are single arrays."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._staged: list[tuple[str, np.ndarray]] = []
        self.names: list[str] = []
        self.shapes: dict[str, tuple[int, ...]] = {}
        self.tensors: dict[str, Tensor] = {}
        self.flat_data: np.ndarray | None = None
        self.flat_grad: np.ndarray | None = None

    def stage(self, name: str, array: np.ndarray) -> None:
        if name in self.shapes or any(n == name for n, _ in self._staged):
            raise InputError(f"duplicate parameter name {name!r}")
        self._staged.append((name, np.asarray(array, dtype=self.dtype)))

    def finalize(self) -> None:
        total = sum(a.size for _, a in self._staged)
        self.flat_data = np.zeros(total, dtype=self.dtype)
        self.flat_grad = np.zeros(total, dtype=self.dtype)
        offset = 0
        for name, arr in self._staged:
            view = self.flat_data[offset:offset + arr.size].reshape(arr.shape)
            view[...] = arr
            gview = self.flat_grad[offset:offset + arr.size].reshape(arr.shape)
            t = Tensor(view, requires_grad=True)
            t.grad = gview
            self.names.append(name)
            self.shapes[name] = arr.shape
            self.tensors[name] = t
            offset += arr.size
        self._staged = []

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def zero_grad(self) -> None:
        self.flat_grad.fill(0)

    @property
    def size(self) -> int:
        return int(self.flat_data.size)
