"""Minimal reverse-mode autodiff over dense float64 arrays.

A `Tensor` wraps a C-contiguous float64 ndarray. Every op records its
parents and a vector-Jacobian closure on the result, so the tape is the
implicit graph of live results, rebuilt on every forward pass. `backward`
walks that graph once in reverse topological order and accumulates
gradients into leaf tensors (those created directly with
``requires_grad=True``). Calling backward twice on the same graph adds the
same gradients twice.

Scope is deliberately small: 1-D/2-D arrays, no broadcasting beyond
trailing-axis affine ops, no in-place mutation of graph nodes.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import (
    ContractError,
    DegenerateInputError,
    DimensionError,
    ExhaustedPoolError,
    ParameterError,
)

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (pure forward evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def _as_array(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim > 2:
        raise DimensionError(f"tensors are at most 2-D, got shape {arr.shape}")
    return arr


class Tensor:
    """Dense float64 array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # arithmetic sugar; heavy lifting is in the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into every reachable grad-tracked leaf.

    Interior adjoints live only for the duration of this call; leaves keep
    accumulating across calls until explicitly zeroed.
    """
    if loss.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    # iterative DFS topological sort over grad-requiring subgraph
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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

    adjoint: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(topo):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is not None:
            for parent, contrib in zip(node._parents, node._vjp(g)):
                if not parent.requires_grad or contrib is None:
                    continue
                acc = adjoint.get(id(parent))
                if acc is None:
                    adjoint[id(parent)] = np.array(contrib, dtype=np.float64, copy=True)
                else:
                    acc += contrib
        elif node.requires_grad:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g


# ---------------------------------------------------------------------------
# elementwise and affine ops


def _unbroadcast_trailing(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to `shape` for trailing-axis vector operands."""
    if g.shape == shape:
        return g
    if len(shape) == 0:
        return np.sum(g)
    return np.sum(g, axis=tuple(range(g.ndim - len(shape))))


def _trailing_compatible(a: np.ndarray, b: np.ndarray) -> bool:
    # allowed: identical shapes, a 0-D scalar operand, or (N, D) op (D,)
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return True
    if b.ndim == 1 and a.ndim == 2 and a.shape[1] == b.shape[0]:
        return True
    if a.ndim == 1 and b.ndim == 2 and b.shape[1] == a.shape[0]:
        return True
    return False


def add(a: Tensor, b) -> Tensor:
    """Elementwise sum; the second operand may be a python scalar or a
    trailing-axis vector (row-wise bias)."""
    if not isinstance(b, Tensor):
        return _result(a.data + float(b), (a,), lambda g: (g,))
    if not _trailing_compatible(a.data, b.data):
        raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out = a.data + b.data

    def vjp(g):
        return (_unbroadcast_trailing(g, a.shape), _unbroadcast_trailing(g, b.shape))

    return _result(out, (a, b), vjp)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; scalar and trailing-axis vector operands allowed."""
    if not isinstance(b, Tensor):
        s = float(b)
        return _result(a.data * s, (a,), lambda g: (g * s,))
    if not _trailing_compatible(a.data, b.data):
        raise DimensionError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast_trailing(g * b.data, a.shape),
            _unbroadcast_trailing(g * a.data, b.shape),
        )

    return _result(out, (a, b), vjp)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise DegenerateInputError("log of non-positive value")
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(a)) computed without overflow."""
    out = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return _result(out, (a,), lambda g: (g * sig,))


def sum_all(a: Tensor) -> Tensor:
    return _result(np.sum(a.data), (a,), lambda g: (np.full_like(a.data, float(g)),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    return _result(
        np.sum(a.data) / n, (a,), lambda g: (np.full_like(a.data, float(g) / n),)
    )


# ---------------------------------------------------------------------------
# matrix ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for (N,K)@(K,M); 1-D operands act as a row or column."""
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise DimensionError("matmul needs 1-D or 2-D operands")
    ka = ad.shape[-1]
    kb = bd.shape[0]
    if ka != kb:
        raise DimensionError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = ad @ bd

    def vjp(g):
        g2 = np.atleast_2d(g)
        a2 = np.atleast_2d(ad)
        b2 = bd.reshape(bd.shape[0], -1)
        # align g to (rows(a), cols(b)) regardless of squeezed operand ranks
        if ad.ndim == 1 and bd.ndim == 1:
            ga = g * bd
            gb = g * ad
        elif ad.ndim == 1:
            ga = (g2 @ b2.T).reshape(ad.shape)
            gb = np.outer(ad, g2).reshape(bd.shape)
        elif bd.ndim == 1:
            ga = np.outer(g, bd).reshape(ad.shape)
            gb = (a2.T @ np.atleast_2d(g).reshape(-1, 1)).reshape(bd.shape)
        else:
            ga = g2 @ b2.T
            gb = a2.T @ g2
        return (ga, gb)

    return _result(out, (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError("transpose expects a 2-D tensor")
    return _result(np.ascontiguousarray(a.data.T), (a,), lambda g: (g.T,))


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError("slice_cols expects a 2-D tensor")

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return _result(np.ascontiguousarray(a.data[:, start:stop]), (a,), vjp)


def concat_cols(parts: list[Tensor]) -> Tensor:
    if not parts or any(p.data.ndim != 2 for p in parts):
        raise DimensionError("concat_cols expects 2-D tensors")
    widths = [p.shape[1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)

    def vjp(g):
        grads, at = [], 0
        for w in widths:
            grads.append(g[:, at : at + w])
            at += w
        return tuple(grads)

    return _result(out, tuple(parts), vjp)


def stack_rows(rows: list[Tensor]) -> Tensor:
    if not rows or any(r.data.ndim != 1 for r in rows):
        raise DimensionError("stack_rows expects 1-D tensors")
    out = np.stack([r.data for r in rows], axis=0)
    return _result(out, tuple(rows), lambda g: tuple(g[i] for i in range(len(rows))))


def take_row(a: Tensor, i: int) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError("take_row expects a 2-D tensor")

    def vjp(g):
        full = np.zeros_like(a.data)
        full[i] = g
        return (full,)

    return _result(a.data[i].copy(), (a,), vjp)


# ---------------------------------------------------------------------------
# normalization and similarity


def softmax(x: Tensor, temperature: float = 1.0) -> Tensor:
    """Stable softmax along the last axis: exp((x - max)/T) normalized."""
    if temperature <= 0.0:
        raise ParameterError(f"temperature must be > 0, got {temperature}")
    z = x.data / temperature
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=-1, keepdims=True)

    def vjp(g):
        inner = np.sum(g * y, axis=-1, keepdims=True)
        return (y * (g - inner) / temperature,)

    return _result(y, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = x.data.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(
            f"layer_norm: gain/bias {gain.shape}/{bias.shape} do not match last axis {d}"
        )
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.mean((x.data - mu) ** 2, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gain.data + bias.data

    def vjp(g):
        gg = g * gain.data
        gx = (
            gg - np.mean(gg, axis=-1, keepdims=True)
            - xhat * np.mean(gg * xhat, axis=-1, keepdims=True)
        ) * inv
        axes = tuple(range(g.ndim - 1))
        return (gx, np.sum(g * xhat, axis=axes), np.sum(g, axis=axes))

    return _result(out, (x, gain, bias), vjp)


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Cosine of the angle between two 1-D vectors, as a scalar tensor."""
    if a.data.ndim != 1 or b.data.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"cosine: need equal-length vectors, {a.shape} vs {b.shape}")
    na = np.linalg.norm(a.data)
    nb = np.linalg.norm(b.data)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector")
    c = float(a.data @ b.data) / (na * nb)

    def vjp(g):
        g = float(g)
        return (
            g * (b.data / (na * nb) - c * a.data / (na * na)),
            g * (a.data / (na * nb) - c * b.data / (nb * nb)),
        )

    return _result(np.array(c), (a, b), vjp)


def cosine_rows(mat: Tensor, vec: Tensor) -> Tensor:
    """Cosine similarity of every row of `mat` against `vec`; returns (n,)."""
    if mat.data.ndim != 2 or vec.data.ndim != 1 or mat.shape[1] != vec.shape[0]:
        raise DimensionError(f"cosine_rows: {mat.shape} rows vs vector {vec.shape}")
    rn = np.linalg.norm(mat.data, axis=1)
    vn = np.linalg.norm(vec.data)
    if vn == 0.0:
        raise DegenerateInputError("cosine similarity against a zero vector")
    if np.any(rn == 0.0):
        raise DegenerateInputError("cosine similarity of a zero row")
    c = (mat.data @ vec.data) / (rn * vn)

    def vjp(g):
        gm = (g / (rn * vn))[:, None] * vec.data - (g * c / rn**2)[:, None] * mat.data
        gv = mat.data.T @ (g / (rn * vn)) - vec.data * float(np.sum(g * c)) / vn**2
        return (gm, gv)

    return _result(c, (mat, vec), vjp)


def masked_log_prob(
    logits: Tensor, mask: np.ndarray, temperature: float, index: int
) -> Tensor:
    """log p(index) under softmax(logits/T) restricted to unmasked entries.

    `mask` is boolean with True marking ineligible candidates. Gradient
    flows only into unmasked logits.
    """
    if temperature <= 0.0:
        raise ParameterError(f"temperature must be > 0, got {temperature}")
    mask = np.asarray(mask, dtype=bool)
    if logits.data.ndim != 1 or mask.shape != logits.shape:
        raise DimensionError("masked_log_prob: logits and mask must be same-length 1-D")
    if mask.all():
        raise ExhaustedPoolError("every candidate is masked")
    if mask[index]:
        raise ContractError(f"index {index} is masked")
    z = logits.data / temperature
    zu = np.where(mask, -np.inf, z)
    zmax = np.max(zu)
    lse = zmax + np.log(np.sum(np.exp(zu - zmax)))
    lp = z[index] - lse

    def vjp(g):
        p = np.exp(zu - lse)
        p[mask] = 0.0
        gz = -p
        gz[index] += 1.0
        return (float(g) * gz / temperature,)

    return _result(np.array(lp), (logits,), vjp)


def stack_scalars(values: list[Tensor]) -> Tensor:
    """Pack scalar tensors into a 1-D tensor (used to build logit vectors)."""
    if any(v.data.ndim != 0 for v in values):
        raise DimensionError("stack_scalars expects 0-D tensors")
    out = np.array([v.data for v in values], dtype=np.float64)
    return _result(
        out, tuple(values), lambda g: tuple(np.asarray(g[i]) for i in range(len(values)))
    )
