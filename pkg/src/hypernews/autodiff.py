"""Small reverse-mode differentiation engine over dense 2-D float64 arrays.

Only the operations the detector needs are provided. Every forward op checks
its output for NaN/Inf and raises ``NonFiniteValue`` on violation.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BatchTooSmall, EmptyGroup, NonFiniteValue, ShapeMismatch


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, values, requires_grad=False, name=None):
        v = np.array(values, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got {v.ndim}-D")
        self.values = v
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def item(self) -> float:
        return float(self.values[0, 0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def backward(self):
        """Backpropagate from a 1x1 tensor."""
        if self.shape != (1, 1):
            raise ShapeMismatch("backward() needs a scalar (1x1) tensor")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones((1, 1))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _result(values, parents, backward) -> Tensor:
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue("non-finite value produced in forward pass")
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- linear algebra ----------------------------------------------------------

def matmul(A: Tensor, B: Tensor) -> Tensor:
    if A.shape[1] != B.shape[0]:
        raise ShapeMismatch(f"matmul inner dimensions differ: {A.shape} @ {B.shape}")

    def backward(g):
        if A.requires_grad:
            A._accumulate(g @ B.values.T)
        if B.requires_grad:
            B._accumulate(A.values.T @ g)

    return _result(A.values @ B.values, (A, B), backward)


def transpose(A: Tensor) -> Tensor:
    def backward(g):
        A._accumulate(g.T)

    return _result(np.ascontiguousarray(A.values.T), (A,), backward)


def add(A: Tensor, B: Tensor) -> Tensor:
    if A.shape != B.shape:
        raise ShapeMismatch(f"add shapes differ: {A.shape} vs {B.shape}")

    def backward(g):
        if A.requires_grad:
            A._accumulate(g)
        if B.requires_grad:
            B._accumulate(g)

    return _result(A.values + B.values, (A, B), backward)


def scale(A: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        A._accumulate(c * g)

    return _result(c * A.values, (A,), backward)


def affine(X: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """``X @ W + 1 b^T`` with ``b`` stored as a 1 x c row."""
    if X.shape[1] != W.shape[0] or b.shape != (1, W.shape[1]):
        raise ShapeMismatch(f"affine shapes disagree: X{X.shape} W{W.shape} b{b.shape}")

    def backward(g):
        if X.requires_grad:
            X._accumulate(g @ W.values.T)
        if W.requires_grad:
            W._accumulate(X.values.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0, keepdims=True))

    return _result(X.values @ W.values + b.values, (X, W, b), backward)


def concat_cols(A: Tensor, B: Tensor) -> Tensor:
    if A.shape[0] != B.shape[0]:
        raise ShapeMismatch(f"concat row counts differ: {A.shape} vs {B.shape}")
    k = A.shape[1]

    def backward(g):
        if A.requires_grad:
            A._accumulate(g[:, :k])
        if B.requires_grad:
            B._accumulate(g[:, k:])

    return _result(np.hstack([A.values, B.values]), (A, B), backward)


def take_rows(A: Tensor, rows) -> Tensor:
    rows = np.asarray(rows, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(A.values)
        np.add.at(full, rows, g)
        A._accumulate(full)

    return _result(A.values[rows], (A,), backward)


# -- elementwise -------------------------------------------------------------

def relu(X: Tensor) -> Tensor:
    mask = X.values > 0

    def backward(g):
        X._accumulate(g * mask)

    return _result(np.where(mask, X.values, 0.0), (X,), backward)


def sigmoid(X: Tensor) -> Tensor:
    x = X.values
    # split branches keep exp() from overflowing
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)

    def backward(g):
        X._accumulate(g * s * (1.0 - s))

    return _result(s, (X,), backward)


def l2_normalize_rows(X: Tensor, eps: float = 1e-12) -> Tensor:
    norms = np.sqrt((X.values ** 2).sum(axis=1, keepdims=True))
    norms = np.maximum(norms, eps)
    Y = X.values / norms

    def backward(g):
        dot = (g * Y).sum(axis=1, keepdims=True)
        X._accumulate((g - Y * dot) / norms)

    return _result(Y, (X,), backward)


# -- pooling / propagation ---------------------------------------------------

def mean_pool_rows(Z: Tensor, groups: Sequence[Sequence[int]]) -> Tensor:
    """Row ``i`` of the result is the mean of the rows of ``Z`` in ``groups[i]``."""
    m = Z.shape[0]
    sizes = np.array([len(g) for g in groups], dtype=np.int64)
    if np.any(sizes == 0):
        raise EmptyGroup(f"group {int(np.flatnonzero(sizes == 0)[0])} is empty")
    members = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups]) if len(groups) else np.zeros(0, np.int64)
    if members.size and (members.min() < 0 or members.max() >= m):
        raise ShapeMismatch(f"group index out of range for {m} rows")
    owner = np.repeat(np.arange(len(groups)), sizes)
    inv = 1.0 / sizes
    P = sp.csr_matrix((np.repeat(inv, sizes), (owner, members)), shape=(len(groups), m))

    def backward(g):
        Z._accumulate(P.T @ g)

    return _result(P @ Z.values, (Z,), backward)


def propagate(op, Z: Tensor, w: Tensor) -> Tensor:
    """``S(w) @ Z`` for a ``PropagationOperator`` with edge weights from ``w`` (1 x t)."""
    if Z.shape[0] != op.node_count:
        raise ShapeMismatch(f"propagate expects {op.node_count} rows, got {Z.shape[0]}")
    if w.shape != (1, op.edge_count):
        raise ShapeMismatch(f"edge weights must be 1 x {op.edge_count}, got {w.shape}")
    wv = w.values[0]
    CZ = op.C @ Z.values
    out = op.B @ (wv[:, None] * CZ)

    def backward(g):
        BtG = op.B.T @ g
        if Z.requires_grad:
            Z._accumulate(op.C.T @ (wv[:, None] * BtG))
        if w.requires_grad:
            w._accumulate((BtG * CZ).sum(axis=1)[None, :])

    return _result(np.asarray(out), (Z, w), backward)


# -- losses ------------------------------------------------------------------

def _log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(x: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(np.asarray(x, dtype=np.float64)))


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over rows of ``-log softmax(logits)[label]``."""
    y = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if y.shape != (n,):
        raise ShapeMismatch(f"expected {n} labels, got shape {y.shape}")
    if n == 0:
        raise ShapeMismatch("cross-entropy over zero rows")
    if np.any((y < 0) | (y >= k)):
        raise ValueError("label outside the logit columns")
    logp = _log_softmax(logits.values)
    rows = np.arange(n)
    loss = -logp[rows, y].sum() / n

    def backward(g):
        grad = np.exp(logp)
        grad[rows, y] -= 1.0
        logits._accumulate(g[0, 0] * grad / n)

    return _result(np.array([[loss]]), (logits,), backward)


def mse_loss(X: Tensor, X_hat: Tensor) -> Tensor:
    """Sum of squared differences divided by the row count."""
    if X.shape != X_hat.shape:
        raise ShapeMismatch(f"mse shapes differ: {X.shape} vs {X_hat.shape}")
    m = X.shape[0]
    diff = X_hat.values - X.values
    loss = (diff * diff).sum() / m

    def backward(g):
        c = g[0, 0] * 2.0 / m
        if X_hat.requires_grad:
            X_hat._accumulate(c * diff)
        if X.requires_grad:
            X._accumulate(-c * diff)

    return _result(np.array([[loss]]), (X, X_hat), backward)


def info_nce(A: Tensor, B: Tensor, temperature: float = 0.5) -> Tensor:
    """Symmetric contrastive loss between paired rows of ``A`` and ``B``.

    Rows are L2-normalized, ``M = A' B'^T / tau`` and the loss averages the
    row-wise and column-wise cross-entropies against the diagonal. Lower is
    better: minimizing it maximizes the InfoNCE bound on mutual information.
    """
    if A.shape != B.shape:
        raise ShapeMismatch(f"info_nce shapes differ: {A.shape} vs {B.shape}")
    n = A.shape[0]
    if n < 2:
        raise BatchTooSmall(f"info_nce needs at least 2 pairs, got {n}")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    An = l2_normalize_rows(A)
    Bn = l2_normalize_rows(B)
    M = scale(matmul(An, transpose(Bn)), 1.0 / temperature)
    targets = np.arange(n)
    forward = softmax_cross_entropy(M, targets)
    reverse = softmax_cross_entropy(transpose(M), targets)
    return scale(add(forward, reverse), 0.5)


def weighted_sum(terms: Iterable[tuple[float, Tensor]]) -> Tensor:
    terms = list(terms)
    total = scale(terms[0][1], terms[0][0])
    for c, t in terms[1:]:
        total = add(total, scale(t, c))
    return total


# -- optimization ------------------------------------------------------------

class Adam:
    """Adam with bias correction; parameters are updated in place."""

    def __init__(self, params: Sequence[Tensor], lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, grads: Optional[Sequence[np.ndarray]] = None):
        if grads is None:
            grads = [p.grad if p.grad is not None else np.zeros_like(p.values) for p in self.params]
        if len(grads) != len(self.params):
            raise ShapeMismatch("one gradient per parameter is required")
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.values.shape:
                raise ShapeMismatch(f"gradient shape {g.shape} does not match parameter {p.values.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.values -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: Adam) -> Sequence[Tensor]:
    state.step(grads)
    return params


# -- gradient checking -------------------------------------------------------

def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5, floor: float = 1e-6) -> float:
    """Max per-coordinate relative error between backprop and central differences.

    The denominator is ``max(|analytic|, |numeric|, floor)`` so coordinates
    with vanishing gradient are compared in absolute terms.
    """
    if not 1e-7 <= h <= 1e-4:
        raise ValueError("step h must lie in [1e-7, 1e-4]")
    x0 = np.array(x.values if isinstance(x, Tensor) else x, dtype=np.float64)
    if x0.ndim < 2:
        x0 = x0.reshape(1, -1) if x0.ndim == 1 else x0.reshape(1, 1)
    xt = Tensor(x0.copy(), requires_grad=True)
    f(xt).backward()
    analytic = xt.grad if xt.grad is not None else np.zeros_like(x0)
    numeric = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        xp = x0.copy()
        xp[idx] += h
        xm = x0.copy()
        xm[idx] -= h
        numeric[idx] = (f(Tensor(xp)).item() - f(Tensor(xm)).item()) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
