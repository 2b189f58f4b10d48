"""Reverse-mode automatic differentiation over dense float64 arrays.

A small tape-free engine: every operation returns a `Node` holding the
forward value plus a closure that routes incoming gradients to the node's
parents.  Gradients accumulate on leaves; `backward` runs one reverse
topological sweep from a scalar root.

Operations accept plain numpy arrays (or scalars) wherever a `Node` is
allowed; array operands are treated as constants and receive no gradient.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Union

import numpy as np

ArrayLike = Union["Node", np.ndarray, float, int, list]

CE_CLAMP = 1e-7


class NumericalFault(ArithmeticError):
    """A forward value came out NaN or infinite."""


class Node:
    """One value in the differentiation graph."""

    __slots__ = ("data", "grad", "parents", "_backward", "_done")

    def __init__(self, data, parents: tuple = (), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self._done = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Node(shape={self.data.shape})"


def value(x: ArrayLike) -> np.ndarray:
    """Forward value of a Node or array-like."""
    if isinstance(x, Node):
        return x.data
    return np.asarray(x, dtype=np.float64)


def grad_of(node: Node) -> np.ndarray:
    """Accumulated gradient; zeros if the node was unreachable from the root."""
    if node.grad is None:
        return np.zeros_like(node.data)
    return node.grad


def zero_grads(nodes: Iterable[Node]) -> None:
    for n in nodes:
        n.grad = None


def _parents(*xs) -> tuple:
    return tuple(x for x in xs if isinstance(x, Node))


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericalFault(f"non-finite values in output of {op}")
    return arr


def _acc_slice(p: Node, rows: slice, g: np.ndarray) -> None:
    # Accumulate into a row slice without materializing a full zero matrix.
    if p.grad is None:
        p.grad = np.zeros_like(p.data)
    p.grad[rows] += g


def backward(root: Node) -> None:
    """Reverse topological gradient accumulation from a scalar root.

    Raises on a non-scalar root, a non-finite root, or a second call on
    the same root (the graph is consumed once; rebuild it to differentiate
    again).
    """
    if root.data.size != 1:
        raise ValueError(f"backward requires a scalar root, got shape {root.data.shape}")
    if root._done:
        raise RuntimeError("backward already ran on this root; rebuild the graph first")
    if not np.all(np.isfinite(root.data)):
        raise NumericalFault("backward called on a non-finite root")

    topo: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    root._done = True
    root.accumulate(np.ones_like(root.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------


def add(a: ArrayLike, b: ArrayLike) -> Node:
    av, bv = value(a), value(b)
    if av.shape != bv.shape:
        raise ValueError(f"add shape mismatch: {av.shape} vs {bv.shape}")
    out = Node(av + bv, _parents(a, b))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g)
        if isinstance(b, Node):
            b.accumulate(g)

    out._backward = bwd
    return out


def sub(a: ArrayLike, b: ArrayLike) -> Node:
    return add(a, scale(b, -1.0) if isinstance(b, Node) else -value(b))


def mul(a: ArrayLike, b: ArrayLike) -> Node:
    av, bv = value(a), value(b)
    if av.shape != bv.shape:
        raise ValueError(f"mul shape mismatch: {av.shape} vs {bv.shape}")
    out = Node(av * bv, _parents(a, b))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g * bv)
        if isinstance(b, Node):
            b.accumulate(g * av)

    out._backward = bwd
    return out


def scale(a: ArrayLike, s: float) -> Node:
    av = value(a)
    s = float(s)
    out = Node(av * s, _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g * s)

    out._backward = bwd
    return out


def nsum(xs: Sequence[ArrayLike]) -> Node:
    """Elementwise sum of same-shaped values, accumulated in list order."""
    if not xs:
        raise ValueError("nsum of an empty sequence")
    vals = [value(x) for x in xs]
    acc = vals[0].copy()
    for v in vals[1:]:
        if v.shape != acc.shape:
            raise ValueError(f"nsum shape mismatch: {v.shape} vs {acc.shape}")
        acc += v
    out = Node(acc, _parents(*xs))

    def bwd(g):
        for x in xs:
            if isinstance(x, Node):
                x.accumulate(g)

    out._backward = bwd
    return out


def concat(xs: Sequence[ArrayLike]) -> Node:
    """Concatenate 1-D values."""
    vals = [value(x) for x in xs]
    for v in vals:
        if v.ndim != 1:
            raise ValueError("concat expects 1-D values")
    offsets = np.cumsum([0] + [v.shape[0] for v in vals])
    out = Node(np.concatenate(vals), _parents(*xs))

    def bwd(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            if isinstance(x, Node):
                x.accumulate(g[lo:hi])

    out._backward = bwd
    return out


def reshape(a: ArrayLike, shape: tuple) -> Node:
    av = value(a)
    out = Node(av.reshape(shape), _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g.reshape(av.shape))

    out._backward = bwd
    return out


def sum_all(a: ArrayLike) -> Node:
    av = value(a)
    out = Node(np.sum(av), _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(np.full_like(av, float(g)))

    out._backward = bwd
    return out


def take_row(a: ArrayLike, index: int) -> Node:
    """Pick one row of a 2-D value as a 1-D node."""
    av = value(a)
    if av.ndim != 2:
        raise ValueError("take_row expects a 2-D value")
    index = int(index)
    out = Node(np.array(av[index]), _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            gv = np.zeros_like(av)
            gv[index] = g
            a.accumulate(gv)

    out._backward = bwd
    return out


def gather(a: ArrayLike, index: int) -> Node:
    """Pick one entry of a 1-D value as a scalar."""
    av = value(a)
    if av.ndim != 1:
        raise ValueError("gather expects a 1-D value")
    index = int(index)
    out = Node(av[index], _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            gv = np.zeros_like(av)
            gv[index] = float(g)
            a.accumulate(gv)

    out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function on arrays."""
    # exp(-|x|) never overflows and equals exp(-x) or exp(x) exactly on
    # the branch where each is used
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: ArrayLike) -> Node:
    av = value(a)
    ov = sigmoid_np(av)
    out = Node(ov, _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g * ov * (1.0 - ov))

    out._backward = bwd
    return out


def tanh(a: ArrayLike) -> Node:
    av = value(a)
    ov = np.tanh(av)
    out = Node(ov, _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g * (1.0 - ov * ov))

    out._backward = bwd
    return out


def softmax_np(x: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax over a 1-D array."""
    e = np.exp(x - np.max(x))
    return e / np.sum(e)


def softmax(a: ArrayLike) -> Node:
    av = value(a)
    if av.ndim != 1:
        raise ValueError("softmax expects a 1-D value")
    ov = _check_finite(softmax_np(av), "softmax")
    out = Node(ov, _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(ov * (g - np.dot(g, ov)))

    out._backward = bwd
    return out


def log(a: ArrayLike) -> Node:
    av = value(a)
    ov = _check_finite(np.log(av), "log")
    out = Node(ov, _parents(a))

    def bwd(g):
        if isinstance(a, Node):
            a.accumulate(g / av)

    out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: ArrayLike, b: ArrayLike) -> Node:
    av, bv = value(a), value(b)
    ov = _check_finite(av @ bv, "matmul")
    out = Node(ov, _parents(a, b))

    def bwd(g):
        if av.ndim == 2 and bv.ndim == 1:
            if isinstance(a, Node):
                a.accumulate(g[:, None] * bv)
            if isinstance(b, Node):
                b.accumulate(av.T @ g)
        elif av.ndim == 1 and bv.ndim == 2:
            if isinstance(a, Node):
                a.accumulate(bv @ g)
            if isinstance(b, Node):
                b.accumulate(av[:, None] * g)
        else:
            if isinstance(a, Node):
                a.accumulate(g @ bv.T)
            if isinstance(b, Node):
                b.accumulate(av.T @ g)

    out._backward = bwd
    return out


def linear(x: ArrayLike, w: ArrayLike, b: ArrayLike) -> Node:
    """Affine map. Vector input: W @ x + b; matrix input (rows as items): X @ W.T + b."""
    xv, wv, bv = value(x), value(w), value(b)
    if xv.ndim == 1:
        if wv.shape[1] != xv.shape[0]:
            raise ValueError(f"linear shape mismatch: W {wv.shape} vs x {xv.shape}")
        ov = wv @ xv + bv
    elif xv.ndim == 2:
        if wv.shape[1] != xv.shape[1]:
            raise ValueError(f"linear shape mismatch: W {wv.shape} vs X {xv.shape}")
        ov = xv @ wv.T + bv
    else:
        raise ValueError("linear expects a 1-D or 2-D input")
    ov = _check_finite(ov, "linear")
    out = Node(ov, _parents(x, w, b))

    def bwd(g):
        if xv.ndim == 1:
            if isinstance(w, Node):
                w.accumulate(g[:, None] * xv)
            if isinstance(b, Node):
                b.accumulate(g)
            if isinstance(x, Node):
                x.accumulate(wv.T @ g)
        else:
            if isinstance(w, Node):
                w.accumulate(g.T @ xv)
            if isinstance(b, Node):
                b.accumulate(g.sum(axis=0))
            if isinstance(x, Node):
                x.accumulate(g @ wv)

    out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def cross_entropy_np(pred: np.ndarray, label: int) -> float:
    """-ln pred[label] with the prediction clamped to [CE_CLAMP, 1 - CE_CLAMP]."""
    p = float(np.clip(pred[int(label)], CE_CLAMP, 1.0 - CE_CLAMP))
    return -np.log(p)


def cross_entropy(pred: ArrayLike, label: int) -> Node:
    pv = value(pred)
    if pv.ndim != 1:
        raise ValueError("cross_entropy expects a 1-D distribution")
    label = int(label)
    if not 0 <= label < pv.shape[0]:
        raise ValueError(f"label {label} out of range for distribution of size {pv.shape[0]}")
    raw = pv[label]
    clamped = float(np.clip(raw, CE_CLAMP, 1.0 - CE_CLAMP))
    out = Node(-np.log(clamped), _parents(pred))

    def bwd(g):
        if isinstance(pred, Node) and CE_CLAMP < raw < 1.0 - CE_CLAMP:
            gv = np.zeros_like(pv)
            gv[label] = -float(g) / clamped
            pred.accumulate(gv)

    out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# fused LSTM cell
# ---------------------------------------------------------------------------


def lstm_cell(x: ArrayLike, h: ArrayLike, c: ArrayLike, w_ih: ArrayLike, w_hh: ArrayLike, b: ArrayLike) -> tuple:
    """One LSTM step with gate order [input, forget, candidate, output].

    i, f, o are sigmoid gates, g the tanh candidate; c' = f*c + i*g and
    h' = o*tanh(c').  Returns (h', c') as two nodes sharing saved
    activations; the hand-derived backward is finite-difference checked in
    the test suite.
    """
    xv, hv, cv = value(x), value(h), value(c)
    wihv, whhv, bv = value(w_ih), value(w_hh), value(b)
    hd = hv.shape[0]
    z = wihv @ xv + whhv @ hv + bv
    gi = sigmoid_np(z[:hd])
    gf = sigmoid_np(z[hd:2 * hd])
    gg = np.tanh(z[2 * hd:3 * hd])
    go = sigmoid_np(z[3 * hd:])
    c_new = gf * cv + gi * gg
    tc = np.tanh(c_new)
    h_new = go * tc
    _check_finite(c_new, "lstm_cell")
    _check_finite(h_new, "lstm_cell")

    ifg = slice(0, 3 * hd)
    o_rows = slice(3 * hd, 4 * hd)

    c_out = Node(c_new, _parents(x, h, c, w_ih, w_hh, b))
    h_out = Node(h_new, (c_out,) + _parents(x, h, w_ih, w_hh, b))

    def bwd_h(g):
        dz_o = g * tc * go * (1.0 - go)
        c_out.accumulate(g * go * (1.0 - tc * tc))
        if isinstance(w_ih, Node):
            _acc_slice(w_ih, o_rows, dz_o[:, None] * xv)
        if isinstance(w_hh, Node):
            _acc_slice(w_hh, o_rows, dz_o[:, None] * hv)
        if isinstance(b, Node):
            _acc_slice(b, o_rows, dz_o)
        if isinstance(h, Node):
            h.accumulate(whhv[o_rows].T @ dz_o)
        if isinstance(x, Node):
            x.accumulate(wihv[o_rows].T @ dz_o)

    def bwd_c(g):
        dz_i = g * gg * gi * (1.0 - gi)
        dz_f = g * cv * gf * (1.0 - gf)
        dz_g = g * gi * (1.0 - gg * gg)
        dz = np.concatenate([dz_i, dz_f, dz_g])
        if isinstance(c, Node):
            c.accumulate(g * gf)
        if isinstance(w_ih, Node):
            _acc_slice(w_ih, ifg, dz[:, None] * xv)
        if isinstance(w_hh, Node):
            _acc_slice(w_hh, ifg, dz[:, None] * hv)
        if isinstance(b, Node):
            _acc_slice(b, ifg, dz)
        if isinstance(h, Node):
            h.accumulate(whhv[ifg].T @ dz)
        if isinstance(x, Node):
            x.accumulate(wihv[ifg].T @ dz)

    h_out._backward = bwd_h
    c_out._backward = bwd_c
    return h_out, c_out


def lstm_cell_batch(x: ArrayLike, h: ArrayLike, c: ArrayLike, w_ih: ArrayLike,
                    w_hh: ArrayLike, b: ArrayLike, mask: np.ndarray) -> tuple:
    """Row-parallel LSTM step over a batch, gate math identical to lstm_cell.

    x is (B, d_in), h and c are (B, hidden).  mask is a plain (B,) or
    (B, 1) array of {0, 1}: rows with 0 pass their (h, c) through exactly,
    which is how shorter sequences ride along in a padded batch.  Returns
    (h', c') nodes of shape (B, hidden).
    """
    xv, hv, cv = value(x), value(h), value(c)
    wihv, whhv, bv = value(w_ih), value(w_hh), value(b)
    m = np.asarray(mask, dtype=np.float64).reshape(-1, 1)
    hd = hv.shape[1]
    z = xv @ wihv.T + hv @ whhv.T + bv
    gi = sigmoid_np(z[:, :hd])
    gf = sigmoid_np(z[:, hd:2 * hd])
    gg = np.tanh(z[:, 2 * hd:3 * hd])
    go = sigmoid_np(z[:, 3 * hd:])
    c_mid = gf * cv + gi * gg
    tc = np.tanh(c_mid)
    c_new = m * c_mid + (1.0 - m) * cv
    h_new = m * (go * tc) + (1.0 - m) * hv
    _check_finite(c_new, "lstm_cell_batch")
    _check_finite(h_new, "lstm_cell_batch")

    ifg = slice(0, 3 * hd)
    o_rows = slice(3 * hd, 4 * hd)

    c_out = Node(c_new, _parents(x, h, c, w_ih, w_hh, b))
    h_out = Node(h_new, (c_out,) + _parents(x, h, w_ih, w_hh, b))

    def bwd_h(g):
        ga = g * m
        dz_o = ga * tc * go * (1.0 - go)
        c_out.accumulate(ga * go * (1.0 - tc * tc))
        if isinstance(w_ih, Node):
            _acc_slice(w_ih, o_rows, dz_o.T @ xv)
        if isinstance(w_hh, Node):
            _acc_slice(w_hh, o_rows, dz_o.T @ hv)
        if isinstance(b, Node):
            _acc_slice(b, o_rows, dz_o.sum(axis=0))
        if isinstance(h, Node):
            h.accumulate(dz_o @ whhv[o_rows] + g * (1.0 - m))
        if isinstance(x, Node):
            x.accumulate(dz_o @ wihv[o_rows])

    def bwd_c(g):
        gc = g * m
        dz_i = gc * gg * gi * (1.0 - gi)
        dz_f = gc * cv * gf * (1.0 - gf)
        dz_g = gc * gi * (1.0 - gg * gg)
        dz = np.concatenate([dz_i, dz_f, dz_g], axis=1)
        if isinstance(c, Node):
            c.accumulate(gc * gf + g * (1.0 - m))
        if isinstance(w_ih, Node):
            _acc_slice(w_ih, ifg, dz.T @ xv)
        if isinstance(w_hh, Node):
            _acc_slice(w_hh, ifg, dz.T @ hv)
        if isinstance(b, Node):
            _acc_slice(b, ifg, dz.sum(axis=0))
        if isinstance(h, Node):
            h.accumulate(dz @ whhv[ifg])
        if isinstance(x, Node):
            x.accumulate(dz @ wihv[ifg])

    h_out._backward = bwd_h
    c_out._backward = bwd_c
    return h_out, c_out
