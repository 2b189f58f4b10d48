"""Encoder building blocks: parameter containers, bi-LSTM encoding, and
matching no-gradient forward paths for cached / evaluation passes.

The graph path and the numpy path share the same gate math and operation
order, so their outputs agree bitwise; a test pins that equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autograd as ag
from .autograd import Node

HIDDEN_SIZE = 64
ENC_SIZE = 2 * HIDDEN_SIZE


class EmptySequence(ValueError):
    """An encoder was asked to encode a zero-length token sequence."""


def init_weight(rng: np.random.Generator, d_out: int, d_in: int) -> Node:
    bound = 1.0 / np.sqrt(d_in)
    return Node(rng.uniform(-bound, bound, size=(d_out, d_in)))


@dataclass
class LinearParams:
    w: Node  # (d_out, d_in)
    b: Node  # (d_out,)

    @property
    def d_out(self) -> int:
        return self.w.data.shape[0]

    @property
    def d_in(self) -> int:
        return self.w.data.shape[1]

    def nodes(self) -> list[Node]:
        return [self.w, self.b]


def init_linear(rng: np.random.Generator, d_out: int, d_in: int) -> LinearParams:
    return LinearParams(w=init_weight(rng, d_out, d_in), b=Node(np.zeros(d_out)))


@dataclass
class LstmDirection:
    w_ih: Node  # (4h, d_in)
    w_hh: Node  # (4h, h)
    b: Node     # (4h,)


@dataclass
class LstmParams:
    """Both directions of a bi-LSTM with hidden size 64 per direction."""

    fw: LstmDirection
    bw: LstmDirection
    hidden: int = HIDDEN_SIZE

    def nodes(self) -> list[Node]:
        return [self.fw.w_ih, self.fw.w_hh, self.fw.b,
                self.bw.w_ih, self.bw.w_hh, self.bw.b]

    def copy_data(self) -> "LstmParams":
        """Deep copy with fresh leaf nodes (used to freeze a snapshot)."""
        def cp(d: LstmDirection) -> LstmDirection:
            return LstmDirection(Node(d.w_ih.data.copy()),
                                 Node(d.w_hh.data.copy()),
                                 Node(d.b.data.copy()))
        return LstmParams(fw=cp(self.fw), bw=cp(self.bw), hidden=self.hidden)


def init_lstm(rng: np.random.Generator, d_in: int, hidden: int = HIDDEN_SIZE) -> LstmParams:
    def direction() -> LstmDirection:
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias
        return LstmDirection(
            w_ih=init_weight(rng, 4 * hidden, d_in),
            w_hh=init_weight(rng, 4 * hidden, hidden),
            b=Node(b),
        )
    return LstmParams(fw=direction(), bw=direction(), hidden=hidden)


@dataclass
class BiLstmState:
    """Final (h, c) of both directions; carried between chained encodes."""

    h_fw: ag.ArrayLike
    c_fw: ag.ArrayLike
    h_bw: ag.ArrayLike
    c_bw: ag.ArrayLike

    def data(self) -> "BiLstmState":
        return BiLstmState(*(ag.value(v) for v in (self.h_fw, self.c_fw, self.h_bw, self.c_bw)))


def zero_state(hidden: int = HIDDEN_SIZE) -> BiLstmState:
    z = lambda: np.zeros(hidden)
    return BiLstmState(z(), z(), z(), z())


def bilstm_encode(seq: np.ndarray, params: LstmParams, state0: Optional[BiLstmState] = None):
    """Encode an (L, d_in) embedded sequence, building the gradient graph.

    Returns (o, state) where o is the concatenation of both directions'
    final hidden states (128-dim) and state carries (h, c) of both
    directions for chained encoding.  A missing state0 means zero
    initialization.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptySequence("bilstm_encode requires a non-empty (L, d_in) sequence")
    if state0 is None:
        state0 = zero_state(params.hidden)

    h_f, c_f = state0.h_fw, state0.c_fw
    for t in range(seq.shape[0]):
        h_f, c_f = ag.lstm_cell(seq[t], h_f, c_f, params.fw.w_ih, params.fw.w_hh, params.fw.b)

    h_b, c_b = state0.h_bw, state0.c_bw
    for t in range(seq.shape[0] - 1, -1, -1):
        h_b, c_b = ag.lstm_cell(seq[t], h_b, c_b, params.bw.w_ih, params.bw.w_hh, params.bw.b)

    o = ag.concat([h_f, h_b])
    return o, BiLstmState(h_f, c_f, h_b, c_b)


def bilstm_chain_batch(chains: Sequence[Sequence[np.ndarray]],
                       params: LstmParams) -> list:
    """Graph-mode encode of many segment chains in lockstep.

    chains[i] is one item's ordered list of embedded (L, d_in) segments;
    every item must have the same segment count.  Each segment continues
    from the previous one's final (h, c), exactly as repeated
    bilstm_encode calls with a carried state, and short segments ride in
    the padded batch behind a keep-mask.  Returns the per-item terminal
    encodings as 1-D nodes.
    """
    n = len(chains)
    if n == 0:
        return []
    n_seg = len(chains[0])
    if any(len(ch) != n_seg for ch in chains):
        raise ValueError("bilstm_chain_batch requires equal segment counts")
    if n_seg == 0:
        raise EmptySequence("bilstm_chain_batch requires at least one segment")
    hd = params.hidden
    h_f = c_f = h_b = c_b = np.zeros((n, hd))
    for k in range(n_seg):
        segs = [np.asarray(ch[k], dtype=np.float64) for ch in chains]
        lengths = np.array([s.shape[0] for s in segs], dtype=np.int64)
        if np.any(lengths == 0):
            raise EmptySequence("bilstm_chain_batch requires non-empty segments")
        lmax = int(lengths.max())
        d_in = segs[0].shape[1]
        fw_in = np.zeros((n, lmax, d_in))
        bw_in = np.zeros((n, lmax, d_in))
        for i, s in enumerate(segs):
            fw_in[i, :lengths[i]] = s
            bw_in[i, :lengths[i]] = s[::-1]
        for t in range(lmax):
            m = (lengths > t).astype(np.float64)
            h_f, c_f = ag.lstm_cell_batch(fw_in[:, t], h_f, c_f, params.fw.w_ih,
                                          params.fw.w_hh, params.fw.b, m)
            h_b, c_b = ag.lstm_cell_batch(bw_in[:, t], h_b, c_b, params.bw.w_ih,
                                          params.bw.w_hh, params.bw.b, m)
    return [ag.concat([ag.take_row(h_f, i), ag.take_row(h_b, i)]) for i in range(n)]


# ---------------------------------------------------------------------------
# no-grad forward paths
# ---------------------------------------------------------------------------


def _cell_np(x, h, c, w_ih, w_hh, b, hidden):
    z = w_ih @ x + w_hh @ h + b
    gi = ag.sigmoid_np(z[:hidden])
    gf = ag.sigmoid_np(z[hidden:2 * hidden])
    gg = np.tanh(z[2 * hidden:3 * hidden])
    go = ag.sigmoid_np(z[3 * hidden:])
    c_new = gf * c + gi * gg
    h_new = go * np.tanh(c_new)
    return h_new, c_new


def bilstm_forward_np(seq: np.ndarray, params: LstmParams, state0: Optional[BiLstmState] = None):
    """No-grad twin of bilstm_encode; returns (o, state) as plain arrays."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptySequence("bilstm_forward_np requires a non-empty (L, d_in) sequence")
    hd = params.hidden
    if state0 is None:
        state0 = zero_state(hd)
    state0 = state0.data()

    fw, bw = params.fw, params.bw
    h_f, c_f = state0.h_fw, state0.c_fw
    for t in range(seq.shape[0]):
        h_f, c_f = _cell_np(seq[t], h_f, c_f, fw.w_ih.data, fw.w_hh.data, fw.b.data, hd)
    h_b, c_b = state0.h_bw, state0.c_bw
    for t in range(seq.shape[0] - 1, -1, -1):
        h_b, c_b = _cell_np(seq[t], h_b, c_b, bw.w_ih.data, bw.w_hh.data, bw.b.data, hd)
    return np.concatenate([h_f, h_b]), BiLstmState(h_f, c_f, h_b, c_b)


def _direction_batch_np(seqs: np.ndarray, lengths: np.ndarray, d: LstmDirection, hidden: int) -> np.ndarray:
    n, lmax, _ = seqs.shape
    gates_in = seqs @ d.w_ih.data.T  # (n, lmax, 4h), one matmul for all steps
    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    for t in range(lmax):
        active = (lengths > t)[:, None]
        z = gates_in[:, t, :] + h @ d.w_hh.data.T + d.b.data
        gi = ag.sigmoid_np(z[:, :hidden])
        gf = ag.sigmoid_np(z[:, hidden:2 * hidden])
        gg = np.tanh(z[:, 2 * hidden:3 * hidden])
        go = ag.sigmoid_np(z[:, 3 * hidden:])
        c_new = gf * c + gi * gg
        h_new = go * np.tanh(c_new)
        h = np.where(active, h_new, h)
        c = np.where(active, c_new, c)
    return h


def bilstm_batch_np(seqs: Sequence[np.ndarray], params: LstmParams) -> np.ndarray:
    """Encode many sequences at once with zero initial state.

    Returns an (n, 128) matrix whose row order matches the input order.
    Sequences are left-padded into one array; padding steps are masked so
    each row equals the unbatched encoding of that sequence.
    """
    n = len(seqs)
    if n == 0:
        return np.zeros((0, ENC_SIZE))
    lengths = np.array([s.shape[0] for s in seqs], dtype=np.int64)
    if np.any(lengths == 0):
        raise EmptySequence("bilstm_batch_np requires non-empty sequences")
    lmax = int(lengths.max())
    d_in = seqs[0].shape[1]
    fw_in = np.zeros((n, lmax, d_in))
    bw_in = np.zeros((n, lmax, d_in))
    for i, s in enumerate(seqs):
        fw_in[i, :lengths[i]] = s
        bw_in[i, :lengths[i]] = s[::-1]
    h_f = _direction_batch_np(fw_in, lengths, params.fw, params.hidden)
    h_b = _direction_batch_np(bw_in, lengths, params.bw, params.hidden)
    return np.concatenate([h_f, h_b], axis=1)


def linear_np(x: np.ndarray, p: LinearParams) -> np.ndarray:
    if x.ndim == 1:
        return p.w.data @ x + p.b.data
    return x @ p.w.data.T + p.b.data
