"""Three-branch classifier over a target post, its author history, and
retrieved similar posts.

Branch outputs:

* target branch: ``o_ta`` (128) from a bi-LSTM over the post, reduced to a
  2-d representation ``r_ta``.
* intra-user branch: per-history-post encodings through a frozen clone of
  the target encoder, linearly projected, summed, and squashed to the 64-d
  ``r_ia``.  With no history this is exactly the 0.5 vector.
* inter-user branch: a second bi-LSTM consumed once per selected similar
  post, carrying its hidden state across steps, reduced to the 64-d
  ``r_ie``.

A prior head classifies from ``r_ta || r_ia`` (66 -> 2) before any similar
post is read; the full head classifies from ``r_ie || r_ta || r_ia``
(130 -> 2) after the walk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .layers import (ENC_SIZE, BiLstmState, LinearParams, LstmParams,
                     bilstm_batch_np, bilstm_encode, bilstm_forward_np,
                     init_linear, init_lstm, linear_np, zero_state)
from .textio import EMB_DIM, Post, Vocab

R_TA_DIM = 2
R_IA_DIM = 64
R_IE_DIM = 64
PRIOR_IN = R_TA_DIM + R_IA_DIM
FULL_IN = R_IE_DIM + R_TA_DIM + R_IA_DIM
STATE_DIM = 3 * ENC_SIZE + R_IA_DIM


@dataclass
class ModelParams:
    vocab: Vocab
    embeddings: np.ndarray  # (V, EMB_DIM), frozen
    enc_target: LstmParams
    enc_history: LstmParams  # frozen clone of enc_target after pretraining
    enc_inter: LstmParams
    red_target: LinearParams  # 128 -> 2
    red_history: LinearParams  # 128 -> 64
    red_inter: LinearParams  # 128 -> 64
    head_prior: LinearParams  # 66 -> 2
    head_full: LinearParams  # 130 -> 2

    def linear_sections(self) -> dict[str, LinearParams]:
        return {"red_target": self.red_target, "red_history": self.red_history,
                "red_inter": self.red_inter, "head_prior": self.head_prior,
                "head_full": self.head_full}

    def lstm_sections(self) -> dict[str, LstmParams]:
        return {"enc_target": self.enc_target, "enc_history": self.enc_history,
                "enc_inter": self.enc_inter}


def init_model(vocab: Vocab, embeddings: np.ndarray, seed: int) -> ModelParams:
    if embeddings.shape != (len(vocab), EMB_DIM):
        raise ValueError(f"embedding shape {embeddings.shape} does not match "
                         f"vocab of {len(vocab)} and width {EMB_DIM}")
    rng = np.random.default_rng(seed)
    return ModelParams(
        vocab=vocab,
        embeddings=np.asarray(embeddings, dtype=np.float64),
        enc_target=init_lstm(rng, EMB_DIM),
        enc_history=init_lstm(rng, EMB_DIM),
        enc_inter=init_lstm(rng, EMB_DIM),
        red_target=init_linear(rng, R_TA_DIM, ENC_SIZE),
        red_history=init_linear(rng, R_IA_DIM, ENC_SIZE),
        red_inter=init_linear(rng, R_IE_DIM, ENC_SIZE),
        head_prior=init_linear(rng, 2, PRIOR_IN),
        head_full=init_linear(rng, 2, FULL_IN),
    )


def clone_into(src: LstmParams, dst: LstmParams) -> None:
    """Copy src weights into dst in place (used to refresh the frozen
    history encoder from the trained target encoder)."""
    for s, d in zip(src.nodes(), dst.nodes()):
        d.data = s.data.copy()


def embed(params: ModelParams, tokens: list[str]) -> np.ndarray:
    idx = params.vocab.encode(tokens)
    return params.embeddings[idx]


def encode_target(params: ModelParams, tokens: list[str]):
    """o_ta and the final recurrent state for a target post."""
    return bilstm_encode(embed(params, tokens), params.enc_target)


def target_representation(params: ModelParams, o_ta: ag.Node) -> ag.Node:
    return ag.linear(ag.sigmoid(o_ta), params.red_target.w, params.red_target.b)


def history_summary(params: ModelParams, history: list[Post],
                    max_history: int = 400) -> tuple[np.ndarray, int]:
    """Summed squashed history encodings and the post count.

    Posts are read in ascending id order (ids encode recency), kept to the
    most recent max_history, so any input permutation yields the same sum
    bit for bit.  The history encoder is frozen, making this summary a
    constant for the whole training run.
    """
    posts = sorted(history, key=lambda p: p.id)[-max_history:]
    posts = [p for p in posts if p.tokens]
    if not posts:
        return np.zeros(ENC_SIZE), 0
    seqs = [embed(params, p.tokens) for p in posts]
    encs = bilstm_batch_np(seqs, params.enc_history)
    return ag.sigmoid_np(encs).sum(axis=0), len(posts)


def intra_from_summary(params: ModelParams, summed: np.ndarray, count: int,
                       trainable: bool = False) -> ag.Node:
    """64-d intra-user representation from a history summary.

    The projection is linear, so summing projected per-post encodings
    equals one projection of the summed activations (bias scaled by the
    count).  No history gives exactly sigmoid(0) = the 0.5 vector.  Pass
    trainable=True to let gradient reach the projection layer; the encoder
    itself never receives gradient.
    """
    if count == 0:
        return ag.sigmoid(np.zeros(R_IA_DIM))
    w, b = params.red_history.w, params.red_history.b
    if not trainable:
        w, b = w.data, b.data
    total = ag.add(ag.matmul(w, summed), ag.scale(b, float(count)))
    return ag.sigmoid(total)


def intra_representation(params: ModelParams, history: list[Post],
                         max_history: int = 400, trainable: bool = False) -> ag.Node:
    summed, count = history_summary(params, history, max_history)
    return intra_from_summary(params, summed, count, trainable)


def encode_pool(params: ModelParams, posts: list[Post]) -> np.ndarray:
    """Context encodings b(x_j) for candidate posts: the inter encoder from
    a zero state, gradient-free, one row per post."""
    seqs = [embed(params, p.tokens) for p in posts]
    return bilstm_batch_np(seqs, params.enc_inter)


def inter_step(params: ModelParams, tokens: list[str], carry: BiLstmState | None):
    """One step of the similar-post walk: encode tokens with the inter
    encoder starting from the carried state, return (o_ie, new state)."""
    return bilstm_encode(embed(params, tokens), params.enc_inter, state0=carry)


def inter_step_np(params: ModelParams, tokens: list[str], carry: BiLstmState | None):
    """No-grad twin of inter_step, for runs where the walk encoder is
    frozen and the carry chain is a constant."""
    return bilstm_forward_np(embed(params, tokens), params.enc_inter, state0=carry)


def inter_representation(params: ModelParams, o_ie: ag.Node) -> ag.Node:
    return ag.linear(ag.sigmoid(o_ie), params.red_inter.w, params.red_inter.b)


def predict_prior(params: ModelParams, r_ta: ag.Node, r_ia: ag.Node) -> ag.Node:
    z = ag.linear(ag.concat([r_ta, r_ia]), params.head_prior.w, params.head_prior.b)
    return ag.softmax(z)


def predict_full(params: ModelParams, r_ie: ag.Node, r_ta: ag.Node,
                 r_ia: ag.Node) -> ag.Node:
    z = ag.linear(ag.concat([r_ie, r_ta, r_ia]), params.head_full.w, params.head_full.b)
    return ag.softmax(z)


def build_state(o_ie: np.ndarray, pool_enc: np.ndarray, o_ta: np.ndarray,
                r_ia: np.ndarray) -> np.ndarray:
    """Decision-state matrix for the selection policy, one row per
    candidate: o_ie || b(x_j) || o_ta || r_ia, all detached."""
    n = pool_enc.shape[0]
    rows = np.concatenate([
        np.broadcast_to(o_ie, (n, ENC_SIZE)),
        pool_enc,
        np.broadcast_to(o_ta, (n, ENC_SIZE)),
        np.broadcast_to(r_ia, (n, R_IA_DIM)),
    ], axis=1)
    if rows.shape != (n, STATE_DIM):
        raise AssertionError(f"state shape {rows.shape}")
    return np.ascontiguousarray(rows)


# ---------------------------------------------------------------------------
# checkpoint layout
# ---------------------------------------------------------------------------

_LSTM_FIELDS = ("w_ih", "w_hh", "b")


def to_sections(params: ModelParams) -> dict[str, dict[str, np.ndarray]]:
    sections: dict[str, dict[str, np.ndarray]] = {
        "embeddings": {"matrix": params.embeddings}}
    for name, enc in params.lstm_sections().items():
        sec = {}
        for side, direction in (("fw", enc.fw), ("bw", enc.bw)):
            for f in _LSTM_FIELDS:
                sec[f"{f}_{side}"] = getattr(direction, f).data
        sections[name] = sec
    for name, lin in params.linear_sections().items():
        sections[name] = {"w": lin.w.data, "b": lin.b.data}
    return sections


def load_sections(params: ModelParams, sections: dict[str, dict[str, np.ndarray]]) -> None:
    params.embeddings[...] = sections["embeddings"]["matrix"]
    for name, enc in params.lstm_sections().items():
        sec = sections[name]
        for side, direction in (("fw", enc.fw), ("bw", enc.bw)):
            for f in _LSTM_FIELDS:
                node = getattr(direction, f)
                node.data = np.asarray(sec[f"{f}_{side}"], dtype=np.float64).reshape(node.data.shape)
    for name, lin in params.linear_sections().items():
        lin.w.data = np.asarray(sections[name]["w"], dtype=np.float64).reshape(lin.w.data.shape)
        lin.b.data = np.asarray(sections[name]["b"], dtype=np.float64).reshape(lin.b.data.shape)
