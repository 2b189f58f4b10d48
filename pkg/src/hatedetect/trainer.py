"""End-to-end training for the three-branch classifier.

Four modes share one loop:

* ``baseline``: target branch only (histories ignored), prior head.
* ``intra``: target plus intra-user branch, prior head.
* ``intra-random``: adds the similar-post walk with uniformly random
  selection, full head.
* ``intra-rl``: the walk is driven by the selection policy, which gets a
  policy-gradient update per episode before the classifier's minibatch
  step; everything else matches intra-random.

Per target the walk runs a fixed number of steps over its precomputed
neighbor set; classifier parameters train on the terminal prediction's
cross-entropy, averaged over minibatches.  Retrieval results and history
summaries are precomputed once per run and can be cached to disk
losslessly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import autograd as ag
from . import model as M
from .agent import (EpisodeTrace, PolicyParams, compute_reward,
                    epsilon_schedule, init_policy, policy_forward_np,
                    reinforce_update, select_action)
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (bilstm_batch_np, bilstm_chain_batch, bilstm_forward_np,
                     linear_np)
from .lsh import LshConfig, LshIndex, NeighborSet, build_index, query
from .metrics import MetricsReport, prf1
from .optim import Adam
from .textio import Dataset, HistorySet, Post, Vocab

MODES = ("baseline", "intra", "intra-random", "intra-rl")
RL_MODES = ("intra-random", "intra-rl")
NEIGHBOR_CHOICES = (50, 100, 200)

EventHook = Callable[[dict], None]


@dataclass
class TrainConfig:
    mode: str = "baseline"
    epochs: int = 5
    batch_size: int = 25
    lr: float = 1e-3
    lr_policy: float = 1e-3
    clip_norm: float = 5.0
    neighbors: int = 100
    steps: int = 3
    alpha: float = 2.0
    epsilon_start: float = 0.1
    epsilon_end: float = 0.01
    max_history: int = 400
    train_l_ia: bool = False
    freeze_target_walk: bool = False
    walk_encoder: str = "fresh"
    warm_start: bool = True
    patience: int = 2
    holdout_frac: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.neighbors not in NEIGHBOR_CHOICES:
            raise ValueError(f"neighbors must be one of {NEIGHBOR_CHOICES}, got {self.neighbors}")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 < self.holdout_frac < 0.5:
            raise ValueError("holdout_frac must be in (0, 0.5)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.walk_encoder not in ("fresh", "warm", "frozen"):
            raise ValueError(f"walk_encoder must be 'fresh', 'warm' or 'frozen', got {self.walk_encoder!r}")


@dataclass
class TrainResult:
    epoch_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    episodes: int = 0
    policy_updates: int = 0
    stopped_early: bool = False
    policy: Optional[PolicyParams] = None


# ---------------------------------------------------------------------------
# precomputation and caching
# ---------------------------------------------------------------------------


def precompute_neighbors(targets: Sequence[Post], index: LshIndex, n: int,
                         seed: int) -> dict[str, NeighborSet]:
    """Neighbor sets for every target, keyed by target id."""
    return {t.id: query(index, t, n, seed=seed) for t in targets}


def save_neighbors(path: Union[str, Path], cache: dict[str, NeighborSet]) -> None:
    """Serialize a neighbor cache; floats are stored via repr so a reload
    reproduces every value bit for bit."""
    payload = {
        "format": "hatedetect-neighbors",
        "version": 1,
        "targets": {
            tid: {
                "ids": nb.ids(),
                "jaccards": [repr(j) for j in nb.jaccards],
                "padded": nb.padded,
            }
            for tid, nb in sorted(cache.items())
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_neighbors(path: Union[str, Path], pool: Sequence[Post]) -> dict[str, NeighborSet]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "hatedetect-neighbors" or payload.get("version") != 1:
        raise ValueError(f"{path} is not a neighbor cache this version can read")
    by_id = {p.id: p for p in pool}
    cache = {}
    for tid, rec in payload["targets"].items():
        missing = [pid for pid in rec["ids"] if pid not in by_id]
        if missing:
            raise ValueError(f"neighbor cache references unknown pool posts: {missing[:3]}")
        cache[tid] = NeighborSet(
            target_id=tid,
            posts=[by_id[pid] for pid in rec["ids"]],
            jaccards=[float(j) for j in rec["jaccards"]],
            padded=bool(rec["padded"]),
        )
    return cache


def precompute_intra(model: M.ModelParams, histories: dict[str, HistorySet],
                     users: Sequence[str], max_history: int) -> dict[str, tuple[np.ndarray, int]]:
    """History summaries per user; constant for a run since the history
    encoder is frozen."""
    out = {}
    for user in dict.fromkeys(users):
        hs = histories.get(user)
        posts = hs.posts if hs is not None else []
        out[user] = M.history_summary(model, posts, max_history)
    return out


_EMPTY_SUMMARY = (np.zeros(M.ENC_SIZE), 0)


# ---------------------------------------------------------------------------
# parameter groups
# ---------------------------------------------------------------------------


def trainable_nodes(model: M.ModelParams, config: TrainConfig) -> list[ag.Node]:
    """Classifier parameters that receive gradient in the given mode.

    Embeddings and the history encoder are always frozen; the history
    projection joins only when train_l_ia is set.  Walk modes train the
    full head and the inter branch instead of the prior head; with
    freeze_target_walk they leave the pretrained target branch untouched,
    which keeps the prior prediction stable and the final prediction's
    improvement attributable to the selected context rather than to the
    target text being re-fit.  With walk_encoder="frozen" the walk encoder
    is a frozen copy of the target encoder, so only the walk reduction and
    the full head learn.
    """
    if config.mode in RL_MODES and config.freeze_target_walk:
        nodes = []
    else:
        nodes = model.enc_target.nodes() + model.red_target.nodes()
    if config.mode in RL_MODES:
        if config.walk_encoder != "frozen":
            nodes += model.enc_inter.nodes()
        nodes += model.red_inter.nodes()
        nodes += model.head_full.nodes()
    else:
        nodes += model.head_prior.nodes()
    if config.train_l_ia and config.mode != "baseline":
        nodes += model.red_history.nodes()
    return nodes


def prepare_for_mode(model: M.ModelParams, config: TrainConfig) -> Optional[PolicyParams]:
    """Transition a pretrained model into the configured mode.

    The history encoder becomes a frozen copy of the trained target
    encoder.  Without warm_start the target branch and prior head restart
    from fresh seeded values.  In walk modes warm_start anchors the full
    head's shared block on the trained prior head while its walk block
    keeps a fresh init, so the fused prediction starts near the prior
    without pinning early rewards to zero; the walk encoder stays fresh
    (default) or starts as a copy of the target encoder, trainable under
    "warm" and frozen under "frozen".  The policy-walk mode gets a freshly
    initialized policy (random selection needs none).
    """
    M.clone_into(model.enc_target, model.enc_history)
    if not config.warm_start:
        fresh = M.init_model(model.vocab, model.embeddings, config.seed + 3)
        M.clone_into(fresh.enc_target, model.enc_target)
        for dst, src in ((model.red_target, fresh.red_target),
                         (model.head_prior, fresh.head_prior)):
            dst.w.data = src.w.data.copy()
            dst.b.data = src.b.data.copy()
    if config.mode in RL_MODES and config.walk_encoder in ("warm", "frozen"):
        M.clone_into(model.enc_target, model.enc_inter)
    if config.warm_start and config.mode in RL_MODES:
        w = model.head_full.w.data.copy()
        w[:, M.R_IE_DIM:] = model.head_prior.w.data
        model.head_full.w.data = w
        model.head_full.b.data = model.head_prior.b.data.copy()
    if config.mode == "intra-rl":
        return init_policy(np.random.default_rng(config.seed + 7))
    return None


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


def _summary_for(summaries, post, config):
    if config.mode == "baseline":
        return _EMPTY_SUMMARY
    return summaries.get(post.user_id, _EMPTY_SUMMARY)


def _prior_np(model: M.ModelParams, post: Post, summary):
    """Target and intra branches up to the prior distribution, numpy path;
    returns (o_ta, r_ta, r_ia, y_prior) as plain arrays."""
    o_ta, _ = bilstm_forward_np(M.embed(model, post.tokens), model.enc_target)
    r_ta = linear_np(ag.sigmoid_np(o_ta), model.red_target)
    r_ia = _intra_np(model, summary)
    z = linear_np(np.concatenate([r_ta, r_ia]), model.head_prior)
    return o_ta, r_ta, r_ia, ag.softmax_np(z)


def _walk_rng(seed: int, post_id: str) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}:{post_id}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


class PoolEncoder:
    """Shared candidate encodings for every post reachable from a neighbor
    cache.

    The inter encoder moves only at classifier steps, so encodings are
    memoized until invalidate() is called; rows are filled lazily, one
    neighbor set at a time, so a call only pays for posts it has not seen
    since the last invalidation.  Rows are bitwise equal to per-target
    encodings: the batch path masks padding steps, making each row
    independent of what else is in the batch.
    """

    _CHUNK = 512  # bounds the padded batch array, not the result

    def __init__(self, model: M.ModelParams, cache: dict[str, NeighborSet]):
        posts: dict[str, Post] = {}
        for nb in cache.values():
            for p in nb.posts:
                posts.setdefault(p.id, p)
        self._model = model
        self._ids = sorted(posts)
        self._row = {pid: i for i, pid in enumerate(self._ids)}
        self._tokens = [posts[pid].tokens for pid in self._ids]
        self._enc = np.zeros((len(self._ids), M.ENC_SIZE))
        self._have = np.zeros(len(self._ids), dtype=bool)

    def invalidate(self) -> None:
        self._have[:] = False

    def rows(self, nb: NeighborSet) -> np.ndarray:
        idx = [self._row[p.id] for p in nb.posts]
        need = [i for i in idx if not self._have[i]]
        for lo in range(0, len(need), self._CHUNK):
            part = need[lo:lo + self._CHUNK]
            seqs = [M.embed(self._model, self._tokens[i]) for i in part]
            self._enc[part] = bilstm_batch_np(seqs, self._model.enc_inter)
            self._have[part] = True
        return self._enc[idx]


def _full_probs_np(model: M.ModelParams, o_ie: np.ndarray, r_ta: np.ndarray,
                   r_ia: np.ndarray) -> np.ndarray:
    """Fused-head distribution from raw branch outputs, numpy path; op
    order mirrors the graph forward exactly."""
    r_ie = linear_np(ag.sigmoid_np(o_ie), model.red_inter)
    z = linear_np(np.concatenate([r_ie, r_ta, r_ia]), model.head_full)
    return ag.softmax_np(z)


def _run_episode_np(model: M.ModelParams, policy: Optional[PolicyParams], post: Post,
                    nb: NeighborSet, pool_enc: Optional[np.ndarray], o_ta: np.ndarray,
                    r_ta: np.ndarray, r_ia: np.ndarray, config: TrainConfig,
                    epsilon: float, rng: np.random.Generator):
    """Forward-only walk over the neighbor set; returns (trace, chosen posts).

    Selection is with replacement: a post may be chosen at every step.  In
    intra-random mode actions are uniform; in intra-rl they come from the
    policy under epsilon-greedy exploration.  Action choice only ever reads
    detached state snapshots, so the whole episode runs on the numpy path;
    the gradient-bearing re-encode of the chosen chain happens later, at
    the classifier step, batched across the minibatch.
    """
    o_ie, carry = M.inter_step_np(model, post.tokens, None)
    trace = EpisodeTrace()
    chosen_posts: list[Post] = []
    n = len(nb.posts)
    for _ in range(config.steps):
        if config.mode == "intra-rl":
            state = M.build_state(o_ie, pool_enc, o_ta, r_ia)
            action, logp, explored = select_action(policy, state, epsilon, rng)
        else:
            # uniform selection never reads the state, so skip building it
            state = None
            action = int(rng.integers(n))
            logp, explored = float(np.log(1.0 / n)), True
        chosen = nb.posts[action]
        chosen_posts.append(chosen)
        o_ie, carry = M.inter_step_np(model, chosen.tokens, carry)
        pred = _full_probs_np(model, o_ie, r_ta, r_ia)
        trace.record(state, action, logp, explored, pred, chosen.id)
    return trace, chosen_posts


@dataclass
class _Pending:
    """One target queued for the next classifier step."""
    post: Post
    summary: tuple
    r_ta: Optional[np.ndarray] = None
    r_ia: Optional[np.ndarray] = None
    chosen: Optional[list[Post]] = None


def _batch_losses(model: M.ModelParams, pending: list[_Pending],
                  config: TrainConfig) -> list[ag.Node]:
    """Per-target loss nodes for one minibatch.

    Encoder work is the expensive part, so it runs in lockstep across the
    batch; the masked batch step leaves each item's values equal to a
    per-item forward.  In the walk modes each item's chain re-encodes the
    target followed by its episode's chosen posts, continuing the carry
    exactly as the episode did.
    """
    if config.mode not in RL_MODES:
        chains = [[M.embed(model, it.post.tokens)] for it in pending]
        o_tas = bilstm_chain_batch(chains, model.enc_target)
        losses = []
        trainable = config.train_l_ia and config.mode != "baseline"
        for it, o_ta in zip(pending, o_tas):
            r_ta = M.target_representation(model, o_ta)
            r_ia = M.intra_from_summary(model, it.summary[0], it.summary[1],
                                        trainable=trainable)
            y_prior = M.predict_prior(model, r_ta, r_ia)
            losses.append(ag.cross_entropy(y_prior, it.post.label))
        return losses
    if config.freeze_target_walk:
        r_tas: list = [it.r_ta for it in pending]
    else:
        chains = [[M.embed(model, it.post.tokens)] for it in pending]
        o_tas = bilstm_chain_batch(chains, model.enc_target)
        r_tas = [M.target_representation(model, o) for o in o_tas]
    walk_chains = [[M.embed(model, it.post.tokens)]
                   + [M.embed(model, p.tokens) for p in it.chosen]
                   for it in pending]
    o_ies = bilstm_chain_batch(walk_chains, model.enc_inter)
    losses = []
    for it, o_ie, r_ta in zip(pending, o_ies, r_tas):
        r_ia = (M.intra_from_summary(model, it.summary[0], it.summary[1],
                                     trainable=True)
                if config.train_l_ia else it.r_ia)
        r_ie = M.inter_representation(model, o_ie)
        y_full = M.predict_full(model, r_ie, r_ta, r_ia)
        losses.append(ag.cross_entropy(y_full, it.post.label))
    return losses


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _ensure_neighbor_cache(targets, pool, cache, config):
    if config.mode not in RL_MODES:
        return None
    if cache is None:
        pool_posts = list(pool) if pool is not None else list(targets)
        index = build_index(pool_posts, LshConfig())
        cache = precompute_neighbors(targets, index, config.neighbors, config.seed)
    missing = [t.id for t in targets if t.id not in cache]
    if missing:
        raise ValueError(f"neighbor cache lacks targets: {missing[:3]}")
    return cache


def train(model: M.ModelParams, dataset: Dataset,
          histories: Optional[dict[str, HistorySet]] = None,
          config: Optional[TrainConfig] = None, *,
          pool: Optional[Sequence[Post]] = None,
          neighbor_cache: Optional[dict[str, NeighborSet]] = None,
          policy: Optional[PolicyParams] = None,
          val_posts: Optional[Sequence[Post]] = None,
          event_hook: Optional[EventHook] = None) -> TrainResult:
    """Train in place for up to config.epochs passes over the dataset.

    Walk modes need a candidate pool; when neither a cache nor a pool is
    given the training set doubles as the pool (retrieval excludes the
    target and its author's posts).  In intra-rl mode a policy is created
    when not passed in, and its episode update always lands before the
    classifier step that includes that target.

    Passing val_posts (prior-head modes only) turns on early stopping:
    training halts after config.patience epochs without validation-loss
    improvement and the best-scoring parameters are restored.
    """
    config = config or TrainConfig()
    config.validate()
    histories = histories or {}
    targets = list(dataset.posts)
    if not targets:
        raise ValueError("cannot train on an empty dataset")
    for t in targets:
        if t.label is None:
            raise ValueError(f"target {t.id!r} has no label")
    if val_posts is not None and config.mode in RL_MODES:
        raise ValueError("early stopping is only supported in prior-head modes")

    neighbor_cache = _ensure_neighbor_cache(targets, pool, neighbor_cache, config)
    if config.mode == "intra-rl" and policy is None:
        policy = init_policy(np.random.default_rng(config.seed + 7))
    summaries = {}
    if config.mode != "baseline":
        users = [t.user_id for t in targets]
        if val_posts is not None:
            users += [p.user_id for p in val_posts]
        summaries = precompute_intra(model, histories, users, config.max_history)

    opt = Adam(trainable_nodes(model, config), lr=config.lr, clip_norm=config.clip_norm)
    policy_opt = None
    if config.mode == "intra-rl":
        policy_opt = Adam(policy.nodes(), lr=config.lr_policy, clip_norm=config.clip_norm)

    rng = np.random.default_rng(config.seed + 1)
    result = TrainResult(policy=policy)
    total_episodes = max(config.epochs * len(targets), 1)
    pool_encoder = PoolEncoder(model, neighbor_cache) \
        if neighbor_cache and config.mode == "intra-rl" else None

    def flush(pending: list, epoch_sums: list) -> None:
        if not pending:
            return
        try:
            losses = _batch_losses(model, pending, config)
            mean = ag.scale(ag.nsum(losses), 1.0 / len(losses)) \
                if len(losses) > 1 else losses[0]
            opt.zero_grad()
            ag.backward(mean)
            opt.step()
        except ag.NumericalFault as e:
            ids = ", ".join(repr(it.post.id) for it in pending[:3])
            raise ag.NumericalFault(
                f"while training on batch of {len(pending)} [{ids}, ...]: {e}") from e
        if pool_encoder is not None and config.walk_encoder != "frozen":
            pool_encoder.invalidate()
        epoch_sums.append((float(mean.data), len(pending)))
        if event_hook:
            event_hook({"event": "classifier_step", "batch": len(pending),
                        "loss": float(mean.data)})
        pending.clear()

    best_loss, best_snap, bad = float("inf"), None, 0
    episode = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(targets))
        pending: list[_Pending] = []
        epoch_sums: list[tuple[float, int]] = []
        for idx in order:
            t = targets[int(idx)]
            summary = _summary_for(summaries, t, config)
            if config.mode not in RL_MODES:
                pending.append(_Pending(t, summary))
            else:
                nb = neighbor_cache[t.id]
                pool_enc = pool_encoder.rows(nb) if pool_encoder is not None else None
                epsilon = epsilon_schedule(episode, total_episodes,
                                           config.epsilon_start, config.epsilon_end)
                o_ta, r_ta, r_ia, y_prior = _prior_np(model, t, summary)
                trace, chosen = _run_episode_np(model, policy, t, nb, pool_enc,
                                                o_ta, r_ta, r_ia, config, epsilon, rng)
                trace.y_prime = y_prior
                trace.y_final = trace.preds[-1].copy()
                trace.label = t.label
                reward = compute_reward(y_prior, trace.y_final, t.label, config.alpha)
                episode += 1
                result.episodes += 1
                if config.mode == "intra-rl":
                    stepped = reinforce_update(policy, trace, reward, policy_opt)
                    if stepped is not None:
                        result.policy_updates += 1
                    if event_hook:
                        event_hook({"event": "policy_update", "target": t.id,
                                    "reward": reward, "stepped": stepped is not None,
                                    "chosen": list(trace.chosen_ids), "trace": trace})
                pending.append(_Pending(t, summary, r_ta, r_ia, chosen))
            if len(pending) == config.batch_size:
                flush(pending, epoch_sums)
        flush(pending, epoch_sums)
        total = sum(n for _, n in epoch_sums)
        result.epoch_losses.append(sum(l * n for l, n in epoch_sums) / total)
        if event_hook:
            event_hook({"event": "epoch_end", "mean_loss": result.epoch_losses[-1]})

        if val_posts is not None:
            val_loss = float(np.mean([
                ag.cross_entropy_np(
                    predict_probs(model, p, _summary_for(summaries, p, config), config),
                    p.label)
                for p in val_posts]))
            result.val_losses.append(val_loss)
            if event_hook:
                event_hook({"event": "validation", "val_loss": val_loss})
            if val_loss < best_loss - 1e-9:
                best_loss, best_snap, bad = val_loss, M.to_sections(model), 0
            else:
                bad += 1
                if bad > config.patience:
                    result.stopped_early = True
                    break
    if best_snap is not None:
        M.load_sections(model, best_snap)
    return result


def stratified_holdout(posts: Sequence[Post], frac: float,
                       seed: int) -> tuple[list[Post], list[Post]]:
    """Split posts into (kept, held_out) preserving the label mix."""
    rng = np.random.default_rng(seed)
    kept: list[Post] = []
    held: list[Post] = []
    for label in (0, 1):
        group = [p for p in posts if p.label == label]
        order = rng.permutation(len(group))
        n_held = int(round(len(group) * frac))
        held.extend(group[i] for i in order[:n_held])
        kept.extend(group[i] for i in order[n_held:])
    kept.sort(key=lambda p: p.id)
    held.sort(key=lambda p: p.id)
    return kept, held


def pretrain(dataset: Dataset, vocab: Vocab, embeddings: np.ndarray,
             config: TrainConfig, event_hook: Optional[EventHook] = None
             ) -> tuple[M.ModelParams, TrainResult]:
    """Train a fresh target-branch model with early stopping.

    A stratified holdout supplies validation loss; training stops once it
    fails to improve for config.patience consecutive epochs and the best
    parameters are restored.  Returns the model and the training record.
    """
    config.validate()
    model = M.init_model(vocab, embeddings, config.seed)
    kept, held = stratified_holdout(dataset.posts, config.holdout_frac, config.seed + 11)
    if not kept or not held:
        raise ValueError("dataset too small for a pretraining holdout")
    base_cfg = replace(config, mode="baseline")
    result = train(model, Dataset(posts=kept, split="train"), None, base_cfg,
                   val_posts=held, event_hook=event_hook)
    return model, result


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def _intra_np(model: M.ModelParams, summary) -> np.ndarray:
    summed, count = summary
    if count == 0:
        return ag.sigmoid_np(np.zeros(M.R_IA_DIM))
    # same op order as the graph path: matmul, scaled bias, add, squash
    p = model.red_history
    return ag.sigmoid_np((p.w.data @ summed) + (p.b.data * float(count)))


def predict_probs(model: M.ModelParams, post: Post, summary,
                  config: TrainConfig, nb: Optional[NeighborSet] = None,
                  policy: Optional[PolicyParams] = None,
                  pool_enc: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient-free class distribution for one post in the given mode.

    Matches the graph forward op for op.  Walk modes select greedily
    (policy argmax, or a per-post seeded uniform draw in intra-random) and
    need the post's neighbor set; pool_enc may supply prebuilt candidate
    encodings for it.
    """
    seq = M.embed(model, post.tokens)
    o_ta, _ = bilstm_forward_np(seq, model.enc_target)
    r_ta = linear_np(ag.sigmoid_np(o_ta), model.red_target)
    r_ia = _intra_np(model, summary)
    if config.mode not in RL_MODES:
        z = linear_np(np.concatenate([r_ta, r_ia]), model.head_prior)
        return ag.softmax_np(z)

    if nb is None:
        raise ValueError(f"mode {config.mode} needs a neighbor set for {post.id!r}")
    if config.mode == "intra-rl":
        if policy is None:
            raise ValueError("intra-rl prediction requires a trained policy")
        if pool_enc is None:
            pool_enc = M.encode_pool(model, nb.posts)
    o_ie, carry = bilstm_forward_np(seq, model.enc_inter)
    rng = _walk_rng(config.seed, post.id)
    for _ in range(config.steps):
        if config.mode == "intra-rl":
            state = M.build_state(o_ie, pool_enc, o_ta, r_ia)
            action = int(np.argmax(policy_forward_np(policy, state)))
        else:
            action = int(rng.integers(len(nb.posts)))
        chosen = nb.posts[action]
        o_ie, carry = bilstm_forward_np(M.embed(model, chosen.tokens),
                                        model.enc_inter, state0=carry)
    r_ie = linear_np(ag.sigmoid_np(o_ie), model.red_inter)
    z = linear_np(np.concatenate([r_ie, r_ta, r_ia]), model.head_full)
    return ag.softmax_np(z)


def predict(model: M.ModelParams, posts: Sequence[Post],
            histories: Optional[dict[str, HistorySet]] = None,
            config: Optional[TrainConfig] = None, *,
            pool: Optional[Sequence[Post]] = None,
            neighbor_cache: Optional[dict[str, NeighborSet]] = None,
            policy: Optional[PolicyParams] = None) -> list[int]:
    """Greedy labels for posts under the configured mode.

    Walk modes retrieve from pool (or, lacking one, from the given posts
    themselves; only unlabeled text is read from pool posts).
    """
    config = config or TrainConfig()
    config.validate()
    if config.mode == "intra-rl" and policy is None:
        raise ValueError("intra-rl prediction requires a trained policy")
    histories = histories or {}
    neighbor_cache = _ensure_neighbor_cache(list(posts), pool, neighbor_cache, config)
    summaries = {}
    if config.mode != "baseline":
        summaries = precompute_intra(model, histories, [p.user_id for p in posts],
                                     config.max_history)
    pool_encoder = PoolEncoder(model, neighbor_cache) \
        if neighbor_cache and config.mode == "intra-rl" else None
    preds = []
    for p in posts:
        nb = neighbor_cache[p.id] if neighbor_cache else None
        pool_enc = pool_encoder.rows(nb) if pool_encoder is not None else None
        summary = _summary_for(summaries, p, config)
        probs = predict_probs(model, p, summary, config, nb=nb, policy=policy,
                              pool_enc=pool_enc)
        preds.append(int(np.argmax(probs)))
    return preds


def evaluate(model: M.ModelParams, dataset: Dataset,
             histories: Optional[dict[str, HistorySet]] = None,
             config: Optional[TrainConfig] = None, *,
             pool: Optional[Sequence[Post]] = None,
             neighbor_cache: Optional[dict[str, NeighborSet]] = None,
             policy: Optional[PolicyParams] = None
             ) -> tuple[MetricsReport, list[int]]:
    preds = predict(model, dataset.posts, histories, config, pool=pool,
                    neighbor_cache=neighbor_cache, policy=policy)
    labels = [p.label for p in dataset.posts]
    return prf1(labels, preds), preds


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------


def save_model(path: Union[str, Path], model: M.ModelParams,
               policy: Optional[PolicyParams] = None,
               extra_meta: Optional[dict] = None) -> None:
    """Write model (and optional policy) to one lossless checkpoint file."""
    sections = M.to_sections(model)
    if policy is not None:
        sections["policy"] = {"w1": policy.w1.data, "b1": policy.b1.data,
                              "w2": policy.w2.data, "b2": policy.b2.data}
    meta = {"vocab": model.vocab.ordered_tokens(), "has_policy": policy is not None}
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, sections, meta)


def load_model(path: Union[str, Path]
               ) -> tuple[M.ModelParams, Optional[PolicyParams], dict]:
    sections, meta = load_checkpoint(path)
    tokens = meta["vocab"]
    vocab = Vocab(tokens[2:])
    emb = np.asarray(sections["embeddings"]["matrix"], dtype=np.float64).reshape(len(vocab), -1)
    model = M.init_model(vocab, emb, seed=0)
    M.load_sections(model, sections)
    policy = None
    if meta.get("has_policy"):
        sec = sections["policy"]
        policy = PolicyParams(w1=ag.Node(np.asarray(sec["w1"], dtype=np.float64)),
                              b1=ag.Node(np.asarray(sec["b1"], dtype=np.float64)),
                              w2=ag.Node(np.asarray(sec["w2"], dtype=np.float64)),
                              b2=ag.Node(np.asarray(sec["b2"], dtype=np.float64)))
    return model, policy, meta
