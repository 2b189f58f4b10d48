"""Synthetic corpora for desk-scale experiments.

Generated worlds are persona-driven: a seeded fraction of users are
hate-prone, hateful posts draw tokens from a signal lexicon, and optional
"ambiguous" posts carry no textual signal at all (their label equals the
author's persona, so only user history or similar posts can reveal it).
Ambiguous posts get an ``amb`` id prefix so evaluation can slice on them.

Everything is a pure function of (config, seed): two runs with the same
seed produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .textio import Dataset, HistorySet, Post

DUP_MARKER = "rt"


@dataclass
class SynthConfig:
    n_users: int = 120
    posts_per_user: int = 12
    vocab_size: int = 500
    hate_user_fraction: float = 1.0 / 3.0
    label_noise: float = 0.0
    near_duplicate_rate: float = 0.05
    history_posts_per_user: int = 10
    history_signal_frac: float = 0.5
    ambiguous_frac: float = 0.0
    duplicate_style: str = "perturb"  # or "reveal"
    reveal_signal_tokens: int = 1
    dups_per_post: int = 1
    min_post_len: int = 6
    max_post_len: int = 13

    def validate(self) -> None:
        for name in ("hate_user_fraction", "label_noise", "near_duplicate_rate",
                     "history_signal_frac", "ambiguous_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.duplicate_style not in ("perturb", "reveal"):
            raise ValueError(f"unknown duplicate_style {self.duplicate_style!r}")
        if self.reveal_signal_tokens < 1:
            raise ValueError("reveal_signal_tokens must be >= 1")
        if self.dups_per_post < 1:
            raise ValueError("dups_per_post must be >= 1")
        if self.min_post_len < 2 or self.max_post_len < self.min_post_len:
            raise ValueError("post length bounds must satisfy 2 <= min <= max")
        if self.vocab_size < 100:
            raise ValueError("vocab_size must be at least 100")


@dataclass
class Lexicon:
    neutral: list[str]
    hate_signal: list[str]
    benign_signal: list[str]
    ambiguous: list[str]


_ALPHA = "abcdefghijklmnopqrstuvwxyz"


def _word(i: int, prefix: str) -> str:
    # letters only; digits would be normalized away by tokenization
    out = []
    for _ in range(4):
        out.append(_ALPHA[i % 26])
        i //= 26
    return prefix + "".join(reversed(out))


def _build_lexicon(vocab_size: int) -> Lexicon:
    words = [_word(i, "w") for i in range(vocab_size)]
    # signal lexicons stay small so their words recur across the corpus
    n_sig = max(8, vocab_size // 60)
    n_amb = max(10, vocab_size // 40)
    return Lexicon(
        hate_signal=words[:n_sig],
        benign_signal=words[n_sig:2 * n_sig],
        ambiguous=words[2 * n_sig:2 * n_sig + n_amb],
        neutral=words[2 * n_sig + n_amb:],
    )


def _sample_words(rng: np.random.Generator, pool: list[str], k: int) -> list[str]:
    k = min(k, len(pool))
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in idx]


def _neutral_post(rng, lex, length) -> list[str]:
    return _sample_words(rng, lex.neutral, length)


def _signal_post(rng, lex, length, signal_pool) -> list[str]:
    n_sig = int(rng.integers(2, 4))
    toks = _sample_words(rng, signal_pool, n_sig) + _sample_words(rng, lex.neutral, max(1, length - n_sig))
    order = rng.permutation(len(toks))
    return [toks[i] for i in order]


def _ambiguous_post(rng, lex, length) -> list[str]:
    n_amb = max(2, length // 2)
    toks = _sample_words(rng, lex.ambiguous, n_amb) + _sample_words(rng, lex.neutral, length - n_amb)
    order = rng.permutation(len(toks))
    return [toks[i] for i in order]


def gen_synthetic(config: SynthConfig, seed: int):
    """Generate (dataset, histories, pool) from a seeded persona world.

    The label marginal tracks hate_user_fraction (hate users author hateful
    posts, ambiguous ones included); the default config lands on the 2:1
    non-hate/hate mix.  The pool holds an unlabeled copy of every labeled
    post plus near-duplicate variants, planted under a different author, for
    a near_duplicate_rate fraction of posts.  "perturb" variants substitute
    one token; "reveal" variants prepend a marker and append one signal
    token matching the source label.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    lex = _build_lexicon(config.vocab_size)

    n_hate_users = int(round(config.n_users * config.hate_user_fraction))
    persona = np.zeros(config.n_users, dtype=np.int64)
    persona[rng.permutation(config.n_users)[:n_hate_users]] = 1
    user_ids = [f"u{i:04d}" for i in range(config.n_users)]

    posts: list[Post] = []
    serial = 0
    for ui, user in enumerate(user_ids):
        for _ in range(config.posts_per_user):
            label = int(persona[ui])
            length = int(rng.integers(config.min_post_len, config.max_post_len + 1))
            ambiguous = bool(rng.random() < config.ambiguous_frac)
            if ambiguous:
                tokens = _ambiguous_post(rng, lex, length)
            elif label == 1:
                tokens = _signal_post(rng, lex, length, lex.hate_signal)
            elif rng.random() < 0.8:
                tokens = _signal_post(rng, lex, length, lex.benign_signal)
            else:
                tokens = _neutral_post(rng, lex, length)
            if rng.random() < config.label_noise:
                label = 1 - label
            prefix = "amb" if ambiguous else "t"
            posts.append(Post(id=f"{prefix}{serial:05d}", user_id=user,
                              text=" ".join(tokens), label=label))
            serial += 1

    histories = []
    hserial = 0
    for ui, user in enumerate(user_ids):
        hposts = []
        for _ in range(config.history_posts_per_user):
            length = int(rng.integers(config.min_post_len, config.max_post_len + 1))
            if rng.random() < config.history_signal_frac:
                pool_toks = lex.hate_signal if persona[ui] == 1 else lex.benign_signal
                tokens = _signal_post(rng, lex, length, pool_toks)
            else:
                tokens = _neutral_post(rng, lex, length)
            hposts.append(Post(id=f"h{hserial:06d}", user_id=user,
                               text=" ".join(tokens), label=None))
            hserial += 1
        histories.append(HistorySet(user_id=user, posts=hposts))

    pool: list[Post] = []
    for p in posts:
        pool.append(Post(id=f"pool-{p.id}", user_id=p.user_id, text=p.text, label=None))
    for p in posts:
        if rng.random() >= config.near_duplicate_rate:
            continue
        others = [u for u in user_ids if u != p.user_id]
        k = min(config.dups_per_post, len(others))
        picks = rng.choice(len(others), size=k, replace=False)
        for vi, oi in enumerate(sorted(picks)):
            toks = list(p.tokens)
            if config.duplicate_style == "reveal":
                sig_pool = lex.hate_signal if p.label == 1 else lex.benign_signal
                toks = [DUP_MARKER] + toks + _sample_words(rng, sig_pool, config.reveal_signal_tokens)
            else:
                pos = int(rng.integers(len(toks)))
                repl = _sample_words(rng, lex.neutral, 1)[0]
                if repl == toks[pos]:  # never emit an exact copy
                    repl = lex.neutral[(lex.neutral.index(repl) + 1) % len(lex.neutral)]
                toks[pos] = repl
            did = f"dup-{p.id}" if vi == 0 else f"dup-{p.id}-{vi}"
            pool.append(Post(id=did, user_id=others[oi], text=" ".join(toks), label=None))

    return Dataset(posts=posts, split="train"), histories, pool


def split_dataset(dataset: Dataset, test_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split, deterministic under the seed."""
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must be in (0, 1)")
    rng = np.random.default_rng(seed)
    by_label: dict[int, list[Post]] = {0: [], 1: []}
    for p in dataset.posts:
        by_label[p.label].append(p)
    train, test = [], []
    for label in (0, 1):
        group = by_label[label]
        order = rng.permutation(len(group))
        n_test = int(round(len(group) * test_frac))
        test.extend(group[i] for i in order[:n_test])
        train.extend(group[i] for i in order[n_test:])
    train.sort(key=lambda p: p.id)
    test.sort(key=lambda p: p.id)
    return Dataset(posts=train, split="train"), Dataset(posts=test, split="test")


# ---------------------------------------------------------------------------
# preset configurations used by the CLI and the acceptance experiments
# ---------------------------------------------------------------------------


def default_config() -> SynthConfig:
    return SynthConfig()


def ambiguous_config() -> SynthConfig:
    """Half the posts are textually uninformative; user histories carry the
    persona signal, so history-aware models separate what text alone cannot."""
    return SynthConfig(
        n_users=150,
        posts_per_user=6,
        ambiguous_frac=0.5,
        history_posts_per_user=10,
        history_signal_frac=0.8,
        near_duplicate_rate=0.0,
    )


def planted_config() -> SynthConfig:
    """Ambiguity is resolvable only through the pool: histories are empty,
    no post carries a textual signal, and every post is re-shared by several
    other authors with label-revealing commentary tokens appended."""
    return SynthConfig(
        n_users=150,
        posts_per_user=3,
        ambiguous_frac=1.0,
        history_posts_per_user=0,
        near_duplicate_rate=1.0,
        duplicate_style="reveal",
        reveal_signal_tokens=3,
        dups_per_post=6,
        min_post_len=10,
        max_post_len=16,
    )


PRESETS = {
    "default": default_config,
    "ambiguous": ambiguous_config,
    "planted": planted_config,
}


def gen_cluster_pool(n_clusters: int = 89, cluster_size: int = 56,
                     n_exact_dups: int = 100, seed: int = 0,
                     template_len: int = 24, lexicon_size: int = 20_000):
    """Pool of tight post clusters for retrieval-fidelity experiments.

    Each cluster shares a long token template; variants append one to three
    unique tokens, so within-cluster Jaccard stays high (about 0.8 - 0.95)
    while cross-cluster similarity is near zero.  Variants of one cluster go
    to distinct users.  The first n_exact_dups clusters also get an exact
    duplicate of their first post under a fresh author.

    Returns (pool_posts, target_ids) where target_ids are the posts whose
    exact duplicates were planted.
    """
    rng = np.random.default_rng(seed)
    words = [_word(i, "v") for i in range(lexicon_size)]
    posts: list[Post] = []
    target_ids: list[str] = []
    for ci in range(n_clusters):
        template = _sample_words(rng, words, template_len)
        for vi in range(cluster_size):
            extra = _sample_words(rng, words, int(rng.integers(1, 4)))
            posts.append(Post(id=f"c{ci:03d}-{vi:03d}", user_id=f"cu{vi:03d}",
                              text=" ".join(template + extra), label=None))
    for di in range(min(n_exact_dups, n_clusters)):
        src = posts[di * cluster_size]
        posts.append(Post(id=f"xdup{di:03d}", user_id=f"dupuser{di:03d}",
                          text=src.text, label=None))
        target_ids.append(src.id)
    return posts, target_ids
