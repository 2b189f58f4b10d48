"""MinHash LSH over token shingles, with an exact re-rank stage.

Retrieval runs in three steps: banded signature lookup proposes candidates,
exact Jaccard over shingle sets orders them, and a seeded uniform sample
tops the list up to the requested size when collisions are scarce.  A
brute-force oracle with identical exclusion and tie rules lives alongside
the index for verification.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .textio import Post


class EmptyShingles(ValueError):
    """Post produced no shingles (empty or whitespace-only text)."""


class InsufficientPool(RuntimeError):
    """Fewer eligible pool posts than the requested neighbor count."""


@dataclass
class LshConfig:
    num_hashes: int = 128
    bands: int = 16
    rows: int = 8
    hash_seed: int = 0

    def validate(self) -> None:
        if self.bands * self.rows != self.num_hashes:
            raise ValueError(
                f"bands * rows must equal num_hashes "
                f"({self.bands} * {self.rows} != {self.num_hashes})")
        if self.num_hashes < 1:
            raise ValueError("num_hashes must be positive")


def shingles(tokens: list[str]) -> frozenset[str]:
    """Unigrams plus underscore-joined bigrams, as a set."""
    out = set(tokens)
    for i in range(len(tokens) - 1):
        out.add(tokens[i] + "_" + tokens[i + 1])
    return frozenset(out)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def _shingle_hashes(sh: frozenset[str]) -> np.ndarray:
    vals = [int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "big")
            for s in sorted(sh)]
    return np.asarray(vals, dtype=np.uint64)


def _hash_family(config: LshConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(config.hash_seed)
    a = rng.integers(1, 2**63, size=config.num_hashes, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    b = rng.integers(0, 2**63, size=config.num_hashes, dtype=np.uint64)
    return a, b


def minhash_signature(sh: frozenset[str], a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum of (a*x + b) mod 2**64 per hash slot; collision rate across
    two signatures estimates shingle-set Jaccard."""
    if not sh:
        raise EmptyShingles("cannot sign an empty shingle set")
    x = _shingle_hashes(sh)
    # uint64 arithmetic wraps, which is the intended modulus
    table = a[None, :] * x[:, None] + b[None, :]
    return table.min(axis=0)


@dataclass
class LshIndex:
    config: LshConfig
    hash_a: np.ndarray
    hash_b: np.ndarray
    posts: dict[str, Post] = field(default_factory=dict)
    shingle_sets: dict[str, frozenset[str]] = field(default_factory=dict)
    signatures: dict[str, np.ndarray] = field(default_factory=dict)
    bands: list[dict[bytes, list[str]]] = field(default_factory=list)
    ordered_ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.posts)


@dataclass
class NeighborSet:
    target_id: str
    posts: list[Post]
    jaccards: list[float]
    padded: bool

    def ids(self) -> list[str]:
        return [p.id for p in self.posts]


def build_index(posts: list[Post], config: LshConfig | None = None) -> LshIndex:
    config = config or LshConfig()
    config.validate()
    a, b = _hash_family(config)
    index = LshIndex(config=config, hash_a=a, hash_b=b,
                     bands=[{} for _ in range(config.bands)])
    for post in posts:
        if post.id in index.posts:
            raise ValueError(f"duplicate post id in pool: {post.id!r}")
        sh = shingles(post.tokens)
        if not sh:
            raise EmptyShingles(f"post {post.id!r} has no shingles")
        sig = minhash_signature(sh, a, b)
        index.posts[post.id] = post
        index.shingle_sets[post.id] = sh
        index.signatures[post.id] = sig
        for bi in range(config.bands):
            key = sig[bi * config.rows:(bi + 1) * config.rows].tobytes()
            index.bands[bi].setdefault(key, []).append(post.id)
    index.ordered_ids = sorted(index.posts)
    return index


def _eligible(index: LshIndex, target: Post, pid: str) -> bool:
    post = index.posts[pid]
    return pid != target.id and post.user_id != target.user_id


def query(index: LshIndex, target: Post, n: int, seed: int = 0) -> NeighborSet:
    """Top-n similar posts for a target, never the target itself and never
    posts by the target's author.  Candidates come from band collisions and
    are ordered by exact Jaccard (ties by ascending post id); when they run
    short the remainder is a uniform sample of the other eligible posts,
    seeded by (seed, target id), and the result is flagged padded.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    sh = shingles(target.tokens)
    if not sh:
        raise EmptyShingles(f"target {target.id!r} has no shingles")
    sig = minhash_signature(sh, index.hash_a, index.hash_b)

    candidates: set[str] = set()
    for bi in range(index.config.bands):
        key = sig[bi * index.config.rows:(bi + 1) * index.config.rows].tobytes()
        candidates.update(index.bands[bi].get(key, ()))
    candidates = {pid for pid in candidates if _eligible(index, target, pid)}

    scored = sorted(((jaccard(sh, index.shingle_sets[pid]), pid) for pid in candidates),
                    key=lambda t: (-t[0], t[1]))
    chosen = [pid for _, pid in scored[:n]]
    jacs = [j for j, _ in scored[:n]]

    padded = False
    if len(chosen) < n:
        rest = [pid for pid in index.ordered_ids
                if pid not in candidates and _eligible(index, target, pid)]
        need = n - len(chosen)
        if len(rest) < need:
            raise InsufficientPool(
                f"target {target.id!r}: need {n} neighbors, only "
                f"{len(chosen) + len(rest)} eligible posts in pool")
        digest = hashlib.blake2b(f"{seed}:{target.id}".encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        picks = rng.choice(len(rest), size=need, replace=False)
        for i in sorted(picks):
            pid = rest[i]
            chosen.append(pid)
            jacs.append(jaccard(sh, index.shingle_sets[pid]))
        padded = True

    return NeighborSet(target_id=target.id,
                       posts=[index.posts[pid] for pid in chosen],
                       jaccards=jacs, padded=padded)


def brute_force_topk(posts: list[Post], target: Post, n: int) -> list[tuple[str, float]]:
    """Exact top-n by Jaccard with the same exclusion and tie rules as
    query(); the verification oracle for the banded index."""
    sh = shingles(target.tokens)
    if not sh:
        raise EmptyShingles(f"target {target.id!r} has no shingles")
    scored = []
    for post in posts:
        if post.id == target.id or post.user_id == target.user_id:
            continue
        scored.append((jaccard(sh, shingles(post.tokens)), post.id))
    if len(scored) < n:
        raise InsufficientPool(
            f"target {target.id!r}: need {n} neighbors, only {len(scored)} eligible")
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [(pid, j) for j, pid in scored[:n]]
