"""Posts, tokenization, vocabulary, and embedding management.

File formats:
  * post files are JSON Lines, one object per line:
    {"id": str, "user": str, "text": str, "label": 0|1|null}
  * embedding files are textual word2vec style: a "count dim" header line
    followed by "token v1 ... v200" lines.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

EMB_DIM = 200
UNK, PAD = "<unk>", "<pad>"
URL_TOKEN, USER_TOKEN, NUM_TOKEN = "<url>", "<user>", "<num>"

MAX_VOCAB = 50_000


class EmptyCorpus(ValueError):
    """Vocabulary construction got a corpus with no tokens."""


class DimMismatch(ValueError):
    """Embedding file dimensionality differs from the required 200."""


class EmbeddingFormatError(ValueError):
    """Malformed embedding file line (carries the line number)."""


@dataclass
class Post:
    """One social-media message; label is None for history/pool posts."""

    id: str
    user_id: str
    text: str
    label: Optional[int] = None
    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.tokens:
            self.tokens = tokenize(self.text)


@dataclass
class Dataset:
    posts: list[Post]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.posts)

    def label_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {0: 0, 1: 0}
        for p in self.posts:
            if p.label is None:
                raise ValueError(f"unlabeled post {p.id} in dataset")
            counts[p.label] += 1
        return counts


@dataclass
class HistorySet:
    """Unlabeled past posts of one author (the target post is never included)."""

    user_id: str
    posts: list[Post]

    def __post_init__(self):
        for p in self.posts:
            if p.user_id != self.user_id:
                raise ValueError(f"history post {p.id} by {p.user_id} in set for {self.user_id}")


# ---------------------------------------------------------------------------
# tokenization
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    <(?:url|user|num)>          # already-normalized specials pass through
    | https?://\S+ | www\.\S+   # URLs
    | @\w+                      # mentions
    | \#\w+                     # hashtags keep the #
    | \d+(?:[.,]\d+)*           # numbers
    | '[a-z]+                   # contraction suffixes ('m, 's, ...)
    | [a-z]+
    | [^\w\s]                   # single punctuation marks
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split, normalizing URLs, mentions, and numbers.

    Deterministic; empty or whitespace-only text yields an empty list.
    """
    out: list[str] = []
    for m in _TOKEN_RE.finditer(text.lower()):
        tok = m.group()
        if tok.startswith(("http://", "https://", "www.")):
            out.append(URL_TOKEN)
        elif tok.startswith("@"):
            out.append(USER_TOKEN)
        elif tok[0].isdigit():
            out.append(NUM_TOKEN)
        else:
            out.append(tok)
    return out


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


class Vocab:
    """Token/index bijection with UNK fixed at index 0 and PAD at 1."""

    def __init__(self, tokens: Sequence[str]):
        self.token_to_index: dict[str, int] = {UNK: 0, PAD: 1}
        for tok in tokens:
            if tok in (UNK, PAD):
                continue
            self.token_to_index.setdefault(tok, len(self.token_to_index))
        self.index_to_token: dict[int, str] = {i: t for t, i in self.token_to_index.items()}

    def __len__(self) -> int:
        return len(self.token_to_index)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, 0)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.index(t) for t in tokens], dtype=np.int64)

    def ordered_tokens(self) -> list[str]:
        return [self.index_to_token[i] for i in range(len(self))]

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.ordered_tokens()))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocab":
        tokens = json.loads(Path(path).read_text())
        if tokens[:2] != [UNK, PAD]:
            raise ValueError(f"vocab file {path} does not start with {UNK}, {PAD}")
        return cls(tokens[2:])


def build_vocab(corpus: Iterable[Post], min_count: int = 2, max_size: int = MAX_VOCAB) -> Vocab:
    """Frequency-thresholded vocabulary, deterministic over input order.

    Entries are ordered by descending frequency with ascending-token
    tiebreak, capped at max_size non-special tokens.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for post in corpus:
        counts.update(post.tokens)
    if not counts:
        raise EmptyCorpus("no tokens in corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    if not kept:
        raise EmptyCorpus(f"no token reaches min_count={min_count}")
    return Vocab(kept[:max_size])


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


def oov_vector(token: str, dim: int = EMB_DIM) -> np.ndarray:
    """Deterministic pseudo-random vector for an out-of-file token.

    Seeded by a hash of the token alone, so the vector is identical across
    loads and processes; components are uniform in [-0.1, 0.1].
    """
    seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.1, 0.1, size=dim)


def random_embeddings(vocab: Vocab, dim: int = EMB_DIM) -> np.ndarray:
    """Embedding table with every row drawn by oov_vector; PAD is zero."""
    table = np.zeros((len(vocab), dim))
    for tok, idx in vocab.token_to_index.items():
        if tok == PAD:
            continue
        table[idx] = oov_vector(tok, dim)
    return table


def load_embeddings(path: Union[str, Path], vocab: Vocab, dim: int = EMB_DIM) -> np.ndarray:
    """Load a word2vec-style text file into a |V| x 200 table.

    In-vocab tokens take their file vectors; everything else falls back to
    oov_vector.  PAD stays zero.
    """
    table = random_embeddings(vocab, dim)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise EmbeddingFormatError("line 1: expected 'count dim' header")
        file_dim = int(parts[1])
        if file_dim != dim:
            raise DimMismatch(f"embedding file has dim {file_dim}, expected {dim}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            if len(fields) != dim + 1:
                raise EmbeddingFormatError(
                    f"line {lineno}: expected token plus {dim} values, got {len(fields) - 1}")
            token = fields[0]
            try:
                vec = np.array([float(v) for v in fields[1:]])
            except ValueError as exc:
                raise EmbeddingFormatError(f"line {lineno}: {exc}") from exc
            if token in vocab:
                table[vocab.index(token)] = vec
    table[vocab.index(PAD)] = 0.0
    return table


def save_embeddings(path: Union[str, Path], vocab: Vocab, table: np.ndarray) -> None:
    """Write the table in the same text format load_embeddings reads.

    repr-based float formatting keeps the round trip bit-exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {table.shape[1]}\n")
        for idx in range(len(vocab)):
            token = vocab.index_to_token[idx]
            fh.write(token + " " + " ".join(repr(float(v)) for v in table[idx]) + "\n")


# ---------------------------------------------------------------------------
# JSON Lines post files
# ---------------------------------------------------------------------------


def read_posts(path: Union[str, Path]) -> list[Post]:
    posts = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("id", "user", "text"):
                if key not in obj:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            label = obj.get("label")
            if label not in (0, 1, None):
                raise ValueError(f"{path}:{lineno}: label must be 0, 1, or null")
            posts.append(Post(id=str(obj["id"]), user_id=str(obj["user"]),
                              text=obj["text"], label=label))
    return posts


def write_posts(path: Union[str, Path], posts: Iterable[Post]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in posts:
            fh.write(json.dumps({"id": p.id, "user": p.user_id,
                                 "text": p.text, "label": p.label}) + "\n")


def read_dataset(path: Union[str, Path], split: str = "train") -> Dataset:
    posts = read_posts(path)
    ids = set()
    for p in posts:
        if p.label is None:
            raise ValueError(f"dataset post {p.id} has no label")
        if p.id in ids:
            raise ValueError(f"duplicate post id {p.id}")
        ids.add(p.id)
    return Dataset(posts=posts, split=split)


def read_histories(path: Union[str, Path]) -> dict[str, HistorySet]:
    by_user: dict[str, list[Post]] = {}
    for p in read_posts(path):
        by_user.setdefault(p.user_id, []).append(p)
    return {u: HistorySet(user_id=u, posts=ps) for u, ps in by_user.items()}
