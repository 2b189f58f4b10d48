"""Command-line entry points.

Subcommands cover the full pipeline: generate or ingest corpora, pretrain
the target branch, build a retrieval cache, train any mode, and evaluate
or predict with a saved model.  All state lives in plain files (JSONL
corpora, JSON caches and checkpoints), so every stage can be rerun or
inspected independently.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import synth, trainer
from .lsh import EmptyShingles, InsufficientPool, LshConfig, build_index
from .metrics import McNemarUndefined, mcnemar, relative_improvement
from .textio import (Dataset, EmbeddingFormatError, EmptyCorpus,
                     build_vocab, load_embeddings, random_embeddings,
                     read_dataset, read_histories, read_posts, write_posts)
from .trainer import TrainConfig


def _write_lines(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _histories_arg(path: str | None):
    return read_histories(path) if path else {}


def _config_from_args(args, meta_config: dict | None = None) -> TrainConfig:
    cfg = TrainConfig(**meta_config) if meta_config else TrainConfig()
    for name in ("mode", "epochs", "batch_size", "lr", "lr_policy", "neighbors",
                 "steps", "alpha", "epsilon_start", "epsilon_end", "max_history",
                 "seed"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "train_l_ia", False):
        cfg.train_l_ia = True
    if getattr(args, "no_warm_start", False):
        cfg.warm_start = False
    return cfg


def _load_pool_and_cache(args, targets):
    pool = read_posts(args.pool) if getattr(args, "pool", None) else None
    cache = None
    if getattr(args, "neighbor_cache", None):
        if pool is None:
            raise SystemExit("--neighbor-cache requires --pool to resolve post ids")
        cache = trainer.load_neighbors(args.neighbor_cache, pool)
    return pool, cache


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_synthetic(args) -> int:
    config = synth.PRESETS[args.preset]()
    dataset, histories, pool = synth.gen_synthetic(config, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.test_frac > 0:
        train_ds, test_ds = synth.split_dataset(dataset, args.test_frac, args.seed)
        write_posts(out / "train.jsonl", train_ds.posts)
        write_posts(out / "test.jsonl", test_ds.posts)
    else:
        write_posts(out / "train.jsonl", dataset.posts)
    hist_rows = [p for hs in histories for p in hs.posts]
    write_posts(out / "histories.jsonl", hist_rows)
    write_posts(out / "pool.jsonl", pool)
    counts = dataset.label_counts()
    print(f"wrote {len(dataset.posts)} posts ({counts.get(1, 0)} hate, "
          f"{counts.get(0, 0)} non-hate), {len(hist_rows)} history posts, "
          f"{len(pool)} pool posts to {out}")
    return 0


def cmd_ingest(args) -> int:
    posts = read_posts(args.data)
    labeled = [p for p in posts if p.label is not None]
    empty = [p.id for p in posts if not p.tokens]
    if empty:
        print(f"warning: {len(empty)} posts tokenize to nothing "
              f"(first: {empty[:3]})", file=sys.stderr)
    if args.out:
        write_posts(args.out, posts)
    users = {p.user_id for p in posts}
    print(f"{len(posts)} posts from {len(users)} users, {len(labeled)} labeled")
    return 0


def cmd_pretrain(args) -> int:
    dataset = read_dataset(args.train)
    vocab = build_vocab(dataset.posts, min_count=args.min_count)
    if args.embeddings:
        emb = load_embeddings(args.embeddings, vocab)
    else:
        emb = random_embeddings(vocab)
    cfg = _config_from_args(args)
    cfg.mode = "baseline"
    model, result = trainer.pretrain(dataset, vocab, emb, cfg)
    trainer.save_model(args.out, model, extra_meta={"mode": "baseline",
                                                    "config": asdict(cfg)})
    print(f"pretrained for {len(result.epoch_losses)} epochs "
          f"(val loss {result.val_losses[-1]:.4f}); saved to {args.out}")
    return 0


def cmd_build_index(args) -> int:
    pool = read_posts(args.pool)
    targets = read_posts(args.targets)
    index = build_index(pool, LshConfig())
    cache = trainer.precompute_neighbors(targets, index, args.neighbors, args.seed)
    trainer.save_neighbors(args.out, cache)
    padded = sum(1 for nb in cache.values() if nb.padded)
    print(f"indexed {len(pool)} pool posts; cached {args.neighbors} neighbors "
          f"for {len(cache)} targets ({padded} padded) to {args.out}")
    return 0


def cmd_train(args) -> int:
    dataset = read_dataset(args.train)
    histories = _histories_arg(args.histories)
    if args.model_in:
        model, _, meta = trainer.load_model(args.model_in)
        cfg = _config_from_args(args, None)
    else:
        vocab = build_vocab(dataset.posts, min_count=args.min_count)
        emb = load_embeddings(args.embeddings, vocab) if args.embeddings \
            else random_embeddings(vocab)
        cfg = _config_from_args(args)
        model, _ = trainer.pretrain(dataset, vocab, emb, cfg)
    policy = trainer.prepare_for_mode(model, cfg)
    pool, cache = _load_pool_and_cache(args, dataset.posts)
    result = trainer.train(model, dataset, histories, cfg, pool=pool,
                           neighbor_cache=cache, policy=policy)
    trainer.save_model(args.out, model, policy=result.policy,
                       extra_meta={"mode": cfg.mode, "config": asdict(cfg)})
    losses = ", ".join(f"{l:.4f}" for l in result.epoch_losses)
    print(f"trained mode={cfg.mode} epochs={len(result.epoch_losses)} "
          f"loss=[{losses}] episodes={result.episodes} "
          f"policy_updates={result.policy_updates}; saved to {args.out}")
    return 0


def cmd_predict(args) -> int:
    model, policy, meta = trainer.load_model(args.model)
    cfg = _config_from_args(args, meta.get("config"))
    dataset = read_posts(args.data)
    histories = _histories_arg(args.histories)
    pool, cache = _load_pool_and_cache(args, dataset)
    preds = trainer.predict(model, dataset, histories, cfg, pool=pool,
                            neighbor_cache=cache, policy=policy)
    rows = [{"id": p.id, "label": int(pred)} for p, pred in zip(dataset, preds)]
    if args.out:
        _write_lines(args.out, rows)
        print(f"wrote {len(rows)} predictions to {args.out}")
    else:
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    model, policy, meta = trainer.load_model(args.model)
    cfg = _config_from_args(args, meta.get("config"))
    dataset = read_dataset(args.data, split="test")
    histories = _histories_arg(args.histories)
    pool, cache = _load_pool_and_cache(args, dataset.posts)
    report, preds = trainer.evaluate(model, dataset, histories, cfg, pool=pool,
                                     neighbor_cache=cache, policy=policy)
    if args.json:
        print(report.to_json())
    else:
        print(report.to_text())
    if args.preds_out:
        _write_lines(args.preds_out,
                     [{"id": p.id, "label": int(v)} for p, v in zip(dataset.posts, preds)])
    if args.compare:
        other = {row["id"]: int(row["label"])
                 for row in map(json.loads, Path(args.compare).read_text().splitlines())}
        missing = [p.id for p in dataset.posts if p.id not in other]
        if missing:
            raise SystemExit(f"--compare file lacks predictions for {missing[:3]}")
        pred_b = [other[p.id] for p in dataset.posts]
        labels = [p.label for p in dataset.posts]
        try:
            mc = mcnemar(labels, preds, pred_b)
        except McNemarUndefined as e:
            print(f"mcnemar: undefined ({e})", file=sys.stderr)
            return 2
        print(f"mcnemar chi2={mc.chi2:.4f} p={mc.p_value:.4f} "
              f"(only-this-correct={mc.only_a_correct}, "
              f"only-other-correct={mc.only_b_correct})")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser, modes=True) -> None:
    if modes:
        p.add_argument("--mode", choices=trainer.MODES, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lr-policy", dest="lr_policy", type=float, default=None)
    p.add_argument("--neighbors", type=int, choices=trainer.NEIGHBOR_CHOICES,
                   default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epsilon", dest="epsilon_start", type=float, default=None)
    p.add_argument("--epsilon-final", dest="epsilon_end", type=float, default=None)
    p.add_argument("--max-history", dest="max_history", type=int, default=None)
    p.add_argument("--train-l-ia", dest="train_l_ia", action="store_true")
    p.add_argument("--no-warm-start", dest="no_warm_start", action="store_true")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hatedetect",
        description="Hate speech detection with user history and a learned "
                    "similar-post walk.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic corpus")
    p.add_argument("--preset", choices=sorted(synth.PRESETS), default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-frac", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("ingest", help="validate and normalize a JSONL corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pretrain", help="train the target branch from scratch")
    p.add_argument("--train", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--min-count", dest="min_count", type=int, default=2)
    p.add_argument("--out", required=True)
    _add_train_flags(p, modes=False)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("build-index", help="precompute neighbor sets")
    p.add_argument("--pool", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--neighbors", type=int, choices=trainer.NEIGHBOR_CHOICES,
                   default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("train", help="train a classifier in any mode")
    p.add_argument("--train", required=True)
    p.add_argument("--histories")
    p.add_argument("--pool")
    p.add_argument("--neighbor-cache", dest="neighbor_cache")
    p.add_argument("--model-in", dest="model_in",
                   help="pretrained checkpoint; omitted means pretrain first")
    p.add_argument("--embeddings")
    p.add_argument("--min-count", dest="min_count", type=int, default=2)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label posts with a saved model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--histories")
    p.add_argument("--pool")
    p.add_argument("--neighbor-cache", dest="neighbor_cache")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a saved model on labeled data")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--histories")
    p.add_argument("--pool")
    p.add_argument("--neighbor-cache", dest="neighbor_cache")
    p.add_argument("--json", action="store_true")
    p.add_argument("--preds-out", dest="preds_out")
    p.add_argument("--compare", help="JSONL of {'id','label'} predictions to "
                                     "test against with McNemar")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EmptyCorpus, EmbeddingFormatError, EmptyShingles, InsufficientPool,
            FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
