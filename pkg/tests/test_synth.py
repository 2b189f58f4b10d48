import collections
import dataclasses
import json

import pytest

from hatedetect import synth
from hatedetect.lsh import jaccard, shingles
from hatedetect.textio import write_posts


def small_config(**overrides):
    base = dict(n_users=30, posts_per_user=4, vocab_size=300,
                history_posts_per_user=3)
    base.update(overrides)
    return synth.SynthConfig(**base)


def test_same_seed_byte_identical(tmp_path):
    paths = []
    for run in ("a", "b"):
        ds, hists, pool = synth.gen_synthetic(small_config(), seed=7)
        p = tmp_path / f"{run}.jsonl"
        write_posts(p, ds.posts + [hp for h in hists for hp in h.posts] + pool)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_different_seeds_differ():
    a, _, _ = synth.gen_synthetic(small_config(), seed=1)
    b, _, _ = synth.gen_synthetic(small_config(), seed=2)
    assert [p.text for p in a.posts] != [p.text for p in b.posts]


def test_label_marginal_tracks_user_fraction():
    cfg = synth.SynthConfig(n_users=300, posts_per_user=5)
    ds, _, _ = synth.gen_synthetic(cfg, seed=3)
    counts = ds.label_counts()
    frac = counts[1] / len(ds.posts)
    assert abs(frac - 1.0 / 3.0) < 0.02


def test_hate_posts_use_hate_lexicon():
    cfg = small_config(ambiguous_frac=0.0)
    ds, _, _ = synth.gen_synthetic(cfg, seed=5)
    lex = synth._build_lexicon(cfg.vocab_size)
    hate = set(lex.hate_signal)
    benign = set(lex.benign_signal)
    for p in ds.posts:
        toks = set(p.tokens)
        if p.label == 1:
            assert toks & hate
            assert not toks & benign
        else:
            assert not toks & hate


def test_ambiguous_posts_carry_no_signal():
    cfg = small_config(ambiguous_frac=1.0)
    ds, _, _ = synth.gen_synthetic(cfg, seed=5)
    lex = synth._build_lexicon(cfg.vocab_size)
    signal = set(lex.hate_signal) | set(lex.benign_signal)
    for p in ds.posts:
        assert p.id.startswith("amb")
        assert not set(p.tokens) & signal
    # labels still follow the author persona
    assert 0 < ds.label_counts()[1] < len(ds.posts)


def test_label_noise_flips_labels():
    cfg = synth.SynthConfig(n_users=200, posts_per_user=5, label_noise=0.3)
    noisy, _, _ = synth.gen_synthetic(cfg, seed=9)
    clean, _, _ = synth.gen_synthetic(dataclasses.replace(cfg, label_noise=0.0), seed=9)
    flipped = sum(1 for a, b in zip(noisy.posts, clean.posts) if a.label != b.label)
    assert abs(flipped / len(clean.posts) - 0.3) < 0.03


def test_pool_contains_copy_of_every_post():
    ds, _, pool = synth.gen_synthetic(small_config(), seed=4)
    by_id = {p.id: p for p in pool}
    for p in ds.posts:
        copy = by_id[f"pool-{p.id}"]
        assert copy.text == p.text
        assert copy.user_id == p.user_id
        assert copy.label is None


def test_perturb_duplicates_are_near_not_exact():
    cfg = small_config(near_duplicate_rate=1.0, duplicate_style="perturb",
                       min_post_len=10, max_post_len=14)
    ds, _, pool = synth.gen_synthetic(cfg, seed=6)
    dups = {p.id: p for p in pool if p.id.startswith("dup-")}
    assert len(dups) == len(ds.posts)
    for src in ds.posts:
        dup = dups[f"dup-{src.id}"]
        assert dup.user_id != src.user_id
        assert dup.text != src.text
        j = jaccard(shingles(src.tokens), shingles(dup.tokens))
        assert j > 0.5


def test_reveal_duplicates_append_matching_signal():
    cfg = small_config(near_duplicate_rate=1.0, duplicate_style="reveal",
                       ambiguous_frac=1.0, min_post_len=10, max_post_len=14)
    ds, _, pool = synth.gen_synthetic(cfg, seed=6)
    lex = synth._build_lexicon(cfg.vocab_size)
    hate = set(lex.hate_signal)
    benign = set(lex.benign_signal)
    dups = {p.id: p for p in pool if p.id.startswith("dup-")}
    for src in ds.posts:
        dup = dups[f"dup-{src.id}"]
        assert dup.tokens[0] == synth.DUP_MARKER
        assert dup.tokens[1:-1] == src.tokens
        tail = dup.tokens[-1]
        assert tail in (hate if src.label == 1 else benign)


def test_zero_duplicate_rate_plants_nothing():
    _, _, pool = synth.gen_synthetic(small_config(near_duplicate_rate=0.0), seed=8)
    assert not [p for p in pool if p.id.startswith("dup-")]


def test_histories_cover_every_user():
    cfg = small_config(history_posts_per_user=4)
    ds, hists, _ = synth.gen_synthetic(cfg, seed=2)
    users = {p.user_id for p in ds.posts}
    assert {h.user_id for h in hists} == users
    for h in hists:
        assert len(h.posts) == 4
        assert all(hp.user_id == h.user_id for hp in h.posts)


@pytest.mark.parametrize("field_name,value", [
    ("hate_user_fraction", 1.5),
    ("label_noise", -0.1),
    ("near_duplicate_rate", 2.0),
    ("ambiguous_frac", -1.0),
])
def test_fraction_validation(field_name, value):
    with pytest.raises(ValueError, match=field_name):
        synth.gen_synthetic(small_config(**{field_name: value}), seed=0)


def test_other_validation():
    with pytest.raises(ValueError, match="duplicate_style"):
        small_config(duplicate_style="shuffle").validate()
    with pytest.raises(ValueError, match="length"):
        small_config(min_post_len=8, max_post_len=5).validate()
    with pytest.raises(ValueError, match="vocab_size"):
        small_config(vocab_size=10).validate()


class TestSplit:
    def test_stratified_and_disjoint(self):
        ds, _, _ = synth.gen_synthetic(small_config(), seed=3)
        tr, te = synth.split_dataset(ds, 0.25, seed=0)
        assert len(tr.posts) + len(te.posts) == len(ds.posts)
        assert not {p.id for p in tr.posts} & {p.id for p in te.posts}
        for label in (0, 1):
            total = ds.label_counts()[label]
            got = te.label_counts()[label]
            assert got == int(round(total * 0.25))

    def test_deterministic(self):
        ds, _, _ = synth.gen_synthetic(small_config(), seed=3)
        a = synth.split_dataset(ds, 0.3, seed=5)
        b = synth.split_dataset(ds, 0.3, seed=5)
        assert [p.id for p in a[0].posts] == [p.id for p in b[0].posts]
        assert [p.id for p in a[1].posts] == [p.id for p in b[1].posts]

    def test_bad_fraction(self):
        ds, _, _ = synth.gen_synthetic(small_config(), seed=3)
        with pytest.raises(ValueError):
            synth.split_dataset(ds, 0.0, seed=0)


class TestClusterPool:
    def test_shapes_and_planted_dups(self):
        posts, targets = synth.gen_cluster_pool(
            n_clusters=10, cluster_size=6, n_exact_dups=4, seed=1)
        assert len(posts) == 10 * 6 + 4
        assert len(targets) == 4
        by_id = {p.id: p for p in posts}
        for di, tid in enumerate(targets):
            dup = by_id[f"xdup{di:03d}"]
            assert dup.text == by_id[tid].text
            assert dup.user_id != by_id[tid].user_id

    def test_cluster_similarity_structure(self):
        posts, _ = synth.gen_cluster_pool(
            n_clusters=6, cluster_size=5, n_exact_dups=0, seed=2)
        sets = {p.id: shingles(p.tokens) for p in posts}
        within, across = [], []
        for a in posts:
            for b in posts:
                if a.id >= b.id:
                    continue
                j = jaccard(sets[a.id], sets[b.id])
                if a.id[:4] == b.id[:4]:
                    within.append(j)
                else:
                    across.append(j)
        assert min(within) > 0.6
        assert max(across) < 0.2
