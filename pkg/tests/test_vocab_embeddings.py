import numpy as np
import pytest

from hatedetect.textio import (
    EMB_DIM, PAD, UNK, DimMismatch, EmbeddingFormatError, EmptyCorpus, Post,
    Vocab, build_vocab, load_embeddings, oov_vector, random_embeddings,
    save_embeddings,
)


def posts_from(token_lists):
    return [Post(id=f"p{i}", user_id="u", text=" ".join(toks))
            for i, toks in enumerate(token_lists)]


class TestVocab:
    def test_specials_pinned(self):
        v = Vocab(["b", "a"])
        assert v.index(UNK) == 0
        assert v.index(PAD) == 1
        assert v.index("b") == 2
        assert v.index("a") == 3

    def test_unknown_maps_to_unk(self):
        v = Vocab(["x"])
        assert v.index("zzz") == 0

    def test_encode_dtype_and_values(self):
        v = Vocab(["x", "y"])
        ids = v.encode(["y", "nope", "x"])
        assert ids.dtype == np.int64
        assert ids.tolist() == [3, 0, 2]

    def test_round_trip(self, tmp_path):
        v = Vocab(["q", "w", "e"])
        p = tmp_path / "vocab.txt"
        v.save(p)
        w = Vocab.load(p)
        assert w.ordered_tokens() == v.ordered_tokens()

    def test_load_rejects_corrupted_special_order(self, tmp_path):
        p = tmp_path / "vocab.txt"
        p.write_text("<pad>\n<unk>\nword\n", encoding="utf-8")
        with pytest.raises(ValueError):
            Vocab.load(p)


class TestBuildVocab:
    def test_min_count_filters(self):
        corpus = posts_from([["rare", "common"], ["common"]])
        v = build_vocab(corpus, min_count=2)
        assert "common" in v
        assert "rare" not in v

    def test_frequency_then_lexicographic_order(self):
        corpus = posts_from([["b", "a", "a"], ["b", "c"]])
        v = build_vocab(corpus, min_count=1)
        # a and b both occur twice; ties break alphabetically
        assert v.ordered_tokens() == [UNK, PAD, "a", "b", "c"]

    def test_max_size_cap(self):
        corpus = posts_from([[f"tok{chr(97 + i)}" for i in range(10)]] * 2)
        v = build_vocab(corpus, min_count=1, max_size=3)
        assert len(v) == 2 + 3

    def test_empty_corpus_raises(self):
        with pytest.raises(EmptyCorpus):
            build_vocab([], min_count=1)
        with pytest.raises(EmptyCorpus):
            build_vocab(posts_from([["onlyonce"]]), min_count=2)


class TestEmbeddings:
    def test_oov_vector_deterministic_and_bounded(self):
        a = oov_vector("token")
        b = oov_vector("token")
        c = oov_vector("other")
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert a.shape == (EMB_DIM,)
        assert np.all(np.abs(a) <= 0.1)

    def test_random_embeddings_shape_and_pad(self):
        v = Vocab(["x", "y"])
        table = random_embeddings(v)
        assert table.shape == (4, EMB_DIM)
        assert np.array_equal(table[v.index(PAD)], np.zeros(EMB_DIM))
        assert np.array_equal(table[v.index("x")], oov_vector("x"))

    def _write_file(self, path, rows, dim=EMB_DIM, count=None):
        lines = [f"{count if count is not None else len(rows)} {dim}"]
        for token, vec in rows:
            lines.append(token + " " + " ".join(repr(float(x)) for x in vec))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def test_load_uses_file_vectors(self, tmp_path):
        v = Vocab(["x", "y"])
        vec = np.linspace(-1.0, 1.0, EMB_DIM)
        p = tmp_path / "emb.txt"
        self._write_file(p, [("x", vec)])
        table = load_embeddings(p, v)
        assert np.allclose(table[v.index("x")], vec)
        # tokens absent from the file fall back to the hashed vector
        assert np.array_equal(table[v.index("y")], oov_vector("y"))
        assert np.array_equal(table[v.index(PAD)], np.zeros(EMB_DIM))

    def test_dim_mismatch(self, tmp_path):
        v = Vocab(["x"])
        p = tmp_path / "emb.txt"
        self._write_file(p, [("x", np.zeros(8))], dim=8)
        with pytest.raises(DimMismatch):
            load_embeddings(p, v)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "emb.txt"
        p.write_text("not a header\n", encoding="utf-8")
        with pytest.raises(EmbeddingFormatError, match="line 1"):
            load_embeddings(p, Vocab(["x"]))

    def test_short_row_reports_line_number(self, tmp_path):
        v = Vocab(["x"])
        p = tmp_path / "emb.txt"
        good = "x " + " ".join("0.0" for _ in range(EMB_DIM))
        p.write_text(f"2 {EMB_DIM}\n{good}\nbad 1.0 2.0\n", encoding="utf-8")
        with pytest.raises(EmbeddingFormatError, match="line 3"):
            load_embeddings(p, v)

    def test_non_numeric_value_reports_line_number(self, tmp_path):
        v = Vocab(["x"])
        p = tmp_path / "emb.txt"
        row = "x " + " ".join(["0.0"] * (EMB_DIM - 1) + ["oops"])
        p.write_text(f"1 {EMB_DIM}\n{row}\n", encoding="utf-8")
        with pytest.raises(EmbeddingFormatError, match="line 2"):
            load_embeddings(p, v)

    def test_save_load_bit_exact(self, tmp_path):
        v = Vocab(["x", "y", "z"])
        rng = np.random.default_rng(5)
        table = rng.standard_normal((len(v), EMB_DIM))
        table[v.index(PAD)] = 0.0
        p = tmp_path / "emb.txt"
        save_embeddings(p, v, table)
        back = load_embeddings(p, v)
        assert np.array_equal(back, table)
