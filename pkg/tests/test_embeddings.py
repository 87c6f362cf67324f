import numpy as np
import pytest

from xltopic.corpus import Vocabulary
from xltopic.embeddings import (EmbeddingTable, load_embeddings,
                                nearest_neighbors, train_skipgram)
from xltopic.errors import ConfigurationError, ParseError
from oracles import cosine


def table(rows, lang="l1"):
    return EmbeddingTable(lang=lang, vectors=np.array(rows, dtype=np.float64))


class TestSkipgram:
    def test_deterministic(self):
        docs = [[0, 1, 2, 0, 1], [2, 0, 1]]
        t1 = train_skipgram(docs, 3, dim=8, epochs=2, seed=5)
        t2 = train_skipgram(docs, 3, dim=8, epochs=2, seed=5)
        assert np.array_equal(t1.vectors, t2.vectors)

    def test_cooccurrence_ordering(self):
        # (0,1) always co-occur within the window; (0,2) never do
        rng = np.random.default_rng(0)
        docs = []
        for _ in range(200):
            docs.append([0, 1] if rng.random() < 0.5 else [1, 0])
            docs.append([2, 3] if rng.random() < 0.5 else [3, 2])
        t = train_skipgram(docs, 4, dim=16, window=2, epochs=10, seed=1)
        sim_ab = cosine(t.vectors[0], t.vectors[1])
        sim_ac = cosine(t.vectors[0], t.vectors[2])
        assert sim_ab > sim_ac

    def test_single_word_vocab_errors(self):
        with pytest.raises(ConfigurationError):
            train_skipgram([[0, 0, 0]], 1, dim=4)

    def test_no_zero_rows(self):
        t = train_skipgram([[0, 1, 2]] * 10, 3, dim=8, epochs=2, seed=0)
        assert (np.linalg.norm(t.vectors, axis=1) > 0).all()


class TestLoadEmbeddings:
    def vocab(self):
        return Vocabulary(words_l1=["a", "b"], words_l2=["x"])

    def test_full_coverage(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("2 3\na 1 0 0\nb 0 1 0\n", encoding="utf-8")
        t = load_embeddings(path, self.vocab(), "l1")
        assert np.array_equal(t.vectors, [[1, 0, 0], [0, 1, 0]])

    def test_missing_words_random(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("1 2\nunrelated 1 2\n", encoding="utf-8")
        t = load_embeddings(path, self.vocab(), "l1", seed=3)
        assert t.vectors.shape == (2, 2)
        assert (np.linalg.norm(t.vectors, axis=1) > 0).all()

    def test_wrong_row_length(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("1 3\na 1 0\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 2"):
            load_embeddings(path, self.vocab(), "l1")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("not a header\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1"):
            load_embeddings(path, self.vocab(), "l1")


class TestNearestNeighbors:
    def test_duplicate_vector_first(self):
        t = table([[1, 0], [1, 0], [0, 1], [-1, 0]])
        assert nearest_neighbors(t, 0, 1) == [1]

    def test_all_others_permutation(self):
        t = table([[1, 0], [0.9, 0.1], [0, 1], [-1, 0.2]])
        out = nearest_neighbors(t, 0, 3)
        assert sorted(out) == [1, 2, 3]

    def test_brute_force_oracle(self):
        rows = [[1.0, 0.2], [-0.4, 0.9], [0.5, 0.5], [0.1, -1.0]]
        t = table(rows)
        for q in range(4):
            sims = [(-cosine(rows[q], rows[j]), j) for j in range(4) if j != q]
            expected = [j for _, j in sorted(sims)]
            assert nearest_neighbors(t, q, 3) == expected

    def test_n_zero(self):
        t = table([[1, 0], [0, 1]])
        assert nearest_neighbors(t, 0, 0) == []

    def test_zero_query_errors(self):
        t = table([[0, 0], [1, 0]])
        with pytest.raises(ConfigurationError):
            nearest_neighbors(t, 0, 1)

    def test_scale_invariance(self):
        rng = np.random.default_rng(2)
        rows = rng.normal(size=(6, 3))
        t1 = table(rows)
        t2 = table(rows * 7.5)
        for q in range(6):
            assert nearest_neighbors(t1, q, 5) == nearest_neighbors(t2, q, 5)

    def test_no_query_no_duplicates(self):
        rng = np.random.default_rng(4)
        t = table(rng.normal(size=(8, 4)))
        for q in range(8):
            out = nearest_neighbors(t, q, 8)
            assert q not in out
            assert len(out) == len(set(out)) == 7
