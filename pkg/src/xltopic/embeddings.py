"""Monolingual word embeddings: skip-gram training with negative sampling,
text-format loading, and exact cosine nearest-neighbor queries.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .errors import ConfigurationError, ParseError

log = logging.getLogger(__name__)


@dataclass
class EmbeddingTable:
    """Row i is the vector of within-language word index i."""

    lang: str
    vectors: np.ndarray  # (V, d) float64

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def train_skipgram(docs, vocab_size, dim=100, window=5, negatives=5, epochs=10,
                   seed=0, learning_rate=0.025, lang="l1", batch_size=1024):
    """Train skip-gram with negative sampling on index-encoded documents.

    `docs` is a list of lists of within-language word indices.  Training is
    single-threaded and fully determined by `seed`.  Returns the input-vector
    table.
    """
    if not docs or all(len(d) == 0 for d in docs):
        raise ConfigurationError("empty corpus for embedding training")
    if vocab_size < 2:
        raise ConfigurationError(
            "embedding training needs a vocabulary of at least 2 words "
            "(no negative samples possible)")
    if dim < 2:
        raise ConfigurationError("embedding dimension must be >= 2")

    rng = np.random.default_rng(seed)

    # (center, context) pairs with a fixed symmetric window
    centers, contexts = [], []
    freq = np.zeros(vocab_size, dtype=np.float64)
    for doc in docs:
        for pos, w in enumerate(doc):
            freq[w] += 1
            lo = max(0, pos - window)
            hi = min(len(doc), pos + window + 1)
            for q in range(lo, hi):
                if q != pos:
                    centers.append(w)
                    contexts.append(doc[q])
    if not centers:
        raise ConfigurationError("no skip-gram pairs (documents too short?)")
    centers = np.asarray(centers, dtype=np.int64)
    contexts = np.asarray(contexts, dtype=np.int64)

    # unigram^0.75 negative-sampling distribution
    noise = freq ** 0.75
    noise /= noise.sum()

    w_in = (rng.random((vocab_size, dim)) - 0.5) / dim
    w_out = np.zeros((vocab_size, dim), dtype=np.float64)

    n_pairs = len(centers)
    n_batches_total = epochs * ((n_pairs + batch_size - 1) // batch_size)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, batch_size):
            idx = order[start:start + batch_size]
            c = centers[idx]
            pos = contexts[idx]
            neg = rng.choice(vocab_size, size=(len(idx), negatives), p=noise)

            lr = learning_rate * max(1e-4, 1.0 - step / n_batches_total)
            step += 1

            vc = w_in[c]                                    # (b, d)
            targets = np.concatenate([pos[:, None], neg], axis=1)  # (b, 1+neg)
            vt = w_out[targets]                             # (b, 1+neg, d)
            score = np.einsum("bd,bnd->bn", vc, vt)
            sig = 1.0 / (1.0 + np.exp(-score))
            labels = np.zeros_like(sig)
            labels[:, 0] = 1.0
            err = sig - labels                              # (b, 1+neg)

            grad_c = np.einsum("bn,bnd->bd", err, vt)
            grad_t = err[:, :, None] * vc[:, None, :]
            np.add.at(w_in, c, -lr * grad_c)
            np.add.at(w_out, targets.ravel(),
                      -lr * grad_t.reshape(-1, dim))

    return EmbeddingTable(lang=lang, vectors=w_in)


def load_embeddings(path, vocab: Vocabulary, lang: str, seed=0) -> EmbeddingTable:
    """Load embeddings from text format (`V d` header, then `word v1 ... vd`).

    Vocabulary words missing from the file get seeded random rows.
    """
    vocab.check_lang(lang)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty embedding file", line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError("header must be `V d`", line=1)
    try:
        n_rows, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError("header must be two integers `V d`", line=1)
    if dim < 2:
        raise ParseError("embedding dimension must be >= 2", line=1)

    loaded: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise ParseError(
                f"expected word + {dim} floats, got {len(parts) - 1}", line=lineno)
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError:
            raise ParseError("non-numeric embedding value", line=lineno)
        loaded[parts[0]] = vec
    if len(loaded) != n_rows:
        log.warning("embedding header declares %d rows, file has %d",
                    n_rows, len(loaded))

    rng = np.random.default_rng(seed)
    words = vocab.words(lang)
    vectors = np.empty((len(words), dim), dtype=np.float64)
    missing = 0
    for i, w in enumerate(words):
        if w in loaded:
            vectors[i] = loaded[w]
        else:
            vectors[i] = rng.normal(scale=0.1, size=dim)
            missing += 1
    if missing:
        log.warning("%d/%d vocabulary words missing from %s; seeded random rows",
                    missing, len(words), path)
    return EmbeddingTable(lang=lang, vectors=vectors)


def nearest_neighbors(table: EmbeddingTable, word_index: int, n: int) -> list[int]:
    """Top-n within-language neighbors by cosine similarity.

    The query itself is excluded; ties are broken by ascending index.
    """
    if n < 0:
        raise ConfigurationError("n must be >= 0")
    vecs = table.vectors
    v = vecs[word_index]
    qnorm = np.linalg.norm(v)
    if qnorm == 0.0:
        raise ConfigurationError(
            f"query row {word_index} is all-zero; cosine undefined")
    if n == 0:
        return []
    norms = np.linalg.norm(vecs, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = (vecs @ v) / (norms * qnorm)
    sims[norms == 0.0] = -2.0  # below any cosine, ranked last
    sims[word_index] = -np.inf
    order = np.lexsort((np.arange(len(vecs)), -sims))
    order = order[order != word_index]
    return [int(i) for i in order[:n]]
