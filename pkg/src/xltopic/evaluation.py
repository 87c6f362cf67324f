"""Topic extraction and evaluation: top words, topic uniqueness, cross-lingual
coherence (CNPMI over paired reference documents), document-topic inference,
and linear classification on doc-topic features.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch

from .corpus import BowDocument, Vocabulary
from .errors import ConfigurationError
from .model import DTYPE, ModelState, docs_to_matrix, encode, topic_word_matrix

log = logging.getLogger(__name__)

DEFAULT_TOP_WORDS = 15


@dataclass
class TopicSet:
    """Per-language ranked top words: topics[k] is a list of (global word
    index, score) pairs with non-increasing scores."""

    lang: str
    topics: list[list[tuple[int, float]]]

    @property
    def n_topics(self) -> int:
        return len(self.topics)

    def word_lists(self) -> list[list[int]]:
        return [[w for w, _ in topic] for topic in self.topics]


def top_words(beta, vocab: Vocabulary, lang: str,
              n_words: int = DEFAULT_TOP_WORDS) -> TopicSet:
    """Top-n words per topic column of the (V_lang, K) topic-word matrix,
    ties broken by ascending word index."""
    if isinstance(beta, torch.Tensor):
        beta = beta.detach().numpy()
    beta = np.asarray(beta)
    v = vocab.lang_size(lang)
    if beta.shape[0] != v:
        raise ConfigurationError(
            f"beta has {beta.shape[0]} rows; vocabulary of {lang!r} has {v}")
    if n_words > v:
        raise ConfigurationError(f"n_words={n_words} exceeds vocabulary size {v}")
    off = vocab.offset(lang)
    topics = []
    idx = np.arange(v)
    for k in range(beta.shape[1]):
        order = np.lexsort((idx, -beta[:, k]))[:n_words]
        topics.append([(off + int(i), float(beta[i, k])) for i in order])
    return TopicSet(lang=lang, topics=topics)


def topic_uniqueness(topic_set: TopicSet) -> float:
    """Mean reciprocal occurrence count of each top word across topics.
    1 when all topic word lists are disjoint, 1/K when all identical."""
    counts: dict[int, int] = {}
    for words in topic_set.word_lists():
        for w in words:
            counts[w] = counts.get(w, 0) + 1
    per_topic = []
    for words in topic_set.word_lists():
        per_topic.append(sum(1.0 / counts[w] for w in words) / len(words))
    return sum(per_topic) / len(per_topic)


def dataset_topic_uniqueness(ts1: TopicSet, ts2: TopicSet) -> float:
    return 0.5 * (topic_uniqueness(ts1) + topic_uniqueness(ts2))


@dataclass
class ReferencePairs:
    """Comparable document pairs used only for co-occurrence counting."""

    pairs: list[tuple[BowDocument, BowDocument]]

    def __post_init__(self):
        for d1, d2 in self.pairs:
            if not d1.counts or not d2.counts:
                raise ConfigurationError("reference documents must be non-empty")

    def __len__(self) -> int:
        return len(self.pairs)


def cnpmi(ts1: TopicSet, ts2: TopicSet, ref: ReferencePairs,
          n_words: int | None = None) -> float:
    """Cross-lingual NPMI between same-index topics of the two languages.

    Probabilities are document-pair presence frequencies over the reference
    pairs: p(w_i, w_j) is the fraction of pairs where w_i appears on side 1
    and w_j on side 2.  A zero joint count contributes -1; a certain joint
    (p=1 on both sides) contributes +1.
    """
    if ts1.n_topics != ts2.n_topics:
        raise ConfigurationError("topic sets must have equal topic counts")
    if len(ref) == 0:
        raise ConfigurationError("reference pair set is empty")

    side1 = [frozenset(d1.counts) for d1, _ in ref.pairs]
    side2 = [frozenset(d2.counts) for _, d2 in ref.pairs]
    n = len(ref)

    lists1 = ts1.word_lists()
    lists2 = ts2.word_lists()
    if n_words is not None:
        lists1 = [ws[:n_words] for ws in lists1]
        lists2 = [ws[:n_words] for ws in lists2]

    def presence(word, sides):
        return sum(1 for s in sides if word in s)

    score = 0.0
    for words1, words2 in zip(lists1, lists2):
        c1 = {w: presence(w, side1) for w in set(words1)}
        c2 = {w: presence(w, side2) for w in set(words2)}
        topic_score = 0.0
        for wi in words1:
            for wj in words2:
                joint = sum(1 for s1, s2 in zip(side1, side2)
                            if wi in s1 and wj in s2)
                topic_score += _npmi(joint / n, c1[wi] / n, c2[wj] / n)
        score += topic_score / (len(words1) * len(words2))
    return score / len(lists1)


def _npmi(p_ij: float, p_i: float, p_j: float) -> float:
    if p_ij == 0.0 or p_i == 0.0 or p_j == 0.0:
        return -1.0
    if p_ij == 1.0:
        return 1.0  # always co-occur: limit of the ratio below
    return math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))


def infer_doc_topics(state: ModelState, docs: list[BowDocument],
                     lang: str) -> np.ndarray:
    """Posterior-mean doc-topic distributions: softmax of the encoder mean,
    no sampling."""
    x = docs_to_matrix(docs, state.vocab, lang)
    with torch.no_grad():
        mu, _ = encode(x, state.encoder(lang))
        theta = torch.softmax(mu, dim=-1)
    return theta.numpy()


def linear_classifier_eval(train_x, train_y, test_x, test_y, seed: int = 0,
                           l2: float = 1e-4, epochs: int = 200,
                           learning_rate: float = 0.1) -> float:
    """Accuracy of a multinomial logistic classifier trained by full-batch
    gradient descent on doc-topic features.  Deterministic per seed."""
    train_x = np.asarray(train_x, dtype=np.float64)
    test_x = np.asarray(test_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    test_y = np.asarray(test_y)
    classes = np.unique(train_y)
    if len(classes) < 2:
        raise ConfigurationError("training labels contain a single class")
    class_index = {c: k for k, c in enumerate(classes)}
    y = np.array([class_index[c] for c in train_y])
    n, d = train_x.shape
    c = len(classes)

    rng = np.random.default_rng(seed)
    w = rng.normal(scale=0.01, size=(c, d))
    b = np.zeros(c)
    onehot = np.eye(c)[y]
    for _ in range(epochs):
        scores = train_x @ w.T + b
        scores -= scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        p /= p.sum(axis=1, keepdims=True)
        err = (p - onehot) / n
        w -= learning_rate * (err.T @ train_x + l2 * w)
        b -= learning_rate * err.sum(axis=0)

    pred = (test_x @ w.T + b).argmax(axis=1)
    pred_labels = classes[pred]
    return float(np.mean(pred_labels == test_y))


def confusion_matrix(true_labels, pred_labels, classes) -> np.ndarray:
    index = {c: k for k, c in enumerate(classes)}
    m = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        m[index[t], index[p]] += 1
    return m


def macro_f1(confusion: np.ndarray) -> float:
    f1s = []
    for k in range(confusion.shape[0]):
        tp = confusion[k, k]
        fp = confusion[:, k].sum() - tp
        fn = confusion[k, :].sum() - tp
        denom = 2 * tp + fp + fn
        f1s.append(0.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(f1s))


def write_metrics_csv(rows, path) -> None:
    """Rows of (metric, language, value, seed)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric,language,value,seed\n")
        for metric, language, value, seed in rows:
            fh.write(f"{metric},{language},{value!r},{seed}\n")


def write_topics_txt(ts1: TopicSet, ts2: TopicSet, vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k in range(ts1.n_topics):
            fh.write(f"topic {k}\n")
            for ts in (ts1, ts2):
                words = " ".join(f"{vocab.word_of(w)}:{s:.4f}"
                                 for w, s in ts.topics[k])
                fh.write(f"  {ts.lang}: {words}\n")
