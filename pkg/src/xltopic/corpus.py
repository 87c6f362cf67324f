"""Bilingual corpus ingestion: vocabulary building, bag-of-words vectorization,
and translation dictionaries.

Global word indices follow a fixed convention: indices 0..V1-1 are language-1
words, indices V1..V1+V2-1 are language-2 words.  Everything downstream
(linking, topic representations, topic-word matrices) relies on this layout.
"""
from __future__ import annotations

import collections
import logging
from dataclasses import dataclass, field

from .errors import ConfigurationError, ParseError

log = logging.getLogger(__name__)


@dataclass
class Vocabulary:
    """Joint bilingual vocabulary with per-language and global index maps.

    Treated as immutable after construction; safe for concurrent readers.
    """

    words_l1: list[str]
    words_l2: list[str]
    lang1: str = "l1"
    lang2: str = "l2"
    _index_l1: dict[str, int] = field(init=False, repr=False)
    _index_l2: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.words_l1) < 1:
            raise ConfigurationError(f"empty vocabulary for language {self.lang1!r}")
        if len(self.words_l2) < 1:
            raise ConfigurationError(f"empty vocabulary for language {self.lang2!r}")
        self._index_l1 = {w: i for i, w in enumerate(self.words_l1)}
        self._index_l2 = {w: i for i, w in enumerate(self.words_l2)}
        if len(self._index_l1) != len(self.words_l1):
            raise ConfigurationError(f"duplicate words in language {self.lang1!r}")
        if len(self._index_l2) != len(self.words_l2):
            raise ConfigurationError(f"duplicate words in language {self.lang2!r}")

    @property
    def v1(self) -> int:
        return len(self.words_l1)

    @property
    def v2(self) -> int:
        return len(self.words_l2)

    @property
    def size(self) -> int:
        return self.v1 + self.v2

    @property
    def langs(self) -> tuple[str, str]:
        return (self.lang1, self.lang2)

    def check_lang(self, lang: str) -> str:
        if lang not in (self.lang1, self.lang2):
            raise ConfigurationError(f"unknown language {lang!r}; expected {self.langs}")
        return lang

    def other_lang(self, lang: str) -> str:
        self.check_lang(lang)
        return self.lang2 if lang == self.lang1 else self.lang1

    def lang_size(self, lang: str) -> int:
        self.check_lang(lang)
        return self.v1 if lang == self.lang1 else self.v2

    def offset(self, lang: str) -> int:
        """Global index of the first word of `lang`."""
        self.check_lang(lang)
        return 0 if lang == self.lang1 else self.v1

    def lang_range(self, lang: str) -> range:
        off = self.offset(lang)
        return range(off, off + self.lang_size(lang))

    def lang_of(self, global_index: int) -> str:
        if 0 <= global_index < self.v1:
            return self.lang1
        if self.v1 <= global_index < self.size:
            return self.lang2
        raise IndexError(f"global word index {global_index} out of range")

    def global_index(self, word: str, lang: str):
        """Global index of `word` in `lang`, or None when out of vocabulary."""
        self.check_lang(lang)
        if lang == self.lang1:
            local = self._index_l1.get(word)
            return local
        local = self._index_l2.get(word)
        return None if local is None else self.v1 + local

    def local_index(self, word: str, lang: str):
        self.check_lang(lang)
        table = self._index_l1 if lang == self.lang1 else self._index_l2
        return table.get(word)

    def word_of(self, global_index: int) -> str:
        lang = self.lang_of(global_index)
        if lang == self.lang1:
            return self.words_l1[global_index]
        return self.words_l2[global_index - self.v1]

    def words(self, lang: str) -> list[str]:
        self.check_lang(lang)
        return self.words_l1 if lang == self.lang1 else self.words_l2


@dataclass
class BowDocument:
    """Sparse bag-of-words document over global word indices of one language."""

    counts: dict[int, int]
    lang: str
    label: int | None = None

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class TranslationDictionary:
    """Symmetric map from a global word index to its cross-lingual translations."""

    trans: dict[int, set[int]]

    def translations(self, global_index: int) -> set[int]:
        return self.trans.get(global_index, set())

    @property
    def n_entries(self) -> int:
        """Number of unordered translation pairs."""
        return sum(len(s) for s in self.trans.values()) // 2

    def coverage(self, vocab: Vocabulary, lang: str) -> float:
        rng = vocab.lang_range(lang)
        covered = sum(1 for i in rng if self.trans.get(i))
        return covered / len(rng)


def build_vocabulary(docs_l1, docs_l2, min_doc_freq=1, max_vocab_per_lang=None,
                     lang1="l1", lang2="l2") -> Vocabulary:
    """Build the joint vocabulary from two tokenized corpora.

    Per language, keeps words with document frequency >= min_doc_freq,
    truncated to max_vocab_per_lang by descending frequency (ties broken
    lexicographically).
    """
    if not docs_l1 or not docs_l2:
        raise ConfigurationError("both corpora must be non-empty")
    if min_doc_freq < 1:
        raise ConfigurationError("min_doc_freq must be >= 1")

    def select(docs, lang_name):
        df = collections.Counter()
        for tokens in docs:
            df.update(set(tokens))
        kept = sorted((w for w, c in df.items() if c >= min_doc_freq),
                      key=lambda w: (-df[w], w))
        if max_vocab_per_lang is not None:
            kept = kept[:max_vocab_per_lang]
        if not kept:
            raise ConfigurationError(
                f"empty vocabulary for language {lang_name!r} "
                f"(min_doc_freq={min_doc_freq})")
        return kept

    return Vocabulary(select(docs_l1, lang1), select(docs_l2, lang2), lang1, lang2)


def vectorize(tokens, vocab: Vocabulary, lang: str, label=None):
    """Turn a token list into a BowDocument, or None when nothing survives.

    Out-of-vocabulary tokens are ignored; documents that end up empty are
    dropped (returned as None), not errors.
    """
    vocab.check_lang(lang)
    counts: dict[int, int] = {}
    for tok in tokens:
        gi = vocab.global_index(tok, lang)
        if gi is not None:
            counts[gi] = counts.get(gi, 0) + 1
    if not counts:
        return None
    return BowDocument(counts=counts, lang=lang, label=label)


def vectorize_corpus(token_docs, vocab: Vocabulary, lang: str, labels=None):
    """Vectorize a whole corpus; returns (documents, n_dropped)."""
    if labels is not None and len(labels) != len(token_docs):
        raise ConfigurationError(
            f"label count {len(labels)} != document count {len(token_docs)}")
    docs = []
    dropped = 0
    for i, tokens in enumerate(token_docs):
        label = labels[i] if labels is not None else None
        doc = vectorize(tokens, vocab, lang, label=label)
        if doc is None:
            dropped += 1
        else:
            docs.append(doc)
    if dropped:
        log.info("dropped %d empty documents (%s)", dropped, lang)
    return docs, dropped


def load_dictionary(pairs, vocab: Vocabulary) -> TranslationDictionary:
    """Build a symmetric TranslationDictionary from (word_l1, word_l2) pairs.

    Pairs with either side out of vocabulary are dropped.
    """
    trans: dict[int, set[int]] = {}
    for w1, w2 in pairs:
        i = vocab.global_index(w1, vocab.lang1)
        j = vocab.global_index(w2, vocab.lang2)
        if i is None or j is None:
            continue
        trans.setdefault(i, set()).add(j)
        trans.setdefault(j, set()).add(i)
    d = TranslationDictionary(trans)
    if not trans:
        log.warning("no dictionary pairs survived vocabulary filtering")
    else:
        log.info("dictionary coverage: %s=%.3f %s=%.3f",
                 vocab.lang1, d.coverage(vocab, vocab.lang1),
                 vocab.lang2, d.coverage(vocab, vocab.lang2))
    return d


# ---------------------------------------------------------------------------
# File formats: one document per line (space-separated tokens); one integer
# label per line; dictionary TSV `source<TAB>target` with '#' comments.

def read_corpus_file(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh.read().splitlines()]


def read_labels_file(path) -> list[int]:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                raise ParseError("empty label line", line=lineno)
            try:
                labels.append(int(line))
            except ValueError:
                raise ParseError(f"label is not an integer: {line!r}", line=lineno)
    return labels


def read_dictionary_file(path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected `source<TAB>target`", line=lineno)
            pairs.append((parts[0], parts[1]))
    return pairs
