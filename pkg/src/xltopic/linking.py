"""Cross-lingual vocabulary linking: each word is linked to the translations
of itself and of its nearest embedding-space neighbors.  The resulting link
table drives the contrastive alignment loss.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import TranslationDictionary, Vocabulary
from .embeddings import EmbeddingTable, nearest_neighbors
from .errors import ConfigurationError

log = logging.getLogger(__name__)

PROV_DICT = "dictionary"
PROV_NEIGHBOR = "neighbor"


@dataclass
class LinkTable:
    """Per-word sets of linked cross-lingual global indices.

    `links[i]` holds the linked words of global index i (all in the other
    language).  `provenance[(i, j)]` records whether the link came from the
    word's own dictionary entry or from a neighbor's translation.
    Immutable after construction.
    """

    links: dict[int, set[int]]
    provenance: dict[tuple[int, int], str] = field(default_factory=dict)

    @property
    def n_links(self) -> int:
        """Directional link count: sum of linked-set sizes."""
        return sum(len(s) for s in self.links.values())

    def linked(self, global_index: int) -> set[int]:
        return self.links.get(global_index, set())


def build_link_table(vocab: Vocabulary, dictionary: TranslationDictionary,
                     emb_l1: EmbeddingTable | None = None,
                     emb_l2: EmbeddingTable | None = None,
                     n_neighbors: int = 0) -> LinkTable:
    """Link every word to the translations of itself and its n_neighbors
    nearest embedding neighbors.  n_neighbors=0 reproduces the dictionary
    exactly (the dictionary-only ablation).
    """
    if n_neighbors < 0:
        raise ConfigurationError("n_neighbors must be >= 0")
    if n_neighbors > 0 and (emb_l1 is None or emb_l2 is None):
        raise ConfigurationError(
            "embedding tables are required when n_neighbors > 0")

    tables = {vocab.lang1: emb_l1, vocab.lang2: emb_l2}
    links: dict[int, set[int]] = {}
    provenance: dict[tuple[int, int], str] = {}
    for i in range(vocab.size):
        lang = vocab.lang_of(i)
        off = vocab.offset(lang)
        sources = [i]
        if n_neighbors > 0:
            nn = nearest_neighbors(tables[lang], i - off, n_neighbors)
            sources.extend(off + local for local in nn)
        linked: set[int] = set()
        for w in sources:
            linked |= dictionary.translations(w)
        if not linked:
            continue
        links[i] = linked
        own = dictionary.translations(i)
        for j in linked:
            provenance[(i, j)] = PROV_DICT if j in own else PROV_NEIGHBOR
    table = LinkTable(links=links, provenance=provenance)
    if table.n_links == 0:
        raise ConfigurationError(
            "no alignment signal: the link table is empty "
            "(check dictionary coverage)")
    log.info("link table: %d directional links over %d source words",
             table.n_links, len(links))
    return table


def enumerate_pairs(table: LinkTable) -> list[tuple[int, int]]:
    """All (i, j) linked pairs in deterministic order (ascending i, then j).

    The positive-pair distribution is uniform: each pair has weight
    1 / table.n_links.
    """
    if table.n_links < 1:
        raise ConfigurationError("link table is empty")
    return [(i, j) for i in sorted(table.links)
            for j in sorted(table.links[i])]


def negative_set(table: LinkTable, vocab: Vocabulary, i: int, j: int) -> set[int]:
    """Contrast set for positive pair (i, j): {j} plus every word of j's
    language that is not linked to i."""
    linked = table.linked(i)
    if j not in linked:
        raise ConfigurationError(
            f"contract violation: {j} is not linked to {i}")
    lang_j = vocab.lang_of(j)
    return {j} | (set(vocab.lang_range(lang_j)) - linked)


def subsample_dictionary(dictionary: TranslationDictionary, fraction: float,
                         seed: int = 0) -> TranslationDictionary:
    """Keep a uniformly random fraction of translation entries (unordered
    pairs), for the low-coverage study.  Deterministic for a fixed seed."""
    if not (0.0 < fraction <= 1.0):
        raise ConfigurationError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return dictionary
    entries = sorted({(min(i, j), max(i, j))
                      for i, js in dictionary.trans.items() for j in js})
    rng = np.random.default_rng(seed)
    n_keep = int(round(fraction * len(entries)))
    keep_idx = rng.permutation(len(entries))[:n_keep]
    trans: dict[int, set[int]] = {}
    for k in sorted(keep_idx):
        i, j = entries[k]
        trans.setdefault(i, set()).add(j)
        trans.setdefault(j, set()).add(i)
    return TranslationDictionary(trans)


def write_links_tsv(table: LinkTable, vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in enumerate_pairs(table):
            fh.write(f"{vocab.word_of(i)}\t{vocab.word_of(j)}\t"
                     f"{table.provenance[(i, j)]}\n")


def read_links_tsv(path, vocab: Vocabulary) -> LinkTable:
    """Inverse of write_links_tsv; round-trips losslessly."""
    links: dict[int, set[int]] = {}
    provenance: dict[tuple[int, int], str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            w_i, w_j, prov = line.rstrip("\n").split("\t")
            # sides are cross-lingual, so language is recoverable per word
            i = vocab.global_index(w_i, vocab.lang1)
            if i is None:
                i = vocab.global_index(w_i, vocab.lang2)
                j = vocab.global_index(w_j, vocab.lang1)
            else:
                j = vocab.global_index(w_j, vocab.lang2)
            if i is None or j is None:
                raise ConfigurationError(
                    f"link table word not in vocabulary: {w_i!r}/{w_j!r}")
            links.setdefault(i, set()).add(j)
            provenance[(i, j)] = prov
    return LinkTable(links=links, provenance=provenance)
