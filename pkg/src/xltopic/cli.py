"""Command-line pipeline: prepare -> link -> train -> eval -> export-topics,
plus the dictionary-coverage ablation grid.

Every command writes an exact echo of its resolved configuration to
`run_config.txt` in the output directory; replaying that file via --config
reproduces the same artifacts byte for byte.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus as corpus_io
from . import evaluation as ev
from .embeddings import load_embeddings, train_skipgram
from .errors import XltopicError, ConfigurationError
from .linking import build_link_table, subsample_dictionary, write_links_tsv
from .model import ModelConfig, topic_word_matrix
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train

log = logging.getLogger(__name__)

ABLATION_COVERAGES = (0.25, 0.5, 0.75, 1.0)


@dataclass
class RunConfig:
    corpus_l1: str = ""
    corpus_l2: str = ""
    labels_l1: str = ""
    labels_l2: str = ""
    dictionary: str = ""
    embeddings_l1: str = ""
    embeddings_l2: str = ""
    ref_l1: str = ""
    ref_l2: str = ""
    output: str = "out"
    lang1: str = "l1"
    lang2: str = "l2"
    seed: int = 0
    topics: int = 50
    tau: float = 0.1
    lambda_tami: float = 50.0
    neighbors: int = 5
    dict_coverage: float = 1.0
    no_cvl: bool = False
    align_mode: str = "infonce"
    epochs: int = 100
    batch_size: int = 200
    learning_rate: float = 2e-3
    hidden_dim: int = 200
    dropout: float = 0.2
    top_words: int = 15
    min_doc_freq: int = 1
    max_vocab: int = 20000
    test_fraction: float = 0.2
    emb_dim: int = 100
    emb_window: int = 5
    emb_negatives: int = 5
    emb_epochs: int = 10

    def __post_init__(self):
        if not (0.0 < self.dict_coverage <= 1.0):
            raise ConfigurationError("dict_coverage must be in (0, 1]")


def read_config_file(path) -> dict:
    """Flat `key = value` text format; '#' starts a comment line."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected `key = value`")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    merged = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        for key, raw in read_config_file(path).items():
            if key not in fields:
                raise ConfigurationError(f"unknown config key {key!r}")
            merged[key] = _coerce(fields[key], raw)
    for name in fields:
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            merged[name] = cli_value
    return RunConfig(**merged)


def write_config_echo(cfg: RunConfig, out_dir: Path) -> None:
    lines = [f"{name} = {getattr(cfg, name)}"
             for name in sorted(f.name for f in dataclasses.fields(RunConfig))]
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n",
                                            encoding="utf-8")


# ---------------------------------------------------------------------------
# Pipeline pieces shared across commands

def _require(path: str, what: str) -> str:
    if not path:
        raise ConfigurationError(f"missing required input: {what}")
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _load_corpora(cfg: RunConfig):
    docs1 = corpus_io.read_corpus_file(_require(cfg.corpus_l1, "corpus_l1"))
    docs2 = corpus_io.read_corpus_file(_require(cfg.corpus_l2, "corpus_l2"))
    return docs1, docs2


def _build_vocab(cfg: RunConfig, docs1, docs2):
    return corpus_io.build_vocabulary(
        docs1, docs2, min_doc_freq=cfg.min_doc_freq,
        max_vocab_per_lang=cfg.max_vocab, lang1=cfg.lang1, lang2=cfg.lang2)


def _load_dictionary(cfg: RunConfig, vocab):
    pairs = corpus_io.read_dictionary_file(_require(cfg.dictionary, "dictionary"))
    dictionary = corpus_io.load_dictionary(pairs, vocab)
    if cfg.dict_coverage < 1.0:
        dictionary = subsample_dictionary(dictionary, cfg.dict_coverage,
                                          seed=cfg.seed)
    return dictionary


def _embedding_tables(cfg: RunConfig, vocab, docs1, docs2):
    tables = []
    for lang, docs, path in ((cfg.lang1, docs1, cfg.embeddings_l1),
                             (cfg.lang2, docs2, cfg.embeddings_l2)):
        if path:
            tables.append(load_embeddings(_require(path, f"embeddings ({lang})"),
                                          vocab, lang, seed=cfg.seed))
        else:
            indexed = []
            for tokens in docs:
                ids = [vocab.local_index(t, lang) for t in tokens]
                indexed.append([i for i in ids if i is not None])
            tables.append(train_skipgram(
                indexed, vocab.lang_size(lang), dim=cfg.emb_dim,
                window=cfg.emb_window, negatives=cfg.emb_negatives,
                epochs=cfg.emb_epochs, seed=cfg.seed, lang=lang))
    return tables


def _build_table(cfg: RunConfig, vocab, dictionary, docs1, docs2,
                 force_no_neighbors=False):
    n_neighbors = 0 if (cfg.no_cvl or force_no_neighbors) else cfg.neighbors
    if n_neighbors > 0:
        emb1, emb2 = _embedding_tables(cfg, vocab, docs1, docs2)
    else:
        emb1 = emb2 = None
    return build_link_table(vocab, dictionary, emb1, emb2,
                            n_neighbors=n_neighbors)


def _vectorized(cfg: RunConfig, vocab, docs1, docs2):
    labels1 = (corpus_io.read_labels_file(cfg.labels_l1)
               if cfg.labels_l1 else None)
    labels2 = (corpus_io.read_labels_file(cfg.labels_l2)
               if cfg.labels_l2 else None)
    bows1, _ = corpus_io.vectorize_corpus(docs1, vocab, cfg.lang1, labels1)
    bows2, _ = corpus_io.vectorize_corpus(docs2, vocab, cfg.lang2, labels2)
    return bows1, bows2


def _model_config(cfg: RunConfig) -> ModelConfig:
    return ModelConfig(n_topics=cfg.topics, tau=cfg.tau,
                       align_weight=cfg.lambda_tami, hidden_dim=cfg.hidden_dim,
                       dropout=cfg.dropout, seed=cfg.seed)


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size,
                       learning_rate=cfg.learning_rate, seed=cfg.seed,
                       align_mode=cfg.align_mode)


def _run_training(cfg: RunConfig):
    docs1, docs2 = _load_corpora(cfg)
    vocab = _build_vocab(cfg, docs1, docs2)
    table = None
    if cfg.lambda_tami > 0:
        dictionary = _load_dictionary(cfg, vocab)
        table = _build_table(cfg, vocab, dictionary, docs1, docs2)
    bows1, bows2 = _vectorized(cfg, vocab, docs1, docs2)
    state, trace = train(bows1, bows2, table, vocab,
                         _model_config(cfg), _train_config(cfg))
    return state, trace, bows1, bows2, table


def _evaluate(cfg: RunConfig, state, bows1, bows2):
    """Metric rows (metric, language, value, seed) for one trained model."""
    vocab = state.vocab
    rows = []
    ts1 = ev.top_words(topic_word_matrix(state.phi, vocab, cfg.lang1),
                       vocab, cfg.lang1, cfg.top_words)
    ts2 = ev.top_words(topic_word_matrix(state.phi, vocab, cfg.lang2),
                       vocab, cfg.lang2, cfg.top_words)
    rows.append(("tu", cfg.lang1, ev.topic_uniqueness(ts1), cfg.seed))
    rows.append(("tu", cfg.lang2, ev.topic_uniqueness(ts2), cfg.seed))
    rows.append(("tu", "both", ev.dataset_topic_uniqueness(ts1, ts2), cfg.seed))

    if cfg.ref_l1 and cfg.ref_l2:
        ref1 = corpus_io.read_corpus_file(_require(cfg.ref_l1, "ref_l1"))
        ref2 = corpus_io.read_corpus_file(_require(cfg.ref_l2, "ref_l2"))
        if len(ref1) != len(ref2):
            raise ConfigurationError("reference corpora must be line-aligned")
        pairs = []
        for t1, t2 in zip(ref1, ref2):
            d1 = corpus_io.vectorize(t1, vocab, cfg.lang1)
            d2 = corpus_io.vectorize(t2, vocab, cfg.lang2)
            if d1 is not None and d2 is not None:
                pairs.append((d1, d2))
        rows.append(("cnpmi", "both",
                     ev.cnpmi(ts1, ts2, ev.ReferencePairs(pairs), cfg.top_words),
                     cfg.seed))

    labeled1 = [d for d in bows1 if d.label is not None]
    labeled2 = [d for d in bows2 if d.label is not None]
    if labeled1 and labeled2:
        feats = {cfg.lang1: (ev.infer_doc_topics(state, labeled1, cfg.lang1),
                             np.array([d.label for d in labeled1])),
                 cfg.lang2: (ev.infer_doc_topics(state, labeled2, cfg.lang2),
                             np.array([d.label for d in labeled2]))}
        for lang in (cfg.lang1, cfg.lang2):
            x, y = feats[lang]
            rng = np.random.default_rng(cfg.seed)
            order = rng.permutation(len(y))
            n_test = max(1, int(round(cfg.test_fraction * len(y))))
            test, tr = order[:n_test], order[n_test:]
            rows.append(("accuracy_intra", lang,
                         ev.linear_classifier_eval(x[tr], y[tr], x[test], y[test],
                                                   seed=cfg.seed), cfg.seed))
        for src, dst in ((cfg.lang1, cfg.lang2), (cfg.lang2, cfg.lang1)):
            xs, ys = feats[src]
            xd, yd = feats[dst]
            rows.append(("accuracy_cross", dst,
                         ev.linear_classifier_eval(xs, ys, xd, yd,
                                                   seed=cfg.seed), cfg.seed))
    return rows


# ---------------------------------------------------------------------------
# Commands

def cmd_prepare(cfg: RunConfig, out: Path) -> None:
    docs1, docs2 = _load_corpora(cfg)
    vocab = _build_vocab(cfg, docs1, docs2)
    with open(out / "vocab.tsv", "w", encoding="utf-8") as fh:
        for gi in range(vocab.size):
            fh.write(f"{gi}\t{vocab.lang_of(gi)}\t{vocab.word_of(gi)}\n")
    log.info("vocabulary: %d + %d words", vocab.v1, vocab.v2)


def cmd_link(cfg: RunConfig, out: Path) -> None:
    docs1, docs2 = _load_corpora(cfg)
    vocab = _build_vocab(cfg, docs1, docs2)
    dictionary = _load_dictionary(cfg, vocab)
    table = _build_table(cfg, vocab, dictionary, docs1, docs2)
    write_links_tsv(table, vocab, out / "links.tsv")
    log.info("wrote %d links", table.n_links)


def cmd_train(cfg: RunConfig, out: Path) -> None:
    state, trace, _, _, _ = _run_training(cfg)
    save_checkpoint(state, trace, out / "checkpoint.bin")
    trace.to_csv(out / "trace.csv")


def cmd_eval(cfg: RunConfig, out: Path) -> None:
    state, _ = load_checkpoint(_require(str(out / "checkpoint.bin"),
                                        "checkpoint (run `train` first)"))
    docs1, docs2 = _load_corpora(cfg)
    bows1, bows2 = _vectorized(cfg, state.vocab, docs1, docs2)
    rows = _evaluate(cfg, state, bows1, bows2)
    ev.write_metrics_csv(rows, out / "metrics.csv")


def cmd_export_topics(cfg: RunConfig, out: Path) -> None:
    state, _ = load_checkpoint(_require(str(out / "checkpoint.bin"),
                                        "checkpoint (run `train` first)"))
    vocab = state.vocab
    ts1 = ev.top_words(topic_word_matrix(state.phi, vocab, vocab.lang1),
                       vocab, vocab.lang1, cfg.top_words)
    ts2 = ev.top_words(topic_word_matrix(state.phi, vocab, vocab.lang2),
                       vocab, vocab.lang2, cfg.top_words)
    ev.write_topics_txt(ts1, ts2, vocab, out / "topics.txt")


def cmd_ablate(cfg: RunConfig, out: Path) -> None:
    """The full coverage x linking grid; one combined CSV."""
    docs1, docs2 = _load_corpora(cfg)
    vocab = _build_vocab(cfg, docs1, docs2)
    base_pairs = corpus_io.read_dictionary_file(
        _require(cfg.dictionary, "dictionary"))
    full_dict = corpus_io.load_dictionary(base_pairs, vocab)
    bows1, bows2 = _vectorized(cfg, vocab, docs1, docs2)

    rows = []
    for coverage in ABLATION_COVERAGES:
        dictionary = subsample_dictionary(full_dict, coverage, seed=cfg.seed)
        for mode in ("cvl", "no_cvl"):
            table = _build_table(cfg, vocab, dictionary, docs1, docs2,
                                 force_no_neighbors=(mode == "no_cvl"))
            state, _ = train(bows1, bows2, table, vocab,
                             _model_config(cfg), _train_config(cfg))
            for metric, _lang, value, seed in _evaluate(cfg, state, bows1, bows2):
                rows.append((coverage, mode, seed, f"{metric}_{_lang}", value))
            rows.append((coverage, mode, cfg.seed, "n_links", table.n_links))
    with open(out / "ablation.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("coverage,linking,seed,metric,value\n")
        for coverage, mode, seed, metric, value in rows:
            fh.write(f"{coverage},{mode},{seed},{metric},{value!r}\n")


COMMANDS = {
    "prepare": cmd_prepare,
    "link": cmd_link,
    "train": cmd_train,
    "eval": cmd_eval,
    "export-topics": cmd_export_topics,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xltopic",
        description="Aligned cross-lingual topic modeling pipeline")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--corpus-l1", dest="corpus_l1")
        p.add_argument("--corpus-l2", dest="corpus_l2")
        p.add_argument("--labels-l1", dest="labels_l1")
        p.add_argument("--labels-l2", dest="labels_l2")
        p.add_argument("--dictionary")
        p.add_argument("--embeddings-l1", dest="embeddings_l1")
        p.add_argument("--embeddings-l2", dest="embeddings_l2")
        p.add_argument("--ref-l1", dest="ref_l1")
        p.add_argument("--ref-l2", dest="ref_l2")
        p.add_argument("--output")
        p.add_argument("--seed", type=int)
        p.add_argument("--topics", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--lambda-tami", dest="lambda_tami", type=float)
        p.add_argument("--neighbors", type=int)
        p.add_argument("--dict-coverage", dest="dict_coverage", type=float)
        p.add_argument("--no-cvl", dest="no_cvl", action="store_const", const=True)
        p.add_argument("--align-mode", dest="align_mode",
                       choices=["infonce", "squared"])
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
        p.add_argument("--dropout", type=float)
        p.add_argument("--top-words", dest="top_words", type=int)
        p.add_argument("--min-doc-freq", dest="min_doc_freq", type=int)
        p.add_argument("--max-vocab", dest="max_vocab", type=int)
        p.add_argument("--emb-dim", dest="emb_dim", type=int)
        p.add_argument("--emb-epochs", dest="emb_epochs", type=int)
    return parser


def run(argv) -> int:
    """Exit codes: 0 success, 1 usage error, 2 runtime error."""
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = resolve_config(args)
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        write_config_echo(cfg, out)
        COMMANDS[args.command](cfg, out)
    except (XltopicError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
