"""Training loop, collapse diagnostics, and checkpoint persistence."""
from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import torch

from .corpus import BowDocument, Vocabulary
from .errors import CheckpointError, ConfigurationError, TrainingDiverged
from .linking import LinkTable
from .model import (DTYPE, EncoderParams, ModelConfig, ModelState, PriorParams,
                    docs_to_matrix, init_model_state, total_loss,
                    contrastive_alignment_loss, direct_alignment_loss,
                    tm_loss_batch)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"XLTM"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 200
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    align_mode: str = "infonce"     # "infonce" or "squared" (ablation)
    diag_pairs: int = 10_000        # row pairs sampled by the cosine diagnostic
    diag_interval: int = 1          # record the trace every this many epochs

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if self.align_mode not in ("infonce", "squared"):
            raise ConfigurationError(f"unknown align_mode {self.align_mode!r}")


@dataclass
class TraceRecord:
    epoch: int
    total: float
    tami: float
    tm: float
    cosine_distance: float


@dataclass
class TrainingTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,total,tami,tm,cosine_distance\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.total!r},{r.tami!r},{r.tm!r},"
                         f"{r.cosine_distance!r}\n")

    @staticmethod
    def from_rows(rows) -> "TrainingTrace":
        return TrainingTrace([TraceRecord(int(e), t, a, m, c)
                              for e, t, a, m, c in rows])


def cosine_distance_diagnostic(phi, n_pairs: int = 10_000, seed: int = 0) -> float:
    """Mean pairwise cosine distance over word representation rows.

    Exact all-pairs mean when n_pairs covers every unordered pair; otherwise
    the mean over n_pairs seeded uniform random unordered pairs.
    """
    if n_pairs < 1:
        raise ConfigurationError("n_pairs must be >= 1")
    mat = phi.detach().numpy() if isinstance(phi, torch.Tensor) else np.asarray(phi)
    v = mat.shape[0]
    if v < 2:
        raise ConfigurationError("need at least two rows")
    norms = np.linalg.norm(mat, axis=1)
    total_pairs = v * (v - 1) // 2
    if n_pairs >= total_pairs:
        if (norms == 0).any():
            raise ConfigurationError("all-zero row in diagnostic input")
        g = (mat / norms[:, None]) @ (mat / norms[:, None]).T
        # mean over i<j of (1 - cos)
        off_diag_sum = g.sum() - np.trace(g)
        return float(1.0 - off_diag_sum / (v * (v - 1)))
    rng = np.random.default_rng(seed)
    acc = 0.0
    for _ in range(n_pairs):
        i = int(rng.integers(v))
        j = int(rng.integers(v - 1))
        if j >= i:
            j += 1
        if norms[i] == 0 or norms[j] == 0:
            raise ConfigurationError("all-zero row sampled by diagnostic")
        acc += 1.0 - float(mat[i] @ mat[j]) / (norms[i] * norms[j])
    return acc / n_pairs


def _alignment_value(state: ModelState, table, mode: str) -> float:
    if table is None or state.config.align_weight == 0:
        return 0.0
    with torch.no_grad():
        if mode == "infonce":
            v = contrastive_alignment_loss(state.phi, table, state.vocab,
                                           state.config.tau)
        else:
            v = direct_alignment_loss(state.phi, table)
    return float(v)


def _snapshot(state: ModelState) -> ModelState:
    return ModelState(
        phi=state.phi.detach().clone(),
        enc1=EncoderParams(*[t.detach().clone() for t in state.enc1.tensors()]),
        enc2=EncoderParams(*[t.detach().clone() for t in state.enc2.tensors()]),
        prior1=PriorParams(state.prior1.mu0.clone(), state.prior1.var0.clone()),
        prior2=PriorParams(state.prior2.mu0.clone(), state.prior2.var0.clone()),
        config=state.config, vocab=state.vocab)


def train(corpus_l1: list[BowDocument], corpus_l2: list[BowDocument],
          table: LinkTable | None, vocab: Vocabulary, model_cfg: ModelConfig,
          train_cfg: TrainConfig) -> tuple[ModelState, TrainingTrace]:
    """Adam training of the alignment-regularized objective.

    Single-threaded and fully determined by the seeds in the two configs.
    Per epoch, language batches are interleaved (l1, l2, l1, ...) and each
    step also evaluates the alignment loss over the full link table.
    """
    if not corpus_l1 or not corpus_l2:
        raise ConfigurationError("both corpora must be non-empty")
    if model_cfg.align_weight > 0 and table is None:
        raise ConfigurationError("align_weight > 0 requires a link table")

    torch.set_num_threads(1)
    state = init_model_state(vocab, model_cfg)
    for p in state.parameters():
        p.requires_grad_(True)
    opt = torch.optim.Adam(state.parameters(), lr=train_cfg.learning_rate,
                           betas=(train_cfg.beta1, train_cfg.beta2))

    x1 = docs_to_matrix(corpus_l1, vocab, vocab.lang1)
    x2 = docs_to_matrix(corpus_l2, vocab, vocab.lang2)
    rng = np.random.default_rng(train_cfg.seed)
    noise_gen = torch.Generator()
    noise_gen.manual_seed(train_cfg.seed + 1)

    trace = TrainingTrace()
    last_good = _snapshot(state)
    step = 0
    for epoch in range(1, train_cfg.epochs + 1):
        batches = _interleaved_batches(rng, len(corpus_l1), len(corpus_l2),
                                       train_cfg.batch_size)
        for lang_id, idx in batches:
            x = (x1 if lang_id == 0 else x2)[idx]
            lang = vocab.lang1 if lang_id == 0 else vocab.lang2
            eps = torch.randn(x.shape[0], model_cfg.n_topics, dtype=DTYPE,
                              generator=noise_gen)
            doc_loss = tm_loss_batch(x, state, lang, eps,
                                     dropout=model_cfg.dropout,
                                     generator=noise_gen).mean()
            loss = doc_loss
            if model_cfg.align_weight > 0:
                if train_cfg.align_mode == "infonce":
                    align = contrastive_alignment_loss(
                        state.phi, table, vocab, model_cfg.tau)
                else:
                    align = direct_alignment_loss(state.phi, table)
                loss = loss + model_cfg.align_weight * align
            if not torch.isfinite(loss):
                raise TrainingDiverged(step=step, last_state=last_good)
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1

        if epoch % train_cfg.diag_interval == 0 or epoch == train_cfg.epochs:
            rec = _evaluate_trace(state, x1, x2, table, train_cfg, epoch)
            if not all(np.isfinite([rec.total, rec.tami, rec.tm,
                                    rec.cosine_distance])):
                raise TrainingDiverged(step=step, last_state=last_good)
            trace.records.append(rec)
            last_good = _snapshot(state)
            log.debug("epoch %d: total=%.4f tami=%.4f tm=%.4f cosdist=%.4f",
                      epoch, rec.total, rec.tami, rec.tm, rec.cosine_distance)

    final = _snapshot(state)
    return final, trace


def _interleaved_batches(rng, n1: int, n2: int, batch_size: int):
    """Seeded per-epoch shuffles, language batches interleaved l1, l2, ..."""
    order1 = rng.permutation(n1)
    order2 = rng.permutation(n2)
    b1 = [order1[s:s + batch_size] for s in range(0, n1, batch_size)]
    b2 = [order2[s:s + batch_size] for s in range(0, n2, batch_size)]
    out = []
    for k in range(max(len(b1), len(b2))):
        if k < len(b1):
            out.append((0, b1[k]))
        if k < len(b2):
            out.append((1, b2[k]))
    return out


def _evaluate_trace(state: ModelState, x1, x2, table, train_cfg: TrainConfig,
                    epoch: int) -> TraceRecord:
    cfg = state.config
    with torch.no_grad():
        e1 = torch.zeros(x1.shape[0], cfg.n_topics, dtype=DTYPE)
        e2 = torch.zeros(x2.shape[0], cfg.n_topics, dtype=DTYPE)
        tm1 = tm_loss_batch(x1, state, state.vocab.lang1, e1)
        tm2 = tm_loss_batch(x2, state, state.vocab.lang2, e2)
        tm = float(torch.cat([tm1, tm2]).mean())
    align = _alignment_value(state, table, train_cfg.align_mode)
    total = tm + cfg.align_weight * align
    cosdist = cosine_distance_diagnostic(state.phi, n_pairs=train_cfg.diag_pairs,
                                         seed=train_cfg.seed)
    return TraceRecord(epoch=epoch, total=total, tami=align, tm=tm,
                       cosine_distance=cosdist)


# ---------------------------------------------------------------------------
# Checkpoint persistence: versioned binary container with magic bytes, a JSON
# header (config, vocabulary, array manifest, trace), raw little-endian
# float64 parameter blocks, and a trailing SHA-256 checksum.

def _state_arrays(state: ModelState) -> dict[str, np.ndarray]:
    arrays = {"phi": state.phi.detach().numpy()}
    names = ["w1", "b1", "w2", "b2", "w_mu", "b_mu", "w_logvar", "b_logvar"]
    for tag, enc in (("enc1", state.enc1), ("enc2", state.enc2)):
        for name, t in zip(names, enc.tensors()):
            arrays[f"{tag}.{name}"] = t.detach().numpy()
    for tag, prior in (("prior1", state.prior1), ("prior2", state.prior2)):
        arrays[f"{tag}.mu0"] = prior.mu0.numpy()
        arrays[f"{tag}.var0"] = prior.var0.numpy()
    return arrays


def save_checkpoint(state: ModelState, trace: TrainingTrace, path) -> None:
    arrays = _state_arrays(state)
    header = {
        "model_config": asdict(state.config),
        "vocab": {
            "lang1": state.vocab.lang1, "lang2": state.vocab.lang2,
            "words_l1": list(state.vocab.words_l1),
            "words_l2": list(state.vocab.words_l2),
        },
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
        "trace": [[r.epoch, r.total, r.tami, r.tm, r.cosine_distance]
                  for r in trace.records],
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(CHECKPOINT_VERSION.to_bytes(4, "little"))
    buf.write(len(header_bytes).to_bytes(8, "little"))
    buf.write(header_bytes)
    for k in sorted(arrays):
        buf.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())
    payload = buf.getvalue()
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(digest)


def load_checkpoint(path) -> tuple[ModelState, TrainingTrace]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + 4 + 8 + 32:
        raise CheckpointError("truncated checkpoint file")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError("checksum mismatch (corrupt or truncated file)")
    if payload[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic bytes: not a checkpoint file")
    version = int.from_bytes(payload[4:8], "little")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})")
    header_len = int.from_bytes(payload[8:16], "little")
    try:
        header = json.loads(payload[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}")

    vocab = Vocabulary(words_l1=header["vocab"]["words_l1"],
                       words_l2=header["vocab"]["words_l2"],
                       lang1=header["vocab"]["lang1"],
                       lang2=header["vocab"]["lang2"])
    config = ModelConfig(**header["model_config"])

    shapes = {a["name"]: tuple(a["shape"]) for a in header["arrays"]}
    arrays: dict[str, torch.Tensor] = {}
    offset = 16 + header_len
    for name in sorted(shapes):
        shape = shapes[name]
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(payload):
            raise CheckpointError("array data truncated")
        arr = np.frombuffer(payload[offset:end], dtype="<f8").reshape(shape)
        arrays[name] = torch.from_numpy(arr.copy())
        offset = end
    if offset != len(payload):
        raise CheckpointError("trailing bytes after array data")

    def enc(tag):
        names = ["w1", "b1", "w2", "b2", "w_mu", "b_mu", "w_logvar", "b_logvar"]
        return EncoderParams(*[arrays[f"{tag}.{n}"] for n in names])

    state = ModelState(
        phi=arrays["phi"], enc1=enc("enc1"), enc2=enc("enc2"),
        prior1=PriorParams(arrays["prior1.mu0"], arrays["prior1.var0"]),
        prior2=PriorParams(arrays["prior2.mu0"], arrays["prior2.var0"]),
        config=config, vocab=vocab)
    trace = TrainingTrace.from_rows(header["trace"])
    return state, trace
