"""The cross-lingual topic model: per-language encoders with a logistic-normal
latent, topic-word matrices read off a shared word-topic representation matrix,
and the training losses (reconstruction + KL per language, contrastive
alignment across languages).

Everything runs in float64 so that analytic gradients can be validated against
central finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .corpus import BowDocument, Vocabulary
from .errors import ConfigurationError
from .linking import LinkTable, enumerate_pairs

DTYPE = torch.float64
LOG_EPS = 1e-10  # floor inside reconstruction log


@dataclass
class ModelConfig:
    n_topics: int = 50
    tau: float = 0.1                # critic temperature
    align_weight: float = 50.0      # weight of the alignment regularizer
    hidden_dim: int = 200
    dropout: float = 0.2
    dirichlet_alpha: float = 1.0    # prior concentration (Laplace approximation)
    seed: int = 0

    def __post_init__(self):
        if self.n_topics < 2:
            raise ConfigurationError("n_topics must be >= 2")
        if self.tau <= 0:
            raise ConfigurationError("tau must be > 0")
        if self.align_weight < 0:
            raise ConfigurationError("align_weight must be >= 0")


@dataclass
class PriorParams:
    """Diagonal Gaussian prior on the pre-softmax latent."""

    mu0: torch.Tensor
    var0: torch.Tensor

    def __post_init__(self):
        if (self.var0 <= 0).any():
            raise ConfigurationError("prior variances must be positive")

    @staticmethod
    def from_dirichlet(n_topics: int, alpha: float) -> "PriorParams":
        """Laplace approximation of a symmetric Dirichlet(alpha) prior on the
        simplex: zero mean, variance (1/alpha)(1 - 2/K) + 1/(K alpha)."""
        k = n_topics
        var = (1.0 / alpha) * (1.0 - 2.0 / k) + 1.0 / (k * alpha)
        return PriorParams(mu0=torch.zeros(k, dtype=DTYPE),
                           var0=torch.full((k,), var, dtype=DTYPE))


@dataclass
class EncoderParams:
    """Two softplus feed-forward layers and two affine output heads."""

    w1: torch.Tensor
    b1: torch.Tensor
    w2: torch.Tensor
    b2: torch.Tensor
    w_mu: torch.Tensor
    b_mu: torch.Tensor
    w_logvar: torch.Tensor
    b_logvar: torch.Tensor

    def tensors(self) -> list[torch.Tensor]:
        return [self.w1, self.b1, self.w2, self.b2,
                self.w_mu, self.b_mu, self.w_logvar, self.b_logvar]

    @staticmethod
    def init(input_dim: int, hidden_dim: int, n_topics: int,
             generator: torch.Generator) -> "EncoderParams":
        def glorot(n_out, n_in):
            bound = math.sqrt(6.0 / (n_in + n_out))
            w = torch.empty(n_out, n_in, dtype=DTYPE)
            w.uniform_(-bound, bound, generator=generator)
            return w

        return EncoderParams(
            w1=glorot(hidden_dim, input_dim), b1=torch.zeros(hidden_dim, dtype=DTYPE),
            w2=glorot(hidden_dim, hidden_dim), b2=torch.zeros(hidden_dim, dtype=DTYPE),
            w_mu=glorot(n_topics, hidden_dim), b_mu=torch.zeros(n_topics, dtype=DTYPE),
            w_logvar=glorot(n_topics, hidden_dim),
            b_logvar=torch.zeros(n_topics, dtype=DTYPE),
        )


@dataclass
class ModelState:
    """All trainable parameters plus configuration and vocabulary reference."""

    phi: torch.Tensor            # (V1+V2, K) word-topic representations
    enc1: EncoderParams
    enc2: EncoderParams
    prior1: PriorParams
    prior2: PriorParams
    config: ModelConfig
    vocab: Vocabulary

    def encoder(self, lang: str) -> EncoderParams:
        self.vocab.check_lang(lang)
        return self.enc1 if lang == self.vocab.lang1 else self.enc2

    def prior(self, lang: str) -> PriorParams:
        self.vocab.check_lang(lang)
        return self.prior1 if lang == self.vocab.lang1 else self.prior2

    def parameters(self) -> list[torch.Tensor]:
        return [self.phi] + self.enc1.tensors() + self.enc2.tensors()


def init_model_state(vocab: Vocabulary, config: ModelConfig) -> ModelState:
    gen = torch.Generator()
    gen.manual_seed(config.seed)
    v, k = vocab.size, config.n_topics
    bound = math.sqrt(6.0 / (v + k))
    phi = torch.empty(v, k, dtype=DTYPE)
    phi.uniform_(-bound, bound, generator=gen)
    enc1 = EncoderParams.init(vocab.v1, config.hidden_dim, k, gen)
    enc2 = EncoderParams.init(vocab.v2, config.hidden_dim, k, gen)
    prior = PriorParams.from_dirichlet(k, config.dirichlet_alpha)
    prior2 = PriorParams(mu0=prior.mu0.clone(), var0=prior.var0.clone())
    return ModelState(phi=phi, enc1=enc1, enc2=enc2,
                      prior1=prior, prior2=prior2, config=config, vocab=vocab)


# ---------------------------------------------------------------------------
# Forward pieces

def encode(x: torch.Tensor, params: EncoderParams, dropout: float = 0.0,
           generator: torch.Generator | None = None):
    """Map bag-of-words count vectors to (mu, logvar) of the variational
    Gaussian.  `x` is (V,) or (n, V).  Dropout is off by default, making
    inference deterministic."""
    if x.shape[-1] != params.w1.shape[1]:
        raise ConfigurationError(
            f"input dimension {x.shape[-1]} != encoder input {params.w1.shape[1]}")
    h = torch.nn.functional.softplus(x @ params.w1.T + params.b1)
    h = torch.nn.functional.softplus(h @ params.w2.T + params.b2)
    if dropout > 0.0:
        keep = 1.0 - dropout
        mask = (torch.rand(h.shape, generator=generator, dtype=DTYPE) < keep)
        h = h * mask.to(DTYPE) / keep
    mu = h @ params.w_mu.T + params.b_mu
    logvar = h @ params.w_logvar.T + params.b_logvar
    return mu, logvar


def reparameterize(mu: torch.Tensor, logvar: torch.Tensor,
                   eps: torch.Tensor) -> torch.Tensor:
    return mu + torch.exp(0.5 * logvar) * eps


def doc_topic(r: torch.Tensor) -> torch.Tensor:
    return torch.softmax(r, dim=-1)


def topic_word_matrix(phi: torch.Tensor, vocab: Vocabulary, lang: str) -> torch.Tensor:
    """Per-language topic-word matrix: a view of the corresponding phi rows."""
    rng = vocab.lang_range(lang)
    return phi[rng.start:rng.stop]


def reconstruction_dist(beta: torch.Tensor, theta: torch.Tensor) -> torch.Tensor:
    """Word distribution softmax(beta @ theta) over the vocabulary axis.
    `theta` is (K,) or (n, K); returns (V,) or (n, V)."""
    return torch.softmax(theta @ beta.T, dim=-1)


def kl_term(mu: torch.Tensor, logvar: torch.Tensor, prior: PriorParams) -> torch.Tensor:
    """Closed-form KL between the diagonal Gaussian (mu, exp(logvar)) and the
    prior, summed over topic dimensions (last axis)."""
    if (prior.var0 <= 0).any():
        raise ConfigurationError("prior variances must be positive")
    var = torch.exp(logvar)
    return 0.5 * (var / prior.var0
                  + (prior.mu0 - mu) ** 2 / prior.var0
                  - 1.0
                  + torch.log(prior.var0) - logvar).sum(dim=-1)


def docs_to_matrix(docs: list[BowDocument], vocab: Vocabulary,
                   lang: str) -> torch.Tensor:
    """Dense (n, V_lang) count matrix from sparse documents."""
    off = vocab.offset(lang)
    v = vocab.lang_size(lang)
    x = torch.zeros(len(docs), v, dtype=DTYPE)
    for row, doc in enumerate(docs):
        if doc.lang != lang:
            raise ConfigurationError(
                f"document language {doc.lang!r} != requested {lang!r}")
        for gi, c in doc.counts.items():
            x[row, gi - off] = float(c)
    return x


def tm_loss_batch(x: torch.Tensor, state: ModelState, lang: str,
                  eps: torch.Tensor, dropout: float = 0.0,
                  generator: torch.Generator | None = None) -> torch.Tensor:
    """Per-document reconstruction + KL losses for a (n, V_lang) batch."""
    params = state.encoder(lang)
    mu, logvar = encode(x, params, dropout=dropout, generator=generator)
    theta = doc_topic(reparameterize(mu, logvar, eps))
    beta = topic_word_matrix(state.phi, state.vocab, lang)
    p = reconstruction_dist(beta, theta)
    recon = -(x * torch.log(p + LOG_EPS)).sum(dim=-1)
    return recon + kl_term(mu, logvar, state.prior(lang))


def tm_loss(x: torch.Tensor, state: ModelState, lang: str,
            eps: torch.Tensor) -> torch.Tensor:
    """Topic-modeling loss of a single document (count vector of shape (V,))."""
    return tm_loss_batch(x.unsqueeze(0), state, lang, eps.unsqueeze(0))[0]


# ---------------------------------------------------------------------------
# Alignment losses

def critic(a: torch.Tensor, b: torch.Tensor, tau: float) -> torch.Tensor:
    """Temperature-scaled cosine similarity."""
    if tau <= 0:
        raise ConfigurationError("tau must be > 0")
    na, nb = torch.linalg.norm(a), torch.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ConfigurationError("critic is undefined for zero vectors")
    return (a @ b) / (na * nb * tau)


def _pair_tensors(table: LinkTable):
    pairs = enumerate_pairs(table)
    i_idx = torch.tensor([p[0] for p in pairs], dtype=torch.long)
    j_idx = torch.tensor([p[1] for p in pairs], dtype=torch.long)
    return i_idx, j_idx


def _check_touched_rows(phi: torch.Tensor, vocab: Vocabulary,
                        i_idx: torch.Tensor, j_idx: torch.Tensor) -> None:
    norms = torch.linalg.norm(phi, dim=1)
    touched = torch.zeros(vocab.size, dtype=torch.bool)
    touched[i_idx] = True
    # negatives span the full vocabulary of every target language
    for lang in vocab.langs:
        rng = vocab.lang_range(lang)
        if ((j_idx >= rng.start) & (j_idx < rng.stop)).any():
            touched[rng.start:rng.stop] = True
    bad = torch.nonzero(touched & (norms == 0)).flatten()
    if len(bad):
        raise ConfigurationError(
            f"all-zero topic representation rows touched by alignment: "
            f"{bad.tolist()[:5]}")


def contrastive_alignment_loss(phi: torch.Tensor, table: LinkTable,
                               vocab: Vocabulary, tau: float) -> torch.Tensor:
    """InfoNCE-style alignment loss over all linked cross-lingual pairs.

    For each pair (i, j) the positive similarity is contrasted against all
    words of j's language that are not linked to i (plus j itself).  The
    log-sum-exp is stabilized by per-row max subtraction.  Averaged over the
    total number of directional links.
    """
    if tau <= 0:
        raise ConfigurationError("tau must be > 0")
    i_idx, j_idx = _pair_tensors(table)
    _check_touched_rows(phi, vocab, i_idx, j_idx)

    phin = phi / torch.linalg.norm(phi, dim=1, keepdim=True).clamp_min(1e-300)
    sims = (phin @ phin.T) / tau

    total = phi.new_zeros(())
    for lang_j in vocab.langs:
        rng = vocab.lang_range(lang_j)
        mask = (j_idx >= rng.start) & (j_idx < rng.stop)
        if not mask.any():
            continue
        block = sims[:, rng.start:rng.stop]             # (V, V_lang_j)
        m = block.max(dim=1).values
        e = torch.exp(block - m[:, None])
        row_sum = e.sum(dim=1)
        src = i_idx[mask]
        tgt_local = j_idx[mask] - rng.start
        e_pair = e[src, tgt_local]
        linked_sum = phi.new_zeros(vocab.size).index_add(0, src, e_pair)
        base = row_sum[src] - linked_sum[src]           # negatives-only mass
        log_denom = torch.log(e_pair + base) + m[src]
        s_pos = block[src, tgt_local]
        total = total + (log_denom - s_pos).sum()
    return total / table.n_links


def direct_alignment_loss(phi: torch.Tensor, table: LinkTable) -> torch.Tensor:
    """Mean squared distance between linked pairs, with no negatives.  The
    ablation that exhibits degenerate (collapsed) word representations."""
    i_idx, j_idx = _pair_tensors(table)
    diff = phi[i_idx] - phi[j_idx]
    return (diff ** 2).sum(dim=1).sum() / table.n_links


def total_loss(batch_l1: torch.Tensor | None, batch_l2: torch.Tensor | None,
               state: ModelState, table: LinkTable | None,
               eps_l1: torch.Tensor | None = None,
               eps_l2: torch.Tensor | None = None,
               align_mode: str = "infonce") -> torch.Tensor:
    """Alignment-regularized objective: align_weight * alignment loss plus the
    mean per-document topic-modeling loss over both language batches."""
    cfg = state.config
    doc_losses = []
    for batch, eps, lang in ((batch_l1, eps_l1, state.vocab.lang1),
                             (batch_l2, eps_l2, state.vocab.lang2)):
        if batch is None or batch.shape[0] == 0:
            continue
        if eps is None:
            eps = torch.zeros(batch.shape[0], cfg.n_topics, dtype=DTYPE)
        doc_losses.append(tm_loss_batch(batch, state, lang, eps))
    if not doc_losses:
        raise ConfigurationError("total_loss needs at least one document")
    loss = torch.cat(doc_losses).mean()
    if cfg.align_weight > 0:
        if table is None:
            raise ConfigurationError(
                "align_weight > 0 requires a link table")
        if align_mode == "infonce":
            align = contrastive_alignment_loss(state.phi, table, state.vocab,
                                               cfg.tau)
        elif align_mode == "squared":
            align = direct_alignment_loss(state.phi, table)
        else:
            raise ConfigurationError(f"unknown align_mode {align_mode!r}")
        loss = loss + cfg.align_weight * align
    return loss
