"""Noun-pair embedding pretraining with negative sampling.

Each word between a noun pair is predicted from the pair embeddings, its
local window, and the averaged outside windows.  A per-word logistic
regression discriminates the true target from ``k`` noise words drawn from a
count^0.75 unigram distribution; frequent targets and frequent noun pairs
are stochastically discarded before training.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .corpus import NULL_WORD

logger = logging.getLogger(__name__)

__all__ = [
    "EmbeddingParams",
    "PretrainConfig",
    "NoiseSampler",
    "SubsamplingFilter",
    "TrainingLog",
    "initial_params",
    "subsample_discard_prob",
    "pair_discard",
    "pair_discard_many",
    "build_feature_vector",
    "target_probability",
    "pretrain_objective_and_grad",
    "apply_row_grads",
    "pretrain_step",
    "train_embeddings",
    "save_model",
    "load_model",
    "write_text_vectors",
    "read_text_vectors",
]


@dataclass
class EmbeddingParams:
    """The four learned parameter blocks, stored rows-per-word.

    ``noun_vecs`` and ``word_vecs`` are ``dim``-dimensional embeddings for
    the noun and word inventories; ``pred_vecs``/``pred_bias`` hold the
    per-word logistic-regression weights used to score prediction targets.
    For natively pretrained parameters each prediction vector has length
    ``2*dim*(2+window)``; imported bag-of-words baselines use length ``dim``.
    """

    noun_vecs: np.ndarray   # (n_nouns, dim)
    word_vecs: np.ndarray   # (n_words, dim)
    pred_vecs: np.ndarray   # (n_words, pred_dim)
    pred_bias: np.ndarray   # (n_words,)
    dim: int
    window: int

    @property
    def n_nouns(self):
        return self.noun_vecs.shape[0]

    @property
    def n_words(self):
        return self.word_vecs.shape[0]

    @property
    def pred_dim(self):
        return self.pred_vecs.shape[1]

    @property
    def pretrain_feature_dim(self):
        return 2 * self.dim * (2 + self.window)

    def copy(self):
        return EmbeddingParams(
            self.noun_vecs.copy(), self.word_vecs.copy(),
            self.pred_vecs.copy(), self.pred_bias.copy(),
            self.dim, self.window,
        )

    def check_finite(self):
        for name in ("noun_vecs", "word_vecs", "pred_vecs", "pred_bias"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite entries in {name}")


def initial_params(n_nouns, n_words, dim, window, rng, dtype="float64",
                   pred_dim=None):
    """Gaussian(0, 1/dim) noun/word embeddings, zero prediction weights."""
    std = 1.0 / math.sqrt(dim)
    if pred_dim is None:
        pred_dim = 2 * dim * (2 + window)
    noun = rng.normal(0.0, std, size=(n_nouns, dim)).astype(dtype)
    word = rng.normal(0.0, std, size=(n_words, dim)).astype(dtype)
    return EmbeddingParams(
        noun_vecs=noun,
        word_vecs=word,
        pred_vecs=np.zeros((n_words, pred_dim), dtype=dtype),
        pred_bias=np.zeros(n_words, dtype=dtype),
        dim=dim,
        window=window,
    )


@dataclass
class PretrainConfig:
    """Hyperparameters for embedding pretraining.

    Defaults follow the best grid setting (window 3, dim 100, 25 negatives,
    initial rate 0.025, outside width 5, subsample threshold 1e-5).
    """

    dim: int = 100
    window: int = 3
    negatives: int = 25
    alpha: float = 0.025
    m_out: int = 5
    subsample: float = 1e-5
    epochs: int = 1
    seed: int = 1
    threads: int = 1
    dtype: str = "float64"
    report_every: int = 100_000

    def validate(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.subsample > 0:
            raise ValueError("subsample threshold must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.m_out < 1:
            raise ValueError("m_out must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        return self


def subsample_discard_prob(count, total, t):
    """Discard probability max(0, 1 - sqrt(t / p)) for p = count/total."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 < count <= total:
        raise ValueError("count must satisfy 0 < count <= total")
    if t <= 0:
        raise ValueError("subsample threshold must be > 0")
    return max(0.0, 1.0 - math.sqrt(t * total / count))


class SubsamplingFilter:
    """Per-id discard probabilities over one inventory.

    Ids with zero count (NULL, or UNK when nothing fell out of vocabulary)
    are never discarded.
    """

    def __init__(self, counts, t):
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise ValueError("inventory has no occurrence counts")
        self.t = t
        probs = np.zeros_like(counts)
        nz = counts > 0
        probs[nz] = 1.0 - np.sqrt(t * total / counts[nz])
        self.discard_probs = np.clip(probs, 0.0, 1.0)

    def discard_prob(self, wid):
        return float(self.discard_probs[wid])

    def should_discard(self, wid, rng):
        # discard iff P_d(w) > r for r ~ U(0,1)
        return self.discard_probs[wid] > rng.random()

    def discard_many(self, wid, size, rng):
        """Vectorized Bernoulli draws of the discard decision for one id."""
        return self.discard_probs[wid] > rng.random(size)


def pair_discard(n1, n2, noun_filter, rng):
    """Noun-pair subsampling: two independent uniforms, discard if either
    noun's discard probability exceeds its draw."""
    r1 = rng.random()
    r2 = rng.random()
    return noun_filter.discard_probs[n1] > r1 or noun_filter.discard_probs[n2] > r2


def pair_discard_many(n1, n2, noun_filter, size, rng):
    """Vectorized pair_discard decisions for simulation checks."""
    r1 = rng.random(size)
    r2 = rng.random(size)
    return (noun_filter.discard_probs[n1] > r1) | (noun_filter.discard_probs[n2] > r2)


class NoiseSampler:
    """Unigram noise distribution weighted by count^0.75."""

    def __init__(self, counts, power=0.75):
        weights = np.asarray(counts, dtype=np.float64) ** power
        total = weights.sum()
        if total <= 0:
            raise ValueError("noise distribution has no mass")
        self.probs = weights / total
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    def sample(self, k, rng, exclude=None):
        """Draw `k` ids; draws equal to `exclude` are re-drawn while an
        alternative exists."""
        draws = np.searchsorted(self._cum, rng.random(k), side="right")
        if exclude is not None and self.probs[exclude] < 1.0:
            clash = draws == exclude
            while clash.any():
                draws[clash] = np.searchsorted(
                    self._cum, rng.random(int(clash.sum())), side="right")
                clash = draws == exclude
        return draws


def build_feature_vector(ctx, i, params):
    """Prediction input for target position `i` (1-based) of ``ctx.w_in``.

    Concatenates both noun embeddings, the `window` word embeddings on each
    side of the target (NULL beyond the between-words span), and the two
    averaged outside windows; length ``2*dim*(2+window)``.
    """
    m_in = ctx.m_in
    if not 1 <= i <= m_in:
        raise ValueError(f"target index {i} outside 1..{m_in}")
    c = params.window
    w = params.word_vecs
    slots = []
    for j in range(1, c + 1):
        slots.append(ctx.w_in[i - j - 1] if i - j >= 1 else NULL_WORD)
    for j in range(1, c + 1):
        slots.append(ctx.w_in[i + j - 1] if i + j <= m_in else NULL_WORD)
    return np.concatenate([
        params.noun_vecs[ctx.n1],
        params.noun_vecs[ctx.n2],
        w[slots].reshape(-1),
        w[list(ctx.w_bef)].mean(axis=0),
        w[list(ctx.w_aft)].mean(axis=0),
    ])


def target_probability(f, wid, params):
    """sigma(pred_vecs[wid] . f + pred_bias[wid])."""
    return float(expit(params.pred_vecs[wid] @ f + params.pred_bias[wid]))


def pretrain_objective_and_grad(ctx, i, params, noise_ids):
    """Objective term and gradients for one (context, target) sample.

    Returns ``(value, grads)`` where value is
    ``log p(target|f) + sum_j log(1 - p(noise_j|f))`` and grads maps
    ``('noun'|'word'|'pred'|'bias', id)`` to the accumulated gradient of the
    value with respect to that parameter row.  Duplicate rows (repeated
    noise draws, shared window/outside words, n1 == n2) accumulate.
    """
    target = ctx.w_in[i - 1]
    f = build_feature_vector(ctx, i, params)
    words = np.concatenate(([target], noise_ids)).astype(np.intp)
    z = params.pred_vecs[words] @ f + params.pred_bias[words]
    labels = np.zeros(len(words))
    labels[0] = 1.0
    value = float(log_expit(z[0]) + log_expit(-z[1:]).sum())
    errs = labels - expit(z)

    grads: dict = {}

    def add(kind, idx, g):
        key = (kind, int(idx))
        if key in grads:
            grads[key] = grads[key] + g
        else:
            grads[key] = g

    for wid, err, row_f in zip(words, errs, np.outer(errs, f)):
        add("pred", wid, row_f)
        add("bias", wid, err)
    g_f = errs @ params.pred_vecs[words]

    d = params.dim
    c = params.window
    m_in = ctx.m_in
    add("noun", ctx.n1, g_f[0:d])
    add("noun", ctx.n2, g_f[d:2 * d])
    off = 2 * d
    for j in range(1, c + 1):
        wid = ctx.w_in[i - j - 1] if i - j >= 1 else NULL_WORD
        add("word", wid, g_f[off:off + d])
        off += d
    for j in range(1, c + 1):
        wid = ctx.w_in[i + j - 1] if i + j <= m_in else NULL_WORD
        add("word", wid, g_f[off:off + d])
        off += d
    m_out = ctx.m_out
    g_bef = g_f[off:off + d] / m_out
    g_aft = g_f[off + d:off + 2 * d] / m_out
    for wid in ctx.w_bef:
        add("word", wid, g_bef)
    for wid in ctx.w_aft:
        add("word", wid, g_aft)
    return value, grads


_GRAD_ARRAYS = {"noun": "noun_vecs", "word": "word_vecs",
                "pred": "pred_vecs", "bias": "pred_bias"}


def apply_row_grads(params, grads, lr):
    """Gradient-ascent step: add ``lr * grad`` to each addressed row."""
    for (kind, idx), g in grads.items():
        getattr(params, _GRAD_ARRAYS[kind])[idx] += lr * g


def pretrain_step(ctx, i, params, lr, k, sampler, rng):
    """Draw noise, take one ascent step, return the pre-update objective."""
    target = ctx.w_in[i - 1]
    noise = sampler.sample(k, rng, exclude=target)
    value, grads = pretrain_objective_and_grad(ctx, i, params, noise)
    apply_row_grads(params, grads, lr)
    return value


@dataclass
class TrainingLog:
    """Progress report: windowed mean objective plus totals."""

    windows: list[tuple[int, float]] = field(default_factory=list)
    targets_seen: int = 0
    steps_taken: int = 0
    pairs_discarded: int = 0
    targets_discarded: int = 0

    def record(self, processed, total, count):
        if count:
            self.windows.append((processed, total / count))


def _count_targets(contexts):
    total = 0
    for ctx in contexts:
        if ctx.m_in < 1:
            raise ValueError("pretraining context with no words between the pair")
        total += ctx.m_in
    return total


def _train_shard(contexts, params, cfg, sampler, word_filter, noun_filter,
                 rng, progress, planned, log, report_every):
    """Sequential training over one context stream; shared by both modes.

    `progress` is a single-cell list so concurrent shards can share an
    (unsynchronized) position in the linear learning-rate schedule.
    """
    win_sum = 0.0
    win_count = 0
    next_report = progress[0] + report_every
    for ctx in contexts:
        if pair_discard(ctx.n1, ctx.n2, noun_filter, rng):
            progress[0] += ctx.m_in
            log.targets_seen += ctx.m_in
            log.pairs_discarded += 1
            continue
        for i in range(1, ctx.m_in + 1):
            lr = cfg.alpha * (1.0 - progress[0] / planned)
            progress[0] += 1
            log.targets_seen += 1
            if word_filter.should_discard(ctx.w_in[i - 1], rng):
                log.targets_discarded += 1
                continue
            win_sum += pretrain_step(ctx, i, params, lr, cfg.negatives,
                                     sampler, rng)
            win_count += 1
            log.steps_taken += 1
        if progress[0] >= next_report:
            log.record(progress[0], win_sum, win_count)
            logger.info("pretrain: %d/%d targets, window objective %.4f, lr %.5f",
                        progress[0], planned,
                        win_sum / win_count if win_count else float("nan"),
                        cfg.alpha * (1.0 - min(progress[0], planned) / planned))
            win_sum = 0.0
            win_count = 0
            next_report += report_every
    log.record(progress[0], win_sum, win_count)


def train_embeddings(contexts, vocab, config):
    """Train embedding parameters over a re-iterable stream of contexts.

    Returns ``(params, log)``.  With ``threads == 1`` the run is
    deterministic for a fixed seed; with more threads, workers update the
    shared parameters without locks and only statistical properties are
    guaranteed.
    """
    cfg = config.validate()
    total_targets = _count_targets(contexts)
    if total_targets == 0:
        raise ValueError("context stream is empty")
    planned = cfg.epochs * total_targets

    rng = np.random.default_rng(cfg.seed)
    params = initial_params(vocab.n_nouns, vocab.n_words, cfg.dim, cfg.window,
                            rng, dtype=cfg.dtype)
    sampler = NoiseSampler(vocab.word_counts)
    word_filter = SubsamplingFilter(vocab.word_counts, cfg.subsample)
    noun_filter = SubsamplingFilter(vocab.noun_counts, cfg.subsample)

    log = TrainingLog()
    progress = [0]
    for epoch in range(cfg.epochs):
        if cfg.threads == 1:
            _train_shard(contexts, params, cfg, sampler, word_filter,
                         noun_filter, rng, progress, planned, log,
                         cfg.report_every)
        else:
            shards = [[] for _ in range(cfg.threads)]
            for n, ctx in enumerate(contexts):
                shards[n % cfg.threads].append(ctx)
            shard_logs = [TrainingLog() for _ in shards]
            workers = [
                threading.Thread(target=_train_shard, args=(
                    shard, params, cfg, sampler, word_filter, noun_filter,
                    np.random.default_rng(cfg.seed + 1000 * epoch + 7 * n + 1),
                    progress, planned, shard_logs[n], cfg.report_every))
                for n, shard in enumerate(shards)
            ]
            for w in workers:
                w.start()
            for w in workers:
                w.join()
            for sl in shard_logs:
                log.windows.extend(sl.windows)
                log.targets_seen += sl.targets_seen
                log.steps_taken += sl.steps_taken
                log.pairs_discarded += sl.pairs_discarded
                log.targets_discarded += sl.targets_discarded
    params.check_finite()
    return params, log


# --- persistence ------------------------------------------------------------

def save_model(params, path):
    """Binary model file: ASCII header line, then little-endian float64
    matrices in order noun_vecs, word_vecs, pred_vecs, pred_bias."""
    header = (f"relemb-model v1 d={params.dim} c={params.window} "
              f"nwords={params.n_words} nnouns={params.n_nouns}")
    if params.pred_dim != params.pretrain_feature_dim:
        header += f" wdim={params.pred_dim}"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        for arr in (params.noun_vecs, params.word_vecs,
                    params.pred_vecs, params.pred_bias):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if header[:2] != ["relemb-model", "v1"]:
            raise ValueError(f"not a relemb-model file: {path}")
        kv = dict(tok.split("=", 1) for tok in header[2:])
        d = int(kv["d"])
        c = int(kv["c"])
        n_words = int(kv["nwords"])
        n_nouns = int(kv["nnouns"])
        pred_dim = int(kv.get("wdim", 2 * d * (2 + c)))
        blob = fh.read()
    shapes = [(n_nouns, d), (n_words, d), (n_words, pred_dim), (n_words,)]
    arrays = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(np.frombuffer(blob, dtype="<f8", count=size,
                                    offset=offset * 8).reshape(shape).copy())
        offset += size
    return EmbeddingParams(arrays[0], arrays[1], arrays[2], arrays[3], d, c)


def write_text_vectors(surfaces, matrix, path):
    """Interchange text format: ``word v1 v2 ... vd`` per row."""
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        for surface, row in zip(surfaces, matrix):
            fh.write(surface + " " + " ".join(f"{x:.6g}" for x in row) + "\n")


def read_text_vectors(path):
    """Read the interchange text format; returns (surfaces, matrix)."""
    surfaces = []
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            surfaces.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if not rows:
        raise ValueError(f"no vectors in {path}")
    return surfaces, np.asarray(rows, dtype=np.float64)
