"""CBOW baseline trainer used as an alternative embedding initialization.

Standard continuous-bag-of-words with negative sampling: the mean input
vector of a symmetric context window predicts the center word against its
output vector.  Subsampling and the linear learning-rate schedule match the
noun-pair trainer; the trained input/output vectors can replace the
noun/word embeddings and prediction vectors of an
:class:`~relemb.embed_train.EmbeddingParams`, shrinking the prediction-vector
dimension to ``dim``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .corpus import UNK_WORD
from .embed_train import (EmbeddingParams, NoiseSampler, SubsamplingFilter,
                          TrainingLog)

logger = logging.getLogger(__name__)

__all__ = [
    "CbowModel",
    "CbowConfig",
    "cbow_objective_and_grad",
    "train_cbow",
    "import_as_initialization",
    "align_text_vectors",
]


@dataclass
class CbowModel:
    in_vecs: np.ndarray    # (n_words, dim) context/input vectors
    out_vecs: np.ndarray   # (n_words, dim) target/output vectors
    dim: int
    window: int

    def check_finite(self):
        if not (np.isfinite(self.in_vecs).all() and np.isfinite(self.out_vecs).all()):
            raise FloatingPointError("non-finite CBOW parameters")


@dataclass
class CbowConfig:
    dim: int = 100
    window: int = 3
    negatives: int = 25
    alpha: float = 0.025
    subsample: float = 1e-5
    epochs: int = 1
    seed: int = 1
    dtype: str = "float64"
    report_every: int = 500_000

    def validate(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dim, window, and negatives must be >= 1")
        if not self.alpha > 0 or not self.subsample > 0:
            raise ValueError("alpha and subsample must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        return self


def cbow_objective_and_grad(window_ids, center, noise_ids, model):
    """One CBOW sample: objective value plus gradients keyed
    ``('in'|'out', id)``; window rows share the context-mean gradient."""
    ctx = model.in_vecs[list(window_ids)].mean(axis=0)
    words = np.concatenate(([center], noise_ids)).astype(np.intp)
    z = model.out_vecs[words] @ ctx
    labels = np.zeros(len(words))
    labels[0] = 1.0
    value = float(log_expit(z[0]) + log_expit(-z[1:]).sum())
    errs = labels - expit(z)
    grads: dict = {}
    for wid, err in zip(words, errs):
        key = ("out", int(wid))
        g = err * ctx
        grads[key] = grads[key] + g if key in grads else g
    g_ctx = (errs @ model.out_vecs[words]) / len(window_ids)
    for wid in window_ids:
        key = ("in", int(wid))
        grads[key] = grads[key] + g_ctx if key in grads else g_ctx
    return value, grads


def train_cbow(sentences, vocab, config):
    """Train a CbowModel over a re-iterable stream of tagged sentences.

    Input vectors start Gaussian(0, 1/dim), output vectors at zero.
    Subsampling removes tokens from the sequence before windowing; the
    learning rate decays linearly over ``epochs * total tokens``.  Seeded
    runs are deterministic.  Returns ``(model, log)``.
    """
    cfg = config.validate()
    total_tokens = sum(len(s) for s in sentences)
    if total_tokens == 0:
        raise ValueError("sentence stream is empty")
    planned = cfg.epochs * total_tokens

    rng = np.random.default_rng(cfg.seed)
    std = 1.0 / math.sqrt(cfg.dim)
    model = CbowModel(
        in_vecs=rng.normal(0.0, std, size=(vocab.n_words, cfg.dim)).astype(cfg.dtype),
        out_vecs=np.zeros((vocab.n_words, cfg.dim), dtype=cfg.dtype),
        dim=cfg.dim,
        window=cfg.window,
    )
    sampler = NoiseSampler(vocab.word_counts)
    word_filter = SubsamplingFilter(vocab.word_counts, cfg.subsample)

    log = TrainingLog()
    processed = 0
    win_sum, win_count, next_report = 0.0, 0, cfg.report_every
    c = cfg.window
    for _ in range(cfg.epochs):
        for sent in sentences:
            ids = [vocab.word_id(w) for w in sent.words]
            lr = cfg.alpha * (1.0 - processed / planned)
            kept = []
            for wid in ids:
                processed += 1
                log.targets_seen += 1
                if word_filter.should_discard(wid, rng):
                    log.targets_discarded += 1
                else:
                    kept.append(wid)
            for t, center in enumerate(kept):
                window = kept[max(0, t - c):t] + kept[t + 1:t + 1 + c]
                if not window:
                    continue
                noise = sampler.sample(cfg.negatives, rng, exclude=center)
                value, grads = cbow_objective_and_grad(window, center, noise, model)
                for (kind, idx), g in grads.items():
                    (model.in_vecs if kind == "in" else model.out_vecs)[idx] += lr * g
                win_sum += value
                win_count += 1
                log.steps_taken += 1
            if processed >= next_report:
                log.record(processed, win_sum, win_count)
                logger.info("cbow: %d/%d tokens, window objective %.4f",
                            processed, planned,
                            win_sum / win_count if win_count else float("nan"))
                win_sum, win_count = 0.0, 0
                next_report += cfg.report_every
    log.record(processed, win_sum, win_count)
    model.check_finite()
    return model, log


def import_as_initialization(model, vocab):
    """Build embedding parameters from a trained CbowModel.

    Noun embeddings copy the input vectors of the noun surfaces (UNK's
    vector when a noun surface is missing from the word inventory), word
    embeddings copy the input vectors, and the output vectors stand in for
    the prediction vectors, so the prediction dimension becomes ``dim`` and
    downstream feature dimensions shrink accordingly.
    """
    if model.in_vecs.shape[0] != vocab.n_words:
        raise ValueError(
            f"vocabulary mismatch: model has {model.in_vecs.shape[0]} rows, "
            f"vocabulary has {vocab.n_words} words")
    noun_vecs = np.empty((vocab.n_nouns, model.dim), dtype=model.in_vecs.dtype)
    for nid in range(vocab.n_nouns):
        surface = vocab.noun_surface(nid)
        wid = vocab.word_id(surface) if nid != 0 else UNK_WORD
        noun_vecs[nid] = model.in_vecs[wid]
    return EmbeddingParams(
        noun_vecs=noun_vecs,
        word_vecs=model.in_vecs.copy(),
        pred_vecs=model.out_vecs.copy(),
        pred_bias=np.zeros(vocab.n_words, dtype=model.in_vecs.dtype),
        dim=model.dim,
        window=model.window,
    )


def align_text_vectors(surfaces, matrix, vocab, strict=False):
    """Map interchange-format vectors onto the word inventory.

    Returns ``(aligned, missing)`` where `aligned` has one row per word id.
    Words absent from the file take the file's UNK row; with `strict` the
    missing surfaces raise instead.  The file must provide an UNK row
    (surface ``UNK`` or ``<UNK>``) unless nothing is missing.
    """
    index = {s: i for i, s in enumerate(surfaces)}
    unk_row = index.get("UNK", index.get("<UNK>"))
    aliases = {0: ("NULL", "<NULL>"), 1: ("UNK", "<UNK>")}
    aligned = np.empty((vocab.n_words, matrix.shape[1]), dtype=np.float64)
    missing = []
    for wid in range(vocab.n_words):
        surface = vocab.word_surface(wid)
        row = None
        for cand in aliases.get(wid, (surface,)):
            row = index.get(cand)
            if row is not None:
                break
        if row is None:
            missing.append(surface)
            if unk_row is None:
                raise ValueError(
                    f"vectors lack {surface!r} and provide no UNK fallback")
            row = unk_row
        aligned[wid] = matrix[row]
    if strict and missing:
        raise ValueError("vectors missing words: " + ", ".join(missing[:20]))
    return aligned, missing
