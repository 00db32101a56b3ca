"""Softmax relation classifier with dropout, L2, and AdaGrad.

Training maximizes the regularized log-likelihood with single-instance
updates.  Dropout uses inverted scaling (surviving feature elements are
doubled at train time) so prediction needs no adjustment.  When embedding
fine-tuning is enabled, gradients flow through the feature blocks back to
the embedding rows; L2 is applied lazily, only to rows touched by the
current instance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import ALL_LABELS, label_index
from .features import FeatureOptions, assemble_features, feature_dim, \
    scatter_feature_grad

logger = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-6

__all__ = [
    "SoftmaxParams",
    "SupervisedConfig",
    "AdaGradState",
    "softmax_forward",
    "apply_dropout",
    "adagrad_update",
    "supervised_objective_and_grad",
    "train_classifier",
    "predict",
    "predict_many",
    "make_folds",
    "cross_validate",
    "save_classifier",
    "load_classifier",
]


@dataclass
class SoftmaxParams:
    weights: np.ndarray   # (n_labels, feature_dim)
    bias: np.ndarray      # (n_labels,)

    @property
    def n_labels(self):
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, n_labels, dim):
        return cls(np.zeros((n_labels, dim)), np.zeros(n_labels))

    def copy(self):
        return SoftmaxParams(self.weights.copy(), self.bias.copy())


@dataclass
class SupervisedConfig:
    eta: float = 0.1            # AdaGrad base learning rate
    l2: float = 1e-4
    epochs: int = 20
    dropout: bool = True        # rate fixed at 0.5
    fine_tune: bool = True
    seed: int = 1
    folds: int = 10

    def validate(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        return self


def softmax_forward(e, weights, bias):
    """Class probabilities softmax(weights @ e + bias), max-shifted."""
    o = weights @ e + bias
    o = o - o.max()
    p = np.exp(o)
    return p / p.sum()


def apply_dropout(e, rng):
    """Inverted dropout at rate 0.5: zero half the elements in expectation,
    double the survivors.  Returns (masked vector, 0/1 mask)."""
    mask = (rng.random(e.shape[0]) < 0.5).astype(e.dtype)
    return e * mask * 2.0, mask


def adagrad_update(param, grad, accum, eta, eps=ADAGRAD_EPS):
    """In-place AdaGrad ascent step on one parameter array."""
    accum += grad * grad
    param += eta * grad / (np.sqrt(accum) + eps)


class AdaGradState:
    """Per-element squared-gradient accumulators; embedding-row accumulators
    are allocated lazily per touched row to bound memory."""

    def __init__(self, softmax_params):
        self.weights = np.zeros_like(softmax_params.weights)
        self.bias = np.zeros_like(softmax_params.bias)
        self.rows: dict = {}

    def row(self, key, size):
        acc = self.rows.get(key)
        if acc is None:
            acc = np.zeros(size)
            self.rows[key] = acc
        return acc


def supervised_objective_and_grad(batch, embed_params, softmax_params, l2,
                                  masks=None, opts=FeatureOptions(),
                                  fine_tune=True):
    """Objective value and gradients for a batch of labeled instances.

    The value is ``sum_k log p(label_k | e_k) - (l2/2) * ||theta||^2`` where
    theta covers the softmax parameters and, when `fine_tune` is set, the
    embedding rows touched by the batch (lazy L2).  `masks` supplies one
    dropout mask per instance or None entries for no dropout.

    Returns ``(value, softmax_grads, row_grads)`` with ``softmax_grads =
    (grad_weights, grad_bias)`` and ``row_grads`` keyed like
    :func:`relemb.features.scatter_feature_grad`.
    """
    W, b = softmax_params.weights, softmax_params.bias
    g_W = np.zeros_like(W)
    g_b = np.zeros_like(b)
    row_grads: dict = {}
    value = 0.0
    if masks is None:
        masks = [None] * len(batch)
    for inst, mask in zip(batch, masks):
        e = assemble_features(inst.context, embed_params, opts).vector
        e_used = e if mask is None else e * mask * 2.0
        o = W @ e_used + b
        o = o - o.max()
        logz = np.log(np.exp(o).sum())
        li = label_index(inst.label)
        value += float(o[li] - logz)
        g_o = -np.exp(o - logz)
        g_o[li] += 1.0
        g_W += np.outer(g_o, e_used)
        g_b += g_o
        if fine_tune:
            g_e = W.T @ g_o
            if mask is not None:
                g_e = g_e * mask * 2.0
            for key, g in scatter_feature_grad(g_e, inst.context,
                                               embed_params, opts).items():
                if key in row_grads:
                    row_grads[key] = row_grads[key] + g
                else:
                    row_grads[key] = g
    if l2 > 0:
        value -= 0.5 * l2 * (float((W * W).sum()) + float((b * b).sum()))
        g_W -= l2 * W
        g_b -= l2 * b
        if fine_tune:
            arrays = {"noun": embed_params.noun_vecs,
                      "word": embed_params.word_vecs,
                      "pred": embed_params.pred_vecs}
            for (kind, idx) in row_grads:
                row = arrays[kind][idx]
                value -= 0.5 * l2 * float(row @ row)
                row_grads[(kind, idx)] = row_grads[(kind, idx)] - l2 * row
    return value, (g_W, g_b), row_grads


@dataclass
class ClassifierLog:
    epoch_objective: list[float] = field(default_factory=list)


_ROW_ARRAYS = {"noun": "noun_vecs", "word": "word_vecs", "pred": "pred_vecs"}


def train_classifier(instances, embed_params, config, opts=FeatureOptions()):
    """Train softmax parameters (and optionally fine-tune the embeddings).

    Runs `config.epochs` passes of shuffled single-instance AdaGrad updates.
    Returns ``(softmax_params, embed_params_out, log)``; when fine-tuning is
    disabled the input embedding parameters are returned untouched and
    per-instance features are computed once up front.
    """
    cfg = config.validate()
    opts.validate()
    if not instances:
        raise ValueError("no training instances")
    for inst in instances:
        label_index(inst.label)

    params = embed_params.copy() if cfg.fine_tune else embed_params
    dim = feature_dim(params, opts)
    softmax = SoftmaxParams.zeros(len(ALL_LABELS), dim)
    state = AdaGradState(softmax)
    rng = np.random.default_rng(cfg.seed)

    cached = None
    if not cfg.fine_tune:
        cached = np.stack([assemble_features(inst.context, params, opts).vector
                           for inst in instances])
    label_ids = np.array([label_index(inst.label) for inst in instances])

    log = ClassifierLog()
    n = len(instances)
    for epoch in range(cfg.epochs):
        total = 0.0
        for idx in rng.permutation(n):
            inst = instances[idx]
            e = cached[idx] if cached is not None else \
                assemble_features(inst.context, params, opts).vector
            mask = None
            if cfg.dropout:
                e, mask = apply_dropout(e, rng)
            W = softmax.weights
            o = W @ e + softmax.bias
            o = o - o.max()
            logz = np.log(np.exp(o).sum())
            li = label_ids[idx]
            total += float(o[li] - logz)
            g_o = -np.exp(o - logz)
            g_o[li] += 1.0
            g_W = np.outer(g_o, e) - cfg.l2 * W
            g_b = g_o - cfg.l2 * softmax.bias
            g_e = W.T @ g_o if cfg.fine_tune else None
            adagrad_update(softmax.weights, g_W, state.weights, cfg.eta)
            adagrad_update(softmax.bias, g_b, state.bias, cfg.eta)
            if cfg.fine_tune:
                if mask is not None:
                    g_e = g_e * mask * 2.0
                rows = scatter_feature_grad(g_e, inst.context, params, opts)
                for (kind, ridx), g in rows.items():
                    row = getattr(params, _ROW_ARRAYS[kind])[ridx]
                    g = g - cfg.l2 * row
                    adagrad_update(row, g, state.row((kind, ridx), g.shape),
                                   cfg.eta)
        log.epoch_objective.append(total / n)
        logger.debug("classifier epoch %d: mean log-likelihood %.4f",
                     epoch + 1, total / n)
    return softmax, params, log


def predict(ctx, softmax_params, embed_params, opts=FeatureOptions()):
    """Most probable label for a context (no dropout; ties break toward the
    lowest class index)."""
    e = assemble_features(ctx, embed_params, opts).vector
    probs = softmax_forward(e, softmax_params.weights, softmax_params.bias)
    return ALL_LABELS[int(np.argmax(probs))]


def predict_many(contexts, softmax_params, embed_params, opts=FeatureOptions()):
    return [predict(ctx, softmax_params, embed_params, opts) for ctx in contexts]


def make_folds(n, folds, seed):
    """Seeded partition of range(n) into `folds` near-equal validation sets."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def cross_validate(instances, embed_params, settings, folds=10, seed=1,
                   scorer=None):
    """Mean cross-validation score per setting under one shared fold split.

    `settings` is a list of ``(name, SupervisedConfig, FeatureOptions)``;
    `scorer` maps (gold labels, predicted labels) to a float and defaults to
    the official macro-F1.  Returns a list of ``(name, mean, fold_scores)``.
    """
    if scorer is None:
        from .evaluation import score_semeval
        scorer = lambda gold, pred: score_semeval(gold, pred).macro_f1
    n = len(instances)
    splits = make_folds(n, folds, seed)
    results = []
    for name, config, opts in settings:
        fold_scores = []
        for held_out in splits:
            held = set(int(i) for i in held_out)
            train = [inst for i, inst in enumerate(instances) if i not in held]
            test = [instances[int(i)] for i in held_out]
            softmax, tuned, _ = train_classifier(train, embed_params, config, opts)
            pred = predict_many([t.context for t in test], softmax, tuned, opts)
            gold = [t.label for t in test]
            fold_scores.append(scorer(gold, pred))
        results.append((name, float(np.mean(fold_scores)), fold_scores))
        logger.info("cv %s: %.2f", name, results[-1][1])
    return results


def save_classifier(softmax_params, opts, path):
    """Binary classifier file: ASCII header with the feature flags, then
    little-endian float64 weights and bias."""
    header = (f"relemb-clf v1 L={softmax_params.n_labels} "
              f"dim={softmax_params.weights.shape[1]} opts={opts.flags()}")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(softmax_params.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(softmax_params.bias, dtype="<f8").tobytes())


def load_classifier(path):
    """Returns ``(softmax_params, opts)``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if header[:2] != ["relemb-clf", "v1"]:
            raise ValueError(f"not a relemb-clf file: {path}")
        kv = dict(tok.split("=", 1) for tok in header[2:])
        n_labels = int(kv["L"])
        dim = int(kv["dim"])
        opts = FeatureOptions.from_flags(kv["opts"])
        blob = fh.read()
    weights = np.frombuffer(blob, dtype="<f8", count=n_labels * dim) \
        .reshape(n_labels, dim).copy()
    bias = np.frombuffer(blob, dtype="<f8", count=n_labels,
                         offset=n_labels * dim * 8).copy()
    return SoftmaxParams(weights, bias), opts
