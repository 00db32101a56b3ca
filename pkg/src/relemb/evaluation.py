"""Scoring and analysis: official relation scoring, bootstrap intervals,
word-similarity correlation, ablation runs, and top-n-gram inspection.

The relation scorer follows the SemEval-2010 Task 8 official protocol: a
prediction is a true positive only when relation family and argument
direction both match; per-family precision/recall aggregate both directions;
the macro-F1 averages the family F1 values with Other excluded from the
average (but counted in the denominators).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .corpus import ALL_LABELS, FAMILIES, NULL_WORD, label_index
from .classifier import cross_validate
from .features import FeatureOptions, ngram_embedding

logger = logging.getLogger(__name__)

__all__ = [
    "EvalReport",
    "WordSimResult",
    "score_semeval",
    "bootstrap_ci",
    "read_wordsim",
    "spearman_wordsim",
    "top_ngrams",
    "ABLATION_SETTINGS",
    "run_ablations",
    "format_report",
    "report_kv",
    "write_predictions",
]

_N_LABELS = len(ALL_LABELS)

# family -> label indices (e1,e2 first), plus Other at the end
_FAMILY_SLOTS = {fam: (2 * i, 2 * i + 1) for i, fam in enumerate(FAMILIES)}
_OTHER_INDEX = _N_LABELS - 1


@dataclass
class EvalReport:
    per_family: dict[str, dict[str, float]]   # precision/recall/f1/gold/pred/tp
    macro_f1: float                           # percent
    accuracy: float                           # percent
    confusion: np.ndarray                     # (19, 19), rows = gold
    n: int
    bootstrap: tuple[float, float, float] | None = None   # (lower, upper, level)


def _macro_from_confusion(confusion):
    """Official macro-F1 (percent) from a 19x19 gold-by-predicted matrix.

    Families absent from both gold and predictions do not enter the
    average, which reduces to the usual 9-family mean on full data.
    """
    per_family = {}
    f1s = []
    for fam, (a, b) in _FAMILY_SLOTS.items():
        tp = confusion[a, a] + confusion[b, b]
        gold_n = confusion[[a, b], :].sum()
        pred_n = confusion[:, [a, b]].sum()
        precision = tp / pred_n if pred_n else 0.0
        recall = tp / gold_n if gold_n else 0.0
        f1 = 2 * precision * recall / (precision + recall) \
            if precision + recall else 0.0
        per_family[fam] = {
            "precision": 100.0 * precision,
            "recall": 100.0 * recall,
            "f1": 100.0 * f1,
            "gold": int(gold_n),
            "pred": int(pred_n),
            "tp": int(tp),
        }
        if gold_n or pred_n:
            f1s.append(f1)
    macro = 100.0 * sum(f1s) / len(f1s) if f1s else 0.0
    return macro, per_family


def score_semeval(gold, pred):
    """Score predicted labels against gold labels; returns an EvalReport."""
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    confusion = np.zeros((_N_LABELS, _N_LABELS), dtype=np.int64)
    for g, p in zip(gold, pred):
        confusion[label_index(g), label_index(p)] += 1
    macro, per_family = _macro_from_confusion(confusion)
    accuracy = 100.0 * float(np.trace(confusion)) / len(gold) if gold else 0.0
    return EvalReport(per_family, macro, accuracy, confusion, len(gold))


def bootstrap_ci(gold, pred, iterations=1000, level=0.95, seed=1):
    """Percentile bootstrap interval for the official macro-F1.

    Instances are resampled with replacement `iterations` times; returns the
    ((1-level)/2, (1+level)/2) percentiles of the resampled scores.
    """
    if iterations < 100:
        raise ValueError("iterations must be >= 100")
    gold_ids = np.array([label_index(g) for g in gold])
    pred_ids = np.array([label_index(p) for p in pred])
    n = len(gold_ids)
    rng = np.random.default_rng(seed)
    scores = np.empty(iterations)
    for it in range(iterations):
        idx = rng.integers(0, n, n)
        confusion = np.zeros((_N_LABELS, _N_LABELS), dtype=np.int64)
        np.add.at(confusion, (gold_ids[idx], pred_ids[idx]), 1)
        scores[it], _ = _macro_from_confusion(confusion)
    lo, hi = np.percentile(scores, [50 * (1 - level), 50 * (1 + level)])
    return float(lo), float(hi)


# --- word similarity ---------------------------------------------------------

@dataclass
class WordSimResult:
    rho: float
    n_pairs: int
    oov_pairs: list[tuple[str, str]]


def read_wordsim(source):
    """Read ``word1,word2,score`` pairs (comma- or tab-separated, optional
    header line)."""
    if isinstance(source, str) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    pairs = []
    for row in csv.reader(io.StringIO(text),
                          delimiter="\t" if "\t" in text else ","):
        if not row or len(row) < 3:
            continue
        try:
            score = float(row[2])
        except ValueError:
            continue   # header
        pairs.append((row[0].strip(), row[1].strip(), score))
    return pairs


def spearman_wordsim(pairs, params, vocab, matrix="noun"):
    """Spearman rank correlation between human scores and cosine
    similarities under the selected embedding matrix ("noun" or "word").

    Out-of-vocabulary words fall back to their UNK embedding and the pair is
    reported in the result.
    """
    if matrix == "noun":
        vecs, lookup, unk = params.noun_vecs, vocab.noun_id, 0
    elif matrix == "word":
        from .corpus import UNK_WORD
        vecs, lookup, unk = params.word_vecs, vocab.word_id, UNK_WORD
    else:
        raise ValueError("matrix must be 'noun' or 'word'")
    human = []
    sims = []
    oov = []
    for w1, w2, score in pairs:
        i1, i2 = lookup(w1), lookup(w2)
        if i1 == unk or i2 == unk:
            oov.append((w1, w2))
        v1, v2 = vecs[i1], vecs[i2]
        denom = np.linalg.norm(v1) * np.linalg.norm(v2)
        sims.append(float(v1 @ v2 / denom) if denom > 0 else 0.0)
        human.append(score)
    rho = float(spearmanr(human, sims).statistic)
    return WordSimResult(rho, len(pairs), oov)


# --- n-gram inspection -------------------------------------------------------

def top_ngrams(softmax_params, embed_params, opts, instances, label, n,
               top_k=5, vocab=None):
    """Highest-scoring n-grams from the training set for one class.

    Every length-`n` window over the between-words of `instances` (center
    word plus (n-1)/2 neighbors each side, NULL past the span) is embedded
    like a full n-gram with the out-of-window neighbor slots masked to NULL,
    then scored by dot product with the class's between-block rows of the
    softmax weights.  Returns ``top_k`` ``(words, score)`` pairs,
    deduplicated by surface form; `words` are id tuples, or rendered
    surfaces when `vocab` is given.
    """
    if not opts.include_between or opts.bow_between:
        raise ValueError("classifier has no order-aware between block")
    if n < 1 or n % 2 == 0 or n > 2 * embed_params.window + 1:
        raise ValueError(f"n must be odd and within 1..{2 * embed_params.window + 1}")
    half = (n - 1) // 2
    # between-block offset within the assembled feature vector
    off = 2 * embed_params.dim if opts.include_nouns else 0
    blk = 2 * embed_params.window * embed_params.dim + embed_params.pred_dim
    class_row = softmax_params.weights[label_index(label), off:off + blk]

    seen = {}
    order = []
    for inst in instances:
        ctx = inst.context
        for i in range(1, ctx.m_in + 1):
            words = tuple(
                ctx.w_in[i + o - 1] if 1 <= i + o <= ctx.m_in else NULL_WORD
                for o in range(-half, half + 1)
            )
            if words in seen:
                continue
            h = ngram_embedding(ctx, i, embed_params, mask_beyond=half)
            seen[words] = float(class_row @ h)
            order.append(words)
    ranked = sorted(order, key=lambda w: -seen[w])[:top_k]
    if vocab is not None:
        return [(tuple(vocab.word_surface(w) for w in words), seen[words])
                for words in ranked]
    return [(words, seen[words]) for words in ranked]


# --- ablations ---------------------------------------------------------------

ABLATION_SETTINGS = (
    ("nouns", FeatureOptions(True, False, False)),
    ("between", FeatureOptions(False, True, False)),
    ("between-bow", FeatureOptions(False, True, False, bow_between=True)),
    ("nouns+between", FeatureOptions(True, True, False)),
    ("nouns+between+outside", FeatureOptions(True, True, True)),
)


def run_ablations(instances, embed_params, config, folds=10, seed=1):
    """Cross-validate the five feature-block combinations on one shared fold
    split; returns ``[(name, mean_f1, fold_scores), ...]``."""
    settings = [(name, config, opts) for name, opts in ABLATION_SETTINGS]
    return cross_validate(instances, embed_params, settings,
                          folds=folds, seed=seed)


# --- rendering ---------------------------------------------------------------

def format_report(report):
    """Aligned text table of an EvalReport."""
    lines = []
    lines.append(f"{'family':<22}{'P':>8}{'R':>8}{'F1':>8}{'gold':>7}{'pred':>7}")
    for fam in FAMILIES:
        s = report.per_family[fam]
        lines.append(f"{fam:<22}{s['precision']:>8.2f}{s['recall']:>8.2f}"
                     f"{s['f1']:>8.2f}{s['gold']:>7}{s['pred']:>7}")
    lines.append("")
    lines.append(f"official macro-F1: {report.macro_f1:.2f}")
    lines.append(f"accuracy (19-way): {report.accuracy:.2f}")
    if report.bootstrap is not None:
        lo, hi, level = report.bootstrap
        lines.append(f"bootstrap {100 * level:.0f}% interval: ({lo:.1f}, {hi:.1f})")
    return "\n".join(lines)


def report_kv(report):
    """Machine-readable key=value lines."""
    lines = [f"n={report.n}",
             f"macro_f1={report.macro_f1:.4f}",
             f"accuracy={report.accuracy:.4f}"]
    for fam in FAMILIES:
        s = report.per_family[fam]
        key = fam.lower().replace("-", "_")
        lines.append(f"{key}_f1={s['f1']:.4f}")
    if report.bootstrap is not None:
        lo, hi, level = report.bootstrap
        lines.append(f"bootstrap_lower={lo:.4f}")
        lines.append(f"bootstrap_upper={hi:.4f}")
        lines.append(f"bootstrap_level={level}")
    return "\n".join(lines)


def write_predictions(ids, labels, path):
    """Prediction file: ``id<TAB>label`` per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, lab in zip(ids, labels):
            fh.write(f"{i}\t{lab.surface()}\n")
