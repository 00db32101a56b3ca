import numpy as np
import pytest

from relemb.corpus import NounPairContext, Vocabulary
from relemb.embed_train import EmbeddingParams


def make_vocab(word_counts, noun_counts, lowercase=True):
    """Vocabulary from explicit {surface: count} dicts (insertion order is
    the tie-break order)."""
    ranked_w = sorted(word_counts.items(), key=lambda kv: -kv[1])
    ranked_n = sorted(noun_counts.items(), key=lambda kv: -kv[1])
    return Vocabulary(
        word_surfaces=["<NULL>", "<UNK>"] + [s for s, _ in ranked_w],
        noun_surfaces=["<UNK>"] + [s for s, _ in ranked_n],
        word_counts=[0, 0] + [c for _, c in ranked_w],
        noun_counts=[0] + [c for _, c in ranked_n],
        lowercase=lowercase,
    )


def rand_params(rng, dim, window, n_nouns=6, n_words=12, pred_dim=None,
                scale=0.5):
    """Random parameters with nonzero prediction weights, for exercising
    every feature block."""
    if pred_dim is None:
        pred_dim = 2 * dim * (2 + window)
    return EmbeddingParams(
        noun_vecs=rng.normal(0, scale, (n_nouns, dim)),
        word_vecs=rng.normal(0, scale, (n_words, dim)),
        pred_vecs=rng.normal(0, scale, (n_words, pred_dim)),
        pred_bias=rng.normal(0, scale, n_words),
        dim=dim,
        window=window,
    )


def rand_ctx(rng, m_in, m_out, n_nouns=6, n_words=12):
    return NounPairContext(
        n1=int(rng.integers(0, n_nouns)),
        n2=int(rng.integers(0, n_nouns)),
        w_in=tuple(int(x) for x in rng.integers(0, n_words, m_in)),
        w_bef=tuple(int(x) for x in rng.integers(0, n_words, m_out)),
        w_aft=tuple(int(x) for x in rng.integers(0, n_words, m_out)),
    )


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_row_grads(value_fn, arrays, grads, step=1e-5, tol=1e-4):
    """Central finite differences against a dict of analytic row gradients.

    `arrays` maps the grad-key kind to the parameter array it addresses;
    `value_fn` re-evaluates the objective from the (mutated) arrays.
    """
    worst = 0.0
    for (kind, idx), grad in grads.items():
        arr = arrays[kind]
        grad = np.atleast_1d(np.asarray(grad, dtype=float))
        for pos in range(grad.size):
            if arr.ndim == 1:
                orig = arr[idx]
                arr[idx] = orig + step
                hi = value_fn()
                arr[idx] = orig - step
                lo = value_fn()
                arr[idx] = orig
            else:
                orig = arr[idx, pos]
                arr[idx, pos] = orig + step
                hi = value_fn()
                arr[idx, pos] = orig - step
                lo = value_fn()
                arr[idx, pos] = orig
            fd = (hi - lo) / (2 * step)
            err = rel_err(fd, grad[pos])
            worst = max(worst, err)
            assert err < tol, (
                f"grad mismatch at {kind}[{idx}][{pos}]: "
                f"analytic {grad[pos]:.8g} vs fd {fd:.8g} (rel err {err:.2e})")
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
