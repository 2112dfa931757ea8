"""PLSA topic model and topic-based automatic hashtag selection.

The aspect model factorizes the document-word count matrix as

    p(d, w) = sum_c p(c) p(w|c) p(d|c)

and is fit with EM.  Initial responsibilities are drawn once per
(topic, word) cell from a seeded uniform distribution, so the fit
depends on the vocabulary order but not on document order.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import DataError, NumericalError

logger = logging.getLogger(__name__)


@dataclass
class Vocabulary:
    """Corpus words kept for modeling, ordered by (count desc, word asc)."""

    words: list[str]
    index: dict[str, int]
    counts: list[int]
    min_count: int

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index


def build_vocabulary(posts: Iterable, min_count: int = 5) -> Vocabulary:
    """Tally token occurrences and keep words seen at least min_count times."""
    tally: Counter[str] = Counter()
    for post in posts:
        tally.update(post.tokens)
    kept = sorted(
        ((w, c) for w, c in tally.items() if c >= min_count),
        key=lambda wc: (-wc[1], wc[0]),
    )
    if not kept:
        raise DataError(
            f"no token occurs at least {min_count} times; vocabulary is empty"
        )
    words = [w for w, _ in kept]
    return Vocabulary(
        words=words,
        index={w: i for i, w in enumerate(words)},
        counts=[c for _, c in kept],
        min_count=min_count,
    )


def build_doc_term_matrix(posts: Sequence, vocab: Vocabulary) -> sparse.csr_matrix:
    """Sparse document-term count matrix; one row per post."""
    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []
    for d, post in enumerate(posts):
        counts = Counter(t for t in post.tokens if t in vocab.index)
        for word, n in sorted(counts.items()):
            rows.append(d)
            cols.append(vocab.index[word])
            vals.append(n)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(posts), len(vocab)), dtype=np.float64
    )


@dataclass
class PlsaModel:
    n_topics: int
    p_w_given_c: np.ndarray          # (topics, words), rows sum to 1
    p_d_given_c: np.ndarray | None   # (topics, docs), rows sum to 1
    p_c: np.ndarray | None           # (topics,), sums to 1
    loglik_trace: list[float] = field(default_factory=list)
    vocabulary: Vocabulary | None = None


def fit_plsa(
    doc_term_counts,
    n_topics: int,
    max_iters: int = 200,
    tol: float = 1e-5,
    seed: int = 0,
    vocabulary: Vocabulary | None = None,
) -> PlsaModel:
    """Fit the aspect model with EM.

    Args:
        doc_term_counts: docs x words count matrix (scipy sparse or dense).
        n_topics: number of latent topics, >= 1.
        max_iters: EM iteration cap.
        tol: stop when the relative log-likelihood change drops below this.
        seed: seeds the responsibility initialization.
        vocabulary: optional, attached to the model for word lookups.

    The per-iteration log-likelihood trace is recorded on the model and
    is non-decreasing up to floating-point noise.
    """
    if n_topics < 1:
        raise ValueError("n_topics must be at least 1")
    coo = sparse.coo_matrix(doc_term_counts)
    n_docs, n_words = coo.shape
    if coo.nnz == 0:
        raise DataError("document-term matrix has no counts")
    rows = coo.row.astype(np.int64)
    cols = coo.col.astype(np.int64)
    vals = coo.data.astype(np.float64)
    if np.any(vals < 0):
        raise ValueError("counts must be nonnegative")

    k = n_topics
    rng = np.random.default_rng(seed)
    # Responsibilities p(c|d,w) start proportional to a per-(topic, word)
    # uniform draw, identical across documents.
    draw = rng.random((k, n_words))
    resp0 = draw / draw.sum(axis=0, keepdims=True)

    col_totals = np.bincount(cols, weights=vals, minlength=n_words)
    n_w = resp0 * col_totals                      # (k, words)
    n_d = np.empty((k, n_docs))
    for c in range(k):
        n_d[c] = np.bincount(rows, weights=vals * resp0[c, cols], minlength=n_docs)

    def _m_step(n_w: np.ndarray, n_d: np.ndarray):
        row_w = n_w.sum(axis=1)
        row_d = n_d.sum(axis=1)
        if np.any(row_w <= 0) or np.any(row_d <= 0):
            raise NumericalError("a topic lost all its mass")
        return n_w / row_w[:, None], n_d / row_d[:, None], row_d / row_d.sum()

    p_w, p_d, p_c = _m_step(n_w, n_d)

    def _joint_at_nonzeros() -> np.ndarray:
        z = np.zeros(len(vals))
        for c in range(k):
            z += p_c[c] * p_d[c, rows] * p_w[c, cols]
        return z

    trace: list[float] = []
    for it in range(max_iters):
        z = _joint_at_nonzeros()
        if not np.all(np.isfinite(z)) or np.any(z <= 0):
            raise NumericalError(f"degenerate joint probability at iteration {it}")
        ll = float(vals @ np.log(z))
        if not np.isfinite(ll):
            raise NumericalError(f"log-likelihood diverged at iteration {it}")
        trace.append(ll)
        if len(trace) > 1 and abs(ll - trace[-2]) <= tol * abs(trace[-2]):
            break
        scale = vals / z
        n_w = np.empty((k, n_words))
        n_d = np.empty((k, n_docs))
        for c in range(k):
            r = p_c[c] * (p_d[c, rows] * p_w[c, cols]) * scale
            n_w[c] = np.bincount(cols, weights=r, minlength=n_words)
            n_d[c] = np.bincount(rows, weights=r, minlength=n_docs)
        p_w, p_d, p_c = _m_step(n_w, n_d)
    else:
        z = _joint_at_nonzeros()
        if not np.all(np.isfinite(z)) or np.any(z <= 0):
            raise NumericalError("degenerate joint probability after final update")
        trace.append(float(vals @ np.log(z)))

    return PlsaModel(
        n_topics=k,
        p_w_given_c=p_w,
        p_d_given_c=p_d,
        p_c=p_c,
        loglik_trace=trace,
        vocabulary=vocabulary,
    )


def top_words_per_topic(
    model: PlsaModel, words_per_topic: int
) -> list[list[tuple[str, float]]]:
    """Highest-p(w|c) words for each topic; ties break lexicographically."""
    if model.vocabulary is None:
        raise ValueError("model has no vocabulary attached")
    if words_per_topic < 1:
        raise ValueError("words_per_topic must be positive")
    words = model.vocabulary.words
    out: list[list[tuple[str, float]]] = []
    for c in range(model.n_topics):
        row = model.p_w_given_c[c]
        order = sorted(range(len(words)), key=lambda i: (-row[i], words[i]))
        out.append([(words[i], float(row[i])) for i in order[:words_per_topic]])
    return out


def annotate_topic_hashtags(model: PlsaModel, words_per_topic: int) -> set[str]:
    """Union of every topic's top words: the automatic hashtag set."""
    tags: set[str] = set()
    for ranked in top_words_per_topic(model, words_per_topic):
        tags.update(w for w, _ in ranked)
    return tags


def save_model(model: PlsaModel, path: str) -> None:
    """Dump n_topics, vocabulary, and row-major p(w|c) at full precision."""
    if model.vocabulary is None:
        raise ValueError("model has no vocabulary attached")
    payload = {
        "n_topics": model.n_topics,
        "vocabulary": model.vocabulary.words,
        "p_w_given_c": [[float(x) for x in row] for row in model.p_w_given_c],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path: str) -> PlsaModel:
    """Reload a dumped model; only the word side is persisted."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    words = list(payload["vocabulary"])
    vocab = Vocabulary(
        words=words,
        index={w: i for i, w in enumerate(words)},
        counts=[0] * len(words),
        min_count=0,
    )
    return PlsaModel(
        n_topics=int(payload["n_topics"]),
        p_w_given_c=np.asarray(payload["p_w_given_c"], dtype=np.float64),
        p_d_given_c=None,
        p_c=None,
        loglik_trace=[],
        vocabulary=vocab,
    )
