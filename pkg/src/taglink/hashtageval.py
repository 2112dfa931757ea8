"""Precision/recall of automatic hashtags against user-annotated ones.

The reference list is the top-M user hashtags by post frequency; an
automatic set of size K scores precision tp/K and recall tp/M.  A sweep
produces one point per (M, K) grid cell for plotting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

logger = logging.getLogger(__name__)

DEFAULT_M_VALUES = (500, 1000, 2000, 5000)


@dataclass(frozen=True)
class HashtagEvalPoint:
    method: str
    M: int
    K: int
    tp: int
    precision: float
    recall: float

    def __post_init__(self):
        if not 0 <= self.tp <= min(self.K, self.M):
            raise ValueError("true-positive count out of range")


def top_user_hashtags(posts: Sequence, M: int) -> list[str]:
    """Top-M user hashtags by number of posts carrying them.

    A post counts once per hashtag no matter how often it repeats the
    tag; ties rank lexicographically.  Fewer than M distinct hashtags
    returns them all and logs a warning.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    counts: dict[str, int] = {}
    for post in posts:
        for word in post.user_hashtags:
            counts[word] = counts.get(word, 0) + 1
    ranked = sorted(counts, key=lambda w: (-counts[w], w))
    if len(ranked) < M:
        logger.warning(
            "only %d distinct user hashtags available, requested top %d",
            len(ranked),
            M,
        )
    return ranked[:M]


def precision_recall(
    auto: Iterable[str], user_top: Sequence[str], method: str = "auto"
) -> HashtagEvalPoint:
    """Set precision and recall of an automatic hashtag selection."""
    auto = set(auto)
    top = set(user_top)
    if not auto:
        raise ValueError("automatic hashtag set is empty")
    if not top:
        raise ValueError("user hashtag list is empty")
    tp = len(auto & top)
    return HashtagEvalPoint(
        method=method,
        M=len(top),
        K=len(auto),
        tp=tp,
        precision=tp / len(auto),
        recall=tp / len(top),
    )


def sweep_curves(
    annotator: Callable[[int], Iterable[str]],
    posts: Sequence,
    M_values: Sequence[int] = DEFAULT_M_VALUES,
    K_schedule: Sequence[int] = (1, 2, 3, 5, 8),
    method: str = "auto",
) -> list[HashtagEvalPoint]:
    """One eval point per (M, K): annotator(K) scored against each top-M.

    The annotator maps a per-cluster word budget to the automatic
    hashtag set it induces, so K here is the selection knob rather than
    the literal set size.
    """
    points = []
    for k in K_schedule:
        auto = set(annotator(k))
        for m in M_values:
            user_top = top_user_hashtags(posts, m)
            points.append(precision_recall(auto, user_top, method=method))
    return points


def save_eval_points(points: Sequence[HashtagEvalPoint], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,M,K,tp,precision,recall\n")
        for pt in points:
            fh.write(
                f"{pt.method},{pt.M},{pt.K},{pt.tp},{pt.precision!r},{pt.recall!r}\n"
            )
