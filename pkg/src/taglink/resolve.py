"""Cross-platform user matching: trial scoring, fusion, and EER.

A trial pairs one user per platform.  Each trial gets three similarity
scores (username, community counts, walk neighborhoods) which a bagged
tree ensemble fuses into a match probability.  Equal error rates are
computed from score ranks alone, so any strictly monotone rescaling of
the scores leaves the result bit-identical.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import (
    community_feature,
    cosine_similarity,
    neighborhood_feature,
    neighborhood_similarity,
)
from .forest import Forest, train_forest
from .netgraph import user_vertex

SUBSETS = ("ALL", "NT")


def jaro_winkler(s1: str, s2: str) -> float:
    """Jaro similarity with the Winkler common-prefix boost."""
    if not s1 or not s2:
        return 0.0
    if s1 == s2:
        return 1.0
    len1, len2 = len(s1), len(s2)
    window = max(max(len1, len2) // 2 - 1, 0)
    used2 = [False] * len2
    matched1 = []
    for i, ch in enumerate(s1):
        lo = max(0, i - window)
        hi = min(len2, i + window + 1)
        for j in range(lo, hi):
            if not used2[j] and s2[j] == ch:
                used2[j] = True
                matched1.append(i)
                break
    m = len(matched1)
    if m == 0:
        return 0.0
    seq1 = [s1[i] for i in matched1]
    seq2 = [s2[j] for j in range(len2) if used2[j]]
    half_transpositions = sum(a != b for a, b in zip(seq1, seq2))
    t = half_transpositions // 2
    jaro = (m / len1 + m / len2 + (m - t) / m) / 3.0
    prefix = 0
    for a, b in zip(s1[:4], s2[:4]):
        if a != b:
            break
        prefix += 1
    return jaro + prefix * 0.1 * (1.0 - jaro)


@dataclass(frozen=True)
class Trial:
    """One candidate user pair with its ground-truth label."""

    user_a: str
    user_b: str
    label: int
    nontrivial: bool | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        derived = self.user_a != self.user_b
        if self.nontrivial is None:
            object.__setattr__(self, "nontrivial", derived)
        elif self.nontrivial != derived:
            raise ValueError("nontrivial flag contradicts the usernames")


@dataclass(frozen=True)
class ScoreVector:
    jw: float
    comm_sim: float
    nbr_sim: float

    def __post_init__(self):
        for name, value in (
            ("jw", self.jw),
            ("comm_sim", self.comm_sim),
            ("nbr_sim", self.nbr_sim),
        ):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} score {value} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.jw, self.comm_sim, self.nbr_sim)


@dataclass
class ScoringContext:
    """Everything score_trial reads; immutable once assembled."""

    graph_a: object
    graph_b: object
    communities: dict
    joined: object
    comm_k: int = 1
    nbr_k: int = 1


def score_trial(trial: Trial, ctx: ScoringContext) -> ScoreVector:
    """Username similarity plus the two graph similarities.

    Users who never interacted have no vertex, which zeroes the graph
    scores instead of failing the trial.
    """
    jw = jaro_winkler(trial.user_a, trial.user_b)
    va = user_vertex("A", trial.user_a)
    vb = user_vertex("B", trial.user_b)

    comm_sim = 0.0
    if ctx.graph_a.has_vertex(va) and ctx.graph_b.has_vertex(vb):
        vec_a = community_feature(ctx.graph_a, ctx.communities["A"], va, ctx.comm_k)
        vec_b = community_feature(ctx.graph_b, ctx.communities["B"], vb, ctx.comm_k)
        comm_sim = cosine_similarity(vec_a, vec_b)

    nbr_sim = 0.0
    node_a = ctx.joined.node_for_a(va)
    node_b = ctx.joined.node_for_b(vb)
    if node_a is not None and node_b is not None:
        row_a = neighborhood_feature(ctx.joined, node_a, ctx.nbr_k)
        row_b = neighborhood_feature(ctx.joined, node_b, ctx.nbr_k)
        nbr_sim = neighborhood_similarity(row_a, row_b)
    return ScoreVector(jw, comm_sim, nbr_sim)


_WORKER_CTX: ScoringContext | None = None


def _score_with_worker_ctx(trial: Trial) -> ScoreVector:
    return score_trial(trial, _WORKER_CTX)


def score_trials(
    trials: list[Trial], ctx: ScoringContext, threads: int = 1
) -> list[ScoreVector]:
    """Score trials in order, optionally fanning out to worker processes."""
    if threads <= 1 or len(trials) < 2:
        return [score_trial(trial, ctx) for trial in trials]
    global _WORKER_CTX
    _WORKER_CTX = ctx
    try:
        mp = multiprocessing.get_context("fork")
        chunk = max(1, len(trials) // (threads * 4))
        with mp.Pool(threads) as pool:
            return pool.map(_score_with_worker_ctx, trials, chunksize=chunk)
    finally:
        _WORKER_CTX = None


def generate_trials(
    matches: list[tuple[str, str]],
    users_a: list[str],
    users_b: list[str],
    n_negatives: int,
    hard_fraction: float = 0.3,
    seed: int = 0,
) -> list[Trial]:
    """Label-1 trials for every known match plus sampled label-0 trials.

    Negatives mix uniform cross-platform pairs with hard ones picked for
    high username similarity among alphabetically close names.
    """
    if not 0.0 <= hard_fraction <= 1.0:
        raise ValueError("hard_fraction must lie in [0, 1]")
    truth = set(matches)
    trials = [Trial(a, b, 1) for a, b in sorted(truth)]
    if not users_a or not users_b:
        raise DataError("cannot sample negatives from an empty user list")

    rng = np.random.default_rng(seed)
    users_a = sorted(set(users_a))
    users_b = sorted(set(users_b))
    chosen: set[tuple[str, str]] = set()

    n_hard = int(round(n_negatives * hard_fraction))
    if n_hard:
        # Names adjacent in sort order share prefixes, hence high jw.
        tagged = sorted(
            [(name, "A") for name in users_a] + [(name, "B") for name in users_b]
        )
        candidates = []
        for (name1, side1), (name2, side2) in zip(tagged, tagged[1:]):
            if side1 == side2:
                continue
            pair = (name1, name2) if side1 == "A" else (name2, name1)
            if pair in truth or pair in chosen:
                continue
            candidates.append((-jaro_winkler(pair[0], pair[1]), pair))
        candidates.sort()
        for _, pair in candidates[:n_hard]:
            chosen.add(pair)

    attempts = 0
    max_attempts = 50 * max(1, n_negatives)
    while len(chosen) < n_negatives and attempts < max_attempts:
        attempts += 1
        pair = (
            users_a[int(rng.integers(0, len(users_a)))],
            users_b[int(rng.integers(0, len(users_b)))],
        )
        if pair in truth or pair in chosen:
            continue
        chosen.add(pair)
    trials.extend(Trial(a, b, 0) for a, b in sorted(chosen))
    return trials


def split_trials(trials: list[Trial], seed: int = 0) -> tuple[list[Trial], list[Trial]]:
    """Seeded 50/50 split keeping every platform-A user on one side only."""
    names = sorted({trial.user_a for trial in trials})
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(names))
    half = len(names) // 2
    train_names = {names[i] for i in order[:half]}
    train = [t for t in trials if t.user_a in train_names]
    test = [t for t in trials if t.user_a not in train_names]
    for part, tag in ((train, "train"), (test, "test")):
        labels = {t.label for t in part}
        if labels != {0, 1}:
            raise DataError(f"{tag} split does not contain both labels")
    return train, test


def train_fuser(
    trials: list[Trial],
    scores: list[ScoreVector],
    n_trees: int = 100,
    max_depth: int = 5,
    seed: int = 0,
) -> Forest:
    """Fit the score fusion model on labeled trials."""
    if len(trials) != len(scores):
        raise ValueError("trials and scores differ in length")
    X = np.asarray([s.as_tuple() for s in scores], dtype=np.float64)
    y = np.asarray([t.label for t in trials], dtype=np.float64)
    return train_forest(
        X, y, n_trees=n_trees, max_depth=max_depth, n_feature_sub=2, seed=seed
    )


def predict(model: Forest, score: ScoreVector) -> float:
    return model.predict_proba(score.as_tuple())


def _rates(pairs: list[tuple[float, float]]):
    ones = np.sort(np.asarray([s for s, lab in pairs if lab == 1], dtype=np.float64))
    zeros = np.sort(np.asarray([s for s, lab in pairs if lab == 0], dtype=np.float64))
    if ones.size == 0 or zeros.size == 0:
        raise DataError("EER needs both labels present")
    thresholds = np.unique(np.concatenate([ones, zeros]))
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    miss = np.searchsorted(ones, thresholds, side="left") / ones.size
    fa = (zeros.size - np.searchsorted(zeros, thresholds, side="left")) / zeros.size
    return thresholds, miss, fa


def compute_eer(pairs: list[tuple[float, float]]) -> tuple[float, float, bool]:
    """Equal error rate over (score, label) pairs.

    Sweeps every distinct score as a threshold; a trial counts as a miss
    when a true match scores below the threshold and as a false alarm
    when a non-match scores at or above it.  When no threshold makes the
    two rates equal, the crossing is linearly interpolated and flagged.
    The result depends only on the rate staircases, never on the score
    values themselves.
    """
    thresholds, miss, fa = _rates(pairs)
    cross = int(np.argmax(miss >= fa))
    if miss[cross] == fa[cross]:
        return float(miss[cross]), float(thresholds[cross]), False
    m1, f1 = float(miss[cross - 1]), float(fa[cross - 1])
    m2, f2 = float(miss[cross]), float(fa[cross])
    frac = (f1 - m1) / ((m2 - m1) + (f1 - f2))
    eer = m1 + frac * (m2 - m1)
    return float(eer), float(thresholds[cross]), True


def subset_pairs(
    trials: list[Trial], probs: list[float], subset: str
) -> list[tuple[float, float]]:
    if subset not in SUBSETS:
        raise ValueError(f"subset must be one of {SUBSETS}")
    picked = [
        (float(p), float(t.label))
        for t, p in zip(trials, probs)
        if subset == "ALL" or t.nontrivial
    ]
    if not picked:
        raise DataError(f"no trials in subset {subset}")
    return picked


def eer_for_subset(
    trials: list[Trial], probs: list[float], subset: str
) -> tuple[float, float, bool]:
    return compute_eer(subset_pairs(trials, probs, subset))


def det_curve(pairs: list[tuple[float, float]]) -> list[tuple[float, float, float]]:
    """Operating points (threshold, miss rate, false-alarm rate)."""
    thresholds, miss, fa = _rates(pairs)
    return [
        (float(t), float(m), float(f)) for t, m, f in zip(thresholds, miss, fa)
    ]


def save_trials(trials: list[Trial], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(f"{t.user_a}\t{t.user_b}\t{t.label}\n")


def load_trials(path: str) -> list[Trial]:
    trials = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            user_a, user_b, label = line.split("\t")
            trials.append(Trial(user_a, user_b, int(label)))
    return trials


def save_scores(
    trials: list[Trial],
    scores: list[ScoreVector],
    probs: list[float] | None,
    path: str,
) -> None:
    """Trials with their three features and, once fused, the probability."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, (t, s) in enumerate(zip(trials, scores)):
            cells = [t.user_a, t.user_b, str(t.label), repr(s.jw), repr(s.comm_sim), repr(s.nbr_sim)]
            if probs is not None:
                cells.append(repr(probs[i]))
            fh.write("\t".join(cells) + "\n")


def load_scores(path: str):
    trials, scores, probs = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            trials.append(Trial(cells[0], cells[1], int(cells[2])))
            scores.append(ScoreVector(float(cells[3]), float(cells[4]), float(cells[5])))
            if len(cells) > 6:
                probs.append(float(cells[6]))
    return trials, scores, (probs if probs else None)


def save_det_curve(points: list[tuple[float, float, float]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,miss_rate,fa_rate\n")
        for threshold, miss, fa in points:
            fh.write(f"{threshold!r},{miss!r},{fa!r}\n")
