"""Paired-platform synthetic corpora with planted cross-platform users.

Entities draw topic mixtures, emit token posts with hashtag marks, and
mention or repost a planted friend circle.  A configured fraction of
entities exists on both platforms, optionally with an edited username;
those pairs form the ground truth for matching experiments.  Everything
is a pure function of the config, so one seed gives one byte-identical
pair of corpora.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from .corpus import RawPost

_LETTERS = list(string.ascii_lowercase)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_entities: int = 200
    cross_platform_fraction: float = 0.4
    n_topics_true: int = 4
    vocab_size: int = 300
    posts_per_user: tuple[int, int] = (3, 8)
    hashtag_rate: float = 0.3
    mention_rate: float = 0.6
    repost_rate: float = 0.15
    username_perturbation_rate: float = 0.3
    words_per_post: tuple[int, int] = (6, 14)
    topic_concentration: float = 0.2
    core_mass: float = 0.85
    neighbor_overlap: float = 0.8
    friends_per_entity: tuple[int, int] = (3, 8)

    def __post_init__(self):
        rates = {
            "cross_platform_fraction": self.cross_platform_fraction,
            "hashtag_rate": self.hashtag_rate,
            "mention_rate": self.mention_rate,
            "repost_rate": self.repost_rate,
            "username_perturbation_rate": self.username_perturbation_rate,
            "core_mass": self.core_mass,
            "neighbor_overlap": self.neighbor_overlap,
        }
        for name, value in rates.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.vocab_size < self.n_topics_true:
            raise ValueError("vocabulary smaller than the number of topics")
        if self.n_entities < 1 or self.n_topics_true < 1:
            raise ValueError("need at least one entity and one topic")
        for name, pair in (
            ("posts_per_user", self.posts_per_user),
            ("words_per_post", self.words_per_post),
            ("friends_per_entity", self.friends_per_entity),
        ):
            if pair[0] < 1 or pair[0] > pair[1]:
                raise ValueError(f"{name} range {pair} is not a valid span")
        if self.topic_concentration <= 0.0:
            raise ValueError("topic_concentration must be positive")


@dataclass(frozen=True)
class MatchPair:
    user_a: str
    user_b: str
    nontrivial: bool


@dataclass(frozen=True)
class GroundTruth:
    """Planted matches plus each user's true topic mixture."""

    matches: tuple[MatchPair, ...]
    mixtures: dict = field(default_factory=dict, compare=False)


def vocabulary_words(config: SynthConfig) -> list[str]:
    return [f"word{i:04d}" for i in range(config.vocab_size)]


def topic_cores(config: SynthConfig) -> list[list[str]]:
    """Disjoint contiguous vocabulary blocks, one high-mass core per topic."""
    words = vocabulary_words(config)
    k = config.n_topics_true
    bounds = [round(i * len(words) / k) for i in range(k + 1)]
    return [words[bounds[i] : bounds[i + 1]] for i in range(k)]


def _topic_word_dists(config: SynthConfig, rng) -> np.ndarray:
    v = config.vocab_size
    k = config.n_topics_true
    cores = topic_cores(config)
    word_index = {w: i for i, w in enumerate(vocabulary_words(config))}
    dists = np.zeros((k, v))
    for t, core in enumerate(cores):
        core_ids = np.asarray([word_index[w] for w in core], dtype=np.intp)
        inside = rng.dirichlet(np.ones(core_ids.size))
        dists[t, core_ids] = config.core_mass * inside
        rest = np.setdiff1d(np.arange(v), core_ids)
        if rest.size:
            outside = rng.dirichlet(np.ones(rest.size))
            dists[t, rest] = (1.0 - config.core_mass) * outside
        else:
            dists[t, core_ids] += (1.0 - config.core_mass) * inside
    return dists


_STEMS = (
    "alder", "amber", "aspen", "badger", "birch", "blaze", "breeze", "brook",
    "cedar", "cliff", "cloud", "coral", "crane", "delta", "drift", "dusk",
    "ember", "fable", "fern", "flint", "frost", "gale", "glade", "grove",
    "hazel", "heron", "iris", "jade", "juniper", "kestrel", "lark", "lichen",
    "maple", "marsh", "moss", "nettle", "otter", "pebble", "pine", "quartz",
    "raven", "reed", "sable", "sedge", "slate", "thorn", "vale", "wren",
)


def _unique_usernames(n: int, rng) -> list[str]:
    """Handles built from a small stem pool so near-collisions happen.

    Distinct users end up with names like cedar7 and cedar73, which is
    what makes username similarity fallible the way real handles are.
    """
    names: list[str] = []
    seen: set[str] = set()
    misses = 0
    while len(names) < n:
        stem = str(rng.choice(_STEMS))
        style = int(rng.integers(0, 3))
        if style == 0:
            name = stem + str(int(rng.integers(0, 100)))
        elif style == 1:
            name = stem + str(rng.choice(_STEMS))
        else:
            name = stem + str(rng.choice(_STEMS)) + str(int(rng.integers(0, 10)))
        if misses > 64:
            name += str(len(names))
        if name in seen:
            misses += 1
            continue
        misses = 0
        seen.add(name)
        names.append(name)
    return names


def perturb_username(name: str, rng) -> str:
    """Edit a username with one swap, drop, or append; always changes it."""
    for _ in range(16):
        op = int(rng.integers(0, 3))
        if op == 0 and len(name) >= 2:
            spots = [i for i in range(len(name) - 1) if name[i] != name[i + 1]]
            if spots:
                i = spots[int(rng.integers(0, len(spots)))]
                edited = name[:i] + name[i + 1] + name[i] + name[i + 2 :]
                return edited
        elif op == 1 and len(name) >= 2:
            i = int(rng.integers(0, len(name)))
            edited = name[:i] + name[i + 1 :]
            if edited != name:
                return edited
        else:
            return name + str(rng.choice(_LETTERS))
    return name + str(rng.choice(_LETTERS))


def _sample_words(theta, cum_dists, n_words, rng) -> np.ndarray:
    topics = rng.choice(theta.size, size=n_words, p=theta)
    unifs = rng.random(n_words)
    out = np.empty(n_words, dtype=np.intp)
    for t in np.unique(topics):
        mask = topics == t
        idx = np.searchsorted(cum_dists[t], unifs[mask], side="right")
        out[mask] = np.clip(idx, 0, cum_dists.shape[1] - 1)
    return out


def generate(config: SynthConfig):
    """Build (corpus_A, corpus_B, ground_truth) from the config alone."""
    rng = np.random.default_rng(config.seed)
    words = vocabulary_words(config)
    dists = _topic_word_dists(config, rng)
    cum_dists = np.cumsum(dists, axis=1)

    n = config.n_entities
    thetas = rng.dirichlet(
        np.full(config.n_topics_true, config.topic_concentration), size=n
    )
    names_a = _unique_usernames(n, rng)

    n_cross = int(round(config.cross_platform_fraction * n))
    on_a = [True] * n
    on_b = [True] * n
    for e in range(n_cross, n):
        if (e - n_cross) % 2 == 0:
            on_b[e] = False
        else:
            on_a[e] = False

    names_b: list[str | None] = [None] * n
    taken = set(names_a)
    for e in range(n):
        if not on_b[e]:
            continue
        name = names_a[e]
        if e < n_cross and rng.random() < config.username_perturbation_rate:
            edited = perturb_username(name, rng)
            while edited in taken:
                edited = perturb_username(edited, rng)
            taken.add(edited)
            name = edited
        names_b[e] = name

    # Planted friend circles with topical affinity shared across platforms.
    dominant = np.argmax(thetas, axis=1)
    by_topic = {t: np.nonzero(dominant == t)[0] for t in range(config.n_topics_true)}
    friends: list[np.ndarray] = []
    lo_f, hi_f = config.friends_per_entity
    for e in range(n):
        want = min(int(rng.integers(lo_f, hi_f + 1)), n - 1)
        mine: set[int] = set()
        while len(mine) < want:
            same = by_topic[int(dominant[e])]
            if rng.random() < 0.8 and same.size > 1:
                cand = int(same[int(rng.integers(0, same.size))])
            else:
                cand = int(rng.integers(0, n))
            if cand != e:
                mine.add(cand)
        friends.append(np.asarray(sorted(mine), dtype=np.intp))

    def platform_friends(e: int, member, overlap: float) -> list[int]:
        keep = []
        for f in friends[e]:
            f = int(f)
            if overlap < 1.0 and rng.random() >= overlap:
                f = int(rng.integers(0, n))
            if f != e and member[f]:
                keep.append(f)
        return sorted(set(keep))

    corpora: dict[str, list[RawPost]] = {"A": [], "B": []}
    for platform, member, names, overlap in (
        ("A", on_a, names_a, 1.0),
        ("B", on_b, names_b, config.neighbor_overlap),
    ):
        drafts = []
        ts = 0
        for e in range(n):
            if not member[e]:
                continue
            circle = platform_friends(e, member, overlap)
            n_posts = int(
                rng.integers(config.posts_per_user[0], config.posts_per_user[1] + 1)
            )
            for _ in range(n_posts):
                lo_w, hi_w = config.words_per_post
                n_words = int(rng.integers(lo_w, hi_w + 1))
                idx = _sample_words(thetas[e], cum_dists, n_words, rng)
                tagged = rng.random(n_words) < config.hashtag_rate
                tokens = [
                    ("#" + words[i]) if tag else words[i]
                    for i, tag in zip(idx, tagged)
                ]
                mentions: tuple[str, ...] = ()
                if circle and rng.random() < config.mention_rate:
                    count = min(int(rng.integers(1, 3)), len(circle))
                    picked = rng.choice(len(circle), size=count, replace=False)
                    mentions = tuple(sorted(names[circle[i]] for i in picked))
                drafts.append(
                    {
                        "entity": e,
                        "author": names[e],
                        "text": " ".join(tokens),
                        "mentions": mentions,
                        "ts": ts,
                        "circle": circle,
                    }
                )
                ts += 1

        by_entity: dict[int, list[str]] = {}
        for i, d in enumerate(drafts):
            d["post_id"] = f"{platform}{i:06d}"
            by_entity.setdefault(d["entity"], []).append(d["post_id"])
        for d in drafts:
            repost_of = None
            if d["circle"] and rng.random() < config.repost_rate:
                sources = [f for f in d["circle"] if by_entity.get(f)]
                if sources:
                    src = sources[int(rng.integers(0, len(sources)))]
                    pool = by_entity[src]
                    repost_of = pool[int(rng.integers(0, len(pool)))]
            corpora[platform].append(
                RawPost(
                    platform=platform,
                    post_id=d["post_id"],
                    author=d["author"],
                    text=d["text"],
                    mentioned_users=d["mentions"],
                    repost_of=repost_of,
                    timestamp=d["ts"],
                )
            )

    matches = tuple(
        MatchPair(names_a[e], names_b[e], names_a[e] != names_b[e])
        for e in range(n_cross)
    )
    mixtures = {}
    for e in range(n):
        if on_a[e]:
            mixtures[("A", names_a[e])] = tuple(float(x) for x in thetas[e])
        if on_b[e]:
            mixtures[("B", names_b[e])] = tuple(float(x) for x in thetas[e])
    truth = GroundTruth(matches=matches, mixtures=mixtures)
    return corpora["A"], corpora["B"], truth


def write_ground_truth(truth: GroundTruth, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in truth.matches:
            fh.write(f"{m.user_a}\t{m.user_b}\t{int(m.nontrivial)}\n")


def load_ground_truth(path: str) -> GroundTruth:
    """Matched pairs only; topic mixtures are not persisted."""
    matches = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            user_a, user_b, flag = line.split("\t")
            matches.append(MatchPair(user_a, user_b, bool(int(flag))))
    return GroundTruth(matches=tuple(matches))
