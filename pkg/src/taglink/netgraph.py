"""Content+context graphs: users and hashtags joined by typed interactions.

Each platform gets one undirected graph whose vertices are users and
automatically annotated hashtags.  Edges carry one count per interaction
type; the summed count is the weight used by alignment and features.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .wordgraph import WeightedGraph

logger = logging.getLogger(__name__)

EDGE_TYPES = ("user_post", "hashtag_mention", "repost", "co_occurrence")


@dataclass(frozen=True)
class Vertex:
    """A graph vertex: a platform user or a hashtag word.

    Hashtags are platform-neutral (platform None, rendered as '-'), which
    is what lets two platform graphs share hashtag identities at seeding
    time.
    """

    kind: str
    platform: str | None
    label: str

    def __post_init__(self):
        if self.kind not in ("user", "hashtag"):
            raise ValueError(f"bad vertex kind {self.kind!r}")
        if (self.kind == "user") != (self.platform is not None):
            raise ValueError("users carry a platform, hashtags do not")

    def __str__(self) -> str:
        return f"{self.kind}:{self.platform or '-'}:{self.label}"

    @staticmethod
    def parse(text: str) -> "Vertex":
        kind, platform, label = text.split(":", 2)
        return Vertex(kind, None if platform == "-" else platform, label)


def user_vertex(platform: str, user_id: str) -> Vertex:
    return Vertex("user", platform, user_id)


def hashtag_vertex(word: str) -> Vertex:
    return Vertex("hashtag", None, word)


@dataclass(frozen=True)
class TypedEdge:
    u: Vertex
    v: Vertex
    counts: dict

    @property
    def weight(self) -> int:
        return sum(self.counts.values())


class ContentContextGraph:
    """Undirected typed-count multigraph over user and hashtag vertices."""

    def __init__(self, platform: str):
        self.platform = platform
        self._adj: dict[Vertex, dict[Vertex, dict[str, int]]] = {}
        self.diagnostics = {"unresolved_reposts": 0, "self_interactions": 0}

    def add_count(self, u: Vertex, v: Vertex, edge_type: str, n: int = 1) -> None:
        if edge_type not in EDGE_TYPES:
            raise ValueError(f"unknown edge type {edge_type!r}")
        if u == v:
            raise ValueError("edge endpoints must be distinct")
        if n < 1:
            raise ValueError("count increments must be positive")
        counts = self._adj.setdefault(u, {}).get(v)
        if counts is None:
            counts = {}
            self._adj[u][v] = counts
            self._adj.setdefault(v, {})[u] = counts
        counts[edge_type] = counts.get(edge_type, 0) + n

    def has_vertex(self, v: Vertex) -> bool:
        return v in self._adj

    def vertices(self) -> Iterable[Vertex]:
        return self._adj.keys()

    def neighbors(self, v: Vertex) -> Iterable[Vertex]:
        return self._adj[v].keys()

    def edge(self, u: Vertex, v: Vertex) -> TypedEdge | None:
        counts = self._adj.get(u, {}).get(v)
        if counts is None:
            return None
        a, b = sorted((u, v), key=str)
        return TypedEdge(a, b, dict(counts))

    def summed_weight(self, u: Vertex, v: Vertex) -> int:
        counts = self._adj.get(u, {}).get(v)
        return sum(counts.values()) if counts else 0

    @property
    def n_vertices(self) -> int:
        return len(self._adj)

    @property
    def n_edges(self) -> int:
        return sum(len(n) for n in self._adj.values()) // 2

    def edges(self) -> list[TypedEdge]:
        out = []
        for u, nbrs in self._adj.items():
            for v, counts in nbrs.items():
                if str(u) <= str(v):
                    out.append(TypedEdge(u, v, dict(counts)))
        out.sort(key=lambda e: (str(e.u), str(e.v)))
        return out

    def hashtag_words(self) -> set[str]:
        return {v.label for v in self._adj if v.kind == "hashtag"}

    def to_weighted(self) -> WeightedGraph:
        """Collapse typed counts into summed weights."""
        g = WeightedGraph()
        for v in self._adj:
            g.add_vertex(v)
        for e in self.edges():
            g.add_edge(e.u, e.v, float(e.weight))
        return g


def build_graph(
    posts: Sequence, auto_hashtags: frozenset | set, platform: str | None = None
) -> ContentContextGraph:
    """Build one platform's content+context graph from processed posts.

    Per post: author-mention pairs count as user_post, author-tag pairs
    (tokens that are automatic hashtags) as hashtag_mention, resolvable
    reposts as repost, and unordered pairs of co-present tags or of
    co-mentioned users as co_occurrence.  Self-pairs are skipped and
    unresolvable repost references only bump a diagnostics counter, so a
    post with no interactions contributes nothing at all.
    """
    if not auto_hashtags:
        raise DataError("automatic hashtag set is empty")
    platforms = {p.platform for p in posts}
    if platform is None:
        if len(platforms) > 1:
            raise DataError(f"corpus mixes platforms {sorted(platforms)}")
        platform = platforms.pop() if platforms else "A"
    elif platforms - {platform}:
        raise DataError(f"corpus contains posts from platforms {sorted(platforms)}")

    author_of = {p.post_id: p.author for p in posts}
    graph = ContentContextGraph(platform)
    diag = graph.diagnostics
    for post in posts:
        author = user_vertex(platform, post.author)
        mentioned = sorted(set(post.mentioned_users))
        for m in mentioned:
            if m == post.author:
                diag["self_interactions"] += 1
                continue
            graph.add_count(author, user_vertex(platform, m), "user_post")
        tags = sorted(set(post.tokens) & auto_hashtags)
        for tag in tags:
            graph.add_count(author, hashtag_vertex(tag), "hashtag_mention")
        if post.repost_of is not None:
            src = author_of.get(post.repost_of)
            if src is None:
                diag["unresolved_reposts"] += 1
            elif src == post.author:
                diag["self_interactions"] += 1
            else:
                graph.add_count(author, user_vertex(platform, src), "repost")
        for t1, t2 in combinations(tags, 2):
            graph.add_count(hashtag_vertex(t1), hashtag_vertex(t2), "co_occurrence")
        for m1, m2 in combinations(mentioned, 2):
            graph.add_count(
                user_vertex(platform, m1), user_vertex(platform, m2), "co_occurrence"
            )
    return graph


def graph_stats(graph: ContentContextGraph) -> dict:
    """Vertex counts by kind, edge count totals by type, degree deciles."""
    kinds = {"user": 0, "hashtag": 0}
    for v in graph.vertices():
        kinds[v.kind] += 1
    totals = {t: 0 for t in EDGE_TYPES}
    for e in graph.edges():
        for t, c in e.counts.items():
            totals[t] += c
    degrees = sorted(len(graph._adj[v]) for v in graph.vertices())
    if degrees:
        deciles = [
            float(np.percentile(degrees, q)) for q in range(0, 101, 10)
        ]
    else:
        deciles = []
    return {
        "platform": graph.platform,
        "vertices_by_kind": kinds,
        "edge_counts_by_type": totals,
        "degree_deciles": deciles,
    }


def save_ccgraph(graph: ContentContextGraph, path: str) -> None:
    """One edge per line: endpoints plus the four per-type counts."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in graph.edges():
            cells = [str(e.u), str(e.v)] + [str(e.counts.get(t, 0)) for t in EDGE_TYPES]
            fh.write("\t".join(cells) + "\n")


def load_ccgraph(path: str, platform: str) -> ContentContextGraph:
    graph = ContentContextGraph(platform)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            u = Vertex.parse(cells[0])
            v = Vertex.parse(cells[1])
            for t, c in zip(EDGE_TYPES, cells[2:]):
                if int(c) > 0:
                    graph.add_count(u, v, t, int(c))
    return graph
