"""Per-user graph features: community count vectors and walk rows.

Community counts live in each user's own platform graph; neighborhood
probability rows live in the joined cross-platform graph.  Both turn
into similarities through a cosine, clamped so rounding noise cannot
push a score outside [0, 1].
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Hashable

from .align import JoinedGraph


@dataclass(frozen=True, eq=True)
class CommunityCountVector:
    """Counts of k-hop neighbors per community id."""

    owner: Hashable
    k: int
    counts: dict

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True, eq=True)
class NeighborhoodProbVector:
    """Sparse k-step walk distribution starting at a joined node."""

    owner: Hashable
    k: int
    probs: dict

    def total(self) -> float:
        return sum(self.probs.values())


def khop_neighbors(graph, vertex, k: int) -> set:
    """Vertices whose shortest-path distance from `vertex` is exactly k."""
    if k < 1:
        raise ValueError("hop count must be at least 1")
    if not graph.has_vertex(vertex):
        raise KeyError(f"vertex {vertex!r} not in graph")
    seen = {vertex}
    frontier = {vertex}
    for _ in range(k):
        nxt = set()
        for u in frontier:
            for v in graph.neighbors(u):
                if v not in seen:
                    nxt.add(v)
        seen |= nxt
        frontier = nxt
        if not frontier:
            break
    return frontier


def _community_of(communities, vertex):
    if hasattr(communities, "community_of"):
        return communities.community_of(vertex)
    return communities.get(vertex)


def community_feature(graph, communities, vertex, k: int) -> CommunityCountVector:
    """Count k-hop neighbors per community; unassigned neighbors dropped."""
    counts: dict = {}
    for nbr in khop_neighbors(graph, vertex, k):
        cid = _community_of(communities, nbr)
        if cid is None:
            continue
        counts[cid] = counts.get(cid, 0) + 1
    return CommunityCountVector(vertex, k, counts)


def _sparse_cosine(x: dict, y: dict) -> float:
    nx = math.sqrt(sum(v * v for v in x.values()))
    ny = math.sqrt(sum(v * v for v in y.values()))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    dot = sum(v * y.get(key, 0.0) for key, v in x.items())
    return min(1.0, max(0.0, dot / (nx * ny)))


def cosine_similarity(x, y) -> float:
    """Cosine of two nonnegative sparse vectors; 0 when either is zero."""
    if isinstance(x, CommunityCountVector):
        x = x.counts
    if isinstance(y, CommunityCountVector):
        y = y.counts
    return _sparse_cosine(x, y)


def neighborhood_feature(joined: JoinedGraph, node, k: int = 1) -> NeighborhoodProbVector:
    """Row of the k-step transition matrix for one joined node."""
    if k < 1:
        raise ValueError("walk length must be at least 1")
    if node not in joined.rows:
        raise KeyError(f"node {node!r} not in joined graph")
    row = dict(joined.rows[node])
    for _ in range(k - 1):
        nxt: dict = {}
        for mid, p in row.items():
            for dst, q in joined.rows[mid].items():
                nxt[dst] = nxt.get(dst, 0.0) + p * q
        row = nxt
    return NeighborhoodProbVector(node, k, row)


def neighborhood_similarity(
    pa: NeighborhoodProbVector, pb: NeighborhoodProbVector
) -> float:
    """Cosine of two walk rows; 0 when either owner is isolated."""
    return _sparse_cosine(pa.probs, pb.probs)


def dump_feature_vectors(path: str, vectors: dict) -> None:
    """One owner per line with sorted sparse index:value pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        for owner in sorted(vectors, key=str):
            entries = vectors[owner]
            cells = " ".join(
                f"{idx}:{entries[idx]!r}" for idx in sorted(entries, key=str)
            )
            fh.write(f"{owner}\t{cells}\n")
