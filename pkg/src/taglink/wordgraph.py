"""Word co-occurrence graphs, map-equation communities, weighted PageRank.

Community detection minimizes the two-level map equation

    L(M) = q H(Q) + sum_i p_i H(P_i)

over partitions M, where q is the total module-exit flow, H(Q) the
entropy of relative exit flows, and H(P_i) the entropy of module i's
codebook (its exit plus member visit rates).  The optimizer is greedy
node moving with Louvain-style aggregation, restarted a few times from
different seeded orders; on undirected graphs flows come from edge
weights, and the align module reuses the same optimizer with directed
random-walk flows.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, deque
from itertools import combinations
from typing import AbstractSet, Hashable, Iterable

import numpy as np

logger = logging.getLogger(__name__)

_IMPROVEMENT_EPS = 1e-12


class WeightedGraph:
    """Undirected weighted graph over hashable vertex ids.

    Parallel add_edge calls accumulate weight.  Vertex iteration follows
    insertion order; anything order-sensitive sorts by str() first.
    """

    def __init__(self, allow_self_loops: bool = False):
        self._adj: dict[Hashable, dict[Hashable, float]] = {}
        self.allow_self_loops = allow_self_loops

    def add_vertex(self, v: Hashable) -> None:
        self._adj.setdefault(v, {})

    def add_edge(self, u: Hashable, v: Hashable, weight: float = 1.0) -> None:
        if weight <= 0:
            raise ValueError("edge weight must be positive")
        if u == v and not self.allow_self_loops:
            raise ValueError(f"self-loop on {u!r} not allowed")
        self.add_vertex(u)
        self.add_vertex(v)
        self._adj[u][v] = self._adj[u].get(v, 0.0) + weight
        if u != v:
            self._adj[v][u] = self._adj[v].get(u, 0.0) + weight

    def has_vertex(self, v: Hashable) -> bool:
        return v in self._adj

    def vertices(self) -> Iterable[Hashable]:
        return self._adj.keys()

    def neighbors(self, v: Hashable) -> dict[Hashable, float]:
        return self._adj[v]

    def weight(self, u: Hashable, v: Hashable) -> float:
        return self._adj.get(u, {}).get(v, 0.0)

    def strength(self, v: Hashable) -> float:
        return sum(self._adj[v].values())

    def degree(self, v: Hashable) -> int:
        return len(self._adj[v])

    @property
    def n_vertices(self) -> int:
        return len(self._adj)

    @property
    def n_edges(self) -> int:
        loops = sum(1 for u, nbrs in self._adj.items() if u in nbrs)
        return (sum(len(n) for n in self._adj.values()) - loops) // 2 + loops

    def edges(self) -> list[tuple[Hashable, Hashable, float]]:
        """Each undirected edge once, sorted by stringified endpoints."""
        out = []
        for u, nbrs in self._adj.items():
            for v, w in nbrs.items():
                if str(u) <= str(v):
                    out.append((u, v, w))
        out.sort(key=lambda e: (str(e[0]), str(e[1])))
        return out

    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges())

    def induced_subgraph(self, keep: AbstractSet[Hashable]) -> "WeightedGraph":
        sub = WeightedGraph(allow_self_loops=self.allow_self_loops)
        for v in self._adj:
            if v in keep:
                sub.add_vertex(v)
        for u, v, w in self.edges():
            if u in keep and v in keep:
                sub.add_edge(u, v, w)
        return sub


def build_cooccurrence_graph(
    posts: Iterable,
    min_edge_count: int = 2,
    vocab: AbstractSet[str] | None = None,
) -> WeightedGraph:
    """Graph over words; edge weight counts posts where both words occur.

    Words are deduplicated within a post.  Edges below min_edge_count are
    dropped but their endpoints stay as vertices, so low-support words
    can end up isolated.  Passing vocab restricts the word universe.
    """
    pair_counts: Counter[tuple[str, str]] = Counter()
    seen: set[str] = set()
    for post in posts:
        words = set(post.tokens)
        if vocab is not None:
            words &= vocab
        seen |= words
        for u, v in combinations(sorted(words), 2):
            pair_counts[(u, v)] += 1
    graph = WeightedGraph()
    for w in sorted(seen):
        graph.add_vertex(w)
    for (u, v), c in sorted(pair_counts.items()):
        if c >= min_edge_count:
            graph.add_edge(u, v, float(c))
    return graph


class Partition:
    """Map from vertex to community id, with ids dense in [0, n_communities)."""

    def __init__(self, assignment: dict[Hashable, int]):
        self._assignment = dict(assignment)
        ids = set(self._assignment.values())
        if ids and (min(ids) != 0 or max(ids) != len(ids) - 1):
            raise ValueError("community ids must be dense starting at 0")
        self._n = len(ids)

    @classmethod
    def from_labels(cls, labels: dict[Hashable, int]) -> "Partition":
        """Renumber arbitrary labels densely, ordered by smallest member."""
        first: dict[int, str] = {}
        for v, lab in labels.items():
            key = str(v)
            if lab not in first or key < first[lab]:
                first[lab] = key
        order = sorted(first, key=lambda lab: first[lab])
        remap = {lab: i for i, lab in enumerate(order)}
        return cls({v: remap[lab] for v, lab in labels.items()})

    @property
    def n_communities(self) -> int:
        return self._n

    def community_of(self, v: Hashable, default=None):
        return self._assignment.get(v, default)

    def __contains__(self, v: Hashable) -> bool:
        return v in self._assignment

    def __len__(self) -> int:
        return len(self._assignment)

    def items(self):
        return self._assignment.items()

    def members(self, cid: int) -> list[Hashable]:
        return sorted(
            (v for v, c in self._assignment.items() if c == cid), key=str
        )

    def communities(self) -> list[list[Hashable]]:
        return [self.members(i) for i in range(self._n)]


def _plogp(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


class _FlowNetwork:
    """Directed flow view consumed by the map-equation optimizer."""

    __slots__ = ("n", "node_flow", "out_nbr", "out_flow", "in_nbr", "in_flow", "out_total")

    def __init__(self, n: int):
        self.n = n
        self.node_flow = np.zeros(n)
        self.out_nbr: list[list[int]] = [[] for _ in range(n)]
        self.out_flow: list[list[float]] = [[] for _ in range(n)]
        self.in_nbr: list[list[int]] = [[] for _ in range(n)]
        self.in_flow: list[list[float]] = [[] for _ in range(n)]
        self.out_total = np.zeros(n)

    def add_flow(self, u: int, v: int, f: float) -> None:
        if f <= 0.0 or u == v:
            return
        self.out_nbr[u].append(v)
        self.out_flow[u].append(f)
        self.in_nbr[v].append(u)
        self.in_flow[v].append(f)
        self.out_total[u] += f


def _flow_from_undirected(graph: WeightedGraph, order: list) -> _FlowNetwork:
    net = _FlowNetwork(len(order))
    idx = {v: i for i, v in enumerate(order)}
    total = 2.0 * graph.total_weight()
    if total <= 0.0:
        return net
    for v in order:
        net.node_flow[idx[v]] = graph.strength(v) / total
    for u, v, w in graph.edges():
        net.add_flow(idx[u], idx[v], w / total)
        net.add_flow(idx[v], idx[u], w / total)
    return net


def flow_network_from_rows(
    order: list, rows: dict, visit_rates: dict
) -> _FlowNetwork:
    """Directed flows f(u -> v) = visit_rate(u) * P(u -> v)."""
    net = _FlowNetwork(len(order))
    idx = {v: i for i, v in enumerate(order)}
    for u in order:
        net.node_flow[idx[u]] = visit_rates.get(u, 0.0)
    for u in order:
        pu = visit_rates.get(u, 0.0)
        if pu <= 0.0:
            continue
        for v, prob in rows.get(u, {}).items():
            if v in idx:
                net.add_flow(idx[u], idx[v], pu * prob)
    return net


def _code_length_arrays(net: _FlowNetwork, labels: np.ndarray) -> float:
    n_mod = int(labels.max()) + 1 if net.n else 0
    exit_flow = np.zeros(n_mod)
    sum_flow = np.zeros(n_mod)
    for v in range(net.n):
        sum_flow[labels[v]] += net.node_flow[v]
        lv = labels[v]
        for u, f in zip(net.out_nbr[v], net.out_flow[v]):
            if labels[u] != lv:
                exit_flow[lv] += f
    total_exit = float(exit_flow.sum())
    bits = _plogp(total_exit)
    bits -= 2.0 * sum(_plogp(q) for q in exit_flow)
    bits += sum(_plogp(q + s) for q, s in zip(exit_flow, sum_flow))
    bits -= sum(_plogp(p) for p in net.node_flow)
    return bits


def _local_moving(
    net: _FlowNetwork, labels: np.ndarray, rng: np.random.Generator, max_passes: int
) -> tuple[np.ndarray, bool]:
    """Greedy single-node moves; returns updated labels and whether any helped.

    Nodes are revisited from a queue seeded with a random permutation, so
    work concentrates where the partition is still changing.
    """
    n = net.n
    labels = labels.copy()
    exit_flow = np.zeros(n)
    sum_flow = np.zeros(n)
    for v in range(n):
        sum_flow[labels[v]] += net.node_flow[v]
        lv = labels[v]
        for u, f in zip(net.out_nbr[v], net.out_flow[v]):
            if labels[u] != lv:
                exit_flow[lv] += f
    total_exit = float(exit_flow.sum())

    queue = deque(int(v) for v in rng.permutation(n))
    queued = np.ones(n, dtype=bool)
    improved = False
    visits = 0
    visit_cap = max(1, max_passes) * n
    while queue and visits < visit_cap:
        v = queue.popleft()
        queued[v] = False
        visits += 1
        if not net.out_nbr[v] and not net.in_nbr[v]:
            continue
        a = int(labels[v])
        to_mod: dict[int, float] = {}
        from_mod: dict[int, float] = {}
        for u, f in zip(net.out_nbr[v], net.out_flow[v]):
            m = int(labels[u])
            to_mod[m] = to_mod.get(m, 0.0) + f
        for u, f in zip(net.in_nbr[v], net.in_flow[v]):
            m = int(labels[u])
            from_mod[m] = from_mod.get(m, 0.0) + f
        out_v = float(net.out_total[v])
        flow_v = float(net.node_flow[v])

        exit_a_new = exit_flow[a] - (out_v - to_mod.get(a, 0.0)) + from_mod.get(a, 0.0)
        sum_a_new = sum_flow[a] - flow_v
        old_a_terms = (
            -2.0 * _plogp(exit_flow[a]) + _plogp(exit_flow[a] + sum_flow[a])
        )
        new_a_terms = -2.0 * _plogp(exit_a_new) + _plogp(exit_a_new + sum_a_new)

        best_delta = 0.0
        best_b = a
        best_exit_b = 0.0
        candidates = sorted((set(to_mod) | set(from_mod)) - {a})
        for b in candidates:
            exit_b_new = (
                exit_flow[b] + (out_v - to_mod.get(b, 0.0)) - from_mod.get(b, 0.0)
            )
            sum_b_new = sum_flow[b] + flow_v
            delta_total = (exit_a_new + exit_b_new) - (exit_flow[a] + exit_flow[b])
            delta = (
                _plogp(total_exit + delta_total)
                - _plogp(total_exit)
                + new_a_terms
                - old_a_terms
                - 2.0 * _plogp(exit_b_new)
                + 2.0 * _plogp(exit_flow[b])
                + _plogp(exit_b_new + sum_b_new)
                - _plogp(exit_flow[b] + sum_flow[b])
            )
            if delta < best_delta - 1e-15:
                best_delta = delta
                best_b = b
                best_exit_b = exit_b_new
        if best_b != a and best_delta < -_IMPROVEMENT_EPS:
            total_exit += (exit_a_new + best_exit_b) - (
                exit_flow[a] + exit_flow[best_b]
            )
            exit_flow[a] = exit_a_new
            sum_flow[a] = sum_a_new
            exit_flow[best_b] = best_exit_b
            sum_flow[best_b] += flow_v
            labels[v] = best_b
            improved = True
            for u in net.out_nbr[v]:
                if not queued[u]:
                    queue.append(u)
                    queued[u] = True
            for u in net.in_nbr[v]:
                if not queued[u]:
                    queue.append(u)
                    queued[u] = True
    return labels, improved


def _renumber(labels: np.ndarray) -> np.ndarray:
    _, dense = np.unique(labels, return_inverse=True)
    return dense.astype(np.int64)


def _aggregate(net: _FlowNetwork, labels: np.ndarray) -> _FlowNetwork:
    n_mod = int(labels.max()) + 1
    coarse = _FlowNetwork(n_mod)
    coarse.node_flow = np.bincount(labels, weights=net.node_flow, minlength=n_mod)
    flows: dict[tuple[int, int], float] = {}
    for v in range(net.n):
        lv = int(labels[v])
        for u, f in zip(net.out_nbr[v], net.out_flow[v]):
            lu = int(labels[u])
            if lu != lv:
                flows[(lv, lu)] = flows.get((lv, lu), 0.0) + f
    for (a, b), f in sorted(flows.items()):
        coarse.add_flow(a, b, f)
    return coarse


def _greedy_partition(
    net: _FlowNetwork, rng: np.random.Generator, max_passes: int
) -> np.ndarray:
    labels = np.arange(net.n, dtype=np.int64)
    while True:
        improved_round = False
        labels, imp = _local_moving(net, labels, rng, max_passes)
        improved_round |= imp
        while True:
            labels = _renumber(labels)
            coarse = _aggregate(net, labels)
            coarse_labels, imp = _local_moving(
                coarse, np.arange(coarse.n, dtype=np.int64), rng, max_passes
            )
            if not imp:
                break
            improved_round = True
            labels = _renumber(coarse_labels)[labels]
        if not improved_round:
            return _renumber(labels)


def optimize_flow_network(
    net: _FlowNetwork, seed: int = 0, max_passes: int = 10, restarts: int = 4
) -> np.ndarray:
    """Best-of-restarts greedy map-equation labels for a flow network."""
    best_labels: np.ndarray | None = None
    best_bits = math.inf
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        labels = _greedy_partition(net, rng, max_passes)
        bits = _code_length_arrays(net, labels)
        if bits < best_bits - _IMPROVEMENT_EPS:
            best_bits = bits
            best_labels = labels
    assert best_labels is not None
    return best_labels


def detect_communities_mapeq(
    graph: WeightedGraph, seed: int = 0, max_passes: int = 10, restarts: int = 4
) -> Partition:
    """Partition an undirected weighted graph by map-equation minimization.

    Every vertex gets exactly one community; isolated vertices end up in
    singletons because no move involving them changes the code length.
    """
    if graph.n_vertices == 0:
        raise ValueError("graph is empty")
    order = sorted(graph.vertices(), key=str)
    net = _flow_from_undirected(graph, order)
    labels = optimize_flow_network(net, seed=seed, max_passes=max_passes, restarts=restarts)
    return Partition.from_labels({v: int(labels[i]) for i, v in enumerate(order)})


def partition_code_length(graph: WeightedGraph, partition: Partition) -> float:
    """Code length (bits per step) of a partition of an undirected graph."""
    order = sorted(graph.vertices(), key=str)
    net = _flow_from_undirected(graph, order)
    labs = [partition.community_of(v) for v in order]
    if any(lab is None for lab in labs):
        raise ValueError("partition does not cover every vertex")
    return _code_length_arrays(net, np.asarray(labs, dtype=np.int64))


def pagerank(
    graph: WeightedGraph,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> dict[Hashable, float]:
    """Weighted PageRank by power iteration.

    Iterates s = (1 - d)/n + d * M^T s with M the strength-normalized
    transition matrix; mass on vertices without edges is redistributed
    uniformly so scores always sum to 1.  Convergence is an L1 change
    below tol; running out of iterations logs a warning and returns the
    last iterate.
    """
    if graph.n_vertices == 0:
        raise ValueError("graph is empty")
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must lie in [0, 1)")
    order = sorted(graph.vertices(), key=str)
    idx = {v: i for i, v in enumerate(order)}
    n = len(order)
    src: list[int] = []
    dst: list[int] = []
    prob: list[float] = []
    dangling = np.zeros(n, dtype=bool)
    for v in order:
        s = graph.strength(v)
        if s <= 0.0:
            dangling[idx[v]] = True
            continue
        for u, w in graph.neighbors(v).items():
            src.append(idx[v])
            dst.append(idx[u])
            prob.append(w / s)
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    prob_a = np.asarray(prob)

    scores = np.full(n, 1.0 / n)
    converged = False
    for _ in range(max_iters):
        inflow = np.bincount(dst_a, weights=prob_a * scores[src_a], minlength=n)
        spread = float(scores[dangling].sum()) / n
        new = (1.0 - damping) / n + damping * (inflow + spread)
        if float(np.abs(new - scores).sum()) < tol:
            scores = new
            converged = True
            break
        scores = new
    if not converged:
        logger.warning("pagerank did not converge within %d iterations", max_iters)
    return {v: float(scores[idx[v]]) for v in order}


def community_ranked_words(
    graph: WeightedGraph,
    partition: Partition,
    pagerank_scope: str = "community",
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> list[list[tuple[Hashable, float]]]:
    """Per community, members ranked by PageRank (ties lexicographic).

    pagerank_scope "community" ranks within each community's induced
    subgraph; "global" ranks by one whole-graph PageRank.
    """
    if pagerank_scope not in ("community", "global"):
        raise ValueError("pagerank_scope must be 'community' or 'global'")
    global_scores = (
        pagerank(graph, damping, tol, max_iters) if pagerank_scope == "global" else None
    )
    ranked: list[list[tuple[Hashable, float]]] = []
    for cid in range(partition.n_communities):
        members = partition.members(cid)
        if global_scores is not None:
            scores = {v: global_scores[v] for v in members}
        else:
            scores = pagerank(graph.induced_subgraph(set(members)), damping, tol, max_iters)
        ranked.append(
            sorted(scores.items(), key=lambda kv: (-kv[1], str(kv[0])))
        )
    return ranked


def annotate_community_hashtags(
    graph: WeightedGraph,
    partition: Partition,
    words_per_community: int,
    pagerank_scope: str = "community",
    damping: float = 0.85,
) -> set[str]:
    """Union of each community's top-PageRank words."""
    if words_per_community < 1:
        raise ValueError("words_per_community must be positive")
    tags: set[str] = set()
    for ranked in community_ranked_words(graph, partition, pagerank_scope, damping):
        tags.update(w for w, _ in ranked[:words_per_community])
    return tags


def save_graph(graph: WeightedGraph, path: str) -> None:
    """Write edges as 'label1<TAB>label2<TAB>weight'.

    Isolated vertices get a single-cell line of their own so the vertex
    set survives a round trip.
    """
    linked = set()
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in graph.edges():
            linked.add(u)
            linked.add(v)
            fh.write(f"{u}\t{v}\t{w!r}\n")
        for v in sorted(graph.vertices(), key=str):
            if v not in linked:
                fh.write(f"{v}\n")


def load_graph(path: str) -> WeightedGraph:
    graph = WeightedGraph()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) == 1:
                graph.add_vertex(cells[0])
            else:
                u, v, w = cells
                graph.add_edge(u, v, float(w))
    return graph


def save_partition(partition: Partition, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v, cid in sorted(partition.items(), key=lambda kv: str(kv[0])):
            fh.write(f"{v}\t{cid}\n")


def load_partition(path: str) -> Partition:
    labels: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            v, cid = line.split("\t")
            labels[v] = int(cid)
    return Partition(labels)
