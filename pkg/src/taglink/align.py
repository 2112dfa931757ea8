"""Cross-platform graph alignment through shared-hashtag seeds.

Both platform graphs are turned into row-stochastic transition matrices,
seed vertices are fused by mixing their two rows, and community structure
is detected on the largest connected component of the joined graph using
the directed map-equation machinery from `wordgraph`.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np

from .errors import DataError
from .wordgraph import (
    WeightedGraph,
    _code_length_arrays,
    flow_network_from_rows,
    optimize_flow_network,
)

logger = logging.getLogger(__name__)

# A joined node is (side, vertex) where side tags provenance: "A" or "B"
# for vertices kept from a single platform, "AB" for a fused seed pair
# (carrying the A-side vertex object).
SIDE_A = "A"
SIDE_B = "B"
SIDE_AB = "AB"


def node_key(node: tuple) -> str:
    """Stable sort/serialization key for a joined node."""
    return f"{node[0]}/{node[1]}"


@dataclass(frozen=True)
class SeedSet:
    """Known vertex matches across the two platform graphs.

    Each pair holds one vertex per graph with the same string form (in
    practice the platform-neutral hashtag vertices), and a vertex may be
    used by at most one pair.
    """

    pairs: tuple[tuple[Hashable, Hashable], ...]
    derivation: str = "explicit_list"

    def __post_init__(self):
        if self.derivation not in ("common_hashtags", "explicit_list"):
            raise ValueError(f"unknown derivation {self.derivation!r}")
        seen_a: set = set()
        seen_b: set = set()
        for va, vb in self.pairs:
            if str(va) != str(vb):
                raise ValueError(f"seed pair labels differ: {va!r} vs {vb!r}")
            if va in seen_a or vb in seen_b:
                raise ValueError(f"vertex reused across seed pairs: {va!r}")
            seen_a.add(va)
            seen_b.add(vb)

    def __len__(self) -> int:
        return len(self.pairs)


def find_seeds(graph_A, graph_B) -> SeedSet:
    """One seed per hashtag word present in both platform graphs."""
    common = sorted(graph_A.hashtag_words() & graph_B.hashtag_words())
    if not common:
        raise DataError("no common hashtags between the two graphs")
    from .netgraph import hashtag_vertex

    pairs = tuple((hashtag_vertex(w), hashtag_vertex(w)) for w in common)
    return SeedSet(pairs, derivation="common_hashtags")


def _as_weighted(graph) -> WeightedGraph:
    return graph.to_weighted() if hasattr(graph, "to_weighted") else graph


def to_markov(graph) -> dict:
    """Row-normalized transition rows; isolated vertices get empty rows."""
    g = _as_weighted(graph)
    rows: dict = {}
    for u in g.vertices():
        s = g.strength(u)
        if s > 0.0:
            rows[u] = {v: w / s for v, w in g.neighbors(u).items()}
        else:
            rows[u] = {}
    return rows


@dataclass
class JoinedGraph:
    """Directed graph over joined nodes with row-stochastic out-weights."""

    rows: dict
    seeds: SeedSet
    merge_probability: float
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        self._a_map: dict = {}
        self._b_map: dict = {}
        for node in self.rows:
            side, vertex = node
            if side in (SIDE_A, SIDE_AB):
                self._a_map[vertex] = node
        b_of_a = {va: vb for va, vb in self.seeds.pairs}
        for node in self.rows:
            side, vertex = node
            if side == SIDE_B:
                self._b_map[vertex] = node
            elif side == SIDE_AB:
                self._b_map[b_of_a[vertex]] = node
        support: dict = {node: set() for node in self.rows}
        for u, row in self.rows.items():
            for v in row:
                support[u].add(v)
                support[v].add(u)
        self._support = support

    def nodes(self) -> list:
        return sorted(self.rows, key=node_key)

    @property
    def n_nodes(self) -> int:
        return len(self.rows)

    def out_row(self, node) -> dict:
        return self.rows[node]

    def node_for_a(self, vertex):
        """Joined node holding this A-platform vertex, or None."""
        return self._a_map.get(vertex)

    def node_for_b(self, vertex):
        return self._b_map.get(vertex)

    def support_neighbors(self, node) -> set:
        """Neighbors ignoring edge direction."""
        return self._support[node]

    def check_rows(self, tol: float = 1e-9) -> None:
        for node, row in self.rows.items():
            if row and abs(sum(row.values()) - 1.0) > tol:
                raise DataError(f"out-weights of {node_key(node)} do not sum to 1")


def _validate_seeds_present(wa: WeightedGraph, wb: WeightedGraph, seeds: SeedSet):
    for va, vb in seeds.pairs:
        if not wa.has_vertex(va):
            raise DataError(f"seed vertex {va!r} missing from graph A")
        if not wb.has_vertex(vb):
            raise DataError(f"seed vertex {vb!r} missing from graph B")


def aggregate_merge(graph_A, graph_B, seeds: SeedSet, p: float = 0.5) -> JoinedGraph:
    """Fuse seed pairs into single vertices with mixed transition rows.

    Non-seed vertices keep their single-platform row.  A fused vertex
    leaves through its A-side row with probability p and its B-side row
    with probability 1-p; when one side is isolated the populated side
    carries weight 1, so rows stay stochastic either way.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("mixing probability must lie in [0, 1]")
    if not seeds.pairs:
        raise DataError("seed set is empty")
    wa = _as_weighted(graph_A)
    wb = _as_weighted(graph_B)
    _validate_seeds_present(wa, wb, seeds)
    rows_a = to_markov(wa)
    rows_b = to_markov(wb)

    node_of_a = {v: (SIDE_A, v) for v in rows_a}
    node_of_b = {v: (SIDE_B, v) for v in rows_b}
    for va, vb in seeds.pairs:
        node_of_a[va] = (SIDE_AB, va)
        node_of_b[vb] = (SIDE_AB, va)

    def mapped(row: dict, node_of: dict) -> dict:
        return {node_of[v]: prob for v, prob in row.items()}

    joined_rows: dict = {}
    for v in rows_a:
        node = node_of_a[v]
        if node[0] == SIDE_A:
            joined_rows[node] = mapped(rows_a[v], node_of_a)
    for v in rows_b:
        node = node_of_b[v]
        if node[0] == SIDE_B:
            joined_rows[node] = mapped(rows_b[v], node_of_b)

    origin: dict = {}
    for va, vb in seeds.pairs:
        node = (SIDE_AB, va)
        row_a = mapped(rows_a[va], node_of_a)
        row_b = mapped(rows_b[vb], node_of_b)
        if not row_a:
            fused = dict(row_b)
        elif not row_b:
            fused = dict(row_a)
        else:
            fused = {t: p * prob for t, prob in row_a.items()}
            for t, prob in row_b.items():
                fused[t] = fused.get(t, 0.0) + (1.0 - p) * prob
            # Degenerate mixing weights leave true zeros, not edges.
            fused = {t: prob for t, prob in fused.items() if prob > 0.0}
        joined_rows[node] = fused
        origin[node] = {
            SIDE_A: sorted(rows_a[va], key=str),
            SIDE_B: sorted(rows_b[vb], key=str),
        }

    expected = wa.n_vertices + wb.n_vertices - len(seeds)
    if len(joined_rows) != expected:
        raise DataError(
            f"joined graph has {len(joined_rows)} vertices, expected {expected}"
        )
    joined = JoinedGraph(joined_rows, seeds, p, origin)
    joined.check_rows()
    return joined


def link_merge(graph_A, graph_B, seeds: SeedSet, link_weight: float = 1.0):
    """Disjoint union of the two graphs plus one edge per seed pair."""
    if link_weight <= 0.0:
        raise ValueError("link weight must be positive")
    wa = _as_weighted(graph_A)
    wb = _as_weighted(graph_B)
    _validate_seeds_present(wa, wb, seeds)
    g = WeightedGraph()
    for v in wa.vertices():
        g.add_vertex((SIDE_A, v))
    for v in wb.vertices():
        g.add_vertex((SIDE_B, v))
    for u, v, w in wa.edges():
        g.add_edge((SIDE_A, u), (SIDE_A, v), w)
    for u, v, w in wb.edges():
        g.add_edge((SIDE_B, u), (SIDE_B, v), w)
    for va, vb in seeds.pairs:
        g.add_edge((SIDE_A, va), (SIDE_B, vb), link_weight)
    return g


def largest_connected_component(joined: JoinedGraph) -> list:
    """Largest component of the undirected support, smallest-key tiebreak."""
    unseen = set(joined.rows)
    components: list[list] = []
    while unseen:
        start = min(unseen, key=node_key)
        comp = [start]
        unseen.discard(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in joined.support_neighbors(u):
                if v in unseen:
                    unseen.discard(v)
                    comp.append(v)
                    queue.append(v)
        components.append(sorted(comp, key=node_key))
    components.sort(key=lambda c: (-len(c), node_key(c[0])))
    return components[0]


def stationary_distribution(
    joined: JoinedGraph,
    nodes: Iterable | None = None,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> dict:
    """Damped power-iteration visit rates over a node subset."""
    order = sorted(joined.rows if nodes is None else nodes, key=node_key)
    n = len(order)
    if n == 0:
        return {}
    idx = {v: i for i, v in enumerate(order)}
    srcs, dsts, probs = [], [], []
    dangling = []
    for u in order:
        row = {v: p for v, p in joined.rows[u].items() if v in idx}
        if not row:
            dangling.append(idx[u])
            continue
        for v, prob in row.items():
            srcs.append(idx[u])
            dsts.append(idx[v])
            probs.append(prob)
    srcs = np.asarray(srcs, dtype=np.intp)
    dsts = np.asarray(dsts, dtype=np.intp)
    probs = np.asarray(probs, dtype=np.float64)
    dangling = np.asarray(dangling, dtype=np.intp)
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        flow = np.bincount(dsts, weights=pi[srcs] * probs, minlength=n)
        lost = float(pi[dangling].sum()) if dangling.size else 0.0
        new = (1.0 - damping) / n + damping * (flow + lost / n)
        if float(np.abs(new - pi).sum()) <= tol:
            pi = new
            break
        pi = new
    else:
        logger.warning("stationary distribution did not converge in %d iterations", max_iters)
    pi = pi / pi.sum()
    return {v: float(pi[idx[v]]) for v in order}


def detect_cross_communities(
    joined: JoinedGraph, seed: int = 0, max_passes: int = 10, restarts: int = 4
) -> dict:
    """Map-equation communities on the largest component; others get None.

    Flows follow the transition rows weighted by the damped stationary
    distribution, so the directed structure of the joined graph matters.
    """
    lcc = largest_connected_component(joined)
    pi = stationary_distribution(joined, lcc)
    rows = {u: joined.rows[u] for u in lcc}
    net = flow_network_from_rows(lcc, rows, pi)
    labels = optimize_flow_network(net, seed=seed, max_passes=max_passes, restarts=restarts)
    # Renumber communities by their smallest member key.
    reps: dict[int, str] = {}
    for i, node in enumerate(lcc):
        lab = int(labels[i])
        key = node_key(node)
        if lab not in reps or key < reps[lab]:
            reps[lab] = key
    new_id = {lab: rank for rank, lab in enumerate(sorted(reps, key=reps.get))}
    assignment = {node: None for node in joined.rows}
    for i, node in enumerate(lcc):
        assignment[node] = new_id[int(labels[i])]
    return assignment


def joined_code_length(joined: JoinedGraph, assignment: dict) -> float:
    """Code length in bits of an assignment over the largest component."""
    lcc = largest_connected_component(joined)
    pi = stationary_distribution(joined, lcc)
    rows = {u: joined.rows[u] for u in lcc}
    net = flow_network_from_rows(lcc, rows, pi)
    raw = [assignment[node] for node in lcc]
    if any(lab is None or lab < 0 for lab in raw):
        raise ValueError("assignment must cover the largest component")
    return _code_length_arrays(net, np.asarray(raw, dtype=np.int64))


def project_communities(joined: JoinedGraph, assignment: dict) -> dict:
    """Per-platform vertex communities induced by a joined assignment."""
    out = {SIDE_A: {}, SIDE_B: {}}
    for vertex, node in joined._a_map.items():
        out[SIDE_A][vertex] = assignment.get(node)
    for vertex, node in joined._b_map.items():
        out[SIDE_B][vertex] = assignment.get(node)
    return out


def save_joined(joined: JoinedGraph, path: str, seed_path: str) -> None:
    """Directed edge list with probabilities, plus the fused-pair manifest."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# merge_probability\t{joined.merge_probability!r}\n")
        for u in joined.nodes():
            row = joined.rows[u]
            for v in sorted(row, key=node_key):
                fh.write(f"{node_key(u)}\t{node_key(v)}\t{row[v]!r}\n")
    with open(seed_path, "w", encoding="utf-8") as fh:
        fh.write(f"# derivation\t{joined.seeds.derivation}\n")
        for va, vb in sorted(joined.seeds.pairs, key=lambda pr: str(pr[0])):
            fh.write(f"{va}\t{vb}\n")


def load_joined(path: str, seed_path: str, parse_vertex=None) -> JoinedGraph:
    """Rebuild a joined graph from its exported files.

    Vertices inside node keys default to `netgraph.Vertex` parsing; pass
    `parse_vertex` to override.  The origin map is a merge-time artifact
    and is not persisted, so it comes back empty.
    """
    if parse_vertex is None:
        from .netgraph import Vertex

        parse_vertex = Vertex.parse

    def parse_node(text: str) -> tuple:
        side, vertex = text.split("/", 1)
        if side not in (SIDE_A, SIDE_B, SIDE_AB):
            raise DataError(f"bad node key {text!r}")
        return (side, parse_vertex(vertex))

    derivation = "explicit_list"
    pairs = []
    with open(seed_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# derivation\t"):
                derivation = line.split("\t", 1)[1]
                continue
            a_text, b_text = line.split("\t")
            pairs.append((parse_vertex(a_text), parse_vertex(b_text)))
    seeds = SeedSet(tuple(pairs), derivation=derivation)

    merge_probability = 0.5
    rows: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# merge_probability\t"):
                merge_probability = float(line.split("\t", 2)[1])
                continue
            src, dst, prob = line.split("\t")
            u = parse_node(src)
            v = parse_node(dst)
            rows.setdefault(u, {})[v] = float(prob)
            rows.setdefault(v, {})
    return JoinedGraph(rows, seeds, merge_probability)
