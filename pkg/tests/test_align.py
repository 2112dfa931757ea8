import math
import os

import numpy as np
import pytest

from taglink.align import (
    SIDE_A,
    SIDE_AB,
    SIDE_B,
    JoinedGraph,
    SeedSet,
    aggregate_merge,
    detect_cross_communities,
    find_seeds,
    joined_code_length,
    largest_connected_component,
    link_merge,
    load_joined,
    node_key,
    project_communities,
    save_joined,
    stationary_distribution,
    to_markov,
)
from taglink.corpus import ProcessedPost
from taglink.errors import DataError
from taglink.netgraph import build_graph, hashtag_vertex
from taglink.wordgraph import WeightedGraph


def seeds_of(*words):
    return SeedSet(tuple((w, w) for w in words))


def triangle(*labels):
    g = WeightedGraph()
    a, b, c = labels
    g.add_edge(a, b, 1.0)
    g.add_edge(b, c, 1.0)
    g.add_edge(a, c, 1.0)
    return g


def clique(labels):
    g = WeightedGraph()
    for i, u in enumerate(labels):
        for v in labels[i + 1 :]:
            g.add_edge(u, v, 1.0)
    return g


# Independent evaluation of the two-level code length for directed flows.
def plogp(x):
    return x * math.log2(x) if x > 0.0 else 0.0


def oracle_directed_bits(order, rows, pi, groups):
    gid = {}
    for i, grp in enumerate(groups):
        for v in grp:
            gid[v] = i
    q = [0.0] * len(groups)
    for u in order:
        for v, prob in rows[u].items():
            if gid[u] != gid[v]:
                q[gid[u]] += pi[u] * prob
    sumflow = [sum(pi[v] for v in grp) for grp in groups]
    bits = plogp(sum(q))
    bits -= 2.0 * sum(plogp(x) for x in q)
    bits += sum(plogp(a + b) for a, b in zip(q, sumflow))
    bits -= sum(plogp(pi[v]) for v in order)
    return bits


def all_groupings(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for sub in all_groupings(rest):
        for i in range(len(sub)):
            yield sub[:i] + [sub[i] + [head]] + sub[i + 1 :]
        yield sub + [[head]]


def test_to_markov_star():
    g = WeightedGraph()
    for leaf in "bcde":
        g.add_edge("a", leaf, 1.0)
    rows = to_markov(g)
    assert rows["a"] == {leaf: 0.25 for leaf in "bcde"}
    assert rows["b"] == {"a": 1.0}


def test_to_markov_weighted_and_isolated():
    g = WeightedGraph()
    g.add_edge("a", "b", 2.0)
    g.add_edge("a", "c", 1.0)
    g.add_edge("a", "d", 1.0)
    g.add_vertex("e")
    rows = to_markov(g)
    assert rows["a"] == {"b": 0.5, "c": 0.25, "d": 0.25}
    assert rows["e"] == {}


def test_seedset_validation():
    with pytest.raises(ValueError):
        SeedSet((("x", "y"),))
    with pytest.raises(ValueError):
        SeedSet((("s", "s"), ("s", "s")))
    with pytest.raises(ValueError):
        SeedSet((), derivation="guesswork")


def proc(platform, pid, author, tokens):
    return ProcessedPost(
        platform=platform,
        post_id=pid,
        author=author,
        tokens=tuple(tokens),
        user_hashtags=frozenset(),
    )


def test_find_seeds_common_hashtags():
    ga = build_graph([proc("A", "p1", "u1", ["boston", "job"])], {"boston", "job"})
    gb = build_graph([proc("B", "q1", "v1", ["boston", "food"])], {"boston", "food"})
    seeds = find_seeds(ga, gb)
    assert seeds.derivation == "common_hashtags"
    assert seeds.pairs == ((hashtag_vertex("boston"), hashtag_vertex("boston")),)


def test_find_seeds_disjoint_errors():
    ga = build_graph([proc("A", "p1", "u1", ["job"])], {"job"})
    gb = build_graph([proc("B", "q1", "v1", ["food"])], {"food"})
    with pytest.raises(DataError):
        find_seeds(ga, gb)


def test_find_seeds_identical_vocabulary():
    words = ["w1", "w2", "w3"]
    ga = build_graph([proc("A", "p1", "u1", words)], set(words))
    gb = build_graph([proc("B", "q1", "v1", words)], set(words))
    seeds = find_seeds(ga, gb)
    assert [str(a) for a, _ in seeds.pairs] == [
        "hashtag:-:w1",
        "hashtag:-:w2",
        "hashtag:-:w3",
    ]


def test_aggregate_merge_two_triangles():
    ga = triangle("a1", "b1", "s")
    gb = triangle("a2", "b2", "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"), p=0.5)
    assert joined.n_nodes == 5
    fused = joined.out_row((SIDE_AB, "s"))
    assert fused == {
        (SIDE_A, "a1"): 0.25,
        (SIDE_A, "b1"): 0.25,
        (SIDE_B, "a2"): 0.25,
        (SIDE_B, "b2"): 0.25,
    }
    # Non-seed rows keep their platform distribution, seed target remapped.
    assert joined.out_row((SIDE_A, "a1")) == {
        (SIDE_A, "b1"): 0.5,
        (SIDE_AB, "s"): 0.5,
    }


def test_aggregate_merge_p_one_degenerate():
    ga = triangle("a1", "b1", "s")
    gb = triangle("a2", "b2", "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"), p=1.0)
    assert joined.out_row((SIDE_AB, "s")) == {
        (SIDE_A, "a1"): 0.5,
        (SIDE_A, "b1"): 0.5,
    }


def test_aggregate_merge_symmetry_at_half():
    ga = triangle("a1", "b1", "s")
    ga.add_edge("a1", "c1", 2.0)
    gb = triangle("a2", "b2", "s")
    j1 = aggregate_merge(ga, gb, seeds_of("s"), p=0.5)
    j2 = aggregate_merge(gb, ga, seeds_of("s"), p=0.5)

    flip = {SIDE_A: SIDE_B, SIDE_B: SIDE_A, SIDE_AB: SIDE_AB}

    def swap(node):
        return (flip[node[0]], node[1])

    assert set(map(swap, j1.rows)) == set(j2.rows)
    for u, row in j1.rows.items():
        mirrored = {swap(v): p for v, p in row.items()}
        assert mirrored == pytest.approx(j2.rows[swap(u)], abs=1e-15)


def test_aggregate_merge_errors():
    ga = triangle("a1", "b1", "s")
    gb = triangle("a2", "b2", "s")
    with pytest.raises(DataError):
        aggregate_merge(ga, gb, SeedSet(()))
    with pytest.raises(DataError):
        aggregate_merge(ga, gb, seeds_of("missing"))
    with pytest.raises(ValueError):
        aggregate_merge(ga, gb, seeds_of("s"), p=1.5)


def test_aggregate_merge_isolated_side_fallback():
    ga = WeightedGraph()
    ga.add_edge("a1", "b1", 1.0)
    ga.add_vertex("s")
    gb = triangle("a2", "b2", "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"), p=0.5)
    assert joined.out_row((SIDE_AB, "s")) == {
        (SIDE_B, "a2"): 0.5,
        (SIDE_B, "b2"): 0.5,
    }
    joined.check_rows()


def test_vertex_identity_and_row_sums_random():
    rng = np.random.default_rng(7)
    for _ in range(25):
        na, nb, ns = rng.integers(2, 7), rng.integers(2, 7), rng.integers(1, 4)
        shared = [f"s{i}" for i in range(ns)]
        ga = WeightedGraph()
        gb = WeightedGraph()
        for g, prefix, n in ((ga, "a", na), (gb, "b", nb)):
            own = [f"{prefix}{i}" for i in range(n)] + shared
            for v in own:
                g.add_vertex(v)
            for _ in range(int(rng.integers(1, 3 * len(own)))):
                u, v = rng.choice(len(own), size=2, replace=False)
                g.add_edge(own[u], own[v], float(rng.integers(1, 5)))
        p = float(rng.uniform(0.05, 0.95))
        joined = aggregate_merge(ga, gb, seeds_of(*shared), p=p)
        assert joined.n_nodes == ga.n_vertices + gb.n_vertices - ns
        for row in joined.rows.values():
            if row:
                assert abs(sum(row.values()) - 1.0) <= 1e-9
                assert all(p > 0 for p in row.values())


def test_link_merge_counts_and_weights():
    ga = triangle("a1", "b1", "s")
    gb = triangle("a2", "b2", "s")
    g = link_merge(ga, gb, seeds_of("s"), link_weight=1.0)
    assert g.n_vertices == 6
    assert g.n_edges == 7
    assert g.weight((SIDE_A, "a1"), (SIDE_A, "b1")) == 1.0
    assert g.weight((SIDE_A, "s"), (SIDE_B, "s")) == 1.0
    empty = link_merge(ga, gb, SeedSet(()))
    assert empty.n_vertices == 6
    assert empty.n_edges == 6


def test_lcc_selection_and_ties():
    rows = {}
    for chain in (["m0", "m1", "m2", "m3", "m4"], ["z0", "z1", "z2"]):
        for u, v in zip(chain, chain[1:]):
            rows.setdefault((SIDE_A, u), {})[(SIDE_A, v)] = 1.0
            rows.setdefault((SIDE_A, v), {})
    joined = JoinedGraph(rows, SeedSet(()), 0.5)
    lcc = largest_connected_component(joined)
    assert [n[1] for n in lcc] == ["m0", "m1", "m2", "m3", "m4"]

    # Equal sizes: the component holding the smallest node key wins.
    rows = {}
    for chain in (["x0", "x1"], ["a0", "a1"]):
        for u, v in zip(chain, chain[1:]):
            rows.setdefault((SIDE_A, u), {})[(SIDE_A, v)] = 1.0
            rows.setdefault((SIDE_A, v), {})
    joined = JoinedGraph(rows, SeedSet(()), 0.5)
    assert [n[1] for n in largest_connected_component(joined)] == ["a0", "a1"]


def test_lcc_connected_graph_is_everything():
    joined = aggregate_merge(
        triangle("a1", "b1", "s"), triangle("a2", "b2", "s"), seeds_of("s")
    )
    assert largest_connected_component(joined) == joined.nodes()


def test_stationary_distribution_matches_linear_solve():
    ga = triangle("a1", "b1", "s")
    ga.add_edge("a1", "c1", 3.0)
    gb = triangle("a2", "b2", "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"))
    order = joined.nodes()
    idx = {v: i for i, v in enumerate(order)}
    n = len(order)
    d = 0.85
    m = np.zeros((n, n))
    for u in order:
        row = joined.rows[u]
        if not row:
            m[:, idx[u]] = 1.0 / n
        else:
            for v, prob in row.items():
                m[idx[v], idx[u]] += prob
    pi_exact = np.linalg.solve(np.eye(n) - d * m, np.full(n, (1.0 - d) / n))
    pi_exact = pi_exact / pi_exact.sum()
    pi = stationary_distribution(joined)
    assert sum(pi.values()) == pytest.approx(1.0, abs=1e-12)
    for v in order:
        assert pi[v] == pytest.approx(pi_exact[idx[v]], abs=1e-9)


def dense_cluster(core, seed_vertex):
    # Strong internal ties, one lighter tie each to the shared seed.
    g = WeightedGraph()
    for i, u in enumerate(core):
        g.add_edge(u, seed_vertex, 1.0)
        for v in core[i + 1 :]:
            g.add_edge(u, v, 3.0)
    return g


def test_detect_cross_communities_two_cliques_exhaustive():
    ga = dense_cluster(["x1", "x2", "x3"], "s")
    gb = dense_cluster(["y1", "y2", "y3"], "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"))
    assignment = detect_cross_communities(joined, seed=0, restarts=8)

    lcc = largest_connected_component(joined)
    pi = stationary_distribution(joined, lcc)
    rows = {u: joined.rows[u] for u in lcc}
    best = min(
        oracle_directed_bits(lcc, rows, pi, groups)
        for groups in all_groupings(lcc)
    )
    got_groups = {}
    for node in lcc:
        got_groups.setdefault(assignment[node], []).append(node)
    got = oracle_directed_bits(lcc, rows, pi, list(got_groups.values()))
    assert got == pytest.approx(best, abs=1e-12)
    assert got == pytest.approx(joined_code_length(joined, assignment), abs=1e-12)

    # The two platform cliques land in different communities.
    xs = {assignment[(SIDE_A, f"x{i}")] for i in (1, 2, 3)}
    ys = {assignment[(SIDE_B, f"y{i}")] for i in (1, 2, 3)}
    assert len(xs) == 1 and len(ys) == 1 and xs != ys


def test_detect_cross_communities_single_clique():
    labels = ["s1", "s2", "s3"]
    joined = aggregate_merge(clique(labels), clique(labels), seeds_of(*labels))
    assignment = detect_cross_communities(joined, seed=0, restarts=8)
    assert set(assignment.values()) == {0}

    lcc = largest_connected_component(joined)
    pi = stationary_distribution(joined, lcc)
    rows = {u: joined.rows[u] for u in lcc}
    best = min(
        oracle_directed_bits(lcc, rows, pi, groups)
        for groups in all_groupings(lcc)
    )
    assert joined_code_length(joined, assignment) == pytest.approx(best, abs=1e-12)


def test_nodes_outside_lcc_get_null_assignment():
    ga = triangle("a1", "b1", "s")
    ga.add_edge("p1", "q1", 1.0)
    gb = triangle("a2", "b2", "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"))
    assignment = detect_cross_communities(joined, seed=0)
    assert assignment[(SIDE_A, "p1")] is None
    assert assignment[(SIDE_A, "q1")] is None
    assert assignment[(SIDE_AB, "s")] is not None


def test_detect_deterministic():
    ga = clique(["s", "x1", "x2", "x3"])
    gb = clique(["s", "y1", "y2", "y3"])
    joined = aggregate_merge(ga, gb, seeds_of("s"))
    a1 = detect_cross_communities(joined, seed=3)
    a2 = detect_cross_communities(joined, seed=3)
    assert a1 == a2


def test_project_communities():
    ga = clique(["s", "x1", "x2", "x3"])
    ga.add_edge("p1", "q1", 1.0)
    gb = clique(["s", "y1", "y2", "y3"])
    joined = aggregate_merge(ga, gb, seeds_of("s"))
    assignment = detect_cross_communities(joined, seed=0, restarts=8)
    projected = project_communities(joined, assignment)
    assert projected[SIDE_A]["s"] == assignment[(SIDE_AB, "s")]
    assert projected[SIDE_B]["s"] == assignment[(SIDE_AB, "s")]
    assert projected[SIDE_A]["x1"] == assignment[(SIDE_A, "x1")]
    assert projected[SIDE_A]["p1"] is None
    assert "y1" not in projected[SIDE_A]


def test_save_load_roundtrip(tmp_path):
    posts_a = [
        proc("A", "p1", "u1", ["boston", "job"]),
        proc("A", "p2", "u2", ["boston"]),
    ]
    posts_b = [
        proc("B", "q1", "v1", ["boston", "food"]),
        proc("B", "q2", "v2", ["food"]),
    ]
    ga = build_graph(posts_a, {"boston", "job"})
    gb = build_graph(posts_b, {"boston", "food"})
    joined = aggregate_merge(ga, gb, find_seeds(ga, gb))
    jpath = os.path.join(tmp_path, "joined.tsv")
    spath = os.path.join(tmp_path, "seeds.tsv")
    save_joined(joined, jpath, spath)
    loaded = load_joined(jpath, spath)
    assert loaded.rows == joined.rows
    assert loaded.seeds == joined.seeds
    assert loaded.merge_probability == joined.merge_probability

    jpath2 = os.path.join(tmp_path, "joined2.tsv")
    spath2 = os.path.join(tmp_path, "seeds2.tsv")
    save_joined(loaded, jpath2, spath2)
    for first, second in ((jpath, jpath2), (spath, spath2)):
        with open(first, "rb") as fh:
            blob1 = fh.read()
        with open(second, "rb") as fh:
            blob2 = fh.read()
        assert blob1 == blob2


def test_node_for_lookup():
    ga = triangle("a1", "b1", "s")
    gb = triangle("a2", "b2", "s")
    joined = aggregate_merge(ga, gb, seeds_of("s"))
    assert joined.node_for_a("a1") == (SIDE_A, "a1")
    assert joined.node_for_a("s") == (SIDE_AB, "s")
    assert joined.node_for_b("s") == (SIDE_AB, "s")
    assert joined.node_for_b("a2") == (SIDE_B, "a2")
    assert joined.node_for_a("a2") is None


def test_node_key_format():
    assert node_key((SIDE_AB, "s")) == "AB/s"
