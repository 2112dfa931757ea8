"""Stage functions gluing the library into one reproducible run.

Each stage reads its inputs from the workspace directory, writes its
outputs there, and nothing else: no timestamps, no absolute paths, so
reruns with the same config produce byte-identical artifacts.  Stages
check for their prerequisites and name the subcommand that produces a
missing one.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass

from . import align as al
from . import corpus as cp
from . import hashtageval as he
from . import netgraph as ng
from . import resolve as rs
from . import synthgen as sg
from . import topics as tp
from . import wordgraph as wg
from .config import PipelineConfig, derive_seed
from .errors import DataError, UsageError
from .forest import load_forest, save_forest
from .netgraph import Vertex

log = logging.getLogger("taglink.pipeline")

SIDES = ("A", "B")


@dataclass(frozen=True)
class Workspace:
    """Artifact paths under one output directory."""

    out_dir: str

    def _p(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def ensure(self) -> None:
        os.makedirs(self.out_dir, exist_ok=True)

    def corpus(self, side: str) -> str:
        return self._p(f"corpus_{side}.jsonl")

    @property
    def ground_truth(self) -> str:
        return self._p("ground_truth.tsv")

    def processed(self, side: str) -> str:
        return self._p(f"processed_{side}.jsonl")

    def hashtags(self, method: str, side: str) -> str:
        return self._p(f"hashtags_{method}_{side}.txt")

    def plsa_model(self, side: str) -> str:
        return self._p(f"plsa_{side}.json")

    def cooc_graph(self, side: str) -> str:
        return self._p(f"cooc_graph_{side}.tsv")

    def word_communities(self, side: str) -> str:
        return self._p(f"word_communities_{side}.tsv")

    def graph(self, side: str) -> str:
        return self._p(f"graph_{side}.tsv")

    @property
    def joined(self) -> str:
        return self._p("joined.tsv")

    @property
    def seeds(self) -> str:
        return self._p("seeds.tsv")

    @property
    def communities(self) -> str:
        return self._p("communities.tsv")

    @property
    def trials(self) -> str:
        return self._p("trials.tsv")

    def scores(self, split: str) -> str:
        return self._p(f"scores_{split}.tsv")

    @property
    def model(self) -> str:
        return self._p("model.json")

    @property
    def eer_report(self) -> str:
        return self._p("eer_report.txt")

    def det_curve(self, subset: str) -> str:
        return self._p(f"det_{subset}.csv")

    @property
    def hashtag_pr(self) -> str:
        return self._p("hashtag_pr.csv")


def _require(path: str, producer: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"missing {path}; run `taglink {producer}` first")
    return path


def _corpus_path(config: PipelineConfig, ws: Workspace, side: str) -> str:
    override = config.corpus_a if side == "A" else config.corpus_b
    return override or ws.corpus(side)


def _truth_path(config: PipelineConfig, ws: Workspace) -> str:
    return config.ground_truth or ws.ground_truth


def _save_wordset(words, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(words):
            fh.write(word + "\n")


def _load_wordset(path: str) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def save_communities(assignment: dict, path: str) -> None:
    """Node keys with their community id, '-' for nodes off the core."""
    with open(path, "w", encoding="utf-8") as fh:
        for node in sorted(assignment, key=al.node_key):
            cid = assignment[node]
            fh.write(f"{al.node_key(node)}\t{'-' if cid is None else cid}\n")


def load_communities(path: str) -> dict:
    assignment = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, cell = line.rpartition("\t")
            side, _, rest = key.partition("/")
            node = (side, Vertex.parse(rest))
            assignment[node] = None if cell == "-" else int(cell)
    return assignment


def synth_config(config: PipelineConfig) -> sg.SynthConfig:
    return sg.SynthConfig(
        seed=derive_seed(config.seed, "synthgen"),
        n_entities=config.synthgen_n_entities,
        cross_platform_fraction=config.synthgen_cross_platform_fraction,
        n_topics_true=config.synthgen_n_topics_true,
        vocab_size=config.synthgen_vocab_size,
        posts_per_user=tuple(config.synthgen_posts_per_user),
        hashtag_rate=config.synthgen_hashtag_rate,
        mention_rate=config.synthgen_mention_rate,
        repost_rate=config.synthgen_repost_rate,
        username_perturbation_rate=config.synthgen_username_perturbation_rate,
        words_per_post=tuple(config.synthgen_words_per_post),
        topic_concentration=config.synthgen_topic_concentration,
        core_mass=config.synthgen_core_mass,
        neighbor_overlap=config.synthgen_neighbor_overlap,
        friends_per_entity=tuple(config.synthgen_friends_per_entity),
    )


def stage_synth(config: PipelineConfig) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    corpus_a, corpus_b, truth = sg.generate(synth_config(config))
    cp.write_corpus(corpus_a, ws.corpus("A"))
    cp.write_corpus(corpus_b, ws.corpus("B"))
    sg.write_ground_truth(truth, ws.ground_truth)
    log.info(
        "synth: %d + %d posts, %d matched pairs",
        len(corpus_a),
        len(corpus_b),
        len(truth.matches),
    )


def stage_preprocess(config: PipelineConfig) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    stopwords = cp.load_stopwords()
    for side in SIDES:
        path = _require(_corpus_path(config, ws, side), "synth")
        raw, skipped = cp.load_corpus(path)
        if not raw:
            raise DataError(f"{path} holds no usable posts")
        if skipped:
            log.warning("preprocess %s: skipped %d malformed posts", side, skipped)
        # Side identity comes from which file a post sits in, so the
        # platform tag is rewritten to the side letter downstream code
        # keys on.
        raw = [dataclasses.replace(post, platform=side) for post in raw]
        processed = cp.preprocess_corpus(raw, stopwords)
        cp.write_processed(processed, ws.processed(side))
        log.info("preprocess %s: %d posts", side, len(processed))


def _annotate_topic(config: PipelineConfig, ws: Workspace, side: str) -> set[str]:
    posts = cp.load_processed(_require(ws.processed(side), "preprocess"))
    vocab = tp.build_vocabulary(posts, min_count=config.topics_min_count)
    if not vocab.words:
        raise DataError(f"side {side}: no word clears topics.min_count")
    matrix = tp.build_doc_term_matrix(posts, vocab)
    model = tp.fit_plsa(
        matrix,
        n_topics=config.topics_n_topics,
        max_iters=config.topics_max_iters,
        tol=config.topics_tol,
        seed=derive_seed(config.seed, f"topics:{side}"),
        vocabulary=vocab,
    )
    tp.save_model(model, ws.plsa_model(side))
    return tp.annotate_topic_hashtags(model, config.topics_words_per_topic)


def _annotate_community(config: PipelineConfig, ws: Workspace, side: str) -> set[str]:
    posts = cp.load_processed(_require(ws.processed(side), "preprocess"))
    graph = wg.build_cooccurrence_graph(
        posts, min_edge_count=config.wordgraph_min_edge_count
    )
    if graph.n_vertices == 0:
        raise DataError(f"side {side}: co-occurrence graph is empty")
    partition = wg.detect_communities_mapeq(
        graph,
        seed=derive_seed(config.seed, f"wordgraph:{side}"),
        max_passes=config.wordgraph_max_passes,
        restarts=config.wordgraph_restarts,
    )
    wg.save_graph(graph, ws.cooc_graph(side))
    wg.save_partition(partition, ws.word_communities(side))
    return wg.annotate_community_hashtags(
        graph,
        partition,
        config.wordgraph_words_per_community,
        pagerank_scope=config.wordgraph_pagerank_scope,
    )


def stage_annotate(config: PipelineConfig, method: str | None = None) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    method = method or config.annotator
    if method not in ("topic", "community"):
        raise UsageError(f"annotator must be 'topic' or 'community', got {method!r}")
    annotate = _annotate_topic if method == "topic" else _annotate_community
    for side in SIDES:
        tags = annotate(config, ws, side)
        _save_wordset(tags, ws.hashtags(method, side))
        log.info("annotate %s/%s: %d hashtags", method, side, len(tags))


def stage_build_graph(config: PipelineConfig) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    for side in SIDES:
        posts = cp.load_processed(_require(ws.processed(side), "preprocess"))
        tags = _load_wordset(_require(ws.hashtags(config.annotator, side), "annotate"))
        graph = ng.build_graph(posts, tags, platform=side)
        ng.save_ccgraph(graph, ws.graph(side))
        stats = ng.graph_stats(graph)
        log.info(
            "build-graph %s: %s vertices, edges by type %s",
            side,
            stats["vertices_by_kind"],
            stats["edge_counts_by_type"],
        )


def stage_align(config: PipelineConfig) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    graph_a = ng.load_ccgraph(_require(ws.graph("A"), "build-graph"), "A")
    graph_b = ng.load_ccgraph(_require(ws.graph("B"), "build-graph"), "B")
    seeds = al.find_seeds(graph_a, graph_b)
    joined = al.aggregate_merge(
        graph_a, graph_b, seeds, p=config.align_merge_probability
    )
    al.save_joined(joined, ws.joined, ws.seeds)
    assignment = al.detect_cross_communities(
        joined,
        seed=derive_seed(config.seed, "align"),
        max_passes=config.align_max_passes,
        restarts=config.align_restarts,
    )
    save_communities(assignment, ws.communities)
    n_core = sum(1 for cid in assignment.values() if cid is not None)
    n_comms = len({cid for cid in assignment.values() if cid is not None})
    log.info(
        "align: %d seeds, %d joined nodes, core %d in %d communities",
        len(seeds.pairs),
        len(joined.rows),
        n_core,
        n_comms,
    )


def _load_scoring_context(config: PipelineConfig, ws: Workspace) -> rs.ScoringContext:
    graph_a = ng.load_ccgraph(_require(ws.graph("A"), "build-graph"), "A")
    graph_b = ng.load_ccgraph(_require(ws.graph("B"), "build-graph"), "B")
    joined = al.load_joined(
        _require(ws.joined, "align"), _require(ws.seeds, "align"), Vertex.parse
    )
    assignment = load_communities(_require(ws.communities, "align"))
    return rs.ScoringContext(
        graph_a=graph_a,
        graph_b=graph_b,
        communities=al.project_communities(joined, assignment),
        joined=joined,
        comm_k=config.features_community_k,
        nbr_k=config.features_neighborhood_k,
    )


def stage_score(config: PipelineConfig) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    truth = sg.load_ground_truth(_require(_truth_path(config, ws), "synth"))
    matches = [(m.user_a, m.user_b) for m in truth.matches]
    if not matches:
        raise DataError("ground truth lists no matched pairs")
    users = {}
    for side in SIDES:
        posts = cp.load_processed(_require(ws.processed(side), "preprocess"))
        users[side] = sorted({post.author for post in posts})
    trials = rs.generate_trials(
        matches,
        users["A"],
        users["B"],
        n_negatives=config.resolve_negatives_per_match * len(matches),
        hard_fraction=config.resolve_hard_fraction,
        seed=derive_seed(config.seed, "trials"),
    )
    train, test = rs.split_trials(trials, seed=derive_seed(config.seed, "split"))
    ctx = _load_scoring_context(config, ws)
    rs.save_trials(trials, ws.trials)
    for split, subset in (("train", train), ("test", test)):
        scores = rs.score_trials(subset, ctx, threads=config.threads)
        rs.save_scores(subset, scores, None, ws.scores(split))
        log.info("score %s: %d trials", split, len(subset))


def stage_train(config: PipelineConfig) -> None:
    ws = Workspace(config.out_dir)
    ws.ensure()
    trials, scores, _ = rs.load_scores(_require(ws.scores("train"), "score"))
    model = rs.train_fuser(
        trials,
        scores,
        n_trees=config.resolve_n_trees,
        max_depth=config.resolve_max_depth,
        seed=derive_seed(config.seed, "forest"),
    )
    save_forest(model, ws.model)
    log.info(
        "train: %d trees on %d trials, oob accuracy %s",
        len(model.trees),
        len(trials),
        model.oob_accuracy,
    )


def stage_eval_er(config: PipelineConfig) -> dict:
    """Equal error rates for the username baseline and the fused model."""
    ws = Workspace(config.out_dir)
    ws.ensure()
    trials, scores, _ = rs.load_scores(_require(ws.scores("test"), "score"))
    model = load_forest(_require(ws.model, "train"))
    fused = [rs.predict(model, s) for s in scores]
    rs.save_scores(trials, scores, fused, ws.scores("fused"))

    systems = {"username": [s.jw for s in scores], "fused": fused}
    results = {}
    lines = ["system\tsubset\teer\tthreshold\tinterpolated"]
    for name in ("username", "fused"):
        for subset in rs.SUBSETS:
            eer, threshold, interpolated = rs.eer_for_subset(
                trials, systems[name], subset
            )
            results[(name, subset)] = (eer, threshold, interpolated)
            lines.append(
                f"{name}\t{subset}\t{eer!r}\t{threshold!r}"
                f"\t{'yes' if interpolated else 'no'}"
            )
            log.info("eval-er %s/%s: eer %.4f", name, subset, eer)
    with open(ws.eer_report, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    for subset in rs.SUBSETS:
        curve = rs.det_curve(rs.subset_pairs(trials, fused, subset))
        rs.save_det_curve(curve, ws.det_curve(subset))
    return results


def _hashtag_annotator(config: PipelineConfig, ws: Workspace, side: str):
    if config.annotator == "topic":
        model = tp.load_model(_require(ws.plsa_model(side), "annotate"))
        return lambda k: tp.annotate_topic_hashtags(model, k)
    graph = wg.load_graph(_require(ws.cooc_graph(side), "annotate"))
    partition = wg.load_partition(_require(ws.word_communities(side), "annotate"))
    return lambda k: wg.annotate_community_hashtags(
        graph, partition, k, pagerank_scope=config.wordgraph_pagerank_scope
    )


def stage_eval_hashtags(config: PipelineConfig) -> list:
    ws = Workspace(config.out_dir)
    ws.ensure()
    points = []
    for side in SIDES:
        posts = cp.load_processed(_require(ws.processed(side), "preprocess"))
        annotator = _hashtag_annotator(config, ws, side)
        points.extend(
            he.sweep_curves(
                annotator,
                posts,
                M_values=config.hashtageval_m_values,
                K_schedule=config.hashtageval_k_schedule,
                method=f"{config.annotator}_{side}",
            )
        )
    he.save_eval_points(points, ws.hashtag_pr)
    log.info("eval-hashtags: %d points", len(points))
    return points


def run_all(config: PipelineConfig) -> dict:
    """The whole chain in order; identical to running each stage by hand."""
    if not (config.corpus_a or config.corpus_b):
        stage_synth(config)
    stage_preprocess(config)
    stage_annotate(config)
    stage_build_graph(config)
    stage_align(config)
    stage_score(config)
    stage_train(config)
    results = stage_eval_er(config)
    stage_eval_hashtags(config)
    return results
