"""Run configuration: defaults, the sectioned config file, and overrides.

Every tunable lives on one flat dataclass.  The config file groups keys
into sections named after pipeline areas; ``--set section.key=value``
overrides parse the same way, so precedence is defaults, then file,
then overrides, in that order.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, fields

from .errors import UsageError


def derive_seed(global_seed: int, name: str) -> int:
    """Stable per-stage seed: hash of the run seed and a stage name.

    Stages re-run in isolation reproduce their randomness because the
    derived seed depends only on these two values.
    """
    digest = hashlib.sha256(f"{global_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PipelineConfig:
    # [run]
    out_dir: str = "out"
    seed: int = 0
    annotator: str = "topic"
    threads: int = 1
    corpus_a: str = ""
    corpus_b: str = ""
    ground_truth: str = ""

    # [topics]
    topics_n_topics: int = 8
    topics_min_count: int = 5
    topics_max_iters: int = 200
    topics_tol: float = 1e-5
    topics_words_per_topic: int = 3

    # [wordgraph]
    wordgraph_min_edge_count: int = 2
    wordgraph_words_per_community: int = 3
    wordgraph_pagerank_scope: str = "community"
    wordgraph_max_passes: int = 10
    wordgraph_restarts: int = 4

    # [align]
    align_merge_probability: float = 0.5
    align_max_passes: int = 10
    align_restarts: int = 4

    # [features]
    features_community_k: int = 1
    features_neighborhood_k: int = 1

    # [resolve]
    resolve_negatives_per_match: int = 4
    resolve_hard_fraction: float = 0.3
    resolve_n_trees: int = 100
    resolve_max_depth: int = 5

    # [synthgen]
    synthgen_n_entities: int = 200
    synthgen_cross_platform_fraction: float = 0.4
    synthgen_n_topics_true: int = 4
    synthgen_vocab_size: int = 300
    synthgen_posts_per_user: tuple = (3, 8)
    synthgen_hashtag_rate: float = 0.3
    synthgen_mention_rate: float = 0.6
    synthgen_repost_rate: float = 0.15
    synthgen_username_perturbation_rate: float = 0.3
    synthgen_words_per_post: tuple = (6, 14)
    synthgen_topic_concentration: float = 0.2
    synthgen_core_mass: float = 0.85
    synthgen_neighbor_overlap: float = 0.8
    synthgen_friends_per_entity: tuple = (3, 8)

    # [hashtageval]
    hashtageval_m_values: tuple = (500, 1000, 2000, 5000)
    hashtageval_k_schedule: tuple = (1, 2, 3, 5, 8)

    def validate(self) -> None:
        if self.annotator not in ("topic", "community"):
            raise UsageError(
                f"run.annotator must be 'topic' or 'community', got {self.annotator!r}"
            )
        if self.wordgraph_pagerank_scope not in ("community", "global"):
            raise UsageError(
                "wordgraph.pagerank_scope must be 'community' or 'global', "
                f"got {self.wordgraph_pagerank_scope!r}"
            )
        if self.threads < 1:
            raise UsageError("run.threads must be at least 1")
        if not 0.0 <= self.align_merge_probability <= 1.0:
            raise UsageError("align.merge_probability must lie in [0, 1]")
        if not 0.0 <= self.resolve_hard_fraction <= 1.0:
            raise UsageError("resolve.hard_fraction must lie in [0, 1]")
        for name in (
            "topics_n_topics",
            "topics_min_count",
            "topics_words_per_topic",
            "wordgraph_min_edge_count",
            "wordgraph_words_per_community",
            "features_community_k",
            "features_neighborhood_k",
            "resolve_negatives_per_match",
            "resolve_n_trees",
            "resolve_max_depth",
        ):
            if getattr(self, name) < 1:
                section, _, key = name.partition("_")
                raise UsageError(f"{section}.{key} must be at least 1")
        for name in ("hashtageval_m_values", "hashtageval_k_schedule"):
            values = getattr(self, name)
            if not values or any(v < 1 for v in values):
                section, _, key = name.partition("_")
                raise UsageError(f"{section}.{key} needs positive entries")


# Section name per config-file prefix; [run] keys map to bare attributes.
_SECTION_PREFIXES = (
    "topics",
    "wordgraph",
    "align",
    "features",
    "resolve",
    "synthgen",
    "hashtageval",
)


def _attribute_for(section: str, key: str) -> str:
    if section == "run":
        name = key
    elif section in _SECTION_PREFIXES:
        name = f"{section}_{key}"
    else:
        raise UsageError(f"unknown config section [{section}]")
    if name not in _FIELD_TYPES:
        raise UsageError(f"unknown config key {section}.{key}")
    return name


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    text = raw.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            parts = [p for p in text.split(",") if p.strip()]
            if not parts:
                raise ValueError("empty list")
            return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad value for {name.replace('_', '.', 1)}: {raw!r}") from exc
    return text


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
# Dataclass field types arrive as strings under deferred annotations.
_FIELD_TYPES = {
    name: {"str": str, "int": int, "float": float, "tuple": tuple}[kind]
    if isinstance(kind, str)
    else kind
    for name, kind in _FIELD_TYPES.items()
}


def parse_override(item: str) -> tuple[str, str]:
    """Split one ``section.key=value`` override, validating its shape."""
    head, sep, value = item.partition("=")
    section, dot, key = head.partition(".")
    if not sep or not dot or not section or not key:
        raise UsageError(f"override must look like section.key=value, got {item!r}")
    return _attribute_for(section.strip(), key.strip()), value


def load_config(
    path: str | None = None, overrides: tuple[str, ...] = ()
) -> PipelineConfig:
    values: dict[str, object] = {}
    if path is not None:
        if not os.path.isfile(path):
            raise UsageError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise UsageError(f"could not parse config file {path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = _attribute_for(section, key)
                values[name] = _coerce(name, raw)
    for item in overrides:
        name, raw = parse_override(item)
        values[name] = _coerce(name, raw)
    config = PipelineConfig(**values)
    config.validate()
    return config
