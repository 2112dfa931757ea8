"""Corpus ingestion and text preprocessing.

Posts arrive as line-delimited JSON, one object per line:

    {"platform": "A", "post_id": "A-1", "author": "alice",
     "text": "...", "mentions": ["bob"], "repost_of": null, "ts": 17}

Preprocessing normalizes the text, strips noise (URLs, emoji, emoticons,
repost markers), tokenizes, filters stopwords, and pulls user-annotated
hashtags out into metadata.  Everything downstream consumes the
processed form.
"""

from __future__ import annotations

import json
import logging
import re
import string
import unicodedata
from dataclasses import dataclass
from importlib import resources
from typing import AbstractSet, Iterable

logger = logging.getLogger(__name__)

PLATFORMS = ("A", "B")

# Tokens shorter than this are dropped: single characters are almost
# always tokenization debris rather than words.
MIN_TOKEN_LEN = 2

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")

# "rt @somebody" at the very start of the (already lowercased) text.
_RT_RE = re.compile(r"^rt\s+@\S+\s*")

# Fixed catalog of ASCII emoticons, matched only as standalone
# whitespace-delimited tokens so ":d" inside a word is left alone.
_EMOTICONS = (
    ":-)", ":-(", ":-d", ":-p", ":-/", ":-\\", ":-|", ":-o", ":'(",
    ":)", ":(", ":d", ":p", ":/", ":\\", ":|", ":o", ":*", ":3",
    ";-)", ";)", ";p", ";d",
    "=)", "=(", "=d", "=p",
    "xd", "xp", "<3", "</3", "^_^", "-_-", "o_o", "t_t",
)
_EMOTICON_RE = re.compile(
    r"(?<!\S)(?:" + "|".join(re.escape(e) for e in _EMOTICONS) + r")(?!\S)"
)

_WS_RE = re.compile(r"\s+")

# Codepoint ranges treated as emoji on top of the So/Sk categories.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),  # mahjong tiles through symbols-extended
    (0x2600, 0x27BF),    # misc symbols + dingbats
    (0x2190, 0x21FF),    # arrows
    (0xFE00, 0xFE0F),    # variation selectors
    (0x200D, 0x200D),    # zero-width joiner
)

# Punctuation stripped from token edges; inner punctuation is kept so
# words like "co-op" survive.
_EDGE_PUNCT = string.punctuation + "“”‘’´`…–—"


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Load a stopword list, one word per line; '#' lines are comments.

    With no path the packaged default English list is used.
    """
    if path is None:
        text = resources.files("taglink.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@dataclass(frozen=True)
class RawPost:
    """One post as it came off the wire."""

    platform: str
    post_id: str
    author: str
    text: str
    mentioned_users: tuple[str, ...] = ()
    repost_of: str | None = None
    timestamp: int = 0


@dataclass(frozen=True)
class ProcessedPost:
    """A post after normalization, tokenization, and hashtag extraction."""

    platform: str
    post_id: str
    author: str
    tokens: tuple[str, ...]
    user_hashtags: frozenset[str]
    mentioned_users: tuple[str, ...] = ()
    repost_of: str | None = None
    timestamp: int = 0

    def reassembled_text(self) -> str:
        return " ".join(self.tokens)


def _is_symbol_char(ch: str) -> bool:
    cp = ord(ch)
    for lo, hi in _EMOJI_RANGES:
        if lo <= cp <= hi:
            return True
    return unicodedata.category(ch) in ("So", "Sk", "Cs")


def normalize_text(raw: str) -> str:
    """Lowercase, NFKC-normalize, and strip URLs/emoji/emoticons/repost markers.

    Whitespace is collapsed to single spaces and the result is stripped,
    so an all-noise input comes back as the empty string.
    """
    text = unicodedata.normalize("NFKC", raw).lower()
    text = _URL_RE.sub(" ", text)
    text = _EMOTICON_RE.sub(" ", text)
    text = "".join(" " if _is_symbol_char(c) else c for c in text)
    text = _WS_RE.sub(" ", text).strip()
    return _RT_RE.sub("", text)


def tokenize_and_filter(
    normalized: str, stopwords: AbstractSet[str]
) -> tuple[list[str], set[str]]:
    """Split normalized text into kept tokens plus the user-hashtag subset.

    Tokens beginning with '#' are recorded as user hashtags (hash marks
    removed).  Edge punctuation is stripped, stopwords and tokens shorter
    than MIN_TOKEN_LEN are dropped; a hashtag is only recorded when its
    word survives filtering, so user_hashtags is always a subset of the
    returned tokens.
    """
    tokens: list[str] = []
    hashtags: set[str] = set()
    for piece in normalized.split():
        tagged = piece.startswith("#")
        word = piece.replace("#", "").strip(_EDGE_PUNCT)
        if not word or len(word) < MIN_TOKEN_LEN or word in stopwords:
            continue
        tokens.append(word)
        if tagged:
            hashtags.add(word)
    return tokens, hashtags


def preprocess(post: RawPost, stopwords: AbstractSet[str]) -> ProcessedPost:
    """Normalize and tokenize one post, carrying all metadata through."""
    tokens, hashtags = tokenize_and_filter(normalize_text(post.text), stopwords)
    return ProcessedPost(
        platform=post.platform,
        post_id=post.post_id,
        author=post.author,
        tokens=tuple(tokens),
        user_hashtags=frozenset(hashtags),
        mentioned_users=post.mentioned_users,
        repost_of=post.repost_of,
        timestamp=post.timestamp,
    )


def preprocess_corpus(
    posts: Iterable[RawPost], stopwords: AbstractSet[str]
) -> list[ProcessedPost]:
    return [preprocess(p, stopwords) for p in posts]


def _as_clean_str(value: object) -> str:
    if not isinstance(value, str) or not value:
        raise ValueError("expected non-empty string")
    return value


def _parse_raw(obj: object) -> RawPost:
    if not isinstance(obj, dict):
        raise ValueError("post line is not an object")
    platform = _as_clean_str(obj["platform"])
    if platform not in PLATFORMS:
        raise ValueError(f"unknown platform {platform!r}")
    mentions = obj["mentions"]
    if not isinstance(mentions, list) or any(not isinstance(m, str) for m in mentions):
        raise ValueError("mentions must be a list of strings")
    repost_of = obj["repost_of"]
    if repost_of is not None and not isinstance(repost_of, str):
        raise ValueError("repost_of must be a string or null")
    ts = obj["ts"]
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ValueError("ts must be an integer")
    text = obj["text"]
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    return RawPost(
        platform=platform,
        post_id=_as_clean_str(obj["post_id"]),
        author=_as_clean_str(obj["author"]),
        text=text,
        mentioned_users=tuple(mentions),
        repost_of=repost_of,
        timestamp=ts,
    )


def load_corpus(path: str) -> tuple[list[RawPost], int]:
    """Read a raw corpus file.

    Returns (posts, skipped): malformed lines and duplicate post ids are
    counted, logged, and skipped rather than aborting the run.  An
    unreadable file still raises.
    """
    posts: list[RawPost] = []
    skipped = 0
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                post = _parse_raw(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                skipped += 1
                logger.warning("%s:%d: skipping malformed line (%s)", path, lineno, exc)
                continue
            key = (post.platform, post.post_id)
            if key in seen:
                skipped += 1
                logger.warning("%s:%d: duplicate post id %r", path, lineno, post.post_id)
                continue
            seen.add(key)
            posts.append(post)
    if skipped:
        logger.warning("%s: skipped %d unusable line(s)", path, skipped)
    return posts, skipped


def write_corpus(posts: Iterable[RawPost], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in posts:
            fh.write(
                json.dumps(
                    {
                        "platform": p.platform,
                        "post_id": p.post_id,
                        "author": p.author,
                        "text": p.text,
                        "mentions": list(p.mentioned_users),
                        "repost_of": p.repost_of,
                        "ts": p.timestamp,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def write_processed(posts: Iterable[ProcessedPost], path: str) -> None:
    """Write processed posts in the raw shape plus tokens/user_hashtags."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in posts:
            fh.write(
                json.dumps(
                    {
                        "platform": p.platform,
                        "post_id": p.post_id,
                        "author": p.author,
                        "tokens": list(p.tokens),
                        "user_hashtags": sorted(p.user_hashtags),
                        "mentions": list(p.mentioned_users),
                        "repost_of": p.repost_of,
                        "ts": p.timestamp,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_processed(path: str) -> list[ProcessedPost]:
    """Read a processed corpus written by write_processed.

    These files are pipeline artifacts, so damage is treated as fatal
    rather than skipped.
    """
    posts: list[ProcessedPost] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                posts.append(
                    ProcessedPost(
                        platform=_as_clean_str(obj["platform"]),
                        post_id=_as_clean_str(obj["post_id"]),
                        author=_as_clean_str(obj["author"]),
                        tokens=tuple(obj["tokens"]),
                        user_hashtags=frozenset(obj["user_hashtags"]),
                        mentioned_users=tuple(obj["mentions"]),
                        repost_of=obj["repost_of"],
                        timestamp=obj["ts"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad processed post line: {exc}") from exc
    return posts
