"""Preprocessing and corpus IO behavior."""

import json

import numpy as np
import pytest

from taglink import corpus
from taglink.corpus import (
    MIN_TOKEN_LEN,
    ProcessedPost,
    RawPost,
    load_corpus,
    load_processed,
    load_stopwords,
    normalize_text,
    preprocess,
    tokenize_and_filter,
    write_corpus,
    write_processed,
)

STOP = load_stopwords()


def make_post(text, platform="A", post_id="p1", author="alice", **kw):
    return RawPost(platform=platform, post_id=post_id, author=author, text=text, **kw)


class TestNormalize:
    def test_url_emoji_and_case(self):
        assert normalize_text("Check ☕ #Boston http://t.co/x") == "check #boston"

    def test_repost_marker(self):
        assert normalize_text("RT @bob Hello") == "hello"

    def test_empty_text(self):
        assert normalize_text("") == ""

    def test_www_url(self):
        assert normalize_text("see www.example.com/a?b=1 now") == "see now"

    def test_emoticons_standalone_only(self):
        assert normalize_text("good :) job") == "good job"
        # ":d" embedded in a word is not an emoticon
        assert normalize_text("a:dam") == "a:dam"

    def test_nfkc_compatibility_forms(self):
        # fullwidth letters fold to ASCII
        assert normalize_text("ＨＥＬＬＯ") == "hello"

    def test_rt_only_at_start(self):
        assert normalize_text("note rt @bob said") == "note rt @bob said"

    def test_surrogates_and_pictographs_removed(self):
        assert normalize_text("hi \U0001f600\U0001f680 there") == "hi there"


class TestTokenize:
    def test_hashtag_extraction(self):
        tokens, tags = tokenize_and_filter("the #worldcup2014 final!", STOP)
        assert tokens == ["worldcup2014", "final"]
        assert tags == {"worldcup2014"}

    def test_all_stopwords(self):
        tokens, tags = tokenize_and_filter("a an the", STOP)
        assert tokens == [] and tags == set()

    def test_hashtag_of_stopword_not_recorded(self):
        tokens, tags = tokenize_and_filter("#the #game", STOP)
        assert tokens == ["game"]
        assert tags == {"game"}

    def test_short_tokens_dropped(self):
        tokens, _ = tokenize_and_filter("x yz", STOP)
        assert tokens == ["yz"]
        assert all(len(t) >= MIN_TOKEN_LEN for t in tokens)

    def test_pure_punctuation_dropped(self):
        tokens, _ = tokenize_and_filter("!!! ... word", STOP)
        assert tokens == ["word"]

    def test_inner_punctuation_kept(self):
        tokens, _ = tokenize_and_filter("co-op rocks.", STOP)
        assert tokens == ["co-op", "rocks"]

    def test_hashtags_subset_of_tokens(self):
        rng = np.random.default_rng(7)
        vocab = ["alpha", "beta", "gamma", "the", "of", "x"]
        for _ in range(200):
            words = rng.choice(vocab, size=rng.integers(1, 8))
            text = " ".join(("#" + w) if rng.random() < 0.4 else w for w in words)
            tokens, tags = tokenize_and_filter(text, STOP)
            assert tags <= set(tokens)
            assert all("#" not in t for t in tokens)


class TestPreprocess:
    def test_metadata_carried(self):
        post = make_post(
            "hello #world", mentioned_users=("bob",), repost_of="p0", timestamp=42
        )
        proc = preprocess(post, STOP)
        assert proc.platform == "A" and proc.post_id == "p1"
        assert proc.mentioned_users == ("bob",)
        assert proc.repost_of == "p0" and proc.timestamp == 42
        assert proc.tokens == ("hello", "world")
        assert proc.user_hashtags == frozenset({"world"})

    def test_idempotent_on_reassembled_text(self):
        rng = np.random.default_rng(11)
        words = ["boston", "jobs", "#hiring", "the", "RT", "http://x.co/1", ":)", "go!"]
        for _ in range(100):
            text = " ".join(rng.choice(words, size=rng.integers(1, 10)))
            first = preprocess(make_post(text), STOP)
            again = preprocess(make_post(first.reassembled_text()), STOP)
            assert set(again.tokens) == set(first.tokens)


class TestCorpusIO:
    def _write_lines(self, path, lines):
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def _valid(self, pid="p1"):
        return json.dumps(
            {
                "platform": "A",
                "post_id": pid,
                "author": "alice",
                "text": "hi",
                "mentions": [],
                "repost_of": None,
                "ts": 1,
            }
        )

    def test_skips_malformed_lines(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_lines(path, [self._valid("p1"), "{not json", self._valid("p2")])
        posts, skipped = load_corpus(str(path))
        assert [p.post_id for p in posts] == ["p1", "p2"]
        assert skipped == 1

    def test_missing_field_and_bad_platform(self, tmp_path):
        bad1 = json.dumps({"platform": "A", "post_id": "x", "author": "a"})
        bad2 = self._valid("p9").replace('"A"', '"C"')
        path = tmp_path / "c.jsonl"
        self._write_lines(path, [bad1, bad2, self._valid("ok")])
        posts, skipped = load_corpus(str(path))
        assert len(posts) == 1 and skipped == 2

    def test_duplicate_post_id_skipped(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_lines(path, [self._valid("p1"), self._valid("p1")])
        posts, skipped = load_corpus(str(path))
        assert len(posts) == 1 and skipped == 1

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            load_corpus(str(tmp_path / "nope.jsonl"))

    def test_raw_roundtrip(self, tmp_path):
        posts = [
            make_post("hello #x", post_id="p1", mentioned_users=("bob", "eve")),
            make_post("other", post_id="p2", repost_of="p1", timestamp=9),
        ]
        path = tmp_path / "c.jsonl"
        write_corpus(posts, str(path))
        back, skipped = load_corpus(str(path))
        assert back == posts and skipped == 0

    def test_processed_roundtrip(self, tmp_path):
        proc = [
            preprocess(make_post("hello #world", post_id=f"p{i}"), STOP)
            for i in range(3)
        ]
        path = tmp_path / "proc.jsonl"
        write_processed(proc, str(path))
        assert load_processed(str(path)) == proc

    def test_processed_rejects_damage(self, tmp_path):
        path = tmp_path / "proc.jsonl"
        path.write_text('{"platform": "A"}\n', encoding="utf-8")
        with pytest.raises(ValueError):
            load_processed(str(path))


def test_stopword_list_loads():
    assert "the" in STOP and "and" in STOP
    assert len(STOP) > 150


def test_custom_stopword_file(tmp_path):
    f = tmp_path / "stop.txt"
    f.write_text("# comment\nfoo\nBAR\n", encoding="utf-8")
    words = load_stopwords(str(f))
    assert words == frozenset({"foo", "bar"})
