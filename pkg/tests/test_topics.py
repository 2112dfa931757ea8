"""PLSA fitting, checked against a deliberately naive EM implementation."""

from types import SimpleNamespace

import numpy as np
import pytest

from taglink.errors import DataError
from taglink.topics import (
    PlsaModel,
    Vocabulary,
    annotate_topic_hashtags,
    build_doc_term_matrix,
    build_vocabulary,
    fit_plsa,
    load_model,
    save_model,
    top_words_per_topic,
)


def posts_from_token_lists(token_lists):
    return [SimpleNamespace(tokens=tuple(ts)) for ts in token_lists]


def naive_plsa(counts, k, iters, seed):
    """Reference EM with explicit loops over every (topic, doc, word) cell.

    Shares only the initialization contract with the fast path: initial
    responsibilities proportional to one uniform draw per (topic, word).
    """
    counts = np.asarray(counts, dtype=float)
    n_docs, n_words = counts.shape
    rng = np.random.default_rng(seed)
    draw = rng.random((k, n_words))
    resp = np.zeros((k, n_docs, n_words))
    for c in range(k):
        for d in range(n_docs):
            for w in range(n_words):
                resp[c, d, w] = draw[c, w] / draw[:, w].sum()

    def m_step(resp):
        n_w = np.zeros((k, n_words))
        n_d = np.zeros((k, n_docs))
        for c in range(k):
            for d in range(n_docs):
                for w in range(n_words):
                    n_w[c, w] += counts[d, w] * resp[c, d, w]
                    n_d[c, d] += counts[d, w] * resp[c, d, w]
        p_w = n_w / n_w.sum(axis=1, keepdims=True)
        p_d = n_d / n_d.sum(axis=1, keepdims=True)
        p_c = n_d.sum(axis=1) / n_d.sum()
        return p_w, p_d, p_c

    p_w, p_d, p_c = m_step(resp)
    for _ in range(iters):
        for d in range(n_docs):
            for w in range(n_words):
                z = sum(p_c[c] * p_d[c, d] * p_w[c, w] for c in range(k))
                if z > 0:
                    for c in range(k):
                        resp[c, d, w] = p_c[c] * p_d[c, d] * p_w[c, w] / z
        p_w, p_d, p_c = m_step(resp)
    return p_w, p_d, p_c


class TestVocabulary:
    def test_min_count_filter(self):
        posts = posts_from_token_lists([["aa"] * 5 + ["bb"]])
        vocab = build_vocabulary(posts, min_count=2)
        assert vocab.words == ["aa"]

    def test_ordering_count_desc_then_word(self):
        posts = posts_from_token_lists([["bb", "bb", "aa", "aa", "cc"]])
        vocab = build_vocabulary(posts, min_count=1)
        assert vocab.words == ["aa", "bb", "cc"]
        assert vocab.counts == [2, 2, 1]

    def test_empty_vocabulary_raises(self):
        posts = posts_from_token_lists([["aa"]])
        with pytest.raises(DataError):
            build_vocabulary(posts, min_count=3)

    def test_doc_term_matrix(self):
        posts = posts_from_token_lists([["aa", "aa", "bb"], ["bb"], []])
        vocab = build_vocabulary(posts, min_count=1)
        mat = build_doc_term_matrix(posts, vocab).toarray()
        np.testing.assert_array_equal(mat, [[2, 1], [0, 1], [0, 0]])


class TestFitPlsa:
    def random_counts(self, rng, n_docs=6, n_words=12):
        return rng.poisson(1.2, size=(n_docs, n_words)) + (
            rng.random((n_docs, n_words)) < 0.2
        )

    def test_rows_are_distributions(self):
        rng = np.random.default_rng(3)
        counts = self.random_counts(rng)
        model = fit_plsa(counts, n_topics=3, max_iters=40, tol=0.0, seed=5)
        np.testing.assert_allclose(model.p_w_given_c.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(model.p_d_given_c.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(model.p_c.sum(), 1.0, atol=1e-9)

    def test_loglik_nondecreasing(self):
        rng = np.random.default_rng(8)
        for trial in range(5):
            counts = self.random_counts(rng)
            model = fit_plsa(counts, n_topics=2, max_iters=50, tol=0.0, seed=trial)
            trace = np.asarray(model.loglik_trace)
            rel_drop = (trace[:-1] - trace[1:]) / np.abs(trace[:-1])
            assert np.all(rel_drop <= 1e-8)

    def test_single_topic_is_unigram_mle(self):
        counts = np.array([[3, 0, 1], [1, 2, 0]], dtype=float)
        model = fit_plsa(counts, n_topics=1, max_iters=10, tol=0.0, seed=0)
        expected = counts.sum(axis=0) / counts.sum()
        np.testing.assert_allclose(model.p_w_given_c[0], expected, atol=1e-12)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(44)
        counts = rng.poisson(1.5, size=(4, 10)).astype(float)
        counts[0, 0] += 3  # make sure nothing is empty
        counts[3, 9] += 2
        model = fit_plsa(counts, n_topics=2, max_iters=12, tol=0.0, seed=7)
        p_w, p_d, p_c = naive_plsa(counts, k=2, iters=12, seed=7)
        np.testing.assert_allclose(model.p_w_given_c, p_w, atol=1e-9)
        np.testing.assert_allclose(model.p_d_given_c, p_d, atol=1e-9)
        np.testing.assert_allclose(model.p_c, p_c, atol=1e-9)

    def test_disjoint_documents_split_topics(self):
        # two documents over disjoint vocabularies
        doc_a = ["apple"] * 4 + ["banana"] * 3 + ["cherry"] * 2
        doc_b = ["durian"] * 4 + ["elder"] * 3 + ["fig"] * 2
        posts = posts_from_token_lists([doc_a, doc_b])
        vocab = build_vocabulary(posts, min_count=1)
        mat = build_doc_term_matrix(posts, vocab)
        model = fit_plsa(mat, n_topics=2, max_iters=60, tol=0.0, seed=1, vocabulary=vocab)
        top = top_words_per_topic(model, 3)
        vocab_a = set(doc_a)
        vocab_b = set(doc_b)
        for ranked in top:
            words = {w for w, _ in ranked}
            assert words <= vocab_a or words <= vocab_b
        # and the two topics cover different documents
        assert {w for w, _ in top[0]} != {w for w, _ in top[1]}
        # cross-check the whole fit against the naive oracle
        p_w, _, _ = naive_plsa(mat.toarray(), k=2, iters=60, seed=1)
        np.testing.assert_allclose(model.p_w_given_c, p_w, atol=1e-8)

    def test_document_order_only_permutes_topics(self):
        rng = np.random.default_rng(9)
        counts = self.random_counts(rng, n_docs=8)
        a = fit_plsa(counts, n_topics=3, max_iters=25, tol=0.0, seed=2)
        b = fit_plsa(counts[::-1], n_topics=3, max_iters=25, tol=0.0, seed=2)
        key_a = np.lexsort(a.p_w_given_c.T[::-1])
        key_b = np.lexsort(b.p_w_given_c.T[::-1])
        np.testing.assert_allclose(
            a.p_w_given_c[key_a], b.p_w_given_c[key_b], atol=1e-8
        )

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(10)
        counts = self.random_counts(rng)
        a = fit_plsa(counts, n_topics=2, max_iters=30, seed=13)
        b = fit_plsa(counts, n_topics=2, max_iters=30, seed=13)
        np.testing.assert_array_equal(a.p_w_given_c, b.p_w_given_c)
        assert a.loglik_trace == b.loglik_trace

    def test_empty_counts_raise(self):
        with pytest.raises(DataError):
            fit_plsa(np.zeros((3, 4)), n_topics=2)

    def test_bad_n_topics(self):
        with pytest.raises(ValueError):
            fit_plsa(np.ones((2, 2)), n_topics=0)


class TestAnnotation:
    def make_model(self, p_w, words):
        vocab = Vocabulary(
            words=list(words),
            index={w: i for i, w in enumerate(words)},
            counts=[1] * len(words),
            min_count=1,
        )
        p_w = np.asarray(p_w, dtype=float)
        return PlsaModel(
            n_topics=p_w.shape[0],
            p_w_given_c=p_w,
            p_d_given_c=None,
            p_c=None,
            vocabulary=vocab,
        )

    def test_tie_break_lexicographic(self):
        model = self.make_model([[0.4, 0.3, 0.3]], ["mm", "zz", "aa"])
        ranked = top_words_per_topic(model, 2)[0]
        assert [w for w, _ in ranked] == ["mm", "aa"]

    def test_union_over_topics(self):
        model = self.make_model(
            [[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]], ["xx", "yy", "zz"]
        )
        assert annotate_topic_hashtags(model, 1) == {"xx", "zz"}
        assert annotate_topic_hashtags(model, 2) == {"xx", "yy", "zz"}

    def test_annotation_invariant_to_topic_order(self):
        model = self.make_model(
            [[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]], ["xx", "yy", "zz"]
        )
        flipped = self.make_model(
            [[0.1, 0.2, 0.7], [0.7, 0.2, 0.1]], ["xx", "yy", "zz"]
        )
        assert annotate_topic_hashtags(model, 1) == annotate_topic_hashtags(flipped, 1)

    def test_model_dump_roundtrip(self, tmp_path):
        posts = posts_from_token_lists([["aa", "bb", "aa"], ["bb", "cc"]])
        vocab = build_vocabulary(posts, min_count=1)
        mat = build_doc_term_matrix(posts, vocab)
        model = fit_plsa(mat, n_topics=2, max_iters=20, seed=3, vocabulary=vocab)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        back = load_model(str(path))
        assert back.n_topics == model.n_topics
        assert back.vocabulary.words == vocab.words
        np.testing.assert_array_equal(back.p_w_given_c, model.p_w_given_c)
