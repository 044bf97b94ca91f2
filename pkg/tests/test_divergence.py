from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.feature_extraction.text import TfidfVectorizer

from mathinterp.divergence import (
    DivergenceScore,
    cosine_similarity,
    divergence,
    levenshtein,
    normalized_edit_distance,
    score_responses,
    tfidf_vectors,
)
from mathinterp.errors import InsufficientCorpus
from oracles import dense_tfidf_cosines, dense_tfidf_weights, textbook_levenshtein

tokens = st.lists(st.sampled_from(list("abcdefg")), max_size=12)


def test_identical_docs_identical_vectors():
    v = tfidf_vectors([("a", "b"), ("a", "b")])
    assert v[0] == v[1]


def test_tfidf_two_doc_hand_values():
    v = tfidf_vectors([("a", "b"), ("b", "c")])
    rare = 0.5 * (math.log(2) + 1.0)
    assert v[0]["a"] == pytest.approx(rare, abs=1e-12)
    assert v[0]["b"] == pytest.approx(0.5, abs=1e-12)
    assert v[1]["c"] == pytest.approx(rare, abs=1e-12)


def test_single_doc_rejected():
    with pytest.raises(InsufficientCorpus):
        tfidf_vectors([("a",)])


def test_tfidf_matches_sklearn_smoothing_off():
    # sklearn with smooth_idf=False uses ln(N/df) + 1; tf there is raw count, so compare after L2 norm
    docs = ["a b b c", "b c d", "a d d d e"]
    sk = TfidfVectorizer(token_pattern=r"\S+", smooth_idf=False, norm="l2").fit(docs)
    dense = sk.transform(docs).toarray()
    ours = tfidf_vectors([tuple(d.split()) for d in docs])
    vocab = sk.get_feature_names_out()
    for row, vec in zip(dense, ours):
        norm = math.sqrt(sum(w * w for w in vec.values()))
        assert np.allclose(row, [vec.get(t, 0.0) / norm for t in vocab], atol=1e-12)


def test_cosine_extremes():
    assert cosine_similarity({"a": 0.3, "b": 0.1}, {"a": 0.3, "b": 0.1}) == 1.0
    assert cosine_similarity({"a": 1.0}, {"b": 1.0}) == 0.0
    assert cosine_similarity({}, {"a": 1.0}) == 0.0


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_cosine_random_dense_oracle(seed):
    rng = random.Random(seed)
    terms = [f"t{i}" for i in range(20)]
    a = {t: rng.random() for t in terms if rng.random() < 0.8}
    b = {t: rng.random() for t in terms if rng.random() < 0.8}
    va = np.array([a.get(t, 0.0) for t in terms])
    vb = np.array([b.get(t, 0.0) for t in terms])
    denom = np.linalg.norm(va) * np.linalg.norm(vb)
    expected = 0.0 if denom == 0 else float(va @ vb / denom)
    assert cosine_similarity(a, b) == pytest.approx(expected, abs=1e-9)


@given(tokens, tokens)
def test_cosine_symmetric(a, b):
    if not a and not b:
        return
    docs = [tuple(a) or ("z",), tuple(b) or ("z",)]
    va, vb = tfidf_vectors(docs)
    assert cosine_similarity(va, vb) == cosine_similarity(vb, va)


def test_ned_examples():
    assert normalized_edit_distance(["a", "b"], ["a", "b"]) == 0
    assert normalized_edit_distance(["a", "b", "c"], ["a", "x", "c"]) == pytest.approx(1 / 3)
    assert normalized_edit_distance([], ["a", "b"]) == 1
    assert normalized_edit_distance([], []) == 0


@given(tokens, tokens)
def test_levenshtein_matches_textbook(a, b):
    assert levenshtein(a, b) == textbook_levenshtein(a, b)


@given(st.lists(st.sampled_from("ab"), min_size=4, max_size=4),
       st.lists(st.sampled_from("ab"), min_size=4, max_size=4),
       st.lists(st.sampled_from("ab"), min_size=4, max_size=4))
def test_edit_distance_triangle(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


def test_divergence_identical():
    score = divergence("the gradient is <2, 1>", "the gradient is <2, 1>", ["the gradient is <2, 1>", "other"])
    assert (score.divergence, score.cosine_similarity, score.normalized_edit_distance) == (0.0, 1.0, 0.0)


def test_divergence_disjoint_equal_length():
    a, b = "alpha beta gamma", "delta epsilon zeta"
    for alpha in (0.0, 0.3, 1.0):
        score = divergence(a, b, [a, b], alpha)
        assert score.divergence == 1.0


def test_combination_formula():
    assert DivergenceScore.combine(0.8, 0.4, 0.5).divergence == pytest.approx(0.3, abs=1e-15)


def test_corpus_must_contain_responses():
    with pytest.raises(ValueError):
        divergence("a", "b", ["a", "c"])


def test_alpha_bounds():
    with pytest.raises(ValueError):
        divergence("a", "b", ["a", "b"], alpha=1.5)


def test_divergence_monotone_in_edit_distance():
    low = DivergenceScore.combine(0.6, 0.2, 0.5).divergence
    high = DivergenceScore.combine(0.6, 0.7, 0.5).divergence
    assert high > low


@settings(max_examples=100)
@given(st.lists(st.text(alphabet="abc xyz=^()", max_size=30), min_size=1, max_size=5),
       st.floats(0, 1))
def test_scores_bounded_and_self_zero(texts, alpha):
    original = texts[0]
    for s in score_responses(original, texts, alpha):
        for v in (s.cosine_similarity, s.normalized_edit_distance, s.divergence):
            assert 0.0 <= v <= 1.0
    assert score_responses(original, [original], alpha)[0].divergence == 0.0


@settings(max_examples=50)
@given(st.lists(tokens.filter(bool), min_size=2, max_size=6))
def test_pipeline_matches_dense_oracle(docs):
    vectors = tfidf_vectors([tuple(d) for d in docs])
    weights = dense_tfidf_weights(docs)
    for v, w in zip(vectors, weights):
        assert set(v) == set(w)
        for t in v:
            assert v[t] == pytest.approx(w[t], abs=1e-12)
    cos = dense_tfidf_cosines(docs)
    for i in range(len(docs)):
        for j in range(len(docs)):
            assert cosine_similarity(vectors[i], vectors[j]) == pytest.approx(cos[i, j], abs=1e-9)
