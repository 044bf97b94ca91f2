"""Divergence between an original response and an ablated one.

Two views are combined: TF-IDF weighted cosine similarity over the
per-question response corpus (semantic drift) and token-level normalized
Levenshtein distance (structural drift).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from mathinterp.errors import InsufficientCorpus
from mathinterp.text import TokenSequence, tokenize

__all__ = [
    "DivergenceScore",
    "SparseVector",
    "cosine_similarity",
    "divergence",
    "levenshtein",
    "normalized_edit_distance",
    "score_responses",
    "tfidf_vectors",
    "tokenize",
]

SparseVector = Mapping[str, float]
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class DivergenceScore:
    cosine_similarity: float
    normalized_edit_distance: float
    divergence: float
    alpha: float
    zero_norm: bool = False

    @classmethod
    def combine(cls, cosine: float, ned: float, alpha: float, zero_norm: bool = False) -> "DivergenceScore":
        _check_alpha(alpha)
        return cls(cosine, ned, alpha * (1.0 - cosine) + (1.0 - alpha) * ned, alpha, zero_norm)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def tfidf_vectors(docs: Sequence[TokenSequence]) -> list[dict[str, float]]:
    """tf = count/len, idf = ln(N/df) + 1 over the given corpus."""
    if len(docs) < 2:
        raise InsufficientCorpus(f"need at least 2 documents, got {len(docs)}")
    n = len(docs)
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc))
    idf = {term: math.log(n / count) + 1.0 for term, count in df.items()}
    vectors = []
    for doc in docs:
        counts = Counter(doc)
        length = len(doc)
        vectors.append({term: (c / length) * idf[term] for term, c in counts.items()})
    return vectors


def _norm(v: SparseVector) -> float:
    return math.sqrt(math.fsum(w * w for w in v.values()))


def cosine_with_flag(a: SparseVector, b: SparseVector) -> tuple[float, bool]:
    """Cosine similarity and whether a zero-norm vector forced the 0 convention."""
    na, nb = _norm(a), _norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0, True
    if a == b:
        return 1.0, False
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    dot = math.fsum(w * large[t] for t, w in small.items() if t in large)
    return min(1.0, max(0.0, dot / (na * nb))), False


def cosine_similarity(a: SparseVector, b: SparseVector) -> float:
    return cosine_with_flag(a, b)[0]


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost edit distance between token sequences (two-row DP)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


def normalized_edit_distance(a: Sequence[str], b: Sequence[str]) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def _score(
    orig_tokens: TokenSequence,
    abl_tokens: TokenSequence,
    orig_vec: SparseVector,
    abl_vec: SparseVector,
    alpha: float,
) -> DivergenceScore:
    if orig_tokens == abl_tokens:
        # identical responses are a fixed point regardless of emptiness
        return DivergenceScore.combine(1.0, 0.0, alpha)
    cosine, zero = cosine_with_flag(orig_vec, abl_vec)
    return DivergenceScore.combine(cosine, normalized_edit_distance(orig_tokens, abl_tokens), alpha, zero)


def divergence(
    original_response: str,
    ablated_response: str,
    corpus: Sequence[str],
    alpha: float = DEFAULT_ALPHA,
) -> DivergenceScore:
    """Score one ablated response against the original.

    ``corpus`` is the per-question response set used for IDF and must contain
    both responses.
    """
    _check_alpha(alpha)
    if original_response not in corpus or ablated_response not in corpus:
        raise ValueError("corpus must contain both the original and the ablated response")
    docs = [tokenize(text) for text in corpus]
    vectors = tfidf_vectors(docs)
    i, j = list(corpus).index(original_response), list(corpus).index(ablated_response)
    return _score(docs[i], docs[j], vectors[i], vectors[j], alpha)


def score_responses(
    original_response: str, ablated_responses: Sequence[str], alpha: float = DEFAULT_ALPHA
) -> list[DivergenceScore]:
    """Score every ablated response using one shared corpus (original + ablated)."""
    _check_alpha(alpha)
    docs = [tokenize(original_response)] + [tokenize(r) for r in ablated_responses]
    vectors = tfidf_vectors(docs)
    return [_score(docs[0], docs[k], vectors[0], vectors[k], alpha) for k in range(1, len(docs))]
