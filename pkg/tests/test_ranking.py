"""Pair enumeration, bounded-heap top-K vs full-sort oracle, tie rule."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shotmatch.dedup import DedupResult
from shotmatch.errors import DataError
from shotmatch.ranking import (
    RankedList,
    ScoredPair,
    enumerate_pairs,
    pair_count,
    recall_at_k,
    top_k_exact,
)
from shotmatch.scoring import similarity_function


def full_sort_oracle(vectors: dict[int, np.ndarray], k: int, movie_id="m") -> list[ScoredPair]:
    """Materialize and sort every pair: the memory-hungry reference.

    Scores use the same row-matvec arithmetic as production so that the
    oracle differs only in its selection strategy (full sort vs heap).
    """
    indices = sorted(vectors)
    mat = np.stack([np.asarray(vectors[i], dtype=np.float64) for i in indices])
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    mat = mat / np.where(norms == 0.0, 1.0, norms)
    pairs = []
    for a in range(len(indices) - 1):
        sims = np.clip(mat[a + 1 :] @ mat[a], -1.0, 1.0)
        for off, score in enumerate(sims):
            pairs.append(ScoredPair(movie_id, indices[a], indices[a + 1 + off], float(score)))
    pairs.sort(key=ScoredPair.sort_key)
    return pairs[:k]


def test_enumerate_pairs_counts():
    kept = DedupResult("m", (), (1, 2, 3, 4), 0.8)
    assert list(enumerate_pairs(kept)) == [
        (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4),
    ]
    assert list(enumerate_pairs([7])) == []
    assert pair_count(1000) == 499_500
    assert sum(1 for _ in enumerate_pairs(range(1, 1001))) == 499_500


def test_enumerate_pairs_lexicographic_over_unsorted_input():
    assert list(enumerate_pairs([3, 1, 2])) == [(1, 2), (1, 3), (2, 3)]


def test_top_k_exact_matches_full_sort_oracle():
    rng = np.random.default_rng(17)
    vectors = {i + 1: rng.normal(size=8) for i in range(200)}
    f = similarity_function("cosine_features")
    got = top_k_exact(None, f, vectors, k=25, movie_id="m")
    expected = full_sort_oracle(vectors, 25)
    assert list(got.pairs) == expected  # bit-for-bit: scores and identities


def test_top_k_heap_path_equals_vectorized_path():
    rng = np.random.default_rng(23)
    vectors = {i + 1: rng.normal(size=6) for i in range(60)}
    f = similarity_function("cosine_features")
    fast = top_k_exact(None, f, vectors, k=10, movie_id="m")
    slow = top_k_exact(enumerate_pairs(vectors.keys()), f, vectors, k=10, movie_id="m")
    assert [p.identity() for p in fast.pairs] == [p.identity() for p in slow.pairs]
    for a, b in zip(fast.pairs, slow.pairs):
        assert a.score == pytest.approx(b.score, abs=1e-12)


def test_top_k_larger_than_pair_count_returns_all_sorted():
    rng = np.random.default_rng(5)
    vectors = {i + 1: rng.normal(size=4) for i in range(6)}
    f = similarity_function("cosine_features")
    got = top_k_exact(None, f, vectors, k=100, movie_id="m")
    assert len(got.pairs) == 15
    assert list(got.pairs) == full_sort_oracle(vectors, 100)


def test_top_k_tie_rule_prefers_ascending_indices():
    # all-equal vectors: every pair scores 1.0; ties break on (i, j)
    vectors = {i: np.array([1.0, 0.0]) for i in range(1, 6)}
    f = similarity_function("cosine_features")
    got = top_k_exact(None, f, vectors, k=4, movie_id="m")
    assert [(p.shot_i, p.shot_j) for p in got.pairs] == [(1, 2), (1, 3), (1, 4), (1, 5)]
    # the generic heap path must agree under the same ties
    slow = top_k_exact(enumerate_pairs(vectors.keys()), f, vectors, k=4, movie_id="m")
    assert [(p.shot_i, p.shot_j) for p in slow.pairs] == [(1, 2), (1, 3), (1, 4), (1, 5)]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 30), st.integers(1, 12))
def test_top_k_invariant_to_pair_iteration_order(seed, n, k):
    rng = np.random.default_rng(seed)
    vectors = {i + 1: rng.normal(size=5) for i in range(n)}
    f = similarity_function("cosine_features")
    pairs = list(enumerate_pairs(vectors.keys()))
    shuffled = [pairs[i] for i in rng.permutation(len(pairs))]
    a = top_k_exact(pairs, f, vectors, k=k, movie_id="m")
    b = top_k_exact(shuffled, f, vectors, k=k, movie_id="m")
    assert [p.identity() for p in a.pairs] == [p.identity() for p in b.pairs]


def test_top_k_missing_representation():
    f = similarity_function("cosine_features")
    with pytest.raises(DataError, match="missing representation"):
        top_k_exact([(1, 9)], f, {1: np.ones(3)}, k=1, movie_id="m")


def test_ranked_list_sorted_invariant_and_no_duplicates():
    rng = np.random.default_rng(31)
    vectors = {i + 1: rng.normal(size=4) for i in range(40)}
    got = top_k_exact(None, similarity_function("cosine_features"), vectors, k=30, movie_id="m")
    identities = [p.identity() for p in got.pairs]
    assert len(identities) == len(set(identities))
    assert all(p.shot_i < p.shot_j for p in got.pairs)
    # last element has the minimum score; every excluded pair scores <= it
    min_kept = got.pairs[-1].score
    kept_ids = set(identities)
    for pair in full_sort_oracle(vectors, 10**9):
        if pair.identity() not in kept_ids:
            assert pair.score <= min_kept + 1e-15


def test_jsonl_round_trip():
    pairs = (
        ScoredPair("m", 1, 2, 0.75),
        ScoredPair("m", 1, 3, 0.25),
    )
    ranked = RankedList(pairs, k=2)
    again = RankedList.from_jsonl(ranked.to_jsonl(), k=2)
    assert again == ranked


def test_jsonl_round_trip_cross_movie_pairs():
    pairs = tuple(
        sorted(
            [
                ScoredPair("a", 4, 2, 0.9, movie_id_j="b"),
                ScoredPair("a", 1, 2, 0.5),
            ],
            key=ScoredPair.sort_key,
        )
    )
    ranked = RankedList(pairs, k=2)
    again = RankedList.from_jsonl(ranked.to_jsonl(), k=2)
    assert again == ranked
    assert again.pairs[0].second_movie_id == "b"


def test_recall_at_k():
    mk = lambda idx_pairs: RankedList(
        tuple(
            sorted(
                (ScoredPair("m", i, j, 1.0) for i, j in idx_pairs),
                key=ScoredPair.sort_key,
            )
        ),
        k=len(idx_pairs) or 1,
    )
    a = mk([(1, 2), (2, 3)])
    b = mk([(1, 2), (4, 5)])
    assert recall_at_k(a, a) == 1.0
    assert recall_at_k(a, b) == 0.5
    disjoint = mk([(7, 8), (8, 9)])
    assert recall_at_k(a, disjoint) == 0.0
    with pytest.raises(DataError, match="k mismatch"):
        recall_at_k(a, mk([(1, 2)]))


def test_overlap_45_of_50_gives_09():
    base = [(1, i) for i in range(2, 52)]
    other = base[:45] + [(100, 100 + i) for i in range(1, 6)]
    mk = lambda idx_pairs: RankedList(
        tuple(
            sorted(
                (ScoredPair("m", i, j, 1.0) for i, j in idx_pairs),
                key=ScoredPair.sort_key,
            )
        ),
        k=50,
    )
    assert recall_at_k(mk(other), mk(base)) == pytest.approx(0.9)
