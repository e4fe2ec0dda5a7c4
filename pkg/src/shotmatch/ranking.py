"""Pair enumeration, exact top-K extraction, and recall instrumentation.

Ranked lists order pairs by score descending with deterministic tie-breaking
by ascending (movie, shot_i, shot_j), so identical inputs always produce
identical rankings.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .datastore import FeaturePack
from .dedup import DedupResult
from .errors import DataError
from .scoring import SimilarityFunction, score_pair


@dataclass(frozen=True)
class ScoredPair:
    """A scored shot pair; ``movie_id_j`` is only set for cross-movie pairs."""

    movie_id: str
    shot_i: int
    shot_j: int
    score: float
    movie_id_j: str | None = None

    def __post_init__(self):
        same_movie = self.movie_id_j is None or self.movie_id_j == self.movie_id
        if same_movie and self.shot_i >= self.shot_j:
            raise DataError(f"pair must have shot_i < shot_j, got ({self.shot_i}, {self.shot_j})")

    @property
    def second_movie_id(self) -> str:
        return self.movie_id if self.movie_id_j is None else self.movie_id_j

    def identity(self) -> tuple[str, int, str, int]:
        return (self.movie_id, self.shot_i, self.second_movie_id, self.shot_j)

    def sort_key(self):
        return (-self.score, self.movie_id, self.shot_i, self.second_movie_id, self.shot_j)


class _HeapEntry:
    """Orders bounded-heap entries so the heap minimum is the worst kept pair:
    lowest score first, then largest identity."""

    __slots__ = ("pair",)

    def __init__(self, pair: ScoredPair):
        self.pair = pair

    def __lt__(self, other: "_HeapEntry") -> bool:
        a, b = self.pair, other.pair
        if a.score != b.score:
            return a.score < b.score
        return a.identity() > b.identity()


class BoundedTopK:
    """Keeps the k best ScoredPairs seen so far in O(k) memory."""

    def __init__(self, k: int):
        if k < 1:
            raise DataError(f"k must be >= 1, got {k}")
        self.k = k
        self._heap: list[_HeapEntry] = []

    def push(self, pair: ScoredPair) -> None:
        entry = _HeapEntry(pair)
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, entry)
        elif self._heap[0] < entry:
            heapq.heapreplace(self._heap, entry)

    def worst_score(self) -> float:
        return self._heap[0].pair.score if len(self._heap) == self.k else -np.inf

    def __len__(self) -> int:
        return len(self._heap)

    def ranked(self) -> list[ScoredPair]:
        return sorted((e.pair for e in self._heap), key=ScoredPair.sort_key)


@dataclass(frozen=True)
class RankedList:
    """Top-k scored pairs in canonical order."""

    pairs: tuple[ScoredPair, ...]
    k: int

    def __post_init__(self):
        keys = [p.sort_key() for p in self.pairs]
        if keys != sorted(keys):
            raise DataError("ranked list is not in canonical order")
        if len(self.pairs) > self.k:
            raise DataError(f"ranked list holds {len(self.pairs)} pairs but k={self.k}")

    def identities(self) -> set[tuple[str, int, str, int]]:
        return {p.identity() for p in self.pairs}

    def to_jsonl(self) -> str:
        lines = []
        for rank, p in enumerate(self.pairs, start=1):
            row = {
                "movie_id": p.movie_id,
                "shot_i": p.shot_i,
                "shot_j": p.shot_j,
                "score": p.score,
                "rank": rank,
            }
            if p.movie_id_j is not None and p.movie_id_j != p.movie_id:
                row["movie_id_j"] = p.movie_id_j
            lines.append(json.dumps(row))
        return "\n".join(lines) + ("\n" if lines else "")

    @staticmethod
    def from_jsonl(text: str, k: int | None = None) -> "RankedList":
        pairs = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            pairs.append(
                ScoredPair(
                    movie_id=row["movie_id"],
                    shot_i=int(row["shot_i"]),
                    shot_j=int(row["shot_j"]),
                    score=float(row["score"]),
                    movie_id_j=row.get("movie_id_j"),
                )
            )
        return RankedList(tuple(pairs), k if k is not None else max(len(pairs), 1))


def enumerate_pairs(kept) -> Iterator[tuple[int, int]]:
    """All unique (i, j) pairs with i < j over the kept shots, in
    lexicographic order. Accepts a DedupResult or any iterable of indices."""
    indices = kept.kept_indices if isinstance(kept, DedupResult) else kept
    return itertools.combinations(sorted(indices), 2)


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def top_k_exact(
    pairs: Iterable[tuple[int, int]] | None,
    f: SimilarityFunction,
    reprs: Mapping[int, object] | FeaturePack,
    k: int,
    movie_id: str = "",
) -> RankedList:
    """Score pairs and keep the global top-k with a bounded heap.

    ``pairs=None`` enumerates all unique pairs over the representations; for
    cosine over feature vectors that path scores whole rows vectorized, which
    is the intended route at scale. Result order and content equal a full
    sort of all scored pairs truncated to k.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if isinstance(reprs, FeaturePack):
        if not movie_id:
            movie_id = reprs.movie_id
        mapping: Mapping[int, object] = reprs.vectors
    else:
        mapping = reprs

    if pairs is None and f.name == "cosine_features":
        return _top_k_cosine_all_pairs(mapping, k, movie_id)

    if pairs is None:
        pairs = enumerate_pairs(mapping.keys())

    best = BoundedTopK(k)
    for i, j in pairs:
        if i not in mapping or j not in mapping:
            raise DataError(f"missing representation for shot {i if i not in mapping else j}")
        score = score_pair(f, mapping[i], mapping[j])
        best.push(ScoredPair(movie_id, i, j, float(score)))
    return RankedList(tuple(best.ranked()), k)


def _top_k_cosine_all_pairs(vectors: Mapping[int, np.ndarray], k: int, movie_id: str) -> RankedList:
    indices = sorted(vectors)
    if len(indices) < 2:
        return RankedList((), k)
    mat = np.stack([np.asarray(vectors[i], dtype=np.float64) for i in indices])
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    mat = mat / np.where(norms == 0.0, 1.0, norms)
    best = BoundedTopK(k)
    for row in range(len(indices) - 1):
        sims = np.clip(mat[row + 1 :] @ mat[row], -1.0, 1.0)
        floor = best.worst_score()
        # candidates scoring below the current worst kept pair can never enter
        for offset in np.nonzero(sims >= floor)[0] if len(best) == k else range(len(sims)):
            best.push(
                ScoredPair(movie_id, indices[row], indices[row + 1 + offset], float(sims[offset]))
            )
    return RankedList(tuple(best.ranked()), k)


def recall_at_k(approx: RankedList, exact: RankedList) -> float:
    """Fraction of the exact top-k pair identities present in the approximate
    list (scores ignored)."""
    if approx.k != exact.k:
        raise DataError(f"k mismatch: {approx.k} vs {exact.k}")
    return len(approx.identities() & exact.identities()) / approx.k
