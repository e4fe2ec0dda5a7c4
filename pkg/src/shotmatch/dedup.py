"""Near-duplicate shot removal via cosine similarity of center-frame embeddings.

A shot j is removed when any earlier shot i (i < j, removed or not) has
cosine similarity >= threshold with it. This is the literal set-comprehension
definition: a shot that was itself removed can still eliminate a later one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datastore import FeaturePack
from .errors import DataError
from .validation import as_vector, check_same_length


@dataclass(frozen=True)
class DedupResult:
    movie_id: str
    removed_indices: tuple[int, ...]
    kept_indices: tuple[int, ...]
    threshold: float

    def __post_init__(self):
        removed, kept = set(self.removed_indices), set(self.kept_indices)
        if removed & kept:
            raise DataError("removed and kept shot sets overlap")

    def to_json_dict(self) -> dict:
        return {
            "movie_id": self.movie_id,
            "threshold": self.threshold,
            "removed": list(self.removed_indices),
            "kept": list(self.kept_indices),
        }


def cosine(u, v) -> float:
    """Cosine similarity in [-1, 1]; 0 if either vector has zero norm."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    check_same_length(u, v)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _normalized_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


def deduplicate(
    pack: FeaturePack, threshold: float = 0.8, shot_indices: list[int] | None = None
) -> DedupResult:
    """Partition a movie's shots into kept and removed near-duplicates.

    ``shot_indices`` is the movie's full shot list; when given, the pack must
    cover every shot. Default threshold 0.8.
    """
    if not 0.0 < threshold <= 1.0:
        raise DataError(f"threshold must be in (0, 1], got {threshold}")
    if shot_indices is not None:
        missing = sorted(set(shot_indices) - set(pack.vectors))
        if missing:
            raise DataError(f"missing embedding for shots {missing}")
        indices = sorted(shot_indices)
    else:
        indices = pack.shot_indices
    if not indices:
        return DedupResult(pack.movie_id, (), (), threshold)

    vecs = _normalized_rows(np.stack([pack.vectors[i] for i in indices]))
    sims = np.clip(vecs @ vecs.T, -1.0, 1.0)
    # strict upper triangle: sims[i, j] with i < j
    dup_mask = np.triu(sims >= threshold, k=1).any(axis=0)

    removed = tuple(idx for idx, dup in zip(indices, dup_mask) if dup)
    kept = tuple(idx for idx, dup in zip(indices, dup_mask) if not dup)
    return DedupResult(pack.movie_id, removed, kept, threshold)
