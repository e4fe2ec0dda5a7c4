"""Similarity functions over shot representations.

Covers the heuristic scorers: face-count equality, union-mask IoU,
instance-level IoU with optimal instance association, and flow-field cosine,
plus cosine over feature vectors and dispatch for learned scorers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .assignment import lexicographic_min_matching
from .datastore import FaceCount, FlowSummary, MaskSet
from .dedup import cosine
from .errors import DataError

# name -> representation kind expected by score_pair
SIMILARITY_FUNCTIONS = {
    "cosine_features": "features",
    "face_count_equal": "faces",
    "mask_iou": "masks",
    "instance_iou": "masks",
    "flow_cosine": "flows",
    "learned": "features",
}

# heuristic aliases: h4 and h5 differ only in which optical-flow estimator
# produced the stored flow summaries, so both map onto flow_cosine
HEURISTIC_ALIASES = {
    "h1": "face_count_equal",
    "h2": "mask_iou",
    "h3": "instance_iou",
    "h4": "flow_cosine",
    "h5": "flow_cosine",
}


@dataclass(frozen=True)
class SimilarityFunction:
    """A named scorer plus the representation kind it consumes.

    ``scorer`` is only set for learned similarity functions; it maps two
    feature vectors to a real score.
    """

    name: str
    required_representation: str
    scorer: Callable[[np.ndarray, np.ndarray], float] | None = None

    def __post_init__(self):
        if self.name not in SIMILARITY_FUNCTIONS:
            raise DataError(f"unknown similarity function {self.name!r}")
        expected = SIMILARITY_FUNCTIONS[self.name]
        if self.required_representation != expected:
            raise DataError(
                f"{self.name} requires representation {expected!r}, "
                f"got {self.required_representation!r}"
            )


def similarity_function(name: str, scorer=None) -> SimilarityFunction:
    """Look up a similarity function by name or heuristic alias (h1..h5)."""
    resolved = HEURISTIC_ALIASES.get(name, name)
    if resolved not in SIMILARITY_FUNCTIONS:
        raise DataError(f"unknown similarity function {name!r}")
    return SimilarityFunction(resolved, SIMILARITY_FUNCTIONS[resolved], scorer)


def _count_of(x) -> int:
    return x.count if isinstance(x, FaceCount) else int(x)


def face_count_score(a, b) -> float:
    """1.0 iff both shots have the same number of faces (including zero)."""
    return 1.0 if _count_of(a) == _count_of(b) else 0.0


def _check_mask_dims(a: MaskSet, b: MaskSet) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise DataError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def mask_iou(a: MaskSet, b: MaskSet) -> float:
    """IoU of the two union masks; 0 if either union is empty."""
    _check_mask_dims(a, b)
    ua, ub = a.union(), b.union()
    if not ua.any() or not ub.any():
        return 0.0
    inter = int(np.count_nonzero(ua & ub))
    union = int(np.count_nonzero(ua | ub))
    return inter / union


@dataclass(frozen=True)
class Assignment:
    """Optimal instance association between two mask sets.

    ``matched_pairs`` holds (x, y) instance indices (0-based) into the two
    sets, exactly min(u_a, u_b) of them; ``total_cost`` is the summed
    negative-IoU cost of the matching.
    """

    matched_pairs: tuple[tuple[int, int], ...]
    total_cost: float


def _instance_cost_matrix(a: MaskSet, b: MaskSet) -> list[list[Fraction]]:
    """Exact negative-IoU costs between all instance pairs."""
    flat_a = a.instances.reshape(a.instance_count, -1)
    flat_b = b.instances.reshape(b.instance_count, -1)
    inter = flat_a.astype(np.int64) @ flat_b.T.astype(np.int64)
    area_a = flat_a.sum(axis=1)
    area_b = flat_b.sum(axis=1)
    cost = []
    for x in range(a.instance_count):
        row = []
        for y in range(b.instance_count):
            union = int(area_a[x] + area_b[y] - inter[x, y])
            if union == 0:
                row.append(Fraction(0))
            else:
                row.append(Fraction(-int(inter[x, y]), union))
        cost.append(row)
    return cost


def assign_instances(a: MaskSet, b: MaskSet) -> Assignment:
    """Minimum-cost one-to-one instance matching under cost = -IoU.

    Among equal-cost matchings the lexicographically smallest (x, y) pair
    list is returned; zero-IoU pairs stay in the matching (they contribute
    nothing to the instance-IoU numerator).
    """
    _check_mask_dims(a, b)
    if a.instance_count == 0 or b.instance_count == 0:
        return Assignment((), 0.0)
    cost = _instance_cost_matrix(a, b)
    pairs, total = lexicographic_min_matching(cost)
    return Assignment(tuple(pairs), float(total))


def instance_iou(a: MaskSet, b: MaskSet) -> float:
    """Summed intersections of optimally associated instances over the union
    of the two union masks; 0 when either set has no instances or an empty
    union."""
    _check_mask_dims(a, b)
    if a.instance_count == 0 or b.instance_count == 0:
        return 0.0
    ua, ub = a.union(), b.union()
    denom = int(np.count_nonzero(ua | ub))
    if denom == 0:
        return 0.0
    matched = assign_instances(a, b).matched_pairs
    numer = 0
    for x, y in matched:
        numer += int(np.count_nonzero(a.instances[x] & b.instances[y]))
    # overlapping instances within one set could push the ratio past 1;
    # clamp to honor the [0, 1] contract
    return min(numer / denom, 1.0)


def flow_cosine(a: FlowSummary, b: FlowSummary) -> float:
    """Cosine of the flattened flow fields (row-major, dx before dy per pixel)."""
    if (a.width, a.height) != (b.width, b.height):
        raise DataError(
            f"flow dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    return cosine(a.field.ravel(order="C"), b.field.ravel(order="C"))


def score_pair(f: SimilarityFunction, repr_i, repr_j) -> float:
    """Dispatch a similarity function over a pair of representations."""
    if f.name == "cosine_features":
        return cosine(_feature_vector(repr_i), _feature_vector(repr_j))
    if f.name == "face_count_equal":
        _require(repr_i, (FaceCount, int, np.integer), f)
        _require(repr_j, (FaceCount, int, np.integer), f)
        return face_count_score(repr_i, repr_j)
    if f.name == "mask_iou":
        _require(repr_i, MaskSet, f)
        _require(repr_j, MaskSet, f)
        return mask_iou(repr_i, repr_j)
    if f.name == "instance_iou":
        _require(repr_i, MaskSet, f)
        _require(repr_j, MaskSet, f)
        return instance_iou(repr_i, repr_j)
    if f.name == "flow_cosine":
        _require(repr_i, FlowSummary, f)
        _require(repr_j, FlowSummary, f)
        return flow_cosine(repr_i, repr_j)
    if f.name == "learned":
        if f.scorer is None:
            raise DataError("learned similarity function has no scorer attached")
        return float(f.scorer(_feature_vector(repr_i), _feature_vector(repr_j)))
    raise DataError(f"unknown similarity function {f.name!r}")  # pragma: no cover


def _feature_vector(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return x
    if isinstance(x, (list, tuple)):
        return np.asarray(x, dtype=np.float64)
    raise DataError(f"expected a feature vector, got {type(x).__name__}")


def _require(value, types, f: SimilarityFunction) -> None:
    if not isinstance(value, types):
        raise DataError(
            f"{f.name} expected {f.required_representation} representation, "
            f"got {type(value).__name__}"
        )
