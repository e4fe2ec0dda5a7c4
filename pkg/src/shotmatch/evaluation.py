"""Average precision, movie-level splits, the random baseline, and the
seeded experiment protocol.

AP uses a deterministic stable sort: ties are broken by ascending original
index rather than interpolated, so scorers that emit many equal values (such
as face-count equality) still rank reproducibly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


def average_precision(labels, scores) -> float:
    """Mean of precision at each positive's rank, sorted by score descending
    (ties by ascending original index)."""
    y = np.asarray(labels, dtype=bool).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.shape != s.shape:
        raise DataError(f"labels and scores have mismatched lengths {y.shape} vs {s.shape}")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DataError("average precision requires at least one positive label")
    order = np.argsort(-s, kind="stable")
    sorted_y = y[order]
    cum_pos = np.cumsum(sorted_y)
    ranks = np.nonzero(sorted_y)[0] + 1
    precisions = cum_pos[ranks - 1] / ranks
    return float(precisions.sum() / n_pos)


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        parts = [set(self.train), set(self.val), set(self.test)]
        if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
            raise DataError("split parts must be disjoint")

    def all_movies(self) -> set[str]:
        return set(self.train) | set(self.val) | set(self.test)

    def part_of(self, movie_id: str) -> str:
        if movie_id in self.train:
            return "train"
        if movie_id in self.val:
            return "val"
        if movie_id in self.test:
            return "test"
        raise DataError(f"movie {movie_id!r} is in no split part")


def split_movies(
    movie_ids, ratios: tuple[float, float, float] = (60, 20, 20), seed: int = 0
) -> SplitAssignment:
    """Seeded shuffle then largest-remainder partition by the given ratios.

    100 movies at (60, 20, 20) split exactly 60/20/20. Raises if any part
    would be empty.
    """
    ids = sorted(set(movie_ids))
    if len(ids) < 3:
        raise DataError(f"need at least 3 movies to split, got {len(ids)}")
    total = float(sum(ratios))
    if total <= 0 or any(r < 0 for r in ratios):
        raise DataError(f"invalid split ratios {ratios}")
    n = len(ids)
    exact = [n * r / total for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    remainders = [e - c for e, c in zip(exact, counts)]
    for _ in range(n - sum(counts)):
        idx = int(np.argmax(remainders))
        counts[idx] += 1
        remainders[idx] = -1.0
    if any(c == 0 for c in counts):
        raise DataError(f"too few movies ({n}) for ratios {ratios}: a part would be empty")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(n)]
    train = tuple(order[: counts[0]])
    val = tuple(order[counts[0] : counts[0] + counts[1]])
    test = tuple(order[counts[0] + counts[1] :])
    return SplitAssignment(train=train, val=val, test=test)


def random_baseline_ap(n: int, p: float, rounds: int, seed: int = 0) -> float:
    """Mean AP of uniform random scores against round(p*n) positives."""
    if not 0.0 < p < 1.0:
        raise DataError(f"prevalence must lie strictly between 0 and 1, got {p}")
    if n < 2 or rounds < 1:
        raise DataError("n must be >= 2 and rounds >= 1")
    n_pos = int(round(p * n))
    if n_pos < 1 or n_pos >= n:
        raise DataError(f"round(p*n)={n_pos} leaves no positives or no negatives")
    labels = np.zeros(n, dtype=bool)
    labels[:n_pos] = True
    rng = np.random.default_rng(seed)
    values = [average_precision(labels, rng.random(n)) for _ in range(rounds)]
    return float(np.mean(values))


@dataclass
class ExperimentResult:
    """Validation AP per seed plus the test AP of the best-validation model."""

    method: str
    task: str
    ap_val_per_seed: list[float]
    ap_val_mean: float
    ap_val_std: float
    ap_test: float
    best_seed: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "method": self.method,
            "ap_val_mean": self.ap_val_mean,
            "ap_val_std": self.ap_val_std,
            "ap_val_per_seed": self.ap_val_per_seed,
            "ap_test": self.ap_test,
        }


def summarize_seeded_runs(
    method: str, task: str, per_seed: list[tuple[int, float, float]]
) -> ExperimentResult:
    """Reduce (seed, ap_val, ap_test) runs: report mean/std of val AP and the
    test AP of the argmax-val seed (computed once, from that model)."""
    if not per_seed:
        raise DataError("no runs to summarize")
    vals = [v for _, v, _ in per_seed]
    best_pos = int(np.argmax(vals))
    return ExperimentResult(
        method=method,
        task=task,
        ap_val_per_seed=vals,
        ap_val_mean=float(np.mean(vals)),
        ap_val_std=float(np.std(vals)),
        ap_test=per_seed[best_pos][2],
        best_seed=per_seed[best_pos][0],
    )


def single_value_result(method: str, task: str, ap_val: float, ap_test: float) -> ExperimentResult:
    """Heuristics have no seed variation; they report one value, no std."""
    return ExperimentResult(
        method=method,
        task=task,
        ap_val_per_seed=[ap_val],
        ap_val_mean=ap_val,
        ap_val_std=0.0,
        ap_test=ap_test,
        best_seed=None,
    )


def render_report_table(results: list[ExperimentResult]) -> str:
    """Plain-text table, one row per method."""
    header = f"{'task':<8} {'method':<24} {'AP_val':>18} {'AP_test':>9}"
    lines = [header, "-" * len(header)]
    for r in results:
        if r.best_seed is None and len(r.ap_val_per_seed) == 1:
            val = f"{r.ap_val_mean:.3f}"
        else:
            val = f"{r.ap_val_mean:.3f}+-{r.ap_val_std:.3f}"
        lines.append(f"{r.task:<8} {r.method:<24} {val:>18} {r.ap_test:>9.3f}")
    return "\n".join(lines)
