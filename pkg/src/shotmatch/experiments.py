"""Seeded experiment protocol over labeled pairs.

Assembles pair datasets from movie packs, optionally appends random negative
pairs per title, trains scorers per seed on the train split, selects the
best-validation model, and reports its test AP.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .datastore import LabeledPair, MoviePack
from .errors import DataError
from .evaluation import (
    ExperimentResult,
    SplitAssignment,
    average_precision,
    single_value_result,
    summarize_seeded_runs,
)
from .learning.metric import MetricHead, train_metric_head
from .learning.models import (
    TrainConfig,
    aggregate_rows,
    train_logistic,
    train_mlp_classifier,
)
from .scoring import HEURISTIC_ALIASES, score_pair, similarity_function

CLASSIFIER_MODELS = ("lr", "mlp_s", "mlp_m", "mlp_l")


@dataclass
class PairDataset:
    """Labeled pairs for one task plus the packs that hold representations."""

    task: str
    pairs: list[LabeledPair]
    packs: dict[str, MoviePack]

    def movie_ids(self) -> set[str]:
        return set(self.packs)

    def pairs_in(self, split: SplitAssignment, part: str) -> list[LabeledPair]:
        movies = set(getattr(split, part))
        return [p for p in self.pairs if p.movie_id in movies]


def augment_random_negatives(
    dataset: PairDataset, per_title: int = 50, seed: int = 0
) -> PairDataset:
    """Append per-title uniformly sampled non-annotated pairs as negatives."""
    rng = np.random.default_rng(seed)
    annotated = {(p.movie_id, p.shot_i, p.shot_j) for p in dataset.pairs}
    extra: list[LabeledPair] = []
    for movie_id in sorted(dataset.packs):
        shots = dataset.packs[movie_id].shot_indices
        candidates = [
            (i, j)
            for i, j in itertools.combinations(sorted(shots), 2)
            if (movie_id, i, j) not in annotated
        ]
        if not candidates:
            continue
        take = min(per_title, len(candidates))
        chosen = rng.choice(len(candidates), size=take, replace=False)
        for pos in sorted(int(c) for c in chosen):
            i, j = candidates[pos]
            extra.append(
                LabeledPair(
                    movie_id=movie_id,
                    shot_i=i,
                    shot_j=j,
                    task=dataset.task,
                    votes=(),
                    majority=False,
                    source="random_negative",
                )
            )
    return PairDataset(task=dataset.task, pairs=dataset.pairs + extra, packs=dataset.packs)


def _representation(pack: MoviePack, kind: str, encoder: str | None, shot: int):
    if kind == "features":
        fp = pack.features.get(encoder or "")
        if fp is None or shot not in fp.vectors:
            raise DataError(f"missing {encoder!r} vector for shot {shot} of {pack.movie_id}")
        return fp.vectors[shot]
    store = {"faces": pack.faces, "masks": pack.masks, "flows": pack.flows}[kind]
    if shot not in store:
        raise DataError(f"missing {kind} representation for shot {shot} of {pack.movie_id}")
    return store[shot]


def heuristic_scores(dataset: PairDataset, pairs: list[LabeledPair], name: str) -> np.ndarray:
    """Score labeled pairs with one of the heuristic similarity functions."""
    if name not in HEURISTIC_ALIASES and name not in ("cosine_features",):
        raise DataError(f"unknown heuristic {name!r}")
    f = similarity_function(name)
    scores = np.empty(len(pairs))
    for row, p in enumerate(pairs):
        pack = dataset.packs.get(p.movie_id)
        if pack is None:
            raise DataError(f"no pack loaded for movie {p.movie_id!r}")
        ri = _representation(pack, f.required_representation, None, p.shot_i)
        rj = _representation(pack, f.required_representation, None, p.shot_j)
        scores[row] = score_pair(f, ri, rj)
    return scores


def pair_feature_matrices(
    dataset: PairDataset, pairs: list[LabeledPair], encoder: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(left, right, labels) matrices for the given pairs under an encoder."""
    left, right, labels = [], [], []
    for p in pairs:
        pack = dataset.packs.get(p.movie_id)
        if pack is None:
            raise DataError(f"no pack loaded for movie {p.movie_id!r}")
        left.append(_representation(pack, "features", encoder, p.shot_i))
        right.append(_representation(pack, "features", encoder, p.shot_j))
        labels.append(p.majority)
    if not left:
        raise DataError("no pairs to featurize")
    return np.stack(left), np.stack(right), np.asarray(labels, dtype=bool)


def shot_feature_matrix(dataset: PairDataset, pairs: list[LabeledPair], encoder: str):
    """Feature matrix over the shots referenced by ``pairs`` plus local pair rows."""
    keys: list[tuple[str, int]] = []
    seen = set()
    for p in pairs:
        for shot in (p.shot_i, p.shot_j):
            key = (p.movie_id, shot)
            if key not in seen:
                seen.add(key)
                keys.append(key)
    keys.sort()
    local = {key: row for row, key in enumerate(keys)}
    rows = []
    for m, s in keys:
        pack = dataset.packs.get(m)
        if pack is None:
            raise DataError(f"no pack loaded for movie {m!r}")
        rows.append(_representation(pack, "features", encoder, s))
    X = np.stack(rows)
    triples = np.array(
        [
            [local[(p.movie_id, p.shot_i)], local[(p.movie_id, p.shot_j)], int(p.majority)]
            for p in pairs
        ],
        dtype=np.int64,
    )
    return X, triples


def run_experiment(
    task: str,
    method: dict,
    dataset: PairDataset,
    split: SplitAssignment,
    seeds: list[int] = (0, 1, 2, 3, 4),
) -> ExperimentResult:
    """Train/evaluate one method under the movie-level split protocol.

    ``method`` kinds:
      {"kind": "random"}
      {"kind": "heuristic", "name": "h1".."h5"}
      {"kind": "classifier", "encoder": ..., "model": lr|mlp_s|mlp_m|mlp_l,
       "agg": cat|mean|diff, ...TrainConfig overrides}
      {"kind": "metric", "encoder": ..., ...metric overrides}
    """
    if task != dataset.task:
        raise DataError(f"dataset is for task {dataset.task!r}, requested {task!r}")
    val_pairs = dataset.pairs_in(split, "val")
    test_pairs = dataset.pairs_in(split, "test")
    train_pairs = dataset.pairs_in(split, "train")
    if not train_pairs or not val_pairs or not test_pairs:
        raise DataError("every split part needs at least one pair")
    y_val = np.array([p.majority for p in val_pairs], dtype=bool)
    y_test = np.array([p.majority for p in test_pairs], dtype=bool)

    kind = method.get("kind")
    if kind == "random":
        rng = np.random.default_rng(int(method.get("seed", seeds[0] if seeds else 0)))
        ap_val = average_precision(y_val, rng.random(len(val_pairs)))
        ap_test = average_precision(y_test, rng.random(len(test_pairs)))
        return single_value_result("random", task, ap_val, ap_test)

    if kind == "heuristic":
        name = method["name"]
        ap_val = average_precision(y_val, heuristic_scores(dataset, val_pairs, name))
        ap_test = average_precision(y_test, heuristic_scores(dataset, test_pairs, name))
        return single_value_result(name, task, ap_val, ap_test)

    if kind == "classifier":
        encoder = method["encoder"]
        model_name = method.get("model", "lr")
        agg = method.get("agg", "mean")
        if model_name not in CLASSIFIER_MODELS:
            raise DataError(f"unknown classifier model {model_name!r}")
        li, ri, y_train = pair_feature_matrices(dataset, train_pairs, encoder)
        lv, rv, _ = pair_feature_matrices(dataset, val_pairs, encoder)
        lt, rt, _ = pair_feature_matrices(dataset, test_pairs, encoder)
        X_train = aggregate_rows(agg, li, ri)
        X_val = aggregate_rows(agg, lv, rv)
        X_test = aggregate_rows(agg, lt, rt)
        runs = []
        models = {}
        for seed in seeds:
            config = TrainConfig(
                learning_rate=float(method.get("learning_rate", 1e-3)),
                weight_decay=float(method.get("weight_decay", 0.0)),
                batch_size=int(method.get("batch_size", 200)),
                epochs=int(method.get("epochs", 200)),
                seed=int(seed),
            )
            if model_name == "lr":
                model = train_logistic(X_train, y_train, config)
            else:
                arch = model_name.split("_")[1].upper()
                model = train_mlp_classifier(X_train, y_train, arch, config)
            ap_val = average_precision(y_val, model.predict_proba(X_val)[:, 1])
            models[seed] = model
            runs.append((seed, ap_val, np.nan))
        best_seed = runs[int(np.argmax([v for _, v, _ in runs]))][0]
        ap_test = average_precision(y_test, models[best_seed].predict_proba(X_test)[:, 1])
        runs = [(s, v, ap_test if s == best_seed else np.nan) for s, v, _ in runs]
        label = f"{encoder}+{model_name}+{agg}"
        result = summarize_seeded_runs(label, task, runs)
        result.ap_test = ap_test
        result.best_seed = best_seed
        return result

    if kind == "metric":
        encoder = method["encoder"]
        overrides = {
            k: method[k]
            for k in (
                "hidden_units",
                "output_dim",
                "temperature",
                "learning_rate",
                "weight_decay",
                "epochs",
                "batch_size",
            )
            if k in method
        }
        X_train, trip_train = shot_feature_matrix(dataset, train_pairs, encoder)
        X_val, trip_val = shot_feature_matrix(dataset, val_pairs, encoder)
        X_test, trip_test = shot_feature_matrix(dataset, test_pairs, encoder)
        runs = []
        heads: dict[int, MetricHead] = {}
        for seed in seeds:
            head = train_metric_head(X_train, trip_train, task, overrides, seed=int(seed))
            scores = head.score_pairs(X_val, trip_val[:, :2])
            runs.append((seed, average_precision(y_val, scores), np.nan))
            heads[seed] = head
        best_seed = runs[int(np.argmax([v for _, v, _ in runs]))][0]
        ap_test = average_precision(y_test, heads[best_seed].score_pairs(X_test, trip_test[:, :2]))
        runs = [(s, v, ap_test if s == best_seed else np.nan) for s, v, _ in runs]
        result = summarize_seeded_runs(f"{encoder}+metric", task, runs)
        result.ap_test = ap_test
        result.best_seed = best_seed
        return result

    raise DataError(f"unknown method kind {kind!r}")
