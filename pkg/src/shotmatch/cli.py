"""Command-line pipeline: dedup -> score -> top-K -> index -> train -> eval.

Exit codes: 0 success, 2 invalid flags, 3 data errors, 4 internal invariant
violations. All randomness flows from explicit --seed flags, and identical
invocations produce byte-identical artifacts.

Relative input paths are also resolved against $SHOTMATCH_DATA_ROOT when they
do not exist relative to the working directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ann as ann_mod
from .datastore import (
    FeaturePack,
    MoviePack,
    load_labels,
    load_movie_pack,
    write_movie_pack,
)
from .dedup import deduplicate
from .errors import DataError, InternalError
from .evaluation import ExperimentResult, render_report_table, split_movies
from .experiments import (
    PairDataset,
    augment_random_negatives,
    pair_feature_matrices,
    run_experiment,
)
from .learning.checkpoint import load_checkpoint, save_checkpoint
from .learning.metric import MetricHead, train_metric_head
from .learning.models import (
    TrainConfig,
    aggregate,
    train_logistic,
    train_mlp_classifier,
)
from .ranking import RankedList, top_k_exact
from .scoring import similarity_function
from .selfcheck import run_selfcheck


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    root = os.environ.get("SHOTMATCH_DATA_ROOT")
    if root and (Path(root) / p).exists():
        return Path(root) / p
    return p


def _write_text(out: str | None, text: str) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_packs(paths: list[str]) -> dict[str, MoviePack]:
    packs = {}
    for path in paths:
        pack = load_movie_pack(_resolve(path))
        if pack.movie_id in packs:
            raise DataError(f"duplicate movie_id {pack.movie_id!r} across packs")
        packs[pack.movie_id] = pack
    return packs


def _dedup_result(pack: MoviePack, threshold: float, skip: bool):
    indices = pack.shot_indices
    if skip or "dedup" not in pack.features:
        from .dedup import DedupResult

        return DedupResult(pack.movie_id, (), tuple(indices), threshold)
    return deduplicate(pack.features["dedup"], threshold, shot_indices=indices)


def cmd_dedup(args) -> int:
    pack = load_movie_pack(_resolve(args.pack))
    if "dedup" not in pack.features:
        raise DataError("pack has no 'dedup' feature pack")
    result = deduplicate(pack.features["dedup"], args.threshold, shot_indices=pack.shot_indices)
    _write_text(args.out, json.dumps(result.to_json_dict(), indent=2) + "\n")
    return 0


def _representations_for(pack: MoviePack, sim, encoder: str | None, kept: list[int]):
    kind = sim.required_representation
    if kind == "features":
        if not encoder:
            raise DataError("--encoder is required for feature-based similarity")
        fp = pack.features.get(encoder)
        if fp is None:
            raise DataError(f"pack has no {encoder!r} feature pack")
        source = fp.vectors
    else:
        source = {"faces": pack.faces, "masks": pack.masks, "flows": pack.flows}[kind]
    missing = [i for i in kept if i not in source]
    if missing:
        raise DataError(f"missing {kind} representation for shots {missing}")
    return {i: source[i] for i in kept}


def _learned_scorer(checkpoint_path: str):
    model, extra = load_checkpoint(_resolve(checkpoint_path))
    if isinstance(model, MetricHead):
        def scorer(u, v):
            emb = model.transform(np.stack([u, v]))
            emb = emb / np.maximum(np.linalg.norm(emb, axis=1, keepdims=True), 1e-12)
            return float(emb[0] @ emb[1])

        return scorer
    agg = extra.get("agg", "mean")

    def scorer(u, v):
        x = aggregate(agg, u, v).reshape(1, -1)
        return float(model.predict_proba(x)[0, 1])

    return scorer


def _topk_for_sim(pack: MoviePack, sim_name: str, args) -> RankedList:
    scorer = _learned_scorer(args.checkpoint) if sim_name == "learned" else None
    sim = similarity_function(sim_name, scorer)
    kept = _dedup_result(pack, args.threshold, args.no_dedup).kept_indices
    reprs = _representations_for(pack, sim, args.encoder, list(kept))
    return top_k_exact(None, sim, reprs, args.k, movie_id=pack.movie_id)


def cmd_topk(args) -> int:
    pack = load_movie_pack(_resolve(args.pack))
    primary = _topk_for_sim(pack, args.sim, args)
    if not args.union_with:
        _write_text(args.out, primary.to_jsonl())
        return 0
    secondary = _topk_for_sim(pack, args.union_with, args)
    lines = []
    seen = set()
    for source, ranked in ((args.sim, primary), (args.union_with, secondary)):
        for rank, pair in enumerate(ranked.pairs, start=1):
            if pair.identity() in seen:
                continue
            seen.add(pair.identity())
            lines.append(
                json.dumps(
                    {
                        "movie_id": pair.movie_id,
                        "shot_i": pair.shot_i,
                        "shot_j": pair.shot_j,
                        "score": pair.score,
                        "rank": rank,
                        "source": source,
                    }
                )
            )
    _write_text(args.out, "\n".join(lines) + ("\n" if lines else ""))
    return 0


def cmd_index(args) -> int:
    packs = _load_packs(args.packs)
    feature_packs = []
    for movie_id in sorted(packs):
        pack = packs[movie_id]
        fp = pack.features.get(args.encoder)
        if fp is None:
            raise DataError(f"pack {movie_id!r} has no {args.encoder!r} feature pack")
        kept = _dedup_result(pack, args.threshold, args.no_dedup).kept_indices
        feature_packs.append(
            FeaturePack(
                movie_id=movie_id,
                encoder_name=fp.encoder_name,
                dim=fp.dim,
                vectors={i: fp.vectors[i] for i in kept if i in fp.vectors},
            )
        )
    index = ann_mod.build_index(
        feature_packs,
        {"m": args.m, "ef_construction": args.ef_construction, "seed": args.seed},
    )
    ann_mod.save_index(index, args.out)
    return 0


def cmd_query(args) -> int:
    index = ann_mod.load_index(_resolve(args.index))
    params = {"mode": args.mode, "ef_search": args.ef_search}
    ranked = ann_mod.top_k_ann(
        index,
        args.k,
        intra_movie_only=args.intra_movie_only,
        query_params=params,
    )
    if args.measure_recall:
        exact = ann_mod.top_k_ann(
            index,
            args.k,
            intra_movie_only=args.intra_movie_only,
            query_params={"mode": "exhaustive"},
        )
        from .ranking import recall_at_k

        sys.stderr.write(f"recall@{args.k} vs exhaustive: {recall_at_k(ranked, exact):.4f}\n")
    _write_text(args.out, ranked.to_jsonl())
    return 0


def _build_dataset(args) -> PairDataset:
    packs = _load_packs(args.packs)
    pairs = load_labels(_resolve(args.labels), args.task, movie_ids=set(packs))
    return PairDataset(task=args.task, pairs=pairs, packs=packs)


def cmd_train_classifier(args) -> int:
    dataset = _build_dataset(args)
    left, right, labels = pair_feature_matrices(dataset, dataset.pairs, args.encoder)
    from .learning.models import aggregate_rows

    X = aggregate_rows(args.agg, left, right)
    config = TrainConfig(
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    if args.model == "lr":
        model = train_logistic(X, labels, config)
    else:
        model = train_mlp_classifier(X, labels, args.model.split("_")[1].upper(), config)
    save_checkpoint(
        model,
        args.out,
        extra={"task": args.task, "encoder": args.encoder, "agg": args.agg},
    )
    return 0


def cmd_train_metric(args) -> int:
    dataset = _build_dataset(args)
    from .experiments import shot_feature_matrix

    X, triples = shot_feature_matrix(dataset, dataset.pairs, args.encoder)
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.hidden_units is not None:
        overrides["hidden_units"] = args.hidden_units
    if args.output_dim is not None:
        overrides["output_dim"] = args.output_dim
    head = train_metric_head(X, triples, args.task, overrides, seed=args.seed)
    save_checkpoint(head, args.out, extra={"task": args.task, "encoder": args.encoder})
    if args.emit_packs:
        _emit_metric_packs(dataset, head, args.encoder, Path(args.emit_packs))
    return 0


def _emit_metric_packs(dataset: PairDataset, head: MetricHead, encoder: str, out_dir: Path) -> None:
    """Write transformed embeddings as <encoder>.metric feature packs."""
    for movie_id in sorted(dataset.packs):
        pack = dataset.packs[movie_id]
        fp = pack.features.get(encoder)
        if fp is None:
            continue
        indices = fp.shot_indices
        transformed = head.transform(np.stack([fp.vectors[i] for i in indices]))
        new_pack = MoviePack(
            movie_id=movie_id,
            shots=pack.shots,
            features={
                f"{encoder}.metric": FeaturePack(
                    movie_id=movie_id,
                    encoder_name=f"{encoder}.metric",
                    dim=transformed.shape[1],
                    vectors={i: transformed[row] for row, i in enumerate(indices)},
                )
            },
        )
        write_movie_pack(new_pack, out_dir / movie_id)


def _parse_method(spec: str) -> dict:
    if spec == "random":
        return {"kind": "random"}
    if spec in ("h1", "h2", "h3", "h4", "h5"):
        return {"kind": "heuristic", "name": spec}
    parts = spec.split(":")
    if parts[0] == "classifier" and len(parts) == 4:
        return {"kind": "classifier", "encoder": parts[1], "model": parts[2], "agg": parts[3]}
    if parts[0] == "metric" and len(parts) == 2:
        return {"kind": "metric", "encoder": parts[1]}
    raise DataError(
        f"cannot parse method {spec!r}; expected random, h1..h5, "
        f"classifier:ENC:MODEL:AGG, or metric:ENC"
    )


def cmd_eval(args) -> int:
    dataset = _build_dataset(args)
    if args.random_negatives > 0:
        dataset = augment_random_negatives(dataset, args.random_negatives, seed=args.split_seed)
    split = split_movies(sorted(dataset.movie_ids()), seed=args.split_seed)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0, 1, 2, 3, 4]
    method = _parse_method(args.method)
    if args.epochs is not None and method["kind"] in ("classifier", "metric"):
        method["epochs"] = args.epochs
    result = run_experiment(args.task, method, dataset, split, seeds)
    _write_text(args.out, json.dumps(result.to_json_dict(), indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    results = []
    for path in args.inputs:
        doc = json.loads(Path(_resolve(path)).read_text())
        results.append(
            ExperimentResult(
                method=doc["method"],
                task=doc["task"],
                ap_val_per_seed=doc["ap_val_per_seed"],
                ap_val_mean=doc["ap_val_mean"],
                ap_val_std=doc["ap_val_std"],
                ap_test=doc["ap_test"],
                best_seed=None if len(doc["ap_val_per_seed"]) == 1 else -1,
            )
        )
    _write_text(args.out, render_report_table(results) + "\n")
    return 0


def cmd_selfcheck(_args) -> int:
    if not run_selfcheck():
        raise InternalError("selfcheck failed")
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _unit_threshold(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shotmatch",
        description="Rank match-cut candidate shot pairs and reproduce the evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dedup", help="remove near-duplicate shots of one movie pack")
    p.add_argument("--pack", required=True)
    p.add_argument("--threshold", type=_unit_threshold, default=0.8)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_dedup)

    p = sub.add_parser("topk", help="rank shot pairs of one movie with a similarity function")
    p.add_argument("--pack", required=True)
    p.add_argument("--sim", required=True, help="cosine_features, h1..h5, named sims, or learned")
    p.add_argument("--encoder", help="feature pack name for feature-based sims")
    p.add_argument("--checkpoint", help="model checkpoint for --sim learned")
    p.add_argument("--k", type=_positive_int, default=50)
    p.add_argument("--threshold", type=_unit_threshold, default=0.8)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--union-with", help="second sim; output the union of both top-K sets")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_topk)

    p = sub.add_parser("index", help="build an ANN index over one or more packs")
    p.add_argument("--packs", nargs="+", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=_unit_threshold, default=0.8)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=ann_mod.DEFAULT_BUILD_PARAMS["m"])
    p.add_argument(
        "--ef-construction", type=int, default=ann_mod.DEFAULT_BUILD_PARAMS["ef_construction"]
    )
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("query", help="global top-K pairs from an ANN index")
    p.add_argument("--index", required=True)
    p.add_argument("--k", type=_positive_int, default=50)
    p.add_argument("--mode", choices=["ann", "exhaustive"], default="ann")
    p.add_argument("--ef-search", type=int, default=ann_mod.DEFAULT_QUERY_PARAMS["ef_search"])
    p.add_argument("--intra-movie-only", action="store_true")
    p.add_argument("--measure-recall", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("train-classifier", help="train a pair classifier on labeled pairs")
    p.add_argument("--labels", required=True)
    p.add_argument("--task", choices=["frame", "motion"], required=True)
    p.add_argument("--packs", nargs="+", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--model", choices=["lr", "mlp_s", "mlp_m", "mlp_l"], default="lr")
    p.add_argument("--agg", choices=["cat", "mean", "diff"], default="mean")
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--batch-size", type=int, default=200)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_classifier)

    p = sub.add_parser("train-metric", help="train the contrastive metric head")
    p.add_argument("--labels", required=True)
    p.add_argument("--task", choices=["frame", "motion"], required=True)
    p.add_argument("--packs", nargs="+", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--hidden-units", type=int)
    p.add_argument("--output-dim", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-packs", help="also write <encoder>.metric packs here")
    p.set_defaults(fn=cmd_train_metric)

    p = sub.add_parser("eval", help="run the seeded split/train/eval protocol for one method")
    p.add_argument("--labels", required=True)
    p.add_argument("--task", choices=["frame", "motion"], required=True)
    p.add_argument("--packs", nargs="+", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--random-negatives", type=int, default=0, help="per-title count; 0 disables")
    p.add_argument("--epochs", type=int, help="override training epochs for learned methods")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="render experiment result JSON files as a table")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("selfcheck", help="run the embedded oracle suite")
    p.set_defaults(fn=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DataError as exc:
        sys.stderr.write(json.dumps({"error": "data", "message": str(exc)}) + "\n")
        return 3
    except InternalError as exc:
        sys.stderr.write(json.dumps({"error": "internal", "message": str(exc)}) + "\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
