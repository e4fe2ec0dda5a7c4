"""shotmatch: rank match-cut candidate shot pairs from per-shot representations.

The pipeline: load movie packs, drop near-duplicate shots, score all unique
shot pairs with heuristic or learned similarity functions, and return the
top-K pairs -- exactly, or through an ANN index at cross-title scale. A
training and evaluation harness covers the classification and
metric-learning experiments.
"""

from .ann import AnnIndex, build_index, load_index, save_index, top_k_ann
from .datastore import (
    FaceCount,
    FeaturePack,
    FlowSummary,
    LabeledPair,
    MaskSet,
    MoviePack,
    ShotRecord,
    load_labels,
    load_movie_pack,
    write_labels,
    write_movie_pack,
)
from .dedup import DedupResult, cosine, deduplicate
from .errors import DataError, InternalError
from .evaluation import (
    ExperimentResult,
    SplitAssignment,
    average_precision,
    random_baseline_ap,
    split_movies,
)
from .experiments import PairDataset, augment_random_negatives, run_experiment
from .flow import FlowField, FrameGray, average_flow, block_matching_flow, shot_flow_summary
from .ranking import (
    RankedList,
    ScoredPair,
    enumerate_pairs,
    recall_at_k,
    top_k_exact,
)
from .scoring import (
    Assignment,
    SimilarityFunction,
    assign_instances,
    face_count_score,
    flow_cosine,
    instance_iou,
    mask_iou,
    score_pair,
    similarity_function,
)

__version__ = "0.1.0"

__all__ = [
    "AnnIndex",
    "Assignment",
    "DataError",
    "DedupResult",
    "ExperimentResult",
    "FaceCount",
    "FeaturePack",
    "FlowField",
    "FlowSummary",
    "FrameGray",
    "InternalError",
    "LabeledPair",
    "MaskSet",
    "MoviePack",
    "PairDataset",
    "RankedList",
    "ScoredPair",
    "ShotRecord",
    "SimilarityFunction",
    "SplitAssignment",
    "assign_instances",
    "augment_random_negatives",
    "average_flow",
    "average_precision",
    "block_matching_flow",
    "build_index",
    "cosine",
    "deduplicate",
    "enumerate_pairs",
    "face_count_score",
    "flow_cosine",
    "instance_iou",
    "load_index",
    "load_labels",
    "load_movie_pack",
    "mask_iou",
    "random_baseline_ap",
    "recall_at_k",
    "run_experiment",
    "save_index",
    "score_pair",
    "shot_flow_summary",
    "similarity_function",
    "split_movies",
    "top_k_ann",
    "top_k_exact",
    "write_labels",
    "write_movie_pack",
]
