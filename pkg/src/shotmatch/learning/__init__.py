"""Learned scorers: pair aggregation, binary classifiers, and the
contrastive metric head, built on a small reverse-mode gradient engine."""

from .models import (
    MLP_ARCHITECTURES,
    LogisticModel,
    MlpClassifier,
    MlpParams,
    TrainConfig,
    aggregate,
    classifier_score,
    train_logistic,
    train_mlp_classifier,
)
from .metric import (
    METRIC_DEFAULTS,
    MetricHead,
    mine_hard_triplets,
    ntxent_loss,
    train_metric_head,
)
from .optim import AdamState, adam_step

__all__ = [
    "MLP_ARCHITECTURES",
    "METRIC_DEFAULTS",
    "AdamState",
    "LogisticModel",
    "MetricHead",
    "MlpClassifier",
    "MlpParams",
    "TrainConfig",
    "adam_step",
    "aggregate",
    "classifier_score",
    "mine_hard_triplets",
    "ntxent_loss",
    "train_logistic",
    "train_metric_head",
    "train_mlp_classifier",
]
