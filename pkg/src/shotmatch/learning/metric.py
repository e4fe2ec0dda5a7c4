"""Contrastive metric learning: a two-layer head trained with a
temperature-scaled InfoNCE loss over mined hard triplets.

The head maps fixed shot encodings to a new space in which cosine similarity
ranks matching pairs, so the result can be indexed and searched with ANN
methods. Hard triplets are (anchor, positive, negative) with the negative
currently closer to the anchor than the positive under cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DataError
from ..validation import as_matrix
from . import autodiff as ad
from .models import init_mlp, mlp_forward
from .optim import AdamState, adam_step

# tuned per task: (hidden_units, epochs, temperature, learning_rate, weight_decay)
METRIC_DEFAULTS = {
    "frame": {
        "hidden_units": 128,
        "epochs": 300,
        "temperature": 7.362e-3,
        "learning_rate": 3.147e-3,
        "weight_decay": 1e-4,
    },
    "motion": {
        "hidden_units": 256,
        "epochs": 100,
        "temperature": 1.3412e-2,
        "learning_rate": 4.056e-4,
        "weight_decay": 4.54e-4,
    },
}
METRIC_OUTPUT_DIM = 1024
METRIC_BATCH_SIZE = 256


@dataclass(frozen=True)
class AnchorGroup:
    """One anchor with its positive and that anchor's negative pool."""

    anchor: int
    positive: int
    negatives: tuple[int, ...]


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def mine_hard_triplets(
    embeddings: np.ndarray, positive_pairs: list[tuple[int, int]]
) -> list[tuple[int, int, int]]:
    """All (anchor, positive, negative) triplets where the negative is closer
    to the anchor than its positive: cos(a, n) > cos(a, p).

    Each positive pair contributes both anchor orderings; negatives are every
    batch member not positively paired with the anchor. Output ordering is
    deterministic (anchor, positive, negative ascending).
    """
    emb = _unit_rows(as_matrix(embeddings, "embeddings"))
    n = len(emb)
    sims = emb @ emb.T
    pos_of: dict[int, set[int]] = {}
    for i, j in positive_pairs:
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"pair ({i}, {j}) out of range for batch of {n}")
        pos_of.setdefault(i, set()).add(j)
        pos_of.setdefault(j, set()).add(i)
    triplets = []
    for anchor in sorted(pos_of):
        positives = pos_of[anchor]
        for positive in sorted(positives):
            cutoff = sims[anchor, positive]
            for negative in range(n):
                if negative == anchor or negative in positives:
                    continue
                if sims[anchor, negative] > cutoff:
                    triplets.append((anchor, positive, negative))
    return triplets


def group_triplets(triplets: list[tuple[int, int, int]]) -> list[AnchorGroup]:
    """Collapse triplets into per-(anchor, positive) negative pools."""
    pools: dict[tuple[int, int], list[int]] = {}
    for a, p, n in triplets:
        pools.setdefault((a, p), []).append(n)
    return [
        AnchorGroup(anchor=a, positive=p, negatives=tuple(sorted(set(ns))))
        for (a, p), ns in sorted(pools.items())
    ]


def ntxent_loss(
    embeddings, groups: list[AnchorGroup] | list[tuple[int, int, tuple[int, ...]]], temperature: float
):
    """Temperature-scaled InfoNCE over explicit anchor groups.

    Embeddings are L2-normalized internally; for each anchor the loss is
    -log( exp(cos(a,p)/t) / sum over {p} u negatives of exp(cos(a,x)/t) ),
    averaged over anchors. Returns (loss, gradient w.r.t. the raw
    embeddings).
    """
    if temperature <= 0:
        raise DataError(f"temperature must be positive, got {temperature}")
    emb_val = as_matrix(embeddings, "embeddings")
    parsed = [g if isinstance(g, AnchorGroup) else AnchorGroup(g[0], g[1], tuple(g[2])) for g in groups]
    if not parsed:
        raise DataError("ntxent_loss needs at least one anchor with a positive")
    n = len(emb_val)

    anchors = np.array([g.anchor for g in parsed], dtype=np.intp)
    positives = np.array([g.positive for g in parsed], dtype=np.intp)
    mask = np.zeros((len(parsed), n), dtype=bool)
    for row, g in enumerate(parsed):
        mask[row, g.positive] = True
        for neg in g.negatives:
            mask[row, neg] = True

    emb = ad.Var(emb_val)
    unit = ad.l2_normalize_rows(emb)
    sims = ad.scale(ad.matmul(ad.gather_rows(unit, anchors), transpose(unit)), 1.0 / temperature)
    pos_logits = ad.take_pairs(sims, np.arange(len(parsed)), positives)
    lse = ad.masked_logsumexp_rows(sims, mask)
    loss = ad.mean(ad.sub(lse, pos_logits))
    loss.backward()
    return float(loss.value), emb.grad


def transpose(a: ad.Var) -> ad.Var:
    out = ad.Var(a.value.T, (a,))

    def backward(g):
        a.grad += g.T

    out._backward = backward
    return out


class MetricHead(BaseEstimator):
    """Two-layer embedding head (leaky ReLU between layers, linear output).

    fit(X, pairs) expects per-shot features X of shape (n, d) and labeled
    pairs as an integer array (m, 3) of (i, j, label) rows indexing into X;
    transform(X) maps features into the learned space.
    """

    def __init__(
        self,
        hidden_units: int = 128,
        output_dim: int = METRIC_OUTPUT_DIM,
        temperature: float = METRIC_DEFAULTS["frame"]["temperature"],
        learning_rate: float = METRIC_DEFAULTS["frame"]["learning_rate"],
        weight_decay: float = METRIC_DEFAULTS["frame"]["weight_decay"],
        epochs: int = METRIC_DEFAULTS["frame"]["epochs"],
        batch_size: int = METRIC_BATCH_SIZE,
        seed: int = 0,
    ):
        self.hidden_units = hidden_units
        self.output_dim = output_dim
        self.temperature = temperature
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, pairs):
        X = as_matrix(X, "features")
        pairs = np.asarray(pairs, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 3:
            raise DataError("pairs must be an (m, 3) array of (i, j, label) rows")
        if len(pairs) == 0:
            raise DataError("empty pair set")
        positives = pairs[pairs[:, 2] != 0][:, :2]
        if len(positives) == 0:
            raise DataError("no positive pairs to train on")
        n, d = X.shape
        self.params_ = init_mlp(
            [d, self.hidden_units, self.output_dim], "leaky_relu", self.seed
        )
        self.loss_history_ = []
        state = AdamState.for_params(self.params_.flat_arrays())
        rng = np.random.default_rng(self.seed)
        all_shots = np.arange(n)
        pairs_per_batch = max(1, self.batch_size // 2)

        for _ in range(self.epochs):
            order = rng.permutation(len(positives))
            epoch_losses = []
            for start in range(0, len(order), pairs_per_batch):
                chosen = positives[order[start : start + pairs_per_batch]]
                batch_shots = np.unique(chosen.ravel())
                if len(batch_shots) < self.batch_size:
                    # pad the denominator with unpaired shots as extra negatives
                    pool = np.setdiff1d(all_shots, batch_shots, assume_unique=False)
                    extra = min(self.batch_size - len(batch_shots), len(pool))
                    if extra > 0:
                        batch_shots = np.concatenate(
                            [batch_shots, rng.choice(pool, size=extra, replace=False)]
                        )
                batch_shots = np.sort(batch_shots)
                local = {shot: row for row, shot in enumerate(batch_shots)}
                local_pairs = [(local[i], local[j]) for i, j in chosen]

                loss = self._train_step(X[batch_shots], local_pairs, state)
                if loss is not None:
                    epoch_losses.append(loss)
            self.loss_history_.append(float(np.mean(epoch_losses)) if epoch_losses else np.nan)
        return self

    def _train_step(self, features: np.ndarray, local_pairs, state: AdamState):
        out, pvars = mlp_forward(self.params_, features, train_graph=True)
        triplets = mine_hard_triplets(out.value, local_pairs)
        if not triplets:
            return None
        groups = group_triplets(triplets)
        loss, grad_emb = ntxent_loss(out.value, groups, self.temperature)
        # chain the embedding gradient through the head: d/dtheta sum(out * g)
        # equals g^T (dout/dtheta) because g is held constant
        final = ad.sum_(ad.mul(out, grad_emb))
        final.backward()
        adam_step(
            self.params_.flat_arrays(),
            [v.grad for v in pvars],
            state,
            lr=self.learning_rate,
            weight_decay=self.weight_decay,
        )
        return loss

    def transform(self, X):
        X = as_matrix(X, "features")
        return mlp_forward(self.params_, X)

    def score_pairs(self, X, index_pairs) -> np.ndarray:
        """Cosine similarity of transformed embeddings for (i, j) rows."""
        emb = _unit_rows(self.transform(X))
        index_pairs = np.asarray(index_pairs, dtype=np.int64)
        return np.sum(emb[index_pairs[:, 0]] * emb[index_pairs[:, 1]], axis=1)


def train_metric_head(
    features,
    labeled_pairs,
    task: str,
    config: dict | None = None,
    seed: int = 0,
) -> MetricHead:
    """Train a metric head with the per-task tuned defaults.

    ``labeled_pairs`` is an (m, 3) integer array of (i, j, label) rows.
    ``config`` overrides individual defaults (hidden_units, epochs,
    temperature, learning_rate, weight_decay, batch_size, output_dim).
    """
    if task not in METRIC_DEFAULTS:
        raise DataError(f"unknown task {task!r}")
    settings = dict(METRIC_DEFAULTS[task])
    settings["batch_size"] = METRIC_BATCH_SIZE
    settings["output_dim"] = METRIC_OUTPUT_DIM
    settings.update(config or {})
    head = MetricHead(seed=seed, **settings)
    return head.fit(features, labeled_pairs)
