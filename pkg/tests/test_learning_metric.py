"""NTXent loss, hard-triplet mining, and metric-head training."""

import numpy as np
import pytest

from shotmatch.errors import DataError
from shotmatch.learning.metric import (
    AnchorGroup,
    MetricHead,
    group_triplets,
    mine_hard_triplets,
    ntxent_loss,
    train_metric_head,
)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_ntxent_closed_form_single_anchor():
    # cos(a,p)=1, cos(a,n)=0, tau=1 -> loss = ln(1 + e^-1)
    emb = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
    groups = [AnchorGroup(0, 1, (2,))]
    loss, grad = ntxent_loss(emb, groups, temperature=1.0)
    assert loss == pytest.approx(np.log(1 + np.exp(-1.0)), abs=1e-12)
    assert grad.shape == emb.shape


def test_ntxent_limit_small_temperature():
    emb = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    loss, _ = ntxent_loss(emb, [AnchorGroup(0, 1, (2,))], temperature=0.01)
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_ntxent_requires_positive_temperature_and_groups():
    emb = np.eye(3)
    with pytest.raises(DataError, match="temperature"):
        ntxent_loss(emb, [AnchorGroup(0, 1, (2,))], temperature=0.0)
    with pytest.raises(DataError, match="positive"):
        ntxent_loss(emb, [], temperature=1.0)


def test_ntxent_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for trial in range(5):
        emb = rng.normal(size=(6, 4))
        groups = [
            AnchorGroup(0, 1, (2, 3)),
            AnchorGroup(1, 0, (4, 5)),
            AnchorGroup(2, 3, (0, 5)),
        ]
        loss, grad = ntxent_loss(emb, groups, temperature=0.3)
        eps = 1e-6
        num = np.zeros_like(emb)
        for idx in np.ndindex(emb.shape):
            hi, lo = emb.copy(), emb.copy()
            hi[idx] += eps
            lo[idx] -= eps
            num[idx] = (
                ntxent_loss(hi, groups, 0.3)[0] - ntxent_loss(lo, groups, 0.3)[0]
            ) / (2 * eps)
        rel = np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-12)
        assert rel < 1e-6


def brute_force_hard_triplets(emb, positive_pairs):
    emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    pos_of = {}
    for i, j in positive_pairs:
        pos_of.setdefault(i, set()).add(j)
        pos_of.setdefault(j, set()).add(i)
    out = []
    for a in range(len(emb)):
        for p in pos_of.get(a, ()):  # anchors only exist via positive pairs
            for n in range(len(emb)):
                if n == a or n in pos_of.get(a, set()):
                    continue
                if float(emb[a] @ emb[n]) > float(emb[a] @ emb[p]):
                    out.append((a, p, n))
    return sorted(out)


def test_miner_emits_triplet_when_negative_is_closer():
    emb = np.array([unit([1, 0]), unit([0.2, 1]), unit([1, 0.05])])
    triplets = mine_hard_triplets(emb, [(0, 1)])
    assert (0, 1, 2) in triplets


def test_miner_empty_when_all_negatives_farther():
    emb = np.array([unit([1, 0]), unit([1, 0.01]), unit([-1, 0])])
    assert mine_hard_triplets(emb, [(0, 1)]) == []


def test_miner_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(20):
        emb = rng.normal(size=(10, 5))
        pairs = [(0, 1), (2, 3), (4, 5)]
        assert mine_hard_triplets(emb, pairs) == brute_force_hard_triplets(emb, pairs)


def test_group_triplets_pools_negatives():
    groups = group_triplets([(0, 1, 2), (0, 1, 3), (1, 0, 2)])
    assert groups == [AnchorGroup(0, 1, (2, 3)), AnchorGroup(1, 0, (2,))]


def _two_cluster_data(rng, per_cluster=12, dim=6):
    centers = np.array([[3.0] + [0.0] * (dim - 1), [-3.0] + [0.0] * (dim - 1)])
    feats, labels = [], []
    for c in range(2):
        feats.append(centers[c] + rng.normal(size=(per_cluster, dim)))
        labels += [c] * per_cluster
    X = np.vstack(feats)
    labels = np.array(labels)
    pairs = []
    for c in range(2):
        members = np.nonzero(labels == c)[0]
        for a, b in zip(members[:-1], members[1:]):
            pairs.append((int(a), int(b), 1))
    for a, b in zip(np.nonzero(labels == 0)[0], np.nonzero(labels == 1)[0]):
        pairs.append((int(a), int(b), 0))
    return X, np.array(pairs), labels


def test_metric_head_separates_two_clusters():
    rng = np.random.default_rng(5)
    X, pairs, labels = _two_cluster_data(rng)
    head = train_metric_head(
        X,
        pairs,
        "frame",
        config={"hidden_units": 16, "output_dim": 8, "epochs": 30, "batch_size": 24},
        seed=0,
    )
    emb = head.transform(X)
    emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    sims = emb @ emb.T
    intra, inter = [], []
    n = len(labels)
    for i in range(n):
        for j in range(i + 1, n):
            (intra if labels[i] == labels[j] else inter).append(sims[i, j])
    intra, inter = np.array(intra), np.array(inter)
    # nearly every intra-cluster pair should outrank inter-cluster pairs
    threshold = np.median(inter)
    assert (intra > threshold).mean() >= 0.95


def test_metric_head_zero_epochs_is_initialization():
    rng = np.random.default_rng(6)
    X, pairs, _ = _two_cluster_data(rng)
    head = MetricHead(hidden_units=8, output_dim=4, epochs=0, seed=3).fit(X, pairs)
    from shotmatch.learning.models import init_mlp

    fresh = init_mlp([X.shape[1], 8, 4], "leaky_relu", seed=3)
    for a, b in zip(head.params_.flat_arrays(), fresh.flat_arrays()):
        np.testing.assert_array_equal(a, b)


def test_metric_head_loss_decreases():
    rng = np.random.default_rng(7)
    X, pairs, _ = _two_cluster_data(rng, per_cluster=16)
    head = MetricHead(
        hidden_units=16, output_dim=8, epochs=10, batch_size=24, seed=1
    ).fit(X, pairs)
    losses = [x for x in head.loss_history_ if not np.isnan(x)]
    assert len(losses) >= 2
    assert losses[-1] < losses[0]


def test_metric_head_bit_identical_across_runs():
    rng = np.random.default_rng(8)
    X, pairs, _ = _two_cluster_data(rng)
    kwargs = dict(hidden_units=8, output_dim=4, epochs=5, batch_size=16, seed=11)
    a = MetricHead(**kwargs).fit(X, pairs)
    b = MetricHead(**kwargs).fit(X, pairs)
    for wa, wb in zip(a.params_.flat_arrays(), b.params_.flat_arrays()):
        np.testing.assert_array_equal(wa, wb)


def test_metric_head_requires_positive_pairs():
    X = np.random.default_rng(0).normal(size=(4, 3))
    with pytest.raises(DataError, match="empty pair set"):
        MetricHead().fit(X, np.zeros((0, 3), dtype=int))
    with pytest.raises(DataError, match="positive"):
        MetricHead().fit(X, np.array([[0, 1, 0]]))


def test_metric_defaults_match_tuned_table():
    from shotmatch.learning.metric import METRIC_DEFAULTS

    assert METRIC_DEFAULTS["frame"] == {
        "hidden_units": 128,
        "epochs": 300,
        "temperature": 7.362e-3,
        "learning_rate": 3.147e-3,
        "weight_decay": 1e-4,
    }
    assert METRIC_DEFAULTS["motion"] == {
        "hidden_units": 256,
        "epochs": 100,
        "temperature": 1.3412e-2,
        "learning_rate": 4.056e-4,
        "weight_decay": 4.54e-4,
    }
