"""Pair aggregation and binary classifiers over aggregated pair features.

Estimators follow the scikit-learn fit/predict_proba convention (and inherit
get_params/set_params from BaseEstimator) so they slot into the wider
ecosystem, but training itself is implemented here: Newton iterations for
the logistic model and Adam over the autodiff graph for the MLPs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DataError
from ..validation import as_matrix, as_vector, check_finite
from . import autodiff as ad
from .optim import AdamState, adam_step

AGGREGATOR_KINDS = ("cat", "mean", "diff")
MLP_ARCHITECTURES = {"S": 50, "M": 100, "L": 500}
LEAKY_RELU_SLOPE = 0.01


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings shared by the learned scorers."""

    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    temperature: float | None = None
    batch_size: int = 200
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise DataError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.temperature is not None and self.temperature <= 0:
            raise DataError(f"temperature must be positive, got {self.temperature}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise DataError(f"epochs must be non-negative, got {self.epochs}")


def aggregate(kind: str, u, v) -> np.ndarray:
    """Combine two equal-length vectors: cat -> [u|v], mean -> (u+v)/2,
    diff -> |u-v|."""
    if kind not in AGGREGATOR_KINDS:
        raise DataError(f"unknown aggregator {kind!r}")
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise DataError(f"aggregator inputs have mismatched lengths {u.shape} vs {v.shape}")
    if kind == "cat":
        return np.concatenate([u, v])
    if kind == "mean":
        return (u + v) / 2.0
    return np.abs(u - v)


def aggregate_rows(kind: str, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Row-wise aggregate over matrices of paired features."""
    if kind not in AGGREGATOR_KINDS:
        raise DataError(f"unknown aggregator {kind!r}")
    if left.shape != right.shape:
        raise DataError(f"paired feature shapes differ: {left.shape} vs {right.shape}")
    if kind == "cat":
        return np.concatenate([left, right], axis=1)
    if kind == "mean":
        return (left + right) / 2.0
    return np.abs(left - right)


@dataclass
class MlpParams:
    """Fully-connected network parameters, one weight/bias per layer."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        if self.activation not in ("relu", "leaky_relu"):
            raise DataError(f"unknown activation {self.activation!r}")
        expected = list(zip(self.layer_sizes, self.layer_sizes[1:]))
        if len(self.weights) != len(expected) or len(self.biases) != len(expected):
            raise DataError("weights/biases do not match layer_sizes")
        for w, b, (fan_in, fan_out) in zip(self.weights, self.biases, expected):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise DataError(
                    f"layer shape mismatch: {w.shape}/{b.shape} vs ({fan_in}, {fan_out})"
                )
            check_finite(w, "weights")
            check_finite(b, "biases")

    def copy(self) -> "MlpParams":
        return MlpParams(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            seed=self.seed,
        )

    def flat_arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_mlp(layer_sizes: list[int], activation: str, seed: int) -> MlpParams:
    """He-scaled gaussian init, deterministic per seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(
        layer_sizes=list(layer_sizes),
        weights=weights,
        biases=biases,
        activation=activation,
        seed=seed,
    )


def mlp_forward(params: MlpParams, x: np.ndarray | ad.Var, train_graph: bool = False):
    """Forward pass; with train_graph=True returns (output Var, param Vars)."""
    act = ad.relu if params.activation == "relu" else ad.leaky_relu
    if train_graph:
        wvars = [ad.Var(w) for w in params.weights]
        bvars = [ad.Var(b) for b in params.biases]
        h: ad.Var = x if isinstance(x, ad.Var) else ad.Var(x)
        last = len(wvars) - 1
        for i, (w, b) in enumerate(zip(wvars, bvars)):
            h = ad.add(ad.matmul(h, w), b)
            if i < last:
                h = act(h)
        # interleaved (w, b) per layer to match MlpParams.flat_arrays()
        pvars = [v for pair in zip(wvars, bvars) for v in pair]
        return h, pvars
    h = np.asarray(x, dtype=np.float64)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            if params.activation == "relu":
                h = np.maximum(h, 0.0)
            else:
                h = np.where(h > 0.0, h, LEAKY_RELU_SLOPE * h)
    return h


def _check_two_classes(y: np.ndarray) -> None:
    if y.min() == y.max():
        raise DataError("training data must contain both classes")


class LogisticModel(BaseEstimator):
    """L2-regularized logistic regression fit by damped Newton iterations.

    The objective is mean log-loss + 0.5 * lam * ||w||^2 with
    lam = 1 / (C * n); the intercept is not penalized. Training stops at
    gradient max-norm <= tol or after max_iter steps.
    """

    def __init__(self, C: float = 1.0, tol: float = 1e-6, max_iter: int = 100, seed: int = 0):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def _objective(self, X, y, w, b, lam):
        z = X @ w + b
        loss = np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z))))
        return loss + 0.5 * lam * float(w @ w)

    def fit(self, X, y):
        X = as_matrix(X, "features")
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != len(X):
            raise DataError(f"{len(X)} rows vs {len(y)} labels")
        _check_two_classes(y)
        n, d = X.shape
        lam = 1.0 / (self.C * n)
        w = np.zeros(d)
        b = 0.0
        self.n_iter_ = 0
        for _ in range(self.max_iter):
            z = X @ w + b
            p = 1.0 / (1.0 + np.exp(-z))
            grad_w = X.T @ (p - y) / n + lam * w
            grad_b = float(np.mean(p - y))
            gnorm = max(np.abs(grad_w).max(initial=0.0), abs(grad_b))
            if gnorm <= self.tol:
                break
            s = p * (1.0 - p)
            Xb = np.hstack([X, np.ones((n, 1))])
            H = (Xb * s[:, None]).T @ Xb / n
            H[:d, :d] += lam * np.eye(d)
            H += 1e-12 * np.eye(d + 1)
            step = np.linalg.solve(H, np.concatenate([grad_w, [grad_b]]))
            # backtracking keeps Newton honest far from the optimum
            t = 1.0
            base = self._objective(X, y, w, b, lam)
            while t > 1e-8:
                w_new = w - t * step[:d]
                b_new = b - t * step[d]
                if self._objective(X, y, w_new, b_new, lam) <= base:
                    break
                t /= 2.0
            w, b = w - t * step[:d], b - t * step[d]
            self.n_iter_ += 1
        self.weights_ = w
        self.bias_ = float(b)
        return self

    def decision_function(self, X):
        X = as_matrix(X, "features")
        return X @ self.weights_ + self.bias_

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(int)

    def objective_value(self, X, y) -> float:
        """The trained objective on (X, y); exposed for oracle comparisons."""
        X = as_matrix(X, "features")
        y = np.asarray(y, dtype=np.float64).ravel()
        return self._objective(X, y, self.weights_, self.bias_, 1.0 / (self.C * len(X)))


class MlpClassifier(BaseEstimator):
    """Two-hidden-layer perceptron with sigmoid output, trained with Adam on
    binary cross-entropy. Deterministic per seed on a single thread."""

    def __init__(
        self,
        hidden_units: int = 50,
        activation: str = "relu",
        learning_rate: float = 1e-3,
        weight_decay: float = 0.0,
        batch_size: int = 200,
        epochs: int = 200,
        seed: int = 0,
    ):
        self.hidden_units = hidden_units
        self.activation = activation
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X = as_matrix(X, "features")
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != len(X):
            raise DataError(f"{len(X)} rows vs {len(y)} labels")
        _check_two_classes(y)
        n, d = X.shape
        sizes = [d, self.hidden_units, self.hidden_units, 1]
        self.params_ = init_mlp(sizes, self.activation, self.seed)
        state = AdamState.for_params(self.params_.flat_arrays())
        rng = np.random.default_rng(self.seed)
        batch = min(self.batch_size, n)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                _, grads = mlp_loss_and_grads(self.params_, X[rows], y[rows])
                adam_step(
                    self.params_.flat_arrays(),
                    grads,
                    state,
                    lr=self.learning_rate,
                    weight_decay=self.weight_decay,
                )
        return self

    def decision_function(self, X):
        X = as_matrix(X, "features")
        return mlp_forward(self.params_, X).ravel()

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(int)


def mlp_loss_and_grads(params: MlpParams, X: np.ndarray, y: np.ndarray):
    """Mean BCE loss and gradients for every weight/bias, via the graph."""
    logits, pvars = mlp_forward(params, X, train_graph=True)
    loss = ad.bce_with_logits_mean(logits, y.reshape(-1, 1))
    loss.backward()
    return float(loss.value), [v.grad for v in pvars]


def train_logistic(features, labels, config: TrainConfig | None = None) -> LogisticModel:
    """Spec-level wrapper: L2-penalized logistic regression, C=1."""
    config = config or TrainConfig()
    model = LogisticModel(C=1.0, tol=1e-6, max_iter=max(config.epochs, 1), seed=config.seed)
    return model.fit(features, labels)


def train_mlp_classifier(
    features, labels, arch: str = "S", config: TrainConfig | None = None
) -> MlpClassifier:
    """Spec-level wrapper: 2-hidden-layer MLP sized by arch S/M/L."""
    if arch not in MLP_ARCHITECTURES:
        raise DataError(f"unknown architecture {arch!r}; expected one of S, M, L")
    config = config or TrainConfig()
    model = MlpClassifier(
        hidden_units=MLP_ARCHITECTURES[arch],
        activation="relu",
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
        batch_size=config.batch_size,
        epochs=config.epochs,
        seed=config.seed,
    )
    return model.fit(features, labels)


def classifier_score(model, agg: str, r_i, r_j) -> float:
    """Probability that the aggregated pair is a positive pair.

    With the symmetric aggregators (mean, diff) the score is exactly
    pair-symmetric; with cat it need not be, since [u|v] != [v|u].
    """
    x = aggregate(agg, r_i, r_j).reshape(1, -1)
    return float(model.predict_proba(x)[0, 1])
