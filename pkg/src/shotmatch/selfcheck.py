"""Embedded oracle suite: quick independent checks of the numeric core.

Each check recomputes its expected value by an independent route (closed
form, brute force enumeration, or finite differences) and compares against
the production path. The CLI exposes this as `shotmatch selfcheck`.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .assignment import min_cost_matching
from .datastore import MaskSet
from .datastore import FeaturePack
from .dedup import cosine, deduplicate
from .evaluation import average_precision
from .flow import FrameGray, block_matching_flow
from .learning import ntxent_loss
from .learning.metric import AnchorGroup
from .learning.models import LogisticModel, init_mlp, mlp_loss_and_grads
from .learning.optim import AdamState, adam_step, BETA1, BETA2, EPS
from .scoring import instance_iou


def _mask_set(movie: str, shot: int, grids) -> MaskSet:
    inst = np.array(grids, dtype=bool)
    return MaskSet(
        movie_id=movie, shot_index=shot, width=inst.shape[2], height=inst.shape[1], instances=inst
    )


def check_ap_snippet() -> tuple[bool, str]:
    a = average_precision([True, False, True], [0.9, 0.1, 0.8])
    b = average_precision([True, False, True], [0.9, 0.8, 0.7])
    ok = a == 1.0 and abs(b - (1 + 2 / 3) / 2) < 1e-12
    return ok, f"ap examples: {a}, {b}"


def check_cosine() -> tuple[bool, str]:
    v = np.array([3.0, -1.0, 2.0])
    ident = cosine(v, v)
    orth = cosine([1.0, 0.0], [0.0, 1.0])
    ref = (1 * 3 + 2 * 4) / (np.sqrt(5) * np.sqrt(25))
    got = cosine([1.0, 2.0], [3.0, 4.0])
    ok = abs(ident - 1.0) < 1e-12 and orth == 0.0 and abs(got - ref) < 1e-12
    return ok, f"cosine({ident:.12f}, {orth}, {got:.5f})"


def check_iiou_fixture() -> tuple[bool, str]:
    grid = np.zeros((4, 4), dtype=bool)
    a1 = grid.copy(); a1[0, 0] = a1[0, 1] = True
    a2 = grid.copy(); a2[3, 3] = True
    b1 = grid.copy(); b1[0, 1] = b1[0, 2] = True
    b2 = grid.copy(); b2[3, 3] = True
    a = _mask_set("m", 1, [a1, a2])
    b = _mask_set("m", 2, [b1, b2])
    value = instance_iou(a, b)
    ok = value == 0.5
    return ok, f"instance IoU fixture = {value}"


def check_assignment_bruteforce(n_cases: int = 20, seed: int = 5) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    for _ in range(n_cases):
        rows = int(rng.integers(1, 5))
        cols = int(rng.integers(1, 5))
        cost = [
            [Fraction(int(rng.integers(-20, 1)), int(rng.integers(1, 9))) for _ in range(cols)]
            for _ in range(rows)
        ]
        _, total = min_cost_matching(cost)
        best = None
        small, large = (rows, cols) if rows <= cols else (cols, rows)
        for combo in itertools.permutations(range(large), small):
            t = sum(
                cost[i][j] if rows <= cols else cost[j][i]
                for i, j in enumerate(combo)
            )
            best = t if best is None or t < best else best
        if total != best:
            return False, f"assignment total {total} != brute force {best}"
    return True, f"{n_cases} random matchings equal brute force"


def check_gradients() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    # logistic gradient at a random point
    X = rng.normal(size=(12, 3))
    y = (rng.random(12) > 0.5).astype(float)
    if y.min() == y.max():
        y[0] = 1.0 - y[0]
    w = rng.normal(size=3)
    b = 0.3
    lam = 1.0 / len(X)
    model = LogisticModel()

    def obj(wb):
        return model._objective(X, y, wb[:3], wb[3], lam)

    wb = np.concatenate([w, [b]])
    z = X @ w + b
    p = 1.0 / (1.0 + np.exp(-z))
    grad = np.concatenate([X.T @ (p - y) / len(X) + lam * w, [np.mean(p - y)]])
    num = _numeric_grad(obj, wb)
    if _rel_err(grad, num) > 1e-6:
        return False, "logistic gradient mismatch"

    # MLP gradient via the graph
    params = init_mlp([3, 4, 4, 1], "relu", seed=2)
    Xs = rng.normal(size=(6, 3))
    ys = (rng.random(6) > 0.5).astype(float)
    _, grads = mlp_loss_and_grads(params, Xs, ys)
    flat = params.flat_arrays()

    def mlp_obj(theta):
        trial = params.copy()
        _write_flat(trial.flat_arrays(), theta)
        loss, _ = mlp_loss_and_grads(trial, Xs, ys)
        return loss

    theta0 = _read_flat(flat)
    num = _numeric_grad(mlp_obj, theta0)
    if _rel_err(_read_flat(grads), num) > 1e-5:
        return False, "mlp gradient mismatch"

    # NTXent gradient w.r.t. embeddings
    emb = rng.normal(size=(5, 3))
    groups = [AnchorGroup(0, 1, (2, 3, 4)), AnchorGroup(1, 0, (2, 4))]

    def nt_obj(flat_emb):
        loss, _ = ntxent_loss(flat_emb.reshape(5, 3), groups, temperature=0.5)
        return loss

    _, g = ntxent_loss(emb, groups, temperature=0.5)
    num = _numeric_grad(nt_obj, emb.ravel())
    if _rel_err(g.ravel(), num) > 1e-6:
        return False, "ntxent gradient mismatch"
    return True, "logistic, mlp, ntxent gradients match finite differences"


def check_adam_trace() -> tuple[bool, str]:
    # scalar quadratic f(x) = 0.5 x^2, three steps from x=1, lr=0.1
    x = np.array([1.0])
    state = AdamState.for_params([x])
    xs = []
    for _ in range(3):
        adam_step([x], [x.copy()], state, lr=0.1)
        xs.append(float(x[0]))
    # reference recurrence evaluated independently
    ref_x, m, v = 1.0, 0.0, 0.0
    refs = []
    for t in range(1, 4):
        g = ref_x
        m = BETA1 * m + (1 - BETA1) * g
        v = BETA2 * v + (1 - BETA2) * g * g
        ref_x -= 0.1 * (m / (1 - BETA1**t)) / (np.sqrt(v / (1 - BETA2**t)) + EPS)
        refs.append(ref_x)
    ok = all(abs(a - b) < 1e-12 for a, b in zip(xs, refs))
    return ok, f"adam trace {xs}"


def check_flow_fixture() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    frame = np.zeros((16, 16))
    frame[4:8, 5:9] = 0.25 + 0.75 * rng.random((4, 4))
    shifted = np.zeros((16, 16))
    shifted[5:9, 7:11] = frame[4:8, 5:9]  # moved by (dx=2, dy=1)
    field = block_matching_flow(FrameGray(frame), FrameGray(shifted), block=4, search_radius=3)
    ok = np.array_equal(field.field[4:8, 4:8], np.broadcast_to([2.0, 1.0], (4, 4, 2)))
    return ok, "translated square recovered as (2, 1)"


def check_dedup_literal(seed: int = 9) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    n = 20
    vecs = rng.normal(size=(n, 8))
    vecs[4] = vecs[1]
    vecs[9] = vecs[1] * 2.0
    pack = FeaturePack(
        movie_id="m",
        encoder_name="dedup",
        dim=8,
        vectors={i + 1: vecs[i] for i in range(n)},
    )
    result = deduplicate(pack, threshold=0.8)
    removed = {
        j + 1
        for j in range(n)
        if any(cosine(vecs[i], vecs[j]) >= 0.8 for i in range(j))
    }
    ok = set(result.removed_indices) == removed
    return ok, f"literal dedup removed {sorted(removed)}"


def _numeric_grad(fn, x0: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x0)
    for i in range(x0.size):
        hi = x0.copy(); hi[i] += eps
        lo = x0.copy(); lo[i] -= eps
        g[i] = (fn(hi) - fn(lo)) / (2 * eps)
    return g


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def _read_flat(arrays) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def _write_flat(arrays, flat: np.ndarray) -> None:
    off = 0
    for a in arrays:
        a[...] = flat[off : off + a.size].reshape(a.shape)
        off += a.size


CHECKS = [
    ("ap-snippet", check_ap_snippet),
    ("cosine", check_cosine),
    ("iiou-fixture", check_iiou_fixture),
    ("assignment-bruteforce", check_assignment_bruteforce),
    ("gradients", check_gradients),
    ("adam-trace", check_adam_trace),
    ("flow-fixture", check_flow_fixture),
    ("dedup-literal", check_dedup_literal),
]


def run_selfcheck(verbose_print=print) -> bool:
    """Run every embedded oracle; returns True when all pass."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        verbose_print(f"{'ok' if ok else 'FAIL'}: {name} ({detail})")
    return all_ok
