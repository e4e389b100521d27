"""Approximate flows and the dyadic composition engine that turns them into flows."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_MAX_DEPTH = 16


@dataclass(frozen=True)
class ApproxFlowGenerator:
    """mu_ts(x) with ||mu_tu o mu_us - mu_ts|| <= c1 |t - s|^a.

    ``compose`` is an optional fast path ``compose(partition, x)`` that must
    agree with composing ``map`` cell by cell; ``reverse`` tells it to run the
    cells from last to first.
    """

    map: Callable
    exponent: float
    c1: float | None = None
    jacobian: Callable | None = None
    compose: Callable | None = None

    def __post_init__(self):
        if self.exponent <= 1.0:
            raise ValueError(f"approximate flows need a > 1, got {self.exponent}")

    def __call__(self, s, t, x):
        return np.asarray(self.map(s, t, x), dtype=float)

    def defect(self, s, u, t, x) -> float:
        return float(np.max(np.abs(self(u, t, self(s, u, x)) - self(s, t, x))))

    def validate(self, s: float, t: float, points, rng=None, trials: int = 32) -> float:
        """Worst observed defect / |t - s|^a over random triples and the given points.

        Also checks mu_tt = Id to 1e-12.
        """
        rng = np.random.default_rng(rng)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        worst = 0.0
        for _ in range(trials):
            a, b, c = np.sort(rng.uniform(s, t, size=3))
            x = points[rng.integers(points.shape[0])]
            if np.max(np.abs(self(a, a, x) - x)) > 1e-12:
                raise ValueError("mu_tt is not the identity")
            worst = max(worst, self.defect(a, b, c, x) / max(c - a, 1e-300) ** self.exponent)
        if self.c1 is not None and worst > self.c1:
            warnings.warn(f"observed defect ratio {worst:.3g} exceeds declared c1 = {self.c1:.3g}")
        return worst


@dataclass
class FlowEvaluation:
    value: np.ndarray
    dyadic_depth_used: int
    last_delta: float
    converged: bool = True
    deltas: list = field(default_factory=list)


def dyadic_partition(s: float, t: float, depth: int) -> np.ndarray:
    pts = s + (t - s) * np.arange((1 << depth) + 1) / (1 << depth)
    pts[-1] = t
    return pts


def compose_along_partition(mu: ApproxFlowGenerator, partition, x, reverse: bool = False):
    """mu_{t_n t_(n-1)} o ... o mu_{t_1 t_0} applied to x (cells in reverse order if asked)."""
    partition = np.asarray(partition, dtype=float)
    if np.any(np.diff(partition) <= 0):
        raise ValueError("partition must be increasing")
    if mu.compose is not None:
        return np.asarray(mu.compose(partition, x, reverse=reverse), dtype=float)
    y = np.asarray(x, dtype=float)
    cells = range(partition.size - 1)
    for k in reversed(cells) if reverse else cells:
        y = mu(partition[k], partition[k + 1], y)
    return y


def _refine(evaluate, tol, max_depth, min_depth) -> FlowEvaluation:
    """Evaluate at depths 0, 1, ... and stop once consecutive values agree within tol.

    The coarser of the two agreeing values is returned, with its depth.
    """
    prev = evaluate(0)
    deltas: list[float] = []
    for depth in range(1, max_depth + 1):
        cur = evaluate(depth)
        delta = float(np.max(np.abs(cur - prev)))
        deltas.append(delta)
        if not np.isfinite(delta):
            return FlowEvaluation(cur, depth, delta, False, deltas)
        if delta < tol and depth > min_depth:
            return FlowEvaluation(prev, depth - 1, delta, True, deltas)
        prev = cur
    return FlowEvaluation(prev, max_depth, deltas[-1] if deltas else 0.0, False, deltas)


def flow_eval(mu: ApproxFlowGenerator, s: float, t: float, x, tol: float = DEFAULT_TOL,
              max_depth: int = DEFAULT_MAX_DEPTH, min_depth: int = 0) -> FlowEvaluation:
    """phi_ts(x) as the limit of compositions of mu over dyadic partitions of [s, t].

    Non-convergence is reported through ``converged=False``; the finest value is returned.
    """
    if t < s:
        raise ValueError("need s <= t")
    x = np.asarray(x, dtype=float)
    if t == s:
        return FlowEvaluation(x.copy(), 0, 0.0, True, [])
    return _refine(lambda n: compose_along_partition(mu, dyadic_partition(s, t, n), x), tol, max_depth, min_depth)


def inverse_flow_eval(mu_reversed: ApproxFlowGenerator, s: float, t: float, x, tol: float = DEFAULT_TOL,
                      max_depth: int = DEFAULT_MAX_DEPTH, min_depth: int = 0) -> FlowEvaluation:
    """phi_ts^{-1}(x) from a generator of the reversed dynamics.

    ``mu_reversed(u, v, .)`` approximates the inverse of phi_vu, so the cells are
    composed from t back to s.
    """
    if t < s:
        raise ValueError("need s <= t")
    x = np.asarray(x, dtype=float)
    if t == s:
        return FlowEvaluation(x.copy(), 0, 0.0, True, [])
    return _refine(lambda n: compose_along_partition(mu_reversed, dyadic_partition(s, t, n), x, reverse=True),
                   tol, max_depth, min_depth)


@dataclass
class ConvergenceRow:
    depth: int
    value: np.ndarray
    delta: float


def convergence_table(mu: ApproxFlowGenerator, s: float, t: float, x, depths) -> list[ConvergenceRow]:
    """Compositions at each dyadic depth with delta = |mu^(n) - mu^(n-1)| (NaN at depth 0)."""
    x = np.asarray(x, dtype=float)
    cache: dict[int, np.ndarray] = {}

    def value(n):
        if n not in cache:
            cache[n] = compose_along_partition(mu, dyadic_partition(s, t, n), x)
        return cache[n]

    rows = []
    for n in depths:
        n = int(n)
        delta = float(np.max(np.abs(value(n) - value(n - 1)))) if n > 0 else float("nan")
        rows.append(ConvergenceRow(n, value(n), delta))
    return rows


def fit_rate(depths, deltas, floor: float = 1e-14) -> tuple[float, float]:
    """Least-squares slope of -log2(delta) against depth, and the rms residual.

    Deltas at or below ``floor`` (rounding level) are dropped.
    """
    d = np.asarray(depths, dtype=float)
    v = np.asarray(deltas, dtype=float)
    keep = np.isfinite(v) & (v > floor)
    if keep.sum() < 2:
        return float("nan"), float("nan")
    coef, res, *_ = np.polyfit(d[keep], -np.log2(v[keep]), 1, full=True)
    resid = float(np.sqrt(res[0] / keep.sum())) if res.size else 0.0
    return float(coef[0]), resid


def fit_power(sizes, errors) -> tuple[float, float]:
    """Slope of log(error) against log(size) and the rms residual."""
    h = np.log(np.asarray(sizes, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    coef, res, *_ = np.polyfit(h, e, 1, full=True)
    resid = float(np.sqrt(res[0] / h.size)) if res.size else 0.0
    return float(coef[0]), resid


# integral products ----------------------------------------------------------------

_PRODUCT_CHUNK = 1 << 16


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """M_(n-1) ... M_1 M_0 by pairwise reduction."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.eye(mats.shape[1])[None]], axis=0)
        mats = np.matmul(mats[1::2], mats[0::2])
    return mats[0]


def _matrix_sampler(A):
    if hasattr(A, "times") and hasattr(A, "values"):
        times = np.asarray(A.times, dtype=float)
        vals = np.asarray(A.values, dtype=float)
        shape = vals.shape[1:]
        flat = vals.reshape(times.size, -1)

        def f(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            out = np.stack([np.interp(t, times, flat[:, k]) for k in range(flat.shape[1])], axis=-1)
            return out.reshape(t.shape + shape)

        return f

    def g(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.asarray(A(t), dtype=float)
        if out.ndim == 2 and t.size > 1:
            out = np.stack([np.asarray(A(u), dtype=float) for u in t])
        return out.reshape((t.size,) + out.shape[-2:])

    return g


def integral_product_generator(A, B=None) -> ApproxFlowGenerator:
    """mu_ts(M) = (Id + A_ts) M, or (Id + A_ts)(Id + B_ts) M when B is given."""
    fa = _matrix_sampler(A)
    fb = _matrix_sampler(B) if B is not None else None

    def cells(partition):
        va = fa(partition)
        d = va.shape[-1]
        m = np.eye(d) + (va[1:] - va[:-1])
        if fb is not None:
            vb = fb(partition)
            m = np.matmul(m, np.eye(d) + (vb[1:] - vb[:-1]))
        return m

    def one(s, t, M):
        return cells(np.array([s, t]))[0] @ M

    def compose(partition, M, reverse=False):
        if reverse:
            raise ValueError("integral products are composed forwards")
        out = np.asarray(M, dtype=float)
        n = partition.size - 1
        for c0 in range(0, n, _PRODUCT_CHUNK):
            out = _ordered_product(cells(partition[c0 : min(n, c0 + _PRODUCT_CHUNK) + 1])) @ out
        return out

    return ApproxFlowGenerator(one, 2.0, compose=compose)


def integral_product(A, s: float, t: float, tol: float = 1e-7, max_depth: int = 24, B=None) -> FlowEvaluation:
    """prod_{s <= r <= t} (Id + dA_r) as a flow acting on the identity matrix."""
    mu = integral_product_generator(A, B)
    d = _matrix_sampler(A)(np.array([s])).shape[-1]
    return flow_eval(mu, s, t, np.eye(d), tol=tol, max_depth=max_depth)
