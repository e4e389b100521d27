"""Additive sewing over dyadic partitions, Young integrals and p-variation controls."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_MAX_DEPTH = 22
# cap on the number of germ evaluations held in memory at once
_CHUNK = 1 << 21


@dataclass
class SewResult:
    value: np.ndarray
    depth: int
    last_delta: float
    converged: bool
    deltas: list = field(default_factory=list)


@dataclass
class AlmostAdditiveFunctional:
    """A germ mu(s, t) with |mu_tu + mu_us - mu_ts| <= c0 |t - s|^a.

    ``evaluator`` takes arrays of left and right times and returns an array
    whose first axis runs over the pairs.  Set ``vectorized=False`` for a
    scalar-time callable.
    """

    evaluator: Callable
    exponent: float
    defect_constant: float | None = None
    vectorized: bool = True

    def __post_init__(self):
        if self.exponent <= 1.0:
            raise ValueError(f"sewing needs exponent a > 1, got {self.exponent}")

    def __call__(self, s, t):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.vectorized:
            return np.asarray(self.evaluator(s, t), dtype=float)
        return np.array([np.asarray(self.evaluator(a, b), dtype=float) for a, b in zip(s, t)])

    def defect(self, s, u, t):
        return self(u, t) + self(s, u) - self(s, t)

    def validate(self, s: float, t: float, rng=None, trials: int = 64) -> float:
        """Spot-check the declared defect bound on random triples; returns the worst ratio."""
        rng = np.random.default_rng(rng)
        a = rng.uniform(s, t, size=(trials, 3))
        a.sort(axis=1)
        d = self.defect(a[:, 0], a[:, 1], a[:, 2]).reshape(trials, -1)
        size = np.max(np.abs(d), axis=1)
        ratio = float(np.max(size / np.maximum(a[:, 2] - a[:, 0], 1e-300) ** self.exponent))
        if self.defect_constant is not None and ratio > self.defect_constant:
            warnings.warn(f"defect ratio {ratio:.3g} exceeds declared constant {self.defect_constant:.3g}")
        return ratio


@dataclass
class Control:
    """A superadditive map omega(s, t) >= 0, null on the diagonal."""

    evaluator: Callable

    def __call__(self, s: float, t: float) -> float:
        return float(self.evaluator(s, t))

    def check_superadditive(self, s, u, t, tol: float = 1e-12) -> bool:
        return self(s, u) + self(u, t) <= self(s, t) + tol


def _cell_sums(mu: AlmostAdditiveFunctional, left, right, depth: int):
    """Sum of mu over the depth-``depth`` dyadic partition of each cell [left_i, right_i]."""
    m = 1 << depth
    ncell = left.size
    frac = np.arange(m + 1) / m
    per_chunk = max(1, _CHUNK // m)
    out = []
    for c0 in range(0, ncell, per_chunk):
        lo = left[c0 : c0 + per_chunk, None]
        hi = right[c0 : c0 + per_chunk, None]
        pts = lo + (hi - lo) * frac[None, :]
        # pin the endpoints so the partition is exact
        pts[:, 0] = lo[:, 0]
        pts[:, -1] = hi[:, 0]
        vals = mu(pts[:, :-1].ravel(), pts[:, 1:].ravel())
        vals = vals.reshape((pts.shape[0], m) + vals.shape[1:])
        out.append(vals.sum(axis=1))
    return np.concatenate(out, axis=0)


def sew_cells(
    mu: AlmostAdditiveFunctional,
    nodes,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_depth: int = 0,
    accumulate: bool = False,
) -> SewResult:
    """Sew ``mu`` on every cell of the partition ``nodes`` simultaneously.

    Each cell is refined dyadically; refinement stops once the largest change
    over all cells between consecutive depths falls below ``tol`` (with
    ``accumulate=True``, the summed change, which bounds the error of
    cumulative sums over cells).  The returned value (one entry per cell) is
    the coarsest depth confirmed by the next refinement.
    """
    nodes = np.asarray(nodes, dtype=float)
    left, right = nodes[:-1], nodes[1:]
    prev = _cell_sums(mu, left, right, 0)
    deltas: list[float] = []
    for depth in range(1, max_depth + 1):
        cur = _cell_sums(mu, left, right, depth)
        change = np.abs(cur - prev).reshape(cur.shape[0], -1)
        if not change.size:
            delta = 0.0
        elif accumulate:
            delta = float(np.sum(np.max(change, axis=1)))
        else:
            delta = float(np.max(change))
        deltas.append(delta)
        if delta < tol and depth > min_depth:
            return SewResult(prev, depth - 1, delta, True, deltas)
        prev = cur
    return SewResult(prev, max_depth, deltas[-1] if deltas else 0.0, False, deltas)


def sew(
    mu: AlmostAdditiveFunctional,
    s: float,
    t: float,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_depth: int = 0,
) -> SewResult:
    """Additive map on [s, t] attached to the almost-additive germ ``mu``."""
    res = sew_cells(mu, [s, t], tol=tol, max_depth=max_depth, min_depth=min_depth)
    value = res.value[0]
    return SewResult(value if np.ndim(value) else float(value), res.depth, res.last_delta, res.converged, res.deltas)


def sew_indices(mu_idx: Callable, i: int, j: int, tol: float = DEFAULT_TOL, max_depth: int | None = None) -> SewResult:
    """Sewing for germs known only on grid nodes.

    ``mu_idx(left, right)`` takes integer index arrays.  Index ranges are halved
    at each depth until every piece is a single grid cell, which is the finest
    partition the data supports.
    """
    if j <= i:
        raise ValueError("need i < j")
    prev = None
    deltas: list[float] = []
    depth = 0
    while True:
        m = min(1 << depth, j - i)
        pts = np.unique(np.round(np.linspace(i, j, m + 1)).astype(int))
        cur = np.asarray(mu_idx(pts[:-1], pts[1:]), dtype=float).sum(axis=0)
        finest = pts.size == j - i + 1
        if prev is not None:
            delta = float(np.max(np.abs(cur - prev)))
            deltas.append(delta)
            if delta < tol:
                return SewResult(prev, depth - 1, delta, True, deltas)
        if finest or (max_depth is not None and depth >= max_depth):
            # at cell resolution the grid sum is the sewn value for the sampled data
            return SewResult(cur, depth, deltas[-1] if deltas else 0.0, finest, deltas)
        prev = cur
        depth += 1


def _as_sampler(obj):
    """Turn a callable or a sampled path (anything with ``.at``) into a vectorized sampler."""
    if hasattr(obj, "times") and hasattr(obj, "at"):
        return obj.at
    if callable(obj):
        def f(tt):
            tt = np.asarray(tt, dtype=float)
            out = np.asarray(obj(tt), dtype=float)
            if out.shape[: tt.ndim] != tt.shape:
                out = np.array([np.asarray(obj(x), dtype=float) for x in tt.ravel()])
            return out
        return f
    raise TypeError(f"cannot sample {obj!r}")


def holder_exponent_estimate(times, values) -> float:
    """Fit of log(max |x_{t+h} - x_t|) against log h over dyadic lags."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float).reshape(times.size, -1)
    n = times.size - 1
    lags, sizes = [], []
    lag = 1
    while lag <= n // 2:
        inc = np.linalg.norm(values[lag:] - values[:-lag], axis=1)
        h = np.mean(times[lag:] - times[:-lag])
        if np.max(inc) > 0:
            lags.append(h)
            sizes.append(np.max(inc))
        lag *= 2
    if len(lags) < 2:
        return 1.0
    slope = np.polyfit(np.log(lags), np.log(sizes), 1)[0]
    return float(slope)


def _sample_grid(sampler, s, t, n=1024):
    tt = np.linspace(s, t, n + 1)
    return tt, np.asarray(sampler(tt)).reshape(n + 1, -1)


def young_integral(x, y, s: float, t: float, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_MAX_DEPTH,
                   min_depth: int = 0, check: bool = True) -> SewResult:
    """int_s^t x_u dy_u by sewing mu_ts = x_s (y_t - y_s).

    ``x`` takes values in L(V, E) (arrays of shape (E, V), or scalars) and ``y``
    in V.  Both may be vectorized callables of time or sampled paths.
    """
    xs = _as_sampler(x)
    ys = _as_sampler(y)
    if check:
        tx, vx = _sample_grid(xs, s, t)
        ty, vy = _sample_grid(ys, s, t)
        alpha = holder_exponent_estimate(tx, vx)
        beta = holder_exponent_estimate(ty, vy)
        if alpha + beta <= 1.0:
            warnings.warn(f"empirical exponents {alpha:.2f} + {beta:.2f} <= 1; Young integral may not exist")

    def germ(a, b):
        m = a.size
        dy = (np.asarray(ys(b), dtype=float) - np.asarray(ys(a), dtype=float)).reshape(m, -1)
        xa = np.asarray(xs(a), dtype=float).reshape(m, -1, dy.shape[1])
        out = np.einsum("mev,mv->me", xa, dy)
        return out[:, 0] if out.shape[1] == 1 else out

    return sew(AlmostAdditiveFunctional(germ, 2.0), s, t, tol=tol, max_depth=max_depth, min_depth=min_depth)


def p_variation(path, p: float) -> Control:
    """omega(s, t) = sup over grid sub-partitions of sum |x_{t_k+1} - x_{t_k}|^p.

    ``s`` and ``t`` must be grid times of ``path``.
    """
    if p < 1:
        raise ValueError("p-variation needs p >= 1")
    times = np.asarray(path.times, dtype=float)
    values = np.asarray(path.values, dtype=float).reshape(times.size, -1)

    def index(u):
        k = int(np.searchsorted(times, u - 1e-12 * max(1.0, abs(u))))
        if k >= times.size or abs(times[k] - u) > 1e-9 * max(1.0, abs(u)):
            raise ValueError(f"{u} is not a grid time")
        return k

    def omega(s, t):
        i, j = index(s), index(t)
        if j <= i:
            return 0.0
        seg = values[i : j + 1]
        best = np.zeros(j - i + 1)
        for k in range(1, j - i + 1):
            jumps = np.linalg.norm(seg[k] - seg[:k], axis=1) ** p
            best[k] = np.max(best[:k] + jumps)
        return float(best[-1])

    return Control(omega)
