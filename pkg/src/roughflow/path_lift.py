"""Rough paths sampled on time grids: signatures, lifts, transforms and Hölder metrics.

A :class:`RoughPathGrid` stores the signature from the first grid time to every
node, so the increment ``X_ts = X_s^{-1} X_t`` satisfies Chen's relation by
construction.  Between nodes a path is read by geodesic interpolation,
``X_{t_k, t_k + theta h} = exp(theta log X_{t_k, t_k + h})``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from . import sewing
from .tensor import TruncatedTensor, _outer, _texp, _tinverse, _tlog, _tmul, _tscale

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class PathFormatError(ValueError):
    """Malformed path data; ``row`` and ``column`` locate the problem (1-based)."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True, eq=False)
class PiecewisePath:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.size < 2:
            raise ValueError("a path needs at least two samples")
        if values.shape[0] != times.size:
            raise ValueError(f"{times.size} times but {values.shape[0]} values")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def at(self, t):
        """Linear interpolation, vectorized over ``t``."""
        t = np.asarray(t, dtype=float)
        flat = t.reshape(-1)
        out = np.empty((flat.size, self.dim))
        for i in range(self.dim):
            out[:, i] = np.interp(flat, self.times, self.values[:, i])
        return out.reshape(t.shape + (self.dim,))

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def __add__(self, other: "PiecewisePath") -> "PiecewisePath":
        if not np.array_equal(self.times, other.times):
            raise ValueError("paths live on different grids")
        return PiecewisePath(self.times, self.values + other.values)

    @classmethod
    def from_function(cls, f, times) -> "PiecewisePath":
        times = np.asarray(times, dtype=float)
        return cls(times, np.asarray(f(times), dtype=float).reshape(times.size, -1))

    # CSV ------------------------------------------------------------------
    def to_csv(self, fh, comments=()):
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(self.dim)])
        for t, row in zip(self.times, self.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, fh) -> "PiecewisePath":
        rows = [(k, r) for k, r in enumerate(csv.reader(fh), start=1) if r and not r[0].lstrip().startswith("#")]
        if not rows:
            raise PathFormatError("empty CSV")
        hrow, header = rows[0]
        header = [h.strip() for h in header]
        if header[0] != "t" or len(header) < 2 or header[1:] != [f"x{i + 1}" for i in range(len(header) - 1)]:
            raise PathFormatError(f"header must be t,x1,...,xl (got {','.join(header)})", row=hrow)
        times, values = [], []
        for k, r in rows[1:]:
            if len(r) != len(header):
                raise PathFormatError(f"row {k}: expected {len(header)} fields, got {len(r)}", row=k)
            parsed = []
            for c, cell in enumerate(r, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise PathFormatError(f"row {k}, column {c}: not a number: {cell!r}", row=k, column=c) from None
            times.append(parsed[0])
            values.append(parsed[1:])
        for k in range(1, len(times)):
            if times[k] <= times[k - 1]:
                raise PathFormatError(f"row {rows[k + 1][0]}: times must increase strictly", row=rows[k + 1][0])
        return cls(np.array(times), np.array(values))


# batched helpers on raw level tuples ------------------------------------------

def _chain(cells, dim: int, cap: int):
    """Absolute signatures from per-cell increments (raw levels with a leading cell axis)."""
    n = cells[1].shape[0]
    e1 = cells[1]
    s1 = np.zeros((n + 1, dim))
    s1[1:] = np.cumsum(e1, axis=0)
    out = [np.ones(n + 1), s1]
    if cap >= 2:
        e2 = cells[2]
        s2 = np.zeros((n + 1, dim**2))
        s2[1:] = np.cumsum(_outer(s1[:-1], e1) + e2, axis=0)
        out.append(s2)
    if cap >= 3:
        e3 = cells[3]
        s3 = np.zeros((n + 1, dim**3))
        s3[1:] = np.cumsum(_outer(s2[:-1], e1) + _outer(s1[:-1], e2) + e3, axis=0)
        out.append(s3)
    return tuple(out)


def _increments_from(sig, a, b):
    """Raw increments X_{t_a t_b} for index arrays a, b (closed-form group division)."""
    x1 = sig[1][b] - sig[1][a]
    out = [np.ones(x1.shape[0]), x1]
    if len(sig) > 2:
        x2 = sig[2][b] - sig[2][a] - _outer(sig[1][a], x1)
        out.append(x2)
    if len(sig) > 3:
        x3 = sig[3][b] - sig[3][a] - _outer(sig[2][a], x1) - _outer(sig[1][a], x2)
        out.append(x3)
    return tuple(out)


def _exp_vectors(delta, cap):
    """Raw exp(v) for a stack of vectors v."""
    m = delta.shape[0]
    raw = (np.zeros(m), delta) + tuple(np.zeros((m, delta.shape[1] ** k)) for k in range(2, cap + 1))
    return _texp(raw)


@dataclass(frozen=True, eq=False)
class RoughPathGrid:
    p: float
    times: np.ndarray
    sigs: tuple
    origin: np.ndarray
    weak_geometric: bool = True

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not 1.0 <= self.p < 4.0:
            raise ValueError(f"p must lie in [1, 4), got {self.p}")
        sigs = tuple(np.asarray(s, dtype=float) for s in self.sigs)
        if sigs[1].shape[0] != times.size:
            raise ValueError("one signature per grid time")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sigs", sigs)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(-1))

    # shape ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.sigs[1].shape[1]

    @property
    def level_cap(self) -> int:
        return len(self.sigs) - 1

    @property
    def n_nodes(self) -> int:
        return self.times.size

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def sig(self, i: int) -> TruncatedTensor:
        return TruncatedTensor(self.dim, self.level_cap, float(self.sigs[0][i]), tuple(s[i] for s in self.sigs[1:]))

    def path_values(self) -> np.ndarray:
        return self.origin + self.sigs[1]

    def increment_idx(self, i: int, j: int) -> TruncatedTensor:
        raw = _increments_from(self.sigs, np.array([i]), np.array([j]))
        return TruncatedTensor(self.dim, self.level_cap, 1.0, tuple(r[0] for r in raw[1:]))

    def increments_idx(self, a, b):
        return _increments_from(self.sigs, np.asarray(a), np.asarray(b))

    @cached_property
    def _cell_logs(self):
        idx = np.arange(self.n_nodes - 1)
        return _tlog(_increments_from(self.sigs, idx, idx + 1))

    def node_index(self, t: float, rtol: float = 1e-12):
        """Index of grid time ``t`` or None."""
        k = int(np.searchsorted(self.times, t))
        scale = rtol * max(1.0, abs(t))
        for c in (k - 1, k):
            if 0 <= c < self.n_nodes and abs(self.times[c] - t) <= scale:
                return c
        return None

    def sigs_at(self, tau):
        """Raw absolute signatures at arbitrary times (geodesic interpolation in cells)."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        n = self.n_nodes - 1
        k = np.clip(np.searchsorted(self.times, tau, side="right") - 1, 0, n - 1)
        h = self.times[k + 1] - self.times[k]
        theta = (tau - self.times[k]) / h
        logs = tuple(l[k] for l in self._cell_logs)
        piece = _texp((np.zeros_like(theta),) + tuple(theta[:, None] * l for l in logs[1:]))
        base = tuple(s[k] for s in self.sigs)
        out = _tmul(base, piece)
        end = theta >= 1.0
        if np.any(end):
            out = tuple(np.where(end.reshape((-1,) + (1,) * (o.ndim - 1)), s[k + 1], o) for o, s in zip(out, self.sigs))
        return out

    def increment(self, s: float, t: float) -> TruncatedTensor:
        i, j = self.node_index(s), self.node_index(t)
        if i is not None and j is not None:
            return self.increment_idx(i, j)
        raw = self.increments_between(np.array([s]), np.array([t]))
        return TruncatedTensor(self.dim, self.level_cap, 1.0, tuple(r[0] for r in raw[1:]))

    def increments_between(self, s, t):
        a = self.sigs_at(s)
        b = self.sigs_at(t)
        return _tmul(_tinverse(a), b)

    def path_at(self, tau) -> np.ndarray:
        """Level-1 trace, origin included (linear in every cell)."""
        return self.origin + self.sigs_at(tau)[1]

    def restrict(self, indices) -> "RoughPathGrid":
        indices = np.asarray(indices)
        return RoughPathGrid(self.p, self.times[indices], tuple(s[indices] for s in self.sigs), self.origin,
                             self.weak_geometric)

    def with_level_cap(self, cap: int) -> "RoughPathGrid":
        if cap > self.level_cap:
            raise ValueError("use lyons_extend_level3 to add levels")
        return RoughPathGrid(self.p, self.times, self.sigs[: cap + 1], self.origin, self.weak_geometric)

    # serialization --------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "p": self.p,
            "times": self.times.tolist(),
            "origin": self.origin.tolist(),
            "weak_geometric": bool(self.weak_geometric),
            "signatures": [self.sig(i).to_json() for i in range(self.n_nodes)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RoughPathGrid":
        tensors = [TruncatedTensor.from_json(s) for s in obj["signatures"]]
        cap = tensors[0].level_cap
        sigs = (np.array([t.scalar for t in tensors]),) + tuple(
            np.stack([t.levels[k] for t in tensors]) for k in range(cap)
        )
        return cls(float(obj["p"]), np.array(obj["times"]), sigs, np.array(obj["origin"]),
                   bool(obj.get("weak_geometric", True)))


def from_cells(times, cells, origin, p: float, weak_geometric: bool = True) -> RoughPathGrid:
    dim = cells[1].shape[1]
    cap = len(cells) - 1
    return RoughPathGrid(p, times, _chain(cells, dim, cap), origin, weak_geometric)


def chen_residual(X: RoughPathGrid, rng=None, trials: int = 200) -> float:
    """max |X_su X_ut - X_st| over random grid triples, plus every consecutive triple near the ends."""
    rng = np.random.default_rng(rng)
    n = X.n_nodes
    if n < 3:
        return 0.0
    trip = np.sort(rng.integers(0, n, size=(trials, 3)), axis=1)
    extra = np.array([[0, k, n - 1] for k in range(1, n - 1)][:50])
    trip = np.concatenate([trip, extra], axis=0)
    a, b, c = trip.T
    lhs = _tmul(X.increments_idx(a, b), X.increments_idx(b, c))
    rhs = X.increments_idx(a, c)
    return float(max(np.max(np.abs(l - r)) for l, r in zip(lhs[1:], rhs[1:])))


def is_weak_geometric(X: RoughPathGrid, tol: float = 1e-8) -> bool:
    from .tensor import is_group_like

    return all(is_group_like(X.sig(i), tol) for i in range(X.n_nodes))


# constructors -----------------------------------------------------------------

def segment_signature(v, N: int) -> TruncatedTensor:
    v = np.asarray(v, dtype=float).reshape(-1)
    raw = _exp_vectors(v[None, :], N)
    return TruncatedTensor(v.size, N, 1.0, tuple(r[0] for r in raw[1:]))


def _default_p(N: int) -> float:
    return {1: 1.5, 2: 2.5, 3: 3.5}[N]


def signature(path: PiecewisePath, N: int = 2, p: float | None = None) -> RoughPathGrid:
    """Exact signature of the piecewise-linear interpolant, at every node."""
    if N not in (1, 2, 3):
        raise ValueError("N must be 1, 2 or 3")
    cells = _exp_vectors(path.increments(), N)
    return from_cells(path.times, cells, path.values[0], p if p is not None else _default_p(N))


def young_cross(a, b, times, tol: float = 1e-10, max_depth: int = 16):
    """Absolute Young integrals int_{t_0}^{t_i} a_{u t_0} (x) db_u at every node.

    ``a`` and ``b`` are vectorized samplers of time (or sampled paths).  Each
    cell is sewn with the trapezoid germ 1/2 (a_u + a_v) (x) (b_v - b_u), which
    differs from the left-point germ by a term of order |v - u|^(alpha + beta)
    and so has the same sewn limit.
    """
    sa = sewing._as_sampler(a)
    sb = sewing._as_sampler(b)
    times = np.asarray(times, dtype=float)
    a0 = np.asarray(sa(times[:1]), dtype=float).reshape(1, -1)[0]

    def germ(u, v):
        au = np.asarray(sa(u), dtype=float).reshape(u.size, -1) - a0
        av = np.asarray(sa(v), dtype=float).reshape(v.size, -1) - a0
        db = np.asarray(sb(v), dtype=float).reshape(v.size, -1) - np.asarray(sb(u), dtype=float).reshape(u.size, -1)
        return _outer(0.5 * (au + av), db)

    res = sewing.sew_cells(sewing.AlmostAdditiveFunctional(germ, 2.0), times, tol=tol, max_depth=max_depth,
                           accumulate=True)
    if not res.converged:
        warnings.warn(f"cell sewing stopped at depth {res.depth} with change {res.last_delta:.3g}")
    out = np.zeros((times.size, res.value.shape[1]))
    out[1:] = np.cumsum(res.value, axis=0)
    return out, res


def _warn_regularity(times, values, threshold, what):
    alpha = sewing.holder_exponent_estimate(times, values)
    if alpha <= threshold:
        warnings.warn(f"{what}: empirical Hölder exponent {alpha:.3f} <= {threshold:.3f}")
    return alpha


def young_lift(path, p: float = 2.5, times=None, tol: float = 1e-10) -> RoughPathGrid:
    """Level-2 lift of an alpha-Hölder path, alpha > 1/2, by Young integration.

    ``path`` is a :class:`PiecewisePath` or a vectorized callable; for a callable,
    ``times`` gives the output grid and sub-cell values come from the callable.
    """
    if isinstance(path, PiecewisePath):
        times = path.times if times is None else np.asarray(times, dtype=float)
        sampler = path.at
    else:
        if times is None:
            raise ValueError("a callable path needs an output grid")
        times = np.asarray(times, dtype=float)
        sampler = sewing._as_sampler(path)
    values = np.asarray(sampler(times), dtype=float).reshape(times.size, -1)
    _warn_regularity(times, values, 0.5, "young_lift")
    s2, _ = young_cross(sampler, sampler, times, tol=tol)
    s1 = values - values[0]
    sigs = (np.ones(times.size), s1, s2)
    return RoughPathGrid(p, times, sigs, values[0], weak_geometric=True)


def pure_area(T: float = 1.0, steps: int = 64, p: float = 2.5) -> RoughPathGrid:
    """X = 0 and level 2 equal to pi (t - s) J with J = [[0, 1], [-1, 0]]."""
    times = np.linspace(0.0, T, steps + 1)
    s2 = math.pi * times[:, None] * J2.reshape(1, -1)
    sigs = (np.ones(times.size), np.zeros((times.size, 2)), s2)
    return RoughPathGrid(p, times, sigs, np.zeros(2), weak_geometric=True)


def oscillator_path(n: int, steps: int, T: float = 1.0) -> PiecewisePath:
    """x_t = exp(2 i pi n^2 t) / n, as a sampled path in R^2."""
    if n < 1:
        raise ValueError("n >= 1")
    t = np.linspace(0.0, T, steps + 1)
    ang = 2.0 * math.pi * n * n * t
    return PiecewisePath(t, np.column_stack([np.cos(ang), np.sin(ang)]) / n)


def _sampler_on(X: RoughPathGrid, h):
    if isinstance(h, PiecewisePath):
        return h.at
    return sewing._as_sampler(h)


def translate(X: RoughPathGrid, h, tol: float = 1e-10) -> RoughPathGrid:
    """tau_h(X): level 1 shifted by h, level 2 corrected by the three cross integrals.

    The integral of h against dX^1 is defined by integration by parts from the
    Young integral of X^1 against dh.
    """
    if X.level_cap != 2:
        raise ValueError("translation is implemented for level-2 rough paths")
    hs = _sampler_on(X, h)
    hv = np.asarray(hs(X.times), dtype=float).reshape(X.n_nodes, -1)
    if hv.shape[1] != X.dim:
        raise ValueError(f"h has dimension {hv.shape[1]}, rough path has {X.dim}")
    if isinstance(h, PiecewisePath):
        slopes = np.abs(np.diff(h.values, axis=0)) / np.diff(h.times)[:, None]
        if not np.all(np.isfinite(slopes)):
            raise ValueError("h is not Lipschitz on its grid")
    a_s = X.path_at
    cross, _ = young_cross(a_s, hs, X.times, tol=tol)  # int a_{u0} (x) dh_u
    hh, _ = young_cross(hs, hs, X.times, tol=tol)
    h1 = hv - hv[0]
    a1 = X.sigs[1]
    d = X.dim
    ibp = _outer(h1, a1) - cross.reshape(-1, d, d).transpose(0, 2, 1).reshape(-1, d * d)
    s2 = X.sigs[2] + cross + ibp + hh
    sigs = (np.ones(X.n_nodes), a1 + h1, s2)
    return RoughPathGrid(X.p, X.times, sigs, X.origin + hv[0], X.weak_geometric)


def pair_with_smooth(X: RoughPathGrid, h, tol: float = 1e-10) -> RoughPathGrid:
    """Rough path over R^(l+d) pairing X with a path h of Hölder exponent > 1 - 1/p.

    Level 2 blocks: [[XX, int X (x) dh], [int h (x) dX, int h (x) dh]], the
    lower-left block being defined by integration by parts.
    """
    if X.level_cap != 2:
        raise ValueError("pairing is implemented for level-2 rough paths")
    hs = _sampler_on(X, h)
    hv = np.asarray(hs(X.times), dtype=float).reshape(X.n_nodes, -1)
    l, d = X.dim, hv.shape[1]
    if d == 0 or l == 0:
        raise ValueError("empty dimension")
    _warn_regularity(X.times, hv, 1.0 - 1.0 / X.p, "pair_with_smooth")
    C, _ = young_cross(X.path_at, hs, X.times, tol=tol)
    D, _ = young_cross(hs, hs, X.times, tol=tol)
    h1 = hv - hv[0]
    a1 = X.sigs[1]
    m = X.n_nodes
    C = C.reshape(m, l, d)
    B = (h1[:, :, None] * a1[:, None, :]) - C.transpose(0, 2, 1)
    top = np.concatenate([X.sigs[2].reshape(m, l, l), C], axis=2)
    bottom = np.concatenate([B, D.reshape(m, d, d)], axis=2)
    s2 = np.concatenate([top, bottom], axis=1).reshape(m, -1)
    sigs = (np.ones(m), np.concatenate([a1, h1], axis=1), s2)
    return RoughPathGrid(X.p, X.times, sigs, np.concatenate([X.origin, hv[0]]), X.weak_geometric)


@dataclass
class ExtensionReport:
    depth: int
    last_delta: float
    converged: bool
    deltas: list


def lyons_extend_level3(X: RoughPathGrid, tol: float = 1e-9, max_depth: int = 20, report: bool = False):
    """Extend a level-2 rough path to level 3 by sewing the almost-multiplicative map.

    Every grid cell is split into 2^m geodesic pieces carrying (1, X^1, XX, 0);
    their ordered product converges, as m grows, to the multiplicative level 3.
    Refinement stops once the accumulated change over all cells is below ``tol``.
    Cells are then chained by Chen's relation.
    """
    if X.level_cap != 2:
        raise ValueError("extension starts from a level-2 rough path")
    if not 2.0 <= X.p < 3.0:
        warnings.warn(f"extension from level 2 is meant for 2 <= p < 3, got {X.p}")
    d = X.dim
    logs = X._cell_logs  # (0, l1, l2) per cell
    ncell = logs[1].shape[0]

    def product(depth):
        m = 1 << depth
        theta = 1.0 / m
        piece = _texp((np.zeros(ncell), theta * logs[1], theta * logs[2]))
        # level-3 seed is zero on every piece
        acc = piece + (np.zeros((ncell, d**3)),)
        for _ in range(depth):
            acc = _tmul(acc, acc)
        return acc

    prev = product(0)
    deltas = []
    result = None
    for depth in range(1, max_depth + 1):
        cur = product(depth)
        delta = float(np.sum(np.max(np.abs(cur[3] - prev[3]), axis=1)))
        deltas.append(delta)
        if delta < tol:
            result = ExtensionReport(depth, delta, True, deltas)
            prev = cur
            break
        prev = cur
    if result is None:
        result = ExtensionReport(max_depth, deltas[-1], False, deltas)
        warnings.warn(f"level-3 extension did not converge: last change {deltas[-1]:.3g}")
    # the level-1 and level-2 parts of the cells are reproduced exactly
    cells = _increments_from(X.sigs, np.arange(ncell), np.arange(1, ncell + 1))
    cells = cells + (prev[3],)
    out = from_cells(X.times, cells, X.origin, X.p, X.weak_geometric)
    return (out, result) if report else out


# Hölder metrics -----------------------------------------------------------------

def _level_increments_row(sigs, a, level):
    b = np.arange(a + 1, sigs[1].shape[0])
    x1 = sigs[1][b] - sigs[1][a]
    if level == 1:
        return b, x1
    x2 = sigs[2][b] - sigs[2][a] - _outer(sigs[1][a], x1)
    if level == 2:
        return b, x2
    x3 = sigs[3][b] - sigs[3][a] - _outer(sigs[2][a], x1) - _outer(sigs[1][a], x2)
    return b, x3


@njit(cache=True)
def _holder_sup_kernel(t, x1, x2, x3, y1, y2, y3, level, p, lagpow):
    """sup_{a<b} |(X - Y)^level_{ab}| / (t_b - t_a)^(level/p), levels given as absolute signatures.

    On uniform grids ``lagpow[k]`` holds (k h)^(level/p); otherwise it is empty.
    """
    n = t.shape[0]
    d = x1.shape[1]
    q = level / p
    row_best = np.zeros(n)
    for a in range(n - 1):
        best = 0.0
        for b in range(a + 1, n):
            acc = 0.0
            if level == 1:
                for i in range(d):
                    v = (x1[b, i] - x1[a, i]) - (y1[b, i] - y1[a, i])
                    acc += v * v
            elif level == 2:
                for i in range(d):
                    for j in range(d):
                        k = i * d + j
                        vx = x2[b, k] - x2[a, k] - x1[a, i] * (x1[b, j] - x1[a, j])
                        vy = y2[b, k] - y2[a, k] - y1[a, i] * (y1[b, j] - y1[a, j])
                        v = vx - vy
                        acc += v * v
            else:
                for i in range(d):
                    for j in range(d):
                        for m in range(d):
                            k = (i * d + j) * d + m
                            ij = i * d + j
                            jm = j * d + m
                            ex2 = x2[b, jm] - x2[a, jm] - x1[a, j] * (x1[b, m] - x1[a, m])
                            ey2 = y2[b, jm] - y2[a, jm] - y1[a, j] * (y1[b, m] - y1[a, m])
                            vx = x3[b, k] - x3[a, k] - x2[a, ij] * (x1[b, m] - x1[a, m]) - x1[a, i] * ex2
                            vy = y3[b, k] - y3[a, k] - y2[a, ij] * (y1[b, m] - y1[a, m]) - y1[a, i] * ey2
                            v = vx - vy
                            acc += v * v
            den = lagpow[b - a] if lagpow.shape[0] > 0 else (t[b] - t[a]) ** q
            r = math.sqrt(acc) / den
            if r > best:
                best = r
        row_best[a] = best
    return row_best.max() if n > 1 else 0.0


def _padded_levels(X):
    n, d = X.n_nodes, X.dim
    out = []
    for k in (1, 2, 3):
        out.append(np.ascontiguousarray(X.sigs[k]) if k <= X.level_cap else np.zeros((n, d**k)))
    return out


def _holder_sup(X, level, other=None) -> float:
    """sup_{s<t} |X^i_ts - Y^i_ts| / (t - s)^(i/p) over grid pairs (Y = 0 if not given)."""
    xs = _padded_levels(X)
    ys = _padded_levels(other) if other is not None else [np.zeros_like(v) for v in xs]
    t = np.ascontiguousarray(X.times)
    h = np.diff(t)
    if np.all(np.abs(h - h.mean()) <= 1e-12 * h.mean()):
        lagpow = (np.arange(t.size) * h.mean()) ** (level / X.p)
    else:
        lagpow = np.zeros(0)
    return float(_holder_sup_kernel(t, *xs, *ys, int(level), float(X.p), lagpow))


def holder_norm(X: RoughPathGrid, i: int) -> float:
    """sup over grid pairs s < t of |X^i_ts| / (t - s)^(i/p)."""
    if not 1 <= i <= X.level_cap:
        raise ValueError(f"level {i} outside 1..{X.level_cap}")
    return _holder_sup(X, i)


def _check_same(X: RoughPathGrid, Y: RoughPathGrid):
    if X.dim != Y.dim or X.level_cap != Y.level_cap:
        raise ValueError("rough paths have different shapes")
    if X.p != Y.p:
        raise ValueError("rough paths use different p")
    if X.times.size != Y.times.size or not np.allclose(X.times, Y.times, rtol=0, atol=1e-12):
        raise ValueError("distance needs a common grid")


def level_distances(X: RoughPathGrid, Y: RoughPathGrid) -> list[float]:
    _check_same(X, Y)
    return [_holder_sup(X, i, Y) for i in range(1, X.level_cap + 1)]


def distance(X: RoughPathGrid, Y: RoughPathGrid) -> float:
    """|x_0 - y_0| + max over levels of the (i/p)-Hölder distance of the increments."""
    return float(np.linalg.norm(X.origin - Y.origin) + max(level_distances(X, Y)))
