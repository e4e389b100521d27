"""Brownian motion on dyadic grids, its Ito and Stratonovich lifts, and experiments.

Samples are built by the Levy-Ciesielski midpoint construction.  Level k of the
construction draws its Gaussians from ``default_rng([seed, k])``, so the path
at depth n is the restriction of the path at any deeper level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controlled import ControlledPath, rough_integral
from .path_lift import PiecewisePath, RoughPathGrid, _chain, _exp_vectors, signature
from .rde.fields import VectorFieldSet
from .rde.solver import ode_solve_piecewise_linear, solve_path

MAX_DEPTH = 24


@dataclass(frozen=True, eq=False)
class BrownianSample:
    dim: int
    depth: int
    T: float
    seed: int
    values: np.ndarray  # (2^depth + 1, dim), values[0] = 0

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, (1 << self.depth) + 1)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def path(self) -> PiecewisePath:
        return PiecewisePath(self.times, self.values)

    def at_depth(self, n: int) -> "BrownianSample":
        """Restriction to the depth-n dyadic grid (n <= depth)."""
        if n > self.depth:
            return refine(self, n)
        step = 1 << (self.depth - n)
        return BrownianSample(self.dim, n, self.T, self.seed, self.values[::step].copy())


def _bridge_levels(values, T, levels, rng_for):
    """Insert midpoints for the given construction levels; values has shape (..., m + 1, dim)."""
    for k in levels:
        m = values.shape[-2] - 1
        sd = math.sqrt(T / (1 << (k + 1)))
        z = rng_for(k, values.shape[:-2] + (m, values.shape[-1]))
        mid = 0.5 * (values[..., :-1, :] + values[..., 1:, :]) + sd * z
        out = np.empty(values.shape[:-2] + (2 * m + 1, values.shape[-1]))
        out[..., 0::2, :] = values
        out[..., 1::2, :] = mid
        values = out
    return values


def _stream(seed, k, shape, chunk=None):
    key = [int(seed), int(k)] if chunk is None else [int(seed), int(k), int(chunk)]
    return np.random.default_rng(key).standard_normal(shape)


def sample(dim: int, n: int, T: float = 1.0, seed: int = 0) -> BrownianSample:
    if not 0 <= n <= MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {MAX_DEPTH}]")
    if T <= 0:
        raise ValueError("T must be positive")
    values = np.zeros((2, dim))
    values[1] = math.sqrt(T) * _stream(seed, 0, (dim,))
    values = _bridge_levels(values, T, range(1, n + 1), lambda k, shape: _stream(seed, k, shape))
    return BrownianSample(dim, n, T, seed, values)


def refine(s: BrownianSample, n: int) -> BrownianSample:
    """The same Brownian path at a finer depth; coarse values are kept exactly."""
    if n < s.depth:
        return s.at_depth(n)
    if n > MAX_DEPTH:
        raise ValueError(f"depth must not exceed {MAX_DEPTH}")
    values = _bridge_levels(s.values, s.T, range(s.depth + 1, n + 1), lambda k, shape: _stream(s.seed, k, shape))
    return BrownianSample(s.dim, n, s.T, s.seed, values)


def sample_batch(count: int, dim: int, n: int, T: float = 1.0, seed: int = 0, chunk: int = 0) -> np.ndarray:
    """``count`` independent paths, shape (count, 2^n + 1, dim), from the stream (seed, chunk)."""
    values = np.zeros((count, 2, dim))
    values[:, 1] = math.sqrt(T) * _stream(seed, 0, (count, dim), chunk)
    return _bridge_levels(values, T, range(1, n + 1), lambda k, shape: _stream(seed, k, shape, chunk))


# lifts --------------------------------------------------------------------------------

def piecewise_linear_lift(s: BrownianSample, p: float = 2.5) -> RoughPathGrid:
    if not 2.0 < p < 3.0:
        raise ValueError("Brownian lifts need 2 < p < 3")
    return signature(s.path(), N=2, p=p)


def stratonovich_lift(s: BrownianSample, extra_depth: int = 6, p: float = 2.5) -> RoughPathGrid:
    """Piecewise-linear lift of the bridge refinement at depth n + extra_depth, read on the depth-n grid."""
    fine = refine(s, s.depth + extra_depth)
    X = piecewise_linear_lift(fine, p)
    return X.restrict(np.arange(0, X.n_nodes, 1 << extra_depth))


def ito_lift(strat: RoughPathGrid) -> RoughPathGrid:
    """Subtract (t - s) Id / 2 from every level-2 increment."""
    d = strat.dim
    shift = 0.5 * (strat.times - strat.times[0])[:, None] * np.eye(d).reshape(1, -1)
    sigs = (strat.sigs[0], strat.sigs[1], strat.sigs[2] - shift) + tuple(strat.sigs[3:])
    return RoughPathGrid(strat.p, strat.times, sigs, strat.origin, weak_geometric=False)


def levy_area(X: RoughPathGrid, i: int = 0, j: int = 1) -> np.ndarray:
    """(XX^{ij} - XX^{ji}) / 2 from the first node to every node."""
    d = X.dim
    s2 = X.sigs[2].reshape(-1, d, d)
    return 0.5 * (s2[:, i, j] - s2[:, j, i])


# statistics ---------------------------------------------------------------------------

@dataclass
class MCSummary:
    mean: float
    variance: float
    mean_se: float
    variance_se: float
    count: int

    def mean_ci(self, k: float = 3.0):
        return self.mean - k * self.mean_se, self.mean + k * self.mean_se

    def variance_ci(self, k: float = 3.0):
        return self.variance - k * self.variance_se, self.variance + k * self.variance_se


def summarize(values) -> MCSummary:
    v = np.asarray(values, dtype=float)
    n = v.size
    mean = math.fsum(v) / n
    c = v - mean
    var = math.fsum(c * c) / (n - 1)
    m4 = math.fsum(c**4) / n
    return MCSummary(mean, var, math.sqrt(var / n), math.sqrt(max(m4 - var * var, 0.0) / n), n)


def polygon_areas(paths: np.ndarray) -> np.ndarray:
    """Levy area over the whole horizon of piecewise-linear paths, shape (count, m + 1, >= 2)."""
    return increment_areas(np.diff(paths, axis=1))


def increment_areas(d: np.ndarray) -> np.ndarray:
    """Levy area of the polygon with increments d of shape (count, m, >= 2)."""
    b = np.cumsum(d, axis=1) - d
    return 0.5 * (np.einsum("cm,cm->c", b[:, :, 0], d[:, :, 1]) - np.einsum("cm,cm->c", b[:, :, 1], d[:, :, 0]))


def levy_area_stats(num_samples: int, n: int = 10, T: float = 1.0, seed: int = 0,
                    chunk: int = 4096) -> MCSummary:
    """Mean and variance of the Levy area A_T of the depth-n polygonal lift.

    Only the law matters here, so increments are drawn directly as i.i.d.
    Gaussians from the stream (seed, chunk) instead of through the bridge.
    """
    areas = []
    done = 0
    c = 0
    h = T / (1 << n)
    while done < num_samples:
        m = min(chunk, num_samples - done)
        rng = np.random.default_rng([int(seed), int(n), c])
        areas.append(increment_areas(math.sqrt(h) * rng.standard_normal((m, 1 << n, 2))))
        done += m
        c += 1
    return summarize(np.concatenate(areas))


# experiments ------------------------------------------------------------------------------

@dataclass
class WongZakaiRow:
    depth: int
    gap: float


def wong_zakai_experiment(F: VectorFieldSet, x0, depths, seed: int = 0, T: float = 1.0,
                          extra_depth: int = 6, p: float = 2.5, tol: float = 1e-8) -> list[WongZakaiRow]:
    """sup over the coarsest grid of |ODE driven by B^(n) - RDE driven by the Stratonovich lift|."""
    depths = sorted(int(n) for n in depths)
    top = sample(F.driver_dim, depths[-1], T, seed)
    strat = stratonovich_lift(top, extra_depth, p)
    rde = solve_path(F, strat, x0, tol=tol).values
    coarse = 1 << (depths[-1] - depths[0])
    ref = rde[::coarse]
    rows = []
    for n in depths:
        s = top.at_depth(n)
        ode = ode_solve_piecewise_linear(F, s.times, s.values, x0)
        step = 1 << (n - depths[0])
        rows.append(WongZakaiRow(n, float(np.max(np.abs(ode[::step] - ref)))))
    return rows


@dataclass
class IntegralComparison:
    rough: np.ndarray
    riemann: np.ndarray
    gap: float
    depth: int = 0


def rough_vs_ito_integral(s: BrownianSample, G, DG, n: int | None = None, tol: float = 1e-9,
                          stratonovich: bool = False, extra_depth: int = 6) -> IntegralComparison:
    """int_0^T G(B) dB against the Ito (or Stratonovich) lift versus left-point Riemann sums.

    ``G`` maps states (m, l) to (m, *out, l) and ``DG`` to (m, *out, l, l).
    """
    s = s.at_depth(s.depth if n is None else n)
    strat = stratonovich_lift(s, extra_depth)
    X = strat if stratonovich else ito_lift(strat)
    b = s.values
    vals = np.asarray(G(b), dtype=float)
    der = np.asarray(DG(b), dtype=float)
    F = ControlledPath(X, vals, der)
    rough = np.asarray(rough_integral(F, X, tol=tol).value)
    riemann = np.einsum("m...k,mk->...", vals[:-1], np.diff(b, axis=0))
    return IntegralComparison(rough, riemann, float(np.max(np.abs(rough - riemann))), s.depth)


def delayed_pair(s: BrownianSample, eps: float, p: float = 2.5) -> RoughPathGrid:
    """Lift of x_t = (B_{t - eps}, B_t), with B_u = 0 for u < 0, for a one-dimensional sample.

    eps is rounded to a whole number of grid steps; every cell is shorter than
    eps and longer increments are joined by Chen's relation.
    """
    if s.dim != 1:
        raise ValueError("delayed pairs are built from one-dimensional samples")
    h = s.T / (1 << s.depth)
    k = int(round(eps / h))
    if k < 1:
        raise ValueError(f"eps = {eps} is below the grid step {h}")
    b = s.values[:, 0]
    delayed = np.concatenate([np.zeros(k), b[:-k]]) if k < b.size else np.zeros_like(b)
    return signature(PiecewisePath(s.times, np.column_stack([delayed, b])), N=2, p=p)


def delayed_limit(s: BrownianSample, p: float = 2.5) -> RoughPathGrid:
    """Y_t = exp(B_t (1, 1) - (t / 2) J), J = [[0, 1], [-1, 0]]."""
    if s.dim != 1:
        raise ValueError("one-dimensional samples only")
    t = s.times
    b = s.values[:, 0]
    s1 = np.column_stack([b, b])
    s2 = 0.5 * (b**2)[:, None] * np.ones((1, 4)) + 0.5 * t[:, None] * np.array([[0.0, -1.0, 1.0, 0.0]])
    return RoughPathGrid(p, t, (np.ones(t.size), s1, s2), np.zeros(2), weak_geometric=True)


def joint_lift(X: RoughPathGrid, s: BrownianSample, extra_depth: int = 6) -> RoughPathGrid:
    """Lift of (x, B) over R^(d + l) with the Ito lift of B.

    Cross blocks int X dB are left-point Riemann-Ito sums at grid resolution
    and int B dX follows by integration by parts.
    """
    if X.level_cap != 2:
        raise ValueError("joint lifts are built at level 2")
    if X.n_nodes != s.values.shape[0] or not np.allclose(X.times, s.times, rtol=0, atol=1e-12):
        raise ValueError("the rough path and the Brownian sample must share a grid")
    B = ito_lift(stratonovich_lift(s, extra_depth, X.p))
    d, l = X.dim, s.dim
    idx = np.arange(X.n_nodes - 1)
    xc = X.increments_idx(idx, idx + 1)
    bc = B.increments_idx(idx, idx + 1)
    m = idx.size
    block = np.zeros((m, d + l, d + l))
    block[:, :d, :d] = xc[2].reshape(m, d, d)
    block[:, d:, d:] = bc[2].reshape(m, l, l)
    block[:, d:, :d] = bc[1][:, :, None] * xc[1][:, None, :]
    cells = (np.ones(m), np.concatenate([xc[1], bc[1]], axis=1), block.reshape(m, -1))
    k = d + l
    return RoughPathGrid(X.p, X.times, _chain(cells, k, 2), np.concatenate([X.origin, np.zeros(l)]),
                         weak_geometric=False)
