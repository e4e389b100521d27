"""Log-ODE (and Milstein) steps, the RDE flow generator and flow/path solvers.

A step freezes the field

    W = (t - s) V + X^i V_i + sum_{j<k} L^{jk} [V_j, V_k] + sum_w c_w V_[w] (+ S^{jk} (V_j . grad) V_k)

with L the antisymmetric level-2 part of log X_ts, c_w the Lyndon coordinates
of its level 3, and S = Sym(XX_ts) - X_ts (x) X_ts / 2, which vanishes for
weak geometric drivers.  The step is the time-1 map of y' = W(y), computed by
classical RK4 in generated straight-line Python.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import flows
from ..controlled import ControlledPath, compose_map, rough_integral_path
from ..path_lift import RoughPathGrid, _chain, _increments_from
from ..tensor import TruncatedTensor, _texp, _tlog
from .expr import Emitter
from .fields import VectorFieldSet, field_jacobian_evaluator, field_matrix_evaluator

BLOWUP = 1e12
# RK4 substeps are chosen so that h * |DW| stays below this
_STEP_SCALE = 0.01
_MAX_SUBSTEPS = 200_000


class SolverBlowUp(RuntimeError):
    """Trajectory left the region |y| <= 1e12 or became NaN."""


class NotLieElement(ValueError):
    pass


# generated integrator ---------------------------------------------------------------

def _build_stepper(F: VectorFieldSet):
    """flow(y, c, nmin): time-1 RK4 map of sum_b c_b W_b, with at least nmin substeps."""
    d = F.dim
    basis = F.basis_fields()
    nb = len(basis)
    ys = [f"y{i}" for i in range(d)]
    cs = [f"c{b}" for b in range(nb)]

    em = Emitter("math")
    comps = []
    for a in range(d):
        parts = []
        for b, V in enumerate(basis):
            if not V[a].is_zero():
                parts.append(f"c{b}*({em.expr(V[a])})")
        comps.append(" + ".join(parts) or "0.0")
    field_body = "".join(f"        {line}\n" for line in em.lines)

    jem = Emitter("math")
    rows = []
    for a in range(d):
        entries = []
        for i in range(d):
            parts = []
            for b, V in enumerate(basis):
                dv = V[a].diff(i)
                if not dv.is_zero():
                    parts.append(f"c{b}*({jem.expr(dv)})")
            if parts:
                entries.append("abs(" + " + ".join(parts) + ")")
        rows.append(" + ".join(entries) or "0.0")
    jac_body = "".join(f"    {line}\n" for line in jem.lines)

    def shifted(k, coef):
        return ", ".join(f"{y} + {coef}*{k}{i}" for i, y in enumerate(ys))

    tup = lambda names: ", ".join(names) + ("," if len(names) == 1 else "")
    src = f"""
def flow(y, c, nmin):
    {tup(ys)} = y
    {tup(cs)} = c
    def W({", ".join(ys)}):
{field_body}        return ({tup(comps)})
{jac_body}    jn = max({", ".join(rows)}{", 0.0" if d == 1 else ""})
    n = nmin if jn * nmin <= 1.0 / {_STEP_SCALE!r} else min({_MAX_SUBSTEPS}, int(math.ceil(jn / {_STEP_SCALE!r})))
    h = 1.0 / n
    hh = 0.5 * h
    h6 = h / 6.0
    for _ in range(n):
        {tup([f"k{i}" for i in range(d)])} = W({", ".join(ys)})
        {tup([f"l{i}" for i in range(d)])} = W({shifted("k", "hh")})
        {tup([f"m{i}" for i in range(d)])} = W({shifted("l", "hh")})
        {tup([f"q{i}" for i in range(d)])} = W({shifted("m", "h")})
{"".join(f"        y{i} = y{i} + h6*(k{i} + 2.0*l{i} + 2.0*m{i} + q{i})" + chr(10) for i in range(d))}    return ({tup(ys)})
"""
    scope = {"math": math}
    exec(compile(src, "<rk4>", "exec"), scope)
    raw = scope["flow"]

    def fn(y, c, nmin):
        try:
            return raw(y, c, nmin)
        except (OverflowError, ZeroDivisionError, ValueError) as e:
            raise SolverBlowUp(f"trajectory blew up: {e}") from None

    fn.source = src
    return fn


_STEPPERS: dict = {}


def stepper(F: VectorFieldSet):
    key = id(F)
    if key not in _STEPPERS or _STEPPERS[key][0] is not F:
        _STEPPERS[key] = (F, _build_stepper(F))
    return _STEPPERS[key][1]


def _check(y):
    if not all(math.isfinite(v) and abs(v) <= BLOWUP for v in y):
        raise SolverBlowUp(f"trajectory blew up: {y}")


def run_steps(F: VectorFieldSet, coeffs: np.ndarray, x, ode_substeps: int = 8, reverse: bool = False):
    """Apply the frozen-field maps for each coefficient row in turn (last row first if reversed)."""
    flow = stepper(F)
    y = tuple(float(v) for v in np.asarray(x, dtype=float).reshape(-1))
    rows = coeffs.tolist()
    if reverse:
        rows = [[-v for v in r] for r in reversed(rows)]
    for r in rows:
        y = flow(y, r, ode_substeps)
        _check(y)
    return np.array(y)


# coefficients -----------------------------------------------------------------------

def _ncoef(F: VectorFieldSet) -> int:
    l = F.driver_dim
    return 1 + l + len(F.lyndon2) + len(F.lyndon3) + l * l


def _antisym_coords(F, m2):
    l = F.driver_dim
    m2 = m2.reshape(-1, l, l)
    return np.stack([0.5 * (m2[:, j, k] - m2[:, k, j]) for j, k in F.lyndon2], axis=1) if F.lyndon2 else \
        np.zeros((m2.shape[0], 0))


def _layout(F, dt, x1, a2=None, c3=None, S=None):
    m = x1.shape[0]
    l = F.driver_dim
    out = np.zeros((m, _ncoef(F)))
    out[:, 0] = dt
    out[:, 1 : 1 + l] = x1
    o = 1 + l
    n2, n3 = len(F.lyndon2), len(F.lyndon3)
    if a2 is not None:
        out[:, o : o + n2] = a2
    if c3 is not None:
        out[:, o + n2 : o + n2 + n3] = c3
    if S is not None:
        out[:, o + n2 + n3 :] = S
    return out


def lie_coordinates(F: VectorFieldSet, lam_raw, tol: float = 1e-8):
    """(level 1, Lyndon level 2, Lyndon level 3) coordinates of raw log levels.

    Raises :class:`NotLieElement` when a level has a non-Lie part above ``tol``.
    """
    l = F.driver_dim
    x1 = lam_raw[1]
    a2 = c3 = None
    if len(lam_raw) > 2:
        m2 = lam_raw[2].reshape(-1, l, l)
        sym = 0.5 * (m2 + m2.transpose(0, 2, 1))
        if np.max(np.abs(sym), initial=0.0) > tol:
            raise NotLieElement(f"level 2 has a symmetric part of size {np.max(np.abs(sym)):.3g}")
        a2 = _antisym_coords(F, lam_raw[2])
    if len(lam_raw) > 3:
        c3 = lam_raw[3] @ F.level3_projector.T
        resid = lam_raw[3] - c3 @ F.level3_basis.T
        if np.max(np.abs(resid), initial=0.0) > tol * max(1.0, np.max(np.abs(lam_raw[3]), initial=0.0)):
            raise NotLieElement(f"level 3 is not a Lie element (residual {np.max(np.abs(resid)):.3g})")
    return x1, a2, c3


def _raw(T: TruncatedTensor):
    return (np.array([T.scalar]),) + tuple(b[None, :] for b in T.levels)


def milstein_coefficients(F: VectorFieldSet, x1, x2, dt):
    """X^i, antisymmetric part of XX, and S = Sym(XX) - X (x) X / 2 (raw batched levels)."""
    l = F.driver_dim
    m2 = x2.reshape(-1, l, l)
    S = 0.5 * (m2 + m2.transpose(0, 2, 1)) - 0.5 * x1[:, :, None] * x1[:, None, :]
    return _layout(F, dt, x1, _antisym_coords(F, x2), None, S.reshape(-1, l * l))


def milstein_step(F: VectorFieldSet, Xts: TruncatedTensor, s: float, t: float, x, ode_substeps: int = 8):
    """Time-1 map of (t - s) V + X^i V_i + XX^{jk} [V_j, V_k] / 2 (+ the S term, zero if geometric)."""
    if Xts.level_cap < 2:
        raise ValueError("the Milstein step needs level 2")
    raw = _raw(Xts)
    coeffs = milstein_coefficients(F, raw[1], raw[2], np.array([t - s]))
    return run_steps(F, coeffs, x, ode_substeps)


def log_ode_step(F: VectorFieldSet, lam: TruncatedTensor, x, ode_substeps: int = 8, dt: float = 0.0,
                 tol: float = 1e-8):
    """Time-1 map of dt V + F(lam) where lam is a Lie element of degree <= 3."""
    if abs(lam.scalar) > tol:
        raise NotLieElement("log increments have zero scalar part")
    x1, a2, c3 = lie_coordinates(F, _raw(lam), tol)
    return run_steps(F, _layout(F, np.array([dt]), x1, a2, c3), x, ode_substeps)


# generator over a driver --------------------------------------------------------------

def driver_levels(p: float) -> int:
    return min(3, int(math.floor(p)))


@dataclass
class LogODEGenerator:
    """mu_ts(x) = log-ODE step along the driver increment X_ts, at any s < t."""

    F: VectorFieldSet
    driver: RoughPathGrid
    ode_substeps: int = 8
    levels: int = field(init=False)

    def __post_init__(self):
        X = self.driver
        if X.dim != self.F.driver_dim:
            raise ValueError(f"driver has dimension {X.dim}, fields expect {self.F.driver_dim}")
        self.levels = driver_levels(X.p)
        if X.level_cap < self.levels:
            raise ValueError(f"p = {X.p} needs {self.levels} levels, driver has {X.level_cap}")
        if not X.weak_geometric and self.levels != 2:
            raise ValueError("non-geometric drivers are supported for 2 <= p < 3 only")

    @property
    def exponent(self) -> float:
        return (self.levels + 1) / self.driver.p

    def coefficients(self, s, t) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        inc = self.driver.increments_between(s, t)[: self.levels + 1]
        dt = t - s
        if not self.driver.weak_geometric:
            return milstein_coefficients(self.F, inc[1], inc[2], dt)
        lam = _tlog(inc)
        l = self.F.driver_dim
        a2 = _antisym_coords(self.F, lam[2]) if self.levels >= 2 else None
        c3 = lam[3] @ self.F.level3_projector.T if self.levels >= 3 else None
        return _layout(self.F, dt, lam[1], a2, c3)

    def step(self, s, t, x):
        return run_steps(self.F, self.coefficients(s, t), x, self.ode_substeps)

    def compose(self, partition, x, reverse=False):
        coeffs = self.coefficients(partition[:-1], partition[1:])
        return run_steps(self.F, coeffs, x, self.ode_substeps, reverse=reverse)

    def approx_flow(self) -> flows.ApproxFlowGenerator:
        return flows.ApproxFlowGenerator(self.step, self.exponent, compose=self.compose)

    def reversed_flow(self) -> flows.ApproxFlowGenerator:
        """Generator of the inverse dynamics: each cell map is the time-1 map of -W."""

        def back(s, t, x):
            return run_steps(self.F, -self.coefficients(s, t), x, self.ode_substeps)

        def compose(partition, x, reverse=True):
            coeffs = self.coefficients(partition[:-1], partition[1:])
            return run_steps(self.F, coeffs, x, self.ode_substeps, reverse=reverse)

        return flows.ApproxFlowGenerator(back, self.exponent, compose=compose)


def solve_flow(F: VectorFieldSet, driver: RoughPathGrid, s: float, t: float, x, tol: float = 1e-9,
               max_depth: int = 16, ode_substeps: int = 8, min_depth: int = 0) -> flows.FlowEvaluation:
    gen = LogODEGenerator(F, driver, ode_substeps)
    return flows.flow_eval(gen.approx_flow(), s, t, x, tol=tol, max_depth=max_depth, min_depth=min_depth)


def solve_inverse_flow(F: VectorFieldSet, driver: RoughPathGrid, s: float, t: float, x, tol: float = 1e-9,
                       max_depth: int = 16, ode_substeps: int = 8) -> flows.FlowEvaluation:
    gen = LogODEGenerator(F, driver, ode_substeps)
    return flows.inverse_flow_eval(gen.reversed_flow(), s, t, x, tol=tol, max_depth=max_depth)


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    depth: int
    last_delta: float
    converged: bool
    deltas: list = field(default_factory=list)


def _refined_grid(grid: np.ndarray, depth: int) -> np.ndarray:
    m = 1 << depth
    frac = np.arange(m) / m
    inner = grid[:-1, None] + np.diff(grid)[:, None] * frac[None, :]
    return np.concatenate([inner.ravel(), grid[-1:]])


def solve_path(F: VectorFieldSet, driver: RoughPathGrid, x0, output_grid=None, tol: float = 1e-9,
               max_depth: int = 12, ode_substeps: int = 8) -> Trajectory:
    """z_t = phi_{t,t_0}(x0) at the output grid.

    Each depth refines every output cell dyadically and composes the steps
    along the whole refined grid; depths increase until the sup change over
    the output nodes is below ``tol``.
    """
    grid = driver.times if output_grid is None else np.asarray(output_grid, dtype=float)
    if grid[0] < driver.times[0] - 1e-12 or grid[-1] > driver.times[-1] + 1e-12:
        raise ValueError("output grid leaves the driver's time span")
    gen = LogODEGenerator(F, driver, ode_substeps)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    flow = stepper(F)

    def evaluate(depth):
        fine = _refined_grid(grid, depth)
        coeffs = gen.coefficients(fine[:-1], fine[1:]).tolist()
        m = 1 << depth
        out = np.empty((grid.size, x0.size))
        out[0] = x0
        y = tuple(x0.tolist())
        for k, r in enumerate(coeffs):
            y = flow(y, r, ode_substeps)
            _check(y)
            if (k + 1) % m == 0:
                out[(k + 1) // m] = y
        return out

    res = flows._refine(evaluate, tol, max_depth, 0)
    return Trajectory(grid, res.value, res.dyadic_depth_used, res.last_delta, res.converged, res.deltas)


def ode_solve_piecewise_linear(F: VectorFieldSet, times, values, x0, ode_substeps: int = 8) -> np.ndarray:
    """Classical ODE along a piecewise-linear driver: exact level-1 steps per segment (RK4 inside)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float).reshape(times.size, -1)
    coeffs = _layout(F, np.diff(times), np.diff(values, axis=0))
    flow = stepper(F)
    y = tuple(np.asarray(x0, dtype=float).reshape(-1).tolist())
    out = np.empty((times.size, len(y)))
    out[0] = y
    for k, r in enumerate(coeffs.tolist()):
        y = flow(y, r, ode_substeps)
        _check(y)
        out[k + 1] = y
    return out


# integral formulation -------------------------------------------------------------------

def integral_residual(z, F: VectorFieldSet, driver: RoughPathGrid, Zprime=None) -> float:
    """sup_t |z_t - z_0 - int_0^t V(z) du - int_0^t F(z) dX| on the driver grid.

    The rough integral uses the controlled pair (z, Z'), with Z' = F(z) unless given.
    """
    z = np.asarray(z, dtype=float).reshape(driver.n_nodes, -1)
    fmat = field_matrix_evaluator(F)
    fjac = field_jacobian_evaluator(F)
    Zp = fmat(z) if Zprime is None else np.asarray(Zprime, dtype=float).reshape(z.shape + (driver.dim,))
    zc = ControlledPath(driver, z, Zp)
    integrand = compose_map(zc, fmat, lambda y: fjac(y))
    I = rough_integral_path(integrand, driver)
    if F.drift is not None:
        from .expr import compile_polys

        v = compile_polys(F.drift, F.dim, "np")(z)
        dt = np.diff(driver.times)[:, None]
        # the drift part of z_u - z_s meets dX: int (u - s) dX ~ (t - s) X_ts / 2
        idx = np.arange(driver.n_nodes - 1)
        x1 = driver.increments_idx(idx, idx + 1)[1]
        cross = 0.5 * dt * np.einsum("maki,mi,mk->ma", fjac(z[:-1]), v[:-1], x1)
        drift = np.zeros_like(z)
        drift[1:] = np.cumsum(0.5 * (v[1:] + v[:-1]) * dt + cross, axis=0)
        I = I + drift
    return float(np.max(np.abs(z - z[0] - I)))


# perturbations --------------------------------------------------------------------------

def perturbed_driver(X: RoughPathGrid, a: TruncatedTensor) -> RoughPathGrid:
    """Increments exp(log X_ts + (t - s) a) for a Lie element a of pure top level floor(p)."""
    top = driver_levels(X.p)
    if a.dim != X.dim:
        raise ValueError("dimension mismatch")
    if a.level_cap < top:
        raise ValueError(f"a must reach level {top}")
    others = [a.levels[k - 1] for k in range(1, a.level_cap + 1) if k != top]
    if a.scalar != 0 or any(np.any(b != 0) for b in others):
        raise ValueError(f"a must have only level {top} components")
    if X.level_cap < top:
        raise ValueError(f"driver needs level {top}")
    idx = np.arange(X.n_nodes - 1)
    cells = _increments_from(X.sigs, idx, idx + 1)
    lam = list(_tlog(cells))
    dt = np.diff(X.times)
    lam[top] = lam[top] + dt[:, None] * a.levels[top - 1][None, :]
    new_cells = _texp(tuple(lam))
    return RoughPathGrid(X.p, X.times, _chain(new_cells, X.dim, X.level_cap), X.origin, X.weak_geometric)


def euler_generator(F: VectorFieldSet, driver: RoughPathGrid) -> flows.ApproxFlowGenerator:
    """mu_ts(x) = x + (t - s) V(x) + X^i_ts V_i(x), the first-order step (a = 2/p)."""
    from .expr import compile_polys

    fmat = field_matrix_evaluator(F)
    drift = compile_polys(F.drift, F.dim, "np") if F.drift is not None else None

    def step(s, t, x):
        x = np.asarray(x, dtype=float)
        inc = driver.increments_between(np.array([s]), np.array([t]))[1][0]
        y = x + fmat(x[None])[0] @ inc
        if drift is not None:
            y = y + (t - s) * drift(x[None])[0]
        return y

    # for p >= 2 the step is only an approximate flow along smooth drivers, where a = 2
    return flows.ApproxFlowGenerator(step, 2.0 / driver.p if driver.p < 2 else 2.0)
