"""Paths controlled by a level-2 rough path, rough integrals and self-lifts.

Shapes: with reference X over R^l on m grid nodes, a controlled path has
values of shape (m, *vshape) and derivative of shape (m, *vshape, l), the last
axis being the direction j in z_t - z_s ~ Z'_s^j X^j_ts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sewing
from .path_lift import RoughPathGrid, _chain, _level_increments_row


@dataclass(frozen=True, eq=False)
class ControlledPath:
    reference: RoughPathGrid
    values: np.ndarray
    derivative: np.ndarray

    def __post_init__(self):
        X = self.reference
        if X.level_cap < 2:
            raise ValueError("controlled paths need a level-2 reference")
        if not 2.0 < X.p < 3.0:
            raise ValueError(f"controlled paths need 2 < p < 3, got p = {X.p}")
        z = np.asarray(self.values, dtype=float)
        dz = np.asarray(self.derivative, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
            if dz.ndim == 2:
                dz = dz[:, None, :]
        if z.shape[0] != X.n_nodes:
            raise ValueError(f"{z.shape[0]} values for {X.n_nodes} grid nodes")
        if dz.shape != z.shape + (X.dim,):
            raise ValueError(f"derivative shape {dz.shape} does not match {z.shape + (X.dim,)}")
        object.__setattr__(self, "values", z)
        object.__setattr__(self, "derivative", dz)

    @property
    def value_shape(self) -> tuple:
        return self.values.shape[1:]

    @property
    def times(self) -> np.ndarray:
        return self.reference.times

    def remainders_from(self, a: int):
        """Grid indices b > a and R_{t_a t_b} flattened per b."""
        b, x1 = _level_increments_row(self.reference.sigs, a, 1)
        z = self.values.reshape(self.values.shape[0], -1)
        dz = self.derivative.reshape(z.shape[0], z.shape[1], -1)
        return b, z[b] - z[a] - x1 @ dz[a].T

    def with_reference(self, X: RoughPathGrid) -> "ControlledPath":
        """The same pair read against another rough path with the same grid and level 1."""
        if X.n_nodes != self.reference.n_nodes or not np.allclose(X.sigs[1], self.reference.sigs[1], atol=1e-12):
            raise ValueError("references differ at level 1")
        return ControlledPath(X, self.values, self.derivative)


def from_reference(X: RoughPathGrid) -> ControlledPath:
    """(x, Id): the reference path controlled by itself."""
    eye = np.broadcast_to(np.eye(X.dim), (X.n_nodes, X.dim, X.dim))
    return ControlledPath(X, X.path_values(), eye.copy())


def from_function(X: RoughPathGrid, G, DG) -> ControlledPath:
    """F_t = G(x_t) with F'_t = DG(x_t); DG(x) has shape G(x).shape + (l,)."""
    return compose_map(from_reference(X), G, DG)


def remainder_norm(zc: ControlledPath) -> float:
    """sup over grid pairs of |R_ts| / (t - s)^(2/p)."""
    X = zc.reference
    best = 0.0
    for a in range(X.n_nodes - 1):
        b, r = zc.remainders_from(a)
        ratio = np.linalg.norm(r, axis=1) / (X.times[b] - X.times[a]) ** (2.0 / X.p)
        best = max(best, float(ratio.max()))
    return best


def derivative_holder_norm(zc: ControlledPath) -> float:
    X = zc.reference
    dz = zc.derivative.reshape(X.n_nodes, -1)
    best = 0.0
    for a in range(X.n_nodes - 1):
        inc = np.linalg.norm(dz[a + 1 :] - dz[a], axis=1) / (X.times[a + 1 :] - X.times[a]) ** (1.0 / X.p)
        best = max(best, float(inc.max()))
    return best


def controlled_norm(zc: ControlledPath) -> float:
    """|z_0| + ||Z'||_(1/p) + ||R||_(2/p) on the grid."""
    return float(np.linalg.norm(zc.values[0]) + derivative_holder_norm(zc) + remainder_norm(zc))


def compose_map(zc: ControlledPath, phi, dphi) -> ControlledPath:
    """phi(z) with derivative Dphi(z) o Z'.

    ``phi`` maps an array of states (m, d) to (m, *out); ``dphi`` to (m, *out, d).
    Per-row callables are accepted as a fallback.
    """
    z = zc.values.reshape(zc.values.shape[0], -1)
    m, d = z.shape
    vals = _apply_rows(phi, z)
    jac = _apply_rows(dphi, z)
    out_shape = vals.shape[1:]
    if jac.shape != (m,) + out_shape + (d,):
        raise ValueError(f"derivative of phi has shape {jac.shape[1:]}, expected {out_shape + (d,)}")
    dz = zc.derivative.reshape(m, d, -1)
    deriv = np.einsum("m...d,mdj->m...j", jac, dz)
    return ControlledPath(zc.reference, vals, deriv)


def _apply_rows(f, z):
    try:
        out = np.asarray(f(z), dtype=float)
        if out.ndim >= 1 and out.shape[0] == z.shape[0]:
            return out
    except (TypeError, ValueError, IndexError):
        pass
    return np.stack([np.asarray(f(row), dtype=float) for row in z])


def _germ(F: ControlledPath, X: RoughPathGrid):
    """mu(a, b) = F_a X_ab + F'_a XX_ab on grid index arrays."""
    l = X.dim
    f = F.values
    if f.shape[-1] != l:
        raise ValueError(f"integrand must take values in L(R^{l}, .), last axis is {f.shape[-1]}")
    df = F.derivative

    def mu(a, b):
        inc = X.increments_idx(a, b)
        x1 = inc[1]
        x2 = inc[2].reshape(-1, l, l)
        first = np.einsum("m...k,mk->m...", f[a], x1)
        second = np.einsum("m...kj,mjk->m...", df[a], x2)
        return first + second

    return mu


def _grid_indices(X: RoughPathGrid, s, t):
    i = 0 if s is None else X.node_index(s)
    j = X.n_nodes - 1 if t is None else X.node_index(t)
    if i is None or j is None:
        raise ValueError("rough integrals on sampled data need grid times s and t")
    return i, j


def rough_integral(F: ControlledPath, X: RoughPathGrid | None = None, s: float | None = None,
                   t: float | None = None, tol: float = 1e-9) -> sewing.SewResult:
    """Sewing of F_s X_ts + F'_s XX_ts over grid index ranges.

    ``X`` defaults to the reference of F; another lift with the same first
    level (an Ito or Stratonovich variant) may be supplied.
    """
    X = F.reference if X is None else X
    if X.n_nodes != F.reference.n_nodes:
        raise ValueError("integrand and rough path live on different grids")
    i, j = _grid_indices(X, s, t)
    if i == j:
        shape = F.values.shape[1:-1]
        return sewing.SewResult(np.zeros(shape), 0, 0.0, True, [])
    return sewing.sew_indices(_germ(F, X), i, j, tol=tol)


def rough_integral_path(F: ControlledPath, X: RoughPathGrid | None = None) -> np.ndarray:
    """int_0^{t_k} F dX at every node, summing the germ over grid cells."""
    X = F.reference if X is None else X
    idx = np.arange(X.n_nodes - 1)
    cells = _germ(F, X)(idx, idx + 1)
    out = np.zeros((X.n_nodes,) + cells.shape[1:])
    out[1:] = np.cumsum(cells, axis=0)
    return out


def self_lift(zc: ControlledPath) -> RoughPathGrid:
    """(z, ZZ) with ZZ_ts = int_s^t Z_us (x) dZ_u sewn from Z'_s (x) Z'_s XX_ts.

    The grid data supports cell resolution, so each cell contributes its germ
    and cells are joined with Chen's relation.
    """
    X = zc.reference
    z = zc.values.reshape(X.n_nodes, -1)
    d = z.shape[1]
    dz = zc.derivative.reshape(X.n_nodes, d, X.dim)
    idx = np.arange(X.n_nodes - 1)
    inc = X.increments_idx(idx, idx + 1)
    x2 = inc[2].reshape(-1, X.dim, X.dim)
    cell2 = np.einsum("maj,mjk,mbk->mab", dz[:-1], x2, dz[:-1]).reshape(-1, d * d)
    cells = (np.ones(idx.size), np.diff(z, axis=0), cell2)
    return RoughPathGrid(X.p, X.times, _chain(cells, d, 2), z[0], X.weak_geometric)
