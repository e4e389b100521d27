"""Vector-field sets, symbolic Lie brackets and the Lyndon bracket basis up to degree 3."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from .expr import Poly, compile_polys, max_var, parse, poly_to_text, to_poly

Field = tuple  # tuple of Poly, one per state component


def parse_vector_field(text):
    """AST of one component, or a list of ASTs for a sequence of components."""
    if isinstance(text, str):
        return parse(text)
    return [parse(t) for t in text]


def field_from(components, dim: int | None = None) -> Field:
    polys = []
    for c in components:
        if isinstance(c, Poly):
            polys.append(c)
        elif isinstance(c, str):
            polys.append(to_poly(parse(c)))
        else:
            polys.append(to_poly(c))
    if dim is not None and len(polys) != dim:
        raise ValueError(f"field has {len(polys)} components, state dimension is {dim}")
    return tuple(polys)


def directional(V: Field, W: Field) -> Field:
    """(V . grad) W."""
    d = len(V)
    out = []
    for w in W:
        acc = Poly()
        for i in range(d):
            dw = w.diff(i)
            if not dw.is_zero() and not V[i].is_zero():
                acc = acc + V[i] * dw
        out.append(acc)
    return tuple(out)


def lie_bracket(V: Field, W: Field) -> Field:
    """[V, W] = (V . grad) W - (W . grad) V."""
    a = directional(V, W)
    b = directional(W, V)
    return tuple(x - y for x, y in zip(a, b))


def field_is_zero(V: Field) -> bool:
    return all(c.is_zero() for c in V)


def field_text(V: Field) -> list[str]:
    return [poly_to_text(c) for c in V]


def linear_field(A) -> Field:
    """x -> A x as a symbolic field."""
    A = np.asarray(A, dtype=float)
    return tuple(sum((Poly.const(A[i, j]) * Poly.var(j) for j in range(A.shape[1]) if A[i, j] != 0.0), Poly())
                 for i in range(A.shape[0]))


# Lyndon words and their bracketings -------------------------------------------------

def lyndon_words(dim: int, max_len: int = 3) -> list[tuple]:
    """Lyndon words over {0, .., dim-1} of length 2..max_len (length 1 is the letters)."""
    words = []
    for n in range(2, max_len + 1):
        for w in product(range(dim), repeat=n):
            if all(w < w[k:] + w[:k] for k in range(1, n)):
                words.append(w)
    return words


def standard_bracketing(w: tuple):
    """Nested pairs for the standard factorization w = u v, v the longest proper Lyndon suffix."""
    if len(w) == 1:
        return w[0]
    for k in range(1, len(w)):
        v = w[k:]
        if all(v < v[r:] + v[:r] for r in range(1, len(v))) or len(v) == 1:
            return (standard_bracketing(w[:k]), standard_bracketing(v))
    raise AssertionError(w)


def tensor_of_bracketing(b, dim: int) -> np.ndarray:
    """Flat tensor of a nested bracket of letters, [a, b] = a b - b a."""
    if isinstance(b, int):
        e = np.zeros(dim)
        e[b] = 1.0
        return e
    x = tensor_of_bracketing(b[0], dim)
    y = tensor_of_bracketing(b[1], dim)
    return np.kron(x, y) - np.kron(y, x)


def bracketing_text(b) -> str:
    if isinstance(b, int):
        return str(b + 1)
    return f"[{bracketing_text(b[0])},{bracketing_text(b[1])}]"


@dataclass(frozen=True, eq=False)
class VectorFieldSet:
    """Fields V_1..V_l on R^d, optional drift, and precomputed brackets.

    ``bracket_table`` maps nested index pairs (0-based, e.g. ``(0, 1)`` or
    ``(0, (0, 1))``) to fields; it covers the Lyndon basis of degrees 2 and 3.
    ``second_order[j][k]`` is (V_j . grad) V_k, used for non-geometric drivers.
    """

    dim: int
    fields: tuple
    drift: tuple | None = None
    bracket_table: dict = field(default_factory=dict, init=False)
    second_order: tuple = field(default=(), init=False)

    def __post_init__(self):
        fields = tuple(field_from(v, self.dim) for v in self.fields)
        if not fields:
            raise ValueError("need at least one driving field")
        drift = field_from(self.drift, self.dim) if self.drift is not None else None
        for V in fields + ((drift,) if drift else ()):
            for c in V:
                bad = [i for i in c.variables() if i >= self.dim]
                if bad:
                    raise ValueError(f"variable x{max(bad) + 1} exceeds state dimension {self.dim}")
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "drift", drift)
        table = {}
        for w in lyndon_words(len(fields), 3):
            b = standard_bracketing(w)
            table[b] = self._bracket_of(b, table)
        object.__setattr__(self, "bracket_table", table)
        l = len(fields)
        object.__setattr__(self, "second_order",
                           tuple(tuple(directional(fields[j], fields[k]) for k in range(l)) for j in range(l)))

    def _bracket_of(self, b, table):
        if isinstance(b, int):
            return self.fields[b]
        if b in table:
            return table[b]
        return lie_bracket(self._bracket_of(b[0], table), self._bracket_of(b[1], table))

    @classmethod
    def from_text(cls, dim: int, fields, drift=None) -> "VectorFieldSet":
        """Build from lists of component strings; variable indices are checked against ``dim``."""
        for V in list(fields) + ([drift] if drift is not None else []):
            if len(V) != dim:
                raise ValueError(f"field has {len(V)} components, state dimension is {dim}")
            for text in V:
                k = max_var(parse(text))
                if k > dim:
                    raise ValueError(f"variable x{k} in {text!r} exceeds state dimension {dim}")
        return cls(dim, tuple(tuple(V) for V in fields), tuple(drift) if drift is not None else None)

    @classmethod
    def linear(cls, matrices, drift=None) -> "VectorFieldSet":
        mats = [np.asarray(A, dtype=float) for A in matrices]
        return cls(mats[0].shape[0], tuple(linear_field(A) for A in mats),
                   linear_field(drift) if drift is not None else None)

    @property
    def driver_dim(self) -> int:
        return len(self.fields)

    def bracket(self, word) -> Field:
        """Field of a nested bracket of 0-based letters, e.g. ``(0, (1, 2))``."""
        return self._bracket_of(word, self.bracket_table)

    @cached_property
    def lyndon2(self) -> list:
        return [b for b in self.bracket_table if isinstance(b[0], int) and isinstance(b[1], int)]

    @cached_property
    def lyndon3(self) -> list:
        return [b for b in self.bracket_table if b not in self.lyndon2]

    @cached_property
    def level3_projector(self) -> np.ndarray:
        """Least-squares map from a level-3 Lie tensor to Lyndon coordinates."""
        l = self.driver_dim
        if not self.lyndon3:
            return np.zeros((0, l**3))
        basis = np.stack([tensor_of_bracketing(b, l) for b in self.lyndon3], axis=1)
        return np.linalg.pinv(basis)

    @cached_property
    def level3_basis(self) -> np.ndarray:
        l = self.driver_dim
        if not self.lyndon3:
            return np.zeros((l**3, 0))
        return np.stack([tensor_of_bracketing(b, l) for b in self.lyndon3], axis=1)

    def basis_fields(self) -> list:
        """Fields matched with the coefficient layout used by the solver:
        drift, V_i, Lyndon degree 2, Lyndon degree 3, (V_j . grad) V_k."""
        zero = tuple(Poly() for _ in range(self.dim))
        out = [self.drift if self.drift is not None else zero]
        out += list(self.fields)
        out += [self.bracket_table[b] for b in self.lyndon2]
        out += [self.bracket_table[b] for b in self.lyndon3]
        out += [self.second_order[j][k] for j in range(self.driver_dim) for k in range(self.driver_dim)]
        return out

    @cached_property
    def evaluators(self) -> list:
        """Vectorized numpy evaluators for the basis fields (same order as ``basis_fields``)."""
        return [compile_polys(V, self.dim, "np") for V in self.basis_fields()]

    def evaluate(self, V: Field, points) -> np.ndarray:
        return compile_polys(V, self.dim, "np")(points)


def _jacobian_polys(V: Field, dim: int) -> list:
    return [c.diff(i) for c in V for i in range(dim)]


def field_matrix_evaluator(F: VectorFieldSet):
    """points (m, d) -> (m, d, l) with column k equal to V_k."""
    flat = [F.fields[k][a] for a in range(F.dim) for k in range(F.driver_dim)]
    f = compile_polys(flat, F.dim, "np")

    def ev(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return f(points).reshape(points.shape[0], F.dim, F.driver_dim)

    return ev


def field_jacobian_evaluator(F: VectorFieldSet):
    """points (m, d) -> (m, d, l, d): d/dx_i of V_k^a."""
    flat = [F.fields[k][a].diff(i) for a in range(F.dim) for k in range(F.driver_dim) for i in range(F.dim)]
    f = compile_polys(flat, F.dim, "np")

    def ev(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return f(points).reshape(points.shape[0], F.dim, F.driver_dim, F.dim)

    return ev
