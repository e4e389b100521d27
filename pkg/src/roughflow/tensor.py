"""Truncated tensor algebra T^(N) over R^l, for N <= 3.

Coefficient blocks are stored flat in row-major multi-index order, so level k
of a tensor over R^l is a vector of length l**k.  The private ``_t*`` helpers
work on raw level tuples ``(scalar, level1, ..., levelN)`` that may carry
leading batch axes; :class:`TruncatedTensor` wraps the unbatched case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_LEVEL = 3


def _outer(a, b):
    """Batched tensor product of two flat blocks."""
    a = np.asarray(a)
    b = np.asarray(b)
    return (a[..., :, None] * b[..., None, :]).reshape(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (-1,))


def _block_outer(a, b, ka, kb):
    # level 0 blocks are scalars carrying only batch axes
    if ka == 0:
        return np.asarray(a)[..., None] * b
    if kb == 0:
        return a * np.asarray(b)[..., None]
    return _outer(a, b)


def _tmul(a, b):
    n = len(a) - 1
    out = []
    for r in range(n + 1):
        c = None
        for k in range(r + 1):
            term = a[0] * b[0] if r == 0 else _block_outer(a[k], b[r - k], k, r - k)
            c = term if c is None else c + term
        out.append(c)
    return tuple(out)


def _tadd(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _tscale(c, a):
    return tuple(c * x for x in a)


def _tunit_like(a):
    return (np.ones_like(a[0]),) + tuple(np.zeros_like(x) for x in a[1:])


def _texp(x):
    """exp of a tensor with zero scalar part; the series stops at level N."""
    n = len(x) - 1
    out = _tunit_like(x)
    power = out
    for j in range(1, n + 1):
        power = _tscale(1.0 / j, _tmul(power, x))
        out = _tadd(out, power)
    return out


def _tlog(a):
    """log(1 + y) = sum (-1)^(j+1) y^j / j with y = a - 1."""
    n = len(a) - 1
    y = (np.zeros_like(a[0]),) + tuple(a[1:])
    out = tuple(np.zeros_like(v) for v in a)
    power = None
    for j in range(1, n + 1):
        power = y if power is None else _tmul(power, y)
        out = _tadd(out, _tscale((-1.0) ** (j + 1) / j, power))
    return out


def _tinverse(a):
    return _texp(_tscale(-1.0, _tlog(a)))


def _tdilate(lam, a):
    return tuple(lam**k * x for k, x in enumerate(a))


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """Element of the truncated tensor algebra over R^dim, cut at ``level_cap``."""

    dim: int
    level_cap: int
    scalar: float
    levels: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.level_cap not in (1, 2, 3):
            raise ValueError(f"level_cap must be 1, 2 or 3, got {self.level_cap}")
        if len(self.levels) != self.level_cap:
            raise ValueError("need one block per level")
        blocks = []
        for k, blk in enumerate(self.levels, start=1):
            arr = np.array(blk, dtype=float).reshape(-1)
            if arr.size != self.dim**k:
                raise ValueError(f"level {k} block must hold {self.dim ** k} coefficients, got {arr.size}")
            arr.setflags(write=False)
            blocks.append(arr)
        object.__setattr__(self, "levels", tuple(blocks))
        object.__setattr__(self, "scalar", float(self.scalar))

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, dim: int, level_cap: int) -> "TruncatedTensor":
        return cls(dim, level_cap, 0.0, tuple(np.zeros(dim**k) for k in range(1, level_cap + 1)))

    @classmethod
    def one(cls, dim: int, level_cap: int) -> "TruncatedTensor":
        return cls(dim, level_cap, 1.0, tuple(np.zeros(dim**k) for k in range(1, level_cap + 1)))

    @classmethod
    def from_vector(cls, v, level_cap: int, scalar: float = 0.0) -> "TruncatedTensor":
        v = np.asarray(v, dtype=float).reshape(-1)
        d = v.size
        return cls(d, level_cap, scalar, (v,) + tuple(np.zeros(d**k) for k in range(2, level_cap + 1)))

    @classmethod
    def from_levels(cls, scalar, *blocks) -> "TruncatedTensor":
        first = np.asarray(blocks[0], dtype=float).reshape(-1)
        return cls(first.size, len(blocks), scalar, blocks)

    @classmethod
    def _wrap(cls, dim, raw) -> "TruncatedTensor":
        return cls(dim, len(raw) - 1, float(raw[0]), tuple(raw[1:]))

    def _raw(self):
        return (np.float64(self.scalar),) + self.levels

    # access ---------------------------------------------------------------
    def block(self, k: int) -> np.ndarray:
        """Level ``k`` as an array of shape ``(dim,) * k``."""
        if k == 0:
            return np.array(self.scalar)
        return self.project(k).reshape((self.dim,) * k)

    def project(self, k: int):
        if not 0 <= k <= self.level_cap:
            raise IndexError(f"level {k} outside 0..{self.level_cap}")
        return self.scalar if k == 0 else self.levels[k - 1]

    def truncate(self, level_cap: int) -> "TruncatedTensor":
        if level_cap > self.level_cap:
            extra = tuple(np.zeros(self.dim**k) for k in range(self.level_cap + 1, level_cap + 1))
            return TruncatedTensor(self.dim, level_cap, self.scalar, self.levels + extra)
        return TruncatedTensor(self.dim, level_cap, self.scalar, self.levels[:level_cap])

    def _check(self, other: "TruncatedTensor"):
        if self.dim != other.dim or self.level_cap != other.level_cap:
            raise ValueError(
                f"shape mismatch: (dim={self.dim}, N={self.level_cap}) vs (dim={other.dim}, N={other.level_cap})"
            )

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        self._check(other)
        return TruncatedTensor._wrap(self.dim, _tadd(self._raw(), _tscale(-1.0, other._raw())))

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, TruncatedTensor):
            return mul(self, other)
        return scale(other, self)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max([abs(self.scalar)] + [float(np.max(np.abs(b))) for b in self.levels])

    def allclose(self, other: "TruncatedTensor", atol: float = 1e-12) -> bool:
        self._check(other)
        return (self - other).max_abs() <= atol

    def __repr__(self):
        return f"TruncatedTensor(dim={self.dim}, N={self.level_cap}, scalar={self.scalar:g})"

    # serialization ---------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "level_cap": self.level_cap,
            "levels": [[self.scalar]] + [b.tolist() for b in self.levels],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TruncatedTensor":
        levels = obj["levels"]
        dim, cap = int(obj["dim"]), int(obj["level_cap"])
        # level 0 is optional in the serialized list
        if len(levels) == cap + 1:
            scalar, blocks = float(levels[0][0]), levels[1:]
        else:
            scalar, blocks = float(obj.get("scalar", 1.0)), levels
        return cls(dim, cap, scalar, tuple(blocks))


def add(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    a._check(b)
    return TruncatedTensor._wrap(a.dim, _tadd(a._raw(), b._raw()))


def scale(c: float, a: TruncatedTensor) -> TruncatedTensor:
    return TruncatedTensor._wrap(a.dim, _tscale(float(c), a._raw()))


def mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated product: level r is sum_k a^k (x) b^(r-k)."""
    a._check(b)
    return TruncatedTensor._wrap(a.dim, _tmul(a._raw(), b._raw()))


def exp(a: TruncatedTensor) -> TruncatedTensor:
    if a.scalar != 0.0:
        raise ValueError("exp is defined here on tensors with zero scalar part")
    return TruncatedTensor._wrap(a.dim, _texp(a._raw()))


def log(a: TruncatedTensor) -> TruncatedTensor:
    if a.scalar != 1.0:
        raise ValueError("log needs scalar part 1")
    return TruncatedTensor._wrap(a.dim, _tlog(a._raw()))


def inverse(a: TruncatedTensor) -> TruncatedTensor:
    if a.scalar != 1.0:
        raise ValueError("only tensors with scalar part 1 are inverted")
    return TruncatedTensor._wrap(a.dim, _tinverse(a._raw()))


def dilate(lam: float, a: TruncatedTensor) -> TruncatedTensor:
    return TruncatedTensor._wrap(a.dim, _tdilate(float(lam), a._raw()))


def homogeneous_norm(a: TruncatedTensor) -> float:
    if a.scalar != 1.0:
        raise ValueError("the homogeneous norm is defined on tensors with scalar part 1")
    return float(sum(np.linalg.norm(b) ** (1.0 / k) for k, b in enumerate(a.levels, start=1)))


def bracket(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    return mul(a, b) - mul(b, a)


def project(a: TruncatedTensor, k: int):
    return a.project(k)


def segment(v, level_cap: int) -> TruncatedTensor:
    """exp(v) for a vector v, i.e. the signature of a straight segment."""
    return exp(TruncatedTensor.from_vector(v, level_cap))


def basis_vector(i: int, dim: int, level_cap: int) -> TruncatedTensor:
    v = np.zeros(dim)
    v[i] = 1.0
    return TruncatedTensor.from_vector(v, level_cap)


# Lie-element tests ---------------------------------------------------------

def right_bracketing(block3, dim: int) -> np.ndarray:
    """Linear map e_i e_j e_k -> [e_i, [e_j, e_k]] on flat level-3 blocks."""
    t = np.asarray(block3, dtype=float).reshape(dim, dim, dim)
    # [e_j, e_k] = e_j e_k - e_k e_j, then [e_i, w] = e_i w - w e_i
    inner = t - t.transpose(0, 2, 1)
    out = inner - np.moveaxis(inner, 0, 2)
    return out.reshape(-1)


def symmetric_defect(a: TruncatedTensor) -> float:
    """max |Sym(a^2) - a^1 (x) a^1 / 2|, the weak-geometric defect at level 2."""
    if a.level_cap < 2:
        return 0.0
    d = a.dim
    x2 = a.block(2)
    sym = 0.5 * (x2 + x2.T)
    x1 = a.levels[0]
    return float(np.max(np.abs(sym - 0.5 * np.outer(x1, x1))))


def is_group_like(a: TruncatedTensor, tol: float = 1e-10) -> bool:
    if a.scalar != 1.0:
        return False
    if a.level_cap >= 2 and symmetric_defect(a) > tol:
        return False
    if a.level_cap == 3:
        lam = log(a)
        l2 = lam.block(2)
        if np.max(np.abs(l2 + l2.T)) > tol:
            return False
        l3 = lam.levels[2]
        if np.max(np.abs(right_bracketing(l3, a.dim) - 3.0 * l3)) > tol:
            return False
    return True


def is_lie_element(a: TruncatedTensor, tol: float = 1e-10) -> bool:
    """Zero scalar part, antisymmetric level 2, Dynkin-fixed level 3."""
    if abs(a.scalar) > tol:
        return False
    if a.level_cap >= 2:
        l2 = a.block(2)
        if np.max(np.abs(l2 + l2.T)) > tol:
            return False
    if a.level_cap == 3:
        l3 = a.levels[2]
        if np.max(np.abs(right_bracketing(l3, a.dim) - 3.0 * l3)) > tol:
            return False
    return True


def random_tensor(rng, dim: int, level_cap: int, scalar: float = 0.0, scale: float = 1.0) -> TruncatedTensor:
    blocks = tuple(rng.uniform(-scale, scale, size=dim**k) for k in range(1, level_cap + 1))
    return TruncatedTensor(dim, level_cap, scalar, blocks)


def levels_of(tensors: Sequence[TruncatedTensor]):
    """Stack a sequence of tensors into batched raw levels."""
    first = tensors[0]
    raw = [np.array([t.scalar for t in tensors])]
    for k in range(first.level_cap):
        raw.append(np.stack([t.levels[k] for t in tensors]))
    return tuple(raw)


def factorial(n: int) -> int:
    return math.factorial(n)
