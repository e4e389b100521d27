"""A small expression language for vector-field components.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | factor
    factor := base ('^' uint)?
    base   := number | 'x' uint | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp'

Expressions are parsed to a small AST and normalized to :class:`Poly`, a
polynomial in atoms (variables and sin/cos/exp of polynomials).  Normal forms
are canonical enough that identical expressions cancel exactly, which makes
``[V, V] = 0`` hold symbolically.  Normal forms compile to plain Python.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

FUNCS = ("sin", "cos", "exp")


class ExprSyntaxError(ValueError):
    """Raised with the 0-based character ``position`` of the offending token."""

    def __init__(self, message: str, position: int, text: str = ""):
        pointer = f"\n  {text}\n  {' ' * position}^" if text else ""
        super().__init__(f"{message} at position {position}{pointer}")
        self.position = position


# AST ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def max_var(node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, BinOp):
        return max(max_var(node.left), max_var(node.right))
    if isinstance(node, (Neg, Call)):
        return max_var(node.arg)
    if isinstance(node, Pow):
        return max_var(node.base)
    raise TypeError(node)


# parser ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            node = BinOp("*", node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.factor()

    def factor(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "num" or not tok[1].isdigit():
                self.fail("exponent must be a non-negative integer")
            self.take()
            node = Pow(node, int(tok[1]))
        return node

    def base(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "name":
            self.take()
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                idx = int(m.group(1))
                if idx < 1:
                    self.fail("variables are numbered from x1", tok)
                return Var(idx)
            if value in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            self.fail(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {value or 'end of input'!r}")


def parse(text: str):
    """Parse one component expression into an AST."""
    return _Parser(text).parse()


# printer --------------------------------------------------------------------------

def _num_str(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return 1 if node.op in "+-" else 2
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    if isinstance(node, Num) and node.value < 0:
        return 3
    return 5


def to_text(node) -> str:
    """Canonical text; ``parse(to_text(e)) == e`` for parsed expressions."""

    def wrap(child, ok):
        s = to_text(child)
        return s if ok(_prec(child)) else f"({s})"

    if isinstance(node, Num):
        return _num_str(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        return "-" + wrap(node.arg, lambda p: p >= 3)
    if isinstance(node, Pow):
        return wrap(node.base, lambda p: p >= 5) + f"^{node.exponent}"
    if isinstance(node, BinOp):
        level = 1 if node.op in "+-" else 2
        sep = f" {node.op} " if level == 1 else "*"
        return wrap(node.left, lambda p: p >= level) + sep + wrap(node.right, lambda p: p > level)
    raise TypeError(node)


# normal forms -----------------------------------------------------------------------

def _atom_key(atom):
    if atom[0] == "x":
        return (0, atom[1], "")
    return (1, FUNCS.index(atom[0]), atom[1].key)


def _mono_key(mono):
    return tuple((_atom_key(a), k) for a, k in mono)


class Poly:
    """Finite sum of coefficient * monomial; a monomial is a sorted tuple of (atom, power).

    Atoms are ``('x', i)`` with 0-based i, or ``(func, Poly)``.
    """

    __slots__ = ("terms", "_key", "_hash")

    def __init__(self, terms=None):
        clean = {}
        for mono, c in (terms or {}).items():
            if c != 0.0:
                clean[mono] = clean.get(mono, 0.0) + c
        self.terms = {m: c for m, c in clean.items() if c != 0.0}
        self._key = None
        self._hash = None

    # construction
    @staticmethod
    def const(c: float) -> "Poly":
        return Poly({(): float(c)})

    @staticmethod
    def var(i: int) -> "Poly":
        return Poly({((("x", i), 1),): 1.0})

    @staticmethod
    def func(name: str, arg: "Poly") -> "Poly":
        if arg.is_constant():
            return Poly.const(getattr(math, name)(arg.constant_value()))
        return Poly({(((name, arg), 1),): 1.0})

    # identity
    @property
    def key(self):
        if self._key is None:
            self._key = tuple(sorted((_mono_key(m), c) for m, c in self.terms.items()))
        return self._key

    def __eq__(self, other):
        return isinstance(other, Poly) and self.key == other.key

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def constant_value(self) -> float:
        return self.terms.get((), 0.0)

    # algebra
    def __add__(self, other):
        other = _lift(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0.0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not supported")
        out = Poly.const(1.0)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, i: int) -> "Poly":
        """Partial derivative with respect to the 0-based variable i."""
        out = Poly()
        for mono, c in self.terms.items():
            for pos, (atom, k) in enumerate(mono):
                d_atom = _atom_diff(atom, i)
                if d_atom.is_zero():
                    continue
                rest = list(mono)
                if k == 1:
                    rest.pop(pos)
                else:
                    rest[pos] = (atom, k - 1)
                out = out + Poly({_mono_sort(rest): c * k}) * d_atom
        return out

    def variables(self) -> set:
        out = set()
        for mono in self.terms:
            for atom, _ in mono:
                if atom[0] == "x":
                    out.add(atom[1])
                else:
                    out |= atom[1].variables()
        return out

    def __repr__(self):
        return f"Poly({poly_to_text(self)!r})"


def _lift(v) -> Poly:
    return v if isinstance(v, Poly) else Poly.const(float(v))


def _mono_sort(items) -> tuple:
    return tuple(sorted(items, key=lambda ak: _atom_key(ak[0])))


def _mono_mul(m1, m2) -> tuple:
    powers: dict = {}
    atoms: dict = {}
    for atom, k in m1 + m2:
        key = _atom_key(atom)
        atoms[key] = atom
        powers[key] = powers.get(key, 0) + k
    return tuple((atoms[key], powers[key]) for key in sorted(powers))


def _atom_diff(atom, i: int) -> Poly:
    if atom[0] == "x":
        return Poly.const(1.0) if atom[1] == i else Poly()
    name, arg = atom
    darg = arg.diff(i)
    if darg.is_zero():
        return Poly()
    if name == "sin":
        outer = Poly.func("cos", arg)
    elif name == "cos":
        outer = -Poly.func("sin", arg)
    else:
        outer = Poly.func("exp", arg)
    return outer * darg


def to_poly(node) -> Poly:
    if isinstance(node, Num):
        return Poly.const(node.value)
    if isinstance(node, Var):
        return Poly.var(node.index - 1)
    if isinstance(node, Neg):
        return -to_poly(node.arg)
    if isinstance(node, Pow):
        return to_poly(node.base) ** node.exponent
    if isinstance(node, Call):
        return Poly.func(node.func, to_poly(node.arg))
    if isinstance(node, BinOp):
        a, b = to_poly(node.left), to_poly(node.right)
        return a + b if node.op == "+" else a - b if node.op == "-" else a * b
    raise TypeError(node)


def poly_to_ast(poly: Poly):
    """AST of a normal form (sum of products, leading minus signs as subtractions)."""

    def atom_ast(atom):
        if atom[0] == "x":
            return Var(atom[1] + 1)
        return Call(atom[0], poly_to_ast(atom[1]))

    terms = sorted(poly.terms.items(), key=lambda mc: _mono_key(mc[0]))
    if not terms:
        return Num(0.0)
    out = None
    for mono, c in terms:
        factors = [atom_ast(a) if k == 1 else Pow(atom_ast(a), k) for a, k in mono]
        mag = abs(c)
        if mag != 1.0 or not factors:
            factors.insert(0, Num(mag))
        node = factors[0]
        for f in factors[1:]:
            node = BinOp("*", node, f)
        if out is None:
            out = Neg(node) if c < 0 else node
        else:
            out = BinOp("-" if c < 0 else "+", out, node)
    return out


def poly_to_text(poly: Poly) -> str:
    return to_text(poly_to_ast(poly))


# code generation --------------------------------------------------------------------

class Emitter:
    """Straight-line Python for a family of normal forms with shared function atoms.

    ``lib`` is ``'math'`` for scalar code or ``'np'`` for array code; variables are
    read from names ``y0, y1, ...``.
    """

    def __init__(self, lib: str = "math"):
        self.lib = lib
        self.lines: list[str] = []
        self.atoms: dict = {}
        self.powers: dict = {}

    def atom(self, atom) -> str:
        if atom[0] == "x":
            return f"y{atom[1]}"
        key = (atom[0], atom[1].key)
        if key not in self.atoms:
            inner = self.expr(atom[1])
            name = f"a{len(self.atoms)}"
            self.lines.append(f"{name} = {self.lib}.{atom[0]}({inner})")
            self.atoms[key] = name
        return self.atoms[key]

    def power(self, atom, k: int) -> str:
        base = self.atom(atom)
        if k == 1:
            return base
        key = (base, k)
        if key not in self.powers:
            name = f"p{len(self.powers)}"
            self.lines.append(f"{name} = {'*'.join([base] * k)}" if k <= 4 else f"{name} = {base}**{k}")
            self.powers[key] = name
        return self.powers[key]

    def expr(self, poly: Poly) -> str:
        if poly.is_zero():
            return "0.0"
        parts = []
        for mono, c in sorted(poly.terms.items(), key=lambda mc: _mono_key(mc[0])):
            factors = [self.power(a, k) for a, k in mono]
            if not factors:
                parts.append(repr(c))
            elif c == 1.0:
                parts.append("*".join(factors))
            else:
                parts.append(f"{c!r}*" + "*".join(factors))
        return " + ".join(parts)


def compile_polys(polys, dim: int, lib: str = "np"):
    """A function f(Y) for Y of shape (..., dim) returning the stacked values (..., len(polys))."""
    em = Emitter(lib)
    exprs = [em.expr(p) for p in polys]
    unpack = "".join(f"    y{i} = Y[..., {i}]\n" for i in range(dim))
    body = "".join(f"    {line}\n" for line in em.lines)
    if lib == "np":
        outs = ", ".join(f"({e}) + zero" for e in exprs) or ""
        src = (f"def f(Y):\n    Y = np.asarray(Y, dtype=float)\n    zero = np.zeros(Y.shape[:-1])\n{unpack}{body}"
               f"    return np.stack([{outs}], axis=-1)\n")
    else:
        src = f"def f(Y):\n{unpack}{body}    return ({', '.join(exprs)}{',' if len(exprs) == 1 else ''})\n"
    import numpy as np

    scope = {"math": math, "np": np}
    exec(compile(src, "<fields>", "exec"), scope)
    f = scope["f"]
    f.source = src
    return f
