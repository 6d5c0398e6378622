"""Scalar expressions in the ambient coordinates x1..x4.

Expressions are parsed into a small immutable AST and evaluated together with
their gradient and Hessian by second-order forward-mode differentiation.
Evaluation is vectorised: a batch of points of shape ``(N, 4)`` is processed in
one pass, which is what the critical-point and seed searches rely on.
"""
from __future__ import annotations

import math
import re
from functools import lru_cache
from dataclasses import dataclass
from typing import Union

import numpy as np

DIM = 4
FUNCTIONS = ("sin", "cos", "exp")


class ExpressionError(ValueError):
    pass


class ExprSyntaxError(ExpressionError):
    """Malformed input. ``offset`` is a byte offset into the source text."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        super().__init__(f"{message} at offset {offset}" + (f" (expected {exp})" if exp else ""))


class UnknownIdentifier(ExpressionError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class DomainError(ArithmeticError):
    pass


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based

    def __post_init__(self):
        if self.index not in (1, 2, 3, 4):
            raise ValueError(f"variable index {self.index} out of range")

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Neg:
    arg: "Expression"

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int

    def __str__(self):
        return f"({self.base})^{self.exponent}"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"

    def __str__(self):
        return f"{self.func}({self.arg})"


Expression = Union[Num, Var, Neg, BinOp, Pow, Call]


# --- parser ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    # byte offsets are reported, so work on the utf-8 encoding
    raw = text.encode("utf-8")
    src = raw.decode("latin-1")
    src = src.replace("\xe2\x88\x92", "  -").replace("\xc3\x97", " *").replace("\xc3\xb7", " /")
    toks = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad,
                                  {"number", "identifier", "operator"})
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def _take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def _is(self, text):
        return self.tok.kind == "op" and self.tok.text == text

    def _expect(self, text):
        if not self._is(text):
            raise ExprSyntaxError(f"unexpected {self.tok.text or 'end of input'!r}", self.tok.offset, {repr(text)})
        self._take()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset,
                                  {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self._is("+") or self._is("-"):
            op = self._take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self._is("*") or self._is("/"):
            op = self._take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self._is("-"):
            self._take()
            return Neg(self.unary())
        if self._is("+"):
            self._take()
            return self.unary()
        return self.power()

    def power(self):
        node = self.atom()
        while self._is("^"):
            self._take()
            sign = 1
            if self._is("-"):
                self._take()
                sign = -1
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", t.offset, {"integer"})
            self._take()
            node = Pow(node, sign * int(t.text))
        return node

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self._take()
            return Num(float(t.text))
        if t.kind == "name":
            self._take()
            m = re.fullmatch(r"x([1-4])", t.text)
            if m:
                return Var(int(m.group(1)))
            if t.text in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(t.text, arg)
            raise UnknownIdentifier(t.text, t.offset)
        if self._is("("):
            self._take()
            node = self.expr()
            self._expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {t.text or 'end of input'!r}", t.offset,
                              {"number", "variable", "function", "'('", "'-'"})


def parse(text: str) -> Expression:
    """Parse infix text. Precedence: ``^`` > unary minus > ``* /`` > ``+ -``."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, {"number", "variable", "function", "'('"})
    return _Parser(text).parse()


def negate(e: Expression) -> Expression:
    return Neg(e)


# --- second-order jets -----------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


class _Gen:
    """Emits straight-line forward-mode code for one expression.

    Every node yields (value, gradient[4], hessian{(i, j): ...}) where entries
    are Python source snippets or None for structural zeros, so sparsity of the
    variables propagates and no work is spent on known zeros.
    """

    def __init__(self):
        self.lines = []
        self.n = 0

    def tmp(self, src):
        name = f"t{self.n}"
        self.n += 1
        self.lines.append(f"{name} = {src}")
        return name

    def mul(self, a, b):
        if a is None or b is None:
            return None
        if a == "1.0":
            return b
        if b == "1.0":
            return a
        return self.tmp(f"{a} * {b}")

    def add(self, a, b):
        if a is None:
            return b
        if b is None:
            return a
        return self.tmp(f"{a} + {b}")

    def neg(self, a):
        return None if a is None else self.tmp(f"-{a}")

    def chain(self, a, d0, d1, d2):
        v, g, h = a
        g2 = [self.mul(d1, gi) for gi in g]
        h2 = {}
        for (i, j), hij in h.items():
            h2[i, j] = self.add(self.mul(d1, hij), self.mul(d2, self.mul(g[i], g[j])))
        return d0, g2, h2

    def product(self, a, b):
        av, ag, ah = a
        bv, bg, bh = b
        v = self.tmp(f"{av} * {bv}")
        g = [self.add(self.mul(av, bg[i]), self.mul(bv, ag[i])) for i in range(DIM)]
        h = {}
        for (i, j) in ah:
            t = self.add(self.mul(av, bh[i, j]), self.mul(bv, ah[i, j]))
            t = self.add(t, self.mul(ag[i], bg[j]))
            h[i, j] = self.add(t, self.mul(ag[j], bg[i]))
        return v, g, h

    def node(self, e):
        zero_h = {(i, j): None for i in range(DIM) for j in range(i, DIM)}
        if isinstance(e, Num):
            return repr(float(e.value)), [None] * DIM, zero_h
        if isinstance(e, Var):
            g = [None] * DIM
            g[e.index - 1] = "1.0"
            return f"x{e.index}", g, zero_h
        if isinstance(e, Neg):
            v, g, h = self.node(e.arg)
            return self.tmp(f"-{v}"), [self.neg(x) for x in g], {k: self.neg(x) for k, x in h.items()}
        if isinstance(e, BinOp):
            a = self.node(e.left)
            b = self.node(e.right)
            if e.op in "+-":
                if e.op == "-":
                    b = (self.tmp(f"-{b[0]}"), [self.neg(x) for x in b[1]], {k: self.neg(x) for k, x in b[2].items()})
                return (self.tmp(f"{a[0]} + {b[0]}"), [self.add(x, y) for x, y in zip(a[1], b[1])],
                        {k: self.add(a[2][k], b[2][k]) for k in a[2]})
            if e.op == "*":
                return self.product(a, b)
            self.lines.append(f"_nonzero({b[0]})")
            inv = self.tmp(f"1.0 / {b[0]}")
            d1 = self.tmp(f"-{inv} * {inv}")
            d2 = self.tmp(f"2.0 * {inv} * {inv} * {inv}")
            return self.product(a, self.chain(b, inv, d1, d2))
        if isinstance(e, Pow):
            k = e.exponent
            if k == 0:
                return "1.0", [None] * DIM, zero_h
            a = self.node(e.base)
            if k == 1:
                return a
            x = a[0]
            if k < 0:
                self.lines.append(f"_nonzero({x})")
            d0 = self.tmp(f"{x} ** {k}")
            d1 = self.tmp(f"{k}.0 * {x}") if k == 2 else self.tmp(f"{k}.0 * {x} ** {k - 1}")
            if k == 2:
                d2 = "2.0"
            elif k == 3:
                d2 = self.tmp(f"6.0 * {x}")
            else:
                d2 = self.tmp(f"{k * (k - 1)}.0 * {x} ** {k - 2}")
            return self.chain(a, d0, d1, d2)
        if isinstance(e, Call):
            a = self.node(e.arg)
            x = a[0]
            if e.func == "exp":
                ex = self.tmp(f"exp({x})")
                return self.chain(a, ex, ex, ex)
            s = self.tmp(f"sin({x})")
            c = self.tmp(f"cos({x})")
            if e.func == "sin":
                return self.chain(a, s, c, self.tmp(f"-{s}"))
            return self.chain(a, c, self.tmp(f"-{s}"), self.tmp(f"-{c}"))
        raise TypeError(f"not an expression node: {e!r}")


def _nonzero(x):
    if np.any(np.asarray(x) == 0.0):
        raise DomainError("division by zero")


_HESS_KEYS = [(i, j) for i in range(DIM) for j in range(i, DIM)]


@lru_cache(maxsize=256)
def _compiled(e):
    gen = _Gen()
    v, g, h = gen.node(e)
    out = [v] + [x or "0.0" for x in g] + [h[k] or "0.0" for k in _HESS_KEYS]
    body = "\n    ".join(gen.lines + [f"return ({', '.join(out)},)"])
    src = f"def jet(x1, x2, x3, x4):\n    {body}\n"
    fns = []
    for lib in (math, np):
        ns = {"sin": lib.sin, "cos": lib.cos, "exp": lib.exp, "_nonzero": _nonzero}
        exec(compile(src, "<jet>", "exec"), ns)
        fns.append(ns["jet"])
    return tuple(fns)


def _assemble_hessian(hv, shape):
    H = np.empty(shape + (DIM, DIM))
    for (i, j), x in zip(_HESS_KEYS, hv):
        H[..., i, j] = x
        H[..., j, i] = x
    return H


def jet_point(e: Expression, p):
    """Fast single-point evaluation: ``(value, gradient, hessian)``."""
    scalar_fn, _ = _compiled(e)
    try:
        out = scalar_fn(float(p[0]), float(p[1]), float(p[2]), float(p[3]))
    except ZeroDivisionError as exc:
        raise DomainError(str(exc)) from None
    return out[0], np.array(out[1:5]), _assemble_hessian(out[5:], ())


def eval_batch(e: Expression, P) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values ``(N,)``, gradients ``(N, 4)`` and Hessians ``(N, 4, 4)`` at points ``P``."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[1] != DIM:
        raise ValueError(f"points must have {DIM} coordinates")
    n = P.shape[0]
    _, vector_fn = _compiled(e)
    with np.errstate(divide="raise", invalid="ignore"):
        out = vector_fn(P[:, 0], P[:, 1], P[:, 2], P[:, 3])
    out = [np.broadcast_to(np.asarray(x, dtype=float), (n,)) for x in out]
    v = np.array(out[0])
    g = np.stack(out[1:5], axis=1)
    return v, g, _assemble_hessian(out[5:], (n,))


def eval_jet2(e: Expression, p) -> Jet2:
    p = np.asarray(p, dtype=float)
    if p.shape != (DIM,) or not np.all(np.isfinite(p)):
        raise ValueError("point must be a finite 4-vector")
    v, g, h = jet_point(e, p)
    return Jet2(float(v), g, h)


def evaluate(e: Expression, p) -> float:
    return eval_jet2(e, p).value


def count_nodes(e: Expression) -> int:
    if isinstance(e, (Num, Var)):
        return 1
    if isinstance(e, BinOp):
        return 1 + count_nodes(e.left) + count_nodes(e.right)
    if isinstance(e, Pow):
        return 1 + count_nodes(e.base)
    return 1 + count_nodes(e.arg)

