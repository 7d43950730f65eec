"""A small arithmetic expression language for user-supplied scalar maps.

Grammar (loosest to tightest binding)::

    expr   := expr ('+' | '-') expr          left associative
            | expr ('*' | '/') expr          left associative
            | '-' expr                       unary minus
            | expr '^' expr                  right associative
            | NUMBER | NAME | 'pi' | FUNC '(' expr ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``. Functions are
``sin cos exp ln sqrt abs tanh``; all take one argument.

Evaluation works on floats and on numpy arrays alike. Operations outside
their real domain raise :class:`EvalDomainError` instead of producing NaN.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (EvalDomainError, ExprSyntaxError, ExprTooDeep,
                     UnknownFunction, UnknownIdentifier)

MAX_DEPTH = 256

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)

# left binding powers of infix operators
_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


def _tokenize(src):
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src, variables):
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = frozenset(variables)
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.advance()
        if text != value or kind == "end":
            raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos, [value])

    def parse(self):
        tree = self.expression(0)
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos,
                                  ["operator", "end of input"])
        return tree

    def expression(self, min_bp):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprTooDeep(f"expression nesting exceeds {MAX_DEPTH}")
        left = self.prefix()
        while True:
            kind, text, pos = self.peek()
            if kind != "op" or text not in _INFIX:
                break
            lbp = _INFIX[text]
            if lbp <= min_bp:
                break
            self.advance()
            rbp = lbp - 1 if text == "^" else lbp
            right = self.expression(rbp)
            left = BinOp(text, left, right)
        self.depth -= 1
        return left

    def prefix(self):
        kind, text, pos = self.advance()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"literal {text!r} overflows", pos)
            return Num(value)
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise UnknownFunction(text, pos)
                self.advance()
                arg = self.expression(0)
                nxt = self.peek()
                if nxt[1] == ",":
                    raise ExprSyntaxError(f"{text} takes exactly one argument", nxt[2], [")"])
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Var(text)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", pos, ["("])
            raise UnknownIdentifier(text, pos)
        if kind == "op" and text == "-":
            return Neg(self.expression(_UNARY_BP))
        if kind == "op" and text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos,
                              ["number", "name", "-", "("])


def parse(src: str, variables=("x",)) -> Expr:
    """Parse ``src`` into a tree; only names in ``variables`` (and ``pi``) may appear."""
    return _Parser(src, variables).parse()


def free_variables(e: Expr) -> set:
    if isinstance(e, Var):
        return set() if e.name in CONSTANTS else {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, Call):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def _prec(e):
    if isinstance(e, BinOp):
        return _INFIX[e.op]
    if isinstance(e, Neg):
        return _UNARY_BP
    return 100


def to_string(e: Expr) -> str:
    """Print with the fewest parentheses that reparse to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        if _prec(e.operand) < _UNARY_BP:
            inner = f"({inner})"
        return f"-{inner}"
    p = _INFIX[e.op]
    left = to_string(e.left)
    right = to_string(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {e.op} {right}"


def _first_bad(values, mask):
    if np.ndim(values) == 0:
        return float(values)
    return float(np.asarray(values)[mask][0])


def _eval(e, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        return np.float64(CONSTANTS[e.name])
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, Call):
        a = _eval(e.arg, env)
        if e.func == "ln":
            bad = a <= 0
            if np.any(bad):
                raise EvalDomainError("ln", _first_bad(a, bad))
        elif e.func == "sqrt":
            bad = a < 0
            if np.any(bad):
                raise EvalDomainError("sqrt", _first_bad(a, bad))
        return FUNCTIONS[e.func](a)
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        bad = b == 0
        if np.any(bad):
            raise EvalDomainError("division", _first_bad(a * np.ones_like(b), bad))
        return a / b
    r = np.power(a, b)
    bad = np.isnan(r) & ~(np.isnan(a) | np.isnan(b))
    bad |= np.isinf(r) & (a == 0)
    if np.any(bad):
        raise EvalDomainError("power", _first_bad(a * np.ones_like(r), bad))
    return r


def evaluate(e: Expr, bindings: dict):
    """Evaluate ``e`` with ``bindings`` (floats or broadcastable arrays).

    Returns a Python float when every binding is scalar.
    """
    missing = free_variables(e) - set(bindings)
    if missing:
        raise UnknownIdentifier(sorted(missing)[0], -1)
    env = {k: (np.float64(v) if np.ndim(v) == 0 else np.asarray(v, dtype=float))
           for k, v in bindings.items()}
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    if all(np.ndim(v) == 0 for v in env.values()):
        return float(out)
    return np.broadcast_to(out, np.broadcast_shapes(*(np.shape(v) for v in env.values()))).astype(float)


class ScalarFunction:
    """A parsed one-variable expression usable as ``f(values)``."""

    def __init__(self, src: str, var: str = "x"):
        self.src = src
        self.var = var
        self.tree = parse(src, (var,))

    def __call__(self, values):
        return evaluate(self.tree, {self.var: values})

    def __repr__(self):
        return f"ScalarFunction({self.src!r}, var={self.var!r})"

    def __reduce__(self):
        return (ScalarFunction, (self.src, self.var))
