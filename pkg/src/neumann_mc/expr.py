"""A small arithmetic-expression language for kernels and right-hand sides.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | atom
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Variables are positional: ``t`` and ``u`` name the first argument, ``s`` and
``v`` the second.  On multi-dimensional domains the coordinates are written
``u1, u2, ...`` (``t1, ...``) and ``v1, v2, ...`` (``s1, ...``); a bare ``u``
is the first coordinate.  Evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "EvaluationError",
    "parse_expression",
    "to_string",
    "evaluate",
    "variables",
]


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    role: str  # "first" or "second"
    index: int  # 1-based coordinate


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


Expr = Union[Num, Const, Var, Neg, BinOp, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
_ROLES = {"t": "first", "u": "first", "s": "second", "v": "second"}
_NAME_OF_ROLE = {"first": "u", "second": "v"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val, pos = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        base = self.unary()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if self.peek()[1] == "(":
                raise UnknownIdentifierError(f"unknown function {val!r}", pos)
            if val in CONSTANTS:
                return Const(val)
            m = re.fullmatch(r"([tsuv])([1-9]\d*)?", val)
            if m is None:
                raise UnknownIdentifierError(f"unknown identifier {val!r}", pos)
            return Var(_ROLES[m.group(1)], int(m.group(2) or 1))
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ParseError` (with the offending offset) on malformed input
    and :class:`UnknownIdentifierError` on names outside the vocabulary.
    """
    return _Parser(text).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_string(node: Expr) -> str:
    """Render ``node`` back to source; parsing the result gives the same tree."""

    def go(n: Expr, parent: int, right: bool = False) -> str:
        if isinstance(n, Num):
            s = repr(n.value)
            return f"({s})" if n.value < 0 else s
        if isinstance(n, Const):
            return n.name
        if isinstance(n, Var):
            return f"{_NAME_OF_ROLE[n.role]}{n.index}"
        if isinstance(n, Call):
            return f"{n.func}({go(n.arg, 0)})"
        if isinstance(n, Neg):
            # unary minus binds tighter than '^' in this grammar
            return "-" + go(n.operand, 5)
        p = _PREC[n.op]
        if n.op == "^":
            s = f"{go(n.left, 5)}^{go(n.right, 4)}"
        else:
            s = f"{go(n.left, p)}{n.op}{go(n.right, p + 1)}"
        return f"({s})" if p < parent or (p == parent and right) else s

    return go(node, 0)


def variables(node: Expr) -> set[tuple[str, int]]:
    """The ``(role, index)`` pairs referenced by ``node``."""
    if isinstance(node, Var):
        return {(node.role, node.index)}
    if isinstance(node, (Neg, Call)):
        return variables(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set()


def _coord(x: np.ndarray | float, index: int, dim: int):
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return x
    return x[..., index - 1]


def evaluate(
    node: Expr,
    first=None,
    second=None,
    dim: int = 1,
) -> np.ndarray | float:
    """Evaluate ``node`` with ``first``/``second`` bound to the positional arguments.

    Arguments may be scalars or arrays that broadcast against each other; for
    ``dim > 1`` their trailing axis holds the coordinates.  Invalid operations
    (log of a negative number, division by zero, ...) raise
    :class:`EvaluationError` instead of producing nan or inf.
    """
    env: Mapping[str, object] = {"first": first, "second": second}

    def go(n: Expr):
        if isinstance(n, Num):
            return np.float64(n.value)
        if isinstance(n, Const):
            return np.float64(CONSTANTS[n.name])
        if isinstance(n, Var):
            arg = env[n.role]
            if arg is None:
                raise EvaluationError(
                    f"variable {_NAME_OF_ROLE[n.role]}{n.index} is not bound here"
                )
            if n.index > dim:
                raise EvaluationError(
                    f"coordinate {n.index} exceeds domain dimension {dim}"
                )
            return _coord(arg, n.index, dim)
        if isinstance(n, Neg):
            return -go(n.operand)
        if isinstance(n, Call):
            return FUNCTIONS[n.func](go(n.arg))
        a, b = go(n.left), go(n.right)
        if n.op == "+":
            return a + b
        if n.op == "-":
            return a - b
        if n.op == "*":
            return a * b
        if n.op == "/":
            return a / b
        return np.power(a, b)

    with np.errstate(all="raise", under="ignore"):
        try:
            out = go(node)
        except (FloatingPointError, ZeroDivisionError) as exc:
            raise EvaluationError(f"invalid operation while evaluating: {exc}") from exc
    return out
