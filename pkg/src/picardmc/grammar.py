"""Tiny arithmetic grammar for drift expressions.

Expressions are built from the primitives ``t``, ``x(t)``, ``y(t)`` and
``supy(t)`` (running sup of ``|y|`` up to ``t``), numeric literals, unary
minus and the operators ``+ - * /``.  Every primitive is causal in the
grid sense, and the arithmetic preserves causality, so a parsed expression
is a valid grid-causal drift evaluator by construction.  Anything richer
than this grammar has to be registered from code.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class GrammarError(ValueError):
    """Malformed drift expression."""


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[()+\-*/]))"
)

_PRIMITIVES = ("t", "x", "y", "supy")


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GrammarError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.lastgroup == "num":
            out.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
        pos = m.end()
    out.append(("end", None))
    return out


@dataclass(frozen=True)
class Expr:
    """Parsed drift expression node."""

    kind: str  # "num" | "prim" | "neg" | "+", "-", "*", "/"
    value: float = 0.0
    name: str = ""
    left: "Expr | None" = None
    right: "Expr | None" = None

    def matrix(self, times, x, y):
        """Evaluate on (batch, knots+1) path matrices; columns stay causal."""
        if self.kind == "num":
            return np.full(y.shape, self.value)
        if self.kind == "prim":
            if self.name == "t":
                return np.broadcast_to(times, y.shape).copy()
            if self.name == "x":
                return np.array(x, dtype=float, copy=True)
            if self.name == "y":
                return np.array(y, dtype=float, copy=True)
            return np.maximum.accumulate(np.abs(y), axis=1)
        if self.kind == "neg":
            return -self.left.matrix(times, x, y)
        a = self.left.matrix(times, x, y)
        b = self.right.matrix(times, x, y)
        if self.kind == "+":
            return a + b
        if self.kind == "-":
            return a - b
        if self.kind == "*":
            return a * b
        return a / b

    def value_at(self, i, times, x, y):
        """Evaluate at knot ``i`` on single paths; reads entries <= i only."""
        if self.kind == "num":
            return self.value
        if self.kind == "prim":
            if self.name == "t":
                return times[i]
            if self.name == "x":
                return x[i]
            if self.name == "y":
                return y[i]
            return float(np.max(np.abs(y[: i + 1])))
        if self.kind == "neg":
            return -self.left.value_at(i, times, x, y)
        a = self.left.value_at(i, times, x, y)
        b = self.right.value_at(i, times, x, y)
        if self.kind == "+":
            return a + b
        if self.kind == "-":
            return a - b
        if self.kind == "*":
            return a * b
        return a / b

    def affine(self):
        """Return (c0, cx, cy) when the expression is affine in x(t), y(t).

        Returns None for anything involving ``t``, ``supy(t)`` or genuine
        nonlinearity; those run through the generic evaluation path.
        """
        if self.kind == "num":
            return (self.value, 0.0, 0.0)
        if self.kind == "prim":
            if self.name == "x":
                return (0.0, 1.0, 0.0)
            if self.name == "y":
                return (0.0, 0.0, 1.0)
            return None
        if self.kind == "neg":
            a = self.left.affine()
            return None if a is None else (-a[0], -a[1], -a[2])
        a, b = self.left.affine(), self.right.affine()
        if a is None or b is None:
            return None
        if self.kind == "+":
            return (a[0] + b[0], a[1] + b[1], a[2] + b[2])
        if self.kind == "-":
            return (a[0] - b[0], a[1] - b[1], a[2] - b[2])
        if self.kind == "*":
            if a[1] == a[2] == 0.0:
                return (a[0] * b[0], a[0] * b[1], a[0] * b[2])
            if b[1] == b[2] == 0.0:
                return (b[0] * a[0], b[0] * a[1], b[0] * a[2])
            return None
        if b[1] == b[2] == 0.0 and b[0] != 0.0:
            return (a[0] / b[0], a[1] / b[0], a[2] / b[0])
        return None


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise GrammarError(f"expected {op!r}, got {val!r}")

    def parse_expr(self):
        node = self.parse_term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            node = Expr(op, left=node, right=self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            node = Expr(op, left=node, right=self.parse_unary())
        return node

    def parse_unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Expr("neg", left=self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        kind, val = self.take()
        if kind == "num":
            return Expr("num", value=val)
        if kind == "name":
            if val not in _PRIMITIVES:
                raise GrammarError(f"unknown name {val!r}; allowed: {_PRIMITIVES}")
            if val == "t":
                return Expr("prim", name="t")
            self.expect_op("(")
            inner_kind, inner_val = self.take()
            if (inner_kind, inner_val) != ("name", "t"):
                raise GrammarError(f"{val} takes the literal argument t")
            self.expect_op(")")
            return Expr("prim", name=val)
        if (kind, val) == ("op", "("):
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise GrammarError(f"unexpected token {val!r}")


def parse(text: str) -> Expr:
    """Parse a drift expression; raises GrammarError on malformed input."""
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    if parser.peek() != ("end", None):
        raise GrammarError(f"trailing input near token {parser.peek()[1]!r}")
    return node
