"""Tiny arithmetic expression language used by scenario files.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the coordinates ``q1..qn``, ``p1..pn`` and the constant ``pi``.
Only whitelisted functions may be called.  A parsed expression compiles to a
closure over a phase vector ``z = (q, p)`` (or a configuration vector ``q``)
that works with floats and with dual numbers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)


class ExpressionError(ScenarioError):
    def __init__(self, message, column, source):
        self.column = column
        self.source = source
        super().__init__(f"{message} at column {column} in {source!r}")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    col: int  # 1-based


def tokenize(text):
    tokens = []
    pos = 0
    text = str(text)
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(Token(kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.take()
        if t.text != text:
            raise ExpressionError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.col, self.text)
        return t

    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ExpressionError(f"unexpected token {t.text!r}", t.col, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        if self.peek().text in ("+", "-"):
            op = self.take().text
            operand = self.unary()
            if op == "+":
                return operand
            return ("num", -operand[1]) if operand[0] == "num" else ("neg", operand)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text in ("^", "**"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        t = self.take()
        if t.kind == "num":
            return ("num", float(t.text))
        if t.kind == "name":
            if self.peek().text == "(":
                if t.text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {t.text!r}", t.col, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return ("call", t.text, arg)
            if t.text in CONSTANTS:
                return ("num", CONSTANTS[t.text])
            if t.text in self.variables:
                return ("var", self.variables[t.text])
            raise ExpressionError(f"unknown name {t.text!r}", t.col, self.text)
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {t.text or 'end of input'!r}", t.col, self.text)


def _compile(node):
    kind = node[0]
    if kind == "num":
        value = node[1]
        return lambda z: value
    if kind == "var":
        index = node[1]
        return lambda z: z[index]
    if kind == "neg":
        f = _compile(node[1])
        return lambda z: -f(z)
    if kind == "call":
        fn = FUNCTIONS[node[1]]
        f = _compile(node[2])
        return lambda z: fn(f(z))
    a, b = _compile(node[1]), _compile(node[2])
    if kind == "add":
        return lambda z: a(z) + b(z)
    if kind == "sub":
        return lambda z: a(z) - b(z)
    if kind == "mul":
        return lambda z: a(z) * b(z)
    if kind == "div":
        return lambda z: a(z) / b(z)
    if kind == "pow":
        if node[2][0] == "num":
            exponent = node[2][1]
            if float(exponent).is_integer():
                exponent = int(exponent)
            return lambda z: a(z) ** exponent
        return lambda z: a(z) ** b(z)
    raise AssertionError(kind)


def variable_table(n, phase=True):
    """Name -> index map: q1..qn (and p1..pn at n..2n-1 when phase=True)."""
    table = {f"q{i + 1}": i for i in range(n)}
    if phase:
        table.update({f"p{i + 1}": n + i for i in range(n)})
    return table


@dataclass(frozen=True)
class Expression:
    source: str
    tree: tuple
    fn: object

    def __call__(self, z):
        return self.fn(z)

    @property
    def is_constant(self):
        return self.tree[0] == "num"


def parse_expression(text, n, phase=True):
    """Parse text over q1..qn (and p1..pn if phase) into a callable Expression."""
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise ExpressionError("expression must be a string or a number", 1, str(text))
    src = repr(float(text)) if isinstance(text, (int, float)) else text
    tree = _Parser(src, variable_table(n, phase)).parse()
    return Expression(src, tree, _compile(tree))


def vector_function(exprs):
    """Stack scalar expressions into a vector-valued callable."""
    exprs = list(exprs)

    def f(z):
        vals = [e(z) for e in exprs]
        if any(not isinstance(v, (int, float)) for v in vals):
            out = np.empty(len(vals), dtype=object)
            for i, v in enumerate(vals):
                out[i] = v
            return out
        return np.array(vals, dtype=float)

    return f


def matrix_function(rows):
    """rows[i][j] expressions -> callable returning a 2-D array."""
    rows = [list(r) for r in rows]
    constant = all(e.is_constant for r in rows for e in r)
    if constant:
        value = np.array([[e(None) for e in r] for r in rows], dtype=float)
        return (lambda z: value), value

    def f(z):
        vals = [[e(z) for e in r] for r in rows]
        flat = [v for r in vals for v in r]
        if any(not isinstance(v, (int, float)) for v in flat):
            out = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
            for i, r in enumerate(vals):
                for j, v in enumerate(r):
                    out[i, j] = v
            return out
        return np.array(vals, dtype=float)

    return f, None
