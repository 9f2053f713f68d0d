"""Recursive-descent parser for boundary-data expressions.

Grammar: numbers, coordinates x1..xn, pi, binary + - * / ^, unary -,
and the functions sin cos exp cosh sinh abs.  Precedence is
^ > unary - > * / > + - with ^ right-associative and everything else
left-associative.  Evaluation is vectorized over numpy point arrays and
total on finite inputs; printing a parsed tree reparses to an identical
tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ExpressionError(ValueError):
    """Parse failure; offset is the byte position in the source text."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "abs": np.abs,
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int  # 1-based


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    arg: object


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise ExpressionError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch):
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            self.error("empty expression")
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error(f"unexpected character {self.text[self.pos]!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            c = self.peek()
            if c and c in "+-":
                self.pos += 1
                node = Bin(c, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            c = self.peek()
            if c and c in "*/":
                self.pos += 1
                node = Bin(c, node, self.unary())
            else:
                return node

    def unary(self):
        if self.take("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.take("^"):
            return Bin("^", node, self.unary())
        return node

    def atom(self):
        c = self.peek()
        if c == "(":
            self.pos += 1
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'")
            return node
        if c.isdigit() or c == ".":
            return self.number()
        if c.isalpha():
            return self.identifier()
        self.error(f"unexpected character {c!r}" if c else "unexpected end of input")

    def number(self):
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(text) and text[self.pos] in "eE":
            probe = self.pos + 1
            if probe < len(text) and text[probe] in "+-":
                probe += 1
            if probe < len(text) and text[probe].isdigit():
                self.pos = probe
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
        try:
            return Num(float(text[start : self.pos]))
        except ValueError:
            self.pos = start
            self.error(f"bad number {text[start:self.pos + 1]!r}")

    def identifier(self):
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        name = text[start : self.pos]
        if name == "pi":
            return Pi()
        if name in FUNCTIONS:
            if not self.take("("):
                self.pos = start
                self.error(f"function {name!r} needs parentheses")
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'")
            return Call(name, node)
        if name.startswith("x") and name[1:].isdigit() and len(name) > 1:
            idx = int(name[1:])
            if idx < 1:
                self.pos = start
                self.error("coordinate indices start at x1")
            return Coord(idx)
        self.pos = start
        self.error(f"unknown identifier {name!r}")


@dataclass(frozen=True)
class Expression:
    """Parsed expression; call on point arrays of shape (N, dim)."""

    tree: object
    source: str

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = _evaluate(self.tree, points)
        return np.broadcast_to(np.asarray(out, dtype=float), (points.shape[0],)).copy()

    @property
    def max_coordinate(self):
        return _max_coord(self.tree)

    def __str__(self):
        return print_tree(self.tree)


def parse_expression(text):
    if not text or not text.strip():
        raise ExpressionError("empty expression", 0)
    return Expression(tree=_Parser(text).parse(), source=text)


def _evaluate(node, points):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Pi):
        return np.pi
    if isinstance(node, Coord):
        if node.index > points.shape[1]:
            raise ValueError(
                f"expression uses x{node.index} but points have {points.shape[1]} coordinates"
            )
        return points[:, node.index - 1]
    if isinstance(node, Neg):
        return -_evaluate(node.arg, points)
    if isinstance(node, Call):
        return FUNCTIONS[node.name](_evaluate(node.arg, points))
    if isinstance(node, Bin):
        a = _evaluate(node.left, points)
        b = _evaluate(node.right, points)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        if node.op == "^":
            return np.power(a, b)
    raise TypeError(f"unknown node {node!r}")


def _max_coord(node):
    if isinstance(node, Coord):
        return node.index
    if isinstance(node, Neg):
        return _max_coord(node.arg)
    if isinstance(node, Call):
        return _max_coord(node.arg)
    if isinstance(node, Bin):
        return max(_max_coord(node.left), _max_coord(node.right))
    return 0


def print_tree(node):
    """Fully parenthesized form; reparses to an identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Coord):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{print_tree(node.arg)})"
    if isinstance(node, Call):
        return f"{node.name}({print_tree(node.arg)})"
    if isinstance(node, Bin):
        return f"({print_tree(node.left)} {node.op} {print_tree(node.right)})"
    raise TypeError(f"unknown node {node!r}")
