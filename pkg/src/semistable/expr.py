"""Infix expression parser for nonlinearities in the variable ``t``.

Grammar (ASCII only)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('+' | '-') unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | 't' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := exp | ln | sqrt

``-t^2`` parses as ``-(t^2)`` and ``2^-t`` as ``2^(-t)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .jet import DomainError, Jet2


class ParseError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        pointer = f"\n  {text}\n  {' ' * position}^" if text else ""
        super().__init__(f"{message} at position {position}{pointer}")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Call]

FUNCTIONS = ("exp", "ln", "sqrt")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        if not text.isascii():
            raise ParseError("non-ASCII input", next(i for i, c in enumerate(text) if ord(c) > 127), text)
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            arg = self.unary()
            return Neg(arg) if val == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val == "t":
                return Var()
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ParseError(f"unknown name {val!r}", pos, self.text)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos, self.text)


def parse_expression(text: str) -> Node:
    """Parse ``text`` into an expression tree (no domain checks)."""
    return _Parser(text).parse()


def is_constant(node: Node) -> bool:
    if isinstance(node, Const):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Neg):
        return is_constant(node.arg)
    if isinstance(node, Call):
        return is_constant(node.arg)
    return is_constant(node.left) and is_constant(node.right)


def evaluate_jet(node: Node, t: Jet2) -> Jet2:
    """Propagate a second-order jet through the tree."""
    if isinstance(node, Const):
        return Jet2(node.value, 0.0, 0.0)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -evaluate_jet(node.arg, t)
    if isinstance(node, Call):
        arg = evaluate_jet(node.arg, t)
        if node.fn == "exp":
            return arg.exp()
        if node.fn == "ln":
            return arg.log()
        return arg.sqrt()
    left = evaluate_jet(node.left, t)
    if node.op == "^" and is_constant(node.right):
        return left.powc(evaluate_jet(node.right, t).value)
    right = evaluate_jet(node.right, t)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    return left**right


def evaluate(node: Node, t: float) -> float:
    """Plain float evaluation of the tree."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -evaluate(node.arg, t)
    if isinstance(node, Call):
        x = evaluate(node.arg, t)
        try:
            if node.fn == "exp":
                return math.exp(x)
            if node.fn == "ln":
                return math.log(x)
            return math.sqrt(x)
        except ValueError as exc:
            raise DomainError(f"{node.fn}({x!r}) is undefined") from exc
    a = evaluate(node.left, t)
    b = evaluate(node.right, t)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if a < 0.0 and not float(b).is_integer():
        raise DomainError("non-integer power of a negative base")
    if a == 0.0 and b < 0.0:
        raise DomainError("zero base with negative exponent")
    return a**b


def to_text(node: Node) -> str:
    """Fully parenthesised rendering; re-parses to an equal tree."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.arg)})"
    return f"({to_text(node.left)}{node.op}{to_text(node.right)})"
