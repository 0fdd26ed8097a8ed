"""A small expression language for Hamiltonians ``H(w1, w2, w3)``.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'
    NUMBER  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]   (also '.5')
    VARIABLE:= 'w1' | 'w2' | 'w3'
    FUNC    := 'sin' | 'cos' | 'exp' | 'ln' | 'sqrt' | 'abs'

``^`` binds tighter than unary minus (``-w1^2 == -(w1^2)``) and is right
associative.  Gradients are computed in forward mode with dual numbers that
carry a 3-component tangent, so one evaluation yields the full gradient.
"""

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import CollectiveError

VARIABLES = ("w1", "w2", "w3")
FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs")


class ExpressionSyntaxError(CollectiveError, ValueError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExpressionSyntaxError):
    pass


class DomainError(CollectiveError, ArithmeticError):
    """Evaluation left the domain of an operation (log of a negative, division by zero, ...)."""


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Literal, Variable, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    raw = text.encode()
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[start]!r}", _byte(text, start))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), _byte(text, m.start(kind))))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


def _byte(text, index):
    return len(text[:index].encode())


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", offset)

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
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Literal(float(text))
        if kind == "name":
            if text in VARIABLES:
                return Variable(text)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise UnknownIdentifier(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"expected an operand, found {found}", offset)


def parse(text):
    """Parse ``text`` into an immutable expression tree."""
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    parser = _Parser(text)
    node = parser.expr()
    kind, tok, offset = parser.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"unexpected {tok!r}", offset)
    return node


def to_text(node):
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(node, Literal):
        return repr(float(node.value))
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def is_constant(node):
    if isinstance(node, Variable):
        return False
    if isinstance(node, Literal):
        return True
    if isinstance(node, Neg):
        return is_constant(node.operand)
    if isinstance(node, BinOp):
        return is_constant(node.left) and is_constant(node.right)
    return is_constant(node.arg)


class Dual:
    """Value with a gradient over ``(w1, w2, w3)``.

    ``val`` has the batch shape; ``der`` has shape ``(3,) + batch``.
    """

    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = val
        self.der = der

    def __add__(self, o):
        return Dual(self.val + o.val, self.der + o.der)

    def __sub__(self, o):
        return Dual(self.val - o.val, self.der - o.der)

    def __mul__(self, o):
        return Dual(self.val * o.val, self.der * o.val + self.val * o.der)

    def __truediv__(self, o):
        if np.any(o.val == 0):
            raise DomainError("division by zero")
        q = self.val / o.val
        return Dual(q, (self.der - q * o.der) / o.val)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def chain(self, f, df):
        return Dual(f, df * self.der)


def _ipow(base, n):
    if n < 0:
        if np.any(base.val == 0):
            raise DomainError("zero raised to a negative power")
        return _const(1.0, base) / _ipow(base, -n)
    result = _const(1.0, base)
    square = base
    # binary exponentiation keeps the dual part exact up to rounding
    while n:
        if n & 1:
            result = result * square
        n >>= 1
        if n:
            square = square * square
    return result


def _const(c, like):
    return Dual(np.full(np.shape(like.val), float(c)), np.zeros(np.shape(like.der)))


def _apply(func, a):
    v = a.val
    if func == "sin":
        return a.chain(np.sin(v), np.cos(v))
    if func == "cos":
        return a.chain(np.cos(v), -np.sin(v))
    if func == "exp":
        e = np.exp(v)
        return a.chain(e, e)
    if func == "ln":
        if np.any(v <= 0):
            raise DomainError("ln of a non-positive number")
        return a.chain(np.log(v), 1.0 / v)
    if func == "sqrt":
        if np.any(v <= 0):
            raise DomainError("sqrt of a non-positive number")
        s = np.sqrt(v)
        return a.chain(s, 0.5 / s)
    if func == "abs":
        return a.chain(np.abs(v), np.sign(v))
    raise UnknownIdentifier(f"unknown function {func!r}", 0)


def _eval_dual(node, w):
    if isinstance(node, Literal):
        return Dual(np.full(w.shape[:-1], node.value), np.zeros((3,) + w.shape[:-1]))
    if isinstance(node, Variable):
        k = VARIABLES.index(node.name)
        der = np.zeros((3,) + w.shape[:-1])
        der[k] = 1.0
        return Dual(w[..., k].copy(), der)
    if isinstance(node, Neg):
        return -_eval_dual(node.operand, w)
    if isinstance(node, Call):
        return _apply(node.func, _eval_dual(node.arg, w))
    left = _eval_dual(node.left, w)
    if node.op == "^":
        if is_constant(node.right):
            n = float(_eval_dual(node.right, np.zeros(3)).val)
            if n.is_integer():
                return _ipow(left, int(n))
        right = _eval_dual(node.right, w)
        if np.any(left.val <= 0):
            raise DomainError("non-integer power of a non-positive base")
        lg = np.log(left.val)
        val = np.exp(right.val * lg)
        return Dual(val, val * (right.der * lg + right.val * left.der / left.val))
    right = _eval_dual(node.right, w)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return left / right


def _point(w):
    w = np.asarray(w, dtype=float)
    if w.shape[-1:] != (3,):
        raise ValueError(f"w must have trailing dimension 3, got shape {w.shape}")
    return w


def evaluate(node, w):
    """Value of the expression at ``w`` (shape ``(..., 3)``)."""
    out = _eval_dual(node, _point(w)).val
    return out if np.ndim(out) else float(out)


def grad(node, w):
    """Gradient of the expression at ``w``; shape ``(..., 3)``."""
    der = _eval_dual(node, _point(w)).der
    return np.moveaxis(der, 0, -1)


def hamiltonian(text):
    """Build a :class:`~collective_lp.hamiltonians.HamiltonianSystem` from expression text."""
    from .hamiltonians import HamiltonianSystem

    node = parse(text)
    return HamiltonianSystem(
        value=lambda w: evaluate(node, w),
        gradient=lambda w: grad(node, w),
        name=text,
    )
