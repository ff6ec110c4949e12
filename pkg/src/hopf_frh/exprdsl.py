"""A small arithmetic language for coefficient functions, plus the built-in
three-neuron network used throughout the examples.

Grammar (``^`` binds tighter than unary minus, so ``-1^2 == -1``)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' ['-'] INT)?
    atom    := NUMBER | IDENT | 'pi' | FUNC '(' expr ')' | '(' expr ')'

Evaluation works on floats and, elementwise, on numpy arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .errors import EvalError, ExprSyntaxError, UnboundIdentifier, UnknownFunction
from .polycore import CharPoly, check_alpha

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
RESERVED = frozenset({"alpha", "pi"})
IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*\Z")


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Name, Pi, Neg, BinOp, Pow, Call]


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int  # 1-based


def _tokenize(src: str) -> list:
    toks = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), i + 1))
        i = m.end()
    toks.append(_Tok("eof", "", len(src) + 1))
    return toks


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "eof":
            raise ExprSyntaxError(self._describe(), self.tok.pos, {repr(text)})
        return self.advance()

    def _describe(self):
        return "unexpected end of input" if self.tok.kind == "eof" else f"unexpected token {self.tok.text!r}"

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            raise ExprSyntaxError(self._describe(), self.tok.pos, {"'+'", "'-'", "'*'", "'/'", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            sign = 1
            if self.tok.kind == "op" and self.tok.text == "-":
                self.advance()
                sign = -1
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", tok.pos, {"integer"})
            self.advance()
            return Pow(base, sign * int(tok.text))
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"literal {tok.text!r} is not finite", tok.pos)
            return Num(value)
        if tok.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownFunction(tok.text, tok.pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {tok.text!r} needs an argument", self.tok.pos, {"'('"})
            if tok.text == "pi":
                return Pi()
            return Name(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(self._describe(), tok.pos, {"number", "identifier", "'('", "'-'"})


def parse(source: str) -> Node:
    """Parse ``source`` into an immutable AST."""
    return _Parser(source).parse()


# --- utilities -------------------------------------------------------------

def free_names(node: Node) -> frozenset:
    if isinstance(node, Name):
        return frozenset({node.id})
    if isinstance(node, (Num, Pi)):
        return frozenset()
    if isinstance(node, Neg):
        return free_names(node.operand)
    if isinstance(node, BinOp):
        return free_names(node.left) | free_names(node.right)
    if isinstance(node, Pow):
        return free_names(node.base)
    if isinstance(node, Call):
        return free_names(node.arg)
    raise TypeError(f"not an expression node: {node!r}")


def check_bound(node: Node, names) -> None:
    missing = free_names(node) - set(names)
    if missing:
        raise UnboundIdentifier(missing)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(node: Node) -> str:
    """Render ``node`` so that ``parse(to_source(node)) == node``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if not isinstance(node.base, (Num, Name, Pi, Call)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if isinstance(node.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        left = to_source(node.left)
        if isinstance(node.left, BinOp) and _PREC[node.left.op] < prec:
            left = f"({left})"
        right = to_source(node.right)
        # left associativity: an equal-precedence right operand needs parentheses
        if isinstance(node.right, BinOp) and _PREC[node.right.op] <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation ------------------------------------------------------------

def _finite(value, what):
    if not np.all(np.isfinite(value)):
        raise EvalError("NonFinite", f"{what} produced a non-finite value")
    return value


def _eval(node, env):
    # numpy scalars overflow to inf instead of raising, so every failure
    # funnels through the finiteness checks below
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Name):
        try:
            value = env[node.id]
        except KeyError:
            raise UnboundIdentifier({node.id}) from None
        return np.float64(value) if np.ndim(value) == 0 else np.asarray(value, dtype=float)
    if isinstance(node, Pi):
        return np.float64(math.pi)
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return _finite(a + b, "addition")
        if node.op == "-":
            return _finite(a - b, "subtraction")
        if node.op == "*":
            return _finite(a * b, "multiplication")
        if np.any(np.asarray(b) == 0):
            raise EvalError("DivByZero", f"division by zero in {to_source(node)}")
        return _finite(a / b, "division")
    if isinstance(node, Pow):
        base = _eval(node.base, env)
        if node.exponent < 0:
            denom = _finite(base ** -node.exponent, "power")
            if np.any(np.asarray(denom) == 0):
                raise EvalError("DivByZero", f"zero raised to negative power in {to_source(node)}")
            return _finite(1.0 / denom, "power")
        return _finite(base ** node.exponent, "power")
    if isinstance(node, Call):
        arg = _eval(node.arg, env)
        return _finite(FUNCTIONS[node.func](arg), f"{node.func}()")
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Node, bindings: Mapping[str, object]):
    """Evaluate ``node``; array bindings are evaluated elementwise.

    Division by zero, domain errors and overflow raise EvalError rather than
    returning inf or nan.
    """
    check_bound(node, bindings)
    with np.errstate(all="ignore"):
        value = _eval(node, bindings)
    value = _finite(value, "expression")
    if np.ndim(value) == 0:
        return float(value)
    return value


# named after the operation; ``evaluate`` is the preferred spelling
eval = evaluate  # noqa: A001


# --- the built-in demo system ----------------------------------------------

DEFAULT_K = {
    "k11": 2.0, "k12": 2.0, "k13": 2.0,
    "k21": -2.0, "k22": -2.0, "k23": 2.0,
    "k31": -2.0, "k32": 1.0, "k33": -2.0,
}

# characteristic coefficients of the network's Jacobian at the origin, in closed form
DEMO_COEFFS = (
    "mu2 - k33 + 2*mu1 - k22 - k11",
    "k11*k22 + k11*k33 - k11*mu1 - k11*mu2 - k12*k21 - k13*k31"
    " + k22*k33 - k22*mu1 - k22*mu2 - k23*k32 - 2*k33*mu1 + mu1^2 + 2*mu1*mu2",
    "-k11*k22*k33 + k11*k22*mu2 + k11*k23*k32 + k11*k33*mu1 - k11*mu1*mu2"
    " + k12*k21*k33 - k12*k21*mu2 - k12*k23*k31 - k13*k21*k32 + k13*k22*k31"
    " - k13*k31*mu1 + k22*k33*mu1 - k22*mu1*mu2 - k23*k32*mu1 - k33*mu1^2 + mu1^2*mu2",
)
DEMO_PARAMS = ("mu1", "mu2")
_DEMO_AST = tuple(parse(s) for s in DEMO_COEFFS)


@dataclass(frozen=True)
class DemoSystem:
    """Three-neuron fractional network with tanh activations.

    ``d^alpha x_i = -m_i x_i + sum_j k_ij tanh(x_j)`` with decay rates
    ``m = (mu1, mu1, mu2)``; the origin is always an equilibrium.
    """

    k: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_K))
    alpha: float = 1.1

    def __post_init__(self):
        merged = dict(DEFAULT_K)
        unknown = set(self.k) - set(DEFAULT_K)
        if unknown:
            raise KeyError(f"unknown coupling(s): {sorted(unknown)}")
        merged.update({key: float(v) for key, v in self.k.items()})
        object.__setattr__(self, "k", merged)
        check_alpha(self.alpha)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.k[f"k{i}{j}"] for j in (1, 2, 3)] for i in (1, 2, 3)])

    @staticmethod
    def decay(mu) -> np.ndarray:
        mu1, mu2 = mu
        return np.array([mu1, mu1, mu2], dtype=float)

    def jacobian(self, mu) -> np.ndarray:
        """Jacobian at the origin, using tanh'(0) = 1."""
        return self.K - np.diag(self.decay(mu))

    def vector_field(self, mu):
        K = self.K
        m = self.decay(mu)

        def g(x):
            return -m * x + K @ np.tanh(x)

        return g

    def coefficients(self, mu1, mu2):
        env = dict(self.k, mu1=mu1, mu2=mu2, alpha=self.alpha)
        return tuple(evaluate(ast, env) for ast in _DEMO_AST)


def demo_charpoly(mu, overrides: Optional[Mapping[str, float]] = None, alpha: float = 1.1) -> CharPoly:
    """Characteristic polynomial of the demo network at ``mu = (mu1, mu2)``."""
    alpha = check_alpha(alpha)
    system = DemoSystem(dict(overrides or {}), alpha)
    mu1, mu2 = (float(v) for v in mu)
    return CharPoly(system.coefficients(mu1, mu2))
