"""Closed-form scalar expressions over named chart coordinates.

Expressions are immutable trees. They can be parsed from a small infix
language, printed back, evaluated (scalars or numpy arrays), differentiated
exactly, and lightly simplified.

Grammar (precedence ``^`` > unary ``-`` > ``* /`` > ``+ -``, ``^`` is
right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = (
    "sin", "cos", "tan", "exp", "ln", "arctan", "sinh", "cosh", "sqrt", "abs", "sign",
)
BUILTIN_CONSTANTS = {"pi": math.pi}

# binding strength used by the printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}

Number = Union[float, np.ndarray]


class ParseError(ValueError):
    """Syntax error at a byte offset of the source text."""

    def __init__(self, text: str, pos: int, expected: str):
        self.text = text
        self.offset = len(text[:pos].encode("utf-8"))
        self.expected = expected
        super().__init__(f"at byte {self.offset}: expected {expected}")


class EvaluationError(Exception):
    pass


class UnboundNameError(EvaluationError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound name {name!r}")

    def __str__(self):
        return self.args[0]


class DomainError(EvaluationError, ArithmeticError):
    def __init__(self, message: str, subexpression: "Expression"):
        self.subexpression = subexpression
        super().__init__(f"{message} in {subexpression}")


class Expression:
    """Base class of expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other):
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other):
        return BinOp("-", self, as_expr(other))

    def __rsub__(self, other):
        return BinOp("-", as_expr(other), self)

    def __mul__(self, other):
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other):
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return BinOp("/", as_expr(other), self)

    def __pow__(self, other):
        return BinOp("^", self, as_expr(other))

    def __rpow__(self, other):
        return BinOp("^", as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expression):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class NamedConst(Expression):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expression):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(frozen=True, eq=True, repr=True)
class Func(Expression):
    name: str
    arg: Expression


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(float(value))


def func(name: str, arg) -> Func:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    return Func(name, as_expr(arg))


# --------------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while True:
            m = _TOKEN.match(text, pos)
            if m is None:
                rest = text[pos:]
                if rest.strip() == "":
                    break
                bad = pos + len(rest) - len(rest.lstrip())
                raise ParseError(text, bad, "number, name, operator or parenthesis")
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(self.text, pos, f"'{op}'")
        self.i += 1

    def parse(self) -> Expression:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(self.text, pos, "operator or end of input")
        return e

    def expr(self):
        left = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                left = BinOp(val, left, self.term())
            else:
                return left

    def term(self):
        left = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                left = BinOp(val, left, self.unary())
            else:
                return left

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            nk, nv, _ = self.peek()
            operand = self.unary()
            # a negated bare literal is a negative constant
            if nk == "num" and isinstance(operand, Const):
                return Const(-operand.value)
            return Neg(operand)
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Func(val, arg)
            if val in BUILTIN_CONSTANTS:
                return NamedConst(val)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(self.text, pos, "number, name, function call or '('")


def parse(text: str) -> Expression:
    if not text or not text.strip():
        raise ParseError(text or "", 0, "non-empty expression")
    return _Parser(text).parse()


# --------------------------------------------------------------------------- printing

def _fmt_number(v: float) -> str:
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _prec(e: Expression) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    if isinstance(e, Const) and (e.value < 0 or str(e.value).startswith("-")):
        return _PREC["neg"]
    return _PREC["atom"]


def to_string(e: Expression) -> str:
    """Canonical infix form; ``parse(to_string(e)) == e`` for parsed trees."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, (Var, NamedConst)):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        if _prec(e.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = to_string(e.left), to_string(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(e.left) < p:
            left = f"({left})"
        # left-associative: equal precedence on the right needs parentheses
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------- inspection

def free_names(e: Expression) -> frozenset:
    """Names that must be bound to evaluate ``e`` (builtin constants excluded)."""
    out = set()
    stack = [e]
    seen = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Func):
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.append(node.left)
            stack.append(node.right)
    return frozenset(out)


def subexpressions(e: Expression, kind=None):
    """Yield every node of ``e`` (optionally only instances of ``kind``)."""
    stack = [e]
    while stack:
        node = stack.pop()
        if kind is None or isinstance(node, kind):
            yield node
        if isinstance(node, (Neg, Func)):
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.append(node.right)
            stack.append(node.left)


def is_zero(e: Expression) -> bool:
    return isinstance(e, Const) and e.value == 0.0


# --------------------------------------------------------------------------- evaluation

def _any(mask) -> bool:
    return bool(np.any(mask))


def _is_integer(x) -> np.ndarray:
    return np.equal(np.floor(x), x)


def evaluate(e: Expression, bindings: Mapping[str, Number]) -> Number:
    """Evaluate ``e`` with every free name bound.

    Bindings may be floats or numpy arrays (broadcast together). Shared
    subtrees are evaluated once per call.
    """
    memo: dict = {}

    def ev(node):
        hit = memo.get(id(node))
        if hit is not None:
            return hit[1]
        val = _eval_node(node, ev, bindings)
        memo[id(node)] = (node, val)
        return val

    try:
        return ev(e)
    finally:
        # ev refers to itself through its closure; drop the arrays eagerly
        memo.clear()


def _eval_node(node, ev, bindings):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, NamedConst):
        return BUILTIN_CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise UnboundNameError(node.name) from None
    if isinstance(node, Neg):
        return -ev(node.arg)
    if isinstance(node, BinOp):
        a, b = ev(node.left), ev(node.right)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if _any(np.equal(b, 0.0)):
                raise DomainError("division by zero", node)
            return np.divide(a, b) if isinstance(a, np.ndarray) or isinstance(b, np.ndarray) else a / b
        if op == "^":
            a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
            if _any((a_arr < 0) & ~_is_integer(b_arr)):
                raise DomainError("negative base with non-integer exponent", node)
            if _any((a_arr == 0) & (b_arr < 0)):
                raise DomainError("zero to a negative power", node)
            with np.errstate(over="ignore"):
                out = np.power(a_arr, b_arr)
            return out if out.ndim else float(out)
        raise ValueError(op)
    if isinstance(node, Func):
        x = ev(node.arg)
        name = node.name
        if name == "ln":
            if _any(np.less_equal(x, 0.0)):
                raise DomainError("logarithm of non-positive value", node)
            return np.log(x)
        if name == "sqrt":
            if _any(np.less(x, 0.0)):
                raise DomainError("square root of negative value", node)
            return np.sqrt(x)
        with np.errstate(over="ignore"):
            out = _NUMPY_FUNCS[name](x)
        return out
    raise TypeError(f"not an expression: {node!r}")


_NUMPY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "arctan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "abs": np.abs,
    "sign": np.sign,
}


# --------------------------------------------------------------------------- calculus

def differentiate(e: Expression, var: str) -> Expression:
    """Exact symbolic derivative of ``e`` with respect to ``var``.

    ``abs`` differentiates to ``sign``, so the derivative of ``abs`` at 0 is 0.
    """
    memo: dict = {}

    def d(node):
        hit = memo.get(id(node))
        if hit is None:
            hit = memo[id(node)] = (node, simplify(_d(node, var, d)))
        return hit[1]

    return d(e)


def _d(node, var, d):
    if isinstance(node, (Const, NamedConst)):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return Neg(d(node.arg))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        op = node.op
        if op in "+-":
            return BinOp(op, d(u), d(v))
        if op == "*":
            return d(u) * v + u * d(v)
        if op == "/":
            return (d(u) * v - u * d(v)) / v ** Const(2.0)
        if op == "^":
            v_dep = var in free_names(v)
            u_dep = var in free_names(u)
            if not v_dep:
                return v * u ** (v - ONE) * d(u)
            if not u_dep:
                return node * Func("ln", u) * d(v)
            return node * (d(v) * Func("ln", u) + v * d(u) / u)
    if isinstance(node, Func):
        u = node.arg
        du = d(u)
        name = node.name
        if name == "sin":
            outer = Func("cos", u)
        elif name == "cos":
            outer = Neg(Func("sin", u))
        elif name == "tan":
            outer = ONE + Func("tan", u) ** Const(2.0)
        elif name == "exp":
            outer = node
        elif name == "ln":
            return du / u
        elif name == "arctan":
            return du / (ONE + u ** Const(2.0))
        elif name == "sinh":
            outer = Func("cosh", u)
        elif name == "cosh":
            outer = Func("sinh", u)
        elif name == "sqrt":
            return du / (Const(2.0) * node)
        elif name == "abs":
            outer = Func("sign", u)
        elif name == "sign":
            return ZERO
        else:
            raise ValueError(name)
        return outer * du
    raise TypeError(f"not an expression: {node!r}")


def gradient(e: Expression, names) -> tuple:
    return tuple(differentiate(e, n) for n in names)


# --------------------------------------------------------------------------- simplification

def _fold_binop(op, a, b):
    try:
        with np.errstate(all="raise"):
            if op == "+":
                r = a + b
            elif op == "-":
                r = a - b
            elif op == "*":
                r = a * b
            elif op == "/":
                if b == 0:
                    return None
                r = a / b
            else:
                if a < 0 and b != int(b):
                    return None
                if a == 0 and b < 0:
                    return None
                r = math.pow(a, b)
    except (OverflowError, FloatingPointError, ValueError, ZeroDivisionError):
        return None
    return r if math.isfinite(r) else None


def _fold_func(name, x):
    try:
        if name == "ln" and x <= 0:
            return None
        if name == "sqrt" and x < 0:
            return None
        with np.errstate(all="raise"):
            r = float(_NUMPY_FUNCS[name](x)) if name in _NUMPY_FUNCS else float(
                np.log(x) if name == "ln" else np.sqrt(x))
    except (OverflowError, FloatingPointError):
        return None
    return r if math.isfinite(r) else None


def simplify(e: Expression) -> Expression:
    """Constant folding plus the 0/1 identities; never changes the value."""
    memo: dict = {}

    def s(node):
        hit = memo.get(id(node))
        if hit is None:
            hit = memo[id(node)] = (node, _simplify_node(node, s))
        return hit[1]

    return s(e)


def _simplify_node(node, s):
    if isinstance(node, (Const, NamedConst, Var)):
        return node
    if isinstance(node, Neg):
        a = s(node.arg)
        if isinstance(a, Const):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return node if a is node.arg else Neg(a)
    if isinstance(node, Func):
        a = s(node.arg)
        if isinstance(a, Const):
            folded = _fold_func(node.name, a.value)
            if folded is not None:
                return Const(folded)
        return node if a is node.arg else Func(node.name, a)
    if isinstance(node, BinOp):
        a, b = s(node.left), s(node.right)
        op = node.op
        if isinstance(a, Const) and isinstance(b, Const):
            folded = _fold_binop(op, a.value, b.value)
            if folded is not None:
                return Const(folded)
        if op == "+":
            if is_zero(a):
                return b
            if is_zero(b):
                return a
        elif op == "-":
            if is_zero(b):
                return a
            if is_zero(a):
                return _simplify_node(Neg(b), s)
        elif op == "*":
            if is_zero(a) or is_zero(b):
                return ZERO
            if a == ONE:
                return b
            if b == ONE:
                return a
        elif op == "/":
            if b == ONE:
                return a
            if is_zero(a) and not is_zero(b):
                return ZERO
        elif op == "^":
            if is_zero(b):
                return ONE
            if b == ONE:
                return a
            if a == ONE:
                return ONE
        if a is node.left and b is node.right:
            return node
        return BinOp(op, a, b)
    raise TypeError(f"not an expression: {node!r}")


def substitute(e: Expression, mapping: Mapping[str, Expression]) -> Expression:
    """Replace variables by expressions."""
    memo: dict = {}

    def sub(node):
        hit = memo.get(id(node))
        if hit is not None:
            return hit[1]
        if isinstance(node, Var):
            out = as_expr(mapping[node.name]) if node.name in mapping else node
        elif isinstance(node, (Const, NamedConst)):
            out = node
        elif isinstance(node, Neg):
            out = Neg(sub(node.arg))
        elif isinstance(node, Func):
            out = Func(node.name, sub(node.arg))
        else:
            out = BinOp(node.op, sub(node.left), sub(node.right))
        memo[id(node)] = (node, out)
        return out

    return sub(e)


# --------------------------------------------------------------------------- random expressions

_SMOOTH_UNARY = ("sin", "cos", "exp", "arctan", "sinh", "cosh")


def random_expression(rng: np.random.Generator, names, depth: int = 4, guarded: bool = True) -> Expression:
    """Random expression tree of at most ``depth`` levels over ``names``.

    With ``guarded`` the singular functions are wrapped so the result is
    finite and smooth on bounded inputs (``ln(1 + u^2)``, ``sqrt(1 + u^2)``,
    ``u / (1 + v^2)``, ``tan(arctan(u) / 2)``); ``abs`` may still appear and
    has a kink where its argument vanishes.
    """
    names = list(names)

    def leaf():
        if rng.random() < 0.35:
            return Const(float(np.round(rng.uniform(-2, 2), 2)))
        return Var(names[rng.integers(len(names))])

    def gen(d):
        if d <= 1 or rng.random() < 0.2:
            return leaf()
        r = rng.random()
        if r < 0.45:
            op = "+-*/^"[rng.integers(5)]
            u = gen(d - 1)
            v = gen(d - 1)
            if op == "/" and guarded:
                return BinOp("/", u, ONE + v ** Const(2.0))
            if op == "^":
                # small integer powers keep values bounded
                return BinOp("^", u, Const(float(rng.integers(2, 4))))
            return BinOp(op, u, v)
        if r < 0.55:
            return Neg(gen(d - 1))
        name = FUNCTIONS[rng.integers(len(FUNCTIONS) - 1)]  # no sign
        u = gen(d - 1)
        if guarded:
            if name == "ln":
                return Func("ln", ONE + u ** Const(2.0))
            if name == "sqrt":
                return Func("sqrt", ONE + u ** Const(2.0))
            if name == "tan":
                return Func("tan", Func("arctan", u) / Const(2.0))
            if name in ("exp", "sinh", "cosh"):
                return Func(name, Func("sin", u))
        return Func(name, u)

    return gen(depth)
