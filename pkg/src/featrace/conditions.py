"""Expression trees for C preprocessor conditionals.

Covers the expression language that actually shows up in ``#if``/``#elif``
lines of configurable C code: integer literals, macro references,
``defined`` tests, ``!``, ``&&``, ``||``, comparisons, and the four basic
arithmetic operators.  Anything outside that grammar (function-like macro
calls, bit operators, ternaries, ...) raises :class:`UnsupportedExpression`
instead of being silently dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Set, Tuple, Union

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class UnsupportedExpression(Exception):
    """Token outside the conditional grammar.

    ``file``/``line`` are filled in by the directive scanner when the
    expression came out of a source file; a direct parse_condition call
    leaves them as None.
    """

    def __init__(self, token: str, file: Optional[str] = None, line: Optional[int] = None):
        self.token = token
        self.file = file
        self.line = line
        super().__init__(f"unsupported token {token!r} in conditional expression")


@dataclass(frozen=True)
class MacroRef:
    name: str


@dataclass(frozen=True)
class DefinedTest:
    name: str


@dataclass(frozen=True)
class IntLiteral:
    value: int


@dataclass(frozen=True)
class Not:
    child: "CondExpr"


@dataclass(frozen=True)
class And:
    left: "CondExpr"
    right: "CondExpr"


@dataclass(frozen=True)
class Or:
    left: "CondExpr"
    right: "CondExpr"


COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Compare:
    left: "CondExpr"
    op: str
    right: "CondExpr"


@dataclass(frozen=True)
class Arith:
    left: "CondExpr"
    op: str
    right: "CondExpr"


CondExpr = Union[MacroRef, DefinedTest, IntLiteral, Not, And, Or, Compare, Arith]


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<num>0[xX][0-9a-fA-F]+[uUlL]*|\d+[uUlL]*)"
    r"|(?P<op><=|>=|==|!=|&&|\|\||[!<>+\-*/()])"
    r"|(?P<bad>\S)"
    r")"
)

# C keywords never usable as macro names in conditions we accept.
_RESERVED = {"defined"}


def _tokenize(text: str) -> Iterator[Tuple[str, str]]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            break
        pos = m.end()
        if m.group("ident"):
            yield "ident", m.group("ident")
        elif m.group("num"):
            yield "num", m.group("num")
        elif m.group("op"):
            yield "op", m.group("op")
        elif m.group("bad"):
            raise UnsupportedExpression(m.group("bad"))


class _Parser:
    """Recursive-descent parser with C precedence:

    ``!``  >  ``* /``  >  ``+ -``  >  ``< <= > >=``  >  ``== !=``  >  ``&&``  >  ``||``
    """

    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self) -> Optional[Tuple[str, str]]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> Tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise UnsupportedExpression("<end of expression>")
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.take()
        if tok != ("op", op):
            raise UnsupportedExpression(tok[1])

    def parse(self) -> CondExpr:
        expr = self.or_expr()
        leftover = self.peek()
        if leftover is not None:
            raise UnsupportedExpression(leftover[1])
        return expr

    def or_expr(self) -> CondExpr:
        node = self.and_expr()
        while self.peek() == ("op", "||"):
            self.take()
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> CondExpr:
        node = self.eq_expr()
        while self.peek() == ("op", "&&"):
            self.take()
            node = And(node, self.eq_expr())
        return node

    def eq_expr(self) -> CondExpr:
        node = self.rel_expr()
        while self.peek() in (("op", "=="), ("op", "!=")):
            op = self.take()[1]
            node = Compare(node, op, self.rel_expr())
        return node

    def rel_expr(self) -> CondExpr:
        node = self.add_expr()
        while self.peek() in (("op", "<"), ("op", "<="), ("op", ">"), ("op", ">=")):
            op = self.take()[1]
            node = Compare(node, op, self.add_expr())
        return node

    def add_expr(self) -> CondExpr:
        node = self.mul_expr()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = Arith(node, op, self.mul_expr())
        return node

    def mul_expr(self) -> CondExpr:
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = Arith(node, op, self.unary())
        return node

    def unary(self) -> CondExpr:
        tok = self.peek()
        if tok == ("op", "!"):
            self.take()
            return Not(self.unary())
        if tok == ("op", "-"):
            self.take()
            child = self.unary()
            if isinstance(child, IntLiteral):
                return IntLiteral(-child.value)
            return Arith(IntLiteral(0), "-", child)
        if tok == ("op", "+"):
            self.take()
            return self.unary()
        return self.primary()

    def primary(self) -> CondExpr:
        kind, text = self.take()
        if kind == "num":
            return IntLiteral(int(text.rstrip("uUlL"), 0))
        if kind == "op" and text == "(":
            node = self.or_expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            if text == "defined":
                return self._defined()
            if self.peek() == ("op", "("):
                # function-like macro invocation: out of grammar
                raise UnsupportedExpression(f"{text}(")
            return MacroRef(text)
        raise UnsupportedExpression(text)

    def _defined(self) -> CondExpr:
        tok = self.peek()
        if tok == ("op", "("):
            self.take()
            kind, name = self.take()
            if kind != "ident" or name in _RESERVED:
                raise UnsupportedExpression(name)
            self.expect_op(")")
            return DefinedTest(name)
        if tok is not None and tok[0] == "ident" and tok[1] not in _RESERVED:
            self.take()
            return DefinedTest(tok[1])
        raise UnsupportedExpression(tok[1] if tok else "<end of expression>")


def parse_condition(raw: str) -> CondExpr:
    """Parse the text after ``#if``/``#elif`` into a condition tree.

    For ``#ifdef``/``#ifndef`` callers pass the bare macro name and get a
    DefinedTest back (the scanner adds the negation for ifndef).
    """
    raw = raw.strip()
    if not raw:
        raise UnsupportedExpression("<empty condition>")
    if IDENT_RE.match(raw) and raw != "defined":
        # Fast path shared by #ifdef names and bare #if identifiers; the
        # caller decides whether a bare name means DefinedTest or MacroRef,
        # so this stays the generic #if reading.
        return MacroRef(raw)
    return _Parser(raw).parse()


def parse_defined_name(raw: str) -> DefinedTest:
    """Parse the single macro name that follows #ifdef/#ifndef."""
    name = raw.strip()
    if not IDENT_RE.match(name):
        raise UnsupportedExpression(name or "<missing macro name>")
    return DefinedTest(name)


def macro_names(expr: CondExpr) -> Set[str]:
    """All macro names referenced anywhere in the tree."""
    out: Set[str] = set()
    _collect(expr, out)
    return out


def _collect(expr: CondExpr, out: Set[str]) -> None:
    if isinstance(expr, (MacroRef, DefinedTest)):
        out.add(expr.name)
    elif isinstance(expr, Not):
        _collect(expr.child, out)
    elif isinstance(expr, (And, Or, Compare, Arith)):
        _collect(expr.left, out)
        _collect(expr.right, out)


def int_constants(expr: CondExpr) -> Set[int]:
    """All integer literals in the tree (drives witness-value search)."""
    out: Set[int] = set()

    def walk(node: CondExpr) -> None:
        if isinstance(node, IntLiteral):
            out.add(node.value)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or, Compare, Arith)):
            walk(node.left)
            walk(node.right)

    walk(expr)
    return out


def positive_macro_order(expr: CondExpr) -> Tuple[str, ...]:
    """Macro names with at least one occurrence under an even number of
    negations, in left-to-right source order."""
    seen: list = []

    def walk(node: CondExpr, neg_depth: int) -> None:
        if isinstance(node, (MacroRef, DefinedTest)):
            if neg_depth % 2 == 0 and node.name not in seen:
                seen.append(node.name)
        elif isinstance(node, Not):
            walk(node.child, neg_depth + 1)
        elif isinstance(node, (And, Or, Compare, Arith)):
            walk(node.left, neg_depth)
            walk(node.right, neg_depth)

    walk(expr, 0)
    return tuple(seen)


def negated_macro_order(expr: CondExpr) -> Tuple[str, ...]:
    """Macro names that only ever occur under an odd number of negations."""
    positive = set(positive_macro_order(expr))
    return tuple(n for n in _ordered_names(expr) if n not in positive)


def _ordered_names(expr: CondExpr) -> Tuple[str, ...]:
    seen: list = []

    def walk(node: CondExpr) -> None:
        if isinstance(node, (MacroRef, DefinedTest)):
            if node.name not in seen:
                seen.append(node.name)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or, Compare, Arith)):
            walk(node.left)
            walk(node.right)

    walk(expr)
    return tuple(seen)


def _trunc_div(a: int, b: int) -> int:
    # C integer division truncates toward zero, Python's // floors.
    q = a // b
    if q < 0 and q * b != a:
        q += 1
    return q


def evaluate(expr: CondExpr, env: Dict[str, Optional[int]]) -> int:
    """Evaluate under an assignment mapping macro name -> int or None
    (None = undefined).  Undefined macros are 0 in arithmetic, C style.
    Raises ZeroDivisionError when a division by zero is actually reached
    (short-circuit && / || skip unevaluated arms, as in C).
    """
    if isinstance(expr, IntLiteral):
        return expr.value
    if isinstance(expr, MacroRef):
        val = env.get(expr.name)
        return 0 if val is None else val
    if isinstance(expr, DefinedTest):
        return 1 if env.get(expr.name) is not None else 0
    if isinstance(expr, Not):
        return 1 if evaluate(expr.child, env) == 0 else 0
    if isinstance(expr, And):
        if evaluate(expr.left, env) == 0:
            return 0
        return 1 if evaluate(expr.right, env) != 0 else 0
    if isinstance(expr, Or):
        if evaluate(expr.left, env) != 0:
            return 1
        return 1 if evaluate(expr.right, env) != 0 else 0
    if isinstance(expr, Compare):
        l = evaluate(expr.left, env)
        r = evaluate(expr.right, env)
        return 1 if _COMPARES[expr.op](l, r) else 0
    if isinstance(expr, Arith):
        l = evaluate(expr.left, env)
        r = evaluate(expr.right, env)
        if expr.op == "+":
            return l + r
        if expr.op == "-":
            return l - r
        if expr.op == "*":
            return l * r
        return _trunc_div(l, r)
    raise TypeError(f"not a condition node: {expr!r}")


_COMPARES = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def render(expr: CondExpr) -> str:
    """Deterministic text form, fully parenthesized; used in logs and as
    cache keys."""
    if isinstance(expr, IntLiteral):
        return str(expr.value)
    if isinstance(expr, MacroRef):
        return expr.name
    if isinstance(expr, DefinedTest):
        return f"defined({expr.name})"
    if isinstance(expr, Not):
        return f"!({render(expr.child)})"
    if isinstance(expr, And):
        return f"({render(expr.left)} && {render(expr.right)})"
    if isinstance(expr, Or):
        return f"({render(expr.left)} || {render(expr.right)})"
    if isinstance(expr, (Compare, Arith)):
        return f"({render(expr.left)} {expr.op} {render(expr.right)})"
    raise TypeError(f"not a condition node: {expr!r}")


def conjoin(parts: list) -> Optional[CondExpr]:
    """Fold a list of conditions into a right-leaning And chain."""
    parts = [p for p in parts if p is not None]
    if not parts:
        return None
    node = parts[0]
    for p in parts[1:]:
        node = And(node, p)
    return node
