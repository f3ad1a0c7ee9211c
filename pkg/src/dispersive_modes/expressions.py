"""Small arithmetic expression language used by scenario files and the operator DSL.

Grammar (``^`` and ``**`` are both exponentiation, right associative)::

    equation := expr ['=' expr]
    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('+' | '-') unary | power
    power    := atom [('^' | '**') unary]
    atom     := NUMBER | IMAG | NAME | NAME '(' args ')' | '(' expr ')'

``IMAG`` is a number immediately followed by ``i`` or ``j`` (``0.5i``).
Names are resolved against a binding map when the expression is compiled;
``x`` and ``t`` stay free and are supplied at evaluation time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np
from scipy import special


class ExpressionError(ValueError):
    """Syntax or binding error, located by 1-based line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class UnboundParameterError(ExpressionError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # num, imag, name, op, end
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?(?P<imag>[ij](?![A-Za-z0-9_]))?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\*\*|[-+*/^(),=])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "imag":  # inner group of num
            kind = "num"
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "num":
            tokens.append(Token("imag" if m.group("imag") else "num", m.group(), line, col))
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("end", "", line, pos - line_start + 1))
    return tokens


# AST nodes are plain tuples: ("num", value), ("name", name, tok),
# ("call", name, args, tok), ("neg", node), ("bin", op, lhs, rhs, tok).


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExpressionError(f"expected {text!r}, found {found!r}", self.tok.line, self.tok.column)
        return self.advance()

    def fail(self, message: str):
        raise ExpressionError(message, self.tok.line, self.tok.column)

    def equation(self):
        lhs = self.expr()
        rhs = None
        if self.tok.text == "=":
            self.advance()
            rhs = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected token {self.tok.text!r}")
        return lhs, rhs

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance()
            node = ("bin", op.text, node, self.term(), op)
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance()
            node = ("bin", op.text, node, self.unary(), op)
        return node

    def unary(self):
        if self.tok.text == "-":
            self.advance()
            return ("neg", self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.text in ("^", "**"):
            op = self.advance()
            return ("bin", "^", base, self.unary(), op)
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return ("num", float(tok.text))
        if tok.kind == "imag":
            self.advance()
            return ("num", complex(0.0, float(tok.text[:-1])))
        if tok.kind == "name":
            self.advance()
            if self.tok.text == "(":
                self.advance()
                args = []
                if self.tok.text != ")":
                    args.append(self.expr())
                    while self.tok.text == ",":
                        self.advance()
                        args.append(self.expr())
                self.expect(")")
                return ("call", tok.text, args, tok)
            return ("name", tok.text, tok)
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {tok.text or 'end of input'!r}")


def parse(text: str):
    """Parse a single expression; returns the AST."""
    lhs, rhs = _Parser(text).equation()
    if rhs is not None:
        raise ExpressionError("'=' is not allowed in a plain expression")
    return lhs


def parse_equation(text: str):
    """Parse ``lhs [= rhs]``; returns ``(lhs_ast, rhs_ast or None)``."""
    return _Parser(text).equation()


def _gauss(x, x0, w):
    return np.exp(-((x - x0) ** 2) / (2.0 * w**2))


def _sech(x):
    return 1.0 / np.cosh(x)


FUNCTIONS: dict[str, Callable[..., Any]] = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sech": _sech,
    "sqrt": np.emath.sqrt,
    "log": np.emath.log,
    "abs": np.abs,
    "erf": special.erf,
    "gauss": _gauss,
}

CONSTANTS: dict[str, complex | float] = {"pi": np.pi, "i": 1j}


def evaluate(node, env: Mapping[str, Any], functions: Mapping[str, Callable] = FUNCTIONS):
    """Evaluate an AST with Python operator semantics over the values in ``env``."""
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "name":
        name, tok = node[1], node[2]
        if name in env:
            return env[name]
        raise UnboundParameterError(f"unbound name {name!r}", tok.line, tok.column)
    if kind == "neg":
        return -evaluate(node[1], env, functions)
    if kind == "call":
        name, args, tok = node[1], node[2], node[3]
        fn = functions.get(name)
        if fn is None:
            raise ExpressionError(f"unknown function {name!r}", tok.line, tok.column)
        vals = [evaluate(a, env, functions) for a in args]
        try:
            return fn(*vals)
        except TypeError as exc:
            raise ExpressionError(f"bad call to {name}: {exc}", tok.line, tok.column) from None
    op, tok = node[1], node[4]
    a = evaluate(node[2], env, functions)
    b = evaluate(node[3], env, functions)
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return a**b
    except ExpressionError:
        raise
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ExpressionError(str(exc), tok.line, tok.column) from None


def free_names(node) -> set[str]:
    kind = node[0]
    if kind == "name":
        return {node[1]}
    if kind == "neg":
        return free_names(node[1])
    if kind == "call":
        return set().union(*[free_names(a) for a in node[2]]) if node[2] else set()
    if kind == "bin":
        return free_names(node[2]) | free_names(node[3])
    return set()


def _substitute(node, bindings: Mapping[str, Any]):
    kind = node[0]
    if kind == "name" and node[1] in bindings:
        return ("num", bindings[node[1]])
    if kind == "neg":
        return ("neg", _substitute(node[1], bindings))
    if kind == "call":
        return ("call", node[1], [_substitute(a, bindings) for a in node[2]], node[3])
    if kind == "bin":
        return ("bin", node[1], _substitute(node[2], bindings), _substitute(node[3], bindings), node[4])
    return node


class Expression:
    """Compiled field expression ``g(x, t)`` with parameters already bound.

    Calling it returns a complex array broadcast to the shape of ``x``.
    """

    def __init__(self, source: str, params: Mapping[str, float | complex] | None = None):
        self.source = source
        bindings = dict(CONSTANTS)
        bindings.update(params or {})
        bindings.pop("x", None)
        bindings.pop("t", None)
        self._ast = _substitute(parse(source), bindings)
        unbound = free_names(self._ast) - {"x", "t"}
        if unbound:
            name = sorted(unbound)[0]
            tok = _find_name(self._ast, name)
            raise UnboundParameterError(f"unbound name {name!r}", tok.line, tok.column)

    @property
    def depends_on_t(self) -> bool:
        return "t" in free_names(self._ast)

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            value = evaluate(self._ast, {"x": x, "t": t})
        return np.broadcast_to(np.asarray(value, dtype=complex), x.shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def _find_name(node, name):
    kind = node[0]
    if kind == "name":
        return node[2] if node[1] == name else None
    children = []
    if kind == "neg":
        children = [node[1]]
    elif kind == "call":
        children = node[2]
    elif kind == "bin":
        children = [node[2], node[3]]
    for child in children:
        found = _find_name(child, name)
        if found is not None:
            return found
    return None
