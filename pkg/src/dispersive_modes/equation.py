"""Constant-coefficient linear wave operators ``L = sum c[m, n] d^m/dx^m d^n/dt^n``.

Sign convention: ``L u = f`` with ``L`` scaled so that its leading
pure-time coefficient is negative, i.e. ``L = sum b_n d_x^n - sum a_n d_t^n``
with ``a_{N_t} > 0``.  ``u_xx - u_tt/c^2`` and ``i*g*u_xx - u_t`` are already
in that form; ``u_t = i*g*u_xx`` is normalized to the latter.
"""

from __future__ import annotations

import re
from typing import Mapping

import numpy as np

from .expressions import CONSTANTS, FUNCTIONS, ExpressionError, evaluate, parse_equation

_DERIV_RE = re.compile(r"^u(?:_([xt]+))?$")


class OperatorError(ValueError):
    pass


class LinearOperator:
    """Immutable coefficient table of a linear constant-coefficient operator.

    Parameters
    ----------
    coeffs
        Mapping ``(m, n) -> c`` where ``m`` counts x-derivatives and ``n``
        counts t-derivatives.  Zero entries are dropped; the overall sign is
        normalized (see module docstring).
    """

    __slots__ = ("_terms",)

    def __init__(self, coeffs: Mapping[tuple[int, int], complex]):
        terms = {}
        for key, value in coeffs.items():
            m, n = (int(key[0]), int(key[1]))
            if m < 0 or n < 0:
                raise OperatorError(f"negative derivative order in {key}")
            value = complex(value)
            if not np.isfinite(value):
                raise OperatorError(f"non-finite coefficient at {key}")
            if value != 0:
                terms[(m, n)] = terms.get((m, n), 0) + value
        terms = {k: v for k, v in terms.items() if v != 0}
        if not terms or max(n for _, n in terms) == 0:
            raise OperatorError("operator has no time derivative (N_t = 0)")
        n_t = max(n for _, n in terms)
        lead = terms[min(m for m, n in terms if n == n_t), n_t]
        if lead.real > 0 or (lead.real == 0 and lead.imag > 0):
            terms = {k: -v for k, v in terms.items()}
        terms = {k: v + 0.0 for k, v in terms.items()}  # drop signed zeros
        object.__setattr__(self, "_terms", tuple(sorted(terms.items(), key=lambda kv: (kv[0][1], kv[0][0]))))

    def __setattr__(self, name, value):
        raise AttributeError("LinearOperator is immutable")

    @property
    def coeffs(self) -> dict[tuple[int, int], complex]:
        return dict(self._terms)

    @property
    def max_t_order(self) -> int:
        return max(n for (_, n), _ in self._terms)

    @property
    def max_x_order(self) -> int:
        return max(m for (m, _), _ in self._terms)

    @property
    def n_modes(self) -> int:
        return self.max_t_order

    @property
    def is_real(self) -> bool:
        """True when the operator maps real fields to real fields."""
        return all(v.imag == 0 for _, v in self._terms)

    def time_coefficients(self, k) -> np.ndarray:
        """``A_n(k) = sum_m c[m, n] (ik)^m`` for n = 0..N_t, shape ``(N_t + 1, len(k))``."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        out = np.zeros((self.max_t_order + 1, k.size), dtype=complex)
        ik = 1j * k
        for (m, n), c in self._terms:
            out[n] += c * ik**m
        return out

    def pure_form(self) -> tuple[dict[int, complex], dict[int, complex]] | None:
        """Return ``(b, a)`` with ``L = sum b_n d_x^n - sum a_n d_t^n`` or None if mixed."""
        b, a = {}, {}
        for (m, n), c in self._terms:
            if n == 0:
                b[m] = c
            elif m == 0:
                a[n] = -c
            else:
                return None
        return b, a

    def render(self) -> str:
        """Canonical DSL text; ``parse_operator(op.render()) == op``."""
        parts = []
        for (m, n), c in self._terms:
            name = "u" if m == n == 0 else "u_" + "x" * m + "t" * n
            parts.append(f"({c.real!r} + {c.imag!r}*i)*{name}")
        return " + ".join(parts) + " = 0"

    def __eq__(self, other):
        if not isinstance(other, LinearOperator):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)

    def __repr__(self):
        inner = ", ".join(f"{k}: {v!r}" for k, v in self._terms)
        return f"LinearOperator({{{inner}}})"


class _Linear:
    """Linear form over derivative symbols; supports only linear arithmetic."""

    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = terms

    def _combine(self, other, sign):
        if isinstance(other, _Linear):
            out = dict(self.terms)
            for k, v in other.terms.items():
                out[k] = out.get(k, 0) + sign * v
            return _Linear(out)
        if other == 0:
            return _Linear(dict(self.terms))
        raise TypeError("constant term added to a derivative term; the operator must be homogeneous")

    def __add__(self, other):
        return self._combine(other, 1)

    def __radd__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self)._combine(other, 1)

    def __neg__(self):
        return _Linear({k: -v for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, _Linear):
            raise TypeError("product of two derivative terms is nonlinear")
        return _Linear({k: v * other for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, _Linear):
            raise TypeError("division by a derivative term")
        return _Linear({k: v / other for k, v in self.terms.items()})

    def __rtruediv__(self, other):
        raise TypeError("division by a derivative term")

    def __pow__(self, other):
        raise TypeError("power of a derivative term is nonlinear")

    def __rpow__(self, other):
        raise TypeError("derivative term in an exponent")


class _DerivEnv(dict):
    def __missing__(self, name):
        raise KeyError(name)

    def __contains__(self, name):
        return dict.__contains__(self, name) or _DERIV_RE.match(name) is not None

    def __getitem__(self, name):
        if dict.__contains__(self, name):
            return dict.__getitem__(self, name)
        m = _DERIV_RE.match(name)
        s = m.group(1) or ""
        return _Linear({(s.count("x"), s.count("t")): 1.0})


def _no_functions_on_linear(fn):
    def wrapped(*args):
        if any(isinstance(a, _Linear) for a in args):
            raise TypeError("function applied to a derivative term")
        return fn(*args)

    return wrapped


def parse_operator(text: str, params: Mapping[str, complex] | None = None) -> LinearOperator:
    """Parse ``LHS [= RHS]`` into a :class:`LinearOperator`.

    Terms are ``C * u_s`` with ``s`` a string over ``{x, t}``; ``C`` may use
    numbers, ``i``, ``pi`` and names bound in ``params``.
    """
    lhs, rhs = parse_equation(text)
    env = _DerivEnv(CONSTANTS)
    env.update(params or {})
    functions = {k: _no_functions_on_linear(v) for k, v in FUNCTIONS.items()}
    try:
        value = evaluate(lhs, env, functions)
        if rhs is not None:
            value = value - evaluate(rhs, env, functions)
    except TypeError as exc:
        raise ExpressionError(str(exc)) from None
    if not isinstance(value, _Linear):
        raise OperatorError("equation contains no derivative terms of u (N_t = 0)")
    return LinearOperator(value.terms)
