"""Slow, independent reference computations for tests and calibration.

Nothing here calls the fast transform or the evolution engine: transforms are
direct O(N^2) sums, time integration is a separately written RK4, and
integrals use adaptive Simpson.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .equation import LinearOperator
from .grid import GridSpec, SpatialField, SpectralField

MAX_ORACLE_N = 1024
MAX_DEPTH = 30


class QuadratureError(RuntimeError):
    pass


class OracleOverflow(RuntimeError):
    pass


def _direct_matrix(x, k, sign):
    return np.exp(sign * 1j * np.outer(k, x))


def dft_direct(u: SpatialField) -> SpectralField:
    """``S(k_j) = dx/sqrt(2 pi) sum_m u(x_m) exp(-i k_j x_m)`` by explicit summation."""
    g = u.grid
    if g.n > MAX_ORACLE_N:
        raise ValueError(f"oracle transforms are capped at N = {MAX_ORACLE_N}")
    x = -0.5 * g.length + (g.length / g.n) * np.arange(g.n)
    k = (2 * math.pi / g.length) * np.arange(-g.n // 2, g.n // 2)
    values = (g.length / g.n) / math.sqrt(2 * math.pi) * (_direct_matrix(x, k, -1) @ u.values)
    return SpectralField(g, values, u.time)


def idft_direct(s: SpectralField) -> SpatialField:
    g = s.grid
    if g.n > MAX_ORACLE_N:
        raise ValueError(f"oracle transforms are capped at N = {MAX_ORACLE_N}")
    x = -0.5 * g.length + (g.length / g.n) * np.arange(g.n)
    k = (2 * math.pi / g.length) * np.arange(-g.n // 2, g.n // 2)
    values = (2 * math.pi / g.length) / math.sqrt(2 * math.pi) * (_direct_matrix(k, x, 1) @ s.values)
    return SpatialField(g, values, s.time)


def _time_coefficients(op: LinearOperator, k: np.ndarray) -> list[np.ndarray]:
    a = [np.zeros(k.shape, dtype=complex) for _ in range(op.max_t_order + 1)]
    for (m, n), c in op.coeffs.items():
        a[n] = a[n] + c * (1j * k) ** m
    return a


def rk4_reference(
    op: LinearOperator,
    jet0,
    k,
    t_span: tuple[float, float],
    steps: int,
    source: Callable | None = None,
    grid: GridSpec | None = None,
    source_window: tuple[float, float] | None = None,
    record_every: int = 1,
):
    """Integrate ``L_k S = F`` at wavenumber(s) ``k`` with classical fixed-step RK4.

    Parameters
    ----------
    jet0
        ``M`` initial values ``(S, dS/dt, ...)``; each a scalar or an array
        broadcastable against ``k``.
    source
        ``f(x, t)`` in position space.  Its transform at ``k`` is computed by a
        direct sum over ``grid``.  Zero outside ``source_window``.

    Returns
    -------
    times, states
        ``states[i]`` has shape ``(M,) + k.shape`` and holds the jet at ``times[i]``.
    """
    if steps < 8:
        raise ValueError("rk4_reference needs at least 8 steps")
    k = np.asarray(k, dtype=float)
    a = _time_coefficients(op, k)
    m = op.max_t_order
    y = np.array([np.broadcast_to(np.asarray(v, dtype=complex), k.shape) for v in jet0], dtype=complex)
    if y.shape[0] != m:
        raise ValueError(f"need {m} initial values, got {y.shape[0]}")
    rows = None
    if source is not None:
        if grid is None:
            raise ValueError("a position-space source needs a grid")
        x = -0.5 * grid.length + (grid.length / grid.n) * np.arange(grid.n)
        rows = (grid.length / grid.n) / math.sqrt(2 * math.pi) * np.exp(-1j * np.multiply.outer(k, x))
        lo, hi = source_window if source_window is not None else (-np.inf, np.inf)

    def forcing(t):
        if rows is None or not lo <= t <= hi:
            return 0.0
        return rows @ np.asarray(source(x, t), dtype=complex)

    def rhs(t, y):
        dy = np.empty_like(y)
        dy[:-1] = y[1:]
        acc = forcing(t) - sum(a[n] * y[n] for n in range(m))
        dy[-1] = acc / a[m]
        return dy

    t_a, t_b = t_span
    h = (t_b - t_a) / steps
    times, states = [t_a], [y.copy()]
    for i in range(steps):
        t = t_a + i * h
        t_next = t_b if i == steps - 1 else t_a + (i + 1) * h  # exact endpoint keeps window edges inside
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t_next, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise OracleOverflow(f"RK4 state overflowed at t = {t + h!r}")
        if (i + 1) % record_every == 0 or i == steps - 1:
            times.append(t_next)
            states.append(y.copy())
    return np.array(times), np.array(states)


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_1d(g, a, b, tol):
    fa, fm, fb = g(a), g(0.5 * (a + b)), g(b)
    whole = _simpson(fa, fm, fb, b - a)
    return _refine(g, a, b, fa, fm, fb, whole, tol, 0)


def _refine(g, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = g(lm), g(rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    delta = left + right - whole
    if np.max(np.abs(delta)) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth >= MAX_DEPTH:
        raise QuadratureError(f"adaptive Simpson did not converge on [{a!r}, {b!r}] at depth {MAX_DEPTH}")
    return _refine(g, a, m, fa, flm, fm, left, tol / 2, depth + 1) + _refine(g, m, b, fm, frm, fb, right, tol / 2, depth + 1)


def quad_adaptive(g: Callable, region, tol: float = 1e-10, min_panels: int = 4):
    """Adaptive Simpson quadrature of ``g`` over a 1-D interval or a 2-D region.

    ``region`` is ``(a, b)`` for 1-D, or ``((a, b), (lo, hi))`` for 2-D where
    ``g(s, y)`` is integrated over ``s in [a, b]`` and ``y in [lo(s), hi(s)]``
    (``lo``/``hi`` may be constants).  ``g`` may return arrays; the error
    test uses the largest component.  The range is first split into
    ``min_panels`` equal panels so narrow features are not skipped.
    """
    (a, b), inner = (region, None) if np.ndim(region[0]) == 0 else region
    if inner is None:
        fn = g
    else:
        lo, hi = inner
        lo_f = lo if callable(lo) else (lambda s, v=lo: v)
        hi_f = hi if callable(hi) else (lambda s, v=hi: v)
        inner_tol = tol / max(abs(b - a), 1.0)

        def fn(s):
            return quad_adaptive(lambda y: g(s, y), (lo_f(s), hi_f(s)), inner_tol, min_panels)

    if a == b:
        return 0.0 * fn(a)
    edges = np.linspace(a, b, min_panels + 1)
    return sum(_adaptive_1d(fn, lo_, hi_, tol / min_panels) for lo_, hi_ in zip(edges[:-1], edges[1:]))


@dataclass
class OracleReport:
    method: str
    reference: str
    resolutions: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    order: float | None = None
    theoretical_order: float | None = None
    notes: str = ""

    @property
    def order_ok(self) -> bool | None:
        if self.order is None or self.theoretical_order is None:
            return None
        return abs(self.order - self.theoretical_order) <= 0.5

    def as_dict(self) -> dict:
        out = asdict(self)
        out["order_ok"] = self.order_ok
        return out


def observed_order(errors: Sequence[float], ratio: float = 2.0) -> float:
    """Convergence order from the last two errors of a refinement by ``ratio``."""
    e1, e2 = errors[-2], errors[-1]
    return math.log(e1 / e2) / math.log(ratio)


def refinement_study(
    run: Callable[[int], np.ndarray],
    resolutions: Sequence[int],
    method: str,
    exact: np.ndarray | None = None,
    theoretical_order: float | None = None,
) -> OracleReport:
    """Errors and observed order over a refinement sequence (each resolution doubled).

    Without ``exact``, self-convergence is used: differences between
    consecutive resolutions, which needs at least three resolutions.
    """
    results = [np.asarray(run(r)) for r in resolutions]
    if exact is not None:
        errors = [float(np.max(np.abs(r - exact))) for r in results]
        reference = "exact"
    else:
        errors = [float(np.max(np.abs(r1 - r2))) for r1, r2 in zip(results[:-1], results[1:])]
        reference = "self-convergence"
    ratio = resolutions[1] / resolutions[0]
    order = observed_order(errors, ratio) if len(errors) >= 2 else None
    return OracleReport(method, reference, list(resolutions), errors, order, theoretical_order)
