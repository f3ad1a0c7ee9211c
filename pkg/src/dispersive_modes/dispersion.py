"""Dispersion polynomial, its complex roots, and continuous branch labelling.

Substituting ``exp(i k x - i omega t)`` into ``L`` gives
``sum_{m,n} c[m,n] (ik)^m (-i omega)^n = sum_n p_n(k) omega^n = 0``.
Roots come from companion-matrix eigenvalues (LAPACK balances and runs
Hessenberg QR) followed by one guarded Newton step.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .equation import LinearOperator
from .grid import GridSpec
from .tolerances import DEFAULT_TOLERANCES, ToleranceSet

MAX_MODES = 6


class DispersionError(RuntimeError):
    pass


class DegenerateLeadingCoefficient(DispersionError):
    def __init__(self, k: float, lead: complex):
        self.k = k
        super().__init__(f"leading coefficient of the dispersion polynomial vanishes at k = {k!r} (|p_N| = {abs(lead):.3e})")


class RootSolveError(DispersionError):
    def __init__(self, message: str, k: float | None = None):
        self.k = k
        super().__init__(message if k is None else f"{message} at k = {k!r}")


def thread_count() -> int:
    """Worker count from ``DISPERSIVE_MODES_THREADS`` (0 or unset = auto)."""
    raw = os.environ.get("DISPERSIVE_MODES_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("DISPERSIVE_MODES_THREADS must be >= 0")
    return n if n > 0 else min(8, os.cpu_count() or 1)


def poly_table(op: LinearOperator, k) -> np.ndarray:
    """Coefficients ``p_n(k)`` for every ``k``; shape ``(len(k), N_t + 1)``, ascending in ``n``."""
    a = op.time_coefficients(k)
    phase = (-1j) ** np.arange(op.max_t_order + 1)
    return (a * phase[:, None]).T


def dispersion_poly(op: LinearOperator, k: float, tol: ToleranceSet = DEFAULT_TOLERANCES) -> np.ndarray:
    """Ascending coefficients ``p_0..p_{N_t}`` of the dispersion polynomial in omega at one ``k``."""
    p = poly_table(op, [k])[0]
    _check_lead(p, k, tol)
    return p


def _check_lead(p, k, tol):
    if abs(p[-1]) < tol.eps_lead * np.max(np.abs(p)) or p[-1] == 0:
        raise DegenerateLeadingCoefficient(float(k), p[-1])


def root_residual(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Scaled back-substitution residual ``|P(w)| / sum |p_n| |w|^n`` (batched over leading axes)."""
    p = np.asarray(p)
    w = np.asarray(w)
    powers = w[..., None] ** np.arange(p.shape[-1])
    pp = p[..., None, :] if w.ndim == p.ndim else p
    num = np.abs(np.sum(pp * powers, axis=-1))
    den = np.sum(np.abs(pp) * np.abs(powers), axis=-1)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _roots_batch(P: np.ndarray) -> np.ndarray:
    """Roots of each row of ``P`` (ascending coefficients); shape ``(rows, degree)``."""
    rows, deg1 = P.shape
    deg = deg1 - 1
    monic = P[:, :-1] / P[:, -1:]
    if deg == 1:
        roots = -monic
    else:
        comp = np.zeros((rows, deg, deg), dtype=complex)
        comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
        comp[:, :, -1] = -monic
        roots = np.linalg.eigvals(comp)
    # one Newton step, kept only where it lowers the residual
    n = np.arange(deg1)
    dP = P[:, 1:] * n[1:]
    value = np.sum(P[:, None, :] * roots[..., None] ** n, axis=-1)
    slope = np.sum(dP[:, None, :] * roots[..., None] ** n[:-1], axis=-1)
    with np.errstate(all="ignore"):
        polished = roots - value / slope
    ok = np.isfinite(polished) & (root_residual(P, polished) < root_residual(P, roots))
    return np.where(ok, polished, roots)


def solve_roots(p, tol: ToleranceSet = DEFAULT_TOLERANCES, k: float | None = None) -> np.ndarray:
    """All ``N_t`` complex roots of one polynomial, sorted by (Re, Im).

    Multiplicity is preserved (a double root appears twice).
    """
    p = np.asarray(p, dtype=complex)
    if p.size < 2:
        raise RootSolveError("polynomial has degree 0", k)
    _check_lead(p, 0.0 if k is None else k, tol)
    try:
        roots = _roots_batch(p[None, :])[0]
    except np.linalg.LinAlgError as exc:
        raise RootSolveError(f"eigenvalue iteration did not converge ({exc})", k) from None
    res = root_residual(p[None, :], roots[None, :])[0]
    if np.any(res >= tol.eps_root) or not np.all(np.isfinite(roots)):
        raise RootSolveError(f"root residual {res.max():.3e} exceeds {tol.eps_root:.1e}", k)
    return roots[np.lexsort((roots.imag, roots.real))]


@dataclass(frozen=True)
class DispersionTable:
    """Per-bin frequencies ``omega_l(k_j)`` arranged in continuous branches.

    ``branches`` has shape ``(M, N)``; ``degenerate_mask[a, b, j]`` marks
    branch pairs closer than ``eps_deg_abs`` at bin ``j``.
    """

    k: np.ndarray
    branches: np.ndarray
    degenerate_mask: np.ndarray
    eps_deg_abs: float
    seed_index: int = 0

    def __post_init__(self):
        for name in ("k", "branches", "degenerate_mask"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_branches(cls, k, branches, eps_deg: float = DEFAULT_TOLERANCES.eps_deg, seed_index: int = 0):
        """Wrap given branch values (no root solving); used for synthetic tables."""
        k = np.asarray(k, dtype=float)
        branches = np.atleast_2d(np.asarray(branches, dtype=complex))
        eps_abs = eps_deg * (1.0 + float(np.max(np.abs(branches), initial=0.0)))
        return cls(k, branches, _degenerate_mask(branches, eps_abs), eps_abs, seed_index)

    @property
    def n_modes(self) -> int:
        return self.branches.shape[0]

    @property
    def degenerate_bins(self) -> np.ndarray:
        return np.any(self.degenerate_mask, axis=(0, 1))

    def degenerate_pairs_everywhere(self) -> list[tuple[int, int]]:
        """Branch pairs that coincide at every bin (confluent, unsupported)."""
        m = self.n_modes
        return [(a, b) for a in range(m) for b in range(a + 1, m) if np.all(self.degenerate_mask[a, b])]

    def labels(self) -> list[str]:
        return [f"omega_{i + 1}" for i in range(self.n_modes)]

    def describe_branches(self) -> dict:
        j = self.seed_index
        return {
            label: {"seed_k": float(self.k[j]), "seed_omega": [float(w.real) + 0.0, float(w.imag) + 0.0]}
            for label, w in zip(self.labels(), self.branches[:, j])
        }


def _degenerate_mask(branches, eps_abs):
    diff = np.abs(branches[:, None, :] - branches[None, :, :])
    mask = diff < eps_abs
    idx = np.arange(branches.shape[0])
    mask[idx, idx, :] = False
    return mask


def _match(roots: np.ndarray, k: np.ndarray, eps_abs: float) -> tuple[np.ndarray, int]:
    nk, m = roots.shape
    out = np.empty_like(roots)
    if m == 1:
        return roots.copy(), int(np.argmin(np.abs(k)))
    gaps = np.abs(roots[:, :, None] - roots[:, None, :]) + np.where(np.eye(m, dtype=bool), np.inf, 0.0)
    clean = gaps.reshape(nk, -1).min(axis=1) > eps_abs
    order = np.lexsort((np.arange(nk), np.abs(k)))
    candidates = order[clean[order]]
    seed = int(candidates[0]) if candidates.size else int(order[0])
    r = roots[seed]
    out[seed] = r[np.lexsort((r.imag, r.real))]
    perms = np.array(list(itertools.permutations(range(m))))
    rows = np.arange(m)
    for step in (1, -1):
        j = seed + step
        while 0 <= j < nk:
            prev = out[j - step]
            dist = np.abs(roots[j][None, :] - prev[:, None])  # dist[l, r]
            cost = dist[rows, perms].sum(axis=1)
            best = cost.min()
            tied = np.flatnonzero(cost <= best + eps_abs)
            choice = tied[0]
            pj = j - 2 * step
            if tied.size > 1 and 0 <= pj < nk and (pj - seed) * step >= 0:
                predicted = 2 * prev - out[pj]
                pcost = np.abs(roots[j][perms[tied]] - predicted).sum(axis=1)
                choice = tied[int(np.argmin(pcost))]
            out[j] = roots[j][perms[choice]]
            j += step
    return out, seed


def build_table(op: LinearOperator, grid: GridSpec, tol: ToleranceSet = DEFAULT_TOLERANCES) -> DispersionTable:
    """Solve the dispersion relation at every grid wavenumber and label branches by continuity."""
    if op.max_t_order > MAX_MODES:
        raise DispersionError(f"at most {MAX_MODES} modes are supported, operator has {op.max_t_order}")
    k = grid.k
    P = poly_table(op, k)
    lead = np.abs(P[:, -1])
    bad = np.flatnonzero((lead < tol.eps_lead * np.abs(P).max(axis=1)) | (lead == 0))
    if bad.size:
        raise DegenerateLeadingCoefficient(float(k[bad[0]]), P[bad[0], -1])
    chunks = np.array_split(np.arange(k.size), max(1, min(thread_count(), k.size // 64 or 1)))
    try:
        if len(chunks) == 1:
            roots = _roots_batch(P)
        else:
            with ThreadPoolExecutor(len(chunks)) as pool:
                roots = np.concatenate(list(pool.map(lambda idx: _roots_batch(P[idx]), chunks)))
    except np.linalg.LinAlgError as exc:
        raise RootSolveError(f"eigenvalue iteration did not converge ({exc})") from None
    res = root_residual(P, roots)
    worst = np.unravel_index(np.argmax(res), res.shape)
    if not np.all(np.isfinite(roots)) or res[worst] >= tol.eps_root:
        raise RootSolveError(f"root residual {res[worst]:.3e} exceeds {tol.eps_root:.1e}", float(k[worst[0]]))
    # sort within each bin first so matching never depends on eigensolver output order
    srt = np.lexsort((roots.imag, roots.real), axis=1) if roots.shape[1] > 1 else np.zeros_like(roots, dtype=int)
    roots = np.take_along_axis(roots, srt, axis=1)
    eps_abs = tol.eps_deg * (1.0 + float(np.max(np.abs(roots))))
    matched, seed = _match(roots, k, eps_abs)
    branches = matched.T.copy()
    return DispersionTable(k, branches, _degenerate_mask(branches, eps_abs), eps_abs, seed)


def group_velocity(table: DispersionTable, branch: int, j: int) -> complex:
    """Central difference ``d omega_l / dk`` at interior bin ``j`` (0-based branch index)."""
    n = table.k.size
    if not 0 <= branch < table.n_modes:
        raise IndexError(f"branch {branch} out of range for {table.n_modes} modes")
    if not 0 < j < n - 1:
        raise IndexError(f"bin {j} is not interior (need 0 < j < {n - 1})")
    w = table.branches[branch]
    return complex((w[j + 1] - w[j - 1]) / (table.k[j + 1] - table.k[j - 1]))
