"""Per-bin mode extraction and recombination.

A jet ``(S, dS/dt, ..., d^{M-1}S/dt^{M-1})`` and the mode amplitudes are
related bin by bin through the Vandermonde matrix ``V[j, l] = (-i omega_l)^j``.
Extraction applies ``V^{-1}`` using the Lagrange-basis rows, so row ``l``
holds the coefficients of ``prod_{m != l} (lam - lam_m) / (lam_l - lam_m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import DispersionTable
from .grid import GridSpec, SpectralField


def _frozen2d(values, rows, n):
    arr = np.array(values, dtype=complex)
    if arr.ndim == 1 and rows == 1:
        arr = arr[None, :]
    if arr.shape != (rows, n):
        raise ValueError(f"expected shape {(rows, n)}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class JetField:
    """A wave and its first ``M - 1`` time derivatives at one instant, in wavenumber space."""

    grid: GridSpec
    values: np.ndarray  # (M, N): row j is d^j S / dt^j
    time: float = 0.0

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=complex))
        object.__setattr__(self, "values", _frozen2d(vals, vals.shape[0], self.grid.n))

    @classmethod
    def from_fields(cls, fields: list[SpectralField]) -> "JetField":
        if not fields:
            raise ValueError("empty jet")
        grid, time = fields[0].grid, fields[0].time
        if any(f.grid != grid or f.time != time for f in fields):
            raise ValueError("jet members must share grid and time")
        return cls(grid, np.stack([f.values for f in fields]), time)

    @property
    def order(self) -> int:
        return self.values.shape[0]

    @property
    def derivs(self) -> list[SpectralField]:
        return [SpectralField(self.grid, row, self.time) for row in self.values]


@dataclass(frozen=True)
class ModeSet:
    """Mode amplitudes ``S_l(k, t)`` sharing one grid, one time, one dispersion table."""

    grid: GridSpec
    values: np.ndarray  # (M, N)
    table: DispersionTable
    time: float = 0.0

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=complex))
        object.__setattr__(self, "values", _frozen2d(vals, self.table.n_modes, self.grid.n))

    @property
    def modes(self) -> list[SpectralField]:
        return [SpectralField(self.grid, row, self.time) for row in self.values]


def _check(jet: JetField, table: DispersionTable):
    if jet.order != table.n_modes:
        raise ValueError(f"jet has {jet.order} entries but the table has {table.n_modes} modes")
    if jet.grid.n != table.k.size:
        raise ValueError("jet grid does not match the dispersion table")


def lagrange_rows(lam: np.ndarray) -> np.ndarray:
    """Inverse-Vandermonde rows per bin: ``out[l, j, :]`` multiplies ``d^j S``.

    ``lam`` has shape ``(M, N)``.  Bins with coincident nodes produce
    non-finite entries; callers repair them.
    """
    m, n = lam.shape
    out = np.zeros((m, m, n), dtype=complex)
    with np.errstate(all="ignore"):
        for ell in range(m):
            coef = np.ones((1, n), dtype=complex)
            denom = np.ones(n, dtype=complex)
            for other in range(m):
                if other == ell:
                    continue
                grown = np.zeros((coef.shape[0] + 1, n), dtype=complex)
                grown[1:] += coef
                grown[:-1] -= lam[other] * coef
                coef = grown
                denom = denom * (lam[ell] - lam[other])
            out[ell] = coef / denom
    return out


def repair_degenerate(values: np.ndarray, wave: np.ndarray, table: DispersionTable) -> np.ndarray:
    """Apply the degenerate-bin rule in place and return ``values``.

    At a flagged bin each involved mode takes the value linearly interpolated
    (in k) from the nearest clean bins of its own branch; then the involved
    modes are shifted by one common constant so they sum to ``wave`` there.
    """
    mask = table.degenerate_mask
    bad_bins = np.flatnonzero(table.degenerate_bins)
    if bad_bins.size == 0:
        return values
    k = table.k
    clean = ~np.any(mask, axis=1)  # clean[l, j]: branch l not flagged at bin j
    for j in bad_bins:
        involved = np.flatnonzero(np.any(mask[:, :, j], axis=1))
        for ell in involved:
            good = np.flatnonzero(clean[ell])
            if good.size == 0:
                raise ValueError(f"branch {ell + 1} is degenerate at every bin; per-mode split undefined")
            left = good[good < j]
            right = good[good > j]
            if left.size and right.size:
                a, b = left[-1], right[0]
                w = (k[j] - k[a]) / (k[b] - k[a])
                values[ell, j] = (1 - w) * values[ell, a] + w * values[ell, b]
            else:
                values[ell, j] = values[ell, (left[-1] if left.size else right[0])]
        residual = wave[j] - values[:, j].sum()
        values[involved, j] += residual / involved.size
    return values


def extract_modes_M(jet: JetField, table: DispersionTable) -> ModeSet:
    """Modes from a jet by the per-bin inverse Vandermonde solve (any M <= 6)."""
    _check(jet, table)
    lam = -1j * table.branches
    rows = lagrange_rows(lam)
    with np.errstate(all="ignore"):
        values = np.einsum("ljn,jn->ln", rows, jet.values)
    values = repair_degenerate(values, jet.values[0], table)
    return ModeSet(jet.grid, values, table, jet.time)


def extract_modes_2(jet: JetField, table: DispersionTable) -> ModeSet:
    """Two-mode closed form ``S1 = (w2 S - i S') / (w2 - w1)``, ``S2 = (w1 S - i S') / (w1 - w2)``."""
    if table.n_modes != 2:
        raise ValueError(f"extract_modes_2 needs exactly 2 modes, table has {table.n_modes}")
    _check(jet, table)
    w1, w2 = table.branches
    s, ds = jet.values
    with np.errstate(all="ignore"):
        values = np.stack([(w2 * s - 1j * ds) / (w2 - w1), (w1 * s - 1j * ds) / (w1 - w2)])
    values = repair_degenerate(values, s, table)
    return ModeSet(jet.grid, values, table, jet.time)


def extract_modes(jet: JetField, table: DispersionTable) -> ModeSet:
    if table.n_modes == 2:
        return extract_modes_2(jet, table)
    return extract_modes_M(jet, table)


def recombine(ms: ModeSet) -> SpectralField:
    return SpectralField(ms.grid, ms.values.sum(axis=0), ms.time)


def jet_of_modes(ms: ModeSet, order: int | None = None) -> JetField:
    """``d^j S / dt^j = sum_l (-i omega_l)^j S_l`` for j < order (default M)."""
    order = ms.table.n_modes if order is None else order
    lam = -1j * ms.table.branches
    rows = [np.sum(lam**j * ms.values, axis=0) for j in range(order)]
    return JetField(ms.grid, np.stack(rows), ms.time)


def delta_modes(sp_jet: JetField, table: DispersionTable) -> ModeSet:
    """Source-induced mode change: extraction applied to the particular-solution jet."""
    return extract_modes(sp_jet, table)
