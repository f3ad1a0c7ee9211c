"""Uniform conjugate grids and the symmetric 1/sqrt(2 pi) transform pair.

Discrete conventions (all part of the public contract)::

    x_m = -L/2 + m dx,        dx = L / N,        m = 0..N-1
    k_j = 2 pi j / L,         dk = 2 pi / L,     j = -N/2..N/2-1
    S(k_j) = dx / sqrt(2 pi) * sum_m u(x_m) exp(-i k_j x_m)
    u(x_m) = dk / sqrt(2 pi) * sum_j S(k_j) exp(+i k_j x_m)

Spectral arrays are always stored in monotone ``k`` order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _frozen(values, n):
    arr = np.array(values, dtype=complex)
    if arr.shape != (n,):
        raise ValueError(f"expected {n} samples, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GridSpec:
    n: int
    length: float

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return self.dk * np.arange(-self.n // 2, self.n // 2)

    @property
    def k_max(self) -> float:
        return self.dk * self.n / 2


@dataclass(frozen=True)
class SpatialField:
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.n))


@dataclass(frozen=True)
class SpectralField:
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.n))


def _alternating(n):
    # exp(+i k_j L/2) = (-1)^j, in FFT storage order
    return np.where(np.fft.fftfreq(n, 1.0 / n).astype(int) % 2 == 0, 1.0, -1.0)


def forward_values(grid: GridSpec, u: np.ndarray) -> np.ndarray:
    """Transform samples along the last axis; returns monotone-k spectra."""
    u = np.asarray(u, dtype=complex)
    spec = np.fft.fft(u, axis=-1) * _alternating(grid.n)
    return np.fft.fftshift(spec, axes=-1) * (grid.dx / SQRT_2PI)


def inverse_values(grid: GridSpec, s: np.ndarray) -> np.ndarray:
    s = np.fft.ifftshift(np.asarray(s, dtype=complex), axes=-1) * _alternating(grid.n)
    return np.fft.ifft(s, axis=-1) * (grid.n * grid.dk / SQRT_2PI)


def forward(u: SpatialField) -> SpectralField:
    return SpectralField(u.grid, forward_values(u.grid, u.values), u.time)


def inverse(s: SpectralField) -> SpatialField:
    return SpatialField(s.grid, inverse_values(s.grid, s.values), s.time)


def sample(grid: GridSpec, fn: Callable, time: float = 0.0) -> SpatialField:
    """Evaluate ``fn(x, t)`` on the grid."""
    return SpatialField(grid, fn(grid.x, time), time)


def apply_symbol(symbol, spec: SpectralField, table=None) -> SpectralField:
    """Multiply each bin by ``g(k_j)``: the action of ``g(K)`` with ``K = -i d/dx``.

    ``symbol`` is an array of per-bin values or a callable.  A callable gets
    ``(k)`` or, when a dispersion table is passed, ``(k, branches)`` with
    ``branches`` of shape ``(M, N)``.
    """
    if callable(symbol):
        k = spec.grid.k
        g = symbol(k) if table is None else symbol(k, table.branches)
    else:
        g = symbol
    g = np.broadcast_to(np.asarray(g, dtype=complex), (spec.grid.n,))
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        j = int(bad[0])
        raise ValueError(f"symbol is not finite at bin {j} (k = {spec.grid.k[j]!r})")
    return SpectralField(spec.grid, g * spec.values, spec.time)


def l2_norm(grid: GridSpec, values, space: str = "x") -> float:
    """Quadrature L2 norm, ``sqrt(h * sum |v|^2)`` with ``h`` = dx or dk."""
    h = grid.dx if space == "x" else grid.dk
    return float(np.sqrt(h * np.sum(np.abs(values) ** 2)))
