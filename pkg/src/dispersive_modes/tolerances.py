from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping


@dataclass(frozen=True)
class ToleranceSet:
    """Numerical thresholds shared by every module.

    ``eps_deg`` is relative: two branches are degenerate at a bin when they
    differ by less than ``eps_deg * (1 + max|omega|)`` over the grid.
    ``eps_lead`` is relative to the largest dispersion-polynomial coefficient.
    """

    eps_deg: float = 1e-9
    eps_root: float = 1e-10
    eps_lead: float = 1e-12
    rk4_omega_h: float = 0.05
    rk4_min_steps: int = 64
    duhamel_samples: int = 129
    alias_energy: float = 1e-10
    sinc_series: float = 1e-6
    overflow_exponent: float = 700.0
    spectral_floor: float = 1e-10

    def with_overrides(self, overrides: Mapping[str, object]) -> "ToleranceSet":
        known = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, value in overrides.items():
            if key not in known:
                raise KeyError(f"unknown tolerance {key!r}; known: {', '.join(sorted(known))}")
            current = getattr(self, key)
            changes[key] = int(value) if isinstance(current, int) else float(value)
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_TOLERANCES = ToleranceSet()
