"""Scenario files: operator + grid + initial jet + optional finite-duration source.

The source acts on ``-T < t < 0``; initial data are given at ``t = -T``
(or at ``t = 0`` when there is no source).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np

from .dispersion import DispersionError, build_table
from .equation import LinearOperator, OperatorError, parse_operator
from .expressions import CONSTANTS, Expression, ExpressionError, evaluate, parse
from .grid import GridSpec, forward_values
from .tolerances import DEFAULT_TOLERANCES, ToleranceSet


class ScenarioError(ValueError):
    """Invalid scenario file; ``pointer`` is a JSON-pointer to the offending value."""

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


_FIELD = {
    "oneOf": [
        {"type": "string"},
        {"type": "number"},
        {"type": "object", "properties": {"file": {"type": "string"}}, "required": ["file"], "additionalProperties": False},
    ]
}

_PARAMS = {"type": "object", "additionalProperties": {"type": ["number", "string"]}}

SCHEMA = {
    "type": "object",
    "required": ["operator", "grid", "initial", "output_times"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "operator": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "required": ["equation"],
                    "additionalProperties": False,
                    "properties": {"equation": {"type": "string"}, "params": _PARAMS},
                },
            ]
        },
        "params": _PARAMS,
        "grid": {
            "type": "object",
            "required": ["n", "length"],
            "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 8}, "length": {"type": "number", "exclusiveMinimum": 0}},
        },
        "initial": {
            "type": "object",
            "required": ["u"],
            "additionalProperties": False,
            "properties": {"u": _FIELD, "dudt": {"oneOf": [_FIELD, {"type": "array", "items": _FIELD}]}},
        },
        "source": {
            "type": "object",
            "required": ["f", "T"],
            "additionalProperties": False,
            "properties": {"f": _FIELD, "T": {"type": "number", "exclusiveMinimum": 0}},
        },
        "output_times": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


@dataclass(frozen=True)
class SourceSpec:
    """``f(x, t)`` active on ``-T < t < 0`` and zero elsewhere.

    ``kind`` is ``"analytic-expression"`` or ``"sample-table"``.  Complex
    values are accepted; physical scenarios should supply real ``f``.
    """

    kind: str
    duration: float
    fn: Callable[[np.ndarray, float], np.ndarray]
    text: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("source duration T must be positive")

    @property
    def window(self) -> tuple[float, float]:
        return (-self.duration, 0.0)

    def __call__(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not -self.duration <= t <= 0.0:
            return np.zeros(x.shape, dtype=complex)
        return np.asarray(self.fn(x, t), dtype=complex)

    @classmethod
    def from_expression(cls, text: str, duration: float, params=None) -> "SourceSpec":
        return cls("analytic-expression", float(duration), Expression(text, params), text)

    @classmethod
    def from_samples(cls, times, x, values, duration: float) -> "SourceSpec":
        """Tabulated ``values[i, m] = f(x[m], times[i])``, linearly interpolated in t."""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=complex)
        xs = np.asarray(x, dtype=float)

        def fn(xq, t):
            if not np.array_equal(np.asarray(xq, dtype=float), xs):
                raise ValueError("tabulated source can only be evaluated on its own grid")
            i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
            w = (t - times[i]) / (times[i + 1] - times[i])
            return (1 - w) * values[i] + w * values[i + 1]

        return cls("sample-table", float(duration), fn, "<samples>")


@dataclass(frozen=True)
class Scenario:
    operator: LinearOperator
    grid: GridSpec
    initial: tuple  # sampled u and its time derivatives at initial_time, each shape (N,)
    output_times: tuple
    source: SourceSpec | None = None
    tolerances: ToleranceSet = DEFAULT_TOLERANCES
    name: str = "scenario"
    equation: str = ""
    params: dict = field(default_factory=dict)
    digest: str = ""
    initial_functions: tuple = ()  # Expression per initial field, None when tabulated

    @property
    def initial_time(self) -> float:
        return -self.source.duration if self.source is not None else 0.0

    @property
    def n_modes(self) -> int:
        return self.operator.max_t_order

    def initial_jet_values(self) -> np.ndarray:
        """Spectra of the first ``M`` supplied initial fields, shape ``(M, N)``."""
        m = self.n_modes
        if len(self.initial) < m:
            raise ScenarioError(f"need u and {m - 1} time derivative(s), got {len(self.initial)} field(s)", "/initial")
        return forward_values(self.grid, np.stack(self.initial[:m]))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    pointer: str = ""

    def __str__(self):
        where = f" [{self.pointer}]" if self.pointer else ""
        return f"{self.severity}: {self.message}{where}"


def _param_value(name, raw, pointer):
    if isinstance(raw, (int, float)):
        return raw
    try:
        value = evaluate(parse(raw), dict(CONSTANTS))
    except ExpressionError as exc:
        raise ScenarioError(f"bad parameter expression: {exc}", f"{pointer}/{name}") from None
    return complex(value) if complex(value).imag else float(complex(value).real)


def _read_field_csv(path: Path, grid: GridSpec, pointer: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}", pointer) from None
    if data.shape != (grid.n, 3) or not np.allclose(data[:, 0], grid.x, rtol=0, atol=1e-9 * grid.length):
        raise ScenarioError(f"{path} must have columns x,re,im on the scenario grid ({grid.n} rows)", pointer)
    return data[:, 1] + 1j * data[:, 2]


def _read_source_csv(path: Path, grid: GridSpec, duration: float, pointer: str) -> SourceSpec:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}", pointer) from None
    if data.shape[1] != 4 or data.shape[0] % grid.n:
        raise ScenarioError(f"{path} must have columns t,x,re_f,im_f with whole grid slices", pointer)
    slices = data.reshape(-1, grid.n, 4)
    times = slices[:, 0, 0]
    if len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ScenarioError(f"{path} needs at least two strictly increasing time slices", pointer)
    return SourceSpec.from_samples(times, grid.x, slices[:, :, 2] + 1j * slices[:, :, 3], duration)


def _sample_field(spec, grid, t0, params, base: Path, pointer):
    if isinstance(spec, dict):
        return _read_field_csv(base / spec["file"], grid, pointer), None
    try:
        expr = Expression(str(spec), params)
        return expr(grid.x, t0), expr
    except ExpressionError as exc:
        raise ScenarioError(f"expression error: {exc}", pointer) from None


def scenario_from_dict(doc: dict, base: Path | str = ".", digest: str = "") -> Scenario:
    """Validate ``doc`` against the schema and resolve every expression."""
    base = Path(base)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ScenarioError(err.message, pointer)
    times = [float(t) for t in doc["output_times"]]
    for i in range(1, len(times)):
        if times[i] < times[i - 1]:
            raise ScenarioError("output_times must be sorted ascending", f"/output_times/{i}")
    operator = doc["operator"]
    if isinstance(operator, str):
        equation, raw_params, ptr = operator, doc.get("params", {}), "/params"
    else:
        equation, raw_params, ptr = operator["equation"], operator.get("params", doc.get("params", {})), "/operator/params"
    params = {name: _param_value(name, raw, ptr) for name, raw in raw_params.items()}
    eq_ptr = "/operator" if isinstance(operator, str) else "/operator/equation"
    try:
        op = parse_operator(equation, params)
    except (ExpressionError, OperatorError) as exc:
        raise ScenarioError(str(exc), eq_ptr) from None
    n = doc["grid"]["n"]
    if n & (n - 1):
        raise ScenarioError(f"grid size must be a power of two, got {n}", "/grid/n")
    grid = GridSpec(n, doc["grid"]["length"])
    source = None
    if "source" in doc:
        duration = float(doc["source"]["T"])
        f = doc["source"]["f"]
        if isinstance(f, dict):
            source = _read_source_csv(base / f["file"], grid, duration, "/source/f")
        else:
            try:
                source = SourceSpec.from_expression(str(f), duration, params)
            except ExpressionError as exc:
                raise ScenarioError(f"expression error: {exc}", "/source/f") from None
    t0 = -source.duration if source is not None else 0.0
    init = doc["initial"]
    sampled = [_sample_field(init["u"], grid, t0, params, base, "/initial/u")]
    derivs = init.get("dudt", [])
    if not isinstance(derivs, list):
        derivs = [derivs]
    for i, d in enumerate(derivs):
        pointer = "/initial/dudt" if not isinstance(init.get("dudt"), list) else f"/initial/dudt/{i}"
        sampled.append(_sample_field(d, grid, t0, params, base, pointer))
    try:
        tol = DEFAULT_TOLERANCES.with_overrides(doc.get("tolerances", {}))
    except KeyError as exc:
        raise ScenarioError(str(exc), "/tolerances") from None
    return Scenario(
        operator=op,
        grid=grid,
        initial=tuple(v for v, _ in sampled),
        output_times=tuple(times),
        source=source,
        tolerances=tol,
        name=doc.get("name", "scenario"),
        equation=equation,
        params=params,
        digest=digest,
        initial_functions=tuple(f for _, f in sampled),
    )


PRESET_DIR = Path(__file__).with_name("presets")


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def resolve_scenario_path(name_or_path) -> Path:
    """A path to an existing file, or the name of a bundled preset."""
    path = Path(name_or_path)
    if path.exists() or path.suffix == ".json" and len(path.parts) > 1:
        return path
    preset = PRESET_DIR / f"{path.stem}.json"
    return preset if preset.exists() else path


def load_scenario(path) -> Scenario:
    """Read and resolve a scenario JSON file or bundled preset (see README for the format)."""
    path = resolve_scenario_path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    name_default = path.stem
    scenario = scenario_from_dict(doc, path.parent, hashlib.sha256(raw).hexdigest())
    if "name" not in doc:
        scenario = replace(scenario, name=name_default)
    return scenario


def high_band_fraction(grid: GridSpec, values: np.ndarray) -> float:
    """Fraction of spectral energy in the top eighth of the wavenumber band."""
    spec = forward_values(grid, values)
    energy = np.abs(spec) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    top = np.abs(grid.k) >= (7.0 / 8.0) * grid.k_max
    return float(energy[top].sum() / total)


def validate_scenario(s: Scenario) -> list[Diagnostic]:
    """Return diagnostics; an empty list means the scenario is fully consistent."""
    out: list[Diagnostic] = []
    m = s.n_modes
    have = len(s.initial) - 1
    for j in range(have, m - 1):
        out.append(Diagnostic("error", f"missing time derivative {j + 1} of the initial wave (operator needs {m - 1})", "/initial/dudt"))
    for j in range(m - 1, have):
        out.append(Diagnostic("warning", f"extra time derivative {j + 1} ignored (operator needs {m - 1})", "/initial/dudt"))
    times = list(s.output_times)
    if any(b < a for a, b in zip(times, times[1:])):
        out.append(Diagnostic("error", "output_times must be sorted ascending", "/output_times"))
    if s.grid.n < 8 or s.grid.n & (s.grid.n - 1):
        out.append(Diagnostic("error", f"grid size must be a power of two >= 8, got {s.grid.n}", "/grid/n"))
    tol = s.tolerances
    for i, values in enumerate(s.initial):
        frac = high_band_fraction(s.grid, values)
        if frac > tol.alias_energy:
            pointer = "/initial/u" if i == 0 else f"/initial/dudt/{i - 1}"
            out.append(Diagnostic("warning", f"initial field {i} carries {frac:.2e} relative energy in the top 1/8 of the band", pointer))
    if s.source is not None:
        T = s.source.duration
        for t in (-T, -0.5 * T, 0.0):
            frac = high_band_fraction(s.grid, s.source(s.grid.x, t))
            if frac > tol.alias_energy:
                out.append(Diagnostic("warning", f"source at t={t:g} carries {frac:.2e} relative energy in the top 1/8 of the band", "/source/f"))
                break
    try:
        table = build_table(s.operator, s.grid, tol)
    except DispersionError as exc:
        out.append(Diagnostic("error", str(exc), "/operator/equation"))
        return out
    for a, b in table.degenerate_pairs_everywhere():
        out.append(Diagnostic("error", f"branches {a + 1} and {b + 1} coincide at every wavenumber (confluent modes are not supported)", "/operator/equation"))
    if not any(d.severity == "error" for d in out):
        from .evolution import wrap_horizon

        horizon = wrap_horizon(s, table)
        late = [t for t in times if abs(t - s.initial_time) > horizon]
        if late:
            out.append(Diagnostic("warning", f"output time {late[0]:g} is past the wrap-around horizon ({horizon:.4g} after t={s.initial_time:g})", "/output_times"))
    return out
