"""Pseudospectral evolution and mode decomposition for linear 1-D dispersive waves."""

from .dispersion import DispersionTable, build_table, dispersion_poly, solve_roots
from .equation import LinearOperator, parse_operator
from .evolution import (
    EvolutionResult,
    ParticularJet,
    after_source_modes,
    classical_dalembert,
    combined_two_mode,
    dalembert_general_k,
    dalembert_general_x,
    duhamel_delta,
    evolve_source_free,
    particular_solution,
    propagate_jet,
    propagate_modes,
    simulate,
)
from .grid import GridSpec, SpatialField, SpectralField, forward, inverse
from .modes import JetField, ModeSet, extract_modes, recombine
from .scenario import Scenario, SourceSpec, load_scenario, validate_scenario
from .tolerances import DEFAULT_TOLERANCES, ToleranceSet

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCES",
    "DispersionTable",
    "EvolutionResult",
    "GridSpec",
    "JetField",
    "LinearOperator",
    "ModeSet",
    "ParticularJet",
    "Scenario",
    "SourceSpec",
    "SpatialField",
    "SpectralField",
    "ToleranceSet",
    "after_source_modes",
    "build_table",
    "classical_dalembert",
    "combined_two_mode",
    "dalembert_general_k",
    "dalembert_general_x",
    "dispersion_poly",
    "duhamel_delta",
    "evolve_source_free",
    "extract_modes",
    "forward",
    "inverse",
    "load_scenario",
    "parse_operator",
    "particular_solution",
    "propagate_jet",
    "propagate_modes",
    "recombine",
    "simulate",
    "solve_roots",
    "validate_scenario",
]
