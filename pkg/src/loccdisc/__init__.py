"""Optimal conclusive discrimination of two bipartite pure states by one-way LOCC."""

from .core import (
    BipartiteState,
    DiscriminationInstance,
    Measurement,
    Outcome,
    PriorPair,
    Tolerances,
    canonicalize,
    overlap,
    random_instance,
    validate_measurement,
)
from .errors import DiscriminationError, InputError, NumericalFailure
from .optimum import CaseTag, OptimumResult, brute_force_pmax, orthogonal_measurement, pmax, udd_measurement
from .protocol import (
    LoccProtocol,
    analytic_success,
    build_protocol,
    effective_priors,
    evaluate_exact,
    split_terms,
    walgate_subprotocol,
)
from .simulate import SimulationReport, simulate

__all__ = [
    "BipartiteState",
    "CaseTag",
    "DiscriminationError",
    "DiscriminationInstance",
    "InputError",
    "LoccProtocol",
    "Measurement",
    "NumericalFailure",
    "OptimumResult",
    "Outcome",
    "PriorPair",
    "SimulationReport",
    "Tolerances",
    "analytic_success",
    "brute_force_pmax",
    "build_protocol",
    "canonicalize",
    "effective_priors",
    "evaluate_exact",
    "orthogonal_measurement",
    "overlap",
    "pmax",
    "random_instance",
    "simulate",
    "split_terms",
    "udd_measurement",
    "validate_measurement",
    "walgate_subprotocol",
]
