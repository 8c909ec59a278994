"""Periodic phi-Laplacian problems: fixed-point solver, Brouwer degree and branch tracing."""

from .catalog import ExampleParams, TimeFunction, lambda_hat, make_example
from .continuation import (
    BoundMonitor,
    Branch,
    DomainSpec,
    Scenario,
    StepConfig,
    TerminationKind,
    classify_termination,
    trace_all,
    trace_branch,
    trivial_start_points,
)
from .degree import Box, degree, degree_2d_winding, degree_oracle_preimage
from .model import PeriodicGrid, ProblemField, SolutionPair, StatePair
from .phi import PhiOperator, coercivity_gamma
from .solver import SolverConfig, newton_solve

__version__ = "0.1.0"

__all__ = [
    "BoundMonitor",
    "Box",
    "Branch",
    "DomainSpec",
    "ExampleParams",
    "PeriodicGrid",
    "PhiOperator",
    "ProblemField",
    "Scenario",
    "SolutionPair",
    "SolverConfig",
    "StatePair",
    "StepConfig",
    "TerminationKind",
    "TimeFunction",
    "classify_termination",
    "coercivity_gamma",
    "degree",
    "degree_2d_winding",
    "degree_oracle_preimage",
    "lambda_hat",
    "make_example",
    "newton_solve",
    "trace_all",
    "trace_branch",
    "trivial_start_points",
]
