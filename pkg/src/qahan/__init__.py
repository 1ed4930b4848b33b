"""Quantum-annealing hard attention: QUBO masks inside a small CNN classifier."""

__version__ = "0.1.0"

from .qubo import BinaryMask, ExplicitQubo, QuboProblem, qaham_objective, to_explicit_qubo
from .solvers import AnnealSchedule, SaConfig, SolveResult, make_solver

__all__ = [
    "AnnealSchedule",
    "BinaryMask",
    "ExplicitQubo",
    "QuboProblem",
    "SaConfig",
    "SolveResult",
    "make_solver",
    "qaham_objective",
    "to_explicit_qubo",
]
