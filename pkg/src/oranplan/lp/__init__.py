"""Self-contained LP/MILP engine: deterministic simplex plus branch and bound."""

from .linmodel import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    LE,
    Constraint,
    LinearModel,
    LpOutcome,
    LpStatus,
    MilpOutcome,
    Variable,
    relax,
)
from .branch_bound import solve_milp
from .simplex import LpNumericalError, solve_lp

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "EQ",
    "GE",
    "LE",
    "Constraint",
    "LinearModel",
    "LpNumericalError",
    "LpOutcome",
    "LpStatus",
    "MilpOutcome",
    "Variable",
    "relax",
    "solve_lp",
    "solve_milp",
]
