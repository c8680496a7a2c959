"""Generic linear-model container shared by every solver in the package.

A ``LinearModel`` holds continuous/binary variables with bounds, linear
constraints with a sense and right-hand side, and a minimization objective.
It is the single substrate behind the extensive form, the Benders master
problem and the per-scenario subproblems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

LE = "<="
EQ = "="
GE = ">="
_SENSES = (LE, EQ, GE)

CONTINUOUS = "continuous"
BINARY = "binary"


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    kind: str


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str
    rhs: float
    tag: str = ""


@dataclass
class LpOutcome:
    """Result of one LP solve.

    ``duals`` follow the marginal-value convention dObjective/dRhs: duals on
    ">=" rows are nonnegative, on "<=" rows nonpositive, free on "=" rows.
    ``farkas`` (present when infeasible) gives a nonnegative weight per
    inequality row (free on equalities) such that the weighted combination
    of the rows, each taken in its stated direction, cannot be satisfied by
    any point inside the variable bounds.
    """

    status: LpStatus
    objective: float | None = None
    primal: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    farkas: np.ndarray | None = None
    iterations: int = 0


@dataclass
class MilpOutcome:
    status: LpStatus
    objective: float | None = None
    primal: np.ndarray | None = None
    gap: float = math.inf
    nodes: int = 0


class LinearModel:
    """Mutable builder for an LP/MILP with named, tagged rows."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self._var_names: dict[str, int] = {}
        self._con_names: dict[str, int] = {}

    # -- construction -----------------------------------------------------

    def add_variable(
        self,
        name: str | None = None,
        lb: float = 0.0,
        ub: float = math.inf,
        kind: str = CONTINUOUS,
    ) -> int:
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY and (lb, ub) != (0.0, 1.0):
            raise ValueError("binary variables must have bounds [0, 1]")
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ValueError(f"invalid bounds [{lb}, {ub}]")
        idx = len(self.variables)
        if name is None:
            name = f"v{idx}"
        if name in self._var_names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._var_names[name] = idx
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        return idx

    def add_constraint(
        self,
        coeffs: dict[int, float],
        sense: str,
        rhs: float,
        name: str | None = None,
        tag: str = "",
    ) -> int:
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValueError("constraint rhs must be finite")
        cleaned = []
        for j, c in coeffs.items():
            if not (0 <= j < len(self.variables)):
                raise IndexError(f"constraint references unknown variable {j}")
            if not math.isfinite(c):
                raise ValueError("constraint coefficients must be finite")
            if c != 0.0:
                cleaned.append((j, float(c)))
        idx = len(self.constraints)
        if name is None:
            name = f"c{idx}"
        if name in self._con_names:
            raise ValueError(f"duplicate constraint name {name!r}")
        self._con_names[name] = idx
        self.constraints.append(Constraint(name, tuple(cleaned), sense, float(rhs), tag))
        return idx

    def set_objective(self, coeffs: dict[int, float]) -> None:
        for j, c in coeffs.items():
            if not (0 <= j < len(self.variables)):
                raise IndexError(f"objective references unknown variable {j}")
            if not math.isfinite(c):
                raise ValueError("objective coefficients must be finite")
        self.objective = {j: float(c) for j, c in coeffs.items() if c != 0.0}

    # -- queries -----------------------------------------------------------

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def variable_index(self, name: str) -> int:
        return self._var_names[name]

    def binary_indices(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.kind == BINARY]

    def tag_census(self) -> dict[str, int]:
        """Count of constraints per tag, insertion-ordered."""
        census: dict[str, int] = {}
        for con in self.constraints:
            census[con.tag] = census.get(con.tag, 0) + 1
        return census

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str], np.ndarray, np.ndarray]:
        """Return (c, A, b, senses, lb, ub) as dense numpy data."""
        n, m = self.n_variables, self.n_constraints
        c = np.zeros(n)
        for j, v in self.objective.items():
            c[j] = v
        A = np.zeros((m, n))
        b = np.zeros(m)
        senses = []
        for i, con in enumerate(self.constraints):
            for j, v in con.coeffs:
                A[i, j] += v
            b[i] = con.rhs
            senses.append(con.sense)
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return c, A, b, senses, lb, ub

    def residuals(self, x: np.ndarray) -> float:
        """Largest constraint/bound violation of a candidate point."""
        worst = 0.0
        for con in self.constraints:
            lhs = sum(c * x[j] for j, c in con.coeffs)
            if con.sense == LE:
                worst = max(worst, lhs - con.rhs)
            elif con.sense == GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        for j, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[j], x[j] - v.ub)
        return float(worst)

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(c * x[j] for j, c in self.objective.items()))

    def to_text(self) -> str:
        """Plain-text dump of the model for debugging; not a stable format."""
        lines = [f"\\ model {self.name}", "minimize"]
        terms = [f"{c:+g} {self.variables[j].name}" for j, c in sorted(self.objective.items())]
        lines.append("  " + (" ".join(terms) if terms else "0"))
        lines.append("subject to")
        for con in self.constraints:
            expr = " ".join(f"{c:+g} {self.variables[j].name}" for j, c in con.coeffs)
            lines.append(f"  {con.name}: {expr or '0'} {con.sense} {con.rhs:g}")
        lines.append("bounds")
        for v in self.variables:
            lines.append(f"  {v.lb:g} <= {v.name} <= {v.ub:g}" + ("  binary" if v.kind == BINARY else ""))
        return "\n".join(lines) + "\n"

    def copy(self) -> "LinearModel":
        dup = LinearModel(self.name)
        dup.variables = list(self.variables)
        dup.constraints = list(self.constraints)
        dup.objective = dict(self.objective)
        dup._var_names = dict(self._var_names)
        dup._con_names = dict(self._con_names)
        return dup


def relax(model: LinearModel) -> LinearModel:
    """Continuous relaxation: every binary re-kinded continuous in [0, 1]."""
    out = model.copy()
    out.variables = [
        Variable(v.name, v.lb, v.ub, CONTINUOUS) if v.kind == BINARY else v
        for v in model.variables
    ]
    return out
