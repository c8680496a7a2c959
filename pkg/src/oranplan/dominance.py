"""Redundant feasibility-cut detection via componentwise scenario dominance.

A scenario with (componentwise) sparser coverage and tighter delay budgets is
the harder one; when an easier scenario's cut already implies the harder
scenario's cut over the whole capacity box, the harder cut adds nothing to
the master and is dropped. Dropping is gated three ways: raw-data dominance,
a sign condition on the retainer's coverage/delay multipliers, and an exact
one-LP implication check over [0, kappa]^U, so a dropped cut is always
provably covered by its retainer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .lp import LE, LinearModel, LpStatus, solve_lp
from .model import Scenario

if TYPE_CHECKING:  # avoid an import cycle with the engine module
    from .benders import BendersCut

_SIGN_TOL = 1e-9
_IMPLIED_TOL = 1e-9
_IDENTICAL_ATOL = 1e-12


@dataclass(frozen=True)
class DominanceRelation:
    """dominated[s1, s2] is true iff scenario s1's coverage and delay data
    are componentwise at most s2's (s1 at least as hard as s2)."""

    dominated: np.ndarray

    def is_dominated(self, s1: int, s2: int) -> bool:
        return bool(self.dominated[s1, s2])


def precompute_dominance(scenarios: Sequence[Scenario]) -> DominanceRelation:
    n = len(scenarios)
    if n == 0:
        return DominanceRelation(np.zeros((0, 0), dtype=bool))
    phi = np.stack([sc.coverage.reshape(-1) for sc in scenarios])
    pi = np.stack([sc.delay_req for sc in scenarios])
    phi_le = (phi[:, None, :] <= phi[None, :, :]).all(axis=2)
    pi_le = (pi[:, None, :] <= pi[None, :, :]).all(axis=2)
    return DominanceRelation(phi_le & pi_le)


def _sign_condition(cut: "BendersCut", tol: float) -> bool:
    """Retainer multipliers on coverage and delay rows must be >= -tol."""
    for family in ("coverage", "delay_budget"):
        for value in cut.dual_groups.get(family, {}).values():
            if value < -tol:
                return False
    return True


def _identical(c1: "BendersCut", c2: "BendersCut") -> bool:
    return abs(c1.const - c2.const) <= _IDENTICAL_ATOL and np.allclose(
        c1.p_coeffs, c2.p_coeffs, rtol=0.0, atol=_IDENTICAL_ATOL
    )


def implied_over_box(c1: "BendersCut", c2: "BendersCut", kappa: float) -> bool:
    """True iff c2 holding forces c1 to hold everywhere on [0, kappa]^U."""
    n_du = len(c1.p_coeffs)
    model = LinearModel("cut-implication")
    pj = [model.add_variable(f"p{u}", 0.0, kappa) for u in range(n_du)]
    model.add_constraint(
        {pj[u]: float(c2.p_coeffs[u]) for u in range(n_du)}, LE, -c2.const, "retainer"
    )
    model.set_objective({pj[u]: -float(c1.p_coeffs[u]) for u in range(n_du)})
    out = solve_lp(model)
    if out.status == LpStatus.INFEASIBLE:
        return True  # retainer can never hold inside the box
    if out.status != LpStatus.OPTIMAL:
        return False
    worst = c1.const - out.objective
    return worst <= _IMPLIED_TOL


def filter_cuts(
    candidate_cuts: Sequence["BendersCut"],
    relation: DominanceRelation,
    sign_check: bool = True,
    *,
    kappa: float,
    extra_retainers: Sequence["BendersCut"] = (),
) -> tuple[list["BendersCut"], list[tuple["BendersCut", "BendersCut"]]]:
    """Split one iteration's feasibility cuts into retained and dropped.

    Candidates are scanned in ascending scenario order; a candidate is
    dropped only against an already-retained cut (or a cross-iteration
    retainer when supplied), never the other way around, so at least one
    candidate always survives.
    """
    ordered = sorted(candidate_cuts, key=lambda cut: cut.scenario)
    retained: list[BendersCut] = []
    dropped: list[tuple[BendersCut, BendersCut]] = []
    for cand in ordered:
        retainer = None
        for other in list(extra_retainers) + retained:
            if not relation.is_dominated(cand.scenario, other.scenario):
                continue
            same = _identical(cand, other)
            if sign_check and not same and not _sign_condition(other, _SIGN_TOL):
                continue
            if same or implied_over_box(cand, other, kappa):
                retainer = other
                break
        if retainer is None:
            retained.append(cand)
        else:
            dropped.append((cand, retainer))
    return retained, dropped
