"""Deterministic-equivalent formulation over all scenarios, plus Fix-DU.

The builder linearizes the access/placement/split products with the usual
pair of auxiliaries (x = lam * theta, y = x * psi) and only materializes
variables for covered user/RU pairs and eligible RU/DU pairs; at the largest
reference scale the dense product space is what makes a direct solve
intractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lp import BINARY, EQ, GE, LE, LinearModel, LpStatus, solve_milp
from .model import (
    Assignment,
    PlanSolution,
    ProblemInstance,
    evaluate_assignment,
    validate_instance,
)

STRUCTURAL_TAGS = (
    "coverage",
    "single_access",
    "single_placement",
    "eligibility",
    "du_capacity",
    "cu_capacity",
    "delay_budget",
    "latency_def",
)
LINEARIZATION_TAGS = (
    "lin_x_le_access",
    "lin_x_le_place",
    "lin_x_ge",
    "lin_x_sum",
    "lin_y_le_x",
    "lin_y_le_split",
    "lin_y_ge",
)


class InfeasibleInstanceError(RuntimeError):
    pass


class SolverLimitError(RuntimeError):
    pass


@dataclass
class VariableCatalog:
    """Bijective maps from model symbols to LinearModel indices."""

    p: dict[int, int] = field(default_factory=dict)                 # u -> var
    lam: dict[tuple[int, int, int], int] = field(default_factory=dict)       # (s,i,r)
    theta: dict[tuple[int, int, int], int] = field(default_factory=dict)     # (s,r,u)
    psi: dict[tuple[int, int, int], int] = field(default_factory=dict)       # (s,r,u)
    x: dict[tuple[int, int, int, int], int] = field(default_factory=dict)    # (s,i,r,u)
    y: dict[tuple[int, int, int, int], int] = field(default_factory=dict)    # (s,i,r,u)
    d: dict[tuple[int, int], int] = field(default_factory=dict)              # (s,i)
    rows: dict[str, dict[tuple, int]] = field(default_factory=dict)          # tag -> key -> row

    def row(self, tag: str, key: tuple) -> int:
        return self.rows[tag][key]

    def _record(self, tag: str, key: tuple, idx: int) -> None:
        self.rows.setdefault(tag, {})[key] = idx


def emit_scenario_block(
    model: LinearModel,
    instance: ProblemInstance,
    s: int,
    cat: VariableCatalog,
    p_vars: dict[int, int] | None,
    p_fixed: np.ndarray | None,
) -> None:
    """Add one scenario's variables and rows.

    DU capacity couples to the first stage either through the shared p
    variables (extensive form) or through fixed right-hand sides (scenario
    subproblem at a given capacity vector).
    """
    topo, params = instance.topology, instance.params
    sc = instance.scenarios[s]
    n_i, n_r = instance.n_users, topo.n_ru

    covered = [(i, r) for i in range(n_i) for r in range(n_r) if sc.coverage[i, r]]
    eligible = [(r, u) for r in range(n_r) for u in range(topo.n_du) if topo.zeta[r, u]]
    triples = [(i, r, u) for (i, r) in covered for u in topo.eligible_dus(r)]

    for i, r in covered:
        cat.lam[s, i, r] = model.add_variable(f"lam_s{s}_i{i}_r{r}", kind=BINARY, lb=0.0, ub=1.0)
    for r, u in eligible:
        cat.theta[s, r, u] = model.add_variable(f"theta_s{s}_r{r}_u{u}", kind=BINARY, lb=0.0, ub=1.0)
    for r, u in eligible:
        cat.psi[s, r, u] = model.add_variable(f"psi_s{s}_r{r}_u{u}", kind=BINARY, lb=0.0, ub=1.0)
    # a pair whose latency already busts the user's budget can never carry
    # them, so the product variable is pinned to zero (continuous [0,0]);
    # same for the central-split product when only the edge split fits
    for i, r, u in triples:
        edge_latency = params.delta * float(topo.dist_ru[r, u]) + params.d_split_edge
        if edge_latency > float(sc.delay_req[i]) + 1e-12:
            cat.x[s, i, r, u] = model.add_variable(f"x_s{s}_i{i}_r{r}_u{u}", lb=0.0, ub=0.0)
        else:
            cat.x[s, i, r, u] = model.add_variable(f"x_s{s}_i{i}_r{r}_u{u}", kind=BINARY, lb=0.0, ub=1.0)
    for i, r, u in triples:
        central_latency = params.delta * float(topo.dist_ru[r, u]) + params.d_split_central
        if central_latency > float(sc.delay_req[i]) + 1e-12:
            cat.y[s, i, r, u] = model.add_variable(f"y_s{s}_i{i}_r{r}_u{u}", lb=0.0, ub=0.0)
        else:
            cat.y[s, i, r, u] = model.add_variable(f"y_s{s}_i{i}_r{r}_u{u}", kind=BINARY, lb=0.0, ub=1.0)
    for i in range(n_i):
        cat.d[s, i] = model.add_variable(f"d_s{s}_i{i}", lb=0.0)

    for i, r in covered:
        idx = model.add_constraint(
            {cat.lam[s, i, r]: 1.0}, LE, float(sc.coverage[i, r]), f"cov_s{s}_i{i}_r{r}", tag="coverage"
        )
        cat._record("coverage", (s, i, r), idx)
    for i in range(n_i):
        coeffs = {cat.lam[s, i, r]: 1.0 for r in sc.covering_rus(i)}
        idx = model.add_constraint(coeffs, EQ, 1.0, f"acc_s{s}_i{i}", tag="single_access")
        cat._record("single_access", (s, i), idx)
    for r in range(n_r):
        coeffs = {cat.theta[s, r, u]: 1.0 for u in topo.eligible_dus(r)}
        idx = model.add_constraint(coeffs, EQ, 1.0, f"plc_s{s}_r{r}", tag="single_placement")
        cat._record("single_placement", (s, r), idx)
    for r, u in eligible:
        idx = model.add_constraint(
            {cat.theta[s, r, u]: 1.0}, LE, float(topo.zeta[r, u]), f"elig_s{s}_r{r}_u{u}", tag="eligibility"
        )
        cat._record("eligibility", (s, r, u), idx)

    # latency definition: d_i equals the fronthaul + midhaul terms of the
    # selected (r, u) pair; central split swaps the midhaul constant via y
    for i in range(n_i):
        coeffs: dict[int, float] = {cat.d[s, i]: 1.0}
        for r in sc.covering_rus(i):
            for u in topo.eligible_dus(r):
                base = params.delta * float(topo.dist_ru[r, u]) + params.d_split_edge
                coeffs[cat.x[s, i, r, u]] = coeffs.get(cat.x[s, i, r, u], 0.0) - base
                coeffs[cat.y[s, i, r, u]] = (
                    coeffs.get(cat.y[s, i, r, u], 0.0) - (params.d_split_central - params.d_split_edge)
                )
        idx = model.add_constraint(coeffs, EQ, 0.0, f"lat_s{s}_i{i}", tag="latency_def")
        cat._record("latency_def", (s, i), idx)

    for u in range(topo.n_du):
        coeffs = {}
        for i, r in covered:
            if topo.zeta[r, u]:
                w = float(sc.traffic[i])
                coeffs[cat.x[s, i, r, u]] = w * (params.f_a + params.f_b)
                coeffs[cat.y[s, i, r, u]] = -w * params.f_b
        if p_vars is not None:
            coeffs[p_vars[u]] = -1.0
            rhs = 0.0
        else:
            rhs = float(p_fixed[u])
        idx = model.add_constraint(coeffs, LE, rhs, f"ducap_s{s}_u{u}", tag="du_capacity")
        cat._record("du_capacity", (s, u), idx)

    for v in range(topo.n_cu):
        coeffs = {}
        for i, r, u in triples:
            if topo.eta[u, v]:
                w = float(sc.traffic[i])
                coeffs[cat.y[s, i, r, u]] = w * params.f_b
                coeffs[cat.x[s, i, r, u]] = coeffs.get(cat.x[s, i, r, u], 0.0) + w * params.f_c
        idx = model.add_constraint(coeffs, LE, params.sigma, f"cucap_s{s}_v{v}", tag="cu_capacity")
        cat._record("cu_capacity", (s, v), idx)

    for i in range(n_i):
        idx = model.add_constraint(
            {cat.d[s, i]: 1.0}, LE, float(sc.delay_req[i]), f"delay_s{s}_i{i}", tag="delay_budget"
        )
        cat._record("delay_budget", (s, i), idx)

    for i, r, u in triples:
        lam_j, th_j = cat.lam[s, i, r], cat.theta[s, r, u]
        ps_j, x_j, y_j = cat.psi[s, r, u], cat.x[s, i, r, u], cat.y[s, i, r, u]
        key = (s, i, r, u)
        tailname = f"s{s}_i{i}_r{r}_u{u}"
        cat._record(
            "lin_x_le_access",
            key,
            model.add_constraint({x_j: 1.0, lam_j: -1.0}, LE, 0.0, f"xla_{tailname}", tag="lin_x_le_access"),
        )
        cat._record(
            "lin_x_le_place",
            key,
            model.add_constraint({x_j: 1.0, th_j: -1.0}, LE, 0.0, f"xlp_{tailname}", tag="lin_x_le_place"),
        )
        cat._record(
            "lin_x_ge",
            key,
            model.add_constraint(
                {lam_j: 1.0, th_j: 1.0, x_j: -1.0}, LE, 1.0, f"xge_{tailname}", tag="lin_x_ge"
            ),
        )
        cat._record(
            "lin_y_le_x",
            key,
            model.add_constraint({y_j: 1.0, x_j: -1.0}, LE, 0.0, f"ylx_{tailname}", tag="lin_y_le_x"),
        )
        cat._record(
            "lin_y_le_split",
            key,
            model.add_constraint({y_j: 1.0, ps_j: -1.0}, LE, 0.0, f"yls_{tailname}", tag="lin_y_le_split"),
        )
        cat._record(
            "lin_y_ge",
            key,
            model.add_constraint(
                {x_j: 1.0, ps_j: 1.0, y_j: -1.0}, LE, 1.0, f"yge_{tailname}", tag="lin_y_ge"
            ),
        )

    # product consistency summed over a RU's eligible DUs: exactly one DU
    # hosts the RU, so the x block must add up to the access choice; exact at
    # integrality and a large relaxation tightener (it removes fractional
    # points where a user is "served" by no pair at zero latency)
    for i, r in covered:
        coeffs = {cat.x[s, i, r, u]: 1.0 for u in topo.eligible_dus(r)}
        coeffs[cat.lam[s, i, r]] = -1.0
        idx = model.add_constraint(coeffs, EQ, 0.0, f"xsr_s{s}_i{i}_r{r}", tag="lin_x_sum")
        cat._record("lin_x_sum", (s, i, r), idx)


def build_extensive(
    instance: ProblemInstance,
    capacity_only: bool = False,
    p_bounds: np.ndarray | None = None,
) -> tuple[LinearModel, VariableCatalog]:
    """Full multi-scenario model; ``p_bounds`` freezes capacities (Fix-DU).

    ``capacity_only`` keeps every constraint but drops the latency term from
    the objective, leaving plain total capacity.
    """
    report = validate_instance(instance)
    if not report.ok:
        raise InfeasibleInstanceError("; ".join(report.errors))

    model = LinearModel("extensive")
    cat = VariableCatalog()
    topo, params = instance.topology, instance.params
    for u in range(topo.n_du):
        if p_bounds is not None:
            lo = hi = float(p_bounds[u])
        else:
            lo, hi = 0.0, params.kappa
        cat.p[u] = model.add_variable(f"p_u{u}", lb=lo, ub=hi)

    for s in range(instance.n_scenarios):
        emit_scenario_block(model, instance, s, cat, p_vars=cat.p, p_fixed=None)

    obj: dict[int, float] = {}
    if capacity_only:
        for u, j in cat.p.items():
            obj[j] = 1.0
    else:
        for u, j in cat.p.items():
            obj[j] = params.gamma / topo.n_du
        weight = 1.0 / (instance.n_scenarios * instance.n_users)
        for key, j in cat.d.items():
            obj[j] = weight
    model.set_objective(obj)
    return model, cat


def extract_plan(instance: ProblemInstance, cat: VariableCatalog, primal: np.ndarray) -> PlanSolution:
    """Read a solver point back into capacities + per-scenario assignments."""
    topo = instance.topology
    p = np.array([primal[cat.p[u]] for u in range(topo.n_du)], dtype=float)
    p = np.maximum(p, 0.0)
    assignments = []
    for s in range(instance.n_scenarios):
        lam = np.zeros((instance.n_users, topo.n_ru), dtype=np.int8)
        theta = np.zeros((topo.n_ru, topo.n_du), dtype=np.int8)
        psi = np.zeros((topo.n_ru, topo.n_du), dtype=np.int8)
        for (ss, i, r), j in cat.lam.items():
            if ss == s:
                lam[i, r] = int(round(primal[j]))
        for (ss, r, u), j in cat.theta.items():
            if ss == s:
                theta[r, u] = int(round(primal[j]))
        for (ss, r, u), j in cat.psi.items():
            if ss == s:
                psi[r, u] = int(round(primal[j]))
        assignments.append(Assignment(lam=lam, theta=theta, psi=psi))

    result = evaluate_assignment(instance, p, assignments)
    if not result.ok:
        detail = "; ".join(f"{v.constraint}{v.where}:{v.amount:.3g}" for v in result.violations[:5])
        raise RuntimeError(f"solver returned an assignment that fails re-evaluation: {detail}")
    br = result.breakdown
    return PlanSolution(
        p=p,
        assignments=assignments,
        latencies=br.latencies,
        objective=br.objective,
        capacity_term=br.capacity_term,
        latency_term=br.latency_term,
    )


def solve_extensive(
    instance: ProblemInstance,
    capacity_only: bool = False,
    node_limit: int = 200_000,
) -> PlanSolution:
    model, cat = build_extensive(instance, capacity_only=capacity_only)
    out = solve_milp(model, node_limit=node_limit)
    if out.status == LpStatus.INFEASIBLE:
        raise InfeasibleInstanceError("extensive model is infeasible")
    if out.status != LpStatus.OPTIMAL:
        raise SolverLimitError(f"extensive solve stopped with status {out.status.value}, gap {out.gap}")
    return extract_plan(instance, cat, out.primal)


def solve_fix_du(
    instance: ProblemInstance,
    p_fixed: np.ndarray | None = None,
    node_limit: int = 200_000,
) -> PlanSolution:
    """Latency-only optimization at frozen capacities (default: kappa per DU).

    The reported objective keeps the capacity term, so the number compares
    directly with the capacity-optimizing solvers.
    """
    params = instance.params
    n_du = instance.topology.n_du
    if p_fixed is None:
        p_fixed = np.full(n_du, params.kappa)
    p_fixed = np.asarray(p_fixed, dtype=float)
    if p_fixed.shape != (n_du,):
        raise ValueError("p_fixed must have one entry per DU")
    if np.any(p_fixed < 0) or np.any(p_fixed > params.kappa + 1e-9):
        raise ValueError("p_fixed must lie in [0, kappa]")

    model, cat = build_extensive(instance, p_bounds=p_fixed)
    out = solve_milp(model, node_limit=node_limit)
    if out.status == LpStatus.INFEASIBLE:
        raise InfeasibleInstanceError("no feasible assignment under the frozen capacities")
    if out.status != LpStatus.OPTIMAL:
        raise SolverLimitError(f"fix-DU solve stopped with status {out.status.value}, gap {out.gap}")
    return extract_plan(instance, cat, out.primal)
