"""Core planning model for a 3-layer O-RAN.

Topology: radio units (RUs) attach over fronthaul to distributed units (DUs,
the edge servers being sized), which attach over midhaul to central units
(CUs). Each RU's baseband chain can run DU-heavy (edge split) or be mostly
offloaded to the CU (central split); the split decides both the midhaul delay
a user sees and how the compute load divides between DU and CU.

Demand is uncertain: a scenario fixes, per user, which RUs cover them, the
delay budget of the requested service, and its traffic rate. First-stage DU
capacities must work across every scenario; access, placement and split are
chosen per scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_EVAL_TOL = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProblemParams:
    """Global constants: compute demand per Mb/s, capacities, delay terms.

    Units: f_a/f_b/f_c in reference cores (RC) per Mb/s, kappa/sigma in RC,
    delay terms in ms, delta in ms per km, gamma dimensionless.
    """

    f_a: float = 2.0       # RF + Low-PHY block, always on the DU
    f_b: float = 4.0       # High-PHY/MAC/RLC/PDCP block, DU or CU by split
    f_c: float = 1.0       # RRC-IP block, always on the CU
    kappa: float = 4096.0
    sigma: float = 32768.0
    d_split_edge: float = 0.25      # midhaul term when the DU keeps f_b
    d_split_central: float = 30.0   # midhaul term when f_b moves to the CU
    delta: float = 0.01             # fronthaul propagation, ms per km
    gamma: float = 0.01

    def __post_init__(self):
        for name in ("f_a", "f_b", "f_c", "kappa", "sigma", "d_split_edge", "d_split_central", "delta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.kappa > self.sigma:
            raise ValueError("DU capacity cap kappa cannot exceed CU capacity sigma")


@dataclass(frozen=True)
class Topology:
    """Index sets plus RU->DU eligibility, DU->CU attachment and distances."""

    cu_ids: tuple[int, ...]
    du_ids: tuple[int, ...]
    ru_ids: tuple[int, ...]
    zeta: np.ndarray      # (R, U) binary, RU r may place on DU u
    eta: np.ndarray       # (U, V) binary, DU u attaches to CU v
    dist_ru: np.ndarray   # (R, U) km, NaN where not eligible

    def __post_init__(self):
        object.__setattr__(self, "zeta", _freeze(np.asarray(self.zeta, dtype=np.int8)))
        object.__setattr__(self, "eta", _freeze(np.asarray(self.eta, dtype=np.int8)))
        object.__setattr__(self, "dist_ru", _freeze(np.asarray(self.dist_ru, dtype=float)))

    @property
    def n_cu(self) -> int:
        return len(self.cu_ids)

    @property
    def n_du(self) -> int:
        return len(self.du_ids)

    @property
    def n_ru(self) -> int:
        return len(self.ru_ids)

    def eligible_dus(self, r: int) -> list[int]:
        return [u for u in range(self.n_du) if self.zeta[r, u]]

    def cu_of(self, u: int) -> int:
        return int(np.argmax(self.eta[u]))


@dataclass(frozen=True)
class Scenario:
    """One joint realization of coverage, delay budgets and traffic."""

    id: int
    coverage: np.ndarray   # (I, R) binary
    delay_req: np.ndarray  # (I,) ms
    traffic: np.ndarray    # (I,) Mb/s

    def __post_init__(self):
        object.__setattr__(self, "coverage", _freeze(np.asarray(self.coverage, dtype=np.int8)))
        object.__setattr__(self, "delay_req", _freeze(np.asarray(self.delay_req, dtype=float)))
        object.__setattr__(self, "traffic", _freeze(np.asarray(self.traffic, dtype=float)))

    def covering_rus(self, i: int) -> list[int]:
        return [r for r in range(self.coverage.shape[1]) if self.coverage[i, r]]


@dataclass(frozen=True)
class ProblemInstance:
    params: ProblemParams
    topology: Topology
    n_users: int
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    @property
    def users(self) -> range:
        return range(self.n_users)


@dataclass
class Assignment:
    """Second-stage choices for one scenario."""

    lam: np.ndarray    # (I, R) binary user->RU access
    theta: np.ndarray  # (R, U) binary RU-function placement
    psi: np.ndarray    # (R, U) binary, 1 = central split, 0 = edge split


@dataclass
class PlanSolution:
    p: np.ndarray                      # (U,) DU capacities in RC
    assignments: list[Assignment]      # one per scenario
    latencies: np.ndarray              # (S, I) ms
    objective: float
    capacity_term: float
    latency_term: float


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class ConstraintViolation:
    constraint: str
    where: tuple
    amount: float


@dataclass
class CostBreakdown:
    objective: float
    capacity_term: float
    latency_term: float
    latencies: np.ndarray  # (S, I)
    du_loads: np.ndarray   # (S, U)
    cu_loads: np.ndarray   # (S, V)


@dataclass
class EvaluationResult:
    breakdown: CostBreakdown
    violations: list[ConstraintViolation]

    @property
    def ok(self) -> bool:
        return not self.violations


# -- closed-form pieces ------------------------------------------------------


def service_latency(params: ProblemParams, dist_km: float, split: float) -> float:
    """Fronthaul propagation plus the midhaul term selected by the split."""
    if dist_km < 0:
        raise ValueError("distance must be nonnegative")
    return params.delta * dist_km + (1.0 - split) * params.d_split_edge + split * params.d_split_central


def du_load_contribution(params: ProblemParams, traffic: float, split: float) -> float:
    """RC a flow puts on its DU: f_a always, f_b only under the edge split."""
    if traffic < 0:
        raise ValueError("traffic must be nonnegative")
    return traffic * (params.f_a + (1.0 - split) * params.f_b)


def cu_load_contribution(params: ProblemParams, traffic: float, split: float) -> float:
    """RC a flow puts on its CU: f_c always, f_b only under the central split."""
    if traffic < 0:
        raise ValueError("traffic must be nonnegative")
    return traffic * (split * params.f_b + params.f_c)


def total_cost(p: np.ndarray, latencies: np.ndarray, gamma: float) -> float:
    """Weighted mean DU capacity plus mean latency over scenarios and users."""
    p = np.asarray(p, dtype=float)
    latencies = np.asarray(latencies, dtype=float)
    cap = gamma / p.shape[0] * float(p.sum()) if p.size else 0.0
    lat = float(latencies.mean()) if latencies.size else 0.0
    return cap + lat


# -- instance validation -----------------------------------------------------


def validate_instance(
    instance: ProblemInstance,
    dist_warn_bounds: tuple[float, float] = (0.5, 4.0),
) -> ValidationReport:
    """Structural checks; distance-range oddities are warnings, not errors."""
    rep = ValidationReport()
    topo, params = instance.topology, instance.params

    for name in ("f_a", "f_b", "f_c", "kappa", "sigma", "d_split_edge", "d_split_central", "delta", "gamma"):
        if getattr(params, name) < 0:
            rep.errors.append(f"parameter {name} is negative")

    if topo.zeta.shape != (topo.n_ru, topo.n_du):
        rep.errors.append("zeta shape does not match RU/DU counts")
    if topo.eta.shape != (topo.n_du, topo.n_cu):
        rep.errors.append("eta shape does not match DU/CU counts")
    for u in range(topo.n_du):
        if int(topo.eta[u].sum()) != 1:
            rep.errors.append(f"DU {u} must attach to exactly one CU")
    for r in range(topo.n_ru):
        if int(topo.zeta[r].sum()) < 1:
            rep.errors.append(f"RU {r} has no eligible DU")
    for r in range(topo.n_ru):
        for u in range(topo.n_du):
            if topo.zeta[r, u]:
                d = topo.dist_ru[r, u]
                if not math.isfinite(d) or d <= 0:
                    rep.errors.append(f"eligible pair RU {r} / DU {u} lacks a valid distance")
                elif not (dist_warn_bounds[0] <= d <= dist_warn_bounds[1]):
                    rep.warnings.append(
                        f"RU {r} / DU {u} distance {d:g} km outside the usual "
                        f"[{dist_warn_bounds[0]:g}, {dist_warn_bounds[1]:g}] km range"
                    )

    if instance.n_scenarios < 1:
        rep.errors.append("instance needs at least one scenario")
    for sc in instance.scenarios:
        sid = sc.id
        if sc.coverage.shape != (instance.n_users, topo.n_ru):
            rep.errors.append(f"scenario {sid}: coverage shape mismatch")
            continue
        if sc.delay_req.shape != (instance.n_users,) or sc.traffic.shape != (instance.n_users,):
            rep.errors.append(f"scenario {sid}: delay/traffic length mismatch")
            continue
        for i in range(instance.n_users):
            if int(sc.coverage[i].sum()) < 1:
                rep.errors.append(f"user {i} uncoverable in scenario {sid}")
        if np.any(sc.delay_req <= 0):
            rep.errors.append(f"scenario {sid}: nonpositive delay budget")
        if np.any(sc.traffic < 0):
            rep.errors.append(f"scenario {sid}: negative traffic")
    return rep


# -- full constraint re-check of a candidate plan ----------------------------


def evaluate_assignment(
    instance: ProblemInstance,
    p: np.ndarray,
    assignments: list[Assignment],
    tol: float = _EVAL_TOL,
) -> EvaluationResult:
    """Recompute every structural constraint from raw data for a candidate.

    Returns the cost breakdown alongside whatever violations were found;
    dimension mismatches raise instead.
    """
    topo, params = instance.topology, instance.params
    n_i, n_r, n_u, n_v = instance.n_users, topo.n_ru, topo.n_du, topo.n_cu
    p = np.asarray(p, dtype=float)
    if p.shape != (n_u,):
        raise ValueError("capacity vector has wrong length")
    if len(assignments) != instance.n_scenarios:
        raise ValueError("assignment count does not match scenario count")

    viol: list[ConstraintViolation] = []
    lat = np.zeros((instance.n_scenarios, n_i))
    du_loads = np.zeros((instance.n_scenarios, n_u))
    cu_loads = np.zeros((instance.n_scenarios, n_v))

    for u in range(n_u):
        if p[u] < -tol:
            viol.append(ConstraintViolation("capacity_nonnegative", (u,), -p[u]))
        if p[u] > params.kappa + tol:
            viol.append(ConstraintViolation("capacity_limit", (u,), p[u] - params.kappa))

    for s, (sc, asg) in enumerate(zip(instance.scenarios, assignments)):
        lam, theta, psi = np.asarray(asg.lam), np.asarray(asg.theta), np.asarray(asg.psi)
        if lam.shape != (n_i, n_r) or theta.shape != (n_r, n_u) or psi.shape != (n_r, n_u):
            raise ValueError(f"scenario {sc.id}: assignment matrices have wrong shapes")

        for i in range(n_i):
            if int(lam[i].sum()) != 1:
                viol.append(ConstraintViolation("single_access", (sc.id, i), abs(lam[i].sum() - 1)))
            for r in range(n_r):
                if lam[i, r] and not sc.coverage[i, r]:
                    viol.append(ConstraintViolation("coverage", (sc.id, i, r), 1.0))
        for r in range(n_r):
            if int(theta[r].sum()) != 1:
                viol.append(ConstraintViolation("single_placement", (sc.id, r), abs(theta[r].sum() - 1)))
            for u in range(n_u):
                if theta[r, u] and not topo.zeta[r, u]:
                    viol.append(ConstraintViolation("eligibility", (sc.id, r, u), 1.0))

        for i in range(n_i):
            d_i = 0.0
            for r in range(n_r):
                if not lam[i, r]:
                    continue
                for u in range(n_u):
                    if theta[r, u]:
                        d_i += service_latency(params, float(topo.dist_ru[r, u]), float(psi[r, u]))
            lat[s, i] = d_i
            if d_i > sc.delay_req[i] + tol:
                viol.append(ConstraintViolation("delay_budget", (sc.id, i), d_i - sc.delay_req[i]))

        for i in range(n_i):
            for r in range(n_r):
                if not lam[i, r]:
                    continue
                for u in range(n_u):
                    if theta[r, u]:
                        du_loads[s, u] += du_load_contribution(params, float(sc.traffic[i]), float(psi[r, u]))
                        cu_loads[s, topo.cu_of(u)] += cu_load_contribution(
                            params, float(sc.traffic[i]), float(psi[r, u])
                        )
        for u in range(n_u):
            if du_loads[s, u] > p[u] + tol:
                viol.append(ConstraintViolation("du_capacity", (sc.id, u), du_loads[s, u] - p[u]))
        for v in range(n_v):
            if cu_loads[s, v] > params.sigma + tol:
                viol.append(ConstraintViolation("cu_capacity", (sc.id, v), cu_loads[s, v] - params.sigma))

    cap_term = params.gamma / n_u * float(p.sum())
    lat_term = float(lat.mean()) if lat.size else 0.0
    breakdown = CostBreakdown(
        objective=cap_term + lat_term,
        capacity_term=cap_term,
        latency_term=lat_term,
        latencies=lat,
        du_loads=du_loads,
        cu_loads=cu_loads,
    )
    return EvaluationResult(breakdown=breakdown, violations=viol)
