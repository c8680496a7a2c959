"""Seeded generation of topologies and demand scenarios, plus instance files.

The generated shape mirrors the reference deployment: each CU feeds two DUs,
each DU fronts two RUs, and the two DUs under one CU back each other up, so
an RU can place its functions on its own DU or on the sibling. RUs sit on a
uniform grid; users are dropped uniformly over the covered square and a user
counts as covered by every RU within the coverage radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ProblemInstance, ProblemParams, Scenario, Topology


@dataclass(frozen=True)
class ServiceClass:
    name: str
    traffic: float    # Mb/s
    delay_budget: float  # ms

    def __post_init__(self):
        if self.traffic <= 0 or self.delay_budget <= 0:
            raise ValueError("service class needs positive traffic and delay budget")


EMBB = ServiceClass("eMBB", 20.0, 100.0)
MMTC = ServiceClass("mMTC", 1.0, 100.0)
URLLC = ServiceClass("uRLLC", 5.0, 10.0)
SERVICE_CLASSES = (EMBB, MMTC, URLLC)

_RESAMPLE_CAP = 1000


@dataclass(frozen=True)
class GeneratorConfig:
    n_cu: int = 2
    n_users: int = 10
    n_scenarios: int = 4
    service_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)  # eMBB, mMTC, uRLLC
    coverage_radius_km: float = 1.6
    grid_spacing_km: float = 2.0
    dist_bounds_km: tuple[float, float] = (0.5, 4.0)
    shared_positions: bool = False  # one position draw reused by every scenario
    seed: int = 0

    def __post_init__(self):
        if self.n_cu < 1 or self.n_users < 1 or self.n_scenarios < 1:
            raise ValueError("n_cu, n_users and n_scenarios must be at least 1")
        if abs(sum(self.service_mix) - 1.0) > 1e-9 or any(p < 0 for p in self.service_mix):
            raise ValueError("service mix must be a probability vector")
        if not (0 < self.dist_bounds_km[0] <= self.dist_bounds_km[1]):
            raise ValueError("distance bounds must be ordered and positive")
        if self.coverage_radius_km <= 0 or self.grid_spacing_km <= 0:
            raise ValueError("coverage radius and grid spacing must be positive")


class InstanceFormatError(ValueError):
    pass


def _ru_grid(n_ru: int, spacing: float) -> np.ndarray:
    """RU coordinates on a near-square grid, row-major, cell-centered."""
    cols = math.ceil(math.sqrt(n_ru))
    pts = np.empty((n_ru, 2))
    for r in range(n_ru):
        pts[r] = ((r % cols + 0.5) * spacing, (r // cols + 0.5) * spacing)
    return pts


def _area_extent(n_ru: int, spacing: float) -> tuple[float, float]:
    cols = math.ceil(math.sqrt(n_ru))
    rows = math.ceil(n_ru / cols)
    return cols * spacing, rows * spacing


def generate_topology(config: GeneratorConfig) -> Topology:
    """2 DUs per CU, 2 RUs per DU, sibling DUs mutually eligible."""
    rng = np.random.default_rng([config.seed, 0])
    n_cu = config.n_cu
    n_du = 2 * n_cu
    n_ru = 2 * n_du

    eta = np.zeros((n_du, n_cu), dtype=np.int8)
    for u in range(n_du):
        eta[u, u // 2] = 1

    zeta = np.zeros((n_ru, n_du), dtype=np.int8)
    for r in range(n_ru):
        parent = r // 2
        sibling = parent + 1 if parent % 2 == 0 else parent - 1
        zeta[r, parent] = 1
        zeta[r, sibling] = 1

    lo, hi = config.dist_bounds_km
    dist = np.full((n_ru, n_du), np.nan)
    for r in range(n_ru):
        for u in range(n_du):
            if zeta[r, u]:
                dist[r, u] = rng.uniform(lo, hi)

    return Topology(
        cu_ids=tuple(range(n_cu)),
        du_ids=tuple(range(n_du)),
        ru_ids=tuple(range(n_ru)),
        zeta=zeta,
        eta=eta,
        dist_ru=dist,
    )


def _draw_positions(rng: np.random.Generator, config: GeneratorConfig, ru_pts: np.ndarray) -> np.ndarray:
    """User positions with guaranteed nonempty coverage (rejection sampling)."""
    width, height = _area_extent(ru_pts.shape[0], config.grid_spacing_km)
    radius = config.coverage_radius_km
    pos = np.empty((config.n_users, 2))
    for i in range(config.n_users):
        for attempt in range(_RESAMPLE_CAP):
            cand = rng.uniform((0.0, 0.0), (width, height))
            if np.any(np.hypot(*(ru_pts - cand).T) <= radius):
                pos[i] = cand
                break
        else:
            raise RuntimeError(
                f"could not place user {i} inside any RU coverage after {_RESAMPLE_CAP} tries; "
                "increase coverage_radius_km"
            )
    return pos


def sample_scenarios(topology: Topology, config: GeneratorConfig) -> list[Scenario]:
    """Independent joint draws of positions and per-user service classes."""
    rng = np.random.default_rng([config.seed, 1])
    ru_pts = _ru_grid(topology.n_ru, config.grid_spacing_km)
    radius = config.coverage_radius_km
    mix = np.asarray(config.service_mix)

    shared = _draw_positions(rng, config, ru_pts) if config.shared_positions else None
    scenarios = []
    for s in range(config.n_scenarios):
        pos = shared if shared is not None else _draw_positions(rng, config, ru_pts)
        coverage = np.zeros((config.n_users, topology.n_ru), dtype=np.int8)
        for i in range(config.n_users):
            coverage[i] = np.hypot(*(ru_pts - pos[i]).T) <= radius
        classes = rng.choice(len(SERVICE_CLASSES), size=config.n_users, p=mix)
        delay = np.array([SERVICE_CLASSES[k].delay_budget for k in classes])
        traffic = np.array([SERVICE_CLASSES[k].traffic for k in classes])
        scenarios.append(Scenario(id=s, coverage=coverage, delay_req=delay, traffic=traffic))
    return scenarios


def generate_instance(config: GeneratorConfig, params: ProblemParams | None = None) -> ProblemInstance:
    topology = generate_topology(config)
    scenarios = sample_scenarios(topology, config)
    return ProblemInstance(
        params=params if params is not None else ProblemParams(),
        topology=topology,
        n_users=config.n_users,
        scenarios=tuple(scenarios),
    )


def restrict_users(instance: ProblemInstance, n_users: int) -> ProblemInstance:
    """Instance over the first ``n_users`` users; topology unchanged."""
    if not (1 <= n_users <= instance.n_users):
        raise ValueError("n_users outside the instance's user range")
    scenarios = tuple(
        Scenario(
            id=sc.id,
            coverage=sc.coverage[:n_users].copy(),
            delay_req=sc.delay_req[:n_users].copy(),
            traffic=sc.traffic[:n_users].copy(),
        )
        for sc in instance.scenarios
    )
    return ProblemInstance(instance.params, instance.topology, n_users, scenarios)


# -- instance files ----------------------------------------------------------


def _instance_to_dict(instance: ProblemInstance) -> dict:
    p = instance.params
    t = instance.topology
    return {
        "params": {
            "f_a": p.f_a,
            "f_b": p.f_b,
            "f_c": p.f_c,
            "kappa": p.kappa,
            "sigma": p.sigma,
            "d_split_edge": p.d_split_edge,
            "d_split_central": p.d_split_central,
            "delta": p.delta,
            "gamma": p.gamma,
        },
        "topology": {
            "cu_ids": list(t.cu_ids),
            "du_ids": list(t.du_ids),
            "ru_ids": list(t.ru_ids),
            "zeta": t.zeta.tolist(),
            "eta": t.eta.tolist(),
            "dist_ru": [[None if math.isnan(d) else d for d in row] for row in t.dist_ru.tolist()],
        },
        "n_users": instance.n_users,
        "scenarios": [
            {
                "id": sc.id,
                "phi": sc.coverage.tolist(),
                "pi": sc.delay_req.tolist(),
                "omega": sc.traffic.tolist(),
            }
            for sc in instance.scenarios
        ],
    }


def write_instance(instance: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


def read_instance(path) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}") from exc

    try:
        params = ProblemParams(**raw["params"])
        topo_raw = raw["topology"]
        dist = np.array(
            [[math.nan if d is None else float(d) for d in row] for row in topo_raw["dist_ru"]], dtype=float
        )
        topology = Topology(
            cu_ids=tuple(topo_raw["cu_ids"]),
            du_ids=tuple(topo_raw["du_ids"]),
            ru_ids=tuple(topo_raw["ru_ids"]),
            zeta=np.array(topo_raw["zeta"], dtype=np.int8),
            eta=np.array(topo_raw["eta"], dtype=np.int8),
            dist_ru=dist,
        )
        n_users = int(raw["n_users"])
        scenarios = []
        for sraw in raw["scenarios"]:
            sc = Scenario(
                id=int(sraw["id"]),
                coverage=np.array(sraw["phi"], dtype=np.int8),
                delay_req=np.array(sraw["pi"], dtype=float),
                traffic=np.array(sraw["omega"], dtype=float),
            )
            scenarios.append(sc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc

    n_r, n_u = topology.n_ru, topology.n_du
    if topology.zeta.shape != (n_r, n_u) or topology.dist_ru.shape != (n_r, n_u):
        raise InstanceFormatError(f"{path}: zeta/dist_ru shape does not match RU/DU id lists")
    if topology.eta.shape != (n_u, topology.n_cu):
        raise InstanceFormatError(f"{path}: eta shape does not match DU/CU id lists")
    for sc in scenarios:
        if sc.coverage.shape != (n_users, n_r):
            raise InstanceFormatError(f"{path}: scenario {sc.id} phi must be {n_users} x {n_r}")
        if sc.delay_req.shape != (n_users,):
            raise InstanceFormatError(f"{path}: scenario {sc.id} pi must have length {n_users}")
        if sc.traffic.shape != (n_users,):
            raise InstanceFormatError(f"{path}: scenario {sc.id} omega must have length {n_users}")
    return ProblemInstance(params=params, topology=topology, n_users=n_users, scenarios=tuple(scenarios))
