import numpy as np
import pytest

from oranplan.model import ProblemInstance, ProblemParams, Scenario, Topology


def tiny_topology(dist: float = 1.0) -> Topology:
    """1 CU, 2 DUs, 2 RUs; each RU eligible on both DUs."""
    return Topology(
        cu_ids=(0,),
        du_ids=(0, 1),
        ru_ids=(0, 1),
        zeta=np.ones((2, 2), dtype=np.int8),
        eta=np.array([[1], [1]], dtype=np.int8),
        dist_ru=np.full((2, 2), dist),
    )


def single_user_instance(
    *,
    delay: float = 100.0,
    traffic: float = 20.0,
    n_du: int = 1,
    dist: float = 1.0,
    gamma: float = 0.01,
) -> ProblemInstance:
    """One user, one RU, one scenario; RU eligible on every DU."""
    topo = Topology(
        cu_ids=(0,),
        du_ids=tuple(range(n_du)),
        ru_ids=(0,),
        zeta=np.ones((1, n_du), dtype=np.int8),
        eta=np.ones((n_du, 1), dtype=np.int8),
        dist_ru=np.full((1, n_du), dist),
    )
    scenario = Scenario(
        id=0,
        coverage=np.ones((1, 1), dtype=np.int8),
        delay_req=np.array([delay]),
        traffic=np.array([traffic]),
    )
    return ProblemInstance(
        params=ProblemParams(gamma=gamma),
        topology=topo,
        n_users=1,
        scenarios=(scenario,),
    )


@pytest.fixture
def params() -> ProblemParams:
    return ProblemParams()
