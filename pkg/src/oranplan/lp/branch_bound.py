"""Branch and bound over the LP relaxation for models with binary variables.

Node selection is best-bound (ties by creation order) and branching picks the
binary whose relaxation value is closest to one half (ties by lowest variable
index), so two runs on the same model take identical paths.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .linmodel import LinearModel, LpStatus, MilpOutcome
from .simplex import solve_lp_arrays

_INT_TOL = 1e-6
_IMPROVE_TOL = 1e-9


def _most_fractional(x: np.ndarray, binaries: list[int]) -> int | None:
    best_j, best_score = None, _INT_TOL
    for j in binaries:
        frac = x[j] - math.floor(x[j])
        score = min(frac, 1.0 - frac)
        if score > best_score + 1e-12:
            best_j, best_score = j, score
    return best_j


def solve_milp(model: LinearModel, node_limit: int = 200_000) -> MilpOutcome:
    """Exact minimum over binary assignments via LP-based branch and bound."""
    binaries = model.binary_indices()
    c, A, b, senses, lb0, ub0 = model.dense()

    incumbent: np.ndarray | None = None
    inc_obj = math.inf
    nodes = 0
    counter = 0
    limit_hit = False
    # node payload: variable fixes accumulated down the branch
    heap: list[tuple[float, int, dict[int, float]]] = [(-math.inf, counter, {})]

    while heap:
        bound, _, fixes = heapq.heappop(heap)
        if bound >= inc_obj - _IMPROVE_TOL:
            break  # best-bound queue: nothing left can improve
        if nodes >= node_limit:
            limit_hit = True
            heapq.heappush(heap, (bound, counter + 1, fixes))
            break
        nodes += 1

        lb, ub = lb0.copy(), ub0.copy()
        for j, val in fixes.items():
            lb[j] = ub[j] = val
        out = solve_lp_arrays(c, A, b, senses, lb, ub)
        if out.status == LpStatus.INFEASIBLE:
            continue
        if out.status == LpStatus.UNBOUNDED:
            return MilpOutcome(status=LpStatus.UNBOUNDED, nodes=nodes)
        if out.status == LpStatus.ITERATION_LIMIT:
            return MilpOutcome(status=LpStatus.ITERATION_LIMIT, nodes=nodes)
        if out.objective >= inc_obj - _IMPROVE_TOL:
            continue

        branch = _most_fractional(out.primal, binaries)
        if branch is None:
            x = out.primal.copy()
            x[binaries] = np.round(x[binaries])
            incumbent, inc_obj = x, out.objective
            continue
        for val in (0.0, 1.0):
            child = dict(fixes)
            child[branch] = val
            counter += 1
            heapq.heappush(heap, (out.objective, counter, child))

    if limit_hit:
        best_open = min(entry[0] for entry in heap) if heap else inc_obj
        gap = inc_obj - best_open if incumbent is not None else math.inf
        return MilpOutcome(
            status=LpStatus.ITERATION_LIMIT,
            objective=None if incumbent is None else inc_obj,
            primal=incumbent,
            gap=gap,
            nodes=nodes,
        )
    if incumbent is None:
        return MilpOutcome(status=LpStatus.INFEASIBLE, nodes=nodes)
    return MilpOutcome(status=LpStatus.OPTIMAL, objective=inc_obj, primal=incumbent, gap=0.0, nodes=nodes)
