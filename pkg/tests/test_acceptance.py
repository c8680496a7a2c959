"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion. The heavy fixtures (the 20-instance small-scale batch and the
4-CU shared-position batch) are module-scoped and reused across criteria.
"""

import time

import numpy as np
import pytest

from oracles import exhaustive_binary_minimum, random_lp, random_milp, vertex_enumeration_minimum
from oranplan.benders import FEASIBILITY, BendersOptions, run_benders, subproblem_lp_value
from oranplan.extensive import solve_extensive, solve_fix_du
from oranplan.lp import solve_lp, solve_milp
from oranplan.studio import GeneratorConfig, generate_instance, restrict_users

EPSILON = 1e-6


def _report(number: int, name: str, ok: bool) -> None:
    print(f"[acceptance] criterion {number} ({name}): {'PASS' if ok else 'FAIL'}")
    assert ok


@pytest.fixture(scope="module")
def small_scale_batch():
    """20 seeded 2-CU instances (3..7 users, 1-2 scenarios) solved 3 ways."""
    runs = []
    for seed in range(20):
        users = 3 + (seed % 5)
        scenarios = 2 if seed % 10 == 7 else 1
        cfg = GeneratorConfig(n_cu=2, n_users=users, n_scenarios=scenarios, seed=seed)
        inst = generate_instance(cfg)
        milp = solve_extensive(inst)
        bd = run_benders(inst, BendersOptions(epsilon=EPSILON))
        abd = run_benders(inst, BendersOptions(epsilon=EPSILON, abd_enabled=True))
        runs.append((inst, milp, bd, abd))
    return runs


@pytest.fixture(scope="module")
def dominance_rich_run():
    """4-CU instance, shared user positions, mixed classes, 220 scenarios."""
    cfg = GeneratorConfig(
        n_cu=4,
        n_users=4,
        n_scenarios=220,
        shared_positions=True,
        service_mix=(0.4, 0.4, 0.2),
        seed=77,
    )
    inst = generate_instance(cfg)
    t0 = time.perf_counter()
    bd = run_benders(inst, BendersOptions(epsilon=EPSILON))
    bd_wall = time.perf_counter() - t0
    t0 = time.perf_counter()
    abd = run_benders(inst, BendersOptions(epsilon=EPSILON, abd_enabled=True))
    abd_wall = time.perf_counter() - t0
    return inst, bd, bd_wall, abd, abd_wall


def test_criterion_1_three_way_equivalence(small_scale_batch):
    n_optimal = 0
    for inst, milp, bd, abd in small_scale_batch:
        if bd.status == "optimal":
            n_optimal += 1
            assert abs(bd.plan.objective - milp.objective) <= 1e-6
            assert abd.plan is not None
            assert abs(abd.plan.objective - bd.plan.objective) <= 1e-9
        else:
            # never mislabeled: the certified gap really is open
            assert bd.status == "gap-open"
            assert bd.gap > EPSILON
            assert bd.lower_bound <= milp.objective + 1e-9
            if bd.plan is not None:
                assert bd.plan.objective >= milp.objective - 1e-9
    _report(1, "three-way equivalence", n_optimal >= 18)


def test_criterion_2_fix_du_arithmetic():
    cfg = GeneratorConfig(n_cu=2, n_users=12, n_scenarios=2, seed=9)
    inst = generate_instance(cfg)
    plan = solve_fix_du(inst)
    ok = (
        41.00 <= plan.objective <= 41.30
        and plan.capacity_term == pytest.approx(40.96, abs=1e-9)
        and 0.25 <= plan.latency_term <= 0.30
    )
    _report(2, "Fix-DU arithmetic", ok)


def test_criterion_3_abd_work_reduction(dominance_rich_run):
    inst, bd, bd_wall, abd, abd_wall = dominance_rich_run

    def cumulative_rows(res):
        total = rows = 0
        for row in res.trace:
            rows += row.n_feas_cuts + row.n_opt_cuts
            total += rows
        return total

    assert len(abd.filtered_pairs) > 0
    assert cumulative_rows(abd) < cumulative_rows(bd)
    assert abd.iterations <= bd.iterations + 2
    assert bd.plan is not None and abd.plan is not None
    assert abs(bd.plan.objective - abd.plan.objective) <= 1e-9
    ok_wall = abd_wall <= bd_wall
    print(
        f"[acceptance]   criterion 3 detail: BD {bd_wall:.1f}s / ABD {abd_wall:.1f}s, "
        f"filtered {len(abd.filtered_pairs)} cuts, iterations {bd.iterations}/{abd.iterations}"
    )
    _report(3, "ABD work reduction", ok_wall)


def test_criterion_4_cut_soundness(small_scale_batch):
    audited = 0
    for inst, _, bd, abd in small_scale_batch:
        for res in (bd, abd):
            if res.plan is None:
                continue
            p_star = res.plan.p
            for cut in res.cuts:
                if cut.kind == FEASIBILITY:
                    assert cut.lhs(p_star) <= 1e-6
                    assert cut.lhs(cut.spawn_p) > 0.0  # violated where spawned
                else:
                    sp_val = subproblem_lp_value(inst, cut.scenario, p_star).objective
                    assert cut.lhs(p_star) <= sp_val + 1e-6
                audited += 1
    _report(4, "cut soundness audit", audited > 0)


def test_criterion_5_filter_soundness(dominance_rich_run):
    inst, _, _, abd, _ = dominance_rich_run
    rng = np.random.default_rng(123)
    n_du = inst.topology.n_du
    counterexamples = 0
    assert abd.filtered_pairs
    for dropped, retainer in abd.filtered_pairs:
        samples = rng.uniform(0.0, inst.params.kappa, size=(100, n_du))
        for p in samples:
            if retainer.lhs(p) <= 0.0 and dropped.lhs(p) > 1e-8:
                counterexamples += 1
    _report(5, "filter soundness", counterexamples == 0)


def test_criterion_6_bound_monotonicity(small_scale_batch, dominance_rich_run):
    all_runs = [r for _, _, bd, abd in small_scale_batch for r in (bd, abd)]
    all_runs += [dominance_rich_run[1], dominance_rich_run[3]]
    for res in all_runs:
        lbs = [row.lb for row in res.trace]
        ubs = [row.ub for row in res.trace]
        assert all(a <= b + 1e-12 for a, b in zip(lbs, lbs[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(ubs, ubs[1:]))
        if res.status == "optimal":
            assert res.upper_bound - res.lower_bound <= EPSILON
    _report(6, "bound monotonicity", True)


def test_criterion_7_capacity_monotonicity():
    cfg = GeneratorConfig(n_cu=2, n_users=40, n_scenarios=1, seed=50)
    inst = generate_instance(cfg)
    sums = []
    for k in (10, 20, 40):
        plan = solve_extensive(restrict_users(inst, k), capacity_only=True)
        sums.append(float(plan.p.sum()))
    print(f"[acceptance]   criterion 7 detail: total capacity {sums}")
    _report(7, "capacity monotonicity", sums[0] <= sums[1] + 1e-6 and sums[1] <= sums[2] + 1e-6)


def test_criterion_8_engine_oracles():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        model = random_lp(rng, n_vars=int(rng.integers(2, 6)), n_cons=int(rng.integers(2, 9)))
        want_status, want_obj = vertex_enumeration_minimum(model)
        got = solve_lp(model)
        assert got.status.value == want_status
        if want_obj is not None:
            assert abs(got.objective - want_obj) <= 1e-7
    for _ in range(100):
        model = random_milp(
            rng,
            n_bin=int(rng.integers(1, 9)),
            n_cont=int(rng.integers(0, 3)),
            n_cons=int(rng.integers(2, 10)),
        )
        want_status, want_obj = exhaustive_binary_minimum(model)
        got = solve_milp(model)
        assert got.status.value == want_status
        if want_obj is not None:
            assert abs(got.objective - want_obj) <= 1e-7
    _report(8, "LP/MILP engine oracles", True)


def test_criterion_9_urllc_served_at_edge(small_scale_batch):
    checked = 0
    for inst, milp, bd, abd in small_scale_batch:
        plans = [milp] + [r.plan for r in (bd, abd) if r.plan is not None]
        for plan in plans:
            for s, sc in enumerate(inst.scenarios):
                asg = plan.assignments[s]
                for i in range(inst.n_users):
                    if sc.delay_req[i] > 10.0:
                        continue
                    r = int(np.argmax(asg.lam[i]))
                    u = int(np.argmax(asg.theta[r]))
                    assert asg.lam[i, r] == 1 and asg.theta[r, u] == 1
                    assert asg.psi[r, u] == 0
                    checked += 1
    _report(9, "split-forcing for uRLLC", checked > 0)
