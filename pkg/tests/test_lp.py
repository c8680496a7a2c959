import math

import numpy as np
import pytest

from oracles import random_lp, vertex_enumeration_minimum
from oranplan.lp import EQ, GE, LE, LinearModel, LpStatus, relax, solve_lp


def test_single_variable_bound_constraint():
    m = LinearModel()
    x = m.add_variable("x", 0.0, 10.0)
    m.add_constraint({x: 1.0}, GE, 3.0, "floor")
    m.set_objective({x: 1.0})
    out = solve_lp(m)
    assert out.status == LpStatus.OPTIMAL
    assert out.objective == pytest.approx(3.0, abs=1e-9)
    assert out.primal[x] == pytest.approx(3.0, abs=1e-9)
    assert out.duals[0] == pytest.approx(1.0, abs=1e-9)


def test_textbook_infeasible_pair_yields_farkas_ray():
    m = LinearModel()
    x = m.add_variable("x", 0.0, 10.0)
    m.add_constraint({x: 1.0}, GE, 1.0, "ge1")
    m.add_constraint({x: 1.0}, LE, 0.0, "le0")
    m.set_objective({x: 1.0})
    out = solve_lp(m)
    assert out.status == LpStatus.INFEASIBLE
    ray = out.farkas
    assert ray is not None and np.all(ray >= 0)
    # the two weights aggregate the rows to an impossible inequality; for
    # this pair they must be (essentially) equal
    assert ray[0] == pytest.approx(ray[1], rel=1e-9)
    assert ray[0] > 0


def _farkas_margin(model: LinearModel, ray: np.ndarray) -> float:
    """ray . b_oriented minus the box supremum of the aggregated row."""
    _, A, b, senses, lb, ub = model.dense()
    raw = ray.copy()
    for i, s in enumerate(senses):
        if s == LE:
            raw[i] = -ray[i]
    agg = raw @ A
    sup = 0.0
    for j in range(len(agg)):
        if abs(agg[j]) < 1e-11:
            continue
        sup += agg[j] * (ub[j] if agg[j] > 0 else lb[j])
    return float(raw @ b) - sup


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(7)
    n_optimal = n_infeasible = 0
    for _ in range(60):
        model = random_lp(rng, n_vars=int(rng.integers(2, 5)), n_cons=int(rng.integers(2, 7)))
        want_status, want_obj = vertex_enumeration_minimum(model)
        out = solve_lp(model)
        assert out.status.value == want_status
        if want_status == "optimal":
            n_optimal += 1
            assert out.objective == pytest.approx(want_obj, abs=1e-7)
        else:
            n_infeasible += 1
            assert _farkas_margin(model, out.farkas) >= 1e-7
    assert n_optimal >= 10 and n_infeasible >= 10  # the sample exercises both paths


def test_duality_and_complementary_slackness_on_random_models():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(40):
        model = random_lp(rng, n_vars=int(rng.integers(2, 6)), n_cons=int(rng.integers(2, 8)))
        out = solve_lp(model)
        if out.status != LpStatus.OPTIMAL:
            continue
        checked += 1
        c, A, b, senses, lb, ub = model.dense()
        x, y = out.primal, out.duals
        # dual sign convention and complementary slackness per row
        for i in range(len(b)):
            slack = A[i] @ x - b[i]
            if senses[i] == LE:
                assert y[i] <= 1e-9
            elif senses[i] == GE:
                assert y[i] >= -1e-9
            if senses[i] != EQ:
                assert abs(y[i] * slack) <= 1e-6
        # strong duality: c'x equals y'b plus reduced-cost bound terms
        dj = c - y @ A
        dual_obj = float(y @ b)
        for j in range(len(c)):
            if dj[j] > 1e-11:
                dual_obj += dj[j] * lb[j]
            elif dj[j] < -1e-11:
                dual_obj += dj[j] * ub[j]
        assert abs(dual_obj - out.objective) <= 1e-6 * (1 + abs(out.objective))
        # interior variables price out to zero
        for j in range(len(c)):
            if lb[j] + 1e-7 < x[j] < ub[j] - 1e-7:
                assert abs(dj[j]) <= 1e-6
    assert checked >= 15


def test_determinism_bitwise():
    rng = np.random.default_rng(5)
    for _ in range(10):
        model = random_lp(rng, 4, 6)
        a = solve_lp(model)
        b = solve_lp(model)
        assert a.status == b.status
        if a.status == LpStatus.OPTIMAL:
            assert a.objective == b.objective
            assert np.array_equal(a.primal, b.primal)
            assert np.array_equal(a.duals, b.duals)
        elif a.status == LpStatus.INFEASIBLE:
            assert np.array_equal(a.farkas, b.farkas)


def test_binaries_rejected():
    m = LinearModel()
    m.add_variable("x", 0.0, 1.0, kind="binary")
    m.set_objective({0: 1.0})
    with pytest.raises(ValueError):
        solve_lp(m)


def test_no_constraints_settles_on_bounds():
    m = LinearModel()
    x = m.add_variable("x", -2.0, 5.0)
    y = m.add_variable("y", 0.0, 3.0)
    m.set_objective({x: 1.0, y: -1.0})
    out = solve_lp(m)
    assert out.status == LpStatus.OPTIMAL
    assert out.objective == pytest.approx(-5.0, abs=1e-9)
    assert out.primal[x] == pytest.approx(-2.0)
    assert out.primal[y] == pytest.approx(3.0)


def test_unbounded_detected():
    m = LinearModel()
    x = m.add_variable("x", 0.0, math.inf)
    m.add_constraint({x: 1.0}, GE, 1.0, "r")
    m.set_objective({x: -1.0})
    out = solve_lp(m)
    assert out.status == LpStatus.UNBOUNDED


def test_equality_rows_free_duals():
    m = LinearModel()
    x = m.add_variable("x", 0.0, 10.0)
    y = m.add_variable("y", 0.0, 10.0)
    m.add_constraint({x: 1.0, y: 1.0}, EQ, 4.0, "sum")
    m.set_objective({x: 2.0, y: 3.0})
    out = solve_lp(m)
    assert out.status == LpStatus.OPTIMAL
    assert out.objective == pytest.approx(8.0, abs=1e-9)
    assert out.duals[0] == pytest.approx(2.0, abs=1e-9)


def test_relax_keeps_structure():
    m = LinearModel()
    m.add_variable("b", 0.0, 1.0, kind="binary")
    m.add_variable("x", 0.0, 2.0)
    m.add_constraint({0: 1.0, 1: 1.0}, LE, 2.0, "r")
    m.set_objective({0: -1.0, 1: -1.0})
    r = relax(m)
    assert [v.kind for v in r.variables] == ["continuous", "continuous"]
    assert [v.name for v in r.variables] == ["b", "x"]
    assert r.constraints == m.constraints
    r2 = relax(r)
    assert [v.kind for v in r2.variables] == ["continuous", "continuous"]


def test_model_validation_errors():
    m = LinearModel()
    m.add_variable("x", 0.0, 1.0)
    with pytest.raises(ValueError):
        m.add_variable("x", 0.0, 1.0)  # duplicate name
    with pytest.raises(ValueError):
        m.add_variable("bad", 0.0, 0.5, kind="binary")
    with pytest.raises(ValueError):
        m.add_constraint({0: math.inf}, LE, 1.0)
    with pytest.raises(ValueError):
        m.add_constraint({0: 1.0}, LE, math.nan)
    with pytest.raises(ValueError):
        m.add_constraint({0: 1.0}, "!!", 1.0)


def test_text_dump_mentions_rows_and_bounds():
    m = LinearModel("demo")
    x = m.add_variable("x", 0.0, 4.0)
    m.add_constraint({x: 2.0}, LE, 3.0, "cap")
    m.set_objective({x: 1.0})
    text = m.to_text()
    assert "cap" in text and "minimize" in text and "x" in text
