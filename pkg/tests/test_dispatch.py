"""Scenario sizing, problem assembly, conic solve and post-solve diagnostics on small cases."""

import dataclasses
from fractions import Fraction
from math import comb

import numpy as np
import pytest

from gesrisk.dispatch import (
    INFEASIBLE,
    OPTIMAL,
    CcoConfig,
    build_problem,
    extract_schedule,
    required_scenario_count,
    solve_dispatch,
    verify_solution,
)
from gesrisk.errors import DispatchError
from gesrisk.unit_model import Realization, UnitSchedule, simulate_schedule, spec_from_widths

from helpers import flat_prices, single_bus_case, storage_params, two_bus_case, unit
from oracles import arbitrage_oracle, arbitrage_params, arbitrage_problem


# ---- scenario sizing ------------------------------------------------------

def _tail(n, alpha, d):
    return sum(comb(n, i) * alpha ** i * (1 - alpha) ** (n - i) for i in range(d))


def test_scenario_count_trivial():
    assert required_scenario_count(0.5, 0.5, 1) == 1


def test_scenario_count_monotone_in_alpha():
    counts = [required_scenario_count(a, 1e-3, 3) for a in (0.01, 0.05, 0.1, 0.25, 0.45, 0.7)]
    assert counts == sorted(counts, reverse=True)


def test_scenario_count_exact_tail_d10():
    n = required_scenario_count(0.05, 1e-3, 10)
    a, b = Fraction(1, 20), Fraction(1, 1000)
    assert _tail(n, a, 10) <= b < _tail(n - 1, a, 10)


@pytest.mark.parametrize("alpha,n", [(0.05, 135), (0.25, 25), (0.45, 12)])
def test_scenario_count_d1_closed_form(alpha, n):
    # d = 1: smallest N with (1 - alpha)^N <= beta
    assert required_scenario_count(alpha, 1e-3, 1) == n
    assert (1 - alpha) ** n <= 1e-3 < (1 - alpha) ** (n - 1)


def test_scenario_count_cap_and_domain():
    with pytest.raises(DispatchError):
        required_scenario_count(1e-6, 1e-6, 5, cap=1000)
    with pytest.raises(DispatchError):
        required_scenario_count(0.0, 0.5, 1)
    with pytest.raises(DispatchError):
        required_scenario_count(0.1, 0.5, 0)


# ---- problem assembly -------------------------------------------------------

def toy(model, n=3, merge=False, **spec_kw):
    params = storage_params(T=2, capacity=10.0, p_max=5.0, soc_min=0.1, soc_max=0.9)
    widths = dict(soc_std=0.03, power_rel_std=0.05, nu=0.02, mu=0.01)
    widths.update(spec_kw)
    u = unit(params, spec_from_widths(params, **widths), bus=2)
    case = two_bus_case(load_kw=(100.0, 80.0))
    cfg = CcoConfig(model=model, n_scenarios=n, n_grid_scenarios=0, merge_identical=merge, seed=4)
    return build_problem(case, [u], flat_prices([0.4, 1.0]), cfg)


def test_toy_hand_count_m2():
    counts = toy("M2").counts()
    # p_ch, p_dis: 2 + 2; SOC at nominal + 3 scenarios: 4 * 2; curtailment 2 nodes * 2;
    # U 2 * 2; P, Q, I 1 branch * 2 each; grid import P and Q: 2 + 2.
    assert counts["variables"] == 4 + 8 + 4 + 4 + 6 + 4
    assert counts["soc_balance"] == 8
    assert counts["terminal"] == 1
    assert counts["p_balance"] == counts["q_balance"] == 4
    assert counts["voltage_drop"] == 2
    assert counts["eq_rows"] == 8 + 1 + 4 + 4 + 2
    assert counts["power_limit_ch"] == counts["power_limit_dis"] == 3 * 2
    assert counts["ub_rows"] == 12
    assert counts["cones"] == 2


def test_toy_hand_count_m1():
    counts = toy("M1").counts()
    assert counts["variables"] == 4 + 2 + 4 + 4 + 6 + 4
    assert counts["soc_balance"] == 2
    assert counts["power_limit_ch"] == counts["power_limit_dis"] == 2
    assert counts["ub_rows"] == 4


def test_m3_adds_two_bound_rows_per_period_and_scenario():
    m2, m3 = toy("M2").counts(), toy("M3").counts()
    T, N = 2, 3
    assert m3["ub_rows"] - m2["ub_rows"] == 2 * T * N
    assert m3["edu_upper"] == m3["edu_lower"] == T * N
    # the accumulated-throughput auxiliaries are definitions, not bounds
    assert m3["variables"] - m2["variables"] == T
    assert m3["eq_rows"] - m2["eq_rows"] == T


def test_zero_variance_m2_matches_m1_matrices():
    kw = dict(soc_std=0.0, power_rel_std=0.0, nu=0.0, mu=0.0)
    m1, m2 = toy("M1", merge=True, **kw), toy("M2", merge=True, **kw)
    for name in ("A_eq", "A_ub", "A_cone"):
        assert (getattr(m1, name) != getattr(m2, name)).nnz == 0, name
    for name in ("b_eq", "b_ub", "lb", "ub", "c"):
        np.testing.assert_array_equal(getattr(m1, name), getattr(m2, name))


def test_index_map_is_a_partition_and_costs_nonnegative():
    prob = toy("M3")
    cols = np.concatenate([np.ravel(v) for v in prob.var_index.values()])
    np.testing.assert_array_equal(np.sort(cols), np.arange(prob.n_vars))
    assert np.all(prob.c >= 0)
    for A in (prob.A_eq, prob.A_ub, prob.A_cone):
        assert A.shape[1] == prob.n_vars


def test_empty_fleet_is_pure_opf():
    cfg = CcoConfig(model="M2", n_scenarios=2, n_grid_scenarios=0)
    sol = solve_dispatch(build_problem(two_bus_case(), [], flat_prices([0.5, 0.5]), cfg))
    assert sol.status == OPTIMAL
    assert sol.components["incentive"] == pytest.approx(0.0, abs=1e-9)


def test_horizon_mismatch_rejected():
    u = unit(storage_params(T=3))
    with pytest.raises(DispatchError):
        build_problem(two_bus_case(), [u], flat_prices([0.5, 0.5]), CcoConfig(model="M1"))


def test_unknown_variant_and_alpha():
    with pytest.raises(DispatchError):
        CcoConfig(model="M4")
    with pytest.raises(DispatchError):
        CcoConfig(alpha=1.0)


# ---- solve ---------------------------------------------------------------

def test_infeasible_when_demand_exceeds_supply():
    case = two_bus_case(load_kw=(100.0, 100.0)).replace(grid_import_max_kw=50.0)
    u = unit(storage_params(T=2, p_max=5.0), bus=2)
    sol = solve_dispatch(build_problem(case, [u], flat_prices([0.5, 0.5]), CcoConfig(model="M1")))
    assert sol.status == INFEASIBLE
    assert sol.schedule is None


@pytest.fixture(scope="module")
def arbitrage():
    prob = arbitrage_problem()
    return prob, solve_dispatch(prob)


def test_arbitrage_matches_grid_search(arbitrage):
    _, sol = arbitrage
    assert sol.status == OPTIMAL
    coarse = arbitrage_oracle(0.05)
    fine = arbitrage_oracle(0.001)
    assert fine <= coarse
    assert abs(sol.objective - fine) <= 1e-3 * abs(fine)


def test_arbitrage_diagnostics_clean(arbitrage):
    _, sol = arbitrage
    d = sol.diagnostics
    assert d.max_feasibility_residual <= 1e-6
    assert d.max_complementarity <= 1e-6
    assert d.in_sample_violations == 0
    s = sol.schedule.units[0]
    traj = simulate_schedule(arbitrage_params(), s, sol.problem.horizon)
    assert traj.terminal_ok and traj.bounds_ok


@pytest.fixture(scope="module")
def toy_m3():
    prob = toy("M3", n=5)
    return prob, solve_dispatch(prob)


def test_toy_solution_is_exact(toy_m3):
    _, sol = toy_m3
    assert sol.status == OPTIMAL
    assert sol.diagnostics.max_cone_gap_rel <= 1e-4
    assert sol.diagnostics.max_complementarity <= 1e-6
    assert sol.diagnostics.in_sample_violations == 0
    assert not sol.diagnostics.warnings


def _perturbed(sol, prob, name, index, delta):
    x = sol.x.copy()
    x[prob.var_index[name][index]] += delta
    return dataclasses.replace(sol, x=x, schedule=extract_schedule(prob, x))


def test_branch_perturbation_flags_one_residual(toy_m3):
    prob, sol = toy_m3
    bad = _perturbed(sol, prob, "P", (0, 0, 1), 1.0 / prob.case.base_kw)
    d = verify_solution(bad, prob)
    assert d.distflow_flags == [(0, 0, 1)]
    assert any("voltage-drop" in w for w in d.warnings)


def test_inflated_current_breaks_exactness(toy_m3):
    prob, sol = toy_m3
    bad = _perturbed(sol, prob, "I", (0, 0, 0), 0.05)
    d = verify_solution(bad, prob)
    assert (0, 0, 0) in d.cone_flags
    assert not d.exact
    assert any("relaxation inexact" in w for w in d.warnings)


def test_edu_free_m3_reduces_to_m2():
    kw = dict(mu=0.0, nu=0.0)
    a = solve_dispatch(toy("M2", n=5, **kw))
    b = solve_dispatch(toy("M3", n=5, **kw))
    assert abs(b.objective - a.objective) <= 1e-6 * abs(a.objective)


def test_zero_variance_m2_reduces_to_m1():
    kw = dict(soc_std=0.0, power_rel_std=0.0)
    a = solve_dispatch(toy("M1", **kw))
    b = solve_dispatch(toy("M2", n=5, **kw))
    assert abs(b.objective - a.objective) <= 1e-6 * abs(a.objective)


def test_objective_scaling_keeps_the_schedule(arbitrage):
    prob, sol = arbitrage
    for lam in (1e-3, 7.0, 1e3):
        other = solve_dispatch(prob.scaled(lam))
        assert other.objective == pytest.approx(lam * sol.objective, rel=1e-6)
        np.testing.assert_allclose(other.schedule.units[0].p_ch, sol.schedule.units[0].p_ch, atol=1e-5)
        np.testing.assert_allclose(other.schedule.units[0].p_dis, sol.schedule.units[0].p_dis, atol=1e-5)


def test_solve_is_deterministic():
    a = solve_dispatch(toy("M3", n=5))
    b = solve_dispatch(toy("M3", n=5))
    np.testing.assert_array_equal(a.x, b.x)
    assert a.objective == b.objective


# ---- feasible-set nesting --------------------------------------------------

def _tightened_scenarios(params, count, rng):
    """Scenario draws whose limits all sit inside the nominal ones."""
    out = []
    for _ in range(count):
        p = params.replace(
            soc_min=params.soc_min + rng.uniform(0, 0.1, params.periods),
            soc_max=params.soc_max - rng.uniform(0, 0.1, params.periods),
            p_ch_max=params.p_ch_max * rng.uniform(0.7, 1.0, params.periods),
            p_dis_max=params.p_dis_max * rng.uniform(0.7, 1.0, params.periods))
        out.append([Realization(p, np.ones(params.periods, dtype=bool))])
    return out


def test_m2_points_are_m1_feasible():
    rng = np.random.default_rng(5)
    T = 4
    params = storage_params(T=T, capacity=10.0, p_max=4.0, soc_min=0.1, soc_max=0.9, eta_ch=0.95,
                            eta_dis=0.95, eps=0.01)
    u = unit(params, bus=1)
    scenarios = _tightened_scenarios(params, 6, rng)
    vertices = []
    for _ in range(20):
        prices = flat_prices(rng.uniform(0.0, 2.0, T), incentive=0.05)
        prob = build_problem(single_bus_case(np.zeros(T)), [u], prices,
                             CcoConfig(model="M2", n_grid_scenarios=0), scenarios=scenarios)
        sol = solve_dispatch(prob)
        assert sol.status == OPTIMAL
        s = sol.schedule.units[0]
        vertices.append(np.concatenate([s.p_ch, s.p_dis]))
    vertices = np.array(vertices)
    # convex combinations of M2 optima stay in the (convex) M2 set
    for w in rng.dirichlet(np.ones(len(vertices)), size=100):
        x = np.maximum(w @ vertices, 0.0)
        sched = UnitSchedule(x[:T], x[T:])
        assert np.all(sched.p_ch <= params.p_ch_max + 1e-6)
        assert np.all(sched.p_dis <= params.p_dis_max + 1e-6)
        traj = simulate_schedule(params, sched, prob.horizon, tol=1e-6)
        assert traj.bounds_ok and traj.terminal_ok
