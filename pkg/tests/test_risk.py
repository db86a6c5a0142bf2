"""Monte Carlo replay: shortfall accounting, LORP/ERNS aggregation and the comparison table."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesrisk.dispatch import CcoConfig, build_problem, solve_dispatch
from gesrisk.errors import RiskError
from gesrisk.risk import (
    CAUSES,
    ORDER_COLUMN,
    RiskReport,
    assess_risk,
    replay_dispatch,
    risk_from_realizations,
    summarize_comparison,
)
from gesrisk.unit_model import (Horizon, Realization, RealizationBatch, UncertaintySpec, UnitSchedule,
                                sample_fleet_realization, spec_from_widths)

from helpers import flat_prices, storage_params, two_bus_case, unit
from oracles import ENUM_SCHED, P_ON, enumeration, enumeration_exact


def _replay_one(sched, real, spec=None, T=None):
    T = T or sched.periods
    u = unit(real.params, spec)
    return replay_dispatch([sched], [real], [u], flat_prices(np.ones(T)), Horizon(T))


def test_matching_realization_has_no_events():
    p = storage_params(T=3)
    sched = UnitSchedule(np.array([2.0, 0.0, 0.0]), np.array([0.0, 1.0, 1.0]))
    events, _ = _replay_one(sched, Realization(p, np.ones(3, dtype=bool)))
    assert events == []


def test_unavailable_period():
    p = storage_params(T=2)
    sched = UnitSchedule(np.zeros(2), np.array([5.0, 0.0]))
    events, reps = _replay_one(sched, Realization(p, np.array([False, True])))
    assert len(events) == 1
    ev = events[0]
    assert (ev.period, ev.cause) == (0, "unavailable")
    assert ev.shortfall == pytest.approx(5.0)
    assert ev.delivered_dis == 0.0


def test_power_limit_clip():
    p = storage_params(T=1, p_max=5.0).replace(p_dis_max=np.array([3.0]))
    sched = UnitSchedule(np.zeros(1), np.array([5.0]))
    events, reps = _replay_one(sched, Realization(p, np.ones(1, dtype=bool)))
    assert len(events) == 1
    assert events[0].cause == "power-limit"
    assert events[0].shortfall == pytest.approx(2.0)
    assert events[0].delivered_dis == pytest.approx(3.0)
    # forward simulation runs on delivered power
    assert reps[0].soc[0, 1] == pytest.approx(0.5 - 3.0 / 10.0)


def test_soc_limit_cut():
    # 4 kWh into a 10 kWh unit at 0.5 with a 0.7 ceiling: 2 kWh cannot be absorbed.
    p = storage_params(T=1, soc_max=0.7)
    sched = UnitSchedule(np.array([4.0]), np.zeros(1))
    events, reps = _replay_one(sched, Realization(p, np.ones(1, dtype=bool)))
    assert events[0].cause == "soc-limit"
    assert events[0].shortfall == pytest.approx(2.0)
    assert reps[0].soc[0, 1] == pytest.approx(0.7)


def test_collapsed_band_sheds_everything():
    p = storage_params(T=2, soc_min=0.45, soc_max=0.55)
    sched = UnitSchedule(np.array([1.0, 1.0]), np.zeros(2))
    spec = UncertaintySpec(nu=1.0)  # D = 0.1 after period 0 closes the band
    events, reps = _replay_one(sched, Realization(p, np.ones(2, dtype=bool)), spec)
    assert reps[0].collapsed[0].all()
    assert {e.cause for e in events} == {"boundary-collapse"}
    assert sum(e.shortfall for e in events) == pytest.approx(2.0)


def test_events_respect_invariants():
    p = storage_params(T=6, soc_min=0.3, soc_max=0.7, eta_ch=0.9, eta_dis=0.9)
    spec = spec_from_widths(p, soc_std=0.05, power_rel_std=0.2, p_avail=0.7, nu=0.05)
    u = unit(p, spec)
    sched = UnitSchedule(np.array([4.0, 0, 3, 0, 0, 5]), np.array([0, 5.0, 0, 4, 4, 0]))
    for s in range(50):
        real = sample_fleet_realization([u], 9, 3, s)
        events, _ = replay_dispatch([sched], real, [u], flat_prices(np.ones(6)), Horizon(6))
        for e in events:
            assert e.shortfall > 0
            assert e.cause in CAUSES
            assert e.delivered_ch <= e.scheduled_ch + 1e-12
            assert e.delivered_dis <= e.scheduled_dis + 1e-12


def test_shape_mismatch():
    p = storage_params(T=2)
    with pytest.raises(RiskError):
        replay_dispatch([UnitSchedule.idle(2)], [], [unit(p)], flat_prices(np.ones(2)), Horizon(2))


# ---- aggregation ---------------------------------------------------------

def test_degenerate_spec_has_no_risk():
    p = storage_params(T=4)
    u = unit(p, spec_from_widths(p))
    sched = UnitSchedule(np.array([2.0, 0, 0, 0]), np.array([0, 0, 1.0, 1.0]))
    rep = assess_risk([sched], [u], flat_prices(np.ones(4)), Horizon(4), samples=50, seed=1)
    assert rep.lorp == 0.0 and rep.erns == 0.0
    assert rep.security_level == 1.0


def test_never_available_unit():
    p = storage_params(T=4)
    u = unit(p, UncertaintySpec(p_avail=np.array(0.0)))
    sched = UnitSchedule(np.zeros(4), np.full(4, 1.0))
    rep = assess_risk([sched], [u], flat_prices(np.ones(4)), Horizon(4), samples=20, seed=1)
    assert rep.lorp == 1.0
    assert rep.erns == pytest.approx(4.0)
    assert rep.shortfall_by_cause["unavailable"] == pytest.approx(4.0)


def test_enumeration_oracle():
    u, outcomes, w = enumeration()
    rep = risk_from_realizations([ENUM_SCHED], outcomes, [u], flat_prices(np.ones(2)), Horizon(2), weights=w)
    lorp, erns = enumeration_exact()
    assert rep.lorp == pytest.approx(lorp, abs=1e-15)
    assert rep.erns == pytest.approx(erns, abs=1e-15)
    assert rep.lorp_by_period == pytest.approx([1 - P_ON, 1 - P_ON], abs=1e-15)


def test_monte_carlo_converges_to_enumeration():
    u, _, _ = enumeration()
    exact, _ = enumeration_exact()
    M = 400
    bound = 3 * math.sqrt(exact * (1 - exact) / M)
    hits = sum(abs(assess_risk([ENUM_SCHED], [u], flat_prices(np.ones(2)), Horizon(2), M, seed).lorp - exact)
               <= bound for seed in range(200))
    assert hits >= 0.99 * 200


def test_weights_validated():
    u, outcomes, w = enumeration()
    with pytest.raises(RiskError):
        risk_from_realizations([ENUM_SCHED], outcomes, [u], flat_prices(np.ones(2)), Horizon(2),
                               weights=w * 2)


def _batch(p, lo, hi, pc, pd, av, S=10.0):
    T = len(lo)
    return RealizationBatch(p_ch_max=pc[None], p_dis_max=pd[None], soc_min=lo[None], soc_max=hi[None],
                            beta=np.full((1, T), p.soc0), capacity=np.array([S]), eta_ch=np.array([1.0]),
                            eta_dis=np.array([1.0]), self_discharge=np.array([0.0]),
                            soc0=np.array([p.soc0]), available=av[None])


vec = st.lists(st.floats(0, 1), min_size=5, max_size=5).map(np.array)


@settings(max_examples=200, deadline=None)
@given(vec, vec, vec, vec, vec, vec, st.floats(0.2, 0.8), st.floats(0, 0.05))
def test_widening_never_adds_shortfall_lossless(ch, dis, tight, widen, avail, extra, soc0, nu):
    p = storage_params(T=5, soc0=soc0)
    sched = UnitSchedule(5 * ch * (ch > 0.5), 5 * dis * (ch <= 0.5))
    lo, hi = 0.4 * tight, 0.6 + 0.4 * tight[::-1]
    pc, pd = 5 * tight, 5 * tight[::-1]
    av = avail > 0.3
    narrow = _batch(p, lo, hi, pc, pd, av)
    wide = _batch(p, np.maximum(lo - 0.1 * widen, 0), np.minimum(hi + 0.1 * widen, 1), pc + extra,
                  pd + widen, av | (extra > 0.5))
    u = unit(p, UncertaintySpec(nu=nu))
    a = risk_from_realizations([sched], [narrow], [u], flat_prices(np.ones(5)), Horizon(5))
    b = risk_from_realizations([sched], [wide], [u], flat_prices(np.ones(5)), Horizon(5))
    assert b.erns <= a.erns + 1e-9
    assert b.scenario_shortfall[0] <= a.scenario_shortfall[0] + 1e-9


def test_report_is_deterministic_and_sample_prefix_stable():
    p = storage_params(T=4)
    u = [unit(p, spec_from_widths(p, soc_std=0.1, power_rel_std=0.2, p_avail=0.9, nu=0.02), unit_id="a"),
         unit(p, spec_from_widths(p, soc_std=0.1, p_avail=0.8), unit_id="b")]
    scheds = [UnitSchedule(np.array([3.0, 0, 0, 0]), np.array([0, 0, 2.0, 1.0]))] * 2
    prices = flat_prices(np.ones(4))
    a = assess_risk(scheds, u, prices, Horizon(4), 300, 5)
    b = assess_risk(scheds, u, prices, Horizon(4), 300, 5)
    assert a.to_dict() == b.to_dict()
    c = assess_risk(scheds, u, prices, Horizon(4), 100, 5)
    assert c.scenario_shortfall == a.scenario_shortfall[:100]
    assert 0 <= a.lorp <= 1 and a.erns >= 0


def test_report_round_trip():
    u, outcomes, w = enumeration()
    rep = risk_from_realizations([ENUM_SCHED], outcomes, [u], flat_prices(np.ones(2)), Horizon(2), weights=w)
    again = RiskReport.from_dict(rep.to_dict())
    assert again == rep


def test_zero_samples_rejected():
    p = storage_params(T=2)
    with pytest.raises(RiskError):
        assess_risk([UnitSchedule.idle(2)], [unit(p)], flat_prices(np.ones(2)), Horizon(2), samples=0)


# ---- comparison table -----------------------------------------------------

@pytest.fixture(scope="module")
def three_variants():
    p = storage_params(T=2, soc_min=0.1, soc_max=0.9)
    u = unit(p, spec_from_widths(p, soc_std=0.05, power_rel_std=0.1, nu=0.05))
    case = two_bus_case(load_kw=(100.0, 80.0))
    prices = flat_prices([0.4, 1.0])
    sols, reps = {}, {}
    for m in ("M1", "M2", "M3"):
        cfg = CcoConfig(model=m, n_scenarios=8, n_grid_scenarios=0)
        sols[m] = solve_dispatch(build_problem(case, [u], prices, cfg))
        reps[m] = assess_risk(sols[m].schedule.units, [u], prices, Horizon(2), 200, 3)
    return sols, reps


def test_single_row(three_variants):
    sols, reps = three_variants
    table = summarize_comparison({"M1": reps["M1"]}, {"M1": sols["M1"]})
    assert len(table.rows) == 1
    assert ORDER_COLUMN not in table.columns


def test_three_rows_flag_cost_order(three_variants):
    sols, reps = three_variants
    table = summarize_comparison(reps, sols)
    assert table.column("variant") == ["M1", "M2", "M3"]
    costs = table.column("cost")
    want = all(a <= b + 1e-6 * abs(b) for a, b in zip(costs, costs[1:]))
    assert table.column(ORDER_COLUMN) == [want] * 3
    assert want


def test_order_flag_detects_violation(three_variants):
    sols, reps = three_variants
    table = summarize_comparison({"M1": reps["M3"], "M3": reps["M1"]}, {"M1": sols["M3"], "M3": sols["M1"]})
    costs = table.column("cost")
    assert table.column(ORDER_COLUMN)[0] == (costs[0] <= costs[1] * (1 + 1e-6))


def test_missing_solution_row(three_variants):
    sols, reps = three_variants
    table = summarize_comparison(reps, {"M1": sols["M1"], "M2": sols["M2"]})
    row = table.rows[2]
    assert row["variant"] == "M3"
    assert row["cost"] is None and row["status"] is None
    assert row["lorp"] == reps["M3"].lorp
