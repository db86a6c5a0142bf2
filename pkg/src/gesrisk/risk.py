"""Out-of-sample Monte Carlo replay of a fixed schedule: LORP and ERNS.

A scenario realizes every unit's parameters, availability and (by default)
its decision-dependent bounds, evaluated at the scheduled powers. Each
unit-period is projected in a fixed order: availability, then power limits,
then the SOC bounds. Power that cannot be delivered, plus any residual SOC
excess, counts as shortfall energy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .dispatch.scenarios import RISK_STREAM
from .errors import RiskError
from .unit_model import (FleetUnit, Horizon, PriceSchedule, Realization, RealizationBatch,
                         UnitSchedule, sample_fleet_batches)

CAUSES = ("unavailable", "power-limit", "soc-limit", "boundary-collapse")
EVENT_TOL = 1e-6  # kWh; smaller shortfalls are solver noise, not events
Z95 = 1.959963984540054


@dataclass(frozen=True)
class ReliabilityEvent:
    """Undelivered response of one unit in one period of one scenario."""

    scenario: int
    unit_id: str
    period: int
    scheduled_ch: float
    scheduled_dis: float
    delivered_ch: float
    delivered_dis: float
    shortfall: float
    cause: str


@dataclass
class ReplayResult:
    """Replay of one unit over a batch of scenarios (leading axis)."""

    delivered_ch: np.ndarray
    delivered_dis: np.ndarray
    soc: np.ndarray  # (M, T + 1)
    shortfall: np.ndarray  # (M, T) total kWh
    by_cause: dict  # cause -> (M, T) kWh
    collapsed: np.ndarray  # (M, T)

    def cause(self) -> np.ndarray:
        """Dominant cause index per scenario-period (first cause wins ties)."""
        return np.argmax(np.stack([self.by_cause[c] for c in CAUSES]), axis=0)


def replay_unit(sched: UnitSchedule, batch: RealizationBatch, spec, prices: PriceSchedule,
                dt: float, include_edu: bool = True) -> ReplayResult:
    """Replay one unit's schedule against a batch of its realizations."""
    T = sched.periods
    if prices.periods != T or batch.soc_min.shape[1] != T:
        raise RiskError("schedule and realization horizons differ", code="risk.shape")
    z = batch
    M = batch.size
    S, eps = z.capacity, z.self_discharge
    lo, hi = z.soc_min, z.soc_max
    if include_edu and (spec.mu or spec.nu):
        # Discomfort accrues on the committed schedule, in realized capacity units.
        d = np.cumsum((sched.p_ch + sched.p_dis) * dt)[None, :] / S[:, None]
        hi = hi + spec.mu * prices.c_dis[None, :] - spec.nu * d
        lo = lo - spec.mu * prices.c_ch[None, :] + spec.nu * d
    lo, hi = np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)
    collapsed = lo > hi

    ch = np.broadcast_to(sched.p_ch, (M, T)).astype(float)
    dis = np.broadcast_to(sched.p_dis, (M, T)).astype(float)
    by_cause = {c: np.zeros((M, T)) for c in CAUSES}

    # Availability, then realized power limits (both independent of the SOC path).
    off = ~z.available
    by_cause["unavailable"][off] = (ch[off] + dis[off]) * dt
    d_ch = np.where(off, 0.0, np.minimum(ch, z.p_ch_max))
    d_dis = np.where(off, 0.0, np.minimum(dis, z.p_dis_max))
    by_cause["power-limit"] += ((ch - d_ch) + (dis - d_dis)) * dt * ~off
    # A collapsed band admits no consistent response at all.
    by_cause["boundary-collapse"][collapsed] = (d_ch[collapsed] + d_dis[collapsed]) * dt
    d_ch[collapsed] = 0.0
    d_dis[collapsed] = 0.0

    soc = np.empty((M, T + 1))
    soc[:, 0] = z.soc0
    soc_cause = by_cause["soc-limit"]
    for t in range(T):
        nxt = ((1 - eps) * soc[:, t] + z.eta_ch * d_ch[:, t] * dt / S
               - d_dis[:, t] * dt / (S * z.eta_dis) + eps * (z.soc0 - z.beta[:, t]))
        ok = ~collapsed[:, t]
        over = np.where(ok, np.maximum(nxt - hi[:, t], 0.0), 0.0)
        under = np.where(ok, np.maximum(lo[:, t] - nxt, 0.0), 0.0)
        # Cut charging (discharging) first; what remains is unabsorbable energy.
        cut_ch = np.minimum(d_ch[:, t], over * S / (z.eta_ch * dt))
        cut_dis = np.minimum(d_dis[:, t], under * S * z.eta_dis / dt)
        rest = (over - z.eta_ch * cut_ch * dt / S) + (under - cut_dis * dt / (S * z.eta_dis))
        d_ch[:, t] -= cut_ch
        d_dis[:, t] -= cut_dis
        soc_cause[:, t] = (cut_ch + cut_dis) * dt + np.maximum(rest, 0.0) * S
        soc[:, t + 1] = np.where(ok, np.clip(nxt, lo[:, t], hi[:, t]), nxt)
    shortfall = sum(by_cause.values())
    return ReplayResult(d_ch, d_dis, soc, shortfall, by_cause, collapsed)


def replay_dispatch(schedules: Sequence[UnitSchedule], realized: Sequence[Realization],
                    units: Sequence[FleetUnit], prices: PriceSchedule, horizon: Horizon,
                    include_edu: bool = True, scenario: int = 0):
    """Replay a fleet schedule against one joint realization.

    Returns ``(events, replays)``: one event per unit-period with shortfall
    above :data:`EVENT_TOL`, and the per-unit :class:`ReplayResult`.
    """
    if not (len(schedules) == len(realized) == len(units)):
        raise RiskError("schedule, realization and fleet sizes differ", code="risk.shape")
    events, replays = [], []
    for i, (sched, real, unit) in enumerate(zip(schedules, realized, units)):
        if sched.periods != horizon.periods:
            raise RiskError("schedule length differs from the horizon", code="risk.shape")
        rep = replay_unit(sched, RealizationBatch.stack([real]), unit.spec, prices, horizon.dt, include_edu)
        replays.append(rep)
        events.extend(_events(rep, 0, sched, unit.unit_id, scenario))
    return events, replays


def _events(rep: ReplayResult, row: int, sched: UnitSchedule, unit_id: str, scenario: int):
    causes = rep.cause()[row]
    out = []
    for t in np.flatnonzero(rep.shortfall[row] > EVENT_TOL):
        out.append(ReliabilityEvent(int(scenario), unit_id, int(t), float(sched.p_ch[t]),
                                    float(sched.p_dis[t]), float(rep.delivered_ch[row, t]),
                                    float(rep.delivered_dis[row, t]), float(rep.shortfall[row, t]),
                                    CAUSES[causes[t]]))
    return out


@dataclass
class RiskReport:
    """Monte Carlo reliability indices of one schedule.

    Attributes:
        lorp: share of scenarios with at least one event.
        erns: mean shortfall energy per scenario-horizon, kWh.
        lorp_half_width, erns_half_width: 95% normal-approximation half-widths.
        lorp_by_period: share of scenarios with an event in each period.
        shortfall_by_period: mean shortfall per period, kWh.
        shortfall_by_cause: mean shortfall per cause, kWh.
        events_by_cause: mean event count per cause.
        scenario_shortfall: total shortfall of every scenario, kWh.
        samples, seed: Monte Carlo metadata (seed is None for enumeration).
        security_level: ``1 - lorp``.
    """

    lorp: float
    erns: float
    lorp_half_width: float
    erns_half_width: float
    lorp_by_period: list
    shortfall_by_period: list
    shortfall_by_cause: dict
    events_by_cause: dict
    scenario_shortfall: list
    samples: int
    seed: Optional[int]
    include_edu: bool = True
    security_level: float = field(init=False)

    def __post_init__(self):
        self.security_level = 1.0 - self.lorp

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RiskReport":
        data = dict(data)
        data.pop("security_level", None)
        return cls(**data)


def sample_risk_realizations(units: Sequence[FleetUnit], samples: int, seed: int):
    """Per-unit batches of ``samples`` joint draws on the risk stream.

    Scenario ``k`` depends only on ``(seed, k)``, never on ``samples``.
    """
    if samples < 1:
        raise RiskError("need at least one Monte Carlo sample", code="risk.samples")
    return sample_fleet_batches(units, seed, RISK_STREAM, range(samples))


def _as_batches(realizations, n_units):
    """Accept per-unit batches or a list of joint scenarios (lists of realizations)."""
    if realizations and isinstance(realizations[0], RealizationBatch):
        if len(realizations) != n_units:
            raise RiskError("one batch per unit required", code="risk.shape")
        return list(realizations)
    if any(len(r) != n_units for r in realizations):
        raise RiskError("schedule, realization and fleet sizes differ", code="risk.shape")
    return [RealizationBatch.stack([r[i] for r in realizations]) for i in range(n_units)]


def risk_from_realizations(schedules: Sequence[UnitSchedule], realizations, units: Sequence[FleetUnit],
                           prices: PriceSchedule, horizon: Horizon, weights=None,
                           include_edu: bool = True, seed: Optional[int] = None) -> RiskReport:
    """Aggregate replays over explicit scenarios with optional probability weights.

    ``realizations`` is either a list of joint scenarios (each a list with one
    :class:`Realization` per unit) or one :class:`RealizationBatch` per unit.
    """
    if len(schedules) != len(units):
        raise RiskError("schedule and fleet sizes differ", code="risk.shape")
    if len(realizations) < 1:
        raise RiskError("need at least one scenario", code="risk.samples")
    batches = _as_batches(realizations, len(units))
    M = batches[0].size
    w = np.full(M, 1.0 / M) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (M,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
        raise RiskError("weights must be a probability vector", code="risk.weights")
    T = horizon.periods
    per_period = np.zeros((M, T))
    hit_period = np.zeros((M, T), dtype=bool)
    cause_energy = {c: np.zeros(M) for c in CAUSES}
    cause_events = {c: np.zeros(M) for c in CAUSES}
    for sched, unit, batch in zip(schedules, units, batches):
        if batch.size != M:
            raise RiskError("batches differ in size", code="risk.shape")
        rep = replay_unit(sched, batch, unit.spec, prices, horizon.dt, include_edu)
        per_period += rep.shortfall
        hit = rep.shortfall > EVENT_TOL
        hit_period |= hit
        dominant = rep.cause()
        for k, c in enumerate(CAUSES):
            cause_energy[c] += rep.by_cause[c].sum(axis=1)
            cause_events[c] += np.sum(hit & (dominant == k), axis=1)
    totals = per_period.sum(axis=1)
    any_event = hit_period.any(axis=1)
    if weights is None:
        # Plain sample means: counts / M keeps LORP exactly in [0, 1].
        def avg(v):
            return np.mean(v, axis=0)
    else:
        def avg(v):
            return w @ v
    lorp = min(float(avg(any_event.astype(float))), 1.0)
    erns = float(avg(totals)) if lorp > 0 else 0.0
    # Normal-approximation half-widths from the (weighted) second moments.
    var_l = max(float(avg((any_event - lorp) ** 2)), 0.0)
    var_e = max(float(avg((totals - erns) ** 2)), 0.0)
    scale = Z95 / math.sqrt(M)
    return RiskReport(
        lorp=lorp, erns=erns,
        lorp_half_width=scale * math.sqrt(var_l), erns_half_width=scale * math.sqrt(var_e),
        lorp_by_period=avg(hit_period.astype(float)).tolist(), shortfall_by_period=avg(per_period).tolist(),
        shortfall_by_cause={c: float(avg(v)) for c, v in cause_energy.items()},
        events_by_cause={c: float(avg(v)) for c, v in cause_events.items()},
        scenario_shortfall=totals.tolist(), samples=M, seed=seed, include_edu=include_edu,
    )


def assess_risk(schedules: Sequence[UnitSchedule], units: Sequence[FleetUnit], prices: PriceSchedule,
                horizon: Horizon, samples: int = 1000, seed: int = 0, include_edu: bool = True,
                realizations=None) -> RiskReport:
    """Monte Carlo LORP/ERNS of a fixed fleet schedule.

    Scenario ``k`` is seeded by counter from ``seed``, so reports do not depend
    on evaluation order. Pass ``realizations`` from
    :func:`sample_risk_realizations` to reuse draws across schedules.
    """
    if realizations is None:
        realizations = sample_risk_realizations(units, samples, seed)
    elif _as_batches(realizations, len(units))[0].size != samples:
        raise RiskError("realizations do not match the sample count", code="risk.samples")
    return risk_from_realizations(schedules, realizations, units, prices, horizon,
                                  include_edu=include_edu, seed=seed)


COMPARISON_COLUMNS = ("variant", "alpha", "status", "cost", "cost_curtailment", "cost_grid",
                      "cost_incentive", "sum_p_dis", "sum_p_ch", "sum_p_grid", "sum_p_lc",
                      "mean_voltage", "lorp", "lorp_half_width", "erns", "erns_half_width")
ORDER_COLUMN = "cost_order_ok"
COST_ORDER_RTOL = 1e-6  # solver-level ties count as ordered


@dataclass(frozen=True)
class ComparisonTable:
    columns: tuple
    rows: list

    def column(self, name):
        return [r.get(name) for r in self.rows]


def solution_totals(solution) -> dict:
    """Schedule totals of a solved dispatch (kW summed over units/buses and periods)."""
    sched = solution.schedule
    base = solution.problem.case.base_kw if solution.problem is not None else 1000.0
    nominal = sched.nominal
    return {
        "cost": solution.objective,
        "cost_curtailment": solution.components.get("curtailment"),
        "cost_grid": solution.components.get("grid"),
        "cost_incentive": solution.components.get("incentive"),
        "sum_p_dis": float(sum(s.p_dis.sum() for s in sched.units)),
        "sum_p_ch": float(sum(s.p_ch.sum() for s in sched.units)),
        "sum_p_grid": float(nominal.p_grid.sum() * base),
        "sum_p_lc": float(nominal.p_lc.sum() * base),
        "mean_voltage": float(np.mean(np.sqrt(np.maximum(nominal.U, 0.0)))),
    }


def summarize_comparison(reports: dict, solutions: dict, alphas: Optional[dict] = None) -> ComparisonTable:
    """One row per variant, sorted by variant name.

    ``solutions`` values are :class:`DispatchSolution` objects or parsed
    ``solution.json`` mappings. A variant without a solution gets risk fields
    only.

    With several variants, ``cost_order_ok`` reports whether costs are
    nondecreasing in variant order among rows that have a cost.
    """
    if not reports and not solutions:
        raise RiskError("nothing to summarize", code="risk.empty")
    names = list(reports) + [k for k in solutions if k not in reports]
    names.sort()
    alphas = alphas or {}
    rows = []
    for name in names:
        row = dict.fromkeys(COMPARISON_COLUMNS)
        row["variant"] = name
        sol = solutions.get(name)
        if isinstance(sol, Mapping):
            # A parsed solution.json.
            row["status"] = sol.get("status")
            row["alpha"] = sol.get("alpha")
            row.update(sol.get("totals") or {})
        elif sol is not None:
            row["status"] = sol.status
            if sol.problem is not None:
                row["alpha"] = sol.problem.cfg.alpha
            if sol.optimal:
                row.update(solution_totals(sol))
        if name in alphas:
            row["alpha"] = alphas[name]
        rep = reports.get(name)
        if rep is not None:
            row.update(lorp=rep.lorp, lorp_half_width=rep.lorp_half_width, erns=rep.erns,
                       erns_half_width=rep.erns_half_width)
        rows.append(row)
    columns = COMPARISON_COLUMNS
    if len(rows) > 1:
        costs = [r["cost"] for r in rows if r["cost"] is not None]
        ok = all(a <= b + COST_ORDER_RTOL * max(1.0, abs(b)) for a, b in zip(costs, costs[1:]))
        for r in rows:
            r[ORDER_COLUMN] = ok
        columns = columns + (ORDER_COLUMN,)
    return ComparisonTable(columns, rows)
