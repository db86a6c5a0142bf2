"""Assembly of the chance-constrained dispatch as an explicit conic program.

The program is kept in matrix form::

    min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub,
                   (A_cone x)[4k] >= ||(A_cone x)[4k+1 : 4k+4]||

Chance constraints are replaced by copies enforced on sampled scenarios.
Unit powers are in kW; network quantities are per unit (see :mod:`gesrisk.grid`).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from ..errors import DispatchError
from ..grid import GridCase
from ..unit_model import FleetUnit, GesParams, Horizon, PriceSchedule, Realization
from .scenarios import ges_scenarios, grid_scenarios, nominal_fleet, required_scenario_count

VARIANTS = ("M1", "M2", "M3")
NOMINAL = -1


@dataclass(frozen=True)
class CcoConfig:
    """Settings of one chance-constrained dispatch run.

    ``n_scenarios="auto"`` sizes the scenario set with
    :func:`required_scenario_count` from ``alpha``, ``confidence`` and
    ``support_dim``. Load/RES scenarios are drawn separately
    (``n_grid_scenarios``) and are shared by all variants.
    """

    model: str = "M2"
    alpha: float = 0.05
    n_scenarios: Union[int, str] = "auto"
    confidence: float = 1e-3
    support_dim: int = 1
    n_grid_scenarios: int = 10
    grid_per_scenario: bool = True
    load_std: float = 0.05
    res_std: float = 0.10
    merge_identical: bool = True
    seed: int = 0
    tol_feas: float = 1e-6
    tol_cone_rel: float = 1e-4
    tol_complementarity: float = 1e-6
    scenario_cap: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "model", str(self.model).upper())
        if self.model not in VARIANTS:
            raise DispatchError(f"unknown model variant {self.model!r}", code="dispatch.variant")
        if not 0 < self.alpha < 1:
            raise DispatchError("alpha must lie in (0, 1)", code="dispatch.alpha")
        if self.n_scenarios != "auto" and (int(self.n_scenarios) != self.n_scenarios
                                           or self.n_scenarios < 1):
            raise DispatchError("scenario count must be >= 1 or 'auto'", code="dispatch.scenarios")

    def scenario_count(self) -> int:
        if self.model == "M1":
            return 0
        if self.n_scenarios == "auto":
            return required_scenario_count(self.alpha, self.confidence, self.support_dim,
                                           cap=self.scenario_cap)
        return int(self.n_scenarios)

    def replace(self, **changes) -> "CcoConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RowBlock:
    """A contiguous family of constraint rows; ``keys[r]`` identifies row ``start + r``."""

    family: str
    start: int
    stop: int
    keys: np.ndarray
    key_names: tuple


@dataclass(frozen=True)
class SocCopy:
    """One SOC trajectory of a unit shared by scenarios with identical dynamics.

    ``members`` lists scenario ids (``NOMINAL`` for the median parameters);
    ``lo``/``hi`` are the intersected bounds over the bounded members.
    """

    unit: int
    index: np.ndarray
    params: GesParams
    members: tuple
    lo: np.ndarray
    hi: np.ndarray
    bounded: bool
    edu: bool


@dataclass
class ProblemDescription:
    model: str
    n_vars: int
    var_index: dict
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    c_parts: dict
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    eq_blocks: list
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    ub_blocks: list
    A_cone: sp.csr_matrix
    cone_keys: np.ndarray
    soc_copies: list
    case: GridCase
    units: list
    prices: PriceSchedule
    horizon: Horizon
    cfg: CcoConfig
    ges_scenarios: list
    nominal: list
    grid_scenarios: list

    @property
    def n_cones(self) -> int:
        return len(self.cone_keys)

    def counts(self) -> dict:
        """Variable and row counts, overall and per constraint family."""
        out = {"variables": self.n_vars, "eq_rows": self.A_eq.shape[0],
               "ub_rows": self.A_ub.shape[0], "cones": self.n_cones}
        for blk in self.eq_blocks + self.ub_blocks:
            out[blk.family] = out.get(blk.family, 0) + blk.stop - blk.start
        return out

    def family_rows(self, family: str):
        """Row indices (into the eq or ub matrix) and keys of one constraint family."""
        blocks = [b for b in self.eq_blocks + self.ub_blocks if b.family == family]
        if not blocks:
            raise KeyError(family)
        rows = np.concatenate([np.arange(b.start, b.stop) for b in blocks])
        return rows, np.vstack([b.keys for b in blocks])

    def scaled(self, factor: float) -> "ProblemDescription":
        """Same feasible set with the objective multiplied by ``factor``."""
        if not factor > 0:
            raise DispatchError("scale factor must be positive", code="dispatch.scale")
        return dataclasses.replace(self, c=self.c * factor,
                                   c_parts={k: v * factor for k, v in self.c_parts.items()})


class _Rows:
    def __init__(self):
        self.m = 0
        self.rows, self.cols, self.vals, self.rhs = [], [], [], []
        self.blocks: list[RowBlock] = []

    def add(self, family, key_names, keys, local_rows, cols, vals, rhs):
        """Append ``len(rhs)`` rows; ``local_rows`` index into the new rows."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        m = len(rhs)
        self.rows.append(np.asarray(local_rows, dtype=np.int64) + self.m)
        self.cols.append(np.asarray(cols, dtype=np.int64))
        self.vals.append(np.asarray(vals, dtype=float))
        self.rhs.append(rhs)
        keys = np.asarray(keys, dtype=np.int64).reshape(m, -1)
        if self.blocks and self.blocks[-1].family == family and self.blocks[-1].stop == self.m:
            last = self.blocks[-1]
            self.blocks[-1] = RowBlock(family, last.start, self.m + m,
                                       np.vstack([last.keys, keys]), key_names)
        else:
            self.blocks.append(RowBlock(family, self.m, self.m + m, keys, key_names))
        self.m += m

    def finish(self, n):
        if not self.rows:
            return sp.csr_matrix((0, n)), np.zeros(0), []
        A = sp.csr_matrix((np.concatenate(self.vals),
                           (np.concatenate(self.rows), np.concatenate(self.cols))), shape=(self.m, n))
        return A, np.concatenate(self.rhs), self.blocks


class _Vars:
    def __init__(self):
        self.n = 0
        self.lb, self.ub = [], []
        self.index = {}

    def add(self, name, shape, lb=-np.inf, ub=np.inf):
        size = int(np.prod(shape))
        idx = np.arange(self.n, self.n + size).reshape(shape)
        self.lb.append(np.broadcast_to(np.asarray(lb, dtype=float), shape).ravel())
        self.ub.append(np.broadcast_to(np.asarray(ub, dtype=float), shape).ravel())
        self.index[name] = idx
        self.n += size
        return idx


def _dynamics_key(p: GesParams) -> tuple:
    return (p.capacity, p.eta_ch, p.eta_dis, p.self_discharge, p.soc0, p.beta.tobytes())


def _group_sources(unit: int, nominal: Realization, scen: Sequence[Realization], merge: bool):
    """Group SOC sources (nominal + scenarios) by identical dynamics."""
    sources = [(NOMINAL, nominal)] + list(enumerate(scen))
    if not merge:
        return [[s] for s in sources]
    groups: dict = {}
    for sid, real in sources:
        groups.setdefault(_dynamics_key(real.params), []).append((sid, real))
    return list(groups.values())


def build_problem(case: GridCase, units: Sequence[FleetUnit], prices: PriceSchedule,
                  cfg: CcoConfig, horizon: Optional[Horizon] = None,
                  scenarios: Optional[list] = None,
                  network: Optional[list] = None) -> ProblemDescription:
    """Assemble the dispatch program for variant ``cfg.model``.

    M1 enforces unit constraints on the median parameters only. M2 enforces
    power limits and SOC bounds on every sampled exogenous scenario; M3 also
    couples the SOC bounds of each scenario copy to the accumulated
    throughput and incentive price through the affine boundary law. The
    terminal condition is imposed on the median trajectory. Network
    constraints hold on the nominal load/RES scenario and on each sampled one.

    ``scenarios`` and ``network`` override the sampled scenario sets.
    """
    units = list(units)
    T = prices.periods
    horizon = horizon or Horizon(T, 1.0)
    dt = horizon.dt
    if horizon.periods != T:
        raise DispatchError("price and horizon lengths differ", code="dispatch.horizon")
    if case.p_load is None:
        raise DispatchError("case has no load series attached", code="dispatch.no_series")
    if case.periods != T:
        raise DispatchError(f"case series have {case.periods} periods, prices {T}",
                            code="dispatch.horizon")
    for u in units:
        if u.params.periods != T:
            raise DispatchError(f"unit {u.unit_id} has {u.params.periods} periods, expected {T}",
                                code="dispatch.horizon")
        case.index_of(u.bus)

    model = cfg.model
    if scenarios is None:
        scenarios = ges_scenarios(units, cfg.scenario_count(), cfg.seed) if model != "M1" else []
    if network is None:
        k = cfg.n_grid_scenarios if cfg.grid_per_scenario else 0
        network = grid_scenarios(case, k, cfg.seed, cfg.load_std, cfg.res_std)
    nominal = nominal_fleet(units)
    G, K = len(units), len(network)
    n_nodes, B = case.n_nodes, case.n_branches
    base = case.base_kw

    V = _Vars()
    EQ, UB = _Rows(), _Rows()

    # ---- unit variables -------------------------------------------------
    p_ch = V.add("p_ch", (G, T), 0.0)
    p_dis = V.add("p_dis", (G, T), 0.0)
    cum = V.add("throughput", (G, T), 0.0) if model == "M3" else None
    soc_copies: list[SocCopy] = []
    tt = np.arange(T)

    for i, unit in enumerate(units):
        scen_i = [fleet[i] for fleet in scenarios]
        # Power limits, one set per source.
        sources = [(NOMINAL, nominal[i])] if model == "M1" else list(enumerate(scen_i))
        if cfg.merge_identical and len(sources) > 1:
            cap_ch = np.min([r.params.p_ch_max * r.available for _, r in sources], axis=0)
            cap_dis = np.min([r.params.p_dis_max * r.available for _, r in sources], axis=0)
            limits = [(sources[0][0], cap_ch, cap_dis)]
        else:
            limits = [(sid, r.params.p_ch_max * r.available, r.params.p_dis_max * r.available)
                      for sid, r in sources]
        for sid, cap_ch, cap_dis in limits:
            keys = np.column_stack([np.full(T, i), np.full(T, sid), tt])
            UB.add("power_limit_ch", ("unit", "scenario", "t"), keys, tt, p_ch[i], np.ones(T), cap_ch)
            UB.add("power_limit_dis", ("unit", "scenario", "t"), keys, tt, p_dis[i], np.ones(T), cap_dis)

        # SOC trajectories.
        bounded_ids = {NOMINAL} if model == "M1" else set(range(len(scen_i)))
        groups = _group_sources(i, nominal[i], [] if model == "M1" else scen_i, cfg.merge_identical)
        for g, members in enumerate(groups):
            params = members[0][1].params
            ids = tuple(sid for sid, _ in members)
            bounded = [r.params for sid, r in members if sid in bounded_ids]
            lo = np.max([p.soc_min for p in bounded], axis=0) if bounded else np.zeros(T)
            hi = np.min([p.soc_max for p in bounded], axis=0) if bounded else np.ones(T)
            edu = model == "M3" and bool(bounded)
            if bounded and not edu:
                lb_soc, ub_soc = np.maximum(lo, 0.0), np.minimum(hi, 1.0)
            else:
                lb_soc, ub_soc = np.zeros(T), np.ones(T)
            soc = V.add(f"soc[{i},{g}]", (T,), lb_soc, ub_soc)
            soc_copies.append(SocCopy(i, soc, params, ids, lo, hi, bool(bounded), edu))

            eps, S = params.self_discharge, params.capacity
            rows = np.concatenate([tt, tt[1:], tt, tt])
            cols = np.concatenate([soc, soc[:-1], p_ch[i], p_dis[i]])
            vals = np.concatenate([np.ones(T), np.full(T - 1, -(1 - eps)),
                                   np.full(T, -params.eta_ch * dt / S),
                                   np.full(T, dt / (S * params.eta_dis))])
            rhs = eps * (params.soc0 - params.beta)
            rhs[0] += (1 - eps) * params.soc0
            keys = np.column_stack([np.full(T, i), np.full(T, g), tt])
            EQ.add("soc_balance", ("unit", "copy", "t"), keys, rows, cols, vals, rhs)

            if NOMINAL in ids:
                EQ.add("terminal", ("unit",), [[i]], [0], [soc[-1]], [1.0], [params.soc0])

            if edu:
                coef = unit.spec.nu / S
                keys = np.column_stack([np.full(T, i), np.full(T, g), tt])
                UB.add("edu_upper", ("unit", "copy", "t"), keys,
                       np.concatenate([tt, tt]), np.concatenate([soc, cum[i]]),
                       np.concatenate([np.ones(T), np.full(T, coef)]),
                       hi + unit.spec.mu * prices.c_dis)
                UB.add("edu_lower", ("unit", "copy", "t"), keys,
                       np.concatenate([tt, tt]), np.concatenate([soc, cum[i]]),
                       np.concatenate([-np.ones(T), np.full(T, coef)]),
                       -lo + unit.spec.mu * prices.c_ch)

        if model == "M3":
            rows = np.concatenate([tt, tt[1:], tt, tt])
            cols = np.concatenate([cum[i], cum[i][:-1], p_ch[i], p_dis[i]])
            vals = np.concatenate([np.ones(T), -np.ones(T - 1), np.full(T, -dt), np.full(T, -dt)])
            EQ.add("throughput", ("unit", "t"), np.column_stack([np.full(T, i), tt]),
                   rows, cols, vals, np.zeros(T))

        base_p = nominal[i].params
        for fam, limit, sign in (("ramp_up", base_p.ramp_up, 1.0), ("ramp_down", base_p.ramp_down, -1.0)):
            if limit is None:
                continue
            # Net charging power against the previous period; the unit starts idle.
            rows = np.concatenate([tt, tt, tt[1:], tt[1:]])
            cols = np.concatenate([p_ch[i], p_dis[i], p_ch[i][:-1], p_dis[i][:-1]])
            vals = sign * np.concatenate([np.ones(T), -np.ones(T), -np.ones(T - 1), np.ones(T - 1)])
            UB.add(fam, ("unit", "t"), np.column_stack([np.full(T, i), tt]), rows, cols, vals,
                   np.full(T, limit * dt))

    # ---- network variables ---------------------------------------------
    tan_phi = np.divide(case.q_nom_kvar, case.p_nom_kw, out=np.zeros(n_nodes),
                        where=case.p_nom_kw > 0)
    min_load = np.min([sc.p_load for sc in network], axis=0).T  # (n, T)
    p_lc = V.add("p_lc", (n_nodes, T), 0.0, np.maximum(0.0, case.lc_max_frac[:, None] * min_load) / base)
    u_lb = np.broadcast_to(case.u_min[None, :, None], (K, n_nodes, T)).copy()
    u_ub = np.broadcast_to(case.u_max[None, :, None], (K, n_nodes, T)).copy()
    u_lb[:, case.substation] = u_ub[:, case.substation] = case.u_substation
    U = V.add("U", (K, n_nodes, T), u_lb, u_ub)
    P = V.add("P", (K, B, T))
    Q = V.add("Q", (K, B, T))
    I = V.add("I", (K, B, T), 0.0, np.broadcast_to(case.i_max[None, :, None], (K, B, T)))
    g_ub = np.inf if case.grid_import_max_kw is None else case.grid_import_max_kw / base
    p_grid = V.add("p_grid", (K, T), -np.inf, g_ub)
    q_grid = V.add("q_grid", (K, T))

    unit_bus = np.array([case.index_of(u.bus) for u in units], dtype=np.int64)
    bfrom, bto = case.branch_from, case.branch_to
    z2 = case.r ** 2 + case.x ** 2
    nodes = np.arange(n_nodes)
    branches = np.arange(B)
    cone_rows, cone_cols, cone_vals, cone_keys = [], [], [], []
    n_cone = 0

    for k, sc in enumerate(network):
        for t in range(T):
            # Active power balance at every node.
            rows = [bto, bto, bfrom, [case.substation], nodes]
            cols = [P[k, :, t], I[k, :, t], P[k, :, t], [p_grid[k, t]], p_lc[:, t]]
            vals = [np.ones(B), -case.r, -np.ones(B), [1.0], np.ones(n_nodes)]
            if G:
                rows += [unit_bus, unit_bus]
                cols += [p_ch[:, t], p_dis[:, t]]
                vals += [np.full(G, -1.0 / base), np.full(G, 1.0 / base)]
            keys = np.column_stack([np.full(n_nodes, k), nodes, np.full(n_nodes, t)])
            EQ.add("p_balance", ("scenario", "node", "t"), keys, np.concatenate(rows),
                   np.concatenate(cols), np.concatenate(vals),
                   (sc.p_load[t] - sc.p_res[t]) / base)
            rows = [bto, bto, bfrom, [case.substation], nodes]
            cols = [Q[k, :, t], I[k, :, t], Q[k, :, t], [q_grid[k, t]], p_lc[:, t]]
            vals = [np.ones(B), -case.x, -np.ones(B), [1.0], tan_phi]
            EQ.add("q_balance", ("scenario", "node", "t"), keys, np.concatenate(rows),
                   np.concatenate(cols), np.concatenate(vals),
                   (sc.q_load[t] - sc.q_res[t]) / base)
            if B:
                EQ.add("voltage_drop", ("scenario", "branch", "t"),
                       np.column_stack([np.full(B, k), branches, np.full(B, t)]),
                       np.concatenate([branches] * 5),
                       np.concatenate([U[k, bfrom, t], U[k, bto, t], I[k, :, t], P[k, :, t], Q[k, :, t]]),
                       np.concatenate([np.ones(B), -np.ones(B), z2, -2 * case.r, -2 * case.x]),
                       np.zeros(B))
                # Cone rows: (I + U_from, 2P, 2Q, I - U_from).
                base_row = n_cone * 4 + 4 * branches
                cone_rows += [base_row, base_row, base_row + 1, base_row + 2, base_row + 3, base_row + 3]
                cone_cols += [I[k, :, t], U[k, bfrom, t], P[k, :, t], Q[k, :, t], I[k, :, t], U[k, bfrom, t]]
                cone_vals += [np.ones(B), np.ones(B), np.full(B, 2.0), np.full(B, 2.0), np.ones(B), -np.ones(B)]
                cone_keys.append(np.column_stack([np.full(B, k), branches, np.full(B, t)]))
                n_cone += B

    n = V.n
    A_cone = (sp.csr_matrix((np.concatenate(cone_vals), (np.concatenate(cone_rows), np.concatenate(cone_cols))),
                            shape=(4 * n_cone, n)) if n_cone else sp.csr_matrix((0, n)))
    cone_keys = np.vstack(cone_keys) if cone_keys else np.zeros((0, 3), dtype=np.int64)

    # ---- objective -------------------------------------------------------
    c_lc = np.zeros(n)
    c_lc[p_lc.ravel()] = prices.c_lc * base * dt
    c_grid = np.zeros(n)
    c_grid[p_grid] = (prices.c_grid * base * dt)[None, :] / K
    c_ges = np.zeros(n)
    c_ges[p_ch] = prices.c_ch[None, :] * dt
    c_ges[p_dis] = prices.c_dis[None, :] * dt
    c = c_lc + c_grid + c_ges

    A_eq, b_eq, eq_blocks = EQ.finish(n)
    A_ub, b_ub, ub_blocks = UB.finish(n)
    return ProblemDescription(
        model=model, n_vars=n, var_index=V.index,
        lb=np.concatenate(V.lb), ub=np.concatenate(V.ub),
        c=c, c_parts={"curtailment": c_lc, "grid": c_grid, "incentive": c_ges},
        A_eq=A_eq, b_eq=b_eq, eq_blocks=eq_blocks,
        A_ub=A_ub, b_ub=b_ub, ub_blocks=ub_blocks,
        A_cone=A_cone, cone_keys=cone_keys, soc_copies=soc_copies,
        case=case, units=units, prices=prices, horizon=horizon, cfg=cfg,
        ges_scenarios=scenarios, nominal=nominal, grid_scenarios=network,
    )
