"""Small constructors shared by the test modules."""

import numpy as np

from gesrisk.grid import case_from_dict
from gesrisk.unit_model import FleetUnit, GesParams, Kind, PriceSchedule, UncertaintySpec


def storage_params(T=2, capacity=10.0, p_max=5.0, soc0=0.5, soc_min=0.0, soc_max=1.0,
                   eta_ch=1.0, eta_dis=1.0, eps=0.0):
    return GesParams(capacity=capacity, p_ch_max=np.full(T, p_max), p_dis_max=np.full(T, p_max),
                     soc_min=np.full(T, soc_min), soc_max=np.full(T, soc_max), eta_ch=eta_ch,
                     eta_dis=eta_dis, self_discharge=eps, beta=np.full(T, soc0), soc0=soc0,
                     kind=Kind.BES)


def unit(params, spec=None, bus=2, unit_id="u0"):
    return FleetUnit(unit_id, bus, params, spec or UncertaintySpec())


def flat_prices(c_grid, incentive=0.3, c_lc=10.0):
    return PriceSchedule.flat(np.asarray(c_grid, dtype=float), incentive=incentive, c_lc=c_lc)


def two_bus_case(r=0.01, x=0.02, load_kw=(100.0, 100.0), res_kw=(0.0, 0.0), u_min=0.0, u_max=4.0):
    """Substation 1 feeding bus 2; loose voltage limits unless given."""
    data = {
        "name": "two-bus",
        "substation": 1,
        "nodes": [{"id": 1, "p_kw": 0.0, "q_kvar": 0.0, "u_min_pu": u_min, "u_max_pu": u_max},
                  {"id": 2, "p_kw": 100.0, "q_kvar": 0.0, "u_min_pu": u_min, "u_max_pu": u_max,
                   "lc_max_frac": 0.0}],
        "branches": [{"from": 1, "to": 2, "r_pu": r, "x_pu": x}],
    }
    case = case_from_dict(data)
    T = len(load_kw)
    p_load = np.column_stack([np.zeros(T), np.asarray(load_kw, dtype=float)])
    p_res = np.column_stack([np.zeros(T), np.asarray(res_kw, dtype=float)])
    return case.with_series(p_load, np.zeros((T, 2)), p_res)


def single_bus_case(load_kw=(0.0, 0.0)):
    """A substation with no branches: the grid is a pure price taker."""
    data = {"name": "one-bus", "substation": 1,
            "nodes": [{"id": 1, "p_kw": 0.0, "q_kvar": 0.0, "lc_max_frac": 0.0}], "branches": []}
    case = case_from_dict(data)
    T = len(load_kw)
    return case.with_series(np.asarray(load_kw, dtype=float)[:, None], np.zeros((T, 1)), np.zeros((T, 1)))
