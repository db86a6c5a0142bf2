"""Scenario sizing and scenario generation for the sample-and-enforce reformulation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import DispatchError
from ..grid import GridCase
from ..unit_model import FleetUnit, Realization, nominal_realization, sample_fleet_realization

GES_STREAM = 1
GRID_STREAM = 2
RISK_STREAM = 3


def _log_binom_tail(n: int, alpha: float, d: int) -> float:
    """log of sum_{i<d} C(n,i) alpha^i (1-alpha)^(n-i)."""
    la, lb = math.log(alpha), math.log1p(-alpha)
    terms = [math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1) + i * la + (n - i) * lb
             for i in range(min(d, n + 1))]
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def required_scenario_count(alpha: float, beta: float, d: int, cap: int = 10**7) -> int:
    """Smallest N whose binomial tail ``sum_{i<d} C(N,i) a^i (1-a)^(N-i)`` is at most ``beta``.

    With N scenarios and ``d`` support constraints, the scenario solution then
    violates the chance constraint with probability above ``alpha`` only with
    confidence ``1 - beta``.
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise DispatchError("alpha and beta must lie in (0, 1)", code="dispatch.scenario_count")
    if int(d) != d or d < 1:
        raise DispatchError("d must be a positive integer", code="dispatch.scenario_count")
    log_beta = math.log(beta)

    def ok(n):
        return _log_binom_tail(n, alpha, d) <= log_beta

    lo = max(1, d)
    if ok(lo):
        return lo
    hi = lo
    while not ok(hi):
        lo, hi = hi, hi * 2
        if hi > cap:
            if ok(cap):
                hi = cap
                break
            raise DispatchError(f"more than {cap} scenarios required", code="dispatch.scenario_cap")
    # Tail is decreasing in n once n >= d: bisect on (lo, hi].
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class GridScenario:
    """One load/RES realization in kW, arrays of shape (T, n)."""

    p_load: np.ndarray
    q_load: np.ndarray
    p_res: np.ndarray
    q_res: np.ndarray


def grid_scenarios(case: GridCase, count: int, seed: int, load_std: float,
                   res_std: float) -> list[GridScenario]:
    """Nominal scenario followed by ``count`` multiplicative-noise scenarios.

    Factors are truncated normals at +-3 std, floored at zero.
    """
    if case.p_load is None:
        raise DispatchError("case has no load series attached", code="dispatch.no_series")
    out = [GridScenario(case.p_load, case.q_load, case.p_res, case.q_res)]
    shape = case.p_load.shape
    for k in range(1, count + 1):
        rng = np.random.default_rng([int(seed), GRID_STREAM, k])
        zl = stats.truncnorm.ppf(rng.random(shape), -3, 3)
        zr = stats.truncnorm.ppf(rng.random(shape), -3, 3)
        fl = np.maximum(0.0, 1 + load_std * zl)
        fr = np.maximum(0.0, 1 + res_std * zr)
        out.append(GridScenario(case.p_load * fl, case.q_load * fl, case.p_res * fr, case.q_res * fr))
    return out


def ges_scenarios(units: Sequence[FleetUnit], count: int, seed: int) -> list[list[Realization]]:
    """``count`` joint fleet realizations; scenario ``s`` does not depend on ``count``."""
    return [sample_fleet_realization(units, seed, GES_STREAM, s) for s in range(count)]


def nominal_fleet(units: Sequence[FleetUnit]) -> list[Realization]:
    return [nominal_realization(u.spec, u.params) for u in units]
