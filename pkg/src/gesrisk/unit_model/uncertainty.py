"""Exogenous parameter sampling and the decision-dependent boundary law."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import special, stats

from ..errors import UnitModelError
from .types import (
    UNCERTAIN_FIELDS,
    FleetUnit,
    GesParams,
    Marginal,
    PriceSchedule,
    UncertaintySpec,
    UnitSchedule,
)

# Stream tag for fleet-wide common factors; unit streams use their index.
COMMON_STREAM = 2**31 - 1


@dataclass(frozen=True)
class Realization:
    """One draw of a unit's parameters plus its per-period availability."""

    params: GesParams
    available: np.ndarray


def _std_truncnorm_ppf(u, a, b):
    """Standard truncated-normal quantile, evaluated in log space on the lower tail."""
    flip = a > 0
    a, b, u = np.where(flip, -b, a), np.where(flip, -a, b), np.where(flip, 1.0 - u, u)
    with np.errstate(divide="ignore"):
        log_p = np.logaddexp(np.log1p(-u) + special.log_ndtr(a), np.log(u) + special.log_ndtr(b))
    x = np.clip(special.ndtri_exp(np.minimum(log_p, 0.0)), a, b)
    return np.where(flip, -x, x)


def truncnorm_ppf(marginal: Marginal, u) -> np.ndarray:
    """Quantile function of a (possibly degenerate) truncated normal."""
    mean, std, lo, hi, u = np.broadcast_arrays(marginal.mean, marginal.std, marginal.lo,
                                               marginal.hi, np.asarray(u, dtype=float))
    out = np.array(mean, dtype=float)
    live = std > 0
    if np.any(live):
        m, s = mean[live], std[live]
        a, b = (lo[live] - m) / s, (hi[live] - m) / s
        out[live] = m + s * _std_truncnorm_ppf(u[live], a, b)
    return out


def truncnorm_mean(marginal: Marginal) -> np.ndarray:
    """Closed-form mean of the truncated normal."""
    m, s, lo, hi = (np.asarray(x, dtype=float) for x in
                    (marginal.mean, marginal.std, marginal.lo, marginal.hi))
    with np.errstate(divide="ignore", invalid="ignore"):
        a, b = (lo - m) / s, (hi - m) / s
        z = stats.norm.cdf(b) - stats.norm.cdf(a)
        shift = s * (stats.norm.pdf(a) - stats.norm.pdf(b)) / z
    return np.where(s > 0, m + shift, m)


def _base_value(base: GesParams, name: str) -> np.ndarray:
    return np.asarray(getattr(base, name), dtype=float)


def _realize(spec: UncertaintySpec, base: GesParams, quantiles: Mapping[str, np.ndarray],
             available: np.ndarray) -> Realization:
    changes = {}
    for name, marginal in spec.marginals().items():
        shape = _base_value(base, name).shape
        value = truncnorm_ppf(marginal, quantiles[name])
        value = np.broadcast_to(value, shape).astype(float)
        changes[name] = float(value) if value.ndim == 0 else value
    params = base.replace(**changes)
    f = spec.capacity_factor
    if f != 1.0:
        params = params.replace(capacity=params.capacity * f, p_ch_max=params.p_ch_max * f,
                                p_dis_max=params.p_dis_max * f)
    return Realization(params, available)


def nominal_realization(spec: UncertaintySpec, base: GesParams) -> Realization:
    """Median parameters with full availability (the deterministic model)."""
    quantiles = {name: np.full(_base_value(base, name).shape, 0.5) for name in UNCERTAIN_FIELDS}
    return _realize(spec, base, quantiles, np.ones(base.periods, dtype=bool))


def _draw_quantiles(spec: UncertaintySpec, base: GesParams, rng_seed,
                    common: Optional[Mapping[str, float]]):
    rng = np.random.default_rng(rng_seed)
    rho = spec.correlation
    idio_w = np.sqrt(max(0.0, 1.0 - rho * rho))
    quantiles = {}
    for name in UNCERTAIN_FIELDS:
        z = rng.standard_normal(_base_value(base, name).shape)
        if common is not None and rho > 0:
            z = rho * common[name] + idio_w * z
        quantiles[name] = special.ndtr(z)
    available = rng.random(base.periods) < np.broadcast_to(spec.p_avail, base.periods)
    return quantiles, available


def sample_exu_realization(spec: UncertaintySpec, base: GesParams, rng_seed,
                           common: Optional[Mapping[str, float]] = None) -> Realization:
    """Draw one realization; a pure function of ``rng_seed`` (and ``common``).

    Every parameter consumes standard normals of its own shape, in a fixed
    order, whether or not it carries a marginal, so the stream layout does not
    depend on which parameters are uncertain. ``common`` holds the fleet-wide
    standard normal factor per parameter name; the unit's own normal is mixed
    with it according to ``spec.correlation``.
    """
    quantiles, available = _draw_quantiles(spec, base, rng_seed, common)
    return _realize(spec, base, quantiles, available)


def scenario_seed(master_seed: int, stream: int, scenario: int, unit: int) -> list[int]:
    """Counter-based seed: results never depend on evaluation order."""
    return [int(master_seed), int(stream), int(scenario), int(unit)]


def _common_factors(master_seed: int, stream: int, scenario: int) -> dict:
    rng = np.random.default_rng(scenario_seed(master_seed, stream, scenario, COMMON_STREAM))
    return {name: rng.standard_normal() for name in UNCERTAIN_FIELDS}


def sample_fleet_realization(units: Sequence[FleetUnit], master_seed: int, stream: int,
                             scenario: int) -> list[Realization]:
    """Joint draw for a fleet with a shared common factor per parameter."""
    common = _common_factors(master_seed, stream, scenario)
    return [
        sample_exu_realization(u.spec, u.params, scenario_seed(master_seed, stream, scenario, i),
                               common=common)
        for i, u in enumerate(units)
    ]


BATCH_SERIES = ("p_ch_max", "p_dis_max", "soc_min", "soc_max", "beta")
BATCH_SCALARS = ("capacity", "eta_ch", "eta_dis", "self_discharge", "soc0")


@dataclass(frozen=True)
class RealizationBatch:
    """Many realizations of one unit, stacked on a leading scenario axis.

    Series are (M, T); scalar parameters are (M,); ``available`` is (M, T).
    """

    p_ch_max: np.ndarray
    p_dis_max: np.ndarray
    soc_min: np.ndarray
    soc_max: np.ndarray
    beta: np.ndarray
    capacity: np.ndarray
    eta_ch: np.ndarray
    eta_dis: np.ndarray
    self_discharge: np.ndarray
    soc0: np.ndarray
    available: np.ndarray

    @property
    def size(self) -> int:
        return len(self.capacity)

    @classmethod
    def stack(cls, reals: Sequence[Realization]) -> "RealizationBatch":
        T = reals[0].params.periods
        fields = {n: np.array([np.broadcast_to(getattr(r.params, n), T) for r in reals], dtype=float)
                  for n in BATCH_SERIES}
        fields.update({n: np.array([float(getattr(r.params, n)) for r in reals])
                       for n in BATCH_SCALARS})
        fields["available"] = np.array([np.broadcast_to(r.available, T) for r in reals], dtype=bool)
        return cls(**fields)


def sample_unit_batch(unit: FleetUnit, index: int, master_seed: int, stream: int,
                      scenarios: Sequence[int], commons: Sequence[Mapping[str, float]]
                      ) -> RealizationBatch:
    """Batched equivalent of :func:`sample_fleet_realization` for one unit.

    Consumes exactly the same random streams, so row ``k`` equals the unit's
    realization in scenario ``scenarios[k]``.
    """
    spec, base = unit.spec, unit.params
    draws = [_draw_quantiles(spec, base, scenario_seed(master_seed, stream, s, index), c)
             for s, c in zip(scenarios, commons)]
    M, T = len(draws), base.periods
    marginals = spec.marginals()
    values = {}
    for name in BATCH_SERIES + BATCH_SCALARS:
        shape = (M, T) if name in BATCH_SERIES else (M,)
        if name in marginals:
            q = np.array([d[0][name] for d in draws]).reshape((M,) + _base_value(base, name).shape)
            v = truncnorm_ppf(marginals[name], q)
        else:
            v = _base_value(base, name)
        values[name] = np.broadcast_to(v, shape).astype(float)
    f = spec.capacity_factor
    if f != 1.0:
        for name in ("capacity", "p_ch_max", "p_dis_max"):
            values[name] = values[name] * f
    values["available"] = np.array([d[1] for d in draws], dtype=bool)
    return RealizationBatch(**values)


def sample_fleet_batches(units: Sequence[FleetUnit], master_seed: int, stream: int,
                         scenarios: Sequence[int]) -> list[RealizationBatch]:
    """One :class:`RealizationBatch` per unit over the given scenario ids."""
    scenarios = list(scenarios)
    commons = [_common_factors(master_seed, stream, s) for s in scenarios]
    return [sample_unit_batch(u, i, master_seed, stream, scenarios, commons)
            for i, u in enumerate(units)]


@dataclass(frozen=True)
class EduBounds:
    """Decision-adjusted SOC bounds.

    ``lo_raw``/``hi_raw`` are the affine (unclipped) bounds used when building
    the optimisation problem; ``lo``/``hi`` are clipped to [0, 1] for replay.
    ``collapsed`` flags periods where the clipped lower bound exceeds the upper.
    """

    lo: np.ndarray
    hi: np.ndarray
    lo_raw: np.ndarray
    hi_raw: np.ndarray
    discomfort: np.ndarray

    @property
    def collapsed(self) -> np.ndarray:
        return self.lo > self.hi

    @property
    def any_collapse(self) -> bool:
        return bool(np.any(self.collapsed))


def accumulated_discomfort(sched: UnitSchedule, capacity: float, dt: float) -> np.ndarray:
    """Normalised throughput accumulated up to the end of each period."""
    return np.cumsum((sched.p_ch + sched.p_dis) * dt) / capacity


def apply_edu_boundaries(soc_min, soc_max, sched: UnitSchedule, prices: PriceSchedule,
                         spec: UncertaintySpec, params: GesParams, dt: float) -> EduBounds:
    """Expand bounds with the incentive price and contract them with accumulated use.

    ``hi = soc_max + mu*c_dis - nu*D`` and ``lo = soc_min - mu*c_ch + nu*D``,
    with ``D`` from :func:`accumulated_discomfort`.
    """
    if spec.mu < 0 or spec.nu < 0:
        raise UnitModelError("EDU coefficients must be non-negative", code="unit_model.edu")
    soc_min = np.asarray(soc_min, dtype=float)
    soc_max = np.asarray(soc_max, dtype=float)
    if not (soc_min.shape == soc_max.shape == sched.p_ch.shape == prices.c_ch.shape):
        raise UnitModelError("bounds, schedule and prices must share one horizon",
                             code="unit_model.shape")
    d = accumulated_discomfort(sched, params.capacity, dt)
    hi_raw = soc_max + spec.mu * prices.c_dis - spec.nu * d
    lo_raw = soc_min - spec.mu * prices.c_ch + spec.nu * d
    return EduBounds(np.clip(lo_raw, 0, 1), np.clip(hi_raw, 0, 1), lo_raw, hi_raw, d)


def deterministic_spec(params: GesParams, **kw) -> UncertaintySpec:
    """Spec with zero-width marginals on every parameter (useful for reductions)."""
    marg = {name: Marginal(np.asarray(getattr(params, name), dtype=float), 0.0,
                           np.asarray(getattr(params, name), dtype=float),
                           np.asarray(getattr(params, name), dtype=float))
            for name in UNCERTAIN_FIELDS}
    marg.update(kw)
    return UncertaintySpec(**marg)


def spec_from_widths(params: GesParams, *, soc_std: float = 0.0, power_rel_std: float = 0.0,
                     capacity_rel_std: float = 0.0, beta_std: float = 0.0, eta_std: float = 0.0,
                     p_avail: float = 1.0, mu: float = 0.0, nu: float = 0.0,
                     correlation: float = 0.0, capacity_factor: float = 1.0,
                     width: float = 3.0) -> UncertaintySpec:
    """Build a spec from a handful of widths, truncated at ``width`` standard deviations.

    Bounds use absolute SOC std, powers and capacity relative std, the ambient
    term an absolute std; efficiencies stay within (0, 1].
    """
    def rel(value, r):
        value = np.asarray(value, dtype=float)
        return Marginal.around(value, r * value, width, lo=0.0)

    marginals = {}
    if soc_std > 0:
        marginals["soc_min"] = Marginal.around(params.soc_min, soc_std, width, 0.0, 1.0)
        marginals["soc_max"] = Marginal.around(params.soc_max, soc_std, width, 0.0, 1.0)
    if power_rel_std > 0:
        marginals["p_ch_max"] = rel(params.p_ch_max, power_rel_std)
        marginals["p_dis_max"] = rel(params.p_dis_max, power_rel_std)
    if capacity_rel_std > 0:
        marginals["capacity"] = Marginal.around(params.capacity, capacity_rel_std * params.capacity,
                                                width, lo=1e-9)
    if beta_std > 0:
        marginals["beta"] = Marginal.around(params.beta, beta_std, width)
    if eta_std > 0:
        marginals["eta_ch"] = Marginal.around(params.eta_ch, eta_std, width, 1e-3, 1.0)
        marginals["eta_dis"] = Marginal.around(params.eta_dis, eta_std, width, 1e-3, 1.0)
    return UncertaintySpec(**marginals, p_avail=np.array(p_avail), mu=mu, nu=nu,
                           correlation=correlation, capacity_factor=capacity_factor)
