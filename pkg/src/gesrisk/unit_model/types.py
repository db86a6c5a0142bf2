"""Data types for the unified storage model.

Index convention used throughout the package: a horizon has ``T`` periods;
period ``t`` applies the action ``(p_ch[t], p_dis[t])`` and ends in state
``soc[t]``. Per-period bounds ``soc_min[t]``/``soc_max[t]`` and the ambient
term ``beta[t]`` therefore refer to the end of period ``t``. The initial
state ``soc0`` precedes period 0.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from ..errors import UnitModelError


class Kind(str, Enum):
    BES = "BES"
    IVA = "IVA"
    FFA = "FFA"
    EV = "EV"

    @property
    def is_thermal(self) -> bool:
        return self in (Kind.IVA, Kind.FFA)


def _series(value, length: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(length, float(arr))
    if arr.shape != (length,):
        raise UnitModelError(f"{name} must have {length} entries, got shape {arr.shape}",
                             code="unit_model.shape")
    return arr


@dataclass(frozen=True)
class Horizon:
    """Dispatch horizon of ``periods`` steps of ``dt`` hours."""

    periods: int
    dt: float = 1.0

    def __post_init__(self):
        if int(self.periods) != self.periods or self.periods < 1:
            raise UnitModelError("horizon needs at least one period", code="unit_model.horizon")
        if not self.dt > 0:
            raise UnitModelError("step length must be positive", code="unit_model.horizon")


@dataclass(frozen=True)
class TclPhysical:
    """Thermostatically controlled load (cooling) described by a 1st-order ETP model.

    Attributes:
        kind: IVA or FFA.
        thermal_capacity: C in kWh/degC.
        thermal_resistance: R in degC/kW.
        efficiency: conversion efficiency eta, in (0, 1].
        t_min, t_max: physical comfort band used to normalise temperature.
        t_set: setpoint holding the baseline.
        p_rated: rated electrical power in kW.
        outdoor: period-mean outdoor temperature, one value per period.
        pref_min, pref_max: occupant preference band per period (defaults
            to the comfort band, i.e. SOC bounds [0, 1]).
    """

    kind: Kind
    thermal_capacity: float
    thermal_resistance: float
    efficiency: float
    t_min: float
    t_max: float
    t_set: float
    p_rated: float
    outdoor: np.ndarray
    pref_min: Optional[np.ndarray] = None
    pref_max: Optional[np.ndarray] = None

    def validate(self) -> None:
        kind = Kind(self.kind)
        if not kind.is_thermal:
            raise UnitModelError(f"{kind.value} is not a thermal kind", code="unit_model.kind")
        if not (self.thermal_capacity > 0 and self.thermal_resistance > 0):
            raise UnitModelError("R and C must be positive", code="unit_model.rc")
        if not 0 < self.efficiency <= 1:
            raise UnitModelError("efficiency must lie in (0, 1]", code="unit_model.efficiency")
        if not self.t_min < self.t_max:
            raise UnitModelError("degenerate comfort band", code="unit_model.comfort_band")
        if not self.p_rated > 0:
            raise UnitModelError("rated power must be positive", code="unit_model.power")


@dataclass(frozen=True)
class StoragePhysical:
    """Native storage parameters of a battery or an EV."""

    kind: Kind
    capacity: float
    p_ch_max: float
    p_dis_max: float
    eta_ch: float = 1.0
    eta_dis: float = 1.0
    self_discharge: float = 0.0
    soc0: float = 0.5
    soc_min: float = 0.0
    soc_max: float = 1.0
    ramp_up: Optional[float] = None
    ramp_down: Optional[float] = None

    def validate(self) -> None:
        kind = Kind(self.kind)
        if kind.is_thermal:
            raise UnitModelError(f"{kind.value} is a thermal kind", code="unit_model.kind")
        if not self.capacity > 0:
            raise UnitModelError("capacity must be positive", code="unit_model.capacity")
        # Both directions are required; one-way devices are not storage.
        if not (self.p_ch_max > 0 and self.p_dis_max > 0):
            raise UnitModelError("charge and discharge power must both be positive",
                                 code="unit_model.power")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1):
            raise UnitModelError("efficiencies must lie in (0, 1]", code="unit_model.efficiency")
        if not 0 <= self.self_discharge < 1:
            raise UnitModelError("self-discharge must lie in [0, 1)", code="unit_model.self_discharge")
        if not 0 <= self.soc_min <= self.soc0 <= self.soc_max <= 1:
            raise UnitModelError("need 0 <= soc_min <= soc0 <= soc_max <= 1", code="unit_model.soc")
        for ramp in (self.ramp_up, self.ramp_down):
            if ramp is not None and not ramp > 0:
                raise UnitModelError("ramp limits must be positive", code="unit_model.ramp")


PhysicalParams = Union[TclPhysical, StoragePhysical]


@dataclass(frozen=True)
class GesParams:
    """Unified storage parameters of one unit over a horizon of ``len(beta)`` periods."""

    capacity: float
    p_ch_max: np.ndarray
    p_dis_max: np.ndarray
    soc_min: np.ndarray
    soc_max: np.ndarray
    eta_ch: float
    eta_dis: float
    self_discharge: float
    beta: np.ndarray
    soc0: float
    ramp_up: Optional[float] = None
    ramp_down: Optional[float] = None
    reactive_capable: bool = False
    power_factor: float = 1.0
    kind: Kind = Kind.BES

    def __post_init__(self):
        n = len(np.atleast_1d(self.beta))
        for name in ("p_ch_max", "p_dis_max", "soc_min", "soc_max", "beta"):
            object.__setattr__(self, name, _series(getattr(self, name), n, name))
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def periods(self) -> int:
        return len(self.beta)

    def validate(self, tol: float = 1e-12) -> None:
        if not self.capacity > 0:
            raise UnitModelError("energy capacity must be positive", code="unit_model.capacity")
        if np.any(self.soc_min < -tol) or np.any(self.soc_max > 1 + tol) or np.any(
            self.soc_min > self.soc_max + tol
        ):
            raise UnitModelError("need 0 <= soc_min <= soc_max <= 1", code="unit_model.soc")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1):
            raise UnitModelError("efficiencies must lie in (0, 1]", code="unit_model.efficiency")
        if not 0 <= self.self_discharge < 1:
            raise UnitModelError("self-discharge must lie in [0, 1)", code="unit_model.self_discharge")
        if np.any(self.p_ch_max < 0) or np.any(self.p_dis_max < 0):
            raise UnitModelError("power limits must be non-negative", code="unit_model.power")
        if not 0 <= self.soc0 <= 1:
            raise UnitModelError("initial SOC must lie in [0, 1]", code="unit_model.soc")
        for ramp in (self.ramp_up, self.ramp_down):
            if ramp is not None and not ramp > 0:
                raise UnitModelError("ramp limits must be positive", code="unit_model.ramp")

    def replace(self, **changes) -> "GesParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Marginal:
    """Truncated normal marginal; ``mean`` is the location of the untruncated normal.

    All fields broadcast, so a marginal can describe a scalar parameter or a
    per-period series.
    """

    mean: np.ndarray
    std: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        arrays = np.broadcast_arrays(*(np.asarray(getattr(self, n), dtype=float)
                                       for n in ("mean", "std", "lo", "hi")))
        for name, arr in zip(("mean", "std", "lo", "hi"), arrays):
            object.__setattr__(self, name, np.array(arr))
        if np.any(self.std < 0):
            raise UnitModelError("std must be non-negative", code="unit_model.marginal")
        if np.any(self.lo > self.hi):
            raise UnitModelError("empty truncation interval", code="unit_model.truncation")
        if np.any(self.mean < self.lo) or np.any(self.mean > self.hi):
            raise UnitModelError("need lo <= mean <= hi", code="unit_model.marginal")

    @classmethod
    def around(cls, mean, std, width: float = 3.0, lo=-np.inf, hi=np.inf) -> "Marginal":
        """Marginal truncated at ``mean +- width*std`` and additionally at [lo, hi]."""
        mean = np.asarray(mean, dtype=float)
        std = np.asarray(std, dtype=float)
        return cls(mean, std, np.maximum(mean - width * std, lo), np.minimum(mean + width * std, hi))

    @property
    def degenerate(self) -> bool:
        return bool(np.all(self.std == 0))


UNCERTAIN_FIELDS = ("p_ch_max", "p_dis_max", "soc_min", "soc_max", "eta_ch", "eta_dis",
                    "capacity", "beta")


@dataclass(frozen=True)
class UncertaintySpec:
    """Exogenous marginals, availability and decision-dependent coefficients of one unit.

    Parameters without a marginal are deterministic at the base value.

    Attributes:
        p_avail: probability of being available in each period.
        mu: bound expansion per unit incentive price (1/(RMB/kW)).
        nu: bound contraction per unit of accumulated normalised throughput.
        correlation: loading on a fleet-wide standard normal factor, in [0, 1].
            0 gives independent units, 1 fully comonotone units.
        capacity_factor: static degradation multiplier on energy and power.
    """

    p_ch_max: Optional[Marginal] = None
    p_dis_max: Optional[Marginal] = None
    soc_min: Optional[Marginal] = None
    soc_max: Optional[Marginal] = None
    eta_ch: Optional[Marginal] = None
    eta_dis: Optional[Marginal] = None
    capacity: Optional[Marginal] = None
    beta: Optional[Marginal] = None
    p_avail: np.ndarray = field(default_factory=lambda: np.array(1.0))
    mu: float = 0.0
    nu: float = 0.0
    correlation: float = 0.0
    capacity_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p_avail", np.asarray(self.p_avail, dtype=float))
        if np.any(self.p_avail < 0) or np.any(self.p_avail > 1):
            raise UnitModelError("p_avail must lie in [0, 1]", code="unit_model.availability")
        if self.mu < 0 or self.nu < 0:
            raise UnitModelError("EDU coefficients must be non-negative", code="unit_model.edu")
        if not 0 <= self.correlation <= 1:
            raise UnitModelError("correlation must lie in [0, 1]", code="unit_model.correlation")
        if not self.capacity_factor > 0:
            raise UnitModelError("capacity factor must be positive", code="unit_model.capacity")

    def marginals(self) -> dict[str, Marginal]:
        return {name: getattr(self, name) for name in UNCERTAIN_FIELDS
                if getattr(self, name) is not None}

    @property
    def deterministic(self) -> bool:
        return all(m.degenerate for m in self.marginals().values()) and bool(np.all(self.p_avail == 1))

    def replace(self, **changes) -> "UncertaintySpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class UnitSchedule:
    """Charge/discharge powers (kW) and the end-of-period SOC trajectory."""

    p_ch: np.ndarray
    p_dis: np.ndarray
    soc: Optional[np.ndarray] = None

    def __post_init__(self):
        p_ch = np.asarray(self.p_ch, dtype=float)
        p_dis = np.asarray(self.p_dis, dtype=float)
        if p_ch.shape != p_dis.shape or p_ch.ndim != 1:
            raise UnitModelError("charge and discharge series must share one length",
                                 code="unit_model.shape")
        if np.any(p_ch < 0) or np.any(p_dis < 0):
            raise UnitModelError("scheduled powers must be non-negative", code="unit_model.power")
        object.__setattr__(self, "p_ch", p_ch)
        object.__setattr__(self, "p_dis", p_dis)
        if self.soc is not None:
            object.__setattr__(self, "soc", np.asarray(self.soc, dtype=float))

    @property
    def periods(self) -> int:
        return len(self.p_ch)

    @property
    def complementarity(self) -> np.ndarray:
        return self.p_ch * self.p_dis

    @classmethod
    def idle(cls, periods: int) -> "UnitSchedule":
        return cls(np.zeros(periods), np.zeros(periods))


@dataclass(frozen=True)
class PriceSchedule:
    """Incentive prices (RMB/kW per period), grid price (RMB/kWh) and curtailment price."""

    c_ch: np.ndarray
    c_dis: np.ndarray
    c_grid: np.ndarray
    c_lc: float = 10.0

    def __post_init__(self):
        n = len(np.atleast_1d(self.c_grid))
        for name in ("c_ch", "c_dis", "c_grid"):
            object.__setattr__(self, name, _series(getattr(self, name), n, name))
        if any(np.any(getattr(self, n) < 0) for n in ("c_ch", "c_dis", "c_grid")) or self.c_lc < 0:
            raise UnitModelError("prices must be non-negative", code="unit_model.price")

    @property
    def periods(self) -> int:
        return len(self.c_grid)

    @classmethod
    def flat(cls, c_grid, incentive: float = 0.3, c_lc: float = 10.0) -> "PriceSchedule":
        c_grid = np.asarray(c_grid, dtype=float)
        return cls(np.full(len(c_grid), incentive), np.full(len(c_grid), incentive), c_grid, c_lc)


@dataclass(frozen=True)
class FleetUnit:
    """One dispatchable unit: placement, unified parameters and their uncertainty."""

    unit_id: str
    bus: int
    params: GesParams
    spec: UncertaintySpec = field(default_factory=UncertaintySpec)
    physical: Optional[PhysicalParams] = None
