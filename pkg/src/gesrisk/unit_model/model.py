"""Physical-to-generic transforms, SOC dynamics and incentive cost."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import UnitModelError
from .types import (
    GesParams,
    Horizon,
    Kind,
    PhysicalParams,
    PriceSchedule,
    StoragePhysical,
    TclPhysical,
    UnitSchedule,
)


def thermal_self_discharge(resistance: float, capacity: float, dt: float) -> float:
    """Per-step loss ``1 - exp(-dt / (R*C))`` of a 1st-order thermal model."""
    rc = resistance * capacity
    if not rc > 0:
        raise UnitModelError("R*C must be positive", code="unit_model.rc")
    # expm1 keeps full precision for dt << RC.
    return float(-np.expm1(-dt / rc))


def transform_to_ges(phys: PhysicalParams, horizon: Horizon) -> GesParams:
    """Map physical unit parameters onto the unified storage parameters.

    Batteries and EVs map identically; their ambient term equals ``soc0`` so
    that self-discharge decays towards empty. Thermal loads use the indoor
    temperature as state of charge, ``(t_max - T_in) / (t_max - t_min)``,
    with charge/discharge measured against the baseline power that holds the
    setpoint at the first outdoor temperature.
    """
    phys.validate()
    T, dt = horizon.periods, horizon.dt
    if isinstance(phys, StoragePhysical):
        return GesParams(
            capacity=phys.capacity,
            p_ch_max=np.full(T, phys.p_ch_max),
            p_dis_max=np.full(T, phys.p_dis_max),
            soc_min=np.full(T, phys.soc_min),
            soc_max=np.full(T, phys.soc_max),
            eta_ch=phys.eta_ch,
            eta_dis=phys.eta_dis,
            self_discharge=phys.self_discharge,
            beta=np.full(T, phys.soc0),
            soc0=phys.soc0,
            ramp_up=phys.ramp_up,
            ramp_down=phys.ramp_down,
            kind=phys.kind,
        )

    outdoor = np.asarray(phys.outdoor, dtype=float)
    if outdoor.shape != (T,):
        raise UnitModelError(f"outdoor series needs {T} entries", code="unit_model.shape")
    R, C, eta = phys.thermal_resistance, phys.thermal_capacity, phys.efficiency
    band = phys.t_max - phys.t_min
    eps = thermal_self_discharge(R, C, dt)
    capacity = dt * band / (eta * R * eps)
    baseline = (outdoor[0] - phys.t_set) / (eta * R)
    p_dis_max = baseline
    p_ch_max = phys.p_rated - baseline
    if not (p_dis_max > 0 and p_ch_max > 0):
        raise UnitModelError(
            f"baseline power {baseline:.3f} kW leaves no room in both directions "
            f"(rated {phys.p_rated} kW)", code="unit_model.one_way")
    pref_min = np.full(T, phys.t_min) if phys.pref_min is None else np.broadcast_to(phys.pref_min, T)
    pref_max = np.full(T, phys.t_max) if phys.pref_max is None else np.broadcast_to(phys.pref_max, T)
    if np.any(pref_min < phys.t_min) or np.any(pref_max > phys.t_max) or np.any(pref_min > pref_max):
        raise UnitModelError("preference band must sit inside the comfort band",
                             code="unit_model.comfort_band")
    return GesParams(
        capacity=capacity,
        p_ch_max=np.full(T, p_ch_max),
        p_dis_max=np.full(T, p_dis_max),
        soc_min=(phys.t_max - pref_max) / band,
        soc_max=(phys.t_max - pref_min) / band,
        eta_ch=1.0,
        eta_dis=1.0,
        self_discharge=eps,
        beta=(outdoor - outdoor[0]) / band,
        soc0=(phys.t_max - phys.t_set) / band,
        kind=phys.kind,
    )


def temperature_to_soc(t_in, phys: TclPhysical):
    """Indoor temperature to SOC: 0 at the warm edge of the comfort band, 1 at the cool edge."""
    return (phys.t_max - np.asarray(t_in, dtype=float)) / (phys.t_max - phys.t_min)


def soc_to_temperature(soc, phys: TclPhysical):
    return phys.t_max - np.asarray(soc) * (phys.t_max - phys.t_min)


def soc_step(soc: float, p_ch: float, p_dis: float, params: GesParams, t: int, dt: float) -> float:
    """One step of the storage balance; no clipping is applied."""
    if p_ch < 0 or p_dis < 0:
        raise UnitModelError("powers must be non-negative", code="unit_model.power")
    if not params.capacity > 0 or params.eta_dis == 0:
        raise UnitModelError("capacity and discharge efficiency must be positive",
                             code="unit_model.capacity")
    eps, S = params.self_discharge, params.capacity
    return ((1 - eps) * soc
            + params.eta_ch * p_ch * dt / S
            - p_dis * dt / (S * params.eta_dis)
            + eps * (params.soc0 - params.beta[t]))


@dataclass(frozen=True)
class Trajectory:
    """SOC path including the initial state (``T + 1`` entries)."""

    soc: np.ndarray
    terminal_ok: bool
    bounds_ok: bool
    max_bound_violation: float

    @property
    def end_of_period(self) -> np.ndarray:
        return self.soc[1:]


def simulate_schedule(params: GesParams, sched: UnitSchedule, horizon: Horizon,
                      tol: float = 1e-6) -> Trajectory:
    """Chain :func:`soc_step` from ``soc0`` and check the terminal and bound conditions."""
    T = horizon.periods
    if sched.periods != T or params.periods != T:
        raise UnitModelError("schedule, parameters and horizon lengths differ",
                             code="unit_model.shape")
    soc = np.empty(T + 1)
    soc[0] = params.soc0
    for t in range(T):
        soc[t + 1] = soc_step(soc[t], sched.p_ch[t], sched.p_dis[t], params, t, horizon.dt)
    path = soc[1:]
    violation = float(max(0.0, np.max(params.soc_min - path), np.max(path - params.soc_max)))
    return Trajectory(
        soc=soc,
        terminal_ok=bool(abs(soc[-1] - params.soc0) <= tol),
        bounds_ok=violation <= tol,
        max_bound_violation=violation,
    )


def incentive_cost(schedules: Sequence[UnitSchedule], prices: PriceSchedule, dt: float) -> float:
    """Total incentive payment in RMB for a fleet of schedules."""
    total = 0.0
    for sched in schedules:
        if sched.periods != prices.periods:
            raise UnitModelError("schedule and price lengths differ", code="unit_model.shape")
        total += float(np.sum(sched.p_dis * prices.c_dis + sched.p_ch * prices.c_ch) * dt)
    return total


def size_class(params: GesParams) -> str:
    """Informational tag only: duration class of the unit."""
    hours = params.capacity / max(float(np.max(params.p_dis_max)), 1e-12)
    if hours < 0.25:
        return "power-quality"
    if hours < 4:
        return "grid-support"
    return "bulk-migration"


__all__ = [
    "Kind",
    "Trajectory",
    "incentive_cost",
    "simulate_schedule",
    "size_class",
    "soc_step",
    "soc_to_temperature",
    "thermal_self_discharge",
    "transform_to_ges",
]
