"""Synthetic substitute for the measured feeder data: diurnal profiles and a TCL fleet.

Everything is a deterministic function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PipelineError
from .data import FleetRecord, TimeSeriesBundle

PROFILES = ("summer-weekday", "summer-weekend")
DEFAULT_RES_BUSES = (7, 24, 25, 32)
SOLAR_BUSES = (7, 25)

# Time-of-use tariff, RMB/kWh.
VALLEY, FLAT, PEAK = 0.30, 0.65, 1.05


@dataclass(frozen=True)
class FleetRanges:
    """Sampling ranges of the synthetic TCL fleet."""

    resistance: tuple = (1.6, 2.4)  # degC/kW
    capacity: tuple = (1.6, 2.8)  # kWh/degC
    efficiency: tuple = (0.85, 0.95)
    t_set: tuple = (23.5, 24.5)
    p_rated: tuple = (7.0, 9.0)  # kW
    comfort: tuple = (20.0, 28.0)
    preference: tuple = (22.0, 26.0)
    ffa_share: float = 0.3


@dataclass(frozen=True)
class FleetUncertainty:
    """Uncertainty columns written for every synthetic unit."""

    std_soc: float = 0.04
    std_power: float = 0.03
    std_capacity: float = 0.0
    std_beta: float = 0.0
    p_avail: float = 1.0
    mu: float = 0.02
    nu: float = 0.03
    correlation: float = 1.0


def _tou_price(hours: np.ndarray) -> np.ndarray:
    price = np.full(hours.shape, FLAT)
    price[(hours < 8)] = VALLEY
    price[((hours >= 8) & (hours < 11)) | ((hours >= 17) & (hours < 22))] = PEAK
    return price


def _load_shape(hours, weekend, rng, n_buses):
    h = hours[:, None]
    morning = np.exp(-0.5 * ((h - (10.0 if weekend else 9.0)) / 2.5) ** 2)
    evening = np.exp(-0.5 * ((h - 19.5) / 2.2) ** 2)
    shape = 0.45 + 0.30 * morning + 0.50 * evening
    if weekend:
        shape = 0.92 * shape
    noise = 1 + 0.03 * rng.standard_normal((len(hours), n_buses))
    return np.clip(shape * noise / 1.02, 0.0, 1.0)


def _solar(hours, rng):
    clear = np.clip(np.sin(np.pi * (hours - 6.0) / 13.0), 0, None) ** 1.5
    cloud = 1 - 0.15 * rng.random(len(hours))
    return np.clip(0.95 * clear * cloud, 0.0, 1.0)


def _wind(hours, rng):
    base = 0.45 + 0.2 * np.cos(2 * np.pi * (hours - 3.0) / 24.0)
    walk = np.cumsum(0.05 * rng.standard_normal(len(hours)))
    return np.clip(base + walk - walk.mean(), 0.0, 1.0)


def _outdoor(hours, weekend, rng):
    daily = 30.5 + 3.5 * np.sin(2 * np.pi * (hours - 9.0) / 24.0)
    return daily + 0.3 * rng.standard_normal(len(hours))


def generate_synthetic_dataset(seed: int, profile: str = "summer-weekday", buses=None,
                               n_units: int = 100, ges_bus: int = 1,
                               res_buses=DEFAULT_RES_BUSES, periods: int = 24,
                               ranges: FleetRanges = FleetRanges(),
                               uncertainty: FleetUncertainty = FleetUncertainty()):
    """Return ``(TimeSeriesBundle, list[FleetRecord])`` for one synthetic day.

    Load and RES profiles are normalised to [0, 1]; RES profiles are zero
    outside ``res_buses``. The fleet holds ``n_units`` air conditioners at
    ``ges_bus`` (inverter and fixed-frequency types).
    """
    if profile not in PROFILES:
        raise PipelineError(f"unknown profile {profile!r}; choose from {PROFILES}",
                            code="pipeline.profile")
    buses = list(range(1, 34)) if buses is None else list(buses)
    weekend = profile.endswith("weekend")
    rng = np.random.default_rng([int(seed), 0x5EED, PROFILES.index(profile)])
    hours = np.arange(periods, dtype=float) * 24.0 / periods

    load_p = _load_shape(hours, weekend, rng, len(buses))
    load_q = load_p.copy()
    res_p = np.zeros_like(load_p)
    for b in res_buses:
        if b in buses:
            res_p[:, buses.index(b)] = _solar(hours, rng) if b in SOLAR_BUSES else _wind(hours, rng)
    temp = _outdoor(hours, weekend, rng)
    stamps = [f"2020-07-{15 if not weekend else 18:02d}T{int(h):02d}:{int(round((h % 1) * 60)):02d}:00"
              for h in hours]
    bundle = TimeSeriesBundle(stamps, buses, load_p, load_q, res_p, temp, _tou_price(hours))

    fleet = []
    u = uncertainty
    for k in range(n_units):
        kind = "FFA" if rng.random() < ranges.ffa_share else "IVA"
        fleet.append(FleetRecord(
            unit_id=f"tcl{k:03d}", kind=kind, bus=ges_bus,
            values={
                "thermal_resistance": float(rng.uniform(*ranges.resistance)),
                "thermal_capacity": float(rng.uniform(*ranges.capacity)),
                "efficiency": float(rng.uniform(*ranges.efficiency)),
                "t_min": ranges.comfort[0], "t_max": ranges.comfort[1],
                "pref_min": ranges.preference[0], "pref_max": ranges.preference[1],
                "t_set": float(np.round(rng.uniform(*ranges.t_set), 2)),
                "p_rated": float(np.round(rng.uniform(*ranges.p_rated), 2)),
                "std_soc": u.std_soc, "std_power": u.std_power, "std_capacity": u.std_capacity,
                "std_beta": u.std_beta, "p_avail": u.p_avail, "mu": u.mu, "nu": u.nu,
                "correlation": u.correlation,
            },
        ))
    return bundle, fleet
