"""Unified generic-energy-storage model."""

from .model import (
    Trajectory,
    incentive_cost,
    simulate_schedule,
    size_class,
    soc_step,
    soc_to_temperature,
    temperature_to_soc,
    thermal_self_discharge,
    transform_to_ges,
)
from .types import (
    UNCERTAIN_FIELDS,
    FleetUnit,
    GesParams,
    Horizon,
    Kind,
    Marginal,
    PhysicalParams,
    PriceSchedule,
    StoragePhysical,
    TclPhysical,
    UncertaintySpec,
    UnitSchedule,
)
from .uncertainty import (
    EduBounds,
    Realization,
    RealizationBatch,
    accumulated_discomfort,
    apply_edu_boundaries,
    deterministic_spec,
    nominal_realization,
    sample_exu_realization,
    sample_fleet_batches,
    sample_fleet_realization,
    sample_unit_batch,
    scenario_seed,
    spec_from_widths,
    truncnorm_mean,
    truncnorm_ppf,
)

__all__ = [
    "Trajectory",
    "incentive_cost",
    "simulate_schedule",
    "size_class",
    "soc_step",
    "soc_to_temperature",
    "temperature_to_soc",
    "thermal_self_discharge",
    "transform_to_ges",
    "UNCERTAIN_FIELDS",
    "FleetUnit",
    "GesParams",
    "Horizon",
    "Kind",
    "Marginal",
    "PhysicalParams",
    "PriceSchedule",
    "StoragePhysical",
    "TclPhysical",
    "UncertaintySpec",
    "UnitSchedule",
    "EduBounds",
    "Realization",
    "RealizationBatch",
    "accumulated_discomfort",
    "apply_edu_boundaries",
    "deterministic_spec",
    "nominal_realization",
    "sample_exu_realization",
    "sample_fleet_batches",
    "sample_fleet_realization",
    "sample_unit_batch",
    "scenario_seed",
    "spec_from_widths",
    "truncnorm_mean",
    "truncnorm_ppf",
]
