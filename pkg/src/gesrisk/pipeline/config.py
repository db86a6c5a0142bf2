"""Run configuration: a JSON file mirroring :class:`RunConfig`, overridable from the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..dispatch import VARIANTS, CcoConfig
from ..errors import PipelineError
from .synth import PROFILES

_CCO_FIELDS = {f.name for f in dataclasses.fields(CcoConfig)} - {"model", "seed"}


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run depends on.

    When ``series`` and ``fleet`` are both empty, a synthetic dataset is
    generated from ``synthetic_profile`` and ``seed`` and written next to the
    results. ``case=None`` selects the bundled 33-bus feeder.

    Attributes:
        cco: dispatch settings shared by all variants (``CcoConfig`` fields
            except ``model`` and ``seed``).
        risk_samples: Monte Carlo sample count M.
        incentive: GES incentive price, RMB/kW, both directions.
        c_lc: load curtailment price, RMB/kW.
        res_rated_kw, res_buses: RES capacity scaling of normalised profiles.
        seed: master seed for scenarios, risk draws and synthetic data.
    """

    out_dir: str = "runs/default"
    case: Optional[str] = None
    series: tuple = ()
    fleet: Optional[str] = None
    variants: tuple = VARIANTS
    cco: dict = field(default_factory=dict)
    risk_samples: int = 1000
    include_edu: bool = True
    incentive: float = 0.3
    c_lc: float = 10.0
    res_rated_kw: float = 300.0
    res_buses: tuple = (7, 24, 25, 32)
    seed: int = 0
    synthetic_profile: str = "summer-weekday"

    def __post_init__(self):
        series = (self.series,) if isinstance(self.series, str) else tuple(self.series)
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "variants", tuple(str(v).upper() for v in self.variants))
        object.__setattr__(self, "res_buses", tuple(int(b) for b in self.res_buses))
        unknown = set(self.cco) - _CCO_FIELDS
        if unknown:
            raise PipelineError(f"unknown dispatch settings {sorted(unknown)}", code="pipeline.config")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise PipelineError(f"variants must be a non-empty subset of {VARIANTS}",
                                code="pipeline.config")
        if min(self.incentive, self.c_lc, self.res_rated_kw) < 0:
            raise PipelineError("prices and ratings must be non-negative", code="pipeline.config")
        if int(self.risk_samples) != self.risk_samples or self.risk_samples < 1:
            raise PipelineError("risk_samples must be a positive integer", code="pipeline.config")
        if bool(self.series) != bool(self.fleet):
            raise PipelineError("give both series and fleet, or neither for synthetic data",
                                code="pipeline.config")
        if not self.series and self.synthetic_profile not in PROFILES:
            raise PipelineError(f"unknown synthetic profile {self.synthetic_profile!r}",
                                code="pipeline.config")

    @property
    def synthetic(self) -> bool:
        return not self.series

    def cco_config(self, model: str) -> CcoConfig:
        return CcoConfig(model=model, seed=self.seed, **self.cco)

    def check_paths(self) -> None:
        """Fail fast on unresolvable input paths."""
        paths = ([self.case] if self.case else []) + list(self.series) + ([self.fleet] if self.fleet else [])
        missing = [p for p in paths if not Path(p).is_file()]
        if missing:
            raise PipelineError(f"input files not found: {missing}", code="pipeline.config")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k in ("series", "variants", "res_buses"):
            out[k] = list(out[k])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise PipelineError(f"unknown config keys {sorted(unknown)}", code="pipeline.config")
        return cls(**data)


def load_run_config(path, **overrides) -> RunConfig:
    """Read a JSON config; non-None ``overrides`` win over file values."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PipelineError(f"config file not found: {path}", code="pipeline.config") from None
    except json.JSONDecodeError as exc:
        raise PipelineError(f"{path}: {exc}", code="pipeline.config") from None
    if not isinstance(data, dict):
        raise PipelineError(f"{path}: expected a JSON object", code="pipeline.config")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)
