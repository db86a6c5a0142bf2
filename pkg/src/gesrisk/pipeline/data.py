"""CSV ingestion and writing of time series and fleet descriptions."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import PipelineError
from ..grid import GridCase
from ..unit_model import (FleetUnit, Horizon, Kind, StoragePhysical, TclPhysical, spec_from_widths,
                          transform_to_ges)

SERIES_COLUMNS = ("timestamp", "bus", "load_p", "load_q", "res_p", "temp_out", "grid_price")
NORMALIZED = ("load_p", "load_q", "res_p")

TCL_COLUMNS = ("thermal_capacity", "thermal_resistance", "efficiency", "t_min", "t_max",
               "t_set", "p_rated", "pref_min", "pref_max")
STORAGE_COLUMNS = ("capacity", "p_ch_max", "p_dis_max", "eta_ch", "eta_dis", "self_discharge",
                   "soc0", "soc_min", "soc_max", "ramp_up", "ramp_down")
UNCERTAINTY_COLUMNS = ("std_soc", "std_power", "std_capacity", "std_beta", "std_eta", "p_avail",
                       "mu", "nu", "correlation", "capacity_factor")
FLEET_COLUMNS = ("unit_id", "kind", "bus") + TCL_COLUMNS + STORAGE_COLUMNS + UNCERTAINTY_COLUMNS
_TCL_REQUIRED = TCL_COLUMNS[:7]
_STORAGE_REQUIRED = STORAGE_COLUMNS[:3]


def _fmt(value) -> str:
    """Shortest decimal that round-trips the float."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class ResScaling:
    """Rated RES capacity (kW) per bus id; other buses inject nothing."""

    rated_kw: dict = field(default_factory=lambda: {b: 300.0 for b in (7, 24, 25, 32)})

    @classmethod
    def uniform(cls, rated_kw: float = 300.0, buses: Iterable = (7, 24, 25, 32)) -> "ResScaling":
        return cls({int(b): float(rated_kw) for b in buses})


@dataclass(frozen=True)
class TimeSeriesBundle:
    """Normalised per-bus profiles and system-wide series, one row per period.

    Attributes:
        timestamps: ISO timestamps, strictly increasing.
        buses: bus ids, the column order of the (T, n) arrays.
        load_p, load_q, res_p: normalised profiles in [0, 1].
        temp_out: outdoor temperature, degC.
        grid_price: RMB/kWh.
    """

    timestamps: list
    buses: list
    load_p: np.ndarray
    load_q: np.ndarray
    res_p: np.ndarray
    temp_out: np.ndarray
    grid_price: np.ndarray

    def __post_init__(self):
        T, n = len(self.timestamps), len(self.buses)
        for name in NORMALIZED:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (T, n):
                raise PipelineError(f"{name} must be ({T}, {n})", code="pipeline.length_mismatch")
            if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
                raise PipelineError(f"{name} outside the normalised range [0, 1]",
                                    code="pipeline.range")
            object.__setattr__(self, name, arr)
        for name in ("temp_out", "grid_price"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (T,):
                raise PipelineError(f"{name} must have {T} values", code="pipeline.length_mismatch")
            object.__setattr__(self, name, arr)
        if np.any(self.grid_price < 0):
            raise PipelineError("negative grid price", code="pipeline.range")
        parsed = [_parse_time(s) for s in self.timestamps]
        if any(b <= a for a, b in zip(parsed, parsed[1:])):
            raise PipelineError("timestamps must be strictly increasing", code="pipeline.timestamp_order")

    @property
    def periods(self) -> int:
        return len(self.timestamps)

    @property
    def dt(self) -> float:
        """Step length in hours (1 for a single period)."""
        if self.periods < 2:
            return 1.0
        t = [_parse_time(s) for s in self.timestamps]
        steps = {(b - a).total_seconds() / 3600.0 for a, b in zip(t, t[1:])}
        if len(steps) > 1:
            raise PipelineError("timestamps are not evenly spaced", code="pipeline.timestamp_order")
        return steps.pop()

    def scaled(self, case: GridCase, scaling: Optional[ResScaling] = None) -> GridCase:
        """Attach kW series to ``case``: loads scale by nominal bus load, RES by rated capacity."""
        scaling = scaling or ResScaling()
        T, n = self.periods, case.n_nodes
        cols = np.empty(n, dtype=int)
        for j, node in enumerate(case.node_ids):
            if node not in self.buses:
                raise PipelineError(f"series has no rows for bus {node}", code="pipeline.missing_bus")
            cols[j] = self.buses.index(node)
        for b in scaling.rated_kw:
            case.index_of(b)
        rated = np.array([scaling.rated_kw.get(node, 0.0) for node in case.node_ids])
        return case.with_series(self.load_p[:, cols] * case.p_nom_kw,
                                self.load_q[:, cols] * case.q_nom_kvar,
                                self.res_p[:, cols] * rated, np.zeros((T, n)))

    def equals(self, other: "TimeSeriesBundle") -> bool:
        return (list(self.timestamps) == list(other.timestamps) and list(self.buses) == list(other.buses)
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("load_p", "load_q", "res_p", "temp_out", "grid_price")))


def _parse_time(s: str) -> datetime:
    try:
        return datetime.fromisoformat(s)
    except ValueError:
        raise PipelineError(f"bad timestamp {s!r}", code="pipeline.parse") from None


def _float(row, name, where):
    try:
        return float(row[name])
    except (TypeError, ValueError):
        raise PipelineError(f"{where}: column {name} is not numeric", code="pipeline.parse") from None


def ingest_timeseries(paths, case: Optional[GridCase] = None) -> TimeSeriesBundle:
    """Read one or more long-format CSVs (one row per timestamp and bus).

    Rows for a bus must appear in strictly increasing time order. With
    ``case`` given, every case bus must be present. Use
    :meth:`TimeSeriesBundle.scaled` to obtain kW series.

    Raises:
        PipelineError: ``pipeline.missing_column``, ``pipeline.timestamp_order``
            (duplicate or decreasing timestamp), ``pipeline.length_mismatch``,
            ``pipeline.parse``, ``pipeline.range``, ``pipeline.missing_file``.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    per_bus = defaultdict(list)
    system = {}
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise PipelineError(f"time-series file not found: {path}", code="pipeline.missing_file")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in SERIES_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise PipelineError(f"{path}: missing columns {missing}", code="pipeline.missing_column")
            for lineno, row in enumerate(reader, start=2):
                where = f"{path}:{lineno}"
                ts = row["timestamp"].strip()
                when = _parse_time(ts)
                try:
                    bus = int(row["bus"])
                except ValueError:
                    raise PipelineError(f"{where}: bad bus id", code="pipeline.parse") from None
                rows = per_bus[bus]
                if rows and when <= rows[-1][0]:
                    kind = "duplicated" if when == rows[-1][0] else "decreasing"
                    raise PipelineError(f"{where}: {kind} timestamp {ts} for bus {bus}",
                                        code="pipeline.timestamp_order")
                rows.append((when, ts, [_float(row, c, where) for c in NORMALIZED]))
                sys_vals = (_float(row, "temp_out", where), _float(row, "grid_price", where))
                if system.setdefault(ts, sys_vals) != sys_vals:
                    raise PipelineError(f"{where}: temp_out/grid_price differ between buses at {ts}",
                                        code="pipeline.inconsistent")
    if not per_bus:
        raise PipelineError("no time-series rows", code="pipeline.length_mismatch")
    buses = sorted(per_bus)
    stamps = [ts for _, ts, _ in per_bus[buses[0]]]
    for b in buses:
        if [ts for _, ts, _ in per_bus[b]] != stamps:
            raise PipelineError(f"bus {b} has {len(per_bus[b])} rows or different timestamps than "
                                f"bus {buses[0]} ({len(stamps)})", code="pipeline.length_mismatch")
    if case is not None:
        absent = [node for node in case.node_ids if node not in per_bus]
        if absent:
            raise PipelineError(f"series has no rows for buses {absent}", code="pipeline.missing_bus")
    values = np.array([[v for _, _, v in per_bus[b]] for b in buses])  # (n, T, 3)
    return TimeSeriesBundle(stamps, buses, values[:, :, 0].T, values[:, :, 1].T, values[:, :, 2].T,
                            np.array([system[ts][0] for ts in stamps]),
                            np.array([system[ts][1] for ts in stamps]))


def write_timeseries(bundle: TimeSeriesBundle, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for t, ts in enumerate(bundle.timestamps):
            for j, bus in enumerate(bundle.buses):
                w.writerow([ts, bus, _fmt(bundle.load_p[t, j]), _fmt(bundle.load_q[t, j]),
                            _fmt(bundle.res_p[t, j]), _fmt(bundle.temp_out[t]),
                            _fmt(bundle.grid_price[t])])
    return path


@dataclass(frozen=True)
class FleetRecord:
    """One fleet CSV row; ``values`` holds the non-empty numeric columns."""

    unit_id: str
    kind: str
    bus: int
    values: dict

    def get(self, name, default=None):
        return self.values.get(name, default)


def read_fleet(path) -> list[FleetRecord]:
    path = Path(path)
    if not path.is_file():
        raise PipelineError(f"fleet file not found: {path}", code="pipeline.missing_file")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("unit_id", "kind", "bus") if c not in (reader.fieldnames or [])]
        if missing:
            raise PipelineError(f"{path}: missing columns {missing}", code="pipeline.missing_column")
        unknown = [c for c in reader.fieldnames if c not in FLEET_COLUMNS]
        if unknown:
            raise PipelineError(f"{path}: unknown columns {unknown}", code="pipeline.unknown_column")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            try:
                kind = Kind(row["kind"].strip().upper()).value
            except ValueError:
                raise PipelineError(f"{where}: unknown kind {row['kind']!r}", code="pipeline.kind") from None
            values = {c: _float(row, c, where) for c in FLEET_COLUMNS[3:]
                      if row.get(c) not in (None, "")}
            try:
                bus = int(row["bus"])
            except ValueError:
                raise PipelineError(f"{where}: bad bus id", code="pipeline.parse") from None
            required = _TCL_REQUIRED if Kind(kind).is_thermal else _STORAGE_REQUIRED
            absent = [c for c in required if c not in values]
            if absent:
                raise PipelineError(f"{where}: {kind} unit needs {absent}", code="pipeline.missing_column")
            out.append(FleetRecord(row["unit_id"], kind, bus, values))
    ids = [r.unit_id for r in out]
    if len(set(ids)) != len(ids):
        raise PipelineError(f"{path}: duplicate unit ids", code="pipeline.duplicate_unit")
    return out


def write_fleet(records: Sequence[FleetRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLEET_COLUMNS)
        for r in records:
            w.writerow([r.unit_id, r.kind, r.bus] +
                       [_fmt(r.values[c]) if c in r.values else "" for c in FLEET_COLUMNS[3:]])
    return path


def physical_params(record: FleetRecord, outdoor) -> TclPhysical | StoragePhysical:
    v = record.values
    kind = Kind(record.kind)
    if kind.is_thermal:
        T = len(outdoor)
        opt = lambda name: None if name not in v else np.full(T, v[name])  # noqa: E731
        return TclPhysical(kind, v["thermal_capacity"], v["thermal_resistance"], v["efficiency"],
                           v["t_min"], v["t_max"], v["t_set"], v["p_rated"],
                           np.asarray(outdoor, dtype=float), opt("pref_min"), opt("pref_max"))
    kw = {c: v[c] for c in STORAGE_COLUMNS if c in v}
    return StoragePhysical(kind, **kw)


def fleet_units(records: Sequence[FleetRecord], horizon: Horizon, outdoor) -> list[FleetUnit]:
    """Transform fleet records into unified units with their uncertainty specs."""
    units = []
    for r in records:
        phys = physical_params(r, outdoor)
        params = transform_to_ges(phys, horizon)
        g = r.get
        spec = spec_from_widths(params, soc_std=g("std_soc", 0.0), power_rel_std=g("std_power", 0.0),
                                capacity_rel_std=g("std_capacity", 0.0),
                                beta_std=g("std_beta", 0.0), eta_std=g("std_eta", 0.0),
                                p_avail=g("p_avail", 1.0), mu=g("mu", 0.0), nu=g("nu", 0.0),
                                correlation=g("correlation", 0.0),
                                capacity_factor=g("capacity_factor", 1.0))
        units.append(FleetUnit(r.unit_id, r.bus, params, spec, phys))
    return units

