"""Deterministic serialization of dispatch solutions, risk reports and plot data."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import PipelineError
from ..risk import ComparisonTable, RiskReport, solution_totals
from ..unit_model import PriceSchedule, UnitSchedule, apply_edu_boundaries

HISTOGRAM_BINS = 20


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(data, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_clean(data), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise PipelineError(f"cannot write {path}: {exc}", code="pipeline.io") from None
    return path


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PipelineError(f"file not found: {path}", code="pipeline.missing_file") from None
    except json.JSONDecodeError as exc:
        raise PipelineError(f"{path}: {exc}", code="pipeline.parse") from None


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise PipelineError(f"cannot write {path}: {exc}", code="pipeline.io") from None
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


def solution_to_dict(solution, context: Optional[dict] = None) -> dict:
    """Schedules, objective components, diagnostics and the inputs needed to replay them."""
    prob = solution.problem
    out = {
        "model": solution.model,
        "status": solution.status,
        "solver_status": solution.solver_status,
        "iterations": solution.iterations,
        "objective": solution.objective,
        "components": solution.components,
        "context": context or {},
    }
    if prob is not None:
        cfg = prob.cfg
        out["alpha"] = cfg.alpha
        out["n_scenarios"] = len(prob.ges_scenarios)
        out["n_grid_scenarios"] = len(prob.grid_scenarios) - 1
        out["horizon"] = {"periods": prob.horizon.periods, "dt": prob.horizon.dt}
        p = prob.prices
        out["prices"] = {"c_ch": p.c_ch, "c_dis": p.c_dis, "c_grid": p.c_grid, "c_lc": p.c_lc}
    if solution.schedule is not None:
        base = prob.case.base_kw
        nominal = solution.schedule.nominal
        out["totals"] = solution_totals(solution)
        out["units"] = [
            {"unit_id": u.unit_id, "bus": u.bus, "p_ch": s.p_ch, "p_dis": s.p_dis,
             "soc": s.soc if s.soc is not None else []}
            for u, s in zip(prob.units, solution.schedule.units)
        ]
        out["network"] = {
            "node_ids": list(prob.case.node_ids),
            "p_grid_kw": nominal.p_grid * base,
            "q_grid_kvar": nominal.q_grid * base,
            "p_lc_kw": (nominal.p_lc * base),
        }
    if solution.diagnostics is not None:
        out["diagnostics"] = solution.diagnostics.summary()
    return out


def schedules_from_dict(data: dict) -> tuple[list, list[UnitSchedule]]:
    """Unit ids and schedules stored in a ``solution.json``."""
    if not data.get("units"):
        raise PipelineError("solution has no schedules (solve was not optimal)",
                            code="pipeline.no_schedule")
    ids = [u["unit_id"] for u in data["units"]]
    return ids, [UnitSchedule(np.array(u["p_ch"], dtype=float), np.array(u["p_dis"], dtype=float))
                 for u in data["units"]]


def prices_from_dict(data: dict) -> PriceSchedule:
    p = data["prices"]
    return PriceSchedule(np.array(p["c_ch"]), np.array(p["c_dis"]), np.array(p["c_grid"]), p["c_lc"])


def write_comparison(table: ComparisonTable, path) -> Path:
    return _write_csv(path, table.columns, [[_cell(r.get(c)) for c in table.columns] for r in table.rows])


def read_comparison(path) -> tuple[list, list]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def voltage_rows(solution):
    """Voltage magnitude per scenario, node and period."""
    ids = solution.problem.case.node_ids
    for k, state in enumerate(solution.schedule.network):
        for j, node in enumerate(ids):
            for t in range(state.U.shape[1]):
                u = float(state.U[j, t])
                yield [k, node, t, _cell(u), _cell(math.sqrt(max(u, 0.0)))]


def soc_rows(solution):
    """Nominal SOC trajectory with its bounds; period 0 is the initial state."""
    prob = solution.problem
    nominal = prob.nominal
    dt = prob.horizon.dt
    for i, (unit, sched) in enumerate(zip(prob.units, solution.schedule.units)):
        par = nominal[i].params
        soc = sched.soc if sched.soc is not None else np.full(prob.horizon.periods, np.nan)
        edu = apply_edu_boundaries(par.soc_min, par.soc_max, sched, prob.prices, unit.spec, par, dt)
        yield [unit.unit_id, 0, _cell(par.soc0), "", "", "", ""]
        for t in range(prob.horizon.periods):
            yield [unit.unit_id, t + 1, _cell(soc[t]), _cell(par.soc_min[t]), _cell(par.soc_max[t]),
                   _cell(edu.lo[t]), _cell(edu.hi[t])]


def shortfall_histogram(report: RiskReport, bins: int = HISTOGRAM_BINS):
    data = np.asarray(report.scenario_shortfall, dtype=float)
    top = float(data.max()) if data.size else 0.0
    if top <= 0:
        return [[0.0, 0.0, int(data.size)]]
    counts, edges = np.histogram(data, bins=bins, range=(0.0, top))
    return [[_cell(edges[k]), _cell(edges[k + 1]), int(counts[k])] for k in range(bins)]


def emit_report(solution, report: Optional[RiskReport], out_dir, context: Optional[dict] = None) -> list:
    """Write one variant's artifacts; returns the written paths.

    Files: ``solution.json``, ``risk.json`` (when a report is given) and the
    plot-data CSVs ``voltage.csv``, ``soc.csv`` and ``shortfall_histogram.csv``.
    """
    out = Path(out_dir)
    written = [write_json(solution_to_dict(solution, context), out / "solution.json")]
    if report is not None:
        written.append(write_json(report.to_dict(), out / "risk.json"))
        written.append(_write_csv(out / "shortfall_histogram.csv", ("bin_lo_kwh", "bin_hi_kwh", "count"),
                                  shortfall_histogram(report)))
    if solution.schedule is not None:
        written.append(_write_csv(out / "voltage.csv", ("scenario", "node", "period", "u_pu2", "v_pu"),
                                  voltage_rows(solution)))
        written.append(_write_csv(out / "soc.csv",
                                  ("unit_id", "period", "soc", "soc_min", "soc_max", "edu_min", "edu_max"),
                                  soc_rows(solution)))
    return written


def read_risk(path) -> RiskReport:
    return RiskReport.from_dict(read_json(path))
