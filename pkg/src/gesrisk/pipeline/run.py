"""End-to-end orchestration: inputs, dispatch per variant, risk replay, artifacts."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..dispatch import build_problem, grid_scenarios, solve_dispatch
from ..errors import GesRiskError, PipelineError
from ..grid import load_case
from ..risk import assess_risk, sample_risk_realizations, summarize_comparison
from ..unit_model import Horizon, PriceSchedule
from .config import RunConfig
from .data import ResScaling, fleet_units, ingest_timeseries, read_fleet, write_fleet, write_timeseries
from .report import emit_report, write_comparison, write_json
from .synth import generate_synthetic_dataset

log = logging.getLogger(__name__)


@dataclass
class Inputs:
    case: object
    units: list
    prices: PriceSchedule
    horizon: Horizon
    bundle: object
    records: list


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    solutions: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    table: object = None
    errors: list = field(default_factory=list)


def prepare_inputs(cfg: RunConfig) -> Inputs:
    """Load or generate data and transform the fleet."""
    cfg.check_paths()
    case = load_case(cfg.case)
    if cfg.synthetic:
        bundle, records = generate_synthetic_dataset(cfg.seed, cfg.synthetic_profile,
                                                     buses=list(case.node_ids))
        inputs_dir = Path(cfg.out_dir) / "inputs"
        write_timeseries(bundle, inputs_dir / "series.csv")
        write_fleet(records, inputs_dir / "fleet.csv")
    else:
        bundle = ingest_timeseries(cfg.series, case)
        records = read_fleet(cfg.fleet)
    horizon = Horizon(bundle.periods, bundle.dt)
    case = bundle.scaled(case, ResScaling.uniform(cfg.res_rated_kw, cfg.res_buses))
    units = fleet_units(records, horizon, bundle.temp_out)
    prices = PriceSchedule.flat(bundle.grid_price, incentive=cfg.incentive, c_lc=cfg.c_lc)
    return Inputs(case, units, prices, horizon, bundle, records)


def context_of(inputs: Inputs, cfg: RunConfig) -> dict:
    """Replay context stored with every solution."""
    return {"timestamps": list(inputs.bundle.timestamps), "temp_out": inputs.bundle.temp_out,
            "seed": cfg.seed, "unit_ids": [u.unit_id for u in inputs.units]}


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Transform, build, solve and assess each requested variant, then tabulate.

    Exit code 0 only if every solve is optimal and no stage raised. Artifacts
    of finished variants are written even when a later stage fails.
    """
    out = Path(cfg.out_dir)
    result = RunResult(1, out)
    try:
        inputs = prepare_inputs(cfg)
    except GesRiskError as exc:
        result.errors.append(str(exc))
        raise
    out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.to_dict(), out / "config.json")
    ctx = context_of(inputs, cfg)

    first = cfg.cco_config(cfg.variants[0])
    k = first.n_grid_scenarios if first.grid_per_scenario else 0
    network = grid_scenarios(inputs.case, k, cfg.seed, first.load_std, first.res_std)
    realizations = None
    ok = True
    for variant in cfg.variants:
        cco = cfg.cco_config(variant)
        try:
            problem = build_problem(inputs.case, inputs.units, inputs.prices, cco, inputs.horizon,
                                    network=network)
            sol = solve_dispatch(problem)
        except GesRiskError as exc:
            log.error("%s failed: %s", variant, exc)
            result.errors.append(f"{variant}: {exc}")
            ok = False
            continue
        result.solutions[variant] = sol
        report = None
        if sol.optimal:
            if realizations is None:
                realizations = sample_risk_realizations(inputs.units, cfg.risk_samples, cfg.seed)
            report = assess_risk(sol.schedule.units, inputs.units, inputs.prices, inputs.horizon,
                                 cfg.risk_samples, cfg.seed, cfg.include_edu, realizations)
            result.reports[variant] = report
        else:
            log.error("%s solve not optimal: %s (%s)", variant, sol.status, sol.solver_status)
            ok = False
        emit_report(sol, report, out / variant, ctx)

    if result.solutions or result.reports:
        result.table = summarize_comparison(result.reports, result.solutions)
        write_comparison(result.table, out / "comparison.csv")
    result.exit_code = 0 if ok else 2
    return result


def run_or_exit_code(cfg: RunConfig) -> int:
    try:
        return run_pipeline(cfg).exit_code
    except PipelineError as exc:
        log.error("%s", exc)
        return 2 if exc.code == "pipeline.config" else 1
    except GesRiskError as exc:
        log.error("%s", exc)
        return 1
