"""Command-line entry point: ``gesrisk <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .dispatch import build_problem, solve_dispatch
from .errors import GesRiskError
from .pipeline.config import RunConfig, load_run_config
from .pipeline.data import fleet_units, ingest_timeseries, read_fleet, write_fleet, write_timeseries
from .pipeline.report import (emit_report, prices_from_dict, read_json, read_risk, schedules_from_dict,
                              write_comparison, write_json)
from .pipeline.run import context_of, prepare_inputs, run_or_exit_code
from .pipeline.synth import PROFILES, generate_synthetic_dataset
from .risk import assess_risk, summarize_comparison
from .unit_model import Horizon, size_class

log = logging.getLogger("gesrisk")


def _series_paths(values):
    return tuple(values) if values else ()


def _cmd_transform(args) -> int:
    records = read_fleet(args.fleet)
    if args.series:
        bundle = ingest_timeseries(args.series)
        horizon, outdoor = Horizon(bundle.periods, bundle.dt), bundle.temp_out
    else:
        if any(r.kind in ("IVA", "FFA") for r in records):
            raise GesRiskError("thermal units need --series for the outdoor temperature",
                               code="pipeline.config")
        horizon, outdoor = Horizon(args.periods, args.dt), np.zeros(args.periods)
    units = fleet_units(records, horizon, outdoor)
    payload = {"horizon": {"periods": horizon.periods, "dt": horizon.dt}, "units": []}
    for u in units:
        p = u.params
        fields = {f.name: getattr(p, f.name) for f in dataclasses.fields(p)}
        fields["kind"] = p.kind.value
        payload["units"].append({"unit_id": u.unit_id, "bus": u.bus, "params": fields,
                                 "size_class": size_class(p)})
    write_json(payload, args.out)
    return 0


def _run_config_from_args(args, **extra) -> RunConfig:
    overrides = {
        "case": args.case, "fleet": args.fleet, "out_dir": args.out, "seed": args.seed,
        "series": _series_paths(args.series) or None, **extra,
    }
    if args.config:
        return load_run_config(args.config, **overrides)
    return RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_optimize(args) -> int:
    cco = {"alpha": args.alpha} if args.alpha is not None else {}
    cfg = _run_config_from_args(args, variants=(args.model.upper(),))
    if cco:
        cfg = cfg.replace(cco={**cfg.cco, **cco})
    inputs = prepare_inputs(cfg)
    problem = build_problem(inputs.case, inputs.units, inputs.prices,
                            cfg.cco_config(cfg.variants[0]), inputs.horizon)
    sol = solve_dispatch(problem)
    emit_report(sol, None, cfg.out_dir, context_of(inputs, cfg))
    print(f"{sol.model}: {sol.status} objective={sol.objective:.6f}")
    return 0 if sol.optimal else 2


def _cmd_assess(args) -> int:
    data = read_json(args.solution)
    ids, schedules = schedules_from_dict(data)
    records = read_fleet(args.fleet)
    ctx = data.get("context", {})
    h = data["horizon"]
    horizon = Horizon(h["periods"], h["dt"])
    outdoor = np.asarray(ctx.get("temp_out") or np.zeros(horizon.periods), dtype=float)
    units = fleet_units(records, horizon, outdoor)
    if [u.unit_id for u in units] != ids:
        raise GesRiskError("fleet file does not match the solution's units", code="pipeline.fleet_mismatch")
    report = assess_risk(schedules, units, prices_from_dict(data), horizon, args.samples, args.seed,
                         include_edu=not args.no_edu)
    out = Path(args.out) if args.out else Path(args.solution).with_name("risk.json")
    write_json(report.to_dict(), out)
    print(f"LORP={report.lorp:.4f} (+-{report.lorp_half_width:.4f}) ERNS={report.erns:.4f} kWh")
    return 0


def _cmd_synth(args) -> int:
    bundle, records = generate_synthetic_dataset(args.seed, args.profile)
    out = Path(args.out)
    write_timeseries(bundle, out / "series.csv")
    write_fleet(records, out / "fleet.csv")
    print(f"wrote {out / 'series.csv'} and {out / 'fleet.csv'}")
    return 0


def _cmd_report(args) -> int:
    root = Path(args.runs)
    solutions, reports = {}, {}
    for sol_path in sorted(root.glob("*/solution.json")):
        name = sol_path.parent.name
        solutions[name] = read_json(sol_path)
        risk_path = sol_path.with_name("risk.json")
        if risk_path.exists():
            reports[name] = read_risk(risk_path)
    if not solutions:
        raise GesRiskError(f"no */solution.json under {root}", code="pipeline.missing_file")
    table = summarize_comparison(reports, solutions)
    path = write_comparison(table, Path(args.out) if args.out else root / "comparison.csv")
    print(f"wrote {path} ({len(table.rows)} rows)")
    return 0


def _cmd_run(args) -> int:
    overrides = {"out_dir": args.out, "seed": args.seed, "risk_samples": args.samples,
                 "variants": tuple(v.upper() for v in args.variants) if args.variants else None}
    if args.config:
        cfg = load_run_config(args.config, **overrides)
    else:
        cfg = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    return run_or_exit_code(cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gesrisk", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", help="physical fleet parameters -> unified storage parameters")
    t.add_argument("--fleet", required=True)
    t.add_argument("--series", nargs="*", help="time-series CSVs (outdoor temperature for thermal units)")
    t.add_argument("--periods", type=int, default=24)
    t.add_argument("--dt", type=float, default=1.0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_transform)

    o = sub.add_parser("optimize", help="solve one dispatch variant")
    o.add_argument("--config")
    o.add_argument("--case")
    o.add_argument("--series", nargs="*")
    o.add_argument("--fleet")
    o.add_argument("--model", choices=["m1", "m2", "m3", "M1", "M2", "M3"], default="m3")
    o.add_argument("--alpha", type=float)
    o.add_argument("--seed", type=int)
    o.add_argument("--out", required=True)
    o.set_defaults(func=_cmd_optimize)

    a = sub.add_parser("assess", help="Monte Carlo risk of a solved schedule")
    a.add_argument("--solution", required=True)
    a.add_argument("--fleet", required=True)
    a.add_argument("--samples", type=int, default=1000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--no-edu", action="store_true", help="ignore decision-dependent bounds")
    a.add_argument("--out")
    a.set_defaults(func=_cmd_assess)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--profile", choices=PROFILES, default=PROFILES[0])
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    r = sub.add_parser("report", help="tabulate variant directories of a run")
    r.add_argument("--runs", required=True)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_report)

    run = sub.add_parser("run", help="full pipeline from a config file")
    run.add_argument("--config")
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--samples", type=int)
    run.add_argument("--variants", nargs="+")
    run.set_defaults(func=_cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GesRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.code == "pipeline.config" else 1


if __name__ == "__main__":
    sys.exit(main())
