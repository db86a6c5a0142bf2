"""Post-solve diagnostics: residuals, relaxation exactness, complementarity, in-sample checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import NetworkState, distflow_residuals, relative_cone_gaps
from ..unit_model import apply_edu_boundaries, simulate_schedule
from .problem import ProblemDescription


@dataclass
class Diagnostics:
    eq_residual: dict
    ub_violation: dict
    bound_violation: float
    distflow_residual: np.ndarray
    distflow_flags: list
    cone_gap_rel: np.ndarray
    cone_flags: list
    complementarity: np.ndarray
    complementarity_flags: list
    in_sample_violations: int
    binding: dict
    warnings: list = field(default_factory=list)

    @property
    def max_feasibility_residual(self) -> float:
        vals = list(self.eq_residual.values()) + list(self.ub_violation.values())
        return float(max(vals + [self.bound_violation, 0.0]))

    @property
    def max_cone_gap_rel(self) -> float:
        return float(np.max(self.cone_gap_rel)) if self.cone_gap_rel.size else 0.0

    @property
    def max_complementarity(self) -> float:
        return float(np.max(self.complementarity)) if self.complementarity.size else 0.0

    @property
    def exact(self) -> bool:
        return not self.cone_flags

    def summary(self) -> dict:
        return {
            "max_feasibility_residual": self.max_feasibility_residual,
            "max_distflow_residual": float(np.max(np.abs(self.distflow_residual), initial=0.0)),
            "max_cone_gap_rel": self.max_cone_gap_rel,
            "max_complementarity_kw2": self.max_complementarity,
            "in_sample_violations": int(self.in_sample_violations),
            "binding": dict(sorted(self.binding.items())),
            "warnings": list(self.warnings),
        }


def _family_max(problem, A, b, blocks, x, signed):
    out = {}
    if A.shape[0] == 0:
        return out
    r = A @ x - b
    for blk in blocks:
        seg = r[blk.start:blk.stop]
        v = float(np.max(seg)) if signed else float(np.max(np.abs(seg)))
        out[blk.family] = max(out.get(blk.family, 0.0), max(v, 0.0))
    return out


def _binding(problem, x, tol):
    out = {}
    if problem.A_ub.shape[0]:
        slack = problem.b_ub - problem.A_ub @ x
        for blk in problem.ub_blocks:
            out[blk.family] = out.get(blk.family, 0) + int(np.sum(slack[blk.start:blk.stop] <= tol))
    return out


def in_sample_violations(problem: ProblemDescription, schedules, tol: float) -> int:
    """Count (scenario, unit, period) breaches of the enforced scenario constraints."""
    prices, horizon = problem.prices, problem.horizon
    if problem.model == "M1":
        scenario_sets = [problem.nominal]
    else:
        scenario_sets = problem.ges_scenarios
    count = 0
    for fleet in scenario_sets:
        for i, real in enumerate(fleet):
            sched = schedules[i]
            par = real.params
            count += int(np.sum(sched.p_ch > par.p_ch_max * real.available + tol))
            count += int(np.sum(sched.p_dis > par.p_dis_max * real.available + tol))
            soc = simulate_schedule(par, sched, horizon).end_of_period
            if problem.model == "M3":
                b = apply_edu_boundaries(par.soc_min, par.soc_max, sched, prices,
                                         problem.units[i].spec, par, horizon.dt)
                lo, hi = np.maximum(b.lo_raw, 0.0), np.minimum(b.hi_raw, 1.0)
            else:
                lo, hi = np.maximum(par.soc_min, 0.0), np.minimum(par.soc_max, 1.0)
            count += int(np.sum((soc < lo - tol) | (soc > hi + tol)))
    return count


def verify_solution(sol, problem: ProblemDescription, tol: float | None = None) -> Diagnostics:
    """Always returns diagnostics; warnings list every failed check."""
    cfg = problem.cfg
    tol = cfg.tol_feas if tol is None else tol
    x = sol.x
    eq = _family_max(problem, problem.A_eq, problem.b_eq, problem.eq_blocks, x, signed=False)
    ub = _family_max(problem, problem.A_ub, problem.b_ub, problem.ub_blocks, x, signed=True)
    bound = float(max(np.max(problem.lb - x, initial=0.0), np.max(x - problem.ub, initial=0.0)))

    case = problem.case
    states: list[NetworkState] = sol.schedule.network
    residuals = np.stack([distflow_residuals(s, case) for s in states]) if case.n_branches else np.zeros((0,))
    flags = [tuple(int(v) for v in idx) for idx in np.argwhere(np.abs(residuals) > tol)]
    gaps = np.stack([relative_cone_gaps(s, case) for s in states]) if case.n_branches else np.zeros((0,))
    cone_flags = [tuple(int(v) for v in idx) for idx in np.argwhere(gaps > cfg.tol_cone_rel)]

    schedules = sol.schedule.units
    comp = np.array([s.complementarity for s in schedules]) if schedules else np.zeros((0, problem.prices.periods))
    comp_flags = [tuple(int(v) for v in idx) for idx in np.argwhere(comp > cfg.tol_complementarity)]
    violations = in_sample_violations(problem, schedules, tol) if schedules else 0

    warnings = []
    if flags:
        warnings.append(f"voltage-drop residual above {tol:g} on {len(flags)} branch-periods")
    if cone_flags:
        warnings.append(f"relaxation inexact: relative cone gap above {cfg.tol_cone_rel:g} "
                        f"on {len(cone_flags)} branch-periods")
    if comp_flags:
        warnings.append(f"simultaneous charge and discharge on {len(comp_flags)} unit-periods")
    if violations:
        warnings.append(f"{violations} in-sample scenario violations")
    return Diagnostics(eq, ub, bound, residuals, flags, gaps, cone_flags, comp, comp_flags,
                       violations, _binding(problem, x, 1e-7), warnings)
