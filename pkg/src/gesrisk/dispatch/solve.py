"""Conic solve of a :class:`ProblemDescription` and solution extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import clarabel
import numpy as np
import scipy.sparse as sp

from ..grid import NetworkState
from ..unit_model import UnitSchedule
from .problem import CcoConfig, ProblemDescription

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class DispatchSchedule:
    """Fleet schedules plus the network trajectories of every load/RES scenario.

    ``network[0]`` is the nominal scenario.
    """

    units: list
    network: list

    @property
    def nominal(self) -> NetworkState:
        return self.network[0]


@dataclass
class DispatchSolution:
    status: str
    objective: float
    components: dict
    schedule: Optional[DispatchSchedule]
    x: Optional[np.ndarray]
    model: str
    solver_status: str = ""
    iterations: int = 0
    diagnostics: Optional[object] = None
    problem: Optional[ProblemDescription] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _conic_form(problem: ProblemDescription):
    """Stack the program as ``A x + s = b`` with cones (zero, nonnegative, SOC...)."""
    n = problem.n_vars
    lb, ub = problem.lb, problem.ub
    fixed = np.flatnonzero(lb == ub)
    has_ub = np.flatnonzero(np.isfinite(ub) & (lb != ub))
    has_lb = np.flatnonzero(np.isfinite(lb) & (lb != ub))
    eye = sp.identity(n, format="csr")
    blocks = [problem.A_eq, eye[fixed], problem.A_ub, eye[has_ub], -eye[has_lb], -problem.A_cone]
    rhs = [problem.b_eq, lb[fixed], problem.b_ub, ub[has_ub], -lb[has_lb],
           np.zeros(problem.A_cone.shape[0])]
    A = sp.vstack(blocks, format="csc")
    b = np.concatenate(rhs)
    cones = []
    n_zero = problem.A_eq.shape[0] + len(fixed)
    n_nonneg = problem.A_ub.shape[0] + len(has_ub) + len(has_lb)
    if n_zero:
        cones.append(clarabel.ZeroConeT(n_zero))
    if n_nonneg:
        cones.append(clarabel.NonnegativeConeT(n_nonneg))
    cones.extend(clarabel.SecondOrderConeT(4) for _ in range(problem.n_cones))
    return A, b, cones


def _settings(cfg: CcoConfig, verbose: bool, tight: bool = True):
    s = clarabel.DefaultSettings()
    s.verbose = verbose
    s.max_iter = 400
    s.max_threads = 1
    if tight:
        # Tighter than the defaults: loss terms are cheap, and a loose gap leaves
        # interior iterates off the cone boundary on lightly loaded branches.
        s.tol_gap_abs = 1e-10
        s.tol_gap_rel = 1e-11
        s.tol_feas = 1e-9
        s.tol_ktratio = 1e-9
    return s


def _objective_scale(c: np.ndarray) -> float:
    """Bring the largest cost coefficient to 10; currency units are irrelevant to the solver."""
    top = float(np.max(np.abs(c), initial=0.0))
    return 10.0 / top if top > 0 else 1.0


def _run_clarabel(problem, cfg, verbose, tight):
    A, b, cones = _conic_form(problem)
    P = sp.csc_matrix((problem.n_vars, problem.n_vars))
    c = problem.c * _objective_scale(problem.c)
    solver = clarabel.DefaultSolver(P, c, A, b, cones, _settings(cfg, verbose, tight))
    return solver.solve()


def extract_schedule(problem: ProblemDescription, x: np.ndarray) -> DispatchSchedule:
    vi = problem.var_index
    G = len(problem.units)
    p_ch = np.maximum(x[vi["p_ch"]], 0.0)
    p_dis = np.maximum(x[vi["p_dis"]], 0.0)
    nominal_soc = {}
    for copy in problem.soc_copies:
        if -1 in copy.members:
            nominal_soc[copy.unit] = x[copy.index]
    units = [UnitSchedule(p_ch[i], p_dis[i], nominal_soc.get(i)) for i in range(G)]
    tan_phi = np.divide(problem.case.q_nom_kvar, problem.case.p_nom_kw,
                        out=np.zeros(problem.case.n_nodes), where=problem.case.p_nom_kw > 0)
    p_lc = x[vi["p_lc"]]
    network = []
    for k in range(vi["U"].shape[0]):
        network.append(NetworkState(
            P=x[vi["P"][k]], Q=x[vi["Q"][k]], I=x[vi["I"][k]], U=x[vi["U"][k]],
            p_grid=x[vi["p_grid"][k]], q_grid=x[vi["q_grid"][k]],
            p_lc=p_lc, q_lc=p_lc * tan_phi[:, None],
        ))
    return DispatchSchedule(units, network)


def objective_components(problem: ProblemDescription, x: np.ndarray) -> dict:
    return {name: float(vec @ x) for name, vec in problem.c_parts.items()}


def solve_dispatch(problem: ProblemDescription, cfg: Optional[CcoConfig] = None,
                   verbose: bool = False, verify: bool = True) -> DispatchSolution:
    """Solve the conic program with an interior-point method.

    Status is ``optimal`` only when the solver converges and post-solve
    feasibility residuals are within ``cfg.tol_feas``.
    """
    from .verify import verify_solution

    cfg = cfg or problem.cfg
    sol = None
    # A tight solve first; default tolerances as a fallback when the tight run
    # stalls with residuals above tolerance.
    for tight in (True, False):
        result = _run_clarabel(problem, cfg, verbose, tight)
        status = str(result.status)
        log.info("%s solve: %s in %d iterations", problem.model, status, result.iterations)
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return DispatchSolution(INFEASIBLE, float("nan"), {}, None, None, problem.model,
                                    status, result.iterations, problem=problem)
        if status not in ("Solved", "AlmostSolved"):
            continue
        x = np.asarray(result.x, dtype=float)
        sol = DispatchSolution(OPTIMAL, float(problem.c @ x), objective_components(problem, x),
                               extract_schedule(problem, x), x, problem.model, status,
                               result.iterations, problem=problem)
        if not verify:
            return sol
        sol.diagnostics = verify_solution(sol, problem)
        if sol.diagnostics.max_feasibility_residual <= cfg.tol_feas:
            return sol
        log.warning("%s: residual %.2e above tolerance", problem.model,
                    sol.diagnostics.max_feasibility_residual)
    if sol is None:
        return DispatchSolution(NUMERICAL_FAILURE, float("nan"), {}, None, None, problem.model,
                                status, result.iterations, problem=problem)
    sol.status = NUMERICAL_FAILURE
    return sol
