"""Radial distribution network model and branch-flow (DistFlow) diagnostics.

Network quantities are per unit on the case bases: ``U`` is the squared
voltage magnitude, ``I`` the squared branch current, ``P``/``Q`` the sending
end branch flows. Load and RES series are stored in kW/kvar.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import GridError

DEFAULT_U_MIN = 0.95 ** 2
DEFAULT_U_MAX = 1.05 ** 2


@dataclass(frozen=True)
class GridCase:
    """Radial network with optional bus-indexed time series.

    Branches are stored oriented away from the substation; ``parent`` gives the
    upstream branch of every non-substation node.
    """

    node_ids: tuple
    u_min: np.ndarray
    u_max: np.ndarray
    p_nom_kw: np.ndarray
    q_nom_kvar: np.ndarray
    lc_max_frac: np.ndarray
    branch_from: np.ndarray
    branch_to: np.ndarray
    r: np.ndarray
    x: np.ndarray
    i_max: np.ndarray
    substation: int
    base_kv: float = 12.66
    base_mva: float = 1.0
    name: str = "case"
    u_substation: float = 1.0
    grid_import_max_kw: Optional[float] = None
    # (T, n) series in kW / kvar; None until attached with with_series().
    p_load: Optional[np.ndarray] = None
    q_load: Optional[np.ndarray] = None
    p_res: Optional[np.ndarray] = None
    q_res: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_branches(self) -> int:
        return len(self.r)

    @property
    def base_kw(self) -> float:
        return self.base_mva * 1000.0

    @property
    def periods(self) -> Optional[int]:
        return None if self.p_load is None else self.p_load.shape[0]

    def index_of(self, node_id) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise GridError(f"unknown bus {node_id!r}", code="grid.unknown_bus") from None

    def branch_index(self, from_id, to_id) -> int:
        i, j = self.index_of(from_id), self.index_of(to_id)
        hit = np.flatnonzero((self.branch_from == i) & (self.branch_to == j))
        if hit.size == 0:
            raise GridError(f"no branch {from_id}->{to_id}", code="grid.unknown_branch")
        return int(hit[0])

    @property
    def parent_branch(self) -> np.ndarray:
        """Index of the branch feeding each node (-1 at the substation)."""
        out = np.full(self.n_nodes, -1)
        out[self.branch_to] = np.arange(self.n_branches)
        return out

    def with_series(self, p_load, q_load, p_res, q_res=None) -> "GridCase":
        p_load = np.asarray(p_load, dtype=float)
        shape = p_load.shape
        if p_load.ndim != 2 or shape[1] != self.n_nodes:
            raise GridError(f"series must be (T, {self.n_nodes})", code="grid.series_shape")
        q_res = np.zeros(shape) if q_res is None else np.asarray(q_res, dtype=float)
        arrays = [np.asarray(a, dtype=float) for a in (q_load, p_res)]
        if any(a.shape != shape for a in arrays) or q_res.shape != shape:
            raise GridError("load and RES series shapes differ", code="grid.series_shape")
        return dataclasses.replace(self, p_load=p_load, q_load=arrays[0], p_res=arrays[1],
                                   q_res=q_res)

    def replace(self, **changes) -> "GridCase":
        return dataclasses.replace(self, **changes)


def _orient(n, sub, pairs):
    """Check radiality and orient edges away from ``sub`` (BFS order)."""
    if len(pairs) > n - 1:
        raise GridError(f"{len(pairs)} branches for {n} nodes: topology has a loop",
                        code="grid.cyclic")
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra == rb:
            raise GridError("topology has a loop", code="grid.cyclic")
        parent[ra] = rb
    if len(pairs) < n - 1 or len({find(k) for k in range(n)}) > 1:
        raise GridError("network is not connected", code="grid.disconnected")

    adj = [[] for _ in range(n)]
    for k, (a, b) in enumerate(pairs):
        adj[a].append((b, k))
        adj[b].append((a, k))
    frm = np.empty(len(pairs), dtype=int)
    to = np.empty(len(pairs), dtype=int)
    seen = {sub}
    queue = [sub]
    while queue:
        a = queue.pop(0)
        for b, k in adj[a]:
            if b not in seen:
                seen.add(b)
                frm[k], to[k] = a, b
                queue.append(b)
    return frm, to


def case_from_dict(data: dict) -> GridCase:
    try:
        nodes = data["nodes"]
        branches = data["branches"]
        sub_id = data["substation"]
        base = data.get("base", {})
    except (KeyError, TypeError) as exc:
        raise GridError(f"case file missing field {exc}", code="grid.schema") from None
    ids = tuple(nd["id"] for nd in nodes)
    if len(set(ids)) != len(ids):
        raise GridError("duplicate node ids", code="grid.schema")
    pos = {nid: k for k, nid in enumerate(ids)}
    if sub_id not in pos:
        raise GridError(f"substation {sub_id!r} is not a node", code="grid.schema")
    pairs, r, x, imax = [], [], [], []
    for br in branches:
        for key in ("r_pu", "x_pu"):
            if br.get(key) is None:
                raise GridError(f"branch {br.get('from')}->{br.get('to')} lacks {key}",
                                code="grid.impedance")
        if br["r_pu"] < 0 or br["x_pu"] < 0:
            raise GridError(f"branch {br['from']}->{br['to']} has negative impedance",
                            code="grid.impedance")
        if br["from"] not in pos or br["to"] not in pos:
            raise GridError(f"branch {br['from']}->{br['to']} references an unknown bus",
                            code="grid.unknown_bus")
        pairs.append((pos[br["from"]], pos[br["to"]]))
        r.append(float(br["r_pu"]))
        x.append(float(br["x_pu"]))
        imax.append(float(br.get("i_max_pu", np.inf)))
    frm, to = _orient(len(ids), pos[sub_id], pairs)
    u_min = np.array([nd.get("u_min_pu", DEFAULT_U_MIN) for nd in nodes], dtype=float)
    u_max = np.array([nd.get("u_max_pu", DEFAULT_U_MAX) for nd in nodes], dtype=float)
    if np.any(u_min >= u_max):
        raise GridError("voltage bounds need u_min < u_max", code="grid.voltage_bounds")
    return GridCase(
        node_ids=ids,
        u_min=u_min,
        u_max=u_max,
        p_nom_kw=np.array([nd.get("p_kw", 0.0) for nd in nodes], dtype=float),
        q_nom_kvar=np.array([nd.get("q_kvar", 0.0) for nd in nodes], dtype=float),
        lc_max_frac=np.array([nd.get("lc_max_frac", 1.0) for nd in nodes], dtype=float),
        branch_from=frm,
        branch_to=to,
        r=np.array(r),
        x=np.array(x),
        i_max=np.array(imax),
        substation=pos[sub_id],
        base_kv=float(base.get("kv", 12.66)),
        base_mva=float(base.get("mva", 1.0)),
        name=str(data.get("name", "case")),
        u_substation=float(data.get("u_substation_pu", 1.0)),
        grid_import_max_kw=data.get("grid_import_max_kw"),
    )


def case_to_dict(case: GridCase) -> dict:
    """Topology part of a case in the file schema (series are not included)."""
    ids = case.node_ids
    out = {
        "name": case.name,
        "base": {"kv": case.base_kv, "mva": case.base_mva},
        "substation": ids[case.substation],
        "u_substation_pu": case.u_substation,
        "nodes": [
            {"id": ids[k], "u_min_pu": float(case.u_min[k]), "u_max_pu": float(case.u_max[k]),
             "p_kw": float(case.p_nom_kw[k]), "q_kvar": float(case.q_nom_kvar[k]),
             "lc_max_frac": float(case.lc_max_frac[k])}
            for k in range(case.n_nodes)
        ],
        "branches": [
            {"from": ids[case.branch_from[b]], "to": ids[case.branch_to[b]],
             "r_pu": float(case.r[b]), "x_pu": float(case.x[b]),
             "i_max_pu": float(case.i_max[b])}
            for b in range(case.n_branches)
        ],
    }
    if case.grid_import_max_kw is not None:
        out["grid_import_max_kw"] = case.grid_import_max_kw
    return out


def bundled_case_path(name: str = "ieee33") -> Path:
    return Path(str(resources.files("gesrisk") / "cases" / f"{name}.json"))


def load_case(path=None) -> GridCase:
    """Load and validate a case file; ``None`` loads the bundled 33-bus feeder."""
    path = bundled_case_path() if path is None else Path(path)
    if not path.exists():
        raise GridError(f"case file {path} not found", code="grid.missing_file")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GridError(f"{path}: {exc}", code="grid.schema") from None
    return case_from_dict(data)


@dataclass(frozen=True)
class NetworkState:
    """Per-period branch flows, squared voltages, grid import and curtailment (p.u.).

    Branch arrays are ``(B, T)``, node arrays ``(n, T)``, grid import ``(T,)``.
    """

    P: np.ndarray
    Q: np.ndarray
    I: np.ndarray
    U: np.ndarray
    p_grid: np.ndarray
    q_grid: np.ndarray
    p_lc: np.ndarray
    q_lc: np.ndarray

    def replace(self, **changes) -> "NetworkState":
        return dataclasses.replace(self, **changes)


def distflow_residuals(state: NetworkState, case: GridCase) -> np.ndarray:
    """Voltage-drop residuals for every branch and period, shape ``(B, T)``."""
    i, j = case.branch_from, case.branch_to
    z2 = (case.r ** 2 + case.x ** 2)[:, None]
    return (state.U[i] - state.U[j] + z2 * state.I
            - 2 * (case.r[:, None] * state.P + case.x[:, None] * state.Q))


def distflow_residual(state: NetworkState, case: GridCase, branch: int, t: int) -> float:
    if not 0 <= branch < case.n_branches:
        raise GridError(f"unknown branch {branch}", code="grid.unknown_branch")
    return float(distflow_residuals(state, case)[branch, t])


def cone_gap_values(P, Q, I, U_from):
    """``(I + U) - ||(2P, 2Q, I - U)||``; zero exactly when ``I*U = P^2 + Q^2``."""
    P, Q, I, U_from = (np.asarray(a, dtype=float) for a in (P, Q, I, U_from))
    return (I + U_from) - np.sqrt(4 * P ** 2 + 4 * Q ** 2 + (I - U_from) ** 2)


def cone_gaps(state: NetworkState, case: GridCase) -> np.ndarray:
    return cone_gap_values(state.P, state.Q, state.I, state.U[case.branch_from])


def relative_cone_gaps(state: NetworkState, case: GridCase) -> np.ndarray:
    denom = np.maximum(state.I + state.U[case.branch_from], 1e-12)
    return cone_gaps(state, case) / denom


def cone_gap(state: NetworkState, case: GridCase, branch: int, t: int) -> float:
    if not 0 <= branch < case.n_branches:
        raise GridError(f"unknown branch {branch}", code="grid.unknown_branch")
    return float(cone_gaps(state, case)[branch, t])
