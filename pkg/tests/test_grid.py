"""Radial network case loading, DistFlow residuals and cone gaps."""

import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gesrisk.errors import GridError
from gesrisk.grid import (
    NetworkState,
    bundled_case_path,
    case_from_dict,
    case_to_dict,
    cone_gap,
    cone_gap_values,
    distflow_residual,
    load_case,
)

from helpers import two_bus_case


def _four_bus(branches):
    return {"name": "t", "substation": 1, "nodes": [{"id": k} for k in (1, 2, 3, 4)], "branches": branches}


def _br(a, b, r=0.01, x=0.01):
    return {"from": a, "to": b, "r_pu": r, "x_pu": x}


def state(P, Q, I, U):
    """Single-period state of a case; ``U`` has one entry per node."""
    P, Q, I = (np.atleast_2d(np.asarray(a, dtype=float)).reshape(-1, 1) for a in (P, Q, I))
    U = np.asarray(U, dtype=float).reshape(-1, 1)
    z = np.zeros(1)
    return NetworkState(P, Q, I, U, z, z, np.zeros_like(U), np.zeros_like(U))


def test_bundled_case_shape():
    case = load_case()
    assert case.n_nodes == 33
    assert case.n_branches == 32
    assert case.base_kv == 12.66
    # radial: every node but the substation has exactly one feeding branch
    parents = case.parent_branch
    assert parents[case.substation] == -1
    assert np.all(np.delete(parents, case.substation) >= 0)


def test_bundled_case_totals():
    case = load_case()
    # 3715 kW / 2300 kvar is the standard feeder total.
    assert case.p_nom_kw.sum() == pytest.approx(3715.0)
    assert case.q_nom_kvar.sum() == pytest.approx(2300.0)


def test_loop_rejected():
    data = _four_bus([_br(1, 2), _br(2, 3), _br(3, 1)])
    with pytest.raises(GridError) as exc:
        case_from_dict(data)
    assert exc.value.code == "grid.cyclic"


def test_disconnected_rejected():
    with pytest.raises(GridError) as exc:
        case_from_dict(_four_bus([_br(1, 2), _br(2, 3)]))
    assert exc.value.code == "grid.disconnected"


def test_missing_and_negative_impedance_rejected():
    bad = _br(3, 4)
    del bad["x_pu"]
    with pytest.raises(GridError) as exc:
        case_from_dict(_four_bus([_br(1, 2), _br(2, 3), bad]))
    assert exc.value.code == "grid.impedance"
    with pytest.raises(GridError) as exc:
        case_from_dict(_four_bus([_br(1, 2), _br(2, 3), _br(3, 4, r=-0.01)]))
    assert exc.value.code == "grid.impedance"


def test_error_codes_are_distinct():
    codes = set()
    for branches in ([_br(1, 2), _br(2, 3), _br(3, 1)], [_br(1, 2), _br(2, 3)],
                     [_br(1, 2), _br(2, 3), {"from": 3, "to": 4, "x_pu": 0.1}]):
        with pytest.raises(GridError) as exc:
            case_from_dict(_four_bus(branches))
        codes.add(exc.value.code)
    assert len(codes) == 3


def test_branches_oriented_away_from_substation():
    case = case_from_dict(_four_bus([_br(2, 1), _br(3, 2), _br(2, 4)]))
    assert case.node_ids[case.branch_from[case.branch_index(1, 2)]] == 1
    assert case.branch_index(2, 3) >= 0


def test_load_case_idempotent(tmp_path):
    case = load_case()
    path = tmp_path / "copy.json"
    path.write_text(json.dumps(case_to_dict(case)))
    again = load_case(path)
    for f in dataclasses.fields(case):
        a, b = getattr(case, f.name), getattr(again, f.name)
        if isinstance(a, np.ndarray):
            np.testing.assert_array_equal(a, b, err_msg=f.name)
        else:
            assert a == b, f.name


def test_missing_case_file(tmp_path):
    with pytest.raises(GridError) as exc:
        load_case(tmp_path / "nope.json")
    assert exc.value.code == "grid.missing_file"
    assert bundled_case_path().exists()


# ---- residuals and gaps ---------------------------------------------------

def test_flat_state_has_zero_residual():
    case = two_bus_case()
    assert distflow_residual(state(0, 0, 0, [1.0, 1.0]), case, 0, 0) == 0.0


def test_hand_set_residual():
    case = two_bus_case(r=0.02, x=0.05)
    s = state(0.3, 0.1, 0.12, [1.0, 0.97])
    want = 1.0 - 0.97 + (0.02 ** 2 + 0.05 ** 2) * 0.12 - 2 * (0.02 * 0.3 + 0.05 * 0.1)
    assert distflow_residual(s, case, 0, 0) == pytest.approx(want, abs=1e-16)


def test_unknown_branch():
    with pytest.raises(GridError):
        distflow_residual(state(0, 0, 0, [1.0, 1.0]), two_bus_case(), 3, 0)


def test_cone_gap_examples():
    assert cone_gap_values(0, 0, 0, 1.0) == 0.0
    assert cone_gap_values(1.0, 1.0, 1.0, 4.0) == pytest.approx(5 - math.sqrt(17), abs=1e-15)
    assert cone_gap_values(0.6, 0.8, 0.25, 4.0) == pytest.approx(0.0, abs=1e-15)


def test_two_bus_closed_form_is_exact():
    r, x = 0.03, 0.06
    pl, ql = 0.8, 0.4
    case = two_bus_case(r=r, x=x)
    # U0*I = (pl + r I)^2 + (ql + x I)^2, smaller root is the physical one.
    z2 = r * r + x * x
    a, b, c = z2, 2 * (r * pl + x * ql) - 1.0, pl * pl + ql * ql
    I = (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)
    P, Q = pl + r * I, ql + x * I
    U1 = 1.0 - 2 * (r * P + x * Q) + z2 * I
    s = state(P, Q, I, [1.0, U1])
    assert abs(distflow_residual(s, case, 0, 0)) <= 1e-9
    assert abs(cone_gap(s, case, 0, 0)) <= 1e-9


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 5), st.floats(0.01, 5))
def test_cone_gap_sign_flip_invariant(P, Q, I, U):
    assert cone_gap_values(P, Q, I, U) == cone_gap_values(-P, -Q, I, U)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 2), st.floats(1.0, 3.0))
def test_cone_gap_nonnegative_inside_cone(P, Q, U, slack):
    # Any I at or above (P^2+Q^2)/U satisfies the rotated cone.
    I = (P * P + Q * Q) / U * slack
    assert cone_gap_values(P, Q, I, U) >= -1e-12
