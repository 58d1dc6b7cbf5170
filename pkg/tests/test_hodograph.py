import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebnd.domains import make_disk, make_halfplane
from freebnd.grid import GridSpec, build_pair
from freebnd.hodograph import (SYSTEM_WEIGHTS, WeightAssignment, coercivity_check, da_matrix,
                               ellipticity_check_n2, forward_map, hodograph_transform,
                               transformed_residual, weights_report_json, weights_validate)

pn = st.floats(0.1, 10)
pt = st.floats(-10, 10)


def test_da_matrix_frozen_value():
    # p = (1, 2): diagonal -1/2, off-diagonal 1/4, corner -(1 + 1)/8
    assert np.allclose(da_matrix([1.0, 2.0]), [[-0.5, 0.25], [0.25, -0.25]])
    with pytest.raises(ValueError):
        da_matrix([1.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(a=pt, b=pt, c=pn)
def test_da_negative_definite_3d(a, b, c):
    assert np.max(np.linalg.eigvalsh(da_matrix([a, b, c]))) < 0


@settings(max_examples=60, deadline=None)
@given(a=pt, b=pn, c=pt, d=pn, x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_root_pairs_conjugate(a, b, c, d, x, y):
    xi = np.array([1.0, x])
    eta = np.array([y, 1.0])
    if abs(1 - x * y) < 1e-3:
        return
    rep = ellipticity_check_n2([a, b], [c, d], xi, eta)
    assert rep.conjugate_error <= 1e-12 * max(1.0, max(abs(z) for z in rep.roots_psi + rep.roots_phi))
    assert rep.elliptic


@settings(max_examples=60, deadline=None)
@given(h0=st.floats(0.05, 20), a=pt, b=pn, c=pt, d=pn, xi=st.floats(0.1, 5))
def test_coercive_for_positive_h0(h0, a, b, c, d, xi):
    assert coercivity_check(h0, [a, b], [c, d], [xi]).coercive


def test_weights():
    ok, rep = weights_validate(SYSTEM_WEIGHTS)
    assert ok and all(rep.values())
    assert '"valid": true' in weights_report_json(SYSTEM_WEIGHTS)
    w = WeightAssignment.parse("2,2,0,0,1,1,2,1,0,0,0")
    assert w == SYSTEM_WEIGHTS
    with pytest.raises(ValueError):
        WeightAssignment.parse("1,2,3")


@settings(max_examples=60, deadline=None)
@given(vals=st.lists(st.integers(-3, 3), min_size=11, max_size=11))
def test_weights_verdict_is_conjunction(vals):
    ok, rep = weights_validate(WeightAssignment(*vals))
    assert ok == all(rep.values())


def test_halfplane_transform_is_identity_like():
    pair = build_pair(make_halfplane(), GridSpec.cube([0, 0], 2.0, 256), [0, 1], [0, -1])
    hp = hodograph_transform(pair, [0, 0], 0.25, normalize=True)
    rep = transformed_residual(hp)
    assert rep.sum_max < 1e-9
    assert rep.psi_max < 0.05


@pytest.fixture(scope="module")
def disk_hodograph():
    pair = build_pair(make_disk(), GridSpec.cube([0, 0], 2.0, 256), [0, 0], [0, -1.6])
    return pair, hodograph_transform(pair, [0, -1], 0.25, normalize=True)


def test_disk_transform_residuals(disk_hodograph):
    _, hp = disk_hodograph
    rep = transformed_residual(hp)
    assert rep.sum_max < 1e-9
    assert rep.psi_max < 0.01 and rep.phi_max < 0.1 and rep.flux_max < 0.05


def test_forward_map_round_trip(disk_hodograph):
    pair, hp = disk_hodograph
    spec = hp.spec
    lo, hi = np.array(spec.box_min), np.array(spec.box_max)
    y = np.random.default_rng(3).uniform(lo + 0.3 * (hi - lo), hi - 0.1 * (hi - lo), (40, 2))
    back = forward_map(pair, hp, y)
    assert np.max(np.abs(back - y)) < 0.02
