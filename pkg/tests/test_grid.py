import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebnd.domains import make_disk, make_halfplane
from freebnd.grid import (GridSpec, HarmonicPair, ScalarField, UnderResolvedError,
                          UnsupportedDimensionError, build_pair, greens_function,
                          harmonic_measure_of_ball, solve_dirichlet, total_flux, unit_ball_volume, zoom)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 1), (4, 4))
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 2), (16, 16))  # anisotropic
    with pytest.raises(UnsupportedDimensionError):
        GridSpec((0,) * 4, (1,) * 4, (8,) * 4)
    spec = GridSpec((0, 0), (1, 2), (16, 32))
    assert spec.h == pytest.approx(1 / 16)
    assert spec.shape == (17, 33)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3),
       x=st.floats(-0.9, 0.9), y=st.floats(-0.9, 0.9))
def test_interpolation_exact_for_bilinear(a, b, c, x, y):
    spec = GridSpec.cube([0, 0], 1.0, 16)
    f = ScalarField.from_function(spec, lambda p: a * p[:, 0] + b * p[:, 1] + c * p[:, 0] * p[:, 1])
    assert f(np.array([[x, y]]))[0] == pytest.approx(a * x + b * y + c * x * y, abs=1e-12)


def test_field_arithmetic_and_parts():
    spec = GridSpec.cube([0, 0], 1.0, 16)
    f = ScalarField.from_function(spec, lambda p: p[:, 1])
    assert np.allclose((f.positive_part() - f.negative_part()).values, f.values)
    assert np.allclose((f * 2 + (-f)).values, f.values)
    with pytest.raises(ValueError):
        ScalarField(spec, np.full(spec.shape, np.nan))


def test_dirichlet_reproduces_harmonic_data():
    D = make_disk()
    spec = GridSpec.cube([0, 0], 1.25, 128)
    exact = lambda p: p[:, 0] ** 2 - p[:, 1] ** 2 + 0.5 * p[:, 0]  # noqa: E731
    u = solve_dirichlet(D, exact, spec, side=1)
    x = np.random.default_rng(1).uniform(-0.6, 0.6, (50, 2))
    assert np.max(np.abs(u(x) - exact(x))) < 2e-3


def test_disk_green_function_coarse():
    G = greens_function(make_disk(), [0, 0], GridSpec.cube([0, 0], 1.25, 256))
    r = np.linspace(0.2, 0.8, 13)
    pts = np.column_stack([r, 0 * r])
    assert np.max(np.abs(G(pts) / (np.log(1 / r) / (2 * np.pi)) - 1)) < 0.03


@pytest.fixture(scope="module")
def disk_pair():
    D = make_disk()
    G = greens_function(D, [0, 0], GridSpec.cube([0, 0], 1.25, 256))
    return HarmonicPair(D, G, G, np.zeros(2), np.zeros(2))


def test_disk_total_flux_and_arcs(disk_pair):
    assert total_flux(disk_pair, 1) == pytest.approx(1.0, rel=0.02)
    Q = np.array([math.cos(0.3), math.sin(0.3)])
    phi = math.pi / 2
    r = 2 * math.sin(phi / 4)  # the chord to the end of an arc of angle phi / 2 on each side
    assert harmonic_measure_of_ball(disk_pair, 1, Q, r) == pytest.approx(phi / (2 * math.pi), rel=0.03)


def test_measure_monotone_in_radius(disk_pair):
    Q = [0.0, -1.0]
    m = [harmonic_measure_of_ball(disk_pair, 1, Q, r) for r in (0.1, 0.2, 0.4, 0.8)]
    assert np.all(np.diff(m) > 0)


def test_zoom_improves_halfplane_density():
    pair = build_pair(make_halfplane(), GridSpec.cube([0, 0], 8, 256), [0, 1], [0, -1])
    z = zoom(pair, GridSpec.cube([0, 0], 0.5, 256))
    d = harmonic_measure_of_ball(z, 1, [0, 0], 0.05) / 0.1 * math.pi
    assert d == pytest.approx(math.atan(0.05) / 0.05, rel=0.02)


def test_under_resolved_radius():
    pair = build_pair(make_halfplane(), GridSpec.cube([0, 0], 2, 64), [0, 1], [0, -1])
    with pytest.raises(UnderResolvedError):
        harmonic_measure_of_ball(pair, 1, [0, 0], 0.01)
