import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebnd.functionals import (LinearForm, RadialTrace, acf_J, almgren_H, almgren_N, log_radii,
                                 loglog_slope, monneau_M)
from freebnd.grid import GridSpec, ScalarField, UnderResolvedError

SPEC = GridSpec.cube([0, 0], 1.0, 128)


def poly(k, phase=0.0):
    return ScalarField.from_function(SPEC, lambda x: np.real(np.exp(1j * phase) * (x[:, 0] + 1j * x[:, 1]) ** k))


def test_radial_trace_validation():
    with pytest.raises(ValueError):
        RadialTrace([0, 0], [0.1, 0.2], [1, 2], "J")
    with pytest.raises(ValueError):
        RadialTrace([0, 0], [0.2, 0.1], [1, np.nan], "J")
    with pytest.raises(ValueError):
        RadialTrace([0, 0], [0.2, 0.1], [1, 2], "Z")
    t = RadialTrace([0, 0], [0.4, 0.2, 0.1], [3.0, 2.0, 1.0], "N")
    assert t.is_monotone()
    assert t.to_csv().splitlines()[0] == "kind,center,r,value,slack"


def test_log_radii_and_slope():
    r = log_radii(0.5, 0.05, 5)
    assert r[0] == pytest.approx(0.5) and r[-1] == pytest.approx(0.05)
    assert loglog_slope(r, 3 * r ** 1.5) == pytest.approx(1.5)


@settings(max_examples=10, deadline=None)
@given(k=st.integers(1, 3), phase=st.floats(0, math.pi), r=st.floats(0.15, 0.6))
def test_frequency_of_homogeneous_polynomials(k, phase, r):
    assert almgren_N(poly(k, phase), [0, 0], r) == pytest.approx(k, rel=0.02)


def test_acf_of_linear_function_is_constant():
    f = ScalarField.from_function(SPEC, lambda x: x[:, 1])
    vals = [acf_J(f, [0, 0], r) for r in (0.2, 0.5, 0.8)]
    assert np.allclose(vals, math.pi / 2, rtol=0.03)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.2, 3.0))
def test_acf_scaling(c):
    f = ScalarField.from_function(SPEC, lambda x: x[:, 1])
    assert acf_J(f * c, [0, 0], 0.5) == pytest.approx(c ** 2 * acf_J(f, [0, 0], 0.5), rel=1e-9)


def test_h_of_linear_function():
    f = ScalarField.from_function(SPEC, lambda x: x[:, 1])
    assert almgren_H(f, [0, 0], 0.5) == pytest.approx(math.pi * 0.5 ** 3, rel=1e-3)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), r=st.floats(0.13, 0.7))
def test_monneau_vanishes_for_exact_fit(a, b, r):
    f = ScalarField.from_function(SPEC, lambda x: a * x[:, 0] + b * x[:, 1])
    assert monneau_M(f, [a, b], [0, 0], r) < 1e-20
    p = LinearForm.from_vector([a, b])
    assert monneau_M(f, p, [0, 0], r) < 1e-20


def test_under_resolved_radius_raises():
    with pytest.raises(UnderResolvedError):
        almgren_N(poly(1), [0, 0], 0.05)
