import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebnd.flatness import (FlatnessError, NotTransmissionError, TwoPlaneFit, best_two_plane,
                              default_rbar, harnack_gap_check, harnack_two_sided, improvement_step,
                              measure_squeeze, squeeze_holds, transmission_expand)


def U(t, gamma=1.0, g=1.0):
    return np.where(t > 0, gamma * t, g * gamma * t)


def test_fit_validation():
    with pytest.raises(FlatnessError):
        TwoPlaneFit([1.0, 1.0], 1.0, 0.0, 1.0)
    with pytest.raises(FlatnessError):
        TwoPlaneFit([0.0, 1.0], -1.0, 0.0, 1.0)


@settings(max_examples=15, deadline=None)
@given(phi=st.floats(-0.6, 0.6), gamma=st.floats(0.3, 3), g=st.floats(0.3, 3))
def test_exact_two_plane_recovered(phi, gamma, g):
    nu = np.array([np.sin(phi), np.cos(phi)])
    w = lambda x: U(x @ nu, gamma, g)  # noqa: E731
    fit = best_two_plane(w, g, [0, 0], 0.5)
    assert fit.eps / fit.r < 1e-6
    assert np.allclose(fit.nu, nu, atol=1e-5)
    assert fit.gamma == pytest.approx(gamma, rel=1e-5)


def test_squeeze_is_exact():
    w = lambda x: U(x[:, 1] + 0.01, 3.0, 2.0)  # noqa: E731
    fit = TwoPlaneFit([0.0, 1.0], 3.0, 0.0, 2.0, np.zeros(2), 0.5)
    eps = measure_squeeze(w, fit.nu, fit.gamma, fit.g_at_center, fit.center, fit.r, check_zero=False)
    assert eps == pytest.approx(0.01, rel=1e-9)
    assert squeeze_holds(w, fit, eps + 1e-9)
    assert not squeeze_holds(w, fit, eps - 1e-9)


def test_improvement_contracts_on_curved_solution():
    g, d = 2.0, 0.15
    w = lambda x: U(x[:, 1] + d * (x[:, 0] ** 2 - x[:, 1] ** 2), 1.0, g)  # noqa: E731
    fit = best_two_plane(w, g, [0, 0], 0.5)
    for _ in range(3):
        fit, rep = improvement_step(w, fit, fit.r / 4, 0.0, 1.0, 0.1)
        assert rep.contraction and rep.hypothesis_ok and rep.status == "ok"


def test_hypothesis_violation_is_reported():
    w = lambda x: U(x[:, 1] + 0.4 * x[:, 0] ** 2, 1.0, 2.0)  # noqa: E731
    fit = best_two_plane(w, 2.0, [0, 0], 0.5)
    _, rep = improvement_step(w, fit, 0.125, g_seminorm=10.0)
    assert rep.status == "hypothesis violated"


def test_default_rbar():
    assert default_rbar(1.0) == 0.25
    assert default_rbar(0.5) == pytest.approx(1 / 16)


def test_harnack_checks():
    eps = 0.05
    w = lambda x: U(x[:, 1] + eps * (1 + (x[:, 1] ** 2 - x[:, 0] ** 2) / 2), 1.0, 2.0)  # noqa: E731
    one = harnack_gap_check(w, 2.0, [0, 1], 1.0, eps)
    assert one.passed and 0 < one.c < 1
    two = harnack_two_sided(w, 2.0, [0, 1], 1.0, 0.0, 1.5 * eps)
    assert two.nested and two.shrink <= 1 - one.c


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2), r=st.floats(0.05, 0.5))
def test_transmission_bound_for_harmonic_quadratics(a, b, c, r):
    W = lambda x: a * x[:, 0] + b * x[:, 1] + c * (x[:, 1] ** 2 - x[:, 0] ** 2)  # noqa: E731
    e = transmission_expand(W, r, C=1.0 if c == 0 else 2.0)
    assert e.ok
    assert e.p == pytest.approx(b, abs=1e-6)


def test_transmission_rejects_flux_jump():
    W = lambda x: np.where(x[:, 1] > 0, 2 * x[:, 1], x[:, 1])  # noqa: E731
    with pytest.raises(NotTransmissionError):
        transmission_expand(W, 0.2)
