import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebnd.domains import (ZOO, count_nodal_domains, domain_by_name, lewy_cubic,
                             lewy_symmetric_points, load_graph_table, make_disk, make_graph_domain,
                             make_halfplane, one_sided_flatness, power_profile, reifenberg_theta,
                             slab_graph_test)


def test_zoo_names_resolve():
    for name in ZOO:
        if name == "graph:<file>":
            continue
        D = domain_by_name(name)
        assert D.dimension in (2, 3, 4)
    with pytest.raises(ValueError):
        domain_by_name("sphere")


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_halfplane_and_disk_signed_distance(x, y):
    p = np.array([[x, y]])
    assert make_halfplane().sd(p)[0] == pytest.approx(y)
    assert make_disk().sd(p)[0] == pytest.approx(1 - np.hypot(x, y))


@settings(max_examples=20, deadline=None)
@given(s=st.floats(-0.8, 0.8))
def test_graph_boundary_points_have_zero_distance(s):
    D = make_graph_domain(power_profile(0.3, 1.5))
    q = D.boundary_points([[s]])
    assert abs(D.sd(q)[0]) < 1e-9
    assert q[0, 1] == pytest.approx(0.3 * abs(s) ** 1.5)


def test_outward_normal_points_out_of_positive_side():
    D = make_halfplane()
    n = D.outward_normal(np.array([[0.3, 0.0]]))
    assert np.allclose(n, [[0.0, -1.0]], atol=1e-6)


def test_graph_table_roundtrip(tmp_path):
    x = np.linspace(-2, 2, 41)
    path = tmp_path / "profile.csv"
    path.write_text("# alpha = 0.5\n# seminorm = 0.3\nx,f\n" + "".join(f"{a},{0.1 * a * a}\n" for a in x))
    g = load_graph_table(path)
    assert g.alpha == 0.5
    D = domain_by_name(f"graph:{path}")
    assert D.sd(np.array([[0.5, 0.025]]))[0] == pytest.approx(0.0, abs=1e-6)


def test_graph_table_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0,0\n1,1\n2,2\n3,3\n")
    with pytest.raises(ValueError):
        load_graph_table(path)


def test_lewy_polynomial_nodal_domains_and_symmetric_points():
    p, _ = lewy_cubic(0.3)
    assert count_nodal_domains(p, 20000) == 2
    D = domain_by_name("lewy3")
    pts = lewy_symmetric_points(0.3)
    assert np.max(np.abs(D.sd(pts))) < 1e-12


def test_flatness_numbers_on_flat_and_curved():
    hp = make_halfplane()
    assert reifenberg_theta(hp, [0, 0], 0.5).theta < 0.01  # sampling floor of the two-sided distance
    assert one_sided_flatness(hp, [0, 0], 0.5)[0] < 1e-6
    D = make_graph_domain(power_profile(0.3, 1.5))
    th = [reifenberg_theta(D, [0, 0], r).theta for r in (1.0, 0.1)]
    assert th[1] < th[0]


def test_slab_test_separates_graph_from_cone():
    assert slab_graph_test(make_halfplane(), [0, 0], 0.5).is_graph
    assert not slab_graph_test(domain_by_name("cone4"), np.zeros(4), 0.5).is_graph
