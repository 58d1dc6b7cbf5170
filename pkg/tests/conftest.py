import os

import numpy as np
import pytest

from freebnd.domains import domain_by_name, lewy_symmetric_points, make_disk, make_halfplane
from freebnd.grid import GridSpec, build_pair, zoom

os.environ.setdefault("FREEBND_THREADS", "1")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def record():
    """Print and keep one PASS/FAIL line per acceptance criterion."""
    def _rec(number, checks):
        ok = all(v for _, v in checks)
        detail = "; ".join(f"{name}={'ok' if v else 'FAIL'}" for name, v in checks)
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return _rec


# --- shared solves (built once per session) ------------------------------


@pytest.fixture(scope="session")
def halfplane_wide():
    """Half-plane pair on a wide box, poles (0, +-1)."""
    return build_pair(make_halfplane(), GridSpec.cube([0, 0], 16, 512), [0, 1], [0, -1])


@pytest.fixture(scope="session")
def halfplane_zoom(halfplane_wide):
    return zoom(halfplane_wide, GridSpec.cube([0, 0], 0.5, 512))


@pytest.fixture(scope="session")
def halfplane_farpoles():
    """Half-plane pair with distant poles, zoomed to [-0.5, 0.5]^2: nearly a two-plane solution."""
    big = build_pair(make_halfplane(), GridSpec.cube([0, 0], 32, 512), [0, 8], [0, -8])
    return zoom(big, GridSpec.cube([0, 0], 0.5, 512))


@pytest.fixture(scope="session")
def halfplane_1024():
    return build_pair(make_halfplane(), GridSpec.cube([0, 0], 1.6, 1024), [0, 1], [0, -1])


@pytest.fixture(scope="session")
def disk_512():
    return build_pair(make_disk(), GridSpec.cube([0, 0], 2.0, 512), [0, 0], [0, -1.6])


@pytest.fixture(scope="session")
def graph_512():
    return build_pair(domain_by_name("graph:power"), GridSpec.cube([0, 0], 1.6, 512), [0, 1], [0, -1])


@pytest.fixture(scope="session")
def graph_2048():
    return build_pair(domain_by_name("graph:power"), GridSpec.cube([0, 0], 1.6, 2048), [0, 1], [0, -1])


@pytest.fixture(scope="session")
def lewy_zoom():
    D = domain_by_name("lewy3")
    Q = lewy_symmetric_points(0.3)[0]
    big = build_pair(D, GridSpec.cube([0, 0, 0], 2.0, 96), [0, 0, 1], [0, 0, -1])
    return zoom(big, GridSpec.cube(Q, 0.25, 96)), Q


@pytest.fixture
def rng():
    return np.random.default_rng(0)
