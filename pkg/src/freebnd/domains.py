"""
The domain zoo.

Every domain is two-sided: ``Omega+ = {signed_distance > 0}`` and
``Omega- = {signed_distance < 0}``.  The boundary comes with a
parameterisation whose normals point out of Omega+ (into Omega-), so
``-normal`` is the inward normal of Omega+.

The module also houses the Reifenberg flatness number, computed by a
plane search over a lattice of normals followed by Nelder-Mead.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, cKDTree

from freebnd.sphere import angles_to_unit, canonical_sign, fibonacci_lattice, unit_to_angles

ParamMap = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class Domain:
    """Two-sided domain with a signed-distance callback and a boundary chart.

    Parameters
    ----------
    dimension : int
        Ambient dimension.
    signed_distance : callable
        ``(N, d) -> (N,)``, positive in Omega+ and negative in Omega-.
        Only the sign and the zero set need to be exact.
    boundary_param : callable
        ``(N, d-1) -> (points (N, d), outward normals (N, d))``.
    param_window : callable
        ``(Q, r) -> (lo, hi)``: a parameter box whose image covers the
        boundary inside ``B(Q, r)``.
    label : str
    known_tangent : callable, optional
        ``Q -> unit normal`` where the exact normal is known.
    metadata : dict
        Free-form facts (Hölder data, expected log h, poles, ...).
    """

    dimension: int
    signed_distance: Callable[[np.ndarray], np.ndarray]
    boundary_param: ParamMap
    param_window: Callable
    label: str
    known_tangent: Callable | None = None
    metadata: dict = field(default_factory=dict)
    diameter: float = 2.0

    def sd(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.signed_distance(p), dtype=float)

    def outward_normal(self, points, step: float = 1e-6) -> np.ndarray:
        """Unit normal pointing out of Omega+ (minus the normalised sd gradient)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.known_tangent is not None:
            return np.atleast_2d(self.known_tangent(p))
        g = np.zeros_like(p)
        for k in range(self.dimension):
            e = np.zeros(self.dimension)
            e[k] = step
            g[:, k] = (self.sd(p + e) - self.sd(p - e)) / (2 * step)
        return -g / np.linalg.norm(g, axis=1, keepdims=True)

    def rescaled(self, Q, r: float) -> Domain:
        """The blown-up domain ``(Omega - Q) / r`` with the same chart parameters."""
        Q = np.asarray(Q, dtype=float)
        r = float(r)
        base = self

        def sd(p):
            return base.signed_distance(Q + r * np.atleast_2d(p)) / r

        def param(s):
            pts, nrm = base.boundary_param(s)
            return (pts - Q) / r, nrm

        def window(Q2, r2):
            return base.param_window(Q + r * np.asarray(Q2, float), r * r2)

        tangent = None
        if base.known_tangent is not None:
            def tangent(x):
                return base.known_tangent(Q + r * np.atleast_2d(x))

        return Domain(self.dimension, sd, param, window, f"{self.label}@{r:g}", tangent,
                      dict(self.metadata, blowup_center=Q.tolist(), blowup_radius=r),
                      diameter=self.diameter / r)

    def boundary_points(self, params) -> np.ndarray:
        return self.boundary_param(np.atleast_2d(params))[0]

    def sample_boundary(self, Q, r, ds: float, spec=None):
        """Quadrature of the boundary inside ``B(Q, r)`` (or inside a grid box).

        Returns ``(points, outward normals, surface weights)``.  Parameter
        cells are sized so that the arc spacing is about ``ds``; weights use
        the Gram determinant of the chart and a linear partial-coverage
        factor at the ball's rim, which keeps ball measures continuous in r.
        """
        if spec is not None:
            lo_b, hi_b = np.asarray(spec.box_min), np.asarray(spec.box_max)
            Qc = 0.5 * (lo_b + hi_b)
            rc = 0.5 * float(np.linalg.norm(hi_b - lo_b)) + ds
            pts, nrm, w = self._param_quadrature(Qc, rc, ds)
            keep = spec.contains(pts)
            return pts[keep], nrm[keep], w[keep]
        Q = np.asarray(Q, dtype=float)
        pts, nrm, w = self._param_quadrature(Q, r + ds, ds)
        dist = np.linalg.norm(pts - Q, axis=1)
        frac = np.clip(0.5 + (r - dist) / ds, 0.0, 1.0)
        keep = frac > 0
        return pts[keep], nrm[keep], (w * frac)[keep]

    def _param_quadrature(self, Q, r, ds):
        lo, hi = self.param_window(Q, r)
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        m = lo.size
        # chart speed per parameter direction, from a coarse probe of the window
        probe = [np.linspace(a, b, 9) for a, b in zip(lo, hi)]
        P = np.stack(np.meshgrid(*probe, indexing="ij"), axis=-1).reshape(-1, m)
        J = self._jacobian(P, np.maximum((hi - lo) * 1e-6, 1e-9))
        speed = np.max(np.linalg.norm(J, axis=1), axis=0)
        speed = np.maximum(speed, 1e-12)
        counts = np.maximum(np.ceil((hi - lo) * speed / ds).astype(int), 1)
        steps = (hi - lo) / counts
        axes = [a + s * (np.arange(c) + 0.5) for a, s, c in zip(lo, steps, counts)]
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        pts, nrm = self.boundary_param(P)
        J = self._jacobian(P, steps * 1e-3)
        gram = np.einsum("nki,nkj->nij", J, J)
        area = np.sqrt(np.maximum(np.linalg.det(gram), 0.0))
        w = area * float(np.prod(steps))
        return pts, nrm, w

    def _jacobian(self, P, eps):
        cols = []
        for k in range(P.shape[1]):
            e = np.zeros(P.shape[1])
            e[k] = eps[k]
            cols.append((self.boundary_points(P + e) - self.boundary_points(P - e)) / (2 * eps[k]))
        return np.stack(cols, axis=2)  # (N, d, m)


@dataclass
class FlatnessReport:
    """Reifenberg flatness number at ``(Q, r)`` and the plane achieving it."""

    Q: np.ndarray
    r: float
    theta: float
    best_plane_normal: np.ndarray


# ---------------------------------------------------------------------------
# half-space and disk


def make_halfplane(dimension: int = 2) -> Domain:
    """``Omega+ = {x_n > 0}``; boundary chart ``x' -> (x', 0)``."""
    n = int(dimension)
    if n < 2:
        raise ValueError("dimension must be at least 2")

    def sd(p):
        return p[:, -1]

    def param(s):
        s = np.atleast_2d(s)
        pts = np.column_stack([s, np.zeros(len(s))])
        nrm = np.zeros_like(pts)
        nrm[:, -1] = -1.0
        return pts, nrm

    def window(Q, r):
        Q = np.asarray(Q, float)
        return Q[:-1] - r, Q[:-1] + r

    def tangent(Q):
        out = np.zeros((len(np.atleast_2d(Q)), n))
        out[:, -1] = -1.0
        return out

    return Domain(n, sd, param, window, "halfplane", tangent,
                  {"holder_alpha": 1.0, "holder_seminorm": 0.0, "expected_log_h": None},
                  diameter=np.inf)


def make_disk(radius: float = 1.0) -> Domain:
    """Omega+ = open disk of the given radius (2D), Omega- its exterior."""
    R = float(radius)

    def sd(p):
        return R - np.linalg.norm(p, axis=1)

    def param(s):
        t = np.atleast_2d(s)[:, 0]
        nrm = np.column_stack([np.cos(t), np.sin(t)])
        return R * nrm, nrm

    def window(Q, r):
        Q = np.asarray(Q, float)
        a0 = math.atan2(Q[1], Q[0])
        dist = abs(np.linalg.norm(Q) - R)
        if r <= dist:
            return np.array([a0]), np.array([a0])
        if r >= 2 * R or np.linalg.norm(Q) < 1e-12:
            return np.array([a0 - np.pi]), np.array([a0 + np.pi])
        half = min(np.pi, 2 * math.asin(min(1.0, r / (2 * R))) * 1.05 + r / R)
        return np.array([a0 - half]), np.array([a0 + half])

    def tangent(Q):
        Q = np.atleast_2d(Q)
        return Q / np.linalg.norm(Q, axis=1, keepdims=True)

    return Domain(2, sd, param, window, "disk", tangent,
                  {"radius": R, "holder_alpha": 1.0}, diameter=2 * R)


# ---------------------------------------------------------------------------
# graph domains


@dataclass
class GraphFunction:
    """A C^{1,alpha} profile ``f(x')`` with its Hölder data.

    ``fn`` maps ``(N, n-1)`` arrays to ``(N,)``; ``grad`` is optional and
    defaults to central differences.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    alpha: float
    seminorm: float
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    description: str = ""

    def __call__(self, x):
        return np.asarray(self.fn(np.atleast_2d(x)), dtype=float)

    def gradient(self, x, step: float = 1e-6) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.grad is not None:
            return np.atleast_2d(self.grad(x)).reshape(x.shape)
        g = np.zeros_like(x)
        for k in range(x.shape[1]):
            e = np.zeros(x.shape[1])
            e[k] = step
            g[:, k] = (self(x + e) - self(x - e)) / (2 * step)
        return g


def power_profile(coef: float, exponent: float, dimension: int = 2) -> GraphFunction:
    """``f(x') = coef * |x'|^exponent``: C^{1, exponent-1} for exponent in (1, 2]."""
    def fn(x):
        return coef * np.linalg.norm(x, axis=1) ** exponent

    def grad(x):
        rho = np.linalg.norm(x, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = coef * exponent * rho ** (exponent - 2) * x
        return np.where(rho > 0, g, 0.0)

    alpha = min(1.0, exponent - 1) if exponent > 1 else 0.0
    semi = coef * exponent * 2 ** (1 - alpha) if exponent > 1 else np.inf
    return GraphFunction(fn, alpha, semi, grad, f"{coef}*|x'|^{exponent}")


def load_graph_table(path) -> GraphFunction:
    """Read a 2D profile table.

    Format: CSV with header ``x,f``; comment lines ``# alpha = 0.5`` and
    ``# seminorm = 0.15`` carry the Hölder data.  The profile is the
    cubic spline through the samples.
    """
    path = Path(path)
    meta = {}
    rows = []
    with path.open() as fh:
        lines = []
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                if "=" in s:
                    k, v = s[1:].split("=", 1)
                    meta[k.strip().lower()] = float(v)
                continue
            if s:
                lines.append(s)
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "f"]:
        raise ValueError(f"{path}: header must be 'x,f'")
    for i, row in enumerate(reader, start=2):
        try:
            rows.append((float(row["x"]), float(row["f"])))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad row {i}: {row}") from exc
    if len(rows) < 4:
        raise ValueError(f"{path}: need at least 4 samples")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite profile values")
    order = np.argsort(data[:, 0])
    data = data[order]
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: x values must be distinct")
    spline = CubicSpline(data[:, 0], data[:, 1], extrapolate=True)
    alpha = meta.get("alpha", 1.0)
    return GraphFunction(lambda x: spline(x[:, 0]), alpha, meta.get("seminorm", np.nan),
                         lambda x: spline(x[:, 0], 1)[:, None], f"table:{path.name}")


def make_graph_domain(f: GraphFunction | Callable, dimension: int = 2,
                      alpha: float | None = None, seminorm: float | None = None) -> Domain:
    """``Omega+ = {x_n > f(x')}``.

    The signed distance is the first-order estimate
    ``(x_n - f(x')) / sqrt(1 + |grad f|^2)``; its zero set is exact.

    Raises
    ------
    ValueError
        If ``f`` returns non-finite values on a probe set around the origin.
    """
    if not isinstance(f, GraphFunction):
        f = GraphFunction(f, alpha if alpha is not None else 1.0,
                          seminorm if seminorm is not None else np.nan)
    n = int(dimension)
    m = n - 1
    probe = np.linspace(-2, 2, 41)
    P = np.stack(np.meshgrid(*([probe] * m), indexing="ij"), axis=-1).reshape(-1, m)
    with np.errstate(all="ignore"):
        vals = f(P)
        grads = f.gradient(P)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(grads))):
        raise ValueError("graph profile has non-finite values")

    def sd(p):
        xp = p[:, :-1]
        g = f.gradient(xp)
        return (p[:, -1] - f(xp)) / np.sqrt(1 + np.sum(g ** 2, axis=1))

    def param(s):
        s = np.atleast_2d(s)
        g = f.gradient(s)
        pts = np.column_stack([s, f(s)])
        nrm = np.column_stack([g, -np.ones(len(s))])
        return pts, nrm / np.linalg.norm(nrm, axis=1, keepdims=True)

    def window(Q, r):
        Q = np.asarray(Q, float)
        return Q[:-1] - r, Q[:-1] + r

    def tangent(Q):
        Q = np.atleast_2d(Q)
        g = f.gradient(Q[:, :-1])
        nrm = np.column_stack([g, -np.ones(len(Q))])
        return nrm / np.linalg.norm(nrm, axis=1, keepdims=True)

    return Domain(n, sd, param, window, f"graph[{f.description}]", tangent,
                  {"holder_alpha": f.alpha, "holder_seminorm": f.seminorm}, diameter=np.inf)


# ---------------------------------------------------------------------------
# Lewy cone

# Degree-k homogeneous harmonic polynomials whose nodal set on S^2 has two
# components: Re((x+iy)^k) + t * z * (axially symmetric harmonic of degree k-1 in z).
# For k = 3 the axial part is 2z^3 - 3z(x^2+y^2) (the zonal cubic); two
# nodal domains occur for 0 < t < ~0.7 and t = 0.3 sits well inside.
LEWY_TABLE = {3: 0.3}


def lewy_cubic(t: float):
    """``p = Re((x+iy)^3) + t(2z^3 - 3z(x^2+y^2))`` and its gradient."""
    def p(X):
        x, y, z = X[:, 0], X[:, 1], X[:, 2]
        return x ** 3 - 3 * x * y ** 2 + t * (2 * z ** 3 - 3 * z * (x * x + y * y))

    def grad(X):
        x, y, z = X[:, 0], X[:, 1], X[:, 2]
        return np.column_stack([3 * x * x - 3 * y * y - 6 * t * x * z,
                                -6 * x * y - 6 * t * y * z,
                                t * (6 * z * z - 3 * (x * x + y * y))])

    return p, grad


def count_nodal_domains(p: Callable, n_points: int = 20000) -> int:
    """Number of sign components of ``p`` on a triangulated S^2 (flood fill)."""
    P = fibonacci_lattice(n_points, 3)
    tri = ConvexHull(P).simplices
    s = np.sign(p(P))
    e = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e = e[s[e[:, 0]] == s[e[:, 1]]]
    A = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(len(P), len(P)))
    return int(connected_components(A, directed=False)[0])


def _project_sphere_nodal(p, grad, X, n_iter=30):
    for _ in range(n_iter):
        X = X / np.linalg.norm(X, axis=-1, keepdims=True)
        g = grad(X)
        g = g - np.sum(g * X, axis=1, keepdims=True) * X
        X = X - (p(X) / np.sum(g * g, axis=1))[:, None] * g
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


def trace_nodal_curve(p, grad, start, step: float = 2e-3, max_steps: int = 200000) -> np.ndarray:
    """Follow the nodal curve of ``p`` on S^2 from ``start`` until it closes."""
    X = _project_sphere_nodal(p, grad, np.atleast_2d(np.asarray(start, float)))[0]
    pts = [X]
    for k in range(max_steps):
        g = grad(X[None])[0]
        tdir = np.cross(X, g)
        tdir /= np.linalg.norm(tdir)
        mid = _project_sphere_nodal(p, grad, (X + 0.5 * step * tdir)[None], 3)[0]
        g2 = grad(mid[None])[0]
        t2 = np.cross(mid, g2)
        t2 /= np.linalg.norm(t2)
        X = _project_sphere_nodal(p, grad, (X + step * t2)[None], 5)[0]
        pts.append(X)
        if k > 10 and np.linalg.norm(X - pts[0]) < 0.75 * step:
            break
    else:  # pragma: no cover
        raise RuntimeError("nodal curve did not close")
    return np.array(pts[:-1])


def make_lewy_cone(k: int = 3) -> Domain:
    """Cone over the nodal set of a Lewy harmonic polynomial (3D).

    The two nodal domains are antipodal images of each other.  The
    signed distance ``p / |grad p|`` is 1-homogeneous.  Boundary chart:
    ``(rho, s) -> rho * gamma(s)`` with ``gamma`` the arclength-periodic
    spline through the traced nodal curve on the unit sphere.
    """
    if k % 2 == 0:
        raise ValueError(f"Lewy cones need odd degree, got {k}")
    if k not in LEWY_TABLE:
        raise ValueError(f"no tabulated Lewy polynomial of degree {k}")
    t = LEWY_TABLE[k]
    p, grad = lewy_cubic(t)
    n_dom = count_nodal_domains(p)
    if n_dom != 2:  # pragma: no cover - guarded by the table
        raise RuntimeError(f"tabulated polynomial has {n_dom} nodal domains, expected 2")

    curve = trace_nodal_curve(p, grad, [0.0, -1.0, 0.0])
    seg = np.linalg.norm(np.diff(np.vstack([curve, curve[:1]]), axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    L = float(s[-1])
    spline = CubicSpline(s, np.vstack([curve, curve[:1]]), bc_type="periodic")

    def sd(X):
        g = np.linalg.norm(grad(X), axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = p(X) / g
        return np.where(g > 0, out, 0.0)

    def param(P):
        P = np.atleast_2d(P)
        rho, u = P[:, 0], np.mod(P[:, 1], L)
        gam = spline(u)
        gam /= np.linalg.norm(gam, axis=1, keepdims=True)
        g = grad(gam)
        nrm = -g / np.linalg.norm(g, axis=1, keepdims=True)
        return rho[:, None] * gam, nrm

    def window(Q, r):
        q = float(np.linalg.norm(Q))
        lo_rho, hi_rho = max(0.0, q - r), q + r
        if q > r and q > 0:
            half = math.asin(min(1.0, r / q))
            if half < 1.2:
                # restrict the arclength range to curve points whose direction is near Q/|Q|
                d = np.asarray(Q, float) / q
                ang = np.arccos(np.clip(spline(s[:-1]) @ d, -1, 1))
                near = s[:-1][ang <= half * 1.2 + 0.02]
                if near.size:
                    # handle wrap-around by centring on the closest sample
                    c = s[:-1][np.argmin(ang)]
                    rel = (near - c + L / 2) % L - L / 2
                    return (np.array([lo_rho, c + rel.min() - 0.01]),
                            np.array([hi_rho, c + rel.max() + 0.01]))
        return np.array([lo_rho, 0.0]), np.array([hi_rho, L])

    def tangent(X):
        g = grad(np.atleast_2d(X))
        return -g / np.linalg.norm(g, axis=1, keepdims=True)

    meta = {"degree": k, "t": t, "nodal_domains": n_dom, "curve_length": L,
            "expected_log_h": 0.0,
            "note": "log h = 0 holds for poles placed symmetrically (pole_minus = -pole_plus "
                    "on the z-axis) at boundary points fixed by (x,y,z) -> (-x,y,-z) "
                    "and its rotations by 120 degrees"}
    return Domain(3, sd, param, window, f"lewy{k}", tangent, meta, diameter=np.inf)


def lewy_symmetric_points(s: float) -> np.ndarray:
    """Boundary points of the cubic Lewy cone where h = 1 for z-axis poles.

    These are ``s * R^k (0, +-1, 0)`` with ``R`` the rotation by 120 degrees:
    fixed points of the map (x,y,z) -> (-x,y,-z) up to the 3-fold symmetry,
    which swaps the two sides and the two poles.
    """
    out = []
    for k in range(3):
        a = 2 * np.pi * k / 3
        for sgn in (-1.0, 1.0):
            out.append(s * sgn * np.array([-math.sin(a), math.cos(a), 0.0]))
    return np.array(out)


# ---------------------------------------------------------------------------
# quadratic cone in R^4


def make_quadratic_cone_r4() -> Domain:
    """``Omega+ = {x1^2 + x2^2 > x3^2 + x4^2}`` in R^4 (geometry only)."""
    def sd(X):
        return (np.hypot(X[:, 0], X[:, 1]) - np.hypot(X[:, 2], X[:, 3])) / math.sqrt(2)

    def param(P):
        P = np.atleast_2d(P)
        rho, a, b = P[:, 0], P[:, 1], P[:, 2]
        c = 1 / math.sqrt(2)
        u = np.column_stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)]) * c
        nrm = np.column_stack([-np.cos(a), -np.sin(a), np.cos(b), np.sin(b)]) * c
        return rho[:, None] * u, nrm

    def window(Q, r):
        q = float(np.linalg.norm(Q))
        return (np.array([max(0.0, q - r), -np.pi, -np.pi]),
                np.array([q + r, np.pi, np.pi]))

    return Domain(4, sd, param, window, "cone4", None,
                  {"note": "omega+ = omega- by the isometry swapping (x1,x2) and (x3,x4)"},
                  diameter=np.inf)


ZOO = {
    "halfplane": "upper half-plane {x_2 > 0} (2D)",
    "disk": "unit disk, exterior as Omega- (2D)",
    "graph:<file>": "{x_2 > f(x_1)} with f from a CSV table 'x,f' (2D)",
    "graph:power": "{x_2 > 0.3 |x_1|^1.5}, a C^{1,1/2} graph (2D)",
    "lewy3": "cone over the nodal set of a cubic Lewy polynomial (3D)",
    "cone4": "{x1^2+x2^2 > x3^2+x4^2} (4D, geometry only)",
}


def domain_by_name(name: str, dimension: int = 2) -> Domain:
    """Resolve a zoo name (``halfplane``, ``disk``, ``graph:<file>``, ``lewy3``, ``cone4``)."""
    if name == "halfplane":
        return make_halfplane(dimension)
    if name == "disk":
        return make_disk()
    if name == "graph:power":
        return make_graph_domain(power_profile(0.3, 1.5))
    if name.startswith("graph:"):
        return make_graph_domain(load_graph_table(name[len("graph:"):]))
    if name == "lewy3":
        return make_lewy_cone(3)
    if name == "cone4":
        return make_quadratic_cone_r4()
    raise ValueError(f"unknown domain {name!r}; known: {', '.join(ZOO)}")


# ---------------------------------------------------------------------------
# plane search


def _plane_disk(dimension: int, spacing: float) -> np.ndarray:
    """Lattice points of the unit (d-1)-ball at the given spacing."""
    m = dimension - 1
    k = int(math.ceil(1 / spacing))
    ax = np.linspace(-1, 1, 2 * k + 1)
    P = np.stack(np.meshgrid(*([ax] * m), indexing="ij"), axis=-1).reshape(-1, m)
    return P[np.linalg.norm(P, axis=1) <= 1 + 1e-12]


def _plane_basis(nu: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the hyperplane orthogonal to ``nu``."""
    d = nu.size
    q, _ = np.linalg.qr(np.column_stack([nu, np.eye(d)]))
    return q[:, 1:d].T


class PlaneSearch:
    """Minimise a plane-distance functional over unit normals.

    ``one_sided=True`` measures only the boundary-to-plane distance (the
    beta number); otherwise the two-sided Hausdorff distance (theta).
    """

    def __init__(self, points: np.ndarray, Q: np.ndarray, r: float, one_sided: bool):
        self.Q = np.asarray(Q, float)
        self.r = float(r)
        self.X = (points - self.Q) / self.r  # unit-scale coordinates
        self.d = self.X.shape[1]
        self.one_sided = one_sided
        if not one_sided:
            self.tree = cKDTree(self.X)
            self.disk = _plane_disk(self.d, 1 / 32 if self.d <= 3 else 1 / 8)

    def __call__(self, nu: np.ndarray) -> float:
        nu = np.asarray(nu, float)
        nu = nu / np.linalg.norm(nu)
        d1 = float(np.max(np.abs(self.X @ nu)))
        if self.one_sided:
            return d1
        plane = self.disk @ _plane_basis(nu)
        d2 = float(np.max(self.tree.query(plane)[0]))
        return max(d1, d2)

    def search(self, n_lattice: int, refine: bool = True) -> tuple[float, np.ndarray]:
        lattice = fibonacci_lattice(n_lattice, self.d)
        vals = np.array([self(v) for v in lattice])
        best = [lattice[i] for i in np.argsort(vals, kind="stable")[:3]]
        results = []
        for v0 in best:
            if refine:
                res = minimize(lambda a: self(angles_to_unit(a)), unit_to_angles(v0),
                               method="Nelder-Mead",
                               options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 400 * self.d})
                v, f = angles_to_unit(res.x), float(res.fun)
                if f > self(v0):
                    v, f = v0, self(v0)
            else:
                v, f = v0, self(v0)
            results.append((round(f, 12), tuple(canonical_sign(v)), v))
        results.sort(key=lambda t: (t[0], [-c for c in t[1]]))
        f, _, v = results[0]
        return float(f), canonical_sign(v)


def _boundary_in_ball(domain: Domain, Q, r, spacing=None, min_points=256):
    Q = np.asarray(Q, float)
    ds = spacing if spacing is not None else r / (64 if domain.dimension <= 3 else 20)
    pts, _, w = domain.sample_boundary(Q, r, ds)
    inside = np.linalg.norm(pts - Q, axis=1) <= r
    pts = pts[inside]
    if len(pts) == 0:
        raise ValueError(f"no boundary points in B({Q.tolist()}, {r})")
    if len(pts) < min_points:
        pts2, _, _ = domain.sample_boundary(Q, r, ds * len(pts) / (2 * min_points))
        pts = pts2[np.linalg.norm(pts2 - Q, axis=1) <= r]
    return pts


def reifenberg_theta(domain: Domain, Q, r: float, n_plane_samples: int = 128,
                     spacing: float | None = None) -> FlatnessReport:
    """Normalised Hausdorff distance from ``boundary ∩ B(Q,r)`` to the best plane through Q.

    Raises
    ------
    ValueError
        If ``n_plane_samples < 64`` or the ball holds no boundary points.
    """
    if n_plane_samples < 64:
        raise ValueError("n_plane_samples must be at least 64")
    pts = _boundary_in_ball(domain, Q, r, spacing)
    theta, nu = PlaneSearch(pts, Q, r, one_sided=False).search(n_plane_samples)
    return FlatnessReport(np.asarray(Q, float), float(r), theta, nu)


def one_sided_flatness(domain: Domain, Q, r: float, n_plane_samples: int = 128,
                       spacing: float | None = None) -> tuple[float, np.ndarray]:
    """Smallest normalised sup distance from ``boundary ∩ B(Q,r)`` to a plane through Q."""
    pts = _boundary_in_ball(domain, Q, r, spacing, min_points=128)
    return PlaneSearch(pts, Q, r, one_sided=True).search(n_plane_samples)


# ---------------------------------------------------------------------------
# graph test


@dataclass
class SlabReport:
    """Best single-crossing fraction over directions; 1.0 means a graph."""

    Q: np.ndarray
    r: float
    fraction: float
    direction: np.ndarray
    is_graph: bool


def _single_crossing_fraction(domain: Domain, Q, r: float, nu, n_lines: int, n_t: int) -> float:
    d = domain.dimension
    basis = _plane_basis(nu)
    base = _plane_disk(d, 2.0 / n_lines) * (r / 2)
    t = np.linspace(-r, r, n_t)
    pts = Q + (base @ basis)[:, None, :] + t[None, :, None] * nu
    s = (domain.sd(pts.reshape(-1, d)) > 0).reshape(len(base), n_t)
    crossings = np.count_nonzero(np.diff(s, axis=1) != 0, axis=1)
    return float(np.mean(crossings == 1))


def slab_graph_test(domain: Domain, Q, r: float, n_directions: int = 256,
                    n_lines: int = 12, n_t: int = 201) -> SlabReport:
    """Is ``boundary ∩ B(Q, r/2)`` a graph over some plane, seen through a slab?

    For each candidate normal the lines ``x' + t nu`` (``|x'| <= r/2`` in
    the plane, ``|t| <= r``) are scanned for sign changes of the signed
    distance.  The boundary is a graph in direction ``nu`` (on that
    cylinder) when every line crosses exactly once.
    """
    Q = np.asarray(Q, float)
    dirs = fibonacci_lattice(n_directions, domain.dimension)
    best, best_nu = -1.0, dirs[0]
    for nu in dirs:
        f = _single_crossing_fraction(domain, Q, r, nu, n_lines, n_t)
        if f > best:
            best, best_nu = f, nu
        if best == 1.0:
            break
    return SlabReport(Q, r, best, best_nu, best == 1.0)
