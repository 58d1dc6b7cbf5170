"""
Uniform Cartesian grids, an embedded-boundary Laplace solver and
Green's functions with finite poles.

The discretisation is the standard 5-point (7-point in 3D) Laplacian.
Nodes adjacent to the zero level set of the domain's signed distance use
linear one-sided interpolation to the crossing point along the grid line
(a ghost value), which keeps the matrix symmetric positive definite so
that preconditioned conjugate gradients applies.

Harmonic measure is recovered as the boundary flux of the Green's
function: a one-sided second-order difference along the inward normal,
integrated over the boundary parameterisation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.ndimage import map_coordinates
from scipy.special import gamma as gamma_fn

if TYPE_CHECKING:
    from freebnd.domains import Domain

log = logging.getLogger(__name__)

SOLVER_RTOL = 1e-10
SOLVER_MAXITER = 1_000_000
# ghost-node fractions below this are clamped to keep the diagonal bounded
THETA_MIN = 1e-3


class SolverError(RuntimeError):
    """Linear solve did not reach tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final relative residual {residual:.3e})")
        self.residual = residual


class DegenerateDomainError(ValueError):
    """The discrete domain has no interior unknowns."""


class UnsupportedDimensionError(ValueError):
    pass


class UnderResolvedError(ValueError):
    """A requested radius or distance is below the grid resolution."""


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (k = 0 gives 1)."""
    return float(np.pi ** (k / 2) / gamma_fn(k / 2 + 1))


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return float(2 * np.pi ** (n / 2) / gamma_fn(n / 2))


@dataclass(frozen=True)
class GridSpec:
    """Isotropic node-centred grid over an axis-aligned box.

    Nodes sit at ``box_min + i * h`` for ``i = 0 .. n_cells`` on every axis.
    """

    box_min: tuple[float, ...]
    box_max: tuple[float, ...]
    n_cells: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "box_min", tuple(float(v) for v in self.box_min))
        object.__setattr__(self, "box_max", tuple(float(v) for v in self.box_max))
        object.__setattr__(self, "n_cells", tuple(int(v) for v in self.n_cells))
        d = len(self.box_min)
        if not (len(self.box_max) == d == len(self.n_cells)):
            raise ValueError("box_min, box_max and n_cells must have equal length")
        if d not in (2, 3):
            raise UnsupportedDimensionError(f"unsupported dimension {d}; grids are 2D or 3D")
        if min(self.n_cells) < 8:
            raise ValueError(f"n_cells must be >= 8 on every axis, got {self.n_cells}")
        widths = np.subtract(self.box_max, self.box_min)
        if np.any(widths <= 0):
            raise ValueError("box_max must exceed box_min on every axis")
        hs = widths / np.asarray(self.n_cells)
        if not np.allclose(hs, hs[0], rtol=1e-9, atol=0):
            raise ValueError(f"grid spacing must be isotropic, got {hs}")

    @classmethod
    def cube(cls, center, half_width: float, n: int, dimension: int | None = None) -> GridSpec:
        """Square/cubic grid of ``n`` cells per axis centred at ``center``."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if dimension is not None and c.size == 1:
            c = np.full(dimension, c[0])
        return cls(tuple(c - half_width), tuple(c + half_width), (n,) * c.size)

    @property
    def dimension(self) -> int:
        return len(self.n_cells)

    @property
    def h(self) -> float:
        return (self.box_max[0] - self.box_min[0]) / self.n_cells[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.n_cells)

    def axes(self) -> list[np.ndarray]:
        return [lo + self.h * np.arange(n + 1) for lo, n in zip(self.box_min, self.n_cells)]

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``(*shape, d)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        lo, hi = np.asarray(self.box_min), np.asarray(self.box_max)
        return np.all((p >= lo - 1e-12) & (p <= hi + 1e-12), axis=-1)

    def nearest_index(self, point) -> tuple[int, ...]:
        p = np.asarray(point, dtype=float)
        idx = np.rint((p - np.asarray(self.box_min)) / self.h).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.n_cells))
        return tuple(int(i) for i in idx)

    def node(self, index) -> np.ndarray:
        return np.asarray(self.box_min) + self.h * np.asarray(index, dtype=float)

    def distance_to_walls(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        lo, hi = np.asarray(self.box_min), np.asarray(self.box_max)
        return np.min(np.minimum(p - lo, hi - p), axis=-1)

    def as_dict(self) -> dict:
        return {"box_min": list(self.box_min), "box_max": list(self.box_max),
                "n_cells": list(self.n_cells)}


@dataclass
class ScalarField:
    """Node values on a :class:`GridSpec`, evaluated by multilinear interpolation."""

    spec: GridSpec
    values: np.ndarray
    _grad: list[np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.spec.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite at every node")

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> ScalarField:
        x = spec.nodes()
        vals = np.asarray(fn(x.reshape(-1, spec.dimension)), dtype=float).reshape(spec.shape)
        return cls(spec, vals)

    def _coords(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, self.spec.dimension)
        return ((p - np.asarray(self.spec.box_min)) / self.spec.h).T

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = map_coordinates(self.values, self._coords(pts), order=1, mode="nearest")
        return out.reshape(pts.shape[:-1]) if pts.ndim > 1 else out.reshape(())

    def gradient_nodes(self) -> list[np.ndarray]:
        """Centred-difference gradient at the nodes (one-sided on the walls)."""
        if self._grad is None:
            self._grad = list(np.gradient(self.values, self.spec.h, edge_order=2))
            if self.spec.dimension == 1:  # pragma: no cover - grids are 2D/3D
                self._grad = [self._grad]
        return self._grad

    def gradient(self, points) -> np.ndarray:
        """Interpolated gradient at ``points`` (shape ``(..., d)``)."""
        pts = np.asarray(points, dtype=float)
        c = self._coords(pts)
        comps = [map_coordinates(g, c, order=1, mode="nearest") for g in self.gradient_nodes()]
        return np.stack(comps, axis=-1).reshape(pts.shape)

    def map(self, fn) -> ScalarField:
        return ScalarField(self.spec, fn(self.values))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.spec, self.values + other.values)
        return ScalarField(self.spec, self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.spec, self.values - other.values)
        return ScalarField(self.spec, self.values - other)

    def __mul__(self, scalar: float):
        return ScalarField(self.spec, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.spec, -self.values)

    def positive_part(self) -> ScalarField:
        return ScalarField(self.spec, np.maximum(self.values, 0.0))

    def negative_part(self) -> ScalarField:
        return ScalarField(self.spec, np.maximum(-self.values, 0.0))


# ---------------------------------------------------------------------------
# embedded-boundary Laplacian


def _crossing_fraction(sdf, x0: np.ndarray, x1: np.ndarray, f0: np.ndarray,
                       f1: np.ndarray, n_iter: int = 40) -> np.ndarray:
    """Fraction t in (0, 1] along x0->x1 where ``sdf`` changes sign.

    ``f0 > 0 >= f1``.  Starts from the linear estimate and refines by
    bisection on the callback so curved boundaries are located to round-off.
    """
    lo = np.zeros(len(f0))
    hi = np.ones(len(f0))
    if len(f0) == 0:
        return lo
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        fm = sdf(x0 + mid[:, None] * (x1 - x0))
        pos = fm > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class _System:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior: np.ndarray  # flat indices of unknown nodes
    known: np.ndarray  # full-grid array of fixed values (boundary/outside)


def _assemble(domain: Domain, side: int, spec: GridSpec, boundary_values) -> _System:
    d = spec.dimension
    h = spec.h
    nodes = spec.nodes().reshape(-1, d)
    sdf = lambda p: side * np.asarray(domain.signed_distance(p), dtype=float)  # noqa: E731
    phi = sdf(nodes).reshape(spec.shape)
    wall = np.zeros(spec.shape, dtype=bool)
    for ax in range(d):
        sl = [slice(None)] * d
        sl[ax] = 0
        wall[tuple(sl)] = True
        sl[ax] = -1
        wall[tuple(sl)] = True
    inside = phi > 0
    unknown = inside & ~wall
    n_unknown = int(unknown.sum())
    if n_unknown == 0:
        raise DegenerateDomainError("domain has no interior grid nodes")

    known = np.zeros(spec.shape)
    if boundary_values is not None:
        known = np.asarray(boundary_values(nodes), dtype=float).reshape(spec.shape) * np.ones(spec.shape)
    known = np.where(unknown, 0.0, known)

    index = -np.ones(spec.shape, dtype=np.int64)
    index[unknown] = np.arange(n_unknown)
    flat_unknown = np.flatnonzero(unknown)

    rows, cols, vals = [], [], []
    diag = np.zeros(n_unknown)
    rhs = np.zeros(n_unknown)
    strides = np.array([int(np.prod(spec.shape[ax + 1:])) for ax in range(d)])
    multi = np.array(np.unravel_index(flat_unknown, spec.shape)).T

    for ax in range(d):
        for step in (-1, 1):
            nb_multi = multi.copy()
            nb_multi[:, ax] += step
            nb_flat = flat_unknown + step * strides[ax]
            nb_unknown = unknown.ravel()[nb_flat]
            nb_inside = inside.ravel()[nb_flat]
            i_rows = np.arange(n_unknown)

            # interior neighbour: symmetric off-diagonal coupling
            m = nb_unknown
            rows.append(i_rows[m])
            cols.append(index.ravel()[nb_flat[m]])
            vals.append(-np.ones(m.sum()))
            diag[m] += 1.0

            # wall node still inside the domain: Dirichlet value one cell away
            m = nb_inside & ~nb_unknown
            diag[m] += 1.0
            rhs[m] += known.ravel()[nb_flat[m]]

            # neighbour outside: ghost value from the crossing point
            m = ~nb_inside
            if np.any(m):
                x0 = nodes[flat_unknown[m]]
                x1 = nodes[nb_flat[m]]
                f0 = phi.ravel()[flat_unknown[m]]
                f1 = phi.ravel()[nb_flat[m]]
                theta = _crossing_fraction(sdf, x0, x1, f0, f1)
                theta = np.maximum(theta, THETA_MIN)
                diag[m] += 1.0 / theta
                if boundary_values is not None:
                    xg = x0 + theta[:, None] * (x1 - x0)
                    g = np.asarray(boundary_values(xg), dtype=float) * np.ones(len(xg))
                    rhs[m] += g / theta

    rows.append(np.arange(n_unknown))
    cols.append(np.arange(n_unknown))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_unknown, n_unknown))
    return _System(A, rhs, flat_unknown, known)


def _solve_spd(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b)
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=500)
    residuals: list[float] = []
    x = ml.solve(b, tol=SOLVER_RTOL, accel="cg", maxiter=SOLVER_MAXITER, residuals=residuals)
    rel = np.linalg.norm(b - A @ x) / bnorm
    if not np.isfinite(rel) or rel > 10 * SOLVER_RTOL:
        raise SolverError("conjugate gradient did not converge", float(rel))
    log.debug("CG converged in %d iterations, residual %.2e", len(residuals), rel)
    return x


def _check_dimension(domain: Domain, spec: GridSpec):
    if domain.dimension not in (2, 3):
        raise UnsupportedDimensionError(
            f"unsupported dimension {domain.dimension} for domain {domain.label!r}")
    if domain.dimension != spec.dimension:
        raise ValueError("domain and grid dimensions differ")


def solve_dirichlet(domain: Domain, boundary_values, spec: GridSpec, side: int = 1) -> ScalarField:
    """Discrete harmonic function in ``Omega^side`` with given Dirichlet data.

    ``boundary_values`` is a callable ``points (N, d) -> (N,)`` (or a
    constant) prescribing the data on the level set and on any box wall
    lying inside the domain.  Nodes outside the domain carry the data
    evaluated there, so the returned field is finite everywhere.
    """
    _check_dimension(domain, spec)
    bv = boundary_values if callable(boundary_values) else (lambda p, c=float(boundary_values): np.full(len(p), c))
    system = _assemble(domain, side, spec, bv)
    x = _solve_spd(system.matrix, system.rhs)
    vals = system.known.copy().ravel()
    vals[system.interior] = x
    return ScalarField(spec, vals.reshape(spec.shape))


def greens_function(domain: Domain, pole, spec: GridSpec, side: int = 1) -> ScalarField:
    """Green's function of ``Omega^side`` intersected with the grid box.

    The pole is a unit discrete delta on the nearest node; the field is zero
    outside the domain and on the box walls.
    """
    _check_dimension(domain, spec)
    pole = np.asarray(pole, dtype=float)
    h = spec.h
    clearance = min(side * float(np.asarray(domain.signed_distance(pole[None]))[0]),
                    float(spec.distance_to_walls(pole[None])[0]))
    if clearance < 4 * h:
        raise ValueError(f"pole {pole.tolist()} is within 4h of the boundary (clearance {clearance:.3g}, h={h:.3g})")
    system = _assemble(domain, side, spec, None)
    idx = np.ravel_multi_index(spec.nearest_index(pole), spec.shape)
    pos = np.searchsorted(system.interior, idx)
    rhs = np.zeros_like(system.rhs)
    # -Lap u = delta / h^d, scaled by h^2
    rhs[pos] = h ** (2 - spec.dimension)
    x = _solve_spd(system.matrix, rhs)
    vals = np.zeros(int(np.prod(spec.shape)))
    vals[system.interior] = x
    return ScalarField(spec, vals.reshape(spec.shape))


def resolve_window(field_: ScalarField, domain: Domain, spec: GridSpec, side: int = 1) -> ScalarField:
    """Re-solve a harmonic field on a finer grid covering a sub-box.

    Dirichlet data: zero on the level set, the coarse field's values on the
    new box walls.  The window must avoid the pole of a Green's function.
    """
    outer = field_.spec
    if not (np.all(np.asarray(spec.box_min) >= np.asarray(outer.box_min) - 1e-12)
            and np.all(np.asarray(spec.box_max) <= np.asarray(outer.box_max) + 1e-12)):
        raise ValueError("window must lie inside the source grid")

    # crossing points found by bisection sit within ~1e-12 h of the level
    # set; they must get exact zeros, not the interpolated coarse field
    cut = 1e-8 * spec.h

    def bv(p):
        inside = side * np.asarray(domain.signed_distance(p)) > cut
        return np.where(inside, field_(p), 0.0)

    return solve_dirichlet(domain, bv, spec, side=side)


# ---------------------------------------------------------------------------
# flux and harmonic measure


def normal_derivative(field_: ScalarField, points: np.ndarray, inward: np.ndarray,
                      step: float | None = None) -> np.ndarray:
    """One-sided second-order normal derivative of a field vanishing at ``points``.

    With ``u(0) = 0``: ``u'(0) ~ (4 u(s) - u(2s)) / (2 s)``.  The default
    ``s = 2h`` keeps both samples clear of cut cells.
    """
    s = 2 * field_.spec.h if step is None else step
    p = np.atleast_2d(points)
    nu = np.atleast_2d(inward)
    u1 = field_(p + s * nu)
    u2 = field_(p + 2 * s * nu)
    return (4 * u1 - u2) / (2 * s)


@dataclass
class HarmonicPair:
    """Green's functions of both sides of a two-sided domain.

    ``u_plus`` lives on Omega+ (zero elsewhere), ``u_minus`` on Omega-.
    Boundary densities are the Poisson-kernel values ``d omega / d sigma``
    obtained as fluxes.
    """

    domain: Domain
    u_plus: ScalarField
    u_minus: ScalarField
    pole_plus: np.ndarray
    pole_minus: np.ndarray
    # harmonic measure = boundary flux / measure_scale (1 for Green's functions)
    measure_scale: float = 1.0

    @property
    def spec(self) -> GridSpec:
        return self.u_plus.spec

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def field(self, side: int) -> ScalarField:
        return self.u_plus if side > 0 else self.u_minus

    def pole(self, side: int) -> np.ndarray:
        return self.pole_plus if side > 0 else self.pole_minus

    def density_at(self, side: int, points, outward_normals) -> np.ndarray:
        """Poisson kernel of ``Omega^side`` at boundary points."""
        inward = -np.asarray(outward_normals) if side > 0 else np.asarray(outward_normals)
        return np.maximum(normal_derivative(self.field(side), points, inward), 0.0)

    def boundary_density_plus(self, params) -> np.ndarray:
        pts, nrm = self.domain.boundary_param(np.atleast_2d(params))
        return self.density_at(+1, pts, nrm)

    def boundary_density_minus(self, params) -> np.ndarray:
        pts, nrm = self.domain.boundary_param(np.atleast_2d(params))
        return self.density_at(-1, pts, nrm)

    def h_at(self, Q, normal=None) -> float:
        """Pointwise density ratio ``h(Q) = (d omega^- / d sigma) / (d omega^+ / d sigma)``."""
        Q = np.asarray(Q, dtype=float)
        nrm = self.domain.outward_normal(Q[None]) if normal is None else np.atleast_2d(normal)
        dp = float(self.density_at(+1, Q[None], nrm)[0])
        dm = float(self.density_at(-1, Q[None], nrm)[0])
        if dp <= 0 or dm <= 0:
            raise ValueError(f"non-positive boundary density at {Q.tolist()}: {dp}, {dm}")
        return dm / dp

    @property
    def u(self) -> ScalarField:
        return self.u_plus - self.u_minus


def build_pair(domain: Domain, spec: GridSpec, pole_plus, pole_minus) -> HarmonicPair:
    """Solve both Green's functions for a two-sided domain on one grid."""
    up = greens_function(domain, pole_plus, spec, side=+1)
    um = greens_function(domain, pole_minus, spec, side=-1)
    return HarmonicPair(domain, up, um, np.asarray(pole_plus, float), np.asarray(pole_minus, float))


def harmonic_measure_of_ball(pair: HarmonicPair, side: int, Q, r: float,
                             spacing: float | None = None) -> float:
    """``omega^side(B(Q, r))`` as Green's-function flux through the boundary in the ball."""
    h = pair.spec.h
    if r < 4 * h - 1e-12:
        raise UnderResolvedError(f"radius {r:.4g} below 4h = {4 * h:.4g}")
    Q = np.asarray(Q, dtype=float)
    if np.linalg.norm(pair.pole(side) - Q) < r:
        raise ValueError("ball contains the pole")
    ds = spacing if spacing is not None else min(h / 4, r / 64)
    pts, nrm, w = pair.domain.sample_boundary(Q, r, ds)
    if len(pts) == 0:
        return 0.0
    keep = pair.spec.distance_to_walls(pts) > 4 * h
    dens = np.zeros(len(pts))
    if np.any(keep):
        dens[keep] = pair.density_at(side, pts[keep], nrm[keep])
    return float(np.sum(w * dens)) / pair.measure_scale


def wall_flux(fld: ScalarField) -> float:
    """Outward flux magnitude of a field vanishing on the box walls."""
    spec = fld.spec
    h = spec.h
    d = spec.dimension
    total = 0.0
    v = fld.values
    for ax in range(d):
        for end in (0, -1):
            s1 = [slice(None)] * d
            s2 = [slice(None)] * d
            if end == 0:
                s1[ax], s2[ax] = 1, 2
            else:
                s1[ax], s2[ax] = -2, -3
            u1 = v[tuple(s1)]
            u2 = v[tuple(s2)]
            dn = (4 * u1 - u2) / (2 * h)
            w = np.ones_like(dn) * h ** (d - 1)
            for k in range(dn.ndim):  # trapezoid ends
                sl = [slice(None)] * dn.ndim
                sl[k] = 0
                w[tuple(sl)] *= 0.5
                sl[k] = -1
                w[tuple(sl)] *= 0.5
            total += float(np.sum(np.maximum(dn, 0) * w))
    return total


def total_flux(pair: HarmonicPair, side: int, spacing: float | None = None) -> float:
    """Total Green's-function flux: level set inside the box plus the box walls."""
    spec = pair.spec
    h = spec.h
    ds = spacing if spacing is not None else h / 4
    pts, nrm, w = pair.domain.sample_boundary(None, None, ds, spec=spec)
    keep = spec.distance_to_walls(pts) > 2 * h
    dens = np.zeros(len(pts))
    if np.any(keep):
        dens[keep] = pair.density_at(side, pts[keep], nrm[keep])
    return (float(np.sum(w * dens)) + wall_flux(pair.field(side))) / pair.measure_scale


def boundary_density(pair: HarmonicPair, side: int, Q, r_list) -> "RadialTrace":
    """Trace of the normalised density ``omega(B(Q,r)) / (|B^{n-1}| r^{n-1})``.

    Normalising by the volume of the unit (n-1)-ball makes the value equal
    to the Poisson kernel at smooth boundary points.
    """
    from freebnd.functionals import RadialTrace

    radii = np.asarray(r_list, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("r_list must be strictly decreasing")
    n = pair.dimension
    c = unit_ball_volume(n - 1)
    vals = [harmonic_measure_of_ball(pair, side, Q, r) / (c * r ** (n - 1)) for r in radii]
    return RadialTrace(np.asarray(Q, float), radii, np.asarray(vals), "density",
                       slack=np.full(len(radii), pair.spec.h))


def zoom(pair: HarmonicPair, spec: GridSpec) -> HarmonicPair:
    """Restrict a pair to a finer grid on a sub-box that avoids both poles.

    Each phase is re-solved on ``spec`` with the coarse field as wall data,
    a fixed two-level nesting used to reach radii below the coarse
    resolution.
    """
    for side in (1, -1):
        if spec.contains(pair.pole(side)[None])[0]:
            raise ValueError("zoom window must not contain a pole")
    up = resolve_window(pair.u_plus, pair.domain, spec, side=1)
    um = resolve_window(pair.u_minus, pair.domain, spec, side=-1)
    return HarmonicPair(pair.domain, up, um, pair.pole_plus, pair.pole_minus, pair.measure_scale)
