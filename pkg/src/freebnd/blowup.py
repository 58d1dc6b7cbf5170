"""
Blowups, tangent planes, densities and beta numbers.

Blowup normalisation
--------------------
A blowup of a pair at ``(Q, r)`` is

    u_r(x) = s_{n-1} * u(r x + Q) * r^{n-2} / F(B(Q, r)),

where ``F`` is the boundary flux (the harmonic measure for Green's
functions) and ``s_{n-1}`` the volume of the unit (n-1)-ball.  The factor
``s_{n-1}`` makes the blowup at a flat point converge to ``x . nu`` rather
than a multiple of it; the rescaled measure ``omega_r(E) = omega(rE+Q) /
omega(B(Q,r))`` is unchanged, because the blown-up pair carries
``measure_scale = s_{n-1}``.  Rescaling twice by ``r`` then ``s`` equals
rescaling once by ``r s``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from freebnd.domains import Domain, PlaneSearch, one_sided_flatness
from freebnd.functionals import RadialTrace, VField, loglog_slope
from freebnd.grid import (GridSpec, HarmonicPair, ScalarField, UnderResolvedError,
                          harmonic_measure_of_ball, sphere_area, unit_ball_volume)
from freebnd.sphere import sphere_rule


class DegenerateDensityError(ValueError):
    """The harmonic measure of a blowup ball is numerically zero."""


@dataclass
class BlowupSequence:
    """Rescaled copies of a pair (or of a v-field) at a fixed centre."""

    source: HarmonicPair | VField
    Q: np.ndarray
    radii: np.ndarray
    pairs: list  # HarmonicPair per radius (for a VField source: u+ and u- of the base)
    fields: list  # ScalarField per radius: u+ - u- for pairs, v for VField sources
    measures: np.ndarray  # omega^-(B(Q, r_j)) (or omega^+ for pairs), the normaliser

    def __len__(self):
        return len(self.radii)


def _resample(field_: ScalarField, Q, r, spec_unit: GridSpec, factor: float) -> ScalarField:
    x = spec_unit.nodes().reshape(-1, spec_unit.dimension)
    vals = field_(Q + r * x) * factor
    return ScalarField(spec_unit, vals.reshape(spec_unit.shape))


def unit_grid(dimension: int, n_cells: int = 64, half_width: float = 1.25) -> GridSpec:
    return GridSpec.cube(np.zeros(dimension), half_width, n_cells)


def rescale(source: HarmonicPair | VField, Q, radii, n_cells: int = 128,
            half_width: float = 1.25, min_measure: float = 1e-12) -> BlowupSequence:
    """Blow up ``source`` at Q along the given radii.

    Each rescaled field is resampled on a grid over ``[-half_width,
    half_width]^n``.

    Raises
    ------
    UnderResolvedError
        If ``r_j`` spans fewer than 8 source cells per unit length or the
        rescaled box leaves the source grid.
    DegenerateDensityError
        If the normalising harmonic measure is below ``min_measure``.
    """
    Q = np.asarray(Q, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing")
    pair = source.base if isinstance(source, VField) else source
    n = pair.dimension
    s = unit_ball_volume(n - 1)
    h_src = pair.spec.h
    unit = unit_grid(n, n_cells, half_width)
    pairs, fields, measures = [], [], []
    for r in radii:
        if r < 8 * h_src - 1e-12:
            raise UnderResolvedError(f"blowup radius {r:.4g} below 8h = {8 * h_src:.4g}")
        if pair.spec.distance_to_walls(Q[None])[0] < r * half_width - 1e-12:
            raise UnderResolvedError(f"blowup box at r = {r:.4g} leaves the source grid")
        flux = {side: harmonic_measure_of_ball(pair, side, Q, r) * pair.measure_scale
                for side in (1, -1)}
        if min(flux.values()) < min_measure:
            raise DegenerateDensityError(f"omega(B(Q, {r:.4g})) = {min(flux.values()):.3e}")
        dom = pair.domain.rescaled(Q, r)
        up = _resample(pair.u_plus, Q, r, unit, s * r ** (n - 2) / flux[1])
        um = _resample(pair.u_minus, Q, r, unit, s * r ** (n - 2) / flux[-1])
        bp = HarmonicPair(dom, up, um, (pair.pole_plus - Q) / r, (pair.pole_minus - Q) / r,
                          measure_scale=s)
        pairs.append(bp)
        if isinstance(source, VField):
            fields.append(_resample(source.field, Q, r, unit, s * r ** (n - 2) / flux[-1]))
            measures.append(flux[-1] / pair.measure_scale)
        else:
            fields.append(up - um)
            measures.append(flux[1] / pair.measure_scale)
    return BlowupSequence(source, Q, radii, pairs, fields, np.array(measures))


def zero_crossings(f: ScalarField) -> np.ndarray:
    """Points where ``f`` changes sign along grid edges (linear interpolation)."""
    spec = f.spec
    d = spec.dimension
    nodes = spec.nodes()
    v = f.values
    out = []
    for ax in range(d):
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[ax] = slice(0, -1)
        b[ax] = slice(1, None)
        va, vb = v[tuple(a)], v[tuple(b)]
        m = (va > 0) != (vb > 0)
        if not np.any(m):
            continue
        t = va[m] / (va[m] - vb[m])
        xa, xb = nodes[tuple(a)][m], nodes[tuple(b)][m]
        out.append(xa + t[:, None] * (xb - xa))
    return np.vstack(out) if out else np.zeros((0, d))


def zero_set_flatness(f: ScalarField, r: float = 1.0, n_lattice: int = 128) -> tuple[float, np.ndarray]:
    """Hausdorff distance from ``{f = 0} ∩ B_r`` to the best line/plane through 0, over r."""
    pts = zero_crossings(f)
    pts = pts[np.linalg.norm(pts, axis=1) <= r]
    if len(pts) == 0:
        raise ValueError("zero set misses the ball")
    return PlaneSearch(pts, np.zeros(f.spec.dimension), r, one_sided=False).search(n_lattice)


# ---------------------------------------------------------------------------
# tangent fits


@dataclass
class TangentFit:
    """``p~(x) = c (x . nu)`` with densities ``theta_minus = c``, ``theta_plus = c / h(Q)``."""

    Q: np.ndarray
    nu: np.ndarray
    theta_plus: float
    theta_minus: float
    l2_residual: float
    r: float = float("nan")
    ambiguous: bool = False

    @property
    def c(self) -> float:
        return self.theta_minus

    @property
    def vector(self) -> np.ndarray:
        return self.c * self.nu

    def __call__(self, x) -> np.ndarray:
        return self.c * (np.asarray(x) @ self.nu)


def fit_linear(f: ScalarField, x0, r: float) -> tuple[np.ndarray, float]:
    """Least-squares linear form on ``dB_r(x0)``: ``(a, r^-(n+1) int (f - a.x)^2)``.

    Since ``int_{dB_r} x x^T = |dB_r| r^2 / n * I``, the minimiser is
    ``a = n / (|dB_r| r^2) * int f x``, so no search is needed.
    """
    x0 = np.asarray(x0, float)
    n = f.spec.dimension
    if r < 8 * f.spec.h - 1e-12:
        raise UnderResolvedError(f"fit radius {r:.4g} below 8h")
    nodes, w = sphere_rule(n)
    y = r * nodes
    vals = f(x0 + y)
    area = sphere_area(n) * r ** (n - 1)
    ds = w * r ** (n - 1)
    a = n / (area * r * r) * (ds @ (vals[:, None] * y))
    resid = float(np.sum(ds * (vals - y @ a) ** 2) / r ** (n + 1))
    return a, resid


def fit_tangent(v: VField, Q=None, r: float = 0.1) -> TangentFit:
    """Tangent ``p~`` of ``v`` at Q minimising the Monneau residual at radius r."""
    Q = v.Q if Q is None else np.asarray(Q, float)
    a, resid = fit_linear(v.field, Q, r)
    c = float(np.linalg.norm(a))
    if c == 0:
        raise ValueError("fitted slope vanishes")
    nu = a / c
    return TangentFit(Q, nu, c / v.h_Q, c, resid, r)


def fits_to_csv(fits) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Q", "nu", "theta_plus", "theta_minus", "residual"])
    for f in fits:
        w.writerow([" ".join(f"{x:.17g}" for x in f.Q), " ".join(f"{x:.17g}" for x in f.nu),
                    f"{f.theta_plus:.17g}", f"{f.theta_minus:.17g}", f"{f.l2_residual:.17g}"])
    return buf.getvalue()


def flux_density(pair: HarmonicPair, side: int, Q, r: float) -> float:
    """``omega(B(Q, r)) / (s_{n-1} r^{n-1})``, the Poisson-kernel normalisation."""
    n = pair.dimension
    return harmonic_measure_of_ball(pair, side, Q, r) / (unit_ball_volume(n - 1) * r ** (n - 1))


@dataclass
class ContinuityReport:
    points: np.ndarray
    theta: np.ndarray
    max_jump: float
    mean: float


def density_continuity(pair: HarmonicPair, points, r: float, side: int = -1,
                       method: str = "flux") -> ContinuityReport:
    """Largest jump of ``Theta(Q_i)`` between consecutive boundary samples.

    ``method="flux"`` uses the ball density at radius r; ``"fit"`` uses the
    tangent slope of ``v^(Q_i)`` at radius r.
    """
    from freebnd.functionals import build_v

    pts = np.atleast_2d(np.asarray(points, float))
    if len(pts) < 16:
        raise ValueError("need at least 16 boundary samples")
    if method == "flux":
        th = np.array([flux_density(pair, side, q, r) for q in pts])
    elif method == "fit":
        th = []
        for q in pts:
            fit = fit_tangent(build_v(pair, q), q, r)
            th.append(fit.theta_minus if side < 0 else fit.theta_plus)
        th = np.array(th)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ContinuityReport(pts, th, float(np.max(np.abs(np.diff(th)))), float(np.mean(th)))


# ---------------------------------------------------------------------------
# flatness numbers


def beta_number(domain: Domain, Q, r: float, n_plane_samples: int = 128) -> float:
    """Normalised one-sided distance from ``boundary ∩ B(Q,r)`` to the best plane through Q."""
    return one_sided_flatness(domain, Q, r, n_plane_samples)[0]


def beta_trace(domain: Domain, Q, radii, n_plane_samples: int = 128) -> RadialTrace:
    vals = [beta_number(domain, Q, r, n_plane_samples) for r in radii]
    return RadialTrace(Q, radii, vals, "beta")


def modulus_of_flatness(v: VField, Q, r_list, fit: TangentFit) -> RadialTrace:
    """``sup_{|x| = r} |v(x + Q) - p~(x)| / r`` over the given radii."""
    Q = np.asarray(Q, float)
    n = v.spec.dimension
    nodes, _ = sphere_rule(n)
    vals = []
    for r in r_list:
        if r < 8 * v.spec.h - 1e-12:
            raise UnderResolvedError(f"radius {r:.4g} below 8h")
        y = r * nodes
        vals.append(float(np.max(np.abs(v.field(Q + y) - fit(y)))) / r)
    return RadialTrace(Q, r_list, vals, "modulus", slack=v.spec.h / np.asarray(r_list))


def decay_exponent(trace: RadialTrace) -> float:
    """Log-log slope of a positive trace against r."""
    return loglog_slope(trace.radii, np.maximum(trace.values, 1e-300))
