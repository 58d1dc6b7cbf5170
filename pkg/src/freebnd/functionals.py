"""
Monotonicity functionals evaluated on grid fields.

* ACF ``J(x, r)``: product of the weighted Dirichlet energies of the two
  phases, square-rooted and scaled by ``r^-2``.
* Almgren ``H``, ``D`` and the frequency ``N = r D / H``.
* Monneau ``M(r, p) = r^-(n+1) * int_{dB_r} (f - p)^2``.

Ball and sphere integrals use polar quadrature centred at the evaluation
point (:mod:`freebnd.sphere`).  In polar coordinates the ACF weight
``|x - y|^{2-n}`` combines with the Jacobian ``rho^{n-1}`` into the
bounded factor ``rho``, so no special treatment of the singular cell is
needed.  Gradients are centred differences on the grid, interpolated
multilinearly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from freebnd.grid import HarmonicPair, ScalarField, UnderResolvedError
from freebnd.sphere import ball_rule, sphere_rule

KINDS = ("J", "N", "M", "H", "D", "density", "modulus", "beta")


class DegenerateShellError(ValueError):
    """The sphere integral H vanishes to round-off."""


class NotAZeroError(ValueError):
    """The evaluation point is not on the zero set of the field."""


@dataclass
class RadialTrace:
    """Samples ``(r, value)`` of a functional on strictly decreasing radii.

    ``slack`` is the per-radius discretisation allowance used by the
    monotonicity checks.
    """

    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    kind: str
    slack: np.ndarray | None = None
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if self.radii.shape != self.values.shape or self.radii.ndim != 1:
            raise ValueError("radii and values must be 1D arrays of equal length")
        if np.any(self.radii <= 0) or np.any(np.diff(self.radii) >= 0):
            raise ValueError("radii must be positive and strictly decreasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace values must be finite")
        if self.slack is None:
            self.slack = np.zeros_like(self.values)
        self.slack = np.broadcast_to(np.asarray(self.slack, dtype=float), self.values.shape).copy()

    def __len__(self):
        return len(self.radii)

    def increments(self) -> np.ndarray:
        """``value(r_{k+1}) - value(r_k)``: change as the radius shrinks."""
        return np.diff(self.values)

    def monotone_violation(self, increasing_in_r: bool = True) -> float:
        """Largest amount by which the trace breaks monotonicity (0 if none).

        For ``increasing_in_r`` the values should not grow as r decreases.
        """
        inc = self.increments()
        bad = inc if increasing_in_r else -inc
        return float(max(0.0, bad.max(initial=0.0)))

    def is_monotone(self, increasing_in_r: bool = True) -> bool:
        return self.monotone_violation(increasing_in_r) <= float(self.slack.max(initial=0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "center", "r", "value", "slack"])
        c = " ".join(f"{x:.17g}" for x in self.center)
        for r, v, s in zip(self.radii, self.values, self.slack):
            w.writerow([self.kind, c, f"{r:.17g}", f"{v:.17g}", f"{s:.17g}"])
        return buf.getvalue()


def log_radii(r_max: float, r_min: float, count: int) -> np.ndarray:
    """``count`` log-spaced radii from ``r_max`` down to ``r_min``."""
    if count < 2 or r_min <= 0 or r_max <= r_min:
        raise ValueError("need count >= 2 and 0 < r_min < r_max")
    return np.geomspace(r_max, r_min, count)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log regression needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# v^(Q)


@dataclass
class VField:
    """``v = h(Q) u+ - u-`` for a boundary point Q of a harmonic pair."""

    base: HarmonicPair
    Q: np.ndarray
    h_Q: float
    field: ScalarField

    @property
    def spec(self):
        return self.field.spec

    @property
    def domain(self):
        return self.base.domain


def build_v(pair: HarmonicPair, Q, h_value: float | None = None) -> VField:
    """Form ``h(Q) u+ - u-`` with ``h(Q)`` the density ratio at Q.

    Raises
    ------
    ValueError
        If Q is not on the boundary or ``h(Q)`` is not positive.
    """
    Q = np.asarray(Q, dtype=float)
    tol = 1e-6 * max(1.0, float(np.linalg.norm(Q)))
    if abs(float(pair.domain.sd(Q[None])[0])) > tol:
        raise ValueError(f"Q = {Q.tolist()} is not on the boundary")
    h = pair.h_at(Q) if h_value is None else float(h_value)
    if not (h > 0 and np.isfinite(h)):
        raise ValueError(f"h(Q) must be positive, got {h}")
    return VField(pair, Q, h, pair.u_plus * h - pair.u_minus)


# ---------------------------------------------------------------------------
# quadrature helpers


def _check_zero(f: ScalarField, x: np.ndarray, tol_cells: float = 2.0):
    """Accept ``|f(x)|`` up to ``tol_cells * h * |grad f|`` near x."""
    h = f.spec.h
    val = abs(float(f(x[None])[0]))
    ring = x + 2 * h * np.vstack([np.eye(len(x)), -np.eye(len(x))])
    slope = float(np.max(np.linalg.norm(f.gradient(ring), axis=1)))
    if val > tol_cells * h * slope + 1e-12:
        raise NotAZeroError(f"|f(x)| = {val:.3g} exceeds tolerance {tol_cells * h * slope:.3g} at {x.tolist()}")


def _check_radius(f: ScalarField, x: np.ndarray, r: float, cells: float = 8.0):
    h = f.spec.h
    if r < cells * h - 1e-12:
        raise UnderResolvedError(f"radius {r:.4g} below {cells:g}h = {cells * h:.4g}")
    if f.spec.distance_to_walls(x[None])[0] < r - 1e-12:
        raise UnderResolvedError(f"ball B(x, {r:.4g}) leaves the grid box")


def sphere_integral(f: ScalarField, x, r: float, fn=None) -> float:
    """``int_{dB_r(x)} fn(f)`` with ``fn`` applied to the sampled values."""
    x = np.asarray(x, float)
    nodes, w = sphere_rule(f.spec.dimension)
    vals = f(x + r * nodes)
    if fn is not None:
        vals = fn(vals)
    return float(np.sum(w * vals) * r ** (f.spec.dimension - 1))


def _ball_gradients(f: ScalarField, x, r: float, n_radial: int = 48):
    nodes, w, rho = ball_rule(f.spec.dimension, n_radial=n_radial)
    pts = x + r * nodes
    return pts, f.gradient(pts), f(pts), w * r ** f.spec.dimension, rho * r


# ---------------------------------------------------------------------------
# ACF


def acf_energies(f: ScalarField, x, r: float) -> tuple[float, float]:
    """Weighted Dirichlet energies ``int_{B_r} |grad f^+-|^2 |x-y|^{2-n}`` of both phases."""
    x = np.asarray(x, float)
    n = f.spec.dimension
    pts, g, vals, w, dist = _ball_gradients(f, x, r)
    g2 = np.sum(g * g, axis=1)
    weight = w * dist ** (2 - n)
    return float(np.sum(weight * g2 * (vals > 0))), float(np.sum(weight * g2 * (vals < 0)))


def acf_J(f: ScalarField, x, r: float, check_zero: bool = True) -> float:
    """``J(x, r) = r^-2 * sqrt(I+) * sqrt(I-)`` with weighted phase energies.

    Raises
    ------
    NotAZeroError
        If ``f(x)`` is not zero within the interpolation tolerance.
    UnderResolvedError
        If ``r < 8h`` or the ball leaves the grid.
    """
    x = np.asarray(x, float)
    _check_radius(f, x, r)
    if check_zero:
        _check_zero(f, x)
    ip, im = acf_energies(f, x, r)
    return math.sqrt(ip) * math.sqrt(im) / r ** 2


def acf_trace(f: ScalarField, x, radii, slack: float | None = None) -> RadialTrace:
    vals = [acf_J(f, x, r) for r in radii]
    return RadialTrace(x, radii, vals, "J", slack=0.0 if slack is None else slack)


# ---------------------------------------------------------------------------
# Almgren


def almgren_H(f: ScalarField, x0, r: float) -> float:
    """``H(r) = int_{dB_r(x0)} f^2``."""
    x0 = np.asarray(x0, float)
    _check_radius(f, x0, r)
    return sphere_integral(f, x0, r, np.square)


def almgren_D(f: ScalarField, x0, r: float) -> float:
    """``D(r) = int_{B_r(x0)} |grad f|^2``."""
    x0 = np.asarray(x0, float)
    _check_radius(f, x0, r)
    _, g, _, w, _ = _ball_gradients(f, x0, r)
    return float(np.sum(w * np.sum(g * g, axis=1)))


def almgren_N(f: ScalarField, x0, r: float, check_zero: bool = True) -> float:
    """Frequency ``N = r D / H``.

    Raises
    ------
    DegenerateShellError
        If ``H < 1e-14 * |f|^2`` on the shell scale.
    """
    x0 = np.asarray(x0, float)
    if check_zero:
        _check_zero(f, x0)
    H = almgren_H(f, x0, r)
    D = almgren_D(f, x0, r)
    n = f.spec.dimension
    scale = float(np.max(np.abs(f.values))) ** 2 * r ** (n - 1)
    if H <= 1e-14 * scale:
        raise DegenerateShellError(f"H = {H:.3e} is degenerate at r = {r:.4g}")
    return r * D / H


def frequency_trace(f: ScalarField, x0, radii) -> RadialTrace:
    vals = [almgren_N(f, x0, r) for r in radii]
    return RadialTrace(x0, radii, vals, "N", slack=f.spec.h)


def cauchy_schwarz_term(f: ScalarField, x0, r: float) -> float:
    """The nonnegative part of ``N'``: ``2r (H int v_nu^2 - (int v v_nu)^2) / H^2``.

    For harmonic ``f`` this equals ``N'(r)``; the difference ``N' - (this)``
    collects the terms driven by the boundary Laplacian of ``f``.
    """
    x0 = np.asarray(x0, float)
    n = f.spec.dimension
    nodes, w = sphere_rule(n)
    pts = x0 + r * nodes
    v = f(pts)
    vn = np.sum(f.gradient(pts) * nodes, axis=1)
    s = r ** (n - 1)
    H = np.sum(w * v * v) * s
    A = np.sum(w * vn * vn) * s
    B = np.sum(w * v * vn) * s
    return float(2 * r * (H * A - B * B) / H ** 2)


@dataclass
class DefectReport:
    """Almost-monotonicity data of the frequency on ``[R/4, R]``.

    ``measured`` is ``sup (N')^-``.  ``remainder`` is ``sup |N' - CS|`` with
    CS the Cauchy-Schwarz term; it bounds ``(N')^-`` from above and is the
    quantity the defect estimate controls, so it stays informative when N
    happens to be monotone on the sampled radii.
    """

    R: float
    radii: np.ndarray
    N: np.ndarray
    dN: np.ndarray
    measured: float
    remainder: float
    under_resolved: bool
    bound: float | None = None

    @property
    def defect(self) -> float:
        return max(self.measured, self.remainder)


def almgren_defect(v: VField | ScalarField, R: float, n_sub: int = 12, Q=None) -> DefectReport:
    """``sup (N')^-`` on ``[R/4, R]`` from differences of the frequency trace.

    The report is flagged under-resolved when the adjacent-radius
    oscillation of N around a quadratic trend in ``log r`` exceeds ten
    times the trend itself.
    """
    if n_sub < 8:
        raise ValueError("n_sub must be at least 8")
    f = v.field if isinstance(v, VField) else v
    x0 = v.Q if isinstance(v, VField) else np.asarray(Q, float)
    radii = np.geomspace(R, R / 4, n_sub)
    N = np.array([almgren_N(f, x0, r) for r in radii])
    mids = np.sqrt(radii[:-1] * radii[1:])
    dN = np.diff(N) / np.diff(radii)
    cs = np.array([cauchy_schwarz_term(f, x0, r) for r in mids])
    measured = float(np.max(np.maximum(-dN, 0.0)))
    remainder = float(np.max(np.abs(dN - cs)))
    t = np.log(radii)
    trend_vals = np.polyval(np.polyfit(t, N, 2), t)
    noise = float(np.max(np.abs(np.diff(N - trend_vals))))
    trend = float(np.max(np.abs(np.diff(trend_vals))))
    return DefectReport(R, mids, N, dN, measured, remainder, noise > 10 * trend + 1e-13)


@dataclass
class DefectFit:
    R: np.ndarray
    scaled: np.ndarray  # R * defect
    exponent: float
    k: float
    reports: list


def defect_regression(v, R_list, n_sub: int = 12, alpha: float | None = None, Q=None) -> DefectFit:
    """Fit ``R * defect(R) ~ k R^e``; attaches the bounds ``k R^{alpha/2 - 1}``."""
    reports = [almgren_defect(v, R, n_sub, Q=Q) for R in R_list]
    R = np.asarray(R_list, float)
    scaled = np.array([rep.defect * rep.R for rep in reports])
    if np.all(scaled > 0) and len(R) >= 2:
        e, logk = np.polyfit(np.log(R), np.log(scaled), 1)
        k = float(np.exp(logk))
    else:
        e, k = float("nan"), float(np.max(scaled, initial=0.0))
    if alpha is not None:
        for rep in reports:
            rep.bound = k * rep.R ** (alpha / 2 - 1)
    return DefectFit(R, scaled, float(e), k, reports)


def h_lower_ratio(pair: HarmonicPair, v: VField, r: float) -> float:
    """``H(r) r^{n-3} / omega^-(B(Q, r))^2``: positive and bounded at good points."""
    from freebnd.grid import harmonic_measure_of_ball

    n = v.spec.dimension
    om = harmonic_measure_of_ball(pair, -1, v.Q, r)
    return almgren_H(v.field, v.Q, r) * r ** (n - 3) / om ** 2


# ---------------------------------------------------------------------------
# Monneau


@dataclass(frozen=True)
class LinearForm:
    """``p(x) = c * (x . nu)``; a 1-homogeneous polynomial."""

    nu: tuple
    c: float

    def __call__(self, x) -> np.ndarray:
        return self.c * (np.asarray(x) @ np.asarray(self.nu, float))

    @classmethod
    def from_vector(cls, a) -> LinearForm:
        a = np.asarray(a, float)
        c = float(np.linalg.norm(a))
        nu = a / c if c > 0 else np.eye(len(a))[-1]
        return cls(tuple(float(t) for t in nu), c)

    @property
    def vector(self) -> np.ndarray:
        return self.c * np.asarray(self.nu, float)

    @property
    def sup_norm(self) -> float:
        return abs(self.c)


def monneau_M(f: ScalarField, p, x0, r: float) -> float:
    """``M(r) = r^-(n+1) int_{dB_r(x0)} (f(x0 + y) - p(y))^2``.

    ``p`` is a :class:`LinearForm`, a coefficient vector, or ``0``.
    """
    x0 = np.asarray(x0, float)
    _check_radius(f, x0, r)
    n = f.spec.dimension
    if isinstance(p, (int, float)) and p == 0:
        a = np.zeros(n)
    else:
        a = p.vector if isinstance(p, LinearForm) else np.asarray(p, float)
    nodes, w = sphere_rule(n)
    y = r * nodes
    diff = f(x0 + y) - y @ a
    return float(np.sum(w * diff ** 2) * r ** (n - 1) / r ** (n + 1))


def monneau_trace(f: ScalarField, p, x0, radii) -> RadialTrace:
    vals = [monneau_M(f, p, x0, r) for r in radii]
    return RadialTrace(x0, radii, vals, "M", slack=f.spec.h)


def monneau_laplacian_term(f: ScalarField, p, x0, r: float, rel_step: float = 1e-3) -> float:
    """``r M'(r)/2 - (H / r^{n+1}) (N - 1)``.

    For a 1-homogeneous ``p`` this equals ``-r^-n int_{B_r} (f - p) Lap f``,
    which vanishes when ``f`` is harmonic.  ``M'`` is a centred difference.
    """
    x0 = np.asarray(x0, float)
    n = f.spec.dimension
    dM = (monneau_M(f, p, x0, r * (1 + rel_step)) - monneau_M(f, p, x0, r * (1 - rel_step))) / (2 * r * rel_step)
    H = almgren_H(f, x0, r)
    N = almgren_N(f, x0, r, check_zero=False)
    return r * dM / 2 - H / r ** (n + 1) * (N - 1)


@dataclass
class GrowthReport:
    """Monneau drops ``M(R) - M(r)`` for ``r in [R/4, R]`` per outer radius R.

    ``worst_drop[k]`` is the largest negative drop magnitude at ``R[k]``.
    ``laplacian_bound[k]`` integrates ``2|T(r)|/r`` over ``[R/4, R]`` with T
    from :func:`monneau_laplacian_term`; it bounds the part of any drop
    caused by the boundary Laplacian and stays informative when M happens
    to be monotone.  The exponent is fitted on ``max(worst_drop, bound)``.
    """

    pairs: list  # (r, R, M(R) - M(r))
    R: np.ndarray
    worst_drop: np.ndarray
    laplacian_bound: np.ndarray
    exponent: float
    C: float
    slack: float

    @property
    def defect(self) -> np.ndarray:
        return np.maximum(self.worst_drop, self.laplacian_bound)


def monneau_growth_check(v: VField | ScalarField, p, R_list, Q=None, n_sub: int = 6) -> GrowthReport:
    """Record ``M(R) - M(r)`` against ``-(C + C|p|) R^{alpha/2}`` and fit the exponent.

    Raises
    ------
    ValueError
        If the radii span less than one decade.
    """
    f = v.field if isinstance(v, VField) else v
    x0 = v.Q if isinstance(v, VField) else np.asarray(Q, float)
    R_arr = np.asarray(sorted(R_list, reverse=True), float)
    if R_arr[0] / R_arr[-1] < 10 - 1e-9:
        raise ValueError("R_list must span at least one decade")
    h = f.spec.h
    pairs, worst, lap = [], [], []
    for R in R_arr:
        lo = max(R / 4, 8.02 * h)
        rs = np.geomspace(R, lo, n_sub)
        MR = monneau_M(f, p, x0, R)
        drops = [MR - monneau_M(f, p, x0, r) for r in rs[1:]]
        pairs.extend((float(r), float(R), float(d)) for r, d in zip(rs[1:], drops))
        worst.append(max(0.0, -min(drops)))
        T = np.array([abs(monneau_laplacian_term(f, p, x0, r)) for r in rs])
        g = 2 * T / rs
        lap.append(float(np.sum(0.5 * (g[1:] + g[:-1]) * -np.diff(rs))))
    worst, lap = np.array(worst), np.array(lap)
    d = np.maximum(worst, lap)
    psup = p.sup_norm if isinstance(p, LinearForm) else float(np.linalg.norm(np.atleast_1d(p)))
    if np.all(d > 0) and len(d) >= 2:
        e, lc = np.polyfit(np.log(R_arr), np.log(d), 1)
        C = float(np.exp(lc)) / (1 + psup)
    else:
        e, C = float("nan"), float(d.max(initial=0.0)) / (1 + psup)
    return GrowthReport(pairs, R_arr, worst, lap, float(e), C, h)
