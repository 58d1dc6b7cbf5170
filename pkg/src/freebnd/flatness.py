"""
Two-plane solutions and the improvement-of-flatness iteration.

A two-plane solution with slope ``gamma`` and density ratio ``g`` is
``U(t) = gamma t^+ - g gamma t^-``.  Since ``U`` is strictly increasing,
``U(x.nu - eps) <= w <= U(x.nu + eps)`` holds exactly when
``|U^{-1}(w) - x.nu| <= eps``, so the minimal squeeze on a probe set is a
plain maximum and needs no search.

Probe sets: every sup or inf over a ball ``B(c, r)`` runs over the grid
nodes inside the ball plus 256 samples on its boundary sphere.  The same
set is used throughout so that "minimal eps" has one meaning.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from freebnd.grid import (GridSpec, HarmonicPair, ScalarField, UnderResolvedError, zoom)
from freebnd.sphere import angles_to_unit, ball_rule, fibonacci_lattice, unit_to_angles

N_SHELL = 256


class FlatnessError(ValueError):
    """Invalid input to a flatness routine (bad slope, centre not on the zero set)."""


@dataclass
class TwoPlaneFit:
    """A two-plane solution ``U`` and the squeeze width of some data around it."""

    nu: np.ndarray
    gamma: float
    eps: float
    g_at_center: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    r: float = 1.0
    not_flat: bool = False

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=float)
        nrm = float(np.linalg.norm(self.nu))
        if not math.isclose(nrm, 1.0, rel_tol=0, abs_tol=1e-9):
            raise FlatnessError(f"nu must be a unit vector, |nu| = {nrm}")
        if not self.gamma > 0:
            raise FlatnessError("gamma must be positive")
        if not self.g_at_center > 0:
            raise FlatnessError("g must be positive")
        if self.eps < 0:
            raise FlatnessError("eps must be non-negative")
        self.center = np.asarray(self.center, dtype=float)

    @property
    def eps_normalized(self) -> float:
        """Squeeze width in units of the ball radius."""
        return self.eps / self.r


def two_plane_eval(fit: TwoPlaneFit, t) -> np.ndarray | float:
    """``gamma t^+ - g gamma t^-``."""
    return _U(np.asarray(t, dtype=float), fit.gamma, fit.g_at_center)


def _U(t, gamma, g):
    return gamma * np.maximum(t, 0) - g * gamma * np.maximum(-t, 0)


def _U_inv(w, gamma, g):
    return np.where(w >= 0, w / gamma, w / (g * gamma))


def _shell(dimension: int) -> np.ndarray:
    if dimension == 2:
        t = 2 * np.pi * (np.arange(N_SHELL) + 0.5) / N_SHELL
        return np.column_stack([np.cos(t), np.sin(t)])
    return fibonacci_lattice(N_SHELL, dimension)


def probe_points(w, center, r: float, dimension: int | None = None) -> np.ndarray:
    """Probe set of ``B(center, r)``, as offsets from the centre.

    For a grid field: the nodes inside the ball plus 256 shell samples.  For
    a plain callable the grid is replaced by a polar rule on the ball.
    """
    center = np.asarray(center, dtype=float)
    d = center.size if dimension is None else dimension
    shell = r * _shell(d)
    if isinstance(w, ScalarField):
        nodes = w.spec.nodes().reshape(-1, d) - center
        inner = nodes[np.linalg.norm(nodes, axis=1) <= r]
    else:
        x, _, _ = ball_rule(d, n_radial=16, **({"n_2d": 64} if d == 2 else {"n_theta": 12, "n_phi": 24}))
        inner = np.vstack([np.zeros((1, d)), r * x])
    return np.vstack([inner, shell])


def _check_center(w, center, r):
    if isinstance(w, ScalarField):
        h = w.spec.h
        if r < 4 * h - 1e-12:
            raise UnderResolvedError(f"ball radius {r:.4g} below 4h")
        if w.spec.distance_to_walls(np.asarray(center)[None])[0] < r - 1e-12:
            raise UnderResolvedError("ball leaves the grid")
        slope = max(float(np.linalg.norm(w.gradient(np.asarray(center)[None])[0])), 1.0)
        tol = 2 * h * slope
    else:
        tol = 1e-9 * r
    w0 = float(np.asarray(w(np.asarray(center, float)[None]))[0])
    if abs(w0) > tol:
        raise FlatnessError(f"w(center) = {w0:.3e} is not zero (tolerance {tol:.1e})")


class _Squeeze:
    """Cached probe values for repeated squeeze evaluations on one ball."""

    def __init__(self, w, center, r):
        self.center = np.asarray(center, dtype=float)
        self.r = float(r)
        self.Y = probe_points(w, self.center, self.r)
        self.vals = np.asarray(w(self.center + self.Y), dtype=float)
        self.d = self.Y.shape[1]

    def __call__(self, nu, gamma, g) -> float:
        return float(np.max(np.abs(_U_inv(self.vals, gamma, g) - self.Y @ nu)))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.vals)))


def measure_squeeze(w, nu, gamma: float, g: float, center, r: float,
                    check_zero: bool = True) -> float:
    """Smallest eps with ``U(y.nu - eps) <= w(c + y) <= U(y.nu + eps)`` on the probes of ``B(c, r)``.

    Raises
    ------
    FlatnessError
        If ``gamma <= 0`` or ``g <= 0``, or ``w`` does not vanish at the centre.
    """
    if not gamma > 0 or not g > 0:
        raise FlatnessError("gamma and g must be positive")
    if check_zero:
        _check_center(w, center, r)
    nu = np.asarray(nu, float) / np.linalg.norm(nu)
    return _Squeeze(w, center, r)(nu, gamma, g)


def squeeze_holds(w, fit: TwoPlaneFit, eps: float) -> bool:
    """Check both two-plane inequalities with width ``eps`` on the probe set."""
    S = _Squeeze(w, fit.center, fit.r)
    t = S.Y @ fit.nu
    lo = _U(t - eps, fit.gamma, fit.g_at_center)
    hi = _U(t + eps, fit.gamma, fit.g_at_center)
    return bool(np.all(lo <= S.vals) and np.all(S.vals <= hi))


def _initial_slope(S: _Squeeze, g: float) -> float:
    # shell least squares slope |a| of w; for a two-plane profile this is gamma (1 + g) / 2
    sh = S.Y[-N_SHELL:]
    v = S.vals[-N_SHELL:]
    a = S.d * np.mean(v[:, None] * sh, axis=0) / S.r ** 2
    return max(2 * float(np.linalg.norm(a)) / (1 + g), 1e-12)


def best_two_plane(w, g: float, center, r: float, n_lattice: int = 64,
                   check_zero: bool = True) -> TwoPlaneFit:
    """Two-plane solution with the smallest squeeze of ``w`` on ``B(center, r)``.

    Directions come from a lattice on the full sphere; the best three seed a
    Nelder-Mead search in (angles, log gamma).  Ties are broken by the
    lexicographically largest normal, so the result is deterministic.  The
    ``not_flat`` flag is set when ``gamma * eps > sup|w| / 2``.
    """
    if not g > 0:
        raise FlatnessError("g must be positive")
    if check_zero:
        _check_center(w, center, r)
    S = _Squeeze(w, center, r)
    d = S.d
    gamma0 = _initial_slope(S, g)
    if d == 2:
        t = 2 * np.pi * (np.arange(2 * n_lattice) + 0.5) / (2 * n_lattice)
        lattice = np.column_stack([np.cos(t), np.sin(t)])
    else:
        lattice = fibonacci_lattice(2 * n_lattice, d)
    scores = np.array([S(v, gamma0, g) for v in lattice])

    def obj(z):
        return S(angles_to_unit(z[:-1]), math.exp(z[-1]), g)

    results = []
    for i in np.argsort(scores, kind="stable")[:3]:
        z0 = np.append(unit_to_angles(lattice[i]), math.log(gamma0))
        res = minimize(obj, z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 2000 * d})
        z = res.x if res.fun <= obj(z0) else z0
        # polish: restart once from the optimum (Nelder-Mead stalls on kinks)
        res2 = minimize(obj, z, method="Nelder-Mead",
                        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000 * d})
        if res2.fun < obj(z):
            z = res2.x
        nu = angles_to_unit(z[:-1])
        results.append((round(obj(z), 12), tuple(-c for c in nu), nu, math.exp(z[-1])))
    results.sort(key=lambda t: (t[0], t[1]))
    _, _, nu, gamma = results[0]
    eps = S(nu, gamma, g)
    return TwoPlaneFit(nu, gamma, eps, g, S.center, S.r, not_flat=gamma * eps > 0.5 * S.sup)


# ---------------------------------------------------------------------------
# improvement of flatness


@dataclass
class ContractionReport:
    """Outcome of one improvement step from ``B_R`` to ``B_r``."""

    ratio: float            # r / R
    eps_old: float          # absolute widths
    eps_new: float
    contraction: bool       # eps_new <= ratio * eps_old / 2
    nu_change: float
    gamma_change: float     # relative
    C_measured: float       # max(nu_change, gamma_change) / (eps_old / R)
    C_tilde: float
    rotation_ok: bool
    hypothesis_ok: bool
    g_seminorm_normalized: float
    status: str             # "ok" or "hypothesis violated"


def improvement_step(w, fit: TwoPlaneFit, r: float, g_seminorm: float = 0.0,
                     alpha: float = 1.0, eps_threshold: float = 0.1,
                     C_tilde: float = 10.0, n_lattice: int = 64):
    """Refit on the smaller ball ``B(fit.center, r)`` and test the contraction.

    The hypotheses are checked in the units of the old ball ``B_R``: the
    normalised width ``eps = fit.eps / R`` must not exceed ``eps_threshold``
    and the rescaled Hölder seminorm ``R^alpha [g]_alpha`` must be below
    ``eps^2``.  A failed hypothesis is reported, not raised.
    """
    R = fit.r
    if not 0 < r < R:
        raise ValueError("r must lie in (0, fit.r)")
    new = best_two_plane(w, fit.g_at_center, fit.center, r, n_lattice=n_lattice)
    eps_n = fit.eps / R
    g_norm = R ** alpha * g_seminorm
    hyp = bool(eps_n <= eps_threshold and g_norm <= eps_n ** 2)
    ratio = r / R
    dnu = float(np.linalg.norm(new.nu - fit.nu))
    dgam = abs(new.gamma - fit.gamma) / fit.gamma
    C = max(dnu, dgam) / eps_n if eps_n > 0 else (0.0 if max(dnu, dgam) < 1e-9 else math.inf)
    rep = ContractionReport(ratio, fit.eps, new.eps, bool(new.eps <= ratio * fit.eps / 2 + 1e-15),
                            dnu, dgam, C, C_tilde, bool(C <= C_tilde), hyp, g_norm,
                            "ok" if hyp else "hypothesis violated")
    return new, rep


def holder_seminorm_of_h(pair: HarmonicPair, Q, r: float, alpha: float,
                         n_samples: int = 48) -> float:
    """Discrete Hölder quotient of the density ratio on ``boundary ∩ B(Q, r)``.

    Only sample pairs at least ``r / 4`` apart enter, which keeps the
    pointwise density noise from dominating the quotient.
    """
    Q = np.asarray(Q, float)
    pts, nrm, _ = pair.domain.sample_boundary(Q, r, r / n_samples)
    inside = (np.linalg.norm(pts - Q, axis=1) <= r) & (pair.spec.distance_to_walls(pts) > 4 * pair.spec.h)
    pts, nrm = pts[inside], nrm[inside]
    if len(pts) < 2:
        return 0.0
    dp = pair.density_at(+1, pts, nrm)
    dm = pair.density_at(-1, pts, nrm)
    ok = (dp > 0) & (dm > 0)
    pts, hv = pts[ok], dm[ok] / dp[ok]
    D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    m = D >= r / 4
    if not np.any(m):
        return 0.0
    return float(np.max(np.abs(hv[:, None] - hv[None])[m] / D[m] ** alpha))


def default_rbar(alpha: float, R0: float = 1.0) -> float:
    """Largest admissible ratio: ``min(1/4, R0, 4^(-1/alpha))``."""
    return min(0.25, R0, 4.0 ** (-1.0 / alpha))


@dataclass
class IterationStep:
    k: int
    r: float
    nu: np.ndarray
    gamma: float
    eps: float
    hypothesis_ok: bool
    contraction: bool | None
    report: ContractionReport | None = None


@dataclass
class IterationLog:
    """Per-scale fits of the improvement-of-flatness iteration."""

    Q: np.ndarray
    r0: float
    rbar: float
    steps: list
    s_fit: float
    s_floor: float
    truncated: bool = False
    beta: np.ndarray | None = None
    gamma_band: tuple = (math.nan, math.nan)

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.r for s in self.steps])

    @property
    def eps(self) -> np.ndarray:
        return np.array([s.eps for s in self.steps])

    def longest_contraction_run(self, require_hypothesis: bool = False) -> int:
        best = run = 0
        for s in self.steps[1:]:
            ok = bool(s.contraction) and (s.report.hypothesis_ok or not require_hypothesis)
            run = run + 1 if ok else 0
            best = max(best, run)
        return best

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        d = len(self.Q)
        wr.writerow(["k", "r"] + [f"nu{i + 1}" for i in range(d)]
                    + ["gamma", "eps", "hypothesis_ok", "contraction"])
        for s in self.steps:
            wr.writerow([s.k, f"{s.r:.17g}"] + [f"{c:.17g}" for c in s.nu]
                        + [f"{s.gamma:.17g}", f"{s.eps:.17g}", int(s.hypothesis_ok),
                           "" if s.contraction is None else int(s.contraction)])
        return buf.getvalue()


def flatness_decay(pair: HarmonicPair, Q, r0: float, rbar: float | None = None,
                   n_steps: int = 4, alpha: float | None = None, R0: float = 1.0,
                   zoom_cells: int = 256, eps_threshold: float = 0.5,
                   C_tilde: float = 10.0, with_beta: bool = True) -> IterationLog:
    """Run the improvement iteration on ``u = u+ - u-`` at ``r_k = r0 rbar^k``.

    When ``r_k`` drops below 16 cells the pair is re-solved on a window of
    half-width ``2 r_k`` around Q (see :func:`freebnd.grid.zoom`).  If that is
    impossible the log is truncated and flagged.  ``s_fit`` is the slope of
    ``log(eps_k / r_k)`` against ``log r_k``; ``s_floor = -log_rbar 2`` is the
    exponent the iteration guarantees when every step contracts.
    """
    from freebnd.blowup import beta_number

    Q = np.asarray(Q, dtype=float)
    if n_steps < 3:
        raise ValueError("n_steps must be at least 3")
    if alpha is None:
        alpha = float(pair.domain.metadata.get("holder_alpha", 1.0))
    bound = min(R0, 4.0 ** (-1.0 / alpha))
    if rbar is None:
        rbar = default_rbar(alpha, R0)
    if not 0 < rbar <= bound + 1e-15:
        raise ValueError(f"rbar = {rbar:g} exceeds min(R0, 4^(-1/alpha)) = {bound:g}")
    cur = prev = pair
    g = cur.h_at(Q)
    steps, betas = [], []
    fit = None
    truncated = False
    for k in range(n_steps + 1):
        rk = r0 * rbar ** k
        if rk < 16 * cur.spec.h:
            spec = GridSpec.cube(Q, 2 * rk, zoom_cells)
            inside = cur.spec.contains(np.array([spec.box_min, spec.box_max]))
            if not np.all(inside) or rk < 1e-7:
                truncated = True
                break
            try:
                cur = zoom(cur, spec)
            except ValueError:
                truncated = True
                break
        w = cur.u
        if k > 0 and cur is not prev:
            # the density ratio is re-read on the finest grid available
            g = cur.h_at(Q)
            fit = TwoPlaneFit(fit.nu, fit.gamma, fit.eps, g, fit.center, fit.r, fit.not_flat)
        prev = cur
        gsemi = holder_seminorm_of_h(cur, Q, rk, alpha) if k > 0 else 0.0
        if fit is None:
            fit = best_two_plane(w, g, Q, rk)
            steps.append(IterationStep(0, rk, fit.nu, fit.gamma, fit.eps,
                                       fit.eps / rk <= eps_threshold, None))
        else:
            new, rep = improvement_step(w, fit, rk, gsemi, alpha, eps_threshold, C_tilde)
            steps.append(IterationStep(k, rk, new.nu, new.gamma, new.eps, rep.hypothesis_ok,
                                       rep.contraction, rep))
            fit = new
        if with_beta:
            betas.append(beta_number(cur.domain, Q, rk))
    r = np.array([s.r for s in steps])
    e = np.array([s.eps for s in steps])
    good = e > 1e-12 * r
    if np.count_nonzero(good) >= 2:
        s_fit = float(np.polyfit(np.log(r[good]), np.log(e[good] / r[good]), 1)[0])
    else:
        s_fit = math.inf
    gam = [s.gamma for s in steps]
    return IterationLog(Q, r0, rbar, steps, s_fit, math.log(2) / math.log(1 / rbar), truncated,
                        np.array(betas) if with_beta else None, (min(gam), max(gam)))


# ---------------------------------------------------------------------------
# Harnack-type gap propagation


@dataclass
class HarnackReport:
    passed: bool
    status: str          # "ok", "failed" or "hypothesis violated"
    c: float             # largest c in (0, 1] with w >= U(x.nu + c eps) on B_1/2
    lower_ok: bool
    gap_ok: bool
    g_ok: bool


def _normalized(w, center, r):
    center = np.asarray(center, float)
    return lambda y: np.asarray(w(center + r * np.atleast_2d(y))) / r


def harnack_gap_check(w, g: float, nu, gamma: float, eps: float, center=None,
                      r: float = 1.0, g_oscillation: float = 0.0,
                      tol: float = 1e-9) -> HarnackReport:
    """One-sided gap propagation on ``B(center, r)`` rescaled to the unit ball.

    Hypotheses: ``w >= U(x.nu)`` on the probes of ``B_1``, the gap
    ``w(nu/5) >= U(1/5 + eps)`` and ``osc g <= 10 eps^2``.  The conclusion
    ``w >= U(x.nu + c eps)`` on ``B_1/2`` is tested for the largest ``c``.
    """
    nu = np.asarray(nu, float) / np.linalg.norm(nu)
    d = nu.size
    center = np.zeros(d) if center is None else np.asarray(center, float)
    wn = _normalized(w, center, r)
    probes_w = w if isinstance(w, ScalarField) else None
    Y = probe_points(probes_w if probes_w is not None else wn, center if probes_w is not None else np.zeros(d),
                     r if probes_w is not None else 1.0, d)
    if probes_w is not None:
        Y = Y / r
    vals = wn(Y)
    lower_ok = bool(np.all(vals >= _U(Y @ nu, gamma, g) - tol))
    gap_ok = bool(wn(nu[None] / 5)[0] >= _U(np.array(0.2 + eps), gamma, g) - tol)
    g_ok = bool(g_oscillation <= 10 * eps ** 2)
    if not (lower_ok and gap_ok and g_ok):
        return HarnackReport(False, "hypothesis violated", math.nan, lower_ok, gap_ok, g_ok)
    half = np.linalg.norm(Y, axis=1) <= 0.5 + 1e-12
    shift = _U_inv(vals[half], gamma, g) - Y[half] @ nu
    c = min(float(np.min(shift)) / eps, 1.0)
    passed = c > 0
    return HarnackReport(passed, "ok" if passed else "failed", c, lower_ok, gap_ok, g_ok)


@dataclass
class TwoSidedReport:
    a1: float
    b1: float
    shrink: float   # (b1 - a1) / (b0 - a0)
    c: float        # 1 - shrink
    nested: bool    # a0 <= a1 <= b1 <= b0
    passed: bool


def harnack_two_sided(w, g: float, nu, gamma: float, a0: float, b0: float,
                      center=None, r: float = 1.0, tol: float = 1e-9) -> TwoSidedReport:
    """Two-sided squeeze ``U(x.nu + a) <= w <= U(x.nu + b)`` shrunk from ``B_r`` to ``B_{r/20}``.

    ``a0, b0`` are offsets in units of r.  The new offsets are the exact
    extremes of ``U^{-1}(w) - x.nu`` over the probes of the small ball.
    """
    nu = np.asarray(nu, float) / np.linalg.norm(nu)
    d = nu.size
    center = np.zeros(d) if center is None else np.asarray(center, float)
    wn = _normalized(w, center, r)
    if isinstance(w, ScalarField):
        Y = probe_points(w, center, r / 20, d) / r
    else:
        Y = probe_points(wn, np.zeros(d), 1 / 20, d)
    shift = _U_inv(wn(Y), gamma, g) - Y @ nu
    a1, b1 = float(np.min(shift)), float(np.max(shift))
    width0 = b0 - a0
    shrink = (b1 - a1) / width0 if width0 > 0 else math.inf
    nested = bool(a0 - tol <= a1 <= b1 <= b0 + tol)
    c = 1 - shrink
    return TwoSidedReport(a1, b1, shrink, c, nested, bool(nested and 0 < c <= 1))


# ---------------------------------------------------------------------------
# transmission problem


@dataclass
class TransmissionExpansion:
    value: float
    tangential_gradient: np.ndarray
    p: float
    residual: float
    norm: float          # sup |W| over B_1
    bound: float         # C * norm * r^2
    ok: bool
    flux_mismatch: float


class NotTransmissionError(ValueError):
    """Normal derivatives do not match across ``{x_n = 0}``."""


def _one_sided(W, X, step, n, sign):
    e = np.zeros(n)
    e[-1] = sign * step
    f0, f1, f2 = (np.asarray(W(X + k * e)) for k in range(3))
    return sign * (-3 * f0 + 4 * f1 - f2) / (2 * step)


def transmission_expand(W, r: float, C: float = 1.0, flux_tol: float | None = None,
                        dimension: int | None = None, rel_slack: float = 1e-9) -> TransmissionExpansion:
    """Linear expansion of a transmission solution at the origin.

    ``W`` is a grid field or a callable harmonic on both sides of
    ``{x_n = 0}``.  Derivatives use second-order stencils (exact for
    quadratics), with the grid spacing or ``1e-3`` for callables.  The
    residual is the sup over the probes of ``B_r`` of
    ``|W - W(0) - grad' W(0).x' - p x_n|`` and must not exceed
    ``C sup_{B_1}|W| r^2``; a relative slack ``rel_slack`` absorbs round-off
    in cases where the bound is attained.

    Raises
    ------
    NotTransmissionError
        If the one-sided normal derivatives differ by more than ``flux_tol``
        somewhere on ``{x_n = 0} ∩ B_r``.
    """
    if isinstance(W, ScalarField):
        n = W.spec.dimension
        step = W.spec.h
    else:
        n = 2 if dimension is None else dimension
        step = 1e-3
    zero = np.zeros(n)
    Y1 = probe_points(W, zero, 1.0, n)
    norm = float(np.max(np.abs(W(Y1))))
    # interface samples in B_r
    m = 33
    t = np.linspace(-r, r, m) * (1 - 2 * step / r)
    if n == 2:
        X = np.column_stack([t, np.zeros(m)])
    else:
        T = np.stack(np.meshgrid(*([t] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
        T = T[np.linalg.norm(T, axis=1) <= r]
        X = np.column_stack([T, np.zeros(len(T))])
    dplus = _one_sided(W, X, step, n, +1)
    dminus = _one_sided(W, X, step, n, -1)
    mismatch = float(np.max(np.abs(dplus - dminus)))
    if flux_tol is None:
        flux_tol = 1e-8 * max(norm, 1.0) + (20 * step * max(norm, 1.0) if isinstance(W, ScalarField) else 0.0)
    if mismatch > flux_tol:
        raise NotTransmissionError(f"normal derivative jump {mismatch:.3e} > {flux_tol:.3e}")
    w0 = float(np.asarray(W(zero[None]))[0])
    grad = np.zeros(n - 1)
    for i in range(n - 1):
        e = np.zeros(n)
        e[i] = step
        grad[i] = float((np.asarray(W(e[None]))[0] - np.asarray(W(-e[None]))[0]) / (2 * step))
    p0 = zero[None]
    p = 0.5 * float(_one_sided(W, p0, step, n, +1)[0] + _one_sided(W, p0, step, n, -1)[0])
    Y = probe_points(W, zero, r, n)
    lin = w0 + Y[:, :-1] @ grad + p * Y[:, -1]
    residual = float(np.max(np.abs(np.asarray(W(Y)) - lin)))
    bound = C * norm * r * r
    return TransmissionExpansion(w0, grad, p, residual, norm, bound,
                                 bool(residual <= bound * (1 + rel_slack) + 1e-14), mismatch)
