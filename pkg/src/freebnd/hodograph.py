"""
Partial hodograph transform and the algebra of the transformed system.

Near a boundary point Q whose inward normal is ``e_n`` the maps
``x -> (x', u+(x))`` on the positive side and ``x -> (x', u-(x))`` on the
negative side straighten the boundary to ``{y_n = 0}``.  Their inverses
``psi(y) = x_n`` and ``phi(y) = -x_n`` satisfy a pair of quasilinear
divergence-form equations coupled only through the boundary conditions
``phi + psi = 0`` and ``h~ / psi_n = 1 / phi_n``.

The second half of the module checks the algebraic hypotheses of the
elliptic estimates for that system: negativity of the linearised symbol
``DA(p)``, the root split of the characteristic quadratic in 2D, the sign
condition that makes the boundary operators coercive, and the integer
weight bookkeeping.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.interpolate import PchipInterpolator

from freebnd.grid import GridSpec, HarmonicPair, ScalarField


class HodographFoldError(ValueError):
    """``u`` is not strictly monotone along a grid column of the patch."""


class DegenerateGradientError(ValueError):
    """The normal derivative of ``u+`` or ``u-`` vanishes at Q."""


@dataclass
class HodographPair:
    """Inverse hodograph maps on ``U = patch x [0, Y]``.

    ``psi`` and ``phi`` are fields on the same y-grid; ``h_tilde`` holds the
    density ratio at ``(y', psi(y', 0))`` for every boundary column.
    """

    psi: ScalarField
    phi: ScalarField
    h_tilde: np.ndarray
    scale: float = 1.0  # y_n = scale * u(x)

    @property
    def spec(self) -> GridSpec:
        return self.psi.spec


def _crossing(domain, col_xp, lo, hi, n_iter=60):
    """Boundary height on the column ``x' = col_xp`` (sd changes sign in [lo, hi])."""
    a, b = lo, hi
    fa = float(domain.sd(np.append(col_xp, a)[None])[0])
    for _ in range(n_iter):
        m = 0.5 * (a + b)
        fm = float(domain.sd(np.append(col_xp, m)[None])[0])
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _invert_column(xs, vals, y, where):
    if np.any(np.diff(vals) <= 0):
        raise HodographFoldError(f"hodograph fold: u not increasing along the column at x' = {where}")
    if y[-1] > vals[-1] + 1e-12:
        raise ValueError("patch too short: column does not reach the top of U")
    if len(xs) >= 3:
        return PchipInterpolator(vals, xs)(y)
    return np.interp(y, vals, xs)


def hodograph_transform(pair: HarmonicPair, Q, patch: float, normalize: bool = False,
                        max_tilt: float = 0.5) -> HodographPair:
    """Invert ``y = (x', u+-(x))`` column by column on a patch around Q.

    The y-grid reuses the pair's spacing and its ``x'`` grid lines, so every
    column is a grid line of the source field.  Along each column the node
    values of ``u+`` (above the boundary) and ``u-`` (below it), together
    with the zero at the boundary crossing, are inverted by monotone cubic
    interpolation.  With ``normalize=True`` both phases are multiplied by
    ``1 / u+_n(Q)``; the transformed system is homogeneous under a common
    scaling, so residuals keep their meaning.

    Raises
    ------
    DegenerateGradientError
        If ``u+_n(Q)`` or ``u-_n(Q)`` is not positive.
    HodographFoldError
        If some column is not strictly monotone.
    """
    Q = np.asarray(Q, dtype=float)
    spec = pair.spec
    d = spec.dimension
    h = spec.h
    nrm = pair.domain.outward_normal(Q[None])[0]
    if np.linalg.norm(nrm + np.eye(d)[-1]) > max_tilt:
        raise ValueError("the inward normal at Q must be close to e_n")
    dp = float(pair.density_at(+1, Q[None], nrm[None])[0])
    dm = float(pair.density_at(-1, Q[None], nrm[None])[0])
    if not (dp > 0 and dm > 0):
        raise DegenerateGradientError(f"normal derivatives at Q: {dp:.3e}, {dm:.3e}")
    scale = 1.0 / dp if normalize else 1.0
    axes = spec.axes()
    # x' grid lines inside the patch
    sel = [np.flatnonzero(np.abs(ax - q) <= patch + 1e-12) for ax, q in zip(axes[:-1], Q[:-1])]
    if any(len(s) < 9 for s in sel):
        raise ValueError("patch must span at least 8 cells")
    zn = axes[-1]
    top = Q[-1] + patch
    bot = Q[-1] - patch
    if zn[0] > bot or zn[-1] < top:
        raise ValueError("patch leaves the grid")
    cols = np.stack(np.meshgrid(*[s for s in sel], indexing="ij"), axis=-1).reshape(-1, d - 1)
    up_vals = pair.u_plus.values * scale
    um_vals = pair.u_minus.values * scale
    # column data
    col_up, col_um, bnd = [], [], []
    for idx in cols:
        xp = np.array([axes[k][i] for k, i in enumerate(idx)])
        b = _crossing(pair.domain, xp, bot - 2 * h, top + 2 * h)
        above = (zn > b + 1e-9 * h) & (zn <= b + patch)
        below = (zn < b - 1e-9 * h) & (zn >= b - patch)
        vu = up_vals[tuple(idx)][above]
        vm = um_vals[tuple(idx)][below][::-1]
        col_up.append((np.concatenate([[b], zn[above]]), np.concatenate([[0.0], vu])))
        col_um.append((np.concatenate([[-b], -zn[below][::-1]]), np.concatenate([[0.0], vm])))
        bnd.append(np.append(xp, b))
    ymax = min(min(c[1][-1] for c in col_up), min(c[1][-1] for c in col_um))
    n_y = int(math.floor(0.9 * ymax / h))
    if n_y < 8:
        raise ValueError("patch too small: fewer than 8 cells in y_n")
    y = h * np.arange(n_y + 1)
    shape = tuple(len(s) for s in sel) + (n_y + 1,)
    psi = np.empty((len(cols), n_y + 1))
    phi = np.empty_like(psi)
    for j, ((xu, vu), (xm, vm)) in enumerate(zip(col_up, col_um)):
        psi[j] = _invert_column(xu, vu, y, bnd[j][:-1])
        phi[j] = _invert_column(xm, vm, y, bnd[j][:-1])
    box_min = tuple(axes[k][s[0]] for k, s in enumerate(sel)) + (0.0,)
    box_max = tuple(axes[k][s[-1]] for k, s in enumerate(sel)) + (n_y * h,)
    yspec = GridSpec(box_min, box_max, tuple(len(s) - 1 for s in sel) + (n_y,))
    bnd = np.array(bnd)
    bn = pair.domain.outward_normal(bnd)
    ht = pair.density_at(-1, bnd, bn) / pair.density_at(+1, bnd, bn)
    return HodographPair(ScalarField(yspec, psi.reshape(shape)), ScalarField(yspec, phi.reshape(shape)),
                         ht.reshape(shape[:-1]), scale)


def forward_map(pair: HarmonicPair, hp: HodographPair, y) -> np.ndarray:
    """``F+(y', psi(y)) = (y', scale * u+(y', psi(y)))``, for round-trip checks."""
    y = np.atleast_2d(y)
    x = y.copy()
    x[:, -1] = hp.psi(y)
    out = y.copy()
    out[:, -1] = hp.scale * pair.u_plus(x)
    return out


@dataclass
class ResidualReport:
    psi_max: float       # interior residuals away from the boundary layer
    psi_l2: float
    phi_max: float
    phi_l2: float
    sum_max: float       # |phi + psi| on y_n = 0
    flux_max: float      # |h~ / psi_n - 1 / phi_n| on y_n = 0
    h: float
    layer_max: float     # largest interior residual inside the boundary layer


def _interior_residual(f: ScalarField) -> np.ndarray:
    """Residual of the transformed equation on all nodes (edges included)."""
    g = f.gradient_nodes()
    d = f.spec.dimension
    hh = f.spec.h
    fn = g[-1]
    if np.any(fn <= 0):
        raise ValueError("psi_n and phi_n must be positive")

    def dd(a, ax):
        return np.gradient(a, hh, axis=ax, edge_order=2)

    res = 0.5 * dd(1 / fn ** 2, d - 1)
    for i in range(d - 1):
        res = res - dd(g[i] / fn, i) + 0.5 * dd(g[i] ** 2 / fn ** 2, d - 1)
    return res


def transformed_residual(hp: HodographPair, layer: float = 0.25) -> ResidualReport:
    """Residuals of the transformed equations and of the boundary conditions.

    Interior residuals use centred differences on nodes at least two cells
    from every edge of U.  The first grid rows above ``y_n = 0`` inherit the
    first-order error of the cut-cell values next to the boundary, so the
    interior norms are taken over ``y_n >= layer * Y`` and the rows below
    are reported separately as ``layer_max``.
    """
    spec = hp.spec
    y = spec.axes()[-1]
    rows = y >= layer * y[-1]
    out = []
    lay = 0.0
    for f in (hp.psi, hp.phi):
        r = _interior_residual(f)[tuple(slice(2, -2) for _ in range(spec.dimension))]
        core = r[..., rows[2:-2]]
        lay = max(lay, float(np.max(np.abs(r[..., ~rows[2:-2]]))) if np.any(~rows[2:-2]) else 0.0)
        out += [float(np.max(np.abs(core))), float(np.sqrt(np.mean(core ** 2)))]
    psi_n = hp.psi.gradient_nodes()[-1][..., 0]
    phi_n = hp.phi.gradient_nodes()[-1][..., 0]
    sum0 = hp.psi.values[..., 0] + hp.phi.values[..., 0]
    flux = hp.h_tilde / psi_n - 1 / phi_n
    inner = tuple(slice(2, -2) for _ in range(sum0.ndim))
    return ResidualReport(*out, float(np.max(np.abs(sum0))), float(np.max(np.abs(flux[inner]))),
                          spec.h, lay)


# ---------------------------------------------------------------------------
# symbol algebra


def da_matrix(p) -> np.ndarray:
    """Linearised symbol ``DA(p)`` of the transformed operator at gradient ``p``.

    Diagonal ``-1/p_n`` in the tangential slots, ``p_i / p_n^2`` in the last
    row and column, ``-(1 + |p'|^2) / p_n^3`` in the corner.
    """
    p = np.asarray(p, dtype=float)
    pn = p[-1]
    if not pn > 0:
        raise ValueError("p_n must be positive")
    n = p.size
    M = np.zeros((n, n))
    M[np.arange(n - 1), np.arange(n - 1)] = -1 / pn
    M[:-1, -1] = M[-1, :-1] = p[:-1] / pn ** 2
    M[-1, -1] = -(1 + float(p[:-1] @ p[:-1])) / pn ** 3
    return M


def _quadratic_roots(a: complex, b: complex, c: complex) -> tuple[complex, complex]:
    if abs(a) == 0:
        raise ValueError("degenerate leading coefficient")
    disc = cmath.sqrt(b * b - 4 * a * c)
    return (-b + disc) / (2 * a), (-b - disc) / (2 * a)


@dataclass
class EllipticityReport:
    roots_psi: tuple
    roots_phi: tuple
    conjugate_error: float
    upper: int   # roots with Im z > 0 (out of 4)
    lower: int
    elliptic: bool

    def as_json(self) -> dict:
        enc = lambda zs: [[z.real, z.imag] for z in zs]  # noqa: E731
        return {"roots_psi": enc(self.roots_psi), "roots_phi": enc(self.roots_phi),
                "conjugate_error": self.conjugate_error, "upper": self.upper,
                "lower": self.lower, "elliptic": self.elliptic}


def ellipticity_check_n2(p_psi, p_phi, xi, eta) -> EllipticityReport:
    """Roots in z of ``(xi + z eta)^T DA(p) (xi + z eta) = 0`` for both unknowns (n = 2)."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    if xi.size != 2 or eta.size != 2:
        raise ValueError("the root test is for n = 2")
    if abs(xi[0] * eta[1] - xi[1] * eta[0]) < 1e-14 * np.linalg.norm(xi) * np.linalg.norm(eta):
        raise ValueError("xi and eta must be linearly independent")
    out, err = [], 0.0
    for p in (p_psi, p_phi):
        M = da_matrix(p)
        z1, z2 = _quadratic_roots(eta @ M @ eta, 2 * xi @ M @ eta, xi @ M @ xi)
        if z1.imag < z2.imag:
            z1, z2 = z2, z1
        err = max(err, abs(z1.imag + z2.imag), abs(z1.real - z2.real))
        out.append((z1, z2))
    zs = [z for pair in out for z in pair]
    up = sum(z.imag > 0 for z in zs)
    lo = sum(z.imag < 0 for z in zs)
    return EllipticityReport(out[0], out[1], err, up, lo, up == lo == 2)


@dataclass
class CoercivityReport:
    r1: complex     # decaying root for psi
    r2: complex     # decaying root for phi
    combination: complex
    coercive: bool

    def as_json(self) -> dict:
        return {"r1": [self.r1.real, self.r1.imag], "r2": [self.r2.real, self.r2.imag],
                "combination": [self.combination.real, self.combination.imag],
                "coercive": self.coercive}


def _decaying_root(p, xi_prime) -> complex:
    p = np.asarray(p, float)
    pn, pp = p[-1], p[:-1]
    if not pn > 0:
        raise ValueError("p_n must be positive")
    xp = np.asarray(xi_prime, float)
    a = -(1 + float(pp @ pp)) / pn ** 3
    b = 2j * float(pp @ xp) / pn ** 2
    c = float(xp @ xp) / pn
    z = [r for r in _quadratic_roots(a, b, c) if r.real < 0]
    if len(z) != 1:
        raise RuntimeError(f"internal consistency: expected one root with Re < 0, got {z}")
    return z[0]


def coercivity_check(h0: float, p_psi, p_phi, xi_prime) -> CoercivityReport:
    """Coercivity of the transformed boundary conditions at a frozen point.

    Each side contributes the root with negative real part of
    ``|xi'|^2 / p_n + 2i (p'.xi') x / p_n^2 - (1 + |p'|^2) x^2 / p_n^3 = 0``;
    the conditions are coercive when ``h0 r2 + r1`` has negative real part.
    """
    if not h0 > 0:
        raise ValueError("h0 must be positive")
    if not np.any(np.asarray(xi_prime, float) != 0):
        raise ValueError("xi' must be nonzero")
    r1 = _decaying_root(p_psi, xi_prime)
    r2 = _decaying_root(p_phi, xi_prime)
    comb = h0 * r2 + r1
    return CoercivityReport(r1, r2, comb, bool(comb.real < 0))


def _draw_p(rng, n):
    pp = rng.uniform(-1, 1, n - 1)
    pp *= rng.uniform(0, 10) / max(np.linalg.norm(pp), 1e-300)
    return np.append(pp, rng.uniform(0.1, 10))


def ellipticity_suite(n_draws: int = 1000, seed: int = 0, dimension: int = 2) -> dict:
    """Largest eigenvalue of ``DA(p)`` over seeded random ``p`` (JSON-ready record)."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    fails = 0
    for _ in range(n_draws):
        p = _draw_p(rng, dimension)
        lam = float(np.max(np.linalg.eigvalsh(da_matrix(p))))
        worst = max(worst, lam)
        fails += lam >= 0
    return {"check": "DA negative definite", "seed": seed, "draws": n_draws,
            "dimension": dimension, "max_eigenvalue": worst, "failures": int(fails),
            "verdict": fails == 0}


def coercivity_suite(n_draws: int = 1000, seed: int = 0, dimension: int = 2) -> dict:
    """Coercivity verdicts over seeded random ``(h0, p_psi, p_phi, xi')``."""
    rng = np.random.default_rng(seed)
    fails = 0
    worst = -math.inf
    for _ in range(n_draws):
        h0 = float(np.exp(rng.uniform(-3, 3)))
        rep = coercivity_check(h0, _draw_p(rng, dimension), _draw_p(rng, dimension),
                               rng.normal(size=dimension - 1))
        fails += not rep.coercive
        worst = max(worst, rep.combination.real)
    return {"check": "coercive boundary conditions", "seed": seed, "draws": n_draws,
            "dimension": dimension, "max_real_part": worst, "failures": int(fails),
            "verdict": fails == 0}


def conjugacy_suite(n_draws: int = 1000, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    split = True
    for _ in range(n_draws):
        xi, eta = rng.normal(size=2), rng.normal(size=2)
        rep = ellipticity_check_n2(_draw_p(rng, 2), _draw_p(rng, 2), xi, eta)
        worst = max(worst, rep.conjugate_error)
        split &= rep.elliptic
    return {"check": "n=2 root conjugacy", "seed": seed, "draws": n_draws,
            "max_conjugate_error": worst, "verdict": bool(split and worst <= 1e-12)}


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightAssignment:
    t1: int
    t2: int
    s1: int
    s2: int
    m1: int
    m2: int
    h1: int
    h2: int
    p1: int
    p2: int
    h0: int

    ORDER = ("t1", "t2", "s1", "s2", "m1", "m2", "h1", "h2", "p1", "p2", "h0")

    @classmethod
    def parse(cls, text: str) -> WeightAssignment:
        """From a comma list in the order t1,t2,s1,s2,m1,m2,h1,h2,p1,p2,h0."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 11:
            raise ValueError(f"expected 11 integers (t1,t2,s1,s2,m1,m2,h1,h2,p1,p2,h0), got {len(parts)}")
        return cls(*(int(p) for p in parts))

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


# the assignment used for the two-phase system
SYSTEM_WEIGHTS = WeightAssignment(2, 2, 0, 0, 1, 1, 2, 1, 0, 0, 0)

CONDITIONS = (
    ("s+t>=1", "min_{j,k} s_j + t_k >= 1"),
    ("t+s-m>=0", "min_{j,k} t_k + s_j - m_j >= 0"),
    ("m>=0", "min_j m_j >= 0"),
    ("max s=0", "max_j s_j = 0"),
    ("p>=0", "min_r p_r >= 0"),
    ("h0+h+p>=1", "min_r h0 + h_r + p_r >= 1"),
    ("t+h0>=0", "min_k t_k + h0 >= 0"),
    ("h0-s+m>=0", "min_j h0 - s_j + m_j >= 0"),
)


def weights_validate(w: WeightAssignment) -> tuple[bool, dict]:
    """Check every condition of a proper assignment of weights separately."""
    t = (w.t1, w.t2)
    s = (w.s1, w.s2)
    m = (w.m1, w.m2)
    hr = (w.h1, w.h2)
    p = (w.p1, w.p2)
    rep = {
        "s+t>=1": min(sj + tk for sj in s for tk in t) >= 1,
        "t+s-m>=0": min(tk + sj - mj for tk in t for sj, mj in zip(s, m)) >= 0,
        "m>=0": min(m) >= 0,
        "max s=0": max(s) == 0,
        "p>=0": min(p) >= 0,
        "h0+h+p>=1": min(w.h0 + a + b for a, b in zip(hr, p)) >= 1,
        "t+h0>=0": min(tk + w.h0 for tk in t) >= 0,
        "h0-s+m>=0": min(w.h0 - sj + mj for sj, mj in zip(s, m)) >= 0,
    }
    return all(rep.values()), rep


def weights_report_json(w: WeightAssignment) -> str:
    ok, rep = weights_validate(w)
    return json.dumps({"weights": asdict(w), "valid": ok, "conditions": rep},
                      indent=2, sort_keys=True) + "\n"
