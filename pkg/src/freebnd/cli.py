"""
Command-line experiment runner.

``freebnd run <experiment> [--config file.ini] [--key value ...]``

A config file is a flat INI file with one section named after the
experiment (or ``[run]`` with an ``experiment`` key).  Inline flags mirror
the keys (``--grid-n 512`` for ``grid_n``) and override the file.  Every
run writes its CSV/JSON outputs and a ``manifest.json`` listing each file
with a SHA-256 checksum.

Exit codes: 0 success (numerical flags such as "under-resolved" or
"hypothesis violated" appear as rows in the output), 1 numerical failure,
2 usage or validation error.  Nothing is written when validation fails.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from freebnd import __version__

log = logging.getLogger("freebnd")

EXPERIMENTS = ("solve", "acf", "frequency", "monneau", "density", "beta", "tangent",
               "flatness", "harnack", "transmission", "hodograph", "syscheck")
# experiments that need no harmonic-pair solve
NO_SOLVE = ("beta", "harnack", "transmission", "syscheck")


class ConfigError(ValueError):
    """Usage or validation problem (exit status 2)."""


def _vec(text):
    if isinstance(text, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in text)
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _floats(text):
    return _vec(text)


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, help)
KEYS = {
    "experiment": (str, "experiment kind"),
    "domain": (str, "zoo name or graph:<file>"),
    "grid_n": (int, "cells per axis of the base grid"),
    "half_width": (float, "half-width of the base box"),
    "center": (_vec, "centre of the base box"),
    "pole_plus": (_vec, "pole of the positive-side Green's function"),
    "pole_minus": (_vec, "pole of the negative-side Green's function"),
    "Q": (_vec, "boundary point"),
    "radii": (_floats, "explicit radii (comma list)"),
    "r_min": (float, "smallest radius"),
    "r_max": (float, "largest radius"),
    "count": (int, "number of radii"),
    "log_spacing": (_bool, "log-spaced radii"),
    "zoom_half_width": (float, "half-width of the nested window (0 = none)"),
    "zoom_n": (int, "cells per axis of the nested window"),
    "output_dir": (str, "output directory"),
    "seed": (int, "seed for random draws"),
    "r0": (float, "first radius of the flatness iteration"),
    "rbar": (float, "ratio of the flatness iteration"),
    "n_steps": (int, "number of flatness steps"),
    "alpha": (float, "Hölder exponent override"),
    "patch": (float, "half-width of the tangent/hodograph patch"),
    "n_points": (int, "boundary samples for tangent fits"),
    "n_draws": (int, "random draws for syscheck"),
    "weights": (str, "weights t1,t2,s1,s2,m1,m2,h1,h2,p1,p2,h0"),
    "eps": (float, "gap size for harnack"),
}

DOMAIN_DEFAULTS = {
    "halfplane": dict(half_width=16.0, grid_n=512, pole_plus=(0.0, 1.0), pole_minus=(0.0, -1.0),
                      Q=(0.0, 0.0), zoom_half_width=0.5, zoom_n=512, r_max=0.4, r_min=0.05),
    "disk": dict(half_width=2.0, grid_n=512, pole_plus=(0.0, 0.0), pole_minus=(0.0, -1.6),
                 Q=(0.0, -1.0), zoom_half_width=0.0, zoom_n=512, r_max=0.4, r_min=0.05),
    "graph": dict(half_width=1.6, grid_n=512, pole_plus=(0.0, 1.0), pole_minus=(0.0, -1.0),
                  Q=None, zoom_half_width=0.0, zoom_n=512, r_max=0.4, r_min=0.05),
    "lewy3": dict(half_width=2.0, grid_n=96, pole_plus=(0.0, 0.0, 1.0), pole_minus=(0.0, 0.0, -1.0),
                  Q=None, zoom_half_width=0.5, zoom_n=96, r_max=0.25, r_min=0.1),
    "cone4": dict(half_width=2.0, grid_n=0, pole_plus=None, pole_minus=None,
                  Q=(0.0, 0.0, 0.0, 0.0), zoom_half_width=0.0, zoom_n=0, r_max=1.0, r_min=0.1),
}

GENERIC_DEFAULTS = dict(count=6, log_spacing=True, output_dir="freebnd-out", seed=0, r0=0.5,
                        rbar=None, n_steps=3, alpha=None, patch=0.25, n_points=16,
                        n_draws=1000, weights="2,2,0,0,1,1,2,1,0,0,0", eps=0.05, center=None,
                        radii=None, domain="halfplane")


@dataclass
class ExperimentConfig:
    experiment: str
    domain: str
    grid_n: int
    half_width: float
    center: tuple
    pole_plus: tuple | None
    pole_minus: tuple | None
    Q: tuple
    radii: tuple
    zoom_half_width: float
    zoom_n: int
    output_dir: str
    seed: int
    r0: float
    rbar: float | None
    n_steps: int
    alpha: float | None
    patch: float
    n_points: int
    n_draws: int
    weights: str
    eps: float
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = {}
        for k in KEYS:
            if k in ("r_min", "r_max", "count", "log_spacing"):
                continue
            v = getattr(self, k)
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


# ---------------------------------------------------------------------------
# parsing


def _line_of(path: Path, key: str) -> int:
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip()
        if s and s[0] not in "#;[" and s.split("=", 1)[0].split(":", 1)[0].strip().lower() == key.lower():
            return i
    return 0


def read_config(path) -> dict:
    """Parse a flat INI file into raw strings; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    sections = cp.sections()
    if len(sections) != 1:
        raise ConfigError(f"{path}: expected exactly one section, found {len(sections)}")
    sec = sections[0]
    raw = dict(cp[sec])
    if sec != "run":
        if sec not in EXPERIMENTS:
            raise ConfigError(f"{path}: unknown experiment section [{sec}]")
        raw.setdefault("experiment", sec)
    for k in raw:
        if k not in KEYS:
            raise ConfigError(f"{path}:{_line_of(path, k)}: unknown key {k!r}")
    return raw


def _domain_family(name: str) -> str:
    return "graph" if name.startswith("graph:") else name


def build_config(raw: dict) -> ExperimentConfig:
    """Typed, validated configuration from raw key/value strings."""
    errors = []
    vals = {}
    for k, v in raw.items():
        if k not in KEYS:
            errors.append(f"{k}: unknown key")
            continue
        try:
            vals[k] = KEYS[k][0](v) if isinstance(v, str) else v
        except (TypeError, ValueError) as exc:
            errors.append(f"{k}: cannot parse {v!r} ({exc})")
    if errors:
        raise ConfigError("; ".join(errors))
    exp = vals.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    merged = dict(GENERIC_DEFAULTS)
    fam = _domain_family(vals.get("domain", merged["domain"]))
    if fam not in DOMAIN_DEFAULTS:
        from freebnd.domains import ZOO
        raise ConfigError(f"domain: unknown domain {vals.get('domain')!r}; known: {', '.join(ZOO)}")
    merged.update(DOMAIN_DEFAULTS[fam])
    merged.update(vals)
    c = merged
    if c["grid_n"] is not None and fam != "cone4" and c["grid_n"] < 8:
        errors.append(f"grid_n: must be >= 8, got {c['grid_n']}")
    if c["half_width"] <= 0:
        errors.append("half_width: must be positive")
    if c["zoom_half_width"] < 0:
        errors.append("zoom_half_width: must be non-negative")
    if c["zoom_half_width"] > 0 and c["zoom_n"] < 8:
        errors.append("zoom_n: must be >= 8")
    if c["seed"] < 0:
        errors.append("seed: must be non-negative")
    if c["n_draws"] < 1:
        errors.append("n_draws: must be positive")
    if c["radii"] is not None:
        radii = tuple(sorted(set(c["radii"]), reverse=True))
    else:
        try:
            if c["count"] < 2:
                raise ValueError("count must be >= 2")
            if not 0 < c["r_min"] < c["r_max"]:
                raise ValueError("need 0 < r_min < r_max")
            gen = np.geomspace if c["log_spacing"] else np.linspace
            radii = tuple(float(r) for r in gen(c["r_max"], c["r_min"], c["count"]))
        except ValueError as exc:
            errors.append(f"radii: {exc}")
            radii = ()
    if any(r <= 0 for r in radii):
        errors.append("radii: must be positive")
    if errors:
        raise ConfigError("; ".join(errors))
    cfg = ExperimentConfig(
        experiment=exp, domain=c["domain"], grid_n=c["grid_n"], half_width=c["half_width"],
        center=c["center"], pole_plus=c["pole_plus"], pole_minus=c["pole_minus"], Q=c["Q"],
        radii=radii, zoom_half_width=c["zoom_half_width"], zoom_n=c["zoom_n"],
        output_dir=c["output_dir"], seed=c["seed"], r0=c["r0"], rbar=c["rbar"],
        n_steps=c["n_steps"], alpha=c["alpha"], patch=c["patch"], n_points=c["n_points"],
        n_draws=c["n_draws"], weights=c["weights"], eps=c["eps"], raw=dict(raw))
    _validate_geometry(cfg)
    return cfg


def _validate_geometry(cfg: ExperimentConfig):
    """Check radii against the grid before any solve."""
    if cfg.experiment in ("harnack", "transmission", "syscheck"):
        if cfg.experiment == "syscheck":
            from freebnd.hodograph import WeightAssignment
            try:
                WeightAssignment.parse(cfg.weights)
            except ValueError as exc:
                raise ConfigError(f"weights: {exc}") from None
        return
    from freebnd.domains import domain_by_name
    try:
        dom = domain_by_name(cfg.domain)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"domain: {exc}") from None
    d = dom.dimension
    if cfg.Q is None:
        cfg.Q = _default_Q(cfg.domain, dom)
    if len(cfg.Q) != d:
        raise ConfigError(f"Q: expected {d} coordinates, got {len(cfg.Q)}")
    if cfg.center is None:
        cfg.center = (0.0,) * d
    if len(cfg.center) != d:
        raise ConfigError(f"center: expected {d} coordinates")
    if abs(float(dom.sd(np.asarray(cfg.Q, float)[None])[0])) > 1e-6:
        raise ConfigError(f"Q: {list(cfg.Q)} is not on the boundary of {cfg.domain}")
    if cfg.experiment == "beta":
        return
    if d == 4:
        raise ConfigError(f"domain: {cfg.domain} is geometry only; use the beta experiment")
    for name in ("pole_plus", "pole_minus"):
        p = getattr(cfg, name)
        if p is None or len(p) != d:
            raise ConfigError(f"{name}: expected {d} coordinates")
    h = 2 * cfg.half_width / cfg.grid_n
    reach = cfg.half_width - float(np.max(np.abs(np.subtract(cfg.Q, cfg.center))))
    if cfg.zoom_half_width > 0:
        h = 2 * cfg.zoom_half_width / cfg.zoom_n
        reach = cfg.zoom_half_width
        for name in ("pole_plus", "pole_minus"):
            if np.max(np.abs(np.subtract(getattr(cfg, name), cfg.Q))) <= cfg.zoom_half_width:
                raise ConfigError(f"zoom_half_width: window around Q contains {name}")
    if cfg.experiment == "flatness" and not 0 < cfg.r0 <= reach - 2 * h:
        raise ConfigError(f"r0: must lie in (0, {reach - 2 * h:.4g}]")
    if cfg.experiment in ("acf", "frequency", "monneau", "density", "tangent"):
        lo, hi = 8 * h, reach - 2 * h
        bad = [r for r in cfg.radii if not lo <= r <= hi]
        if bad:
            raise ConfigError(f"radii: {bad} outside the resolved range [{lo:.4g}, {hi:.4g}] "
                              f"for grid spacing {h:.4g}")


def _default_Q(name, dom):
    if name.startswith("graph:"):
        return (0.0, float(dom.boundary_points(np.zeros((1, 1)))[0, 1]))
    if name == "lewy3":
        from freebnd.domains import lewy_symmetric_points
        return tuple(float(v) for v in lewy_symmetric_points(0.3)[0])
    return DOMAIN_DEFAULTS[name]["Q"]


# ---------------------------------------------------------------------------
# output


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(str(_fmt(x)) for x in v)
    return v


def _json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def input_hash(cfg: ExperimentConfig) -> str:
    """Git-style content hash over the canonical config and any graph table.

    The output directory is not an input, so it is left out.
    """
    echo = {k: v for k, v in cfg.echo().items() if k != "output_dir"}
    blob = json.dumps(_plain(echo), sort_keys=True)
    if cfg.domain.startswith("graph:") and cfg.domain != "graph:power":
        blob += Path(cfg.domain[len("graph:"):]).read_text()
    data = blob.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# ---------------------------------------------------------------------------
# experiments


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FREEBND_THREADS", "1")))
    except ValueError:
        return 1


def _pair(cfg: ExperimentConfig):
    from freebnd.domains import domain_by_name
    from freebnd.grid import GridSpec, build_pair, zoom

    dom = domain_by_name(cfg.domain)
    spec = GridSpec.cube(cfg.center, cfg.half_width, cfg.grid_n)
    pair = build_pair(dom, spec, cfg.pole_plus, cfg.pole_minus)
    if cfg.zoom_half_width > 0:
        pair = zoom(pair, GridSpec.cube(cfg.Q, cfg.zoom_half_width, cfg.zoom_n))
    return pair


def _trace_rows(kind, Q, radii, fn, slack=0.0):
    from freebnd.grid import UnderResolvedError

    rows = []
    for r in radii:
        try:
            v, flag = fn(r), ""
        except UnderResolvedError:
            v, flag = math.nan, "under-resolved"
        rows.append([kind, list(Q), r, v, slack, flag])
    return rows


TRACE_HEADER = ["kind", "center", "r", "value", "slack", "flag"]


def exp_solve(cfg, pair):
    from freebnd.grid import total_flux

    Q = np.asarray(cfg.Q)
    nrm = pair.domain.outward_normal(Q[None])
    rows = [["flux_plus", total_flux(pair, +1)], ["flux_minus", total_flux(pair, -1)],
            ["density_plus_at_Q", float(pair.density_at(+1, Q[None], nrm)[0])],
            ["density_minus_at_Q", float(pair.density_at(-1, Q[None], nrm)[0])],
            ["h_at_Q", pair.h_at(Q)], ["grid_h", pair.spec.h]]
    return {"solve.csv": _csv(rows, ["quantity", "value"])}


def exp_acf(cfg, pair):
    from freebnd.functionals import acf_J

    f = pair.u
    rows = _trace_rows("J", cfg.Q, cfg.radii, lambda r: acf_J(f, np.asarray(cfg.Q), r))
    return {"acf.csv": _csv(rows, TRACE_HEADER)}


def exp_frequency(cfg, pair):
    from freebnd.functionals import almgren_N, build_v

    v = build_v(pair, cfg.Q)
    rows = _trace_rows("N", cfg.Q, cfg.radii, lambda r: almgren_N(v.field, np.asarray(cfg.Q), r),
                       slack=pair.spec.h)
    return {"frequency.csv": _csv(rows, TRACE_HEADER)}


def exp_monneau(cfg, pair):
    from freebnd.blowup import fit_tangent
    from freebnd.functionals import LinearForm, build_v, monneau_M

    v = build_v(pair, cfg.Q)
    fit = fit_tangent(v, cfg.Q, min(cfg.radii))
    p = LinearForm.from_vector(fit.vector)
    rows = _trace_rows("M", cfg.Q, cfg.radii, lambda r: monneau_M(v.field, p, np.asarray(cfg.Q), r))
    return {"monneau.csv": _csv(rows, TRACE_HEADER),
            "tangent.json": _json({"nu": fit.nu, "theta_plus": fit.theta_plus,
                                   "theta_minus": fit.theta_minus, "r": fit.r})}


def exp_density(cfg, pair):
    from freebnd.grid import harmonic_measure_of_ball, unit_ball_volume

    n = pair.dimension
    c = unit_ball_volume(n - 1)
    out = {}
    for side, name in ((1, "plus"), (-1, "minus")):
        rows = _trace_rows("density", cfg.Q, cfg.radii,
                           lambda r: harmonic_measure_of_ball(pair, side, cfg.Q, r) / (c * r ** (n - 1)),
                           slack=pair.spec.h)
        out[f"density_{name}.csv"] = _csv(rows, TRACE_HEADER)
    return out


def exp_beta(cfg, pair=None):
    from freebnd.blowup import beta_number
    from freebnd.domains import domain_by_name, reifenberg_theta

    dom = domain_by_name(cfg.domain)
    Q = np.asarray(cfg.Q)
    rows = []
    for r in cfg.radii:
        b = beta_number(dom, Q, r)
        th = reifenberg_theta(dom, Q, r).theta if dom.dimension <= 3 else math.nan
        rows.append([list(Q), r, b, th])
    return {"beta.csv": _csv(rows, ["center", "r", "beta", "theta"])}


def _boundary_samples(dom, Q, patch, n):
    """``n`` boundary points within ``patch`` of Q, ordered along the chart."""
    pts, _, _ = dom.sample_boundary(Q, patch, patch / (4 * n))
    pts = pts[np.linalg.norm(pts - Q, axis=1) <= patch]
    if len(pts) < n:
        raise ValueError("too few boundary samples near Q")
    idx = np.linspace(0, len(pts) - 1, n).round().astype(int)
    return pts[idx]


def exp_tangent(cfg, pair):
    from freebnd.blowup import fit_tangent, fits_to_csv, flux_density
    from freebnd.functionals import build_v

    Q = np.asarray(cfg.Q)
    pts = _boundary_samples(pair.domain, Q, cfg.patch, cfg.n_points)
    r = min(cfg.radii)

    def one(q):
        return fit_tangent(build_v(pair, q), q, r)

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        fits = list(ex.map(one, pts))
    dens = [flux_density(pair, -1, q, r) for q in pts]
    rows = [[list(f.Q), f.theta_plus, f.theta_minus, d] for f, d in zip(fits, dens)]
    floor = min(min(f.theta_plus, f.theta_minus) for f in fits)
    return {"tangent.csv": fits_to_csv(fits),
            "density_check.csv": _csv(rows, ["Q", "theta_plus", "theta_minus", "flux_density_minus"]),
            "floor.json": _json({"theta_floor": floor, "n_points": len(fits), "r": r})}


def exp_flatness(cfg, pair):
    from freebnd.flatness import default_rbar, flatness_decay

    alpha = cfg.alpha if cfg.alpha is not None else float(pair.domain.metadata.get("holder_alpha", 1.0))
    rbar = cfg.rbar if cfg.rbar is not None else default_rbar(alpha)
    logv = flatness_decay(pair, cfg.Q, cfg.r0, rbar=rbar, n_steps=cfg.n_steps, alpha=alpha)
    summary = {"s_fit": logv.s_fit, "s_floor": logv.s_floor, "rbar": rbar, "alpha": alpha,
               "truncated": logv.truncated, "beta": logv.beta,
               "hypothesis": ["ok" if s.hypothesis_ok else "hypothesis violated" for s in logv.steps],
               "longest_contraction_run": logv.longest_contraction_run()}
    return {"flatness.csv": logv.to_csv(), "flatness.json": _json(summary)}


def exp_harnack(cfg, pair=None):
    from freebnd.flatness import harnack_gap_check, harnack_two_sided

    eps = cfg.eps

    def U(t):
        return np.maximum(t, 0) - np.maximum(-t, 0)

    cases = {
        "uniform_shift": lambda x: U(x[:, -1] + eps),
        "harmonic_corrected": lambda x: U(x[:, -1] + eps * (1 + (x[:, -1] ** 2 - x[:, 0] ** 2) / 2)),
    }
    out = {"eps": eps, "cases": {}}
    nu = [0.0, 1.0]
    for name, w in cases.items():
        one = harnack_gap_check(w, 1.0, nu, 1.0, eps)
        two = harnack_two_sided(w, 1.0, nu, 1.0, 0.0, 1.5 * eps)
        out["cases"][name] = {"one_sided": vars(one), "two_sided": vars(two)}
    return {"harnack.json": _json(out)}


def exp_transmission(cfg, pair=None):
    from freebnd.flatness import transmission_expand

    fields_ = {"x_n": lambda x: x[:, -1], "x_1": lambda x: x[:, 0],
               "Q": lambda x: 0.5 * (x[:, -1] ** 2 - x[:, 0] ** 2)}
    rows = []
    for name, W in fields_.items():
        for r in (0.4, 0.2, 0.1):
            e = transmission_expand(W, r)
            rows.append([name, r, e.value, e.tangential_gradient, e.p, e.residual, e.bound, e.ok])
    return {"transmission.csv": _csv(rows, ["W", "r", "value", "grad_tangential", "p",
                                            "residual", "bound", "ok"])}


def exp_hodograph(cfg, pair):
    from freebnd.hodograph import hodograph_transform, transformed_residual

    hp = hodograph_transform(pair, cfg.Q, cfg.patch, normalize=True)
    rep = transformed_residual(hp)
    return {"hodograph.json": _json(vars(rep))}


def exp_syscheck(cfg, pair=None):
    from freebnd.hodograph import (WeightAssignment, coercivity_suite, conjugacy_suite,
                                   ellipticity_suite, weights_validate)

    w = WeightAssignment.parse(cfg.weights)
    ok, rep = weights_validate(w)
    out = {"weights": dict(zip(WeightAssignment.ORDER, w.as_tuple())),
           "verdict": "valid" if ok else "invalid", "conditions": rep,
           "ellipticity": ellipticity_suite(cfg.n_draws, cfg.seed),
           "coercivity": coercivity_suite(cfg.n_draws, cfg.seed),
           "conjugacy": conjugacy_suite(cfg.n_draws, cfg.seed)}
    return {"syscheck.json": _json(out)}


RUNNERS = {name: globals()[f"exp_{name}"] for name in EXPERIMENTS}


def run(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Execute an experiment; returns (status, {file name: content})."""
    from freebnd.blowup import DegenerateDensityError
    from freebnd.flatness import FlatnessError, NotTransmissionError
    from freebnd.grid import DegenerateDomainError, SolverError, UnderResolvedError
    from freebnd.hodograph import DegenerateGradientError, HodographFoldError

    numerical = (SolverError, DegenerateDomainError, DegenerateDensityError, FlatnessError,
                 NotTransmissionError, DegenerateGradientError, HodographFoldError,
                 UnderResolvedError, np.linalg.LinAlgError)
    try:
        pair = None if cfg.experiment in NO_SOLVE else _pair(cfg)
        return 0, RUNNERS[cfg.experiment](cfg, pair)
    except numerical as exc:
        log.error("numerical failure: %s", exc)
        return 1, {}


def emit(cfg: ExperimentConfig, files: dict, wall: float) -> Path:
    out = Path(cfg.output_dir)
    manifest = {"version": __version__, "experiment": cfg.experiment, "config": cfg.echo(),
                "input_hash": input_hash(cfg), "wall_time_s": round(wall, 3),
                "grid": {"n": cfg.grid_n, "half_width": cfg.half_width,
                         "zoom_n": cfg.zoom_n, "zoom_half_width": cfg.zoom_half_width},
                "files": {name: _sha256(text) for name, text in sorted(files.items())}}
    for name, text in sorted(files.items()):
        write_atomic(out / name, text)
    write_atomic(out / "manifest.json", _json(manifest))
    return out


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freebnd", description="Two-phase free boundary experiments.")
    ap.add_argument("--version", action="version", version=f"freebnd {__version__}")
    ap.add_argument("--list-domains", action="store_true", help="list the domain zoo and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")
    rp = sub.add_parser("run", help="run an experiment")
    rp.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    rp.add_argument("--config", help="flat INI config file")
    for k, (_, hlp) in KEYS.items():
        if k == "experiment":
            continue
        rp.add_argument(f"--{k.replace('_', '-')}", dest=k, help=hlp)
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --version/--help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.list_domains:
        from freebnd.domains import ZOO
        for name, desc in ZOO.items():
            print(f"{name:14s} {desc}")
        return 0
    if args.command != "run":
        ap.print_usage(sys.stderr)
        return 2
    try:
        raw = read_config(args.config) if args.config else {}
        if args.experiment:
            raw["experiment"] = args.experiment
        for k in KEYS:
            v = getattr(args, k, None)
            if v is not None and k != "experiment":
                raw[k] = v
        if "experiment" not in raw:
            raise ConfigError("experiment: not given")
        cfg = build_config(raw)
    except ConfigError as exc:
        print(f"freebnd: config error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    status, files = run(cfg)
    if status != 0:
        return status
    out = emit(cfg, files, time.perf_counter() - t0)
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
