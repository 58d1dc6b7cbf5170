"""
Point sets on unit spheres: direction lattices for plane searches and
quadrature rules for shell integrals.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

GOLDEN = (1 + 5 ** 0.5) / 2


def fibonacci_lattice(n_points: int, dimension: int) -> np.ndarray:
    """Near-uniform unit vectors on S^{d-1}, shape ``(n_points, d)``.

    2D: equally spaced angles on the upper half circle (normals are only
    needed up to sign).  3D: the spherical Fibonacci spiral.  4D: the
    super-Fibonacci spiral on S^3.
    """
    n = int(n_points)
    if n < 1:
        raise ValueError("n_points must be positive")
    i = np.arange(n) + 0.5
    if dimension == 2:
        a = np.pi * i / n
        return np.column_stack([np.cos(a), np.sin(a)])
    if dimension == 3:
        z = 1 - 2 * i / n
        phi = 2 * np.pi * i / GOLDEN
        rho = np.sqrt(1 - z ** 2)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    if dimension == 4:
        psi = 1.533751168755204288118041
        s = i / n
        ab = np.sqrt(s), np.sqrt(1 - s)
        alpha = 2 * np.pi * i / np.sqrt(2)
        beta = 2 * np.pi * i / psi
        return np.column_stack([ab[0] * np.sin(alpha), ab[0] * np.cos(alpha),
                                ab[1] * np.sin(beta), ab[1] * np.cos(beta)])
    raise ValueError(f"no lattice for dimension {dimension}")


def angles_to_unit(angles: np.ndarray) -> np.ndarray:
    """Hyperspherical coordinates (d-1 angles) to a unit vector in R^d."""
    a = np.atleast_1d(np.asarray(angles, dtype=float))
    d = a.size + 1
    v = np.ones(d)
    for k in range(d - 1):
        v[k] *= np.cos(a[k])
        v[k + 1:] *= np.sin(a[k])
    return v


def unit_to_angles(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`angles_to_unit` (for any nonzero vector)."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    d = v.size
    a = np.zeros(d - 1)
    for k in range(d - 2):
        a[k] = np.arctan2(np.linalg.norm(v[k + 1:]), v[k])
    a[d - 2] = np.arctan2(v[d - 1], v[d - 2])
    return a


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Representative of ``{v, -v}`` whose first non-negligible entry is positive."""
    v = np.asarray(v, dtype=float)
    for c in v:
        if abs(c) > 1e-12:
            return v if c > 0 else -v
    return v


def sphere_rule(dimension: int, n_2d: int = 512, n_theta: int = 64, n_phi: int = 128):
    """Quadrature on the unit sphere S^{d-1}: ``(nodes, weights)``.

    Weights sum to the sphere area.  2D uses the trapezoid rule on the
    circle (spectrally accurate for periodic integrands).  3D uses
    Gauss-Legendre in ``cos(theta)`` times a trapezoid rule in ``phi``.
    """
    if dimension == 2:
        t = 2 * np.pi * (np.arange(n_2d) + 0.5) / n_2d
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(n_2d, 2 * np.pi / n_2d)
    if dimension == 3:
        z, wz = leggauss(n_theta)
        phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        Z, P = np.meshgrid(z, phi, indexing="ij")
        R = np.sqrt(1 - Z ** 2)
        nodes = np.stack([R * np.cos(P), R * np.sin(P), Z], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).ravel()
        return nodes, w
    raise ValueError(f"sphere quadrature only for dimension 2 or 3, got {dimension}")


def ball_rule(dimension: int, n_radial: int = 48, **kw):
    """Polar quadrature on the unit ball: ``(nodes, weights)``.

    Gauss-Legendre in the radius with the Jacobian ``rho^{d-1}`` folded
    into the weights, so integrands with an ``|y|^{2-d}`` singularity at
    the centre stay bounded and are integrated to high order.
    """
    s_nodes, s_w = sphere_rule(dimension, **kw)
    x, wx = leggauss(n_radial)
    rho = 0.5 * (x + 1)
    wr = 0.5 * wx * rho ** (dimension - 1)
    nodes = (rho[:, None, None] * s_nodes[None, :, :]).reshape(-1, dimension)
    w = (wr[:, None] * s_w[None, :]).ravel()
    return nodes, w, np.repeat(rho, len(s_w))
