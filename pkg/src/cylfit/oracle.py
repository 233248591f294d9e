"""Brute-force and finite-difference verifiers.

Nothing here shares evaluation code with :mod:`cylfit.fitter`: the reduced
objective is recomputed from the raw points (uncentred moments, numpy's
eigensolver) and minimized by exhaustive search.  It is slow on purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloudError, InvalidInputError
from .geom import Cylinder, as_cloud
from .moments import DegeneracyClass

RESOLUTION_DEFAULT = 10_000
_CHUNK = 2048


@dataclass(frozen=True)
class GridSearchResult:
    best_direction: np.ndarray
    best_value: float
    resolution: int


def _axis_distances(cloud: np.ndarray, cyl: Cylinder) -> np.ndarray:
    # distance |[r - r0, a]| / |a| with r0 any point of the axis
    a = cyl.axis.a
    r0 = np.cross(a, cyl.axis.b)
    return np.linalg.norm(np.cross(cloud - r0, a), axis=1) / np.linalg.norm(a)


def biquadratic_error_by_definition(cloud, cyl: Cylinder) -> float:
    """``mean(d_i^2 (2 rho +- d_i)^2)``, plus for exterior points and minus for interior ones."""
    r = as_cloud(cloud)
    rho_i = _axis_distances(r, cyl)
    d = np.abs(rho_i - cyl.rho)
    sign = np.where(rho_i >= cyl.rho, 1.0, -1.0)
    return float(np.mean(d**2 * (2.0 * cyl.rho + sign * d) ** 2))


def rms_error(cloud, cyl: Cylinder) -> float:
    r = as_cloud(cloud)
    d = np.abs(_axis_distances(r, cyl) - cyl.rho)
    return math.sqrt(float(np.mean(d**2)))


def reduced_objective_direct(cloud, directions) -> np.ndarray | float:
    """F(a) from the raw moment formulas: ``M - sum_k (e_k, L)^2 / lambda_k``.

    Raises:
        DegenerateCloudError: if Q is (numerically) singular.
    """
    r = as_cloud(cloud)
    a = np.asarray(directions, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    n = r.shape[0]
    mean_r = r.mean(axis=0)
    q = r.T @ r / n - np.outer(mean_r, mean_r)
    lam, vecs = np.linalg.eigh(q)
    if lam[0] <= 1e-9 * max(lam[2], 0.0):
        null = int(np.count_nonzero(lam <= 1e-9 * max(lam[2], 0.0)))
        raise DegenerateCloudError(DegeneracyClass.from_null_count(null), "oracle needs a non-degenerate cloud")

    out = np.empty(a.shape[0])
    for start in range(0, a.shape[0], _CHUNK):
        block = a[start:start + _CHUNK]
        # elementwise reductions only, so a direction evaluates identically alone or in a batch
        w = np.sum(np.cross(r[None, :, :], block[:, None, :]) ** 2, axis=2)  # (m, n)
        mean_w = w.mean(axis=1)
        L = np.sum(w[:, :, None] * r[None, :, :], axis=1) / n - mean_w[:, None] * mean_r[None, :]
        M = np.mean(w**2, axis=1) - mean_w**2
        proj = np.sum(L[:, :, None] * vecs[None, :, :], axis=1)
        out[start:start + _CHUNK] = M - np.sum(proj**2 / lam, axis=1)
    return float(out[0]) if single else out


def _radical_inverse(i: np.ndarray, base: int) -> np.ndarray:
    result = np.zeros(i.shape, dtype=float)
    f = 1.0 / base
    i = i.copy()
    while np.any(i > 0):
        result += f * (i % base)
        i //= base
        f /= base
    return result


def hemisphere_grid(resolution: int) -> np.ndarray:
    """Halton-sequence directions on the hemisphere z >= 0.

    Equal-area mapping (z uniform, azimuth uniform).  The grid for N directions
    is a prefix of the grid for any larger N, so refining never loses points.
    """
    i = np.arange(1, resolution + 1)
    z = _radical_inverse(i, 2)
    phi = 2.0 * np.pi * _radical_inverse(i, 3)
    s = np.sqrt(1.0 - z * z)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def grid_best_axis(cloud, resolution: int = RESOLUTION_DEFAULT, directions=None) -> GridSearchResult:
    """Exhaustive minimum of F over ``hemisphere_grid(resolution)`` (or explicit ``directions``)."""
    if directions is None:
        if resolution < 100:
            raise InvalidInputError("resolution must be >= 100")
        directions = hemisphere_grid(resolution)
    directions = np.asarray(directions, dtype=float)
    values = reduced_objective_direct(cloud, directions)
    k = int(np.argmin(values))
    return GridSearchResult(best_direction=directions[k].copy(), best_value=float(values[k]),
                            resolution=len(directions))


def finite_difference_gradient(objective, a, h: float | None = None) -> np.ndarray:
    """Central-difference gradient of ``objective`` at ``a``.

    ``objective`` is either a callable of one (3,) vector or a
    ``QuarticObjective`` (whose homogeneous extension is then differentiated).
    """
    a = np.asarray(a, dtype=float)
    if not callable(objective):
        from .fitter import reduced_objective

        tensor = objective

        def objective(x):
            return reduced_objective(tensor, x)
    if h is None:
        h = 1e-5 * max(1.0, float(np.linalg.norm(a)))
    grad = np.empty(3)
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        grad[i] = (objective(a + step) - objective(a - step)) / (2.0 * h)
    return grad
