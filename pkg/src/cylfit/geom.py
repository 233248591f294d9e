"""Vector algebra, moment representation of lines, and cylinder distances.

Vectors are plain ``float64`` numpy arrays of shape ``(3,)``; point clouds are
arrays of shape ``(n, 3)``.  A line is stored as a unit direction ``a`` and a
moment ``b = r0 x a`` taken about the origin, which does not depend on which
point ``r0`` of the line was used to build it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# |(a, b)| above this (relative) is a caller error rather than rounding noise
_ORTHO_REJECT = 1e-6


def vec3(v, name: str = "vector") -> np.ndarray:
    """Coerce ``v`` to a finite float64 array of shape (3,)."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise InvalidInputError(f"{name} must have exactly 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite components: {arr}")
    return arr.copy()


def unit(v, name: str = "direction") -> np.ndarray:
    arr = vec3(v, name)
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise InvalidInputError(f"{name} has zero length")
    return arr / norm


def as_cloud(points) -> np.ndarray:
    """Coerce ``points`` to a finite ``(n, 3)`` float64 array with n >= 1."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError(f"point cloud must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError("point cloud is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("point cloud contains non-finite coordinates")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def canonical_sign(v: np.ndarray) -> float:
    """Return +1.0 or -1.0 so that ``sign * v`` has a positive largest-magnitude component.

    Ties go to the first index reaching the maximum magnitude.
    """
    k = int(np.argmax(np.abs(v)))
    return -1.0 if v[k] < 0 else 1.0


@dataclass(frozen=True, eq=False)
class AxisLine:
    """A line ``[r, a] = b`` with unit direction ``a`` and moment ``b`` perpendicular to ``a``.

    The direction is renormalized and ``b`` is re-orthogonalized on
    construction.  The sign of ``a`` is left as given; use
    :func:`canonicalize_axis` (or the factory functions, which already do so)
    to fix the ``+-a`` ambiguity.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = unit(self.a, "axis direction")
        b = vec3(self.b, "axis moment")
        along = float(a @ b)
        if abs(along) > _ORTHO_REJECT * max(1.0, float(np.linalg.norm(b))):
            raise InvalidInputError(f"axis moment is not perpendicular to direction: (a, b) = {along:g}")
        b = b - along * a
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def is_canonical(self) -> bool:
        return canonical_sign(self.a) > 0

    def point(self) -> np.ndarray:
        """Point of the line nearest to the origin."""
        return axis_point_nearest_origin(self)


@dataclass(frozen=True, eq=False)
class Cylinder:
    axis: AxisLine
    rho: float

    def __post_init__(self):
        rho = float(self.rho)
        if not (np.isfinite(rho) and rho > 0):
            raise InvalidInputError(f"cylinder radius must be positive and finite, got {self.rho!r}")
        object.__setattr__(self, "rho", rho)


def canonicalize_axis(axis: AxisLine) -> AxisLine:
    """Flip ``(a, b) -> (-a, -b)`` when needed so ``a`` has the canonical sign."""
    if axis.is_canonical:
        return axis
    return AxisLine(-axis.a, -axis.b)


def line_from_point_direction(r0, direction) -> AxisLine:
    """Build the canonical line through ``r0`` along ``direction``."""
    r0 = vec3(r0, "line point")
    a = unit(direction, "line direction")
    a = canonical_sign(a) * a
    return AxisLine(a, np.cross(r0, a))


def axis_point_nearest_origin(axis: AxisLine) -> np.ndarray:
    """Return ``c = [a, b]``, the foot of the perpendicular from the origin to the line."""
    return np.cross(axis.a, axis.b)


def moment_from_c(a, c) -> np.ndarray:
    """Invert ``c = [a, b]`` for unit ``a``: ``b = -[a, c]``.

    Any component of ``c`` along ``a`` is discarded by the cross product, so
    the result is always perpendicular to ``a``.
    """
    a = np.asarray(a, dtype=float)
    return -np.cross(a, np.asarray(c, dtype=float)) / float(a @ a)


def distance_to_axis(axis: AxisLine, r) -> np.ndarray | float:
    """Distance ``|[r, a] - b|`` from point(s) ``r`` to the line.

    Accepts a single point (returns a float) or an ``(n, 3)`` array.
    """
    r = np.asarray(r, dtype=float)
    d = np.linalg.norm(np.cross(r, axis.a) - axis.b, axis=-1)
    return float(d) if d.ndim == 0 else d


def surface_distance(cyl: Cylinder, r) -> np.ndarray | float:
    """Unsigned distance ``|rho_i - rho|`` from point(s) to the cylinder surface."""
    d = np.abs(distance_to_axis(cyl.axis, r) - cyl.rho)
    return float(d) if np.ndim(d) == 0 else d
