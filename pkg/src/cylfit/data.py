"""CSV point clouds, deterministic synthetic cylinders, and JSON fit reports.

Random streams: uniforms come from numpy's PCG64 bit generator (PCG-XSL-RR
128/64) seeded with ``PCG64(seed)``; each double is ``(raw >> 11) * 2**-53``.
Normals use the Marsaglia polar method: draw ``u, v`` uniform on (-1, 1)
(``2U - 1``, ``u`` first), reject unless ``0 < s = u^2 + v^2 < 1``, then emit
``u * f`` followed by ``v * f`` with ``f = sqrt(-2 ln s / s)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .fitter import CylinderFit
from .geom import as_cloud, unit, vec3

_TWO_POW_M53 = 2.0**-53


def parse_points_csv(text: str) -> np.ndarray:
    """Parse ``x,y,z`` lines; blank lines and ``#`` comments are skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(",")
        if len(fields) != 3:
            raise InvalidInputError(f"line {lineno}: expected 3 comma-separated values, got {line!r}")
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise InvalidInputError(f"line {lineno}: not a number in {line!r}") from None
        if not all(math.isfinite(v) for v in row):
            raise InvalidInputError(f"line {lineno}: non-finite value in {line!r}")
        rows.append(row)
    if not rows:
        raise InvalidInputError("no points in input")
    return np.array(rows, dtype=float)


def format_points_csv(cloud) -> str:
    """One ``x,y,z`` line per point with 17 significant digits (round-trips exactly)."""
    r = as_cloud(cloud)
    return "".join(f"{x:.17g},{y:.17g},{z:.17g}\n" for x, y, z in r)


class UniformStream:
    """Sequential uniform doubles in [0, 1) from a PCG64 stream."""

    def __init__(self, seed: int, chunk: int = 1024):
        self._bits = np.random.PCG64(seed)
        self._chunk = chunk
        self._buf = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            raw = self._bits.random_raw(self._chunk)
            self._buf = (raw >> np.uint64(11)).astype(float) * _TWO_POW_M53
            self._pos = 0
        u = float(self._buf[self._pos])
        self._pos += 1
        return u

    def normals(self, count: int) -> np.ndarray:
        out = np.empty(count)
        i = 0
        while i < count:
            u = 2.0 * self.next() - 1.0
            v = 2.0 * self.next() - 1.0
            s = u * u + v * v
            if s >= 1.0 or s == 0.0:
                continue
            f = math.sqrt(-2.0 * math.log(s) / s)
            out[i] = u * f
            if i + 1 < count:
                out[i + 1] = v * f
            i += 2
        return out


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    radius: float
    height: float
    axis_point: tuple = (0.0, 0.0, 0.0)
    axis_dir: tuple = (0.0, 0.0, 1.0)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError("n must be a positive integer")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InvalidInputError("radius must be positive")
        if not (math.isfinite(self.height) and self.height > 0):
            raise InvalidInputError("height must be positive")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InvalidInputError("noise_sigma must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        vec3(self.axis_point, "axis point")
        unit(self.axis_dir, "axis direction")


def _frame(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = int(np.argmin(np.abs(a)))
    e = np.zeros(3)
    e[k] = 1.0
    u = np.cross(a, e)
    u /= np.linalg.norm(u)
    return u, np.cross(a, u)


def generate_cylinder_cloud(spec: GeneratorSpec) -> np.ndarray:
    """Sample ``spec.n`` points on the cylinder surface, then add isotropic Gaussian noise.

    Per point the stream yields the axial offset then the angle; the 3n noise
    values (x, y, z per point) follow after all surface samples.
    """
    p0 = vec3(spec.axis_point, "axis point")
    a = unit(spec.axis_dir, "axis direction")
    u, v = _frame(a)
    stream = UniformStream(spec.seed)
    pts = np.empty((spec.n, 3))
    for i in range(spec.n):
        t = (stream.next() - 0.5) * spec.height
        theta = 2.0 * math.pi * stream.next()
        pts[i] = p0 + t * a + spec.radius * (math.cos(theta) * u + math.sin(theta) * v)
    if spec.noise_sigma > 0:
        pts += spec.noise_sigma * stream.normals(3 * spec.n).reshape(spec.n, 3)
    return pts


def _floats(v) -> list[float]:
    return [float(x) for x in v]


def fit_report(fit: CylinderFit) -> dict:
    """JSON-ready report of a fit with a fixed key order."""
    axis = fit.cylinder.axis
    diag = fit.diagnostics
    report = {
        "axis_direction": _floats(axis.a),
        "axis_point": _floats(axis.point()),
        "axis_moment": _floats(axis.b),
        "radius": fit.cylinder.rho,
        "dbar2": fit.dbar2,
        "rms_distance": fit.rms_distance,
        "degeneracy": fit.degeneracy.value,
        "diagnostics": {
            "stationarity_residual": diag.stationarity_residual,
            "refine_iterations": diag.refine_iterations,
            "seeds_evaluated": diag.seeds_evaluated,
            "objective_at_solution": diag.objective_at_solution,
            "converged": diag.converged,
            "candidates": [{"direction": _floats(d), "objective": f} for d, f in diag.candidates],
            "warnings": list(diag.warnings),
        },
    }
    if fit.residuals is not None:
        report["residuals"] = _floats(fit.residuals)
    return report


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"
