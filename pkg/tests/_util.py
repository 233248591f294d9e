"""Shared helpers for the test suite."""

import numpy as np

from cylfit.data import GeneratorSpec, generate_cylinder_cloud


def random_unit(rng, size=None):
    v = rng.normal(size=(3,) if size is None else (size, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_cloud(rng, n=30, offset=2.0):
    """Anisotropic Gaussian cloud, well away from degenerate."""
    scales = rng.uniform(0.5, 2.0, size=3)
    return rng.normal(size=(n, 3)) * scales @ random_rotation(rng).T + rng.uniform(-offset, offset, size=3)


def cylinder_cloud(n=200, radius=1.0, height=2.0, axis_point=(0, 0, 0), axis_dir=(0, 0, 1), noise=0.0, seed=0):
    spec = GeneratorSpec(n=n, radius=radius, height=height, axis_point=tuple(axis_point),
                         axis_dir=tuple(axis_dir), noise_sigma=noise, seed=seed)
    return generate_cylinder_cloud(spec)


# 8 points on the unit cylinder around the z-axis: (+-1,0,z), (0,+-1,z), z in {0, 1}
UNIT_CYLINDER_8 = np.array(
    [[x, y, z] for z in (0.0, 1.0) for x, y in ((1, 0), (-1, 0), (0, 1), (0, -1))], dtype=float
)
