"""Point-cloud moments: centroid, the non-flatness form Q, L(a), M(a) and the quartic tensor.

The quartic tensor is what the fitter minimizes over the unit sphere.  It is
assembled in the eigenbasis of Q from the per-point matrices
``S_i = |x_i|^2 I - x_i x_i^T`` (so that ``|[x_i, a]|^2 = a^T S_i a``), taken
in the centroid frame ``x_i = r_i - r_cm``.  The reduced objective does not
depend on the origin, so centring only buys accuracy.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateCloudError, InvalidInputError
from .geom import as_cloud, canonical_sign

COMPENSATED_THRESHOLD = 100_000

# Independent components of a symmetric 4-tensor over 3 indices (0-based),
# with the number of index permutations each one stands for.
COMPONENT_INDICES = (
    (0, 0, 0, 0), (1, 1, 1, 1), (2, 2, 2, 2),
    (0, 0, 0, 1), (0, 0, 0, 2), (0, 1, 1, 1),
    (1, 1, 1, 2), (0, 2, 2, 2), (1, 2, 2, 2),
    (0, 0, 1, 1), (0, 0, 2, 2), (1, 1, 2, 2),
    (0, 0, 1, 2), (0, 1, 1, 2), (0, 1, 2, 2),
)
MULTIPLICITIES = np.array([1, 1, 1, 4, 4, 4, 4, 4, 4, 6, 6, 6, 12, 12, 12], dtype=float)

# packed storage of a symmetric 3x3 matrix: (00, 11, 22, 01, 02, 12)
_PACK = np.array([[0, 3, 4], [3, 1, 5], [4, 5, 2]])


def column_mean(x: np.ndarray) -> np.ndarray:
    """Mean over axis 0; compensated (``math.fsum``) for very large n."""
    n = x.shape[0]
    if n <= COMPENSATED_THRESHOLD:
        return x.mean(axis=0)
    flat = x.reshape(n, -1)
    out = np.array([math.fsum(col) for col in flat.T]) / n
    return out.reshape(x.shape[1:])


def center_of_mass(cloud) -> np.ndarray:
    """Arithmetic mean of the points.

    Accumulated relative to the first point, which keeps clouds far from the
    origin accurate and returns coincident points bit-exactly.
    """
    r = as_cloud(cloud)
    return r[0] + column_mean(r - r[0])


# --------------------------------------------------------------------------
# symmetric 3x3 eigenproblem


def symmetric_eigh(m, tol: float = 1e-14, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with values ascending and eigenvectors as
    columns, each column sign-normalized so its largest-magnitude entry is
    positive.
    """
    a = np.array(m, dtype=float)
    if a.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 matrix, got {a.shape}")
    a = 0.5 * (a + a.T)
    v = np.eye(3)
    scale = np.linalg.norm(a)
    if scale > 0:
        for _ in range(max_sweeps):
            off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
            if off <= tol * scale:
                break
            for p, q in ((0, 1), (0, 2), (1, 2)):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(3)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    v = v[:, order]
    for k in range(3):
        v[:, k] *= canonical_sign(v[:, k])
    return values, v


# --------------------------------------------------------------------------
# non-flatness form


class DegeneracyClass(enum.Enum):
    NON_DEGENERATE = "nondegenerate"
    SIMPLE = "simple"  # coplanar
    DOUBLE = "double"  # collinear
    TRIPLE = "triple"  # coincident

    @classmethod
    def from_null_count(cls, count: int) -> "DegeneracyClass":
        return (cls.NON_DEGENERATE, cls.SIMPLE, cls.DOUBLE, cls.TRIPLE)[count]


@dataclass(frozen=True, eq=False)
class NonFlatnessForm:
    """Covariance-like form ``Q(c, c) = mean((r_i - r_cm, c)^2)`` with its eigensystem.

    ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``; eigenvalues ascend.
    ``extent`` is the largest distance of a point from the centroid.
    """

    q: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    center: np.ndarray
    extent: float

    @property
    def spread(self) -> float:
        """RMS distance of the points from their centroid (``sqrt(tr Q)``)."""
        return math.sqrt(max(float(np.sum(self.eigenvalues)), 0.0))

    def null_mask(self, rank_eps: float = 1e-9) -> np.ndarray:
        """Boolean mask of eigenvalues counted as zero."""
        lam3 = float(self.eigenvalues[2])
        eps_abs = 1e-30 * self.extent**2
        return self.eigenvalues <= rank_eps * max(lam3, eps_abs)


def _packed_s(x: np.ndarray) -> np.ndarray:
    """Packed ``S_i = |x_i|^2 I - x_i x_i^T`` for each row of ``x``; shape (n, 6)."""
    sq = x * x
    return np.column_stack([
        sq[:, 1] + sq[:, 2],
        sq[:, 0] + sq[:, 2],
        sq[:, 0] + sq[:, 1],
        -x[:, 0] * x[:, 1],
        -x[:, 0] * x[:, 2],
        -x[:, 1] * x[:, 2],
    ])


def _second_moment(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``mean_i outer(u_i, v_i)``."""
    n = u.shape[0]
    if n <= COMPENSATED_THRESHOLD:
        return u.T @ v / n
    return column_mean(u[:, :, None] * v[:, None, :])


def nonflatness_operator(cloud) -> NonFlatnessForm:
    r = as_cloud(cloud)
    cm = center_of_mass(r)
    x = r - cm
    q = _second_moment(x, x)
    q = 0.5 * (q + q.T)
    values, vectors = symmetric_eigh(q)
    extent = float(np.max(np.linalg.norm(x, axis=1)))
    q.flags.writeable = False
    return NonFlatnessForm(q=q, eigenvalues=values, eigenvectors=vectors, center=cm, extent=extent)


def classify_degeneracy(form: NonFlatnessForm, rank_eps: float = 1e-9) -> DegeneracyClass:
    """Count vanishing eigenvalues of Q: 0/1/2/3 -> non-degenerate/simple/double/triple."""
    if not rank_eps > 0:
        raise InvalidInputError("rank_eps must be positive")
    return DegeneracyClass.from_null_count(int(np.count_nonzero(form.null_mask(rank_eps))))


# --------------------------------------------------------------------------
# axis-dependent moments


def axis_sq_distances(cloud, a) -> np.ndarray:
    """``|[r_i, a]|^2`` for every point; the squared distance to the line through the origin when |a| = 1."""
    r = np.asarray(cloud, dtype=float)
    return np.sum(np.cross(r, np.asarray(a, dtype=float)) ** 2, axis=-1)


def l_vector(cloud, a) -> np.ndarray:
    """``L(a) = mean_i (r_i - r_cm) |[r_i, a]|^2``.

    ``a`` is not normalized here, so L is exactly quadratic in ``a``.
    """
    r = as_cloud(cloud)
    w = axis_sq_distances(r, a)
    return column_mean((r - center_of_mass(r)) * w[:, None])


def m_scalar(cloud, a) -> float:
    """``M(a) = mean(w^2) - mean(w)^2`` with ``w_i = |[r_i, a]|^2``, evaluated as a centred variance."""
    r = as_cloud(cloud)
    w = axis_sq_distances(r, a)
    dev = w - column_mean(w[:, None])[0]
    return float(column_mean((dev * dev)[:, None])[0])


# --------------------------------------------------------------------------
# quartic tensor


@dataclass(frozen=True, eq=False)
class QuarticObjective:
    """Symmetric 4-tensor whose contraction with ``a (x) a (x) a (x) a`` is the reduced objective.

    ``components`` holds the 15 independent entries in ``COMPONENT_INDICES``
    order, expressed in the eigenbasis ``basis`` (columns) of ``form``.
    ``null_directions`` flags eigen-directions dropped from the elimination
    (only ever set for best-effort coplanar fits).
    """

    components: np.ndarray
    basis: np.ndarray
    form: NonFlatnessForm
    null_directions: np.ndarray

    @cached_property
    def full(self) -> np.ndarray:
        """The full (3, 3, 3, 3) tensor in the eigenbasis."""
        t = np.empty((3, 3, 3, 3))
        for value, idx in zip(self.components, COMPONENT_INDICES):
            for perm in set(itertools.permutations(idx)):
                t[perm] = value
        return t

    @property
    def scale(self) -> float:
        """Largest component magnitude; normalizes stationarity residuals."""
        s = float(np.max(np.abs(self.components)))
        return s if s > 0 else 1.0

    @property
    def abs_weight(self) -> float:
        """Bound on the sum of absolute contributions to F at a unit vector."""
        return float(MULTIPLICITIES @ np.abs(self.components))


def _symmetrize(t: np.ndarray) -> np.ndarray:
    perms = list(itertools.permutations(range(4)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)


def quartic_tensor(cloud, form: NonFlatnessForm | None = None, rank_eps: float = 1e-9,
                   allow_null_directions: bool = False) -> QuarticObjective:
    """Build the reduced-objective tensor ``D`` for ``cloud``.

    ``F(a) = M(a) - sum_k (e_k, L(a))^2 / lambda_k``; both terms are
    polynomials in ``a``, so ``F`` is the contraction of a symmetric 4-tensor.

    Raises:
        DegenerateCloudError: if Q has a vanishing eigenvalue.  With
            ``allow_null_directions`` a single null direction (coplanar cloud)
            is tolerated and simply left out of the sum, since ``(L, e_k)``
            vanishes identically along it.
    """
    r = as_cloud(cloud)
    if form is None:
        form = nonflatness_operator(r)
    null = form.null_mask(rank_eps)
    degeneracy = DegeneracyClass.from_null_count(int(np.count_nonzero(null)))
    if degeneracy is not DegeneracyClass.NON_DEGENERATE and not (
        allow_null_directions and degeneracy is DegeneracyClass.SIMPLE
    ):
        raise DegenerateCloudError(
            degeneracy, f"quartic objective undefined for a {degeneracy.value}-degenerate cloud"
        )

    basis = form.eigenvectors
    x = (r - form.center) @ basis
    s = _packed_s(x)
    sc = s - column_mean(s)
    cov = _second_moment(sc, sc)            # (6, 6): mean of S_ij S_kl, centred
    lin = _second_moment(x, sc)             # (3, 6): rows give (e_k, L) as a quadratic form
    full = cov[_PACK[:, :, None, None], _PACK[None, None, :, :]]
    for k in range(3):
        if null[k]:
            continue
        tk = lin[k][_PACK]
        full = full - np.multiply.outer(tk, tk) / form.eigenvalues[k]
    full = _symmetrize(full)
    components = np.array([full[idx] for idx in COMPONENT_INDICES])
    return QuarticObjective(components=components, basis=basis, form=form, null_directions=null)
