"""Reduced objective, its minimization over the unit sphere, and the end-to-end fit.

Pipeline: minimize F(a) on the sphere -> c from ``2 Q c = L(a)`` -> moment
``b = -[a, c]`` -> axis distances -> radius ``rho^2 = mean(rho_i^2)``.

F(a) is the minimum of the biquadratic error over an *unconstrained* vector
c.  A genuine axis needs ``c`` perpendicular to ``a``, so F is a lower bound
on the error of the cylinder actually produced; the two coincide when the
optimal c happens to be perpendicular (exact cylinders in particular).  The
fit therefore reports the error of the returned cylinder as ``dbar2`` and the
minimized F separately as ``diagnostics.objective_at_solution``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCloudError, InvalidInputError, NumericFailureError
from .geom import (
    AxisLine,
    Cylinder,
    as_cloud,
    canonical_sign,
    distance_to_axis,
    line_from_point_direction,
    moment_from_c,
    unit,
)
from .moments import (
    COMPONENT_INDICES,
    MULTIPLICITIES,
    DegeneracyClass,
    NonFlatnessForm,
    QuarticObjective,
    classify_degeneracy,
    column_mean,
    nonflatness_operator,
    quartic_tensor,
)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
ARMIJO = 1e-4
ZERO_RADIUS_RTOL = 1e-12
TIE_RTOL = 1e-12
CANDIDATE_RTOL = 1e-9

_EXPLANATIONS = {
    DegeneracyClass.TRIPLE: "all points coincide; any cylinder whose surface passes through them fits equally well",
    DegeneracyClass.DOUBLE: "all points are collinear; any cylinder whose surface contains that line fits equally well",
    DegeneracyClass.SIMPLE: (
        "all points are coplanar; the best-fitting cylinder is not unique "
        "(rerun with allow_coplanar for a best-effort fit with the axis inside the plane)"
    ),
}


@dataclass(frozen=True)
class FitConfig:
    grid_count: int = 2000
    multistart_count: int = 8
    tol_stationarity: float = 1e-12
    max_refine_iters: int = 100
    rank_eps: float = 1e-9
    emit_residuals: bool = False
    allow_coplanar: bool = False  # best-effort fit for coplanar clouds instead of refusal
    workers: int = 1  # >1 refines seeds in a thread pool; results are identical

    def __post_init__(self):
        if self.grid_count < 8:
            raise InvalidInputError("grid_count must be >= 8")
        if self.multistart_count < 1:
            raise InvalidInputError("multistart_count must be >= 1")
        if self.max_refine_iters < 0:
            raise InvalidInputError("max_refine_iters must be >= 0")
        if not (self.tol_stationarity > 0 and self.rank_eps > 0):
            raise InvalidInputError("tolerances must be positive")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")


@dataclass
class RefineResult:
    direction: np.ndarray
    objective: float
    stationarity_residual: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


@dataclass
class FitDiagnostics:
    stationarity_residual: float
    refine_iterations: int
    seeds_evaluated: int
    objective_at_solution: float
    converged: bool
    candidates: list[tuple[np.ndarray, float]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class CylinderFit:
    cylinder: Cylinder
    dbar2: float
    rms_distance: float
    degeneracy: DegeneracyClass
    diagnostics: FitDiagnostics
    residuals: np.ndarray | None = None

    @property
    def axis(self) -> AxisLine:
        return self.cylinder.axis

    @property
    def radius(self) -> float:
        return self.cylinder.rho


# --------------------------------------------------------------------------
# objective and derivatives


def _monomials(ap: np.ndarray) -> np.ndarray:
    cols = [ap[..., i] * ap[..., j] * ap[..., k] * ap[..., l] for i, j, k, l in COMPONENT_INDICES]
    return np.stack(cols, axis=-1)


def reduced_objective(q: QuarticObjective, a) -> np.ndarray | float:
    """F(a) by contracting the tensor; accepts one direction or an (N, 3) stack.

    Non-unit input evaluates the homogeneous quartic extension.
    """
    a = np.asarray(a, dtype=float)
    ap = a @ q.basis
    weights = q.components * MULTIPLICITIES
    f = _monomials(ap) @ weights
    return float(f) if f.ndim == 0 else f


def objective_gradient(q: QuarticObjective, a) -> np.ndarray:
    """Euclidean gradient ``4 D_ijkl a^j a^k a^l`` of the homogeneous extension."""
    a = np.asarray(a, dtype=float)
    ap = q.basis.T @ a
    g = 4.0 * np.einsum("ijkl,j,k,l->i", q.full, ap, ap, ap)
    return q.basis @ g


def objective_hessian(q: QuarticObjective, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    ap = q.basis.T @ a
    h = 12.0 * np.einsum("ijkl,k,l->ij", q.full, ap, ap)
    return q.basis @ h @ q.basis.T


def stationarity_residual(q: QuarticObjective, a) -> float:
    """``|[grad F(a), a]|`` relative to the largest tensor component.

    Zero exactly when ``a`` is a constrained stationary point of F on the sphere.
    """
    a = np.asarray(a, dtype=float)
    return float(np.linalg.norm(np.cross(objective_gradient(q, a), a)) / q.scale)


# --------------------------------------------------------------------------
# back-substitution pieces


def optimal_c(form: NonFlatnessForm, L, rank_eps: float = 1e-9, skip_null: bool = False) -> np.ndarray:
    """Solve ``2 Q c = L`` in the eigenbasis of Q.

    With ``skip_null`` the components along vanishing eigenvalues are set to
    zero (the minimum-norm solution) instead of raising.
    """
    L = np.asarray(L, dtype=float)
    null = form.null_mask(rank_eps)
    if np.any(null) and not skip_null:
        degeneracy = DegeneracyClass.from_null_count(int(np.count_nonzero(null)))
        raise DegenerateCloudError(degeneracy, "Q is singular; 2 Q c = L has no unique solution")
    coeffs = form.eigenvectors.T @ L
    c = np.zeros(3)
    for k in range(3):
        if not null[k]:
            c += coeffs[k] / (2.0 * form.eigenvalues[k]) * form.eigenvectors[:, k]
    return c


def optimal_radius(cloud, axis: AxisLine) -> float:
    """``rho = sqrt(mean(rho_i^2))``, the radius minimizing the biquadratic error for this axis."""
    rho_i = distance_to_axis(axis, as_cloud(cloud))
    rho = math.sqrt(float(column_mean((rho_i * rho_i)[:, None])[0]))
    if rho == 0.0:
        raise DegenerateCloudError(DegeneracyClass.DOUBLE, "all points lie on the axis; zero radius")
    return rho


def dbar2_direct(cloud, axis: AxisLine, rho: float) -> float:
    """Biquadratic error ``mean((rho_i^2 - rho^2)^2)`` of the cylinder ``(axis, rho)``."""
    if rho < 0:
        raise InvalidInputError("rho must be non-negative")
    rho_i = distance_to_axis(axis, as_cloud(cloud))
    dev = rho_i * rho_i - rho * rho
    return float(column_mean((dev * dev)[:, None])[0])


# --------------------------------------------------------------------------
# search


def sphere_seeds(count: int) -> np.ndarray:
    """Fibonacci-spiral covering of the upper hemisphere, rows sign-canonicalized."""
    if count < 8:
        raise InvalidInputError("seed count must be >= 8")
    i = np.arange(count, dtype=float)
    z = 1.0 - (i + 0.5) / count
    rad = np.sqrt(1.0 - z * z)
    phi = i * GOLDEN_ANGLE
    seeds = np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
    seeds /= np.linalg.norm(seeds, axis=1)[:, None]
    signs = np.array([canonical_sign(s) for s in seeds])
    return seeds * signs[:, None]


def _circle_seeds(count: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    theta = np.pi * (np.arange(count) + 0.5) / count
    seeds = np.outer(np.cos(theta), u) + np.outer(np.sin(theta), v)
    seeds /= np.linalg.norm(seeds, axis=1)[:, None]
    signs = np.array([canonical_sign(s) for s in seeds])
    return seeds * signs[:, None]


def _tangent_basis(a: np.ndarray, normal: np.ndarray | None) -> np.ndarray:
    """Orthonormal columns spanning directions perpendicular to ``a`` (and to ``normal`` if given)."""
    if normal is not None:
        t = np.cross(normal, a)
        return (t / np.linalg.norm(t))[:, None]
    k = int(np.argmin(np.abs(a)))
    e = np.zeros(3)
    e[k] = 1.0
    u = e - (e @ a) * a
    u /= np.linalg.norm(u)
    return np.column_stack([u, np.cross(a, u)])


def _checked(f: float) -> float:
    if not math.isfinite(f):
        raise NumericFailureError(f"objective evaluated to {f}")
    return f


def refine_on_sphere(q: QuarticObjective, a0, cfg: FitConfig = FitConfig(),
                     plane_normal: np.ndarray | None = None) -> RefineResult:
    """Descend F on the unit sphere from ``a0``.

    Each step tries a Riemannian Newton step and falls back to a projected
    gradient step with Armijo backtracking; iterates are renormalized onto the
    sphere.  Steps never raise F beyond the rounding floor of its evaluation.
    With ``plane_normal`` the search stays on the great circle perpendicular
    to it.
    """
    a = unit(a0, "start direction")
    f = _checked(reduced_objective(q, a))
    # F cannot be resolved below this; near the optimum only the residual is informative
    floor = 64.0 * np.finfo(float).eps * q.abs_weight
    history = [f]
    iterations = 0
    converged = False

    def residual(d, g):
        if plane_normal is None:
            return float(np.linalg.norm(np.cross(g, d)) / q.scale)
        t = _tangent_basis(d, plane_normal)
        return float(abs(t[:, 0] @ g) / q.scale)

    g = objective_gradient(q, a)
    res = residual(a, g)
    while True:
        if res <= cfg.tol_stationarity:
            converged = True
            break
        if iterations >= cfg.max_refine_iters:
            break
        basis = _tangent_basis(a, plane_normal)
        gt = basis.T @ g
        hess = basis.T @ objective_hessian(q, a) @ basis - (a @ g) * np.eye(basis.shape[1])
        accepted = None

        if np.all(np.linalg.eigvalsh(hess) > 0):
            eta = -np.linalg.solve(hess, gt)
            cand = a + basis @ eta
            cand /= np.linalg.norm(cand)
            fc = _checked(reduced_objective(q, cand))
            gc = objective_gradient(q, cand)
            rc = residual(cand, gc)
            if fc <= f or (fc - f <= floor and rc < res):
                accepted = (cand, fc, gc, rc)

        if accepted is None:
            gnorm2 = float(gt @ gt)
            curvature = float(np.max(np.abs(np.linalg.eigvalsh(hess))))
            step = 1.0 / curvature if curvature > 0 else 1.0
            step = min(step, 0.5 / math.sqrt(gnorm2))  # at most ~0.5 rad per step
            direction = -(basis @ gt)
            for _ in range(60):
                cand = a + step * direction
                cand /= np.linalg.norm(cand)
                fc = _checked(reduced_objective(q, cand))
                if fc <= f - ARMIJO * step * gnorm2:
                    gc = objective_gradient(q, cand)
                    accepted = (cand, fc, gc, residual(cand, gc))
                    break
                step *= 0.5

        if accepted is None:
            break  # stalled at the rounding floor
        a, f, g, res = accepted
        iterations += 1
        history.append(f)

    return RefineResult(direction=a, objective=f, stationarity_residual=res,
                        iterations=iterations, converged=converged, history=history)


# --------------------------------------------------------------------------
# pipeline


def _select(results: list[RefineResult], q: QuarticObjective) -> RefineResult:
    best = min(r.objective for r in results)
    ties = [r for r in results if r.objective - best <= TIE_RTOL * q.scale]
    return max(ties, key=lambda r: tuple(canonical_sign(r.direction) * r.direction))


def fit_cylinder(cloud, cfg: FitConfig = FitConfig()) -> CylinderFit:
    """Fit the cylinder minimizing the biquadratic error to ``cloud``.

    Raises:
        InvalidInputError: empty or malformed cloud.
        DegenerateCloudError: coincident, collinear or (unless
            ``cfg.allow_coplanar``) coplanar points, or a zero-radius outcome.
        NumericFailureError: non-finite objective values.
    """
    r = as_cloud(cloud)
    form = nonflatness_operator(r)
    degeneracy = classify_degeneracy(form, cfg.rank_eps)
    warnings: list[str] = []
    plane_normal = None
    if degeneracy is not DegeneracyClass.NON_DEGENERATE:
        if degeneracy is not DegeneracyClass.SIMPLE or not cfg.allow_coplanar:
            raise DegenerateCloudError(degeneracy, _EXPLANATIONS[degeneracy])
        plane_normal = form.eigenvectors[:, 0]
        warnings.append("coplanar cloud: best-effort fit with the axis constrained to the plane; "
                        "the optimum is not unique in general")

    q = quartic_tensor(r, form, cfg.rank_eps, allow_null_directions=plane_normal is not None)

    if plane_normal is None:
        seeds = sphere_seeds(cfg.grid_count)
    else:
        seeds = _circle_seeds(cfg.grid_count, form.eigenvectors[:, 1], form.eigenvectors[:, 2])
    values = reduced_objective(q, seeds)
    if not np.all(np.isfinite(values)):
        raise NumericFailureError("objective is non-finite on the seed grid")
    order = np.lexsort((np.arange(len(seeds)), values))[: cfg.multistart_count]
    starts = [seeds[i] for i in order]

    def run(a0):
        return refine_on_sphere(q, a0, cfg, plane_normal)

    if cfg.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(a0) for a0 in starts]

    chosen = _select(results, q)
    a = chosen.direction * canonical_sign(chosen.direction)
    candidates = []
    for res in sorted(results, key=lambda res: res.objective):
        if res.objective - chosen.objective > CANDIDATE_RTOL * q.scale:
            break
        d = res.direction * canonical_sign(res.direction)
        if all(abs(d @ other) < 1.0 - 1e-12 for other, _ in candidates):
            candidates.append((d, res.objective))

    # back-substitute in the centroid frame
    x = r - form.center
    w = np.sum(np.cross(x, a) ** 2, axis=1)
    L = column_mean((x - column_mean(x)) * w[:, None])
    c = optimal_c(form, L, cfg.rank_eps, skip_null=plane_normal is not None)
    b_local = moment_from_c(a, c)
    rho_i = np.linalg.norm(np.cross(x, a) - b_local, axis=1)
    rho = math.sqrt(float(column_mean((rho_i * rho_i)[:, None])[0]))
    if rho <= ZERO_RADIUS_RTOL * form.extent:
        raise DegenerateCloudError(DegeneracyClass.DOUBLE,
                                   "fitted radius is zero: the points are effectively collinear")

    axis = line_from_point_direction(form.center + np.cross(a, b_local), a)
    dev2 = rho_i * rho_i - rho * rho
    dbar2 = float(column_mean((dev2 * dev2)[:, None])[0])
    d = np.abs(rho_i - rho)
    rms = math.sqrt(float(column_mean((d * d)[:, None])[0]))

    diagnostics = FitDiagnostics(
        stationarity_residual=chosen.stationarity_residual,
        refine_iterations=sum(res.iterations for res in results),
        seeds_evaluated=len(seeds),
        objective_at_solution=chosen.objective,
        converged=chosen.converged,
        candidates=candidates,
        warnings=warnings,
    )
    return CylinderFit(
        cylinder=Cylinder(axis, rho),
        dbar2=dbar2,
        rms_distance=rms,
        degeneracy=degeneracy,
        diagnostics=diagnostics,
        residuals=d if cfg.emit_residuals else None,
    )
