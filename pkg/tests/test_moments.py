import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import UNIT_CYLINDER_8, random_cloud, random_rotation, random_unit
from cylfit.errors import DegenerateCloudError, InvalidInputError
from cylfit.fitter import reduced_objective
from cylfit.moments import (
    COMPENSATED_THRESHOLD,
    COMPONENT_INDICES,
    MULTIPLICITIES,
    DegeneracyClass,
    center_of_mass,
    classify_degeneracy,
    column_mean,
    l_vector,
    m_scalar,
    nonflatness_operator,
    quartic_tensor,
    symmetric_eigh,
)

SQUARE = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)


def direct_objective(cloud, a):
    """F(a) = M - sum (e_k, L)^2 / lambda_k from l_vector/m_scalar and numpy's eigensolver."""
    lam, vecs = np.linalg.eigh(np.cov(cloud.T, bias=True))
    L = l_vector(cloud, a)
    return m_scalar(cloud, a) - np.sum((vecs.T @ L) ** 2 / lam)


# ---------------------------------------------------------------- centroid


def test_center_of_mass_examples():
    np.testing.assert_allclose(center_of_mass(np.eye(3)), [1 / 3] * 3, rtol=1e-15)
    np.testing.assert_array_equal(center_of_mass([[1.5, -2.0, 7.25]]), [1.5, -2.0, 7.25])


def test_center_of_mass_of_symmetric_cloud(rng):
    p = np.array([3.0, -1.0, 0.5])
    half = rng.normal(size=(10, 3))
    cloud = np.vstack([p + half, p - half])
    np.testing.assert_allclose(center_of_mass(cloud), p, atol=1e-14)


def test_center_of_mass_empty():
    with pytest.raises(InvalidInputError):
        center_of_mass(np.empty((0, 3)))


def test_coincident_points_have_exact_centroid():
    cloud = np.tile([0.1, 1 / 3, 7e5], (50, 1))
    np.testing.assert_array_equal(center_of_mass(cloud), cloud[0])


# ---------------------------------------------------------------- eigensolver


def test_jacobi_matches_numpy(rng):
    for _ in range(200):
        m = rng.normal(size=(3, 3)) * 10.0 ** rng.uniform(-6, 6)
        m = m + m.T
        values, vectors = symmetric_eigh(m)
        ref = np.linalg.eigvalsh(m)
        scale = np.max(np.abs(ref))
        np.testing.assert_allclose(values, ref, atol=1e-13 * scale)
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(3), atol=1e-13)
        np.testing.assert_allclose(m @ vectors, vectors * values, atol=1e-13 * scale)


def test_jacobi_repeated_and_zero_eigenvalues():
    values, vectors = symmetric_eigh(np.diag([2.0, 2.0, 0.0]))
    np.testing.assert_array_equal(values, [0, 2, 2])
    np.testing.assert_array_equal(vectors[:, 0], [0, 0, 1])
    values, vectors = symmetric_eigh(np.zeros((3, 3)))
    np.testing.assert_array_equal(values, [0, 0, 0])
    np.testing.assert_array_equal(vectors, np.eye(3))


def test_jacobi_eigenvectors_are_sign_canonical(rng):
    m = rng.normal(size=(3, 3))
    _, vectors = symmetric_eigh(m + m.T)
    for k in range(3):
        assert vectors[np.argmax(np.abs(vectors[:, k])), k] > 0


# ---------------------------------------------------------------- Q


def test_nonflatness_of_square():
    form = nonflatness_operator(SQUARE)
    np.testing.assert_allclose(form.q, np.diag([0.5, 0.5, 0.0]), atol=1e-16)
    np.testing.assert_allclose(form.eigenvalues, [0, 0.5, 0.5], atol=1e-16)
    np.testing.assert_allclose(form.eigenvectors[:, 0], [0, 0, 1], atol=1e-16)


def test_nonflatness_of_single_point():
    form = nonflatness_operator([[4.0, 5.0, 6.0]])
    np.testing.assert_array_equal(form.q, np.zeros((3, 3)))
    np.testing.assert_array_equal(form.eigenvalues, [0, 0, 0])


def test_quadratic_form_identity(rng):
    for _ in range(20):
        cloud = random_cloud(rng, n=25, offset=10)
        form = nonflatness_operator(cloud)
        cm = cloud.mean(axis=0)
        c = rng.normal(size=3)
        expected = np.mean(((cloud - cm) @ c) ** 2)
        assert c @ form.q @ c == pytest.approx(expected, rel=1e-12)


def test_form_invariants(rng):
    form = nonflatness_operator(random_cloud(rng))
    lam = form.eigenvalues
    assert lam[0] <= lam[1] <= lam[2]
    assert lam[0] >= -1e-12 * lam[2]
    e = form.eigenvectors
    np.testing.assert_allclose(e.T @ e, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(form.q @ e, e * lam, atol=1e-10 * lam[2])
    np.testing.assert_array_equal(form.q, form.q.T)


@given(st.integers(0, 2**32 - 1), st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
@settings(max_examples=50, deadline=None)
def test_translation_invariance_of_q(seed, px, py, pz):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng, n=20)
    base = nonflatness_operator(cloud)
    moved = nonflatness_operator(cloud + np.array([px, py, pz]))
    np.testing.assert_allclose(moved.q, base.q, atol=1e-12 * base.eigenvalues[2])


def test_rotation_equivariance_of_q_and_l(rng):
    cloud = random_cloud(rng, n=40)
    rot = random_rotation(rng)
    a = random_unit(rng)
    q = nonflatness_operator(cloud).q
    q_rot = nonflatness_operator(cloud @ rot.T).q
    np.testing.assert_allclose(q_rot, rot @ q @ rot.T, atol=1e-10 * np.abs(q).max())
    L = l_vector(cloud, a)
    L_rot = l_vector(cloud @ rot.T, rot @ a)
    np.testing.assert_allclose(L_rot, rot @ L, atol=1e-10 * np.linalg.norm(L))


# ---------------------------------------------------------------- degeneracy


def test_classify_by_eigenvalues():
    # three points on the axes and their mirror images give a full-rank form
    cloud = np.vstack([np.diag([1.0, 2.0, 3.0]), -np.diag([1.0, 2.0, 3.0])])
    form = nonflatness_operator(cloud)
    np.testing.assert_allclose(form.eigenvalues, np.array([1, 4, 9]) / 3)
    assert classify_degeneracy(form, 1e-9) is DegeneracyClass.NON_DEGENERATE


def test_classify_coplanar_collinear_coincident():
    assert classify_degeneracy(nonflatness_operator(SQUARE)) is DegeneracyClass.SIMPLE
    line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    assert classify_degeneracy(nonflatness_operator(line)) is DegeneracyClass.DOUBLE
    same = np.tile([0.3, -1.7, 2.2], (50, 1))
    assert classify_degeneracy(nonflatness_operator(same)) is DegeneracyClass.TRIPLE


def test_classify_rejects_nonpositive_eps():
    with pytest.raises(InvalidInputError):
        classify_degeneracy(nonflatness_operator(SQUARE), 0.0)


# ---------------------------------------------------------------- L and M


def test_l_vector_examples():
    np.testing.assert_allclose(l_vector(UNIT_CYLINDER_8, (0, 0, 1)), 0, atol=1e-16)
    np.testing.assert_array_equal(l_vector([[1.0, 2.0, 3.0]], (0.6, 0.8, 0)), [0, 0, 0])


def test_l_vector_uncentred_formula(rng):
    for _ in range(20):
        cloud = random_cloud(rng)
        a = random_unit(rng)
        w = np.sum(np.cross(cloud, a) ** 2, axis=1)
        uncentred = (cloud * w[:, None]).mean(axis=0) - cloud.mean(axis=0) * w.mean()
        np.testing.assert_allclose(l_vector(cloud, a), uncentred, rtol=1e-12, atol=1e-12 * np.abs(uncentred).max())


def test_m_scalar_examples():
    assert m_scalar(UNIT_CYLINDER_8, (0, 0, 1)) == 0.0
    assert m_scalar([[1.0, 2.0, 3.0]], (0, 0, 1)) == 0.0
    assert m_scalar([[1.0, 0, 0], [3.0, 0, 0]], (0, 0, 1)) == 16.0


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
@settings(max_examples=30, deadline=None)
def test_homogeneity(seed, t):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng, n=15)
    a = random_unit(rng)
    np.testing.assert_allclose(l_vector(cloud, t * a), t**2 * l_vector(cloud, a), rtol=1e-12,
                               atol=1e-12 * t**2 * np.abs(l_vector(cloud, a)).max())
    assert m_scalar(cloud, t * a) == pytest.approx(t**4 * m_scalar(cloud, a), rel=1e-12)


def test_l_vector_orthogonal_to_plane_normal(rng):
    rot = random_rotation(rng)
    flat = np.column_stack([rng.normal(size=(30, 2)), np.zeros(30)]) @ rot.T + 3.0
    form = nonflatness_operator(flat)
    e1 = form.eigenvectors[:, 0]
    scale = np.abs(flat).max()
    for a in random_unit(rng, 50):
        assert abs(l_vector(flat, a) @ e1) <= 1e-10 * scale**3


# ---------------------------------------------------------------- tensor


def test_multiplicities_cover_all_index_tuples():
    assert MULTIPLICITIES.sum() == 81
    assert len(set(COMPONENT_INDICES)) == 15


def test_tensor_requires_nondegenerate_cloud():
    with pytest.raises(DegenerateCloudError) as err:
        quartic_tensor([[1.0, 2.0, 3.0]])
    assert err.value.degeneracy is DegeneracyClass.TRIPLE


def test_tensor_contraction_at_eigenvector_isolates_first_component(rng):
    cloud = random_cloud(rng, n=20)
    q = quartic_tensor(cloud)
    e1 = q.basis[:, 0]
    assert q.components[0] == pytest.approx(direct_objective(cloud, e1), rel=1e-9)
    assert reduced_objective(q, e1) == pytest.approx(direct_objective(cloud, e1), rel=1e-9)


def test_tensor_contraction_matches_direct_objective(rng):
    cloud = random_cloud(rng, n=20)
    q = quartic_tensor(cloud)
    dirs = random_unit(rng, 50)
    expected = np.array([direct_objective(cloud, a) for a in dirs])
    got = reduced_objective(q, dirs)
    assert np.max(np.abs(got - expected)) <= 1e-9 * np.max(np.abs(expected))
    assert np.all(got >= -1e-9 * q.form.spread**4)


def test_full_tensor_is_symmetric_and_consistent(rng):
    q = quartic_tensor(random_cloud(rng))
    t = q.full
    for perm in [(1, 0, 2, 3), (0, 2, 1, 3), (3, 1, 2, 0)]:
        np.testing.assert_array_equal(t, np.transpose(t, perm))
    a = random_unit(rng)
    ap = q.basis.T @ a
    assert np.einsum("ijkl,i,j,k,l->", t, ap, ap, ap, ap) == pytest.approx(reduced_objective(q, a), rel=1e-12)


def test_large_cloud_uses_compensated_sums(rng):
    n = COMPENSATED_THRESHOLD + 10
    cloud = rng.normal(size=(n, 3)) * [1.0, 2.0, 3.0] + 1e3
    reference = cloud.astype(np.longdouble).mean(axis=0)
    np.testing.assert_allclose(column_mean(cloud), reference.astype(float), rtol=2e-16)
    form = nonflatness_operator(cloud)
    np.testing.assert_allclose(form.q, np.cov(cloud.T, bias=True), rtol=1e-9, atol=1e-9)
