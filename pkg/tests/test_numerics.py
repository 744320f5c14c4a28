import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsvdlab.errors import InvalidInput
from gsvdlab.numerics import null_basis, pseudoinverse, rank, svd


def check_factors(a, f, tol=1e-10):
    m, n = a.shape
    assert f.u.shape == (m, m) and f.vt.shape == (n, n)
    assert np.all(np.diff(f.s) <= 0) and np.all(f.s >= 0)
    assert np.abs(f.u.T @ f.u - np.eye(m)).max() <= tol
    assert np.abs(f.vt @ f.vt.T - np.eye(n)).max() <= tol
    assert np.linalg.norm(f.reconstruct() - a) <= tol * max(np.linalg.norm(a), 1e-300)


def test_identity():
    f = svd(np.eye(3))
    np.testing.assert_array_equal(f.s, [1, 1, 1])


def test_diagonal_gives_signed_permutations():
    f = svd(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(f.s, [3, 1])
    for m in (f.u, f.vt):
        assert set(np.abs(m).ravel()) <= {0.0, 1.0}


def test_random_4x3():
    a = np.random.default_rng(0).standard_normal((4, 3))
    f = svd(a)
    check_factors(a, f)
    # independent oracle for the spectrum
    np.testing.assert_allclose(f.s, np.linalg.svd(a, compute_uv=False), rtol=1e-12)


def test_sign_convention():
    a = np.random.default_rng(1).standard_normal((5, 4))
    f = svd(a)
    for j in range(4):
        col = f.u[:, j]
        assert col[np.argmax(np.abs(col))] >= 0


def test_deterministic():
    a = np.random.default_rng(2).standard_normal((6, 3))
    f1, f2 = svd(a), svd(a)
    np.testing.assert_array_equal(f1.u, f2.u)
    np.testing.assert_array_equal(f1.s, f2.s)


def test_rank_deficient_wide():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 9))
    f = svd(a)
    check_factors(a, f)
    assert rank(f) == 2


def test_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        svd(np.array([[1.0, np.nan]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_svd_invariants(m, n, seed):
    a = np.random.default_rng(seed).standard_normal((m, n))
    check_factors(a, svd(a))


def test_pinv_diag():
    np.testing.assert_allclose(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3), atol=1e-15)


def test_pinv_penrose_3x5():
    a = np.random.default_rng(4).standard_normal((3, 5))
    p = pseudoinverse(a)
    assert np.linalg.norm(a @ p @ a - a) < 1e-9
    assert np.linalg.norm(p @ a @ p - p) < 1e-9
    assert np.linalg.norm((a @ p).T - a @ p) < 1e-9
    assert np.linalg.norm((p @ a).T - p @ a) < 1e-9


def test_pinv_penrose_suite():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m, n = rng.integers(1, 8, size=2)
        a = rng.standard_normal((m, n))
        if rng.random() < 0.3 and min(m, n) > 1:
            a = rng.standard_normal((m, 1)) @ rng.standard_normal((1, n))
        p = pseudoinverse(a)
        assert np.linalg.norm(a @ p @ a - a) <= 1e-9
        assert np.linalg.norm(p @ a @ p - p) <= 1e-9


def test_null_basis_simple():
    b = null_basis(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert b.shape == (2, 1)
    np.testing.assert_allclose(np.abs(b[:, 0]), [0.0, 1.0], atol=1e-15)


def test_null_basis_full_rank():
    a = np.random.default_rng(6).standard_normal((4, 4))
    assert null_basis(a).shape == (4, 0)


def test_null_basis_wide():
    k = np.random.default_rng(7).standard_normal((10, 1000))
    b = null_basis(k)
    assert b.shape == (1000, 990)
    assert np.abs(k @ b).max() < 1e-9
    assert np.abs(b.T @ b - np.eye(990)).max() <= 1e-10


def test_null_basis_invariant_suite():
    rng = np.random.default_rng(8)
    for _ in range(20):
        m, n = rng.integers(1, 6), rng.integers(2, 9)
        a = rng.standard_normal((m, n))
        b = null_basis(a)
        smax = np.linalg.svd(a, compute_uv=False)[0]
        assert b.shape[1] == n - np.linalg.matrix_rank(a)
        assert np.linalg.norm(a @ b) <= 1e-9 * smax * max(np.linalg.norm(b), 1.0)
