import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbmor import config
from pbmor.errors import DegenerateBasisError, InstanceTooLargeError, ShiftAtEigenvalueError
from pbmor.kron import KronIdentity, ShiftedSolver, demote, kron_identity_left, pivoted_qr_rows, solve_shifted


def test_kron_identity_trivial_cases():
    assert np.array_equal(kron_identity_left(0, [[2.0]], 2).toarray(), [[2.0]])
    assert np.array_equal(kron_identity_left(1, np.eye(2), 2).toarray(), np.eye(4))


def test_kron_identity_column_vector():
    # hand expansion of I_2 (x) [1; 2]
    got = kron_identity_left(1, [[1.0], [2.0]], 2).toarray()
    assert np.array_equal(got, [[1, 0], [2, 0], [0, 1], [0, 2]])


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 2), m=st.integers(1, 3), r=st.integers(1, 3), c=st.integers(1, 3),
       seed=st.integers(0, 2 ** 32 - 1))
def test_kron_identity_products_match_materialized(k, m, r, c, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((r, c))
    K = KronIdentity(k, M, m)
    dense = np.kron(np.eye(m ** k), M)
    X = rng.standard_normal((K.shape[1], 2))
    Y = rng.standard_normal((3, K.shape[0]))
    assert np.allclose(K @ X, dense @ X, atol=1e-13)
    assert np.allclose(Y @ K, Y @ dense, atol=1e-13)
    assert np.allclose(K @ X[:, 0], dense @ X[:, 0], atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(j=st.integers(0, 2), m=st.integers(1, 3), seed=st.integers(0, 2 ** 32 - 1))
def test_kron_identity_mixed_product(j, m, seed):
    rng = np.random.default_rng(seed)
    M1, M2 = rng.standard_normal((2, 3)), rng.standard_normal((3, 2))
    lhs = KronIdentity(j, M1, m).toarray() @ KronIdentity(j, M2, m).toarray()
    assert np.allclose(lhs, KronIdentity(j, M1 @ M2, m).toarray(), atol=1e-13)


def test_kron_identity_size_cap(monkeypatch):
    monkeypatch.setattr(config, 'MAX_KRON_ROWS', 100)
    with pytest.raises(InstanceTooLargeError):
        KronIdentity(4, np.eye(10), 2)
    with pytest.raises(ValueError):
        KronIdentity(-1, np.eye(2), 2)


def test_solve_shifted_examples():
    assert np.allclose(solve_shifted(np.eye(1), [[-1.0]], 1.0, [[1.0]]), [[0.5]])
    assert np.allclose(solve_shifted(np.eye(2), np.zeros((2, 2)), 2.0, np.eye(2)), 0.5 * np.eye(2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), sr=st.floats(0.1, 10), si=st.floats(-10, 10))
def test_solve_shifted_residual(seed, sr, si):
    rng = np.random.default_rng(seed)
    n = 5
    E = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    A = -3 * np.eye(n) + 0.5 * rng.standard_normal((n, n))
    s = complex(sr, si)
    RHS = rng.standard_normal((n, 2))
    X = solve_shifted(E, A, s, RHS)
    M = s * E - A
    assert np.linalg.norm(M @ X - RHS) <= 1e-10 * np.linalg.norm(RHS) * max(1.0, np.linalg.norm(M))
    XT = ShiftedSolver(E, A, s).solve(RHS, trans=True)
    assert np.linalg.norm(M.T @ XT - RHS) <= 1e-10 * np.linalg.norm(RHS) * max(1.0, np.linalg.norm(M))


def test_solve_shifted_real_factor_complex_rhs(rng):
    E, A = np.eye(3), -np.diag([1.0, 2.0, 3.0])
    R = rng.standard_normal((3, 1)) + 1j * rng.standard_normal((3, 1))
    X = ShiftedSolver(E, A, 1.0).solve(R)
    assert np.allclose((E - A) @ X, R)


def test_shift_at_eigenvalue():
    with pytest.raises(ShiftAtEigenvalueError):
        ShiftedSolver(np.eye(2), np.diag([-1.0, -2.0]), -1.0)
    with pytest.raises(ValueError):
        ShiftedSolver(np.eye(2), np.eye(3), 1.0)


def test_demote():
    assert not np.iscomplexobj(demote(np.array([1 + 1e-15j])))
    assert np.iscomplexobj(demote(np.array([1 + 1e-3j])))


def test_pivoted_qr_canonical_rows():
    idx = pivoted_qr_rows(np.eye(3)[:, :2])
    assert sorted(idx.tolist()) == [0, 1]


def test_pivoted_qr_small_example():
    U = np.array([[1.0, 0], [0, 1], [1, 1]])
    U /= np.linalg.norm(U, axis=0)
    idx = pivoted_qr_rows(U)
    assert len(set(idx.tolist())) == 2
    assert abs(np.linalg.det(U[idx])) > 1e-8


def test_pivoted_qr_rank_deficient():
    U = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(DegenerateBasisError):
        pivoted_qr_rows(U)


def test_pivoted_qr_random_orthonormal():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 40))
        M = int(rng.integers(1, n + 1))
        U = np.linalg.qr(rng.standard_normal((n, M)))[0]
        idx = pivoted_qr_rows(U)
        assert len(set(idx.tolist())) == M
        assert np.linalg.cond(U[idx]) < 1e8
