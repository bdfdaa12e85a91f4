import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cdmeq.linalg_core import (
    BandedLU,
    CsrMatrix,
    FactoredOperator,
    LowRankFactor,
    SingularMatrixError,
    csr_matvec,
    diagonal_blocks,
    lu_banded,
    real_schur,
    svd,
)
from cdmeq.discretize import assemble_second_order


def rng(seed=0):
    return np.random.default_rng(seed)


# -- real_schur ---------------------------------------------------------------


def test_schur_identity():
    q, t = real_schur(np.eye(3))
    assert np.allclose(np.abs(q), np.eye(3))
    assert np.allclose(t, np.eye(3))


def test_schur_of_triangular_is_itself():
    a = np.triu(rng().standard_normal((5, 5)))
    q, t = real_schur(a)
    assert np.allclose(np.abs(q), np.eye(5), atol=1e-12)
    assert np.allclose(np.abs(t), np.abs(a), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**31 - 1))
def test_schur_reconstruction(n, seed):
    a = rng(seed).standard_normal((n, n))
    q, t = real_schur(a)
    assert np.linalg.norm(q.T @ q - np.eye(n)) <= 1e-12 * n
    assert np.linalg.norm(q @ t @ q.T - a) <= 1e-10 * np.linalg.norm(a)
    # quasi-triangular: nothing below the first subdiagonal, no adjacent 2x2 blocks
    assert not np.any(np.tril(t, -2))
    sub = np.diagonal(t, -1)
    assert not np.any((sub[:-1] != 0) & (sub[1:] != 0))
    assert sum(s for _, s in diagonal_blocks(t)) == n


def test_schur_rejects_nonfinite():
    with pytest.raises(ValueError):
        real_schur(np.array([[1.0, np.nan], [0.0, 1.0]]))


# -- svd ----------------------------------------------------------------------


def test_svd_diagonal():
    _, s, _ = svd(np.diag([3.0, 1.0]))
    assert np.allclose(s, [3, 1])


def test_svd_rank_one():
    x, y = rng().standard_normal(7), rng(1).standard_normal(4)
    _, s, _ = svd(np.outer(x, y))
    assert s[0] == pytest.approx(np.linalg.norm(x) * np.linalg.norm(y), rel=1e-12)
    assert np.all(s[1:] <= 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_svd_reconstruction_and_order(m, n, seed):
    a = rng(seed).standard_normal((m, n))
    u, s, v = svd(a)
    assert np.linalg.norm(u @ np.diag(s) @ v.T - a) <= 1e-10 * np.linalg.norm(a)
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    assert np.allclose(u.T @ u, np.eye(s.size), atol=1e-12)
    assert np.allclose(v.T @ v, np.eye(s.size), atol=1e-12)


# -- CSR ----------------------------------------------------------------------


def test_csr_identity():
    x = rng().standard_normal(6)
    assert np.array_equal(csr_matvec(CsrMatrix.from_dense(np.eye(6)), x), x)


def test_csr_hand_check():
    a = CsrMatrix.from_dense(np.array([[1.0, 2.0], [0.0, 3.0]]))
    assert np.array_equal(a.matvec(np.ones(2)), [3.0, 3.0])
    assert a.nnz == 3


def test_csr_dense_oracle_32():
    for seed in range(10):
        d = sp.random(32, 32, density=0.2, random_state=seed).toarray()
        x = rng(seed).standard_normal(32)
        y = csr_matvec(CsrMatrix.from_dense(d), x)
        assert np.linalg.norm(y - d @ x) <= 1e-14 * max(1.0, np.linalg.norm(d @ x))


def test_csr_invariants_after_assembly():
    # duplicates summed, cancelling entries dropped, indices sorted
    a = CsrMatrix.from_coo(2, 3, [0, 0, 1, 1, 1], [2, 0, 1, 1, 0], [1.0, 2.0, 3.0, -3.0, 4.0])
    assert a.nnz == 3
    assert list(a.row_ptr) == [0, 2, 3]
    assert list(a.col_idx) == [0, 2, 0]
    assert np.all(a.values != 0)
    assert np.array_equal(a.toarray(), [[2, 0, 1], [4, 0, 0]])


def test_csr_dimension_mismatch():
    with pytest.raises(ValueError):
        csr_matvec(CsrMatrix.from_dense(np.eye(3)), np.ones(4))


def test_csr_empty_rows():
    a = CsrMatrix.from_dense(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]))
    assert np.array_equal(a @ np.array([2.0, 5.0]), [0.0, 2.0, 0.0])


# -- banded LU ----------------------------------------------------------------


def test_banded_diagonal():
    lu = lu_banded(np.diag([2.0, 2.0, 2.0]), 0)
    assert np.allclose(lu.solve(np.array([2.0, 4.0, 6.0])), [1, 2, 3])


def test_banded_t1_forward_multiply():
    t1 = assemble_second_order(3, 1 / 3).toarray()
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(lu_banded(t1, 1).solve(t1 @ x), x, rtol=1e-12)


def test_banded_singular():
    with pytest.raises(SingularMatrixError):
        lu_banded(np.zeros((3, 3)), 1)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 64), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_banded_residual(n, p, seed):
    r = rng(seed)
    a = np.triu(np.tril(r.standard_normal((n, n)), p), -p) + (2 * p + 2) * np.eye(n)
    v = r.standard_normal(n)
    x = BandedLU(a, p).solve(v)
    assert np.linalg.norm(a @ x - v) <= 1e-10 * np.linalg.norm(v)


def test_factored_operator_counts_factorizations():
    a = assemble_second_order(20, 1 / 20)
    op = FactoredOperator(a)
    v = np.ones(21)
    op.solve(v)
    op.solve(2 * v)
    assert op.factorizations == 1
    assert np.allclose(a @ op.solve(v), v)


def test_factored_operator_wide_band_uses_sparse_lu():
    n = 30
    a = sp.identity(n * n, format="csr") * 4 - sp.kron(sp.identity(n), sp.eye(n, k=1)) - sp.eye(n * n, k=n)
    op = FactoredOperator(a.tocsr())
    v = rng().standard_normal(n * n)
    assert np.linalg.norm(a @ op.solve(v) - v) <= 1e-10 * np.linalg.norm(v)


# -- LowRankFactor ------------------------------------------------------------


def test_lowrank_norm_and_shape():
    r = rng()
    f = LowRankFactor(r.standard_normal((7, 3)), r.standard_normal((5, 3)))
    assert f.shape == (7, 5) and f.rank == 3
    assert f.frobenius_norm() == pytest.approx(np.linalg.norm(f.toarray()), rel=1e-12)
    z = LowRankFactor.zeros(4, 6)
    assert z.rank == 0 and not np.any(z.toarray())


def test_lowrank_rejects_mismatched_ranks():
    with pytest.raises(ValueError):
        LowRankFactor(np.ones((3, 2)), np.ones((3, 1)))
