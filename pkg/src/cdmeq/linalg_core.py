"""Matrix containers and factorization wrappers shared by the solvers.

Dense matrices are plain 2-D float64 ``numpy`` arrays.  The sparse system
matrix is held in :class:`CsrMatrix`, low-rank right-hand sides in
:class:`LowRankFactor`.  Eigenvalue and SVD work is delegated to LAPACK
through ``scipy.linalg``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.lapack import dgbtrf, dgbtrs

__all__ = [
    "CsrMatrix",
    "LowRankFactor",
    "SchurForm",
    "SingularMatrixError",
    "BandedLU",
    "SparseLU",
    "FactoredOperator",
    "real_schur",
    "svd",
    "csr_matvec",
    "lu_banded",
    "as_dense",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a factorization meets an exactly singular pivot."""


def as_dense(a) -> np.ndarray:
    """Return ``a`` as a C-contiguous float64 ndarray."""
    if sp.issparse(a):
        a = a.toarray()
    return np.ascontiguousarray(a, dtype=np.float64)


def _check_finite(a: np.ndarray, name: str = "input") -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


# --------------------------------------------------------------------------
# CSR container
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed sparse row matrix.

    Column indices are sorted and unique within each row and no explicit
    zeros are stored; :meth:`from_coo` enforces this at build time so that
    products accumulate in a fixed order.
    """

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.row_ptr) != self.rows + 1:
            raise ValueError("row_ptr must have rows + 1 entries")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be monotone")
        if len(self.col_idx) != len(self.values):
            raise ValueError("col_idx and values differ in length")
        for arr in (self.row_ptr, self.col_idx, self.values):
            arr.setflags(write=False)

    @classmethod
    def from_coo(cls, rows, cols, i, j, v) -> "CsrMatrix":
        """Assemble from triplets, summing duplicates and dropping zeros."""
        m = sp.coo_matrix(
            (np.asarray(v, dtype=np.float64), (np.asarray(i), np.asarray(j))),
            shape=(rows, cols),
        )
        return cls.from_scipy(m)

    @classmethod
    def from_scipy(cls, m) -> "CsrMatrix":
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(
            rows=m.shape[0],
            cols=m.shape[1],
            row_ptr=m.indptr.astype(np.int64),
            col_idx=m.indices.astype(np.int64),
            values=m.data.copy(),
        )

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.float64)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=self.shape
        )

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matvec(self, x) -> np.ndarray:
        return csr_matvec(self, x)

    def __matmul__(self, x):
        return csr_matvec(self, x)

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))


def csr_matvec(a: CsrMatrix, x) -> np.ndarray:
    """Sparse matrix-vector product ``a @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != a.cols:
        raise ValueError(
            f"dimension mismatch: matrix has {a.cols} columns, vector has shape {x.shape}"
        )
    # products summed row by row in stored (sorted) column order
    prod = a.values * x[a.col_idx]
    out = np.zeros(a.rows)
    nonempty = np.diff(a.row_ptr) > 0
    if a.nnz:
        out[nonempty] = np.add.reduceat(prod, a.row_ptr[:-1][nonempty])
    return out


# --------------------------------------------------------------------------
# Low-rank factor
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LowRankFactor:
    """The matrix ``left @ right.T`` kept in factored form."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        if self.left.ndim != 2 or self.right.ndim != 2:
            raise ValueError("factors must be 2-D")
        if self.left.shape[1] != self.right.shape[1]:
            raise ValueError(
                f"inner dimensions differ: {self.left.shape[1]} vs {self.right.shape[1]}"
            )

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.left.shape[0], self.right.shape[0])

    def toarray(self) -> np.ndarray:
        return self.left @ self.right.T

    def frobenius_norm(self) -> float:
        if self.rank == 0:
            return 0.0
        gram = (self.left.T @ self.left) * (self.right.T @ self.right)
        return float(np.sqrt(max(gram.sum(), 0.0)))

    @classmethod
    def zeros(cls, m: int, p: int) -> "LowRankFactor":
        return cls(np.zeros((m, 0)), np.zeros((p, 0)))


# --------------------------------------------------------------------------
# Dense factorizations
# --------------------------------------------------------------------------


class SchurForm(NamedTuple):
    """Real Schur factors: ``a = q @ t @ q.T`` with ``t`` quasi-upper-triangular."""

    q: np.ndarray
    t: np.ndarray

    def blocks(self) -> list[tuple[int, int]]:
        """(start, size) of each 1x1 or 2x2 diagonal block of ``t``."""
        return diagonal_blocks(self.t)


def diagonal_blocks(t: np.ndarray) -> list[tuple[int, int]]:
    n = t.shape[0]
    out = []
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            out.append((i, 2))
            i += 2
        else:
            out.append((i, 1))
            i += 1
    return out


def real_schur(a) -> SchurForm:
    """Real Schur decomposition of a square matrix."""
    a = as_dense(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"real_schur needs a square matrix, got shape {a.shape}")
    _check_finite(a)
    try:
        t, q = sla.schur(a, output="real")
    except sla.LinAlgError as exc:  # QR iteration failed; no partial result
        raise np.linalg.LinAlgError(f"Schur iteration did not converge: {exc}") from exc
    return SchurForm(q=q, t=np.triu(t, -1))


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``a = u @ diag(s) @ v.T`` with ``s`` non-increasing.

    Note that ``v`` (not ``v.T``) is returned.
    """
    a = as_dense(a)
    _check_finite(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return u, s, vt.T


# --------------------------------------------------------------------------
# Banded and sparse LU
# --------------------------------------------------------------------------


class BandedLU:
    """LU factorization with partial pivoting of a banded matrix (LAPACK gbtrf).

    Parameters
    ----------
    a : array_like or sparse matrix
        Square matrix.
    lower, upper : int
        Number of sub- and super-diagonals.  Entries outside the band are
        ignored, so the caller is responsible for passing the true band.
    """

    def __init__(self, a, lower: int, upper: int | None = None):
        upper = lower if upper is None else upper
        a = sp.csr_matrix(a) if sp.issparse(a) else np.asarray(a, dtype=np.float64)
        n, m = a.shape
        if n != m:
            raise ValueError("banded LU needs a square matrix")
        self.n = n
        self.lower = lower
        self.upper = upper
        # gbtrf storage: (2*kl + ku + 1) x n, row kl + ku + i - j holds a[i, j]
        ab = np.zeros((2 * lower + upper + 1, n))
        dense = a.toarray() if sp.issparse(a) else a
        _check_finite(dense, "banded matrix")
        for d in range(-lower, upper + 1):
            diag = np.diagonal(dense, d)
            row = lower + upper - d
            if d >= 0:
                ab[row, d:] = diag
            else:
                ab[row, : n + d] = diag
        lu, piv, info = dgbtrf(ab, lower, upper)
        if info > 0:
            raise SingularMatrixError(f"exactly singular pivot at position {info - 1}")
        if info < 0:
            raise ValueError(f"gbtrf: illegal argument {-info}")
        self._lu = lu
        self._piv = piv

    @property
    def shape(self):
        return (self.n, self.n)

    def solve(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        x, info = dgbtrs(self._lu, self.lower, self.upper, v, self._piv)
        if info != 0:
            raise ValueError(f"gbtrs: illegal argument {-info}")
        return x


def lu_banded(a, bandwidth: int) -> BandedLU:
    """Factor ``a`` whose nonzeros lie within ``bandwidth`` of the diagonal."""
    return BandedLU(a, bandwidth, bandwidth)


class SparseLU:
    """Sparse LU (SuperLU) for matrices that are not narrow-banded."""

    def __init__(self, a):
        a = sp.csc_matrix(a, dtype=np.float64)
        if a.shape[0] != a.shape[1]:
            raise ValueError("sparse LU needs a square matrix")
        _check_finite(a.data, "sparse matrix")
        try:
            self._lu = spla.splu(a)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        self.n = a.shape[0]

    @property
    def shape(self):
        return (self.n, self.n)

    def solve(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        return self._lu.solve(v)


def _bandwidth(a) -> int:
    coo = sp.coo_matrix(a)
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


class FactoredOperator:
    """A square matrix paired with a lazily computed, cached factorization.

    ``apply`` multiplies, ``solve`` applies the inverse.  The factorization
    is built on the first ``solve`` and reused afterwards; ``factorizations``
    counts how many times that happened (always 0 or 1).
    """

    def __init__(self, a, band_limit: int = 8):
        if not sp.issparse(a):
            a = np.asarray(a, dtype=np.float64)
        if a.shape[0] != a.shape[1]:
            raise ValueError("operator must be square")
        self.matrix = sp.csr_matrix(a) if sp.issparse(a) else a
        self.n = a.shape[0]
        self.band_limit = band_limit
        self.factorizations = 0
        self._factor = None

    @property
    def shape(self):
        return (self.n, self.n)

    def apply(self, x) -> np.ndarray:
        return self.matrix @ x

    def factor(self):
        if self._factor is None:
            bw = _bandwidth(self.matrix)
            if bw <= self.band_limit:
                self._factor = BandedLU(self.matrix, bw, bw)
            else:
                self._factor = SparseLU(self.matrix)
            self.factorizations += 1
        return self._factor

    def solve(self, x) -> np.ndarray:
        return self.factor().solve(x)

    def transpose(self) -> "FactoredOperator":
        return FactoredOperator(self.matrix.T, band_limit=self.band_limit)
