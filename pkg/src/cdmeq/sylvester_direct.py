"""Bartels-Stewart solver for ``A Y + Y B = G``.

Both coefficients are reduced to real Schur form, the right-hand side is
rotated into the Schur bases and the resulting quasi-triangular equation is
solved block column by block column.  Within a block column the rows are
swept bottom-up; 1x1/2x2 diagonal block pairs are solved as Kronecker
systems of order at most four.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .linalg_core import LowRankFactor, SchurForm, as_dense, diagonal_blocks, real_schur

__all__ = [
    "SingularSylvesterError",
    "SylvesterProblem",
    "BartelsStewart",
    "bartels_stewart",
    "sylvester_residual",
]

# pivot threshold relative to ||a||_F + ||b||_F
COLLISION_TOL = 1e-13


class SingularSylvesterError(np.linalg.LinAlgError):
    """The spectra of ``a`` and ``-b`` (nearly) intersect."""

    def __init__(self, eigenvalue: complex, pivot: float):
        self.eigenvalue = eigenvalue
        self.pivot = pivot
        super().__init__(
            f"singular Sylvester operator: eigenvalue {eigenvalue:.6g} of a is "
            f"(nearly) an eigenvalue of -b (pivot {pivot:.3g})"
        )


def _dense_rhs(g) -> np.ndarray:
    if isinstance(g, LowRankFactor):
        return g.toarray()
    return as_dense(g)


@dataclass(frozen=True)
class SylvesterProblem:
    """The equation ``a @ y + y @ b = g``; ``g`` may be a :class:`LowRankFactor`."""

    a: np.ndarray
    b: np.ndarray
    g: np.ndarray | LowRankFactor

    def __post_init__(self):
        m, p = self.a.shape[0], self.b.shape[0]
        if self.a.shape != (m, m) or self.b.shape != (p, p):
            raise ValueError("coefficients must be square")
        if tuple(self.g.shape) != (m, p):
            raise ValueError(f"rhs has shape {self.g.shape}, expected {(m, p)}")

    def dense_rhs(self) -> np.ndarray:
        return _dense_rhs(self.g)

    def solve(self) -> np.ndarray:
        return bartels_stewart(self.a, self.b, self.g)

    def residual(self, y) -> float:
        return sylvester_residual(self.a, self.b, self.g, y)


def _block_eig(block: np.ndarray) -> complex:
    if block.shape[0] == 1:
        return complex(block[0, 0])
    return complex(np.linalg.eigvals(block)[0])


class BartelsStewart:
    """Bartels-Stewart solver with both Schur factorizations cached.

    Useful when the same coefficient pair is solved against many
    right-hand sides, as in preconditioning.
    """

    def __init__(self, a, b):
        a = as_dense(a)
        b = as_dense(b)
        if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
            raise ValueError("coefficients must be square")
        self.a = a
        self.b = b
        self.schur_a: SchurForm = real_schur(a)
        self.schur_b: SchurForm = real_schur(b)
        self._blocks_a = diagonal_blocks(self.schur_a.t)
        self._blocks_b = diagonal_blocks(self.schur_b.t)
        self._a_triangular = all(s == 1 for _, s in self._blocks_a)
        self._pivot_tol = COLLISION_TOL * (
            np.linalg.norm(a, "fro") + np.linalg.norm(b, "fro")
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.a.shape[0], self.b.shape[0])

    def solve(self, g) -> np.ndarray:
        g = _dense_rhs(g)
        if g.shape != self.shape:
            raise ValueError(f"rhs has shape {g.shape}, expected {self.shape}")
        qa, ta = self.schur_a
        qb, tb = self.schur_b
        c = qa.T @ g @ qb
        y = self._solve_quasi_triangular(ta, tb, c)
        return qa @ y @ qb.T

    def _solve_quasi_triangular(self, r, s, c):
        m = r.shape[0]
        y = np.zeros_like(c)
        eye_m = np.eye(m)
        for j, sj in self._blocks_b:
            cols = slice(j, j + sj)
            # contributions of already solved columns
            rhs = c[:, cols] - y[:, :j] @ s[:j, cols]
            if sj == 1 and self._a_triangular:
                shift = s[j, j]
                diag = np.diagonal(r) + shift
                k = int(np.argmin(np.abs(diag)))
                if abs(diag[k]) < self._pivot_tol:
                    raise SingularSylvesterError(complex(r[k, k]), abs(diag[k]))
                y[:, cols] = solve_triangular(r + shift * eye_m, rhs, check_finite=False)
            else:
                y[:, cols] = self._sweep_rows(r, s[cols, cols], rhs)
        return y

    def _sweep_rows(self, r, s_jj, rhs):
        """Solve ``r @ x + x @ s_jj = rhs`` for quasi-triangular ``r`` bottom-up."""
        sj = s_jj.shape[0]
        x = np.zeros_like(rhs)
        eye_s = np.eye(sj)
        for i, si in reversed(self._blocks_a):
            rows = slice(i, i + si)
            b_i = rhs[rows] - r[rows, i + si:] @ x[i + si:]
            r_ii = r[rows, rows]
            if si == 1 and sj == 1:
                piv = r_ii[0, 0] + s_jj[0, 0]
                if abs(piv) < self._pivot_tol:
                    raise SingularSylvesterError(complex(r_ii[0, 0]), abs(piv))
                x[rows] = b_i / piv
                continue
            # vec(r_ii X + X s_jj) = (I kron r_ii + s_jj^T kron I) vec(X)
            k = np.kron(eye_s, r_ii) + np.kron(s_jj.T, np.eye(si))
            sv = np.linalg.svd(k, compute_uv=False)
            if sv[-1] < self._pivot_tol:
                raise SingularSylvesterError(_block_eig(r_ii), float(sv[-1]))
            sol = np.linalg.solve(k, b_i.reshape(-1, order="F"))
            x[rows] = sol.reshape((si, sj), order="F")
        return x


def bartels_stewart(a, b, g) -> np.ndarray:
    """Solve ``a @ y + y @ b = g`` by the Bartels-Stewart method.

    Parameters
    ----------
    a : (m, m) array_like
    b : (p, p) array_like
    g : (m, p) array_like or LowRankFactor

    Returns
    -------
    y : (m, p) ndarray

    Raises
    ------
    SingularSylvesterError
        If an eigenvalue of ``a`` collides with one of ``-b``.
    """
    return BartelsStewart(a, b).solve(g)


def sylvester_residual(a, b, g, y) -> float:
    """Relative Frobenius residual ``||a y + y b - g|| / ||g||``."""
    g = _dense_rhs(g)
    y = np.asarray(y, dtype=np.float64)
    a = as_dense(a)
    b = as_dense(b)
    if a.shape[0] != y.shape[0] or b.shape[0] != y.shape[1] or g.shape != y.shape:
        raise ValueError("shape mismatch")
    gn = np.linalg.norm(g, "fro")
    if gn == 0.0:
        raise ValueError("relative residual undefined for g = 0")
    return float(np.linalg.norm(a @ y + y @ b - g, "fro") / gn)
