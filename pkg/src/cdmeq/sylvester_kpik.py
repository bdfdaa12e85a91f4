"""Extended Krylov subspace projection for ``A Y + Y B = C1 C2^T``.

Two extended Krylov bases are grown in lockstep, one for ``A`` seeded with
``C1`` and one for ``B^T`` seeded with ``C2``; each cycle appends a block
obtained by multiplying the newest "positive" block by the matrix and a
block obtained by solving with the newest "negative" block.  The projected
equation is solved by Bartels-Stewart every ``check_every`` cycles and the
residual norm is read off the projected coupling blocks, never formed at
full size.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg_core import FactoredOperator, LowRankFactor
from .sylvester_direct import bartels_stewart

__all__ = [
    "KpikConfig",
    "KpikReport",
    "KpikNotConverged",
    "ExtendedBasis",
    "kpik_solve",
    "kpik_residual_estimate",
    "lowrank_residual",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KpikConfig:
    tol: float = 1e-8
    max_cycles: int = 100
    check_every: int = 2
    deflation_tol: float = 1e-12

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_cycles < 1 or self.check_every < 1:
            raise ValueError("max_cycles and check_every must be >= 1")


@dataclass
class KpikReport:
    converged: bool
    cycles: int
    residual: float
    history: list[tuple[int, float]] = field(default_factory=list)
    basis_dims: tuple[int, int] = (0, 0)

    @property
    def iterations(self) -> int:
        """Basis-growth cycles, the count reported in result tables."""
        return self.cycles


class KpikNotConverged(RuntimeError):
    def __init__(self, report: KpikReport, solution: LowRankFactor):
        self.report = report
        self.solution = solution
        self.best_residual = min((r for _, r in report.history), default=report.residual)
        super().__init__(
            f"KPIK did not reach the tolerance in {report.cycles} cycles "
            f"(best relative residual {self.best_residual:.3e})"
        )


def _orth_against(v: np.ndarray, w: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of ``w`` minus its projection on span(v), with deflation.

    Two Gram-Schmidt passes against ``v``; directions whose norm falls below
    ``tol * ||w||`` are dropped.
    """
    if w.shape[1] == 0:
        return w
    scale = np.linalg.norm(w, 2)
    if scale == 0.0:
        return w[:, :0]
    for _ in range(2):
        if v.shape[1]:
            w = w - v @ (v.T @ w)
    q, r, piv = _qr_pivoted(w)
    d = np.abs(np.diag(r))
    keep = int(np.sum(d > tol * scale))
    q = q[:, :keep]
    # a final pass restores orthogonality lost to cancellation
    if v.shape[1] and keep:
        q = q - v @ (v.T @ q)
        q, _ = np.linalg.qr(q)
    return q


def _qr_pivoted(w):
    from scipy.linalg import qr

    return qr(w, mode="economic", pivoting=True)


class ExtendedBasis:
    """Orthonormal basis of span{C, M^-1 C, M C, M^-2 C, ...} for one side.

    Keeps the basis ``v`` and the product ``m @ v`` so projected matrices
    are available at any time.
    """

    def __init__(self, op: FactoredOperator, seed: np.ndarray, deflation_tol: float = 1e-12):
        self.op = op
        self.tol = deflation_tol
        n = op.n
        pos = _orth_against(np.zeros((n, 0)), seed, deflation_tol)
        neg = _orth_against(pos, op.solve(pos) if pos.shape[1] else pos, deflation_tol)
        self.v = np.hstack([pos, neg])
        self.mv = np.asarray(op.apply(self.v))
        self._pos = pos
        self._neg = neg
        self.block_starts = [0]

    @property
    def dim(self) -> int:
        return self.v.shape[1]

    def grow(self) -> int:
        """Append the next block; returns the number of new columns."""
        start = self.dim
        pos = _orth_against(self.v, np.asarray(self.op.apply(self._pos)), self.tol)
        vp = np.hstack([self.v, pos])
        neg = _orth_against(vp, self.op.solve(self._neg) if self._neg.shape[1] else self._neg, self.tol)
        new = np.hstack([pos, neg])
        self.v = np.hstack([vp, neg])
        self.mv = np.hstack([self.mv, np.asarray(self.op.apply(new))])
        self._pos, self._neg = pos, neg
        self.block_starts.append(start)
        return new.shape[1]

    def projected(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """``V_k^T M V_k`` and the coupling ``V_new^T M V_k`` of the columns past ``k``."""
        h = self.v[:, :k].T @ self.mv[:, :k]
        tau = self.v[:, k:].T @ self.mv[:, :k]
        return h, tau

    def orthogonality_error(self) -> float:
        return float(np.linalg.norm(self.v.T @ self.v - np.eye(self.dim)))


def _as_operator(m) -> FactoredOperator:
    if isinstance(m, FactoredOperator):
        return m
    return FactoredOperator(m)


@dataclass
class _State:
    """Snapshot of the last projected solve, enough to rebuild residual and iterate."""

    va: np.ndarray
    vb: np.ndarray
    yhat: np.ndarray
    tau_a: np.ndarray
    tau_b: np.ndarray
    gnorm: float

    def residual(self) -> float:
        return kpik_residual_estimate(self)

    def solution(self) -> LowRankFactor:
        return LowRankFactor(self.va @ self.yhat, self.vb)


def kpik_residual_estimate(state: _State) -> float:
    """Relative residual of the current iterate from the projected blocks.

    With ``A V_k = V_{k+1} [H_a; tau_a]`` (and likewise for ``B^T``) and the
    Galerkin condition on the first ``k`` columns, the full residual equals
    ``sqrt(||tau_a Y||^2 + ||Y tau_b^T||^2)``.
    """
    if state.gnorm == 0.0:
        return 0.0
    r2 = np.linalg.norm(state.tau_a @ state.yhat) ** 2 + np.linalg.norm(state.yhat @ state.tau_b.T) ** 2
    return float(np.sqrt(r2) / state.gnorm)


def lowrank_residual(a, b, g: LowRankFactor, y: LowRankFactor) -> float:
    """Explicitly formed relative residual, for checking the estimate on small problems."""
    a = a.matrix if isinstance(a, FactoredOperator) else a
    b = b.matrix if isinstance(b, FactoredOperator) else b
    yd = y.toarray()
    r = a @ yd + (b.T @ yd.T).T - g.toarray()
    return float(np.linalg.norm(r) / g.frobenius_norm())


def kpik_solve(a, b, g: LowRankFactor, cfg: KpikConfig | None = None, *,
               bt: FactoredOperator | None = None, raise_on_failure: bool = True):
    """Solve ``a @ Y + Y @ b = g.left @ g.right.T`` by extended Krylov projection.

    Parameters
    ----------
    a : array, sparse matrix or FactoredOperator
        Left coefficient; a ``FactoredOperator`` keeps its factorization
        across calls.
    b : array or sparse matrix, optional if ``bt`` is given
        Right coefficient.
    g : LowRankFactor
        Right-hand side.
    bt : FactoredOperator, optional
        Factored ``b.T``; pass it to reuse the factorization between calls.

    Returns
    -------
    y : LowRankFactor
    report : KpikReport
    """
    cfg = cfg or KpikConfig()
    a_op = _as_operator(a)
    if bt is None:
        if b is None:
            raise ValueError("need b or bt")
        bm = b.matrix if isinstance(b, FactoredOperator) else b
        bt = FactoredOperator(bm.T if sp.issparse(bm) else np.asarray(bm).T)
    m, p = a_op.n, bt.n
    if g.shape != (m, p):
        raise ValueError(f"rhs has shape {g.shape}, expected {(m, p)}")
    if g.rank < 1:
        raise ValueError("rhs factor must have rank >= 1")
    gnorm = g.frobenius_norm()
    if gnorm == 0.0:
        return LowRankFactor.zeros(m, p), KpikReport(True, 0, 0.0)

    basis_a = ExtendedBasis(a_op, g.left, cfg.deflation_tol)
    basis_b = ExtendedBasis(bt, g.right, cfg.deflation_tol)
    history: list[tuple[int, float]] = []
    state = None
    best = None
    for cycle in range(1, cfg.max_cycles + 1):
        ka, kb = basis_a.dim, basis_b.dim
        grown_a = basis_a.grow()
        grown_b = basis_b.grow()
        exhausted = grown_a == 0 and grown_b == 0
        if cycle % cfg.check_every and not exhausted and cycle != cfg.max_cycles:
            continue
        ha, tau_a = basis_a.projected(ka)
        hb, tau_b = basis_b.projected(kb)
        ca = basis_a.v[:, :ka].T @ g.left
        cb = basis_b.v[:, :kb].T @ g.right
        yhat = bartels_stewart(ha, hb.T, ca @ cb.T)
        state = _State(basis_a.v[:, :ka], basis_b.v[:, :kb], yhat, tau_a, tau_b, gnorm)
        res = state.residual()
        history.append((cycle, res))
        log.debug("kpik cycle %d: dims (%d, %d) relres %.3e", cycle, ka, kb, res)
        if best is None or res < best[1]:
            best = (state, res)
        if res <= cfg.tol or exhausted:
            report = KpikReport(res <= cfg.tol or exhausted, cycle, res, history, (ka, kb))
            return state.solution(), report
    state, res = best
    report = KpikReport(False, cfg.max_cycles, res, history, (state.va.shape[1], state.vb.shape[1]))
    if raise_on_failure:
        raise KpikNotConverged(report, state.solution())
    return state.solution(), report
