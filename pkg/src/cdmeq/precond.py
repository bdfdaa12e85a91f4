"""Sylvester-operator preconditioners obtained by coefficient averaging.

The diagonal coefficient matrices that keep the discrete operator from
being a Sylvester operator are replaced by scalar node averages.  What is
left is ``M1 Y + Y M2``, whose inverse is applied either exactly by
Bartels-Stewart or approximately by KPIK on a truncated-SVD right-hand
side.  The KPIK route makes the preconditioner vary between applications,
so it must be paired with flexible GMRES.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .discretize import Grid, OperatorSet, SeparableWind, const, sample_diagonal
from .linalg_core import FactoredOperator, LowRankFactor, svd
from .sylvester_direct import BartelsStewart
from .sylvester_kpik import KpikConfig, KpikNotConverged, kpik_solve

__all__ = [
    "PrecondParams",
    "PreconditionerError",
    "AveragedWind2D",
    "SylvesterPreconditioner",
    "Precond2D",
    "Precond3D",
    "average_coefficient",
    "averaged_wind_2d",
    "truncate_rhs",
    "build_precond_2d",
    "apply_precond_2d",
    "build_precond_3d",
    "apply_precond_3d",
]

log = logging.getLogger(__name__)


class PreconditionerError(RuntimeError):
    """The inner Sylvester solve failed; fatal for the outer iteration."""


@dataclass(frozen=True)
class PrecondParams:
    """Inner-solve settings.

    ``inner`` selects how ``P^{-1}`` is applied: ``"direct"`` (Bartels-Stewart
    on the full right-hand side), ``"kpik"`` (truncated SVD + KPIK), or
    ``"auto"``, which goes direct while both coefficients have order at
    most ``direct_threshold``.
    """

    tol_truncation: float = 1e-2
    tol_inner: float = 1e-4
    r_max: int = 10
    direct_threshold: int = 400
    inner: str = "auto"
    max_inner_cycles: int = 100

    def __post_init__(self):
        if self.inner not in ("auto", "direct", "kpik"):
            raise ValueError("inner must be 'auto', 'direct' or 'kpik'")
        if min(self.tol_truncation, self.tol_inner) <= 0 or self.r_max < 1:
            raise ValueError("truncation/inner tolerances and r_max must be positive")


def average_coefficient(f, nodes) -> float:
    """Mean of ``f`` over the given nodes."""
    return float(np.mean(sample_diagonal(f, nodes)))


@dataclass(frozen=True)
class AveragedWind2D:
    psi1_bar: float
    phi2_bar: float
    wind: SeparableWind | None  # (psi1_bar * phi1(x), phi2_bar * psi2(y))


def averaged_wind_2d(wind: SeparableWind, grid: Grid) -> AveragedWind2D:
    (phi1, psi1), (phi2, psi2) = wind.factors
    # each factor is averaged over the nodes of its own variable
    psi1_bar = average_coefficient(psi1, grid.nodes(1))
    phi2_bar = average_coefficient(phi2, grid.nodes(0))
    modified = SeparableWind(((phi1, const(psi1_bar)), (const(phi2_bar), psi2)))
    return AveragedWind2D(psi1_bar, phi2_bar, modified)


def truncate_rhs(g, tol_truncation: float = 1e-2, r_max: int = 10) -> LowRankFactor:
    """Rank-``k`` truncated SVD of ``g`` as a factor ``(U_k diag(s_k), V_k)``.

    ``k`` counts singular values at least ``tol_truncation * s_1``, capped
    at ``r_max``.  A zero matrix gives a rank-0 factor.
    """
    g = np.asarray(g, dtype=np.float64)
    m, p = g.shape
    if not np.any(g):
        return LowRankFactor.zeros(m, p)
    u, s, v = svd(g)
    k = min(r_max, int(np.sum(s >= tol_truncation * s[0])))
    return LowRankFactor(u[:, :k] * s[:k], v[:, :k])


class SylvesterPreconditioner:
    """Applies ``v -> vec(Y)`` with ``m1 Y + Y m2 = G``, ``vec(G) = v``.

    Factorizations (Schur forms for the direct route, LU factors for KPIK)
    are computed once on first use and reused for every application.
    """

    def __init__(self, m1, m2, params: PrecondParams | None = None):
        self.params = params or PrecondParams()
        self.m1 = sp.csr_matrix(m1)
        self.m2 = sp.csr_matrix(m2)
        self.shape = (self.m1.shape[0], self.m2.shape[0])
        p = self.params
        if p.inner == "auto":
            self.route = "direct" if max(self.shape) <= p.direct_threshold else "kpik"
        else:
            self.route = p.inner
        self._bs = None
        self._a = None
        self._bt = None
        self.applications = 0
        self.inner_cycles = 0
        self.ranks: list[int] = []

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def _direct(self) -> BartelsStewart:
        if self._bs is None:
            self._bs = BartelsStewart(self.m1.toarray(), self.m2.toarray())
        return self._bs

    def _factored(self):
        if self._a is None:
            self._a = FactoredOperator(self.m1)
            self._bt = FactoredOperator(self.m2.T.tocsr())
        return self._a, self._bt

    def setup(self) -> "SylvesterPreconditioner":
        """Compute factorizations now instead of at the first application."""
        if self.route == "direct":
            self._direct()
        else:
            a, bt = self._factored()
            a.factor()
            bt.factor()
        return self

    def solve_matrix(self, g: np.ndarray) -> np.ndarray:
        if self.route == "direct":
            return self._direct().solve(g)
        p = self.params
        gk = truncate_rhs(g, p.tol_truncation, p.r_max)
        self.ranks.append(gk.rank)
        if gk.rank == 0:
            return np.zeros(self.shape)
        a, bt = self._factored()
        cfg = KpikConfig(tol=p.tol_inner, max_cycles=p.max_inner_cycles)
        try:
            y, rep = kpik_solve(a, None, gk, cfg, bt=bt)
        except KpikNotConverged as exc:
            raise PreconditionerError(
                f"inner KPIK solve failed at application {self.applications + 1}: {exc}"
            ) from exc
        self.inner_cycles += rep.cycles
        return y.toarray()

    def apply(self, g_vec) -> np.ndarray:
        g_vec = np.asarray(g_vec, dtype=np.float64)
        if g_vec.shape != (self.size,):
            raise ValueError(f"vector of length {g_vec.shape} for preconditioner of size {self.size}")
        g = g_vec.reshape(self.shape, order="F")
        y = self.solve_matrix(g)
        self.applications += 1
        return y.reshape(-1, order="F")

    __call__ = apply

    def operator(self, y: np.ndarray) -> np.ndarray:
        """The preconditioning operator itself, ``Y -> m1 Y + Y m2``."""
        return self.m1 @ y + (self.m2.T @ y.T).T


class Precond2D(SylvesterPreconditioner):
    """``(eps T1 + psi1_bar Phi1 B1) Y + Y (eps T2 + phi2_bar B2 Psi2)``."""

    def __init__(self, m1, m2, averages: AveragedWind2D | None, params=None):
        super().__init__(m1, m2, params)
        self.averages = averages


class Precond3D(SylvesterPreconditioner):
    def __init__(self, m1, m2, splitting: str, averages: dict, params=None):
        super().__init__(m1, m2, params)
        self.splitting = splitting
        self.averages = averages


def build_precond_2d(ops: OperatorSet, params: PrecondParams | None = None, setup: bool = True) -> Precond2D:
    g = ops.grid
    if g.dims != 2:
        raise ValueError("build_precond_2d needs a 2-D operator set")
    phi1, psi1 = ops.diag[0]
    phi2, psi2 = ops.diag[1]
    psi1_bar = float(np.mean(psi1))
    phi2_bar = float(np.mean(phi2))
    eps = ops.eps
    m1 = eps * ops.t1 + psi1_bar * (sp.diags(phi1) @ ops.b1)
    m2 = eps * ops.t2 + phi2_bar * (ops.b2 @ sp.diags(psi2))
    averages = AveragedWind2D(psi1_bar, phi2_bar, None)
    p = Precond2D(m1.tocsr(), m2.tocsr(), averages, params)
    return p.setup() if setup else p


def apply_precond_2d(p: Precond2D, g_vec) -> np.ndarray:
    return p.apply(g_vec)


def build_precond_3d(ops: OperatorSet, params: PrecondParams | None = None,
                     splitting: str = "generic", setup: bool = True) -> Precond3D:
    """Sylvester preconditioner for a 3-D operator set.

    ``splitting="generic"`` matches the tall layout: the (x, z) operator of
    order ``(nx+1)(nz+1)`` on the left, ``y`` on the right, with
    ``Psi1, Psi3`` and ``Phi2 kron Ups2`` averaged.  ``splitting="z-split"``
    matches the z-split layout: ``z`` on the left, (x, y) on the right, with
    the z factors of the x and y convection averaged.
    """
    g = ops.grid
    if g.dims != 3:
        raise ValueError("build_precond_3d needs a 3-D operator set")
    eps = ops.eps
    nx, ny, nz = g.shape
    tx, ty, tz = ops.second
    bx, by, bz = ops.first
    d = ops.diag
    D = lambda l, a: sp.diags(d[l][a])
    mean = lambda l, a: float(np.mean(d[l][a]))
    ix, iy, iz = (sp.identity(k, format="csr") for k in (nx, ny, nz))
    if splitting == "generic":
        psi1_bar, psi3_bar = mean(0, 1), mean(2, 1)
        chi_bar = mean(1, 0) * mean(1, 2)
        m1 = (eps * (sp.kron(iz, tx) + sp.kron(tz, ix))
              + psi1_bar * sp.kron(D(0, 2), D(0, 0) @ bx)
              + psi3_bar * sp.kron(D(2, 2) @ bz, D(2, 0)))
        m2 = eps * ty.T + chi_bar * (by.T @ D(1, 1))
        averages = {"psi1_bar": psi1_bar, "psi3_bar": psi3_bar, "chi_bar": chi_bar}
    elif splitting == "z-split":
        ups1_bar, ups2_bar = mean(0, 2), mean(1, 2)
        xy3_bar = mean(2, 0) * mean(2, 1)
        m1 = eps * tz + xy3_bar * (D(2, 2) @ bz)
        m2 = (eps * (sp.kron(iy, tx) + sp.kron(ty, ix)).T
              + ups1_bar * sp.kron(D(0, 1), D(0, 0) @ bx).T
              + ups2_bar * sp.kron(D(1, 1) @ by, D(1, 0)).T)
        averages = {"ups1_bar": ups1_bar, "ups2_bar": ups2_bar, "phi3psi3_bar": xy3_bar}
    else:
        raise ValueError("splitting must be 'generic' or 'z-split'")
    p = Precond3D(m1.tocsr(), m2.tocsr(), splitting, averages, params)
    return p.setup() if setup else p


def apply_precond_3d(p: Precond3D, g_vec) -> np.ndarray:
    return p.apply(g_vec)
