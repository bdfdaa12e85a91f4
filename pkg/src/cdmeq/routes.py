"""Solver routes: one assembled problem, one method, one :class:`SolveReport`.

Methods
-------
``direct-sylvester``
    Bartels-Stewart on the Sylvester form of the equation.
``kpik-solver``
    Extended Krylov projection on the Sylvester form (low-rank right-hand side).
``gmres+meq-precond``
    GMRES with the averaged Sylvester preconditioner applied exactly.
``fgmres+kpik``
    Flexible GMRES with the averaged Sylvester preconditioner applied by
    truncated SVD and KPIK (alias ``fgmres+kpik-precond``).
``gmres-unprec``
    Full GMRES without preconditioning (baseline).
``direct-kron``
    Sparse LU of the Kronecker-expanded system (baseline).
"""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretize import MultitermEquation, kron_expand
from .krylov import KrylovConfig, LinearOperator, SolveReport, fgmres, gmres
from .linalg_core import LowRankFactor, SingularMatrixError, svd
from .precond import PrecondParams, PreconditionerError, build_precond_2d, build_precond_3d
from .problems import ProblemSpec, validate
from .sylvester_direct import BartelsStewart, SingularSylvesterError
from .sylvester_kpik import KpikConfig, KpikNotConverged, kpik_solve

__all__ = [
    "METHODS",
    "NotSylvesterError",
    "canonical_method",
    "default_method",
    "collapse_sylvester",
    "lowrank_rhs",
    "solve_equation",
    "solve_problem",
]

log = logging.getLogger(__name__)

METHODS = ("direct-sylvester", "kpik-solver", "gmres+meq-precond", "fgmres+kpik", "gmres-unprec", "direct-kron")
_ALIASES = {"fgmres+kpik-precond": "fgmres+kpik"}
_ROUTE_METHOD = {
    "direct-sylvester": "direct-sylvester",
    "kpik-solver": "kpik-solver",
    "gmres+meq-precond": "gmres+meq-precond",
    "fgmres+kpik-precond": "fgmres+kpik",
    "baseline": "direct-kron",
}
# singular values of F below this fraction of the largest are dropped
RHS_RANK_TOL = 1e-12
MAXIT = 200

_SOLVER_ERRORS = (
    PreconditionerError,
    SingularSylvesterError,
    SingularMatrixError,
    KpikNotConverged,
    MemoryError,
)


class NotSylvesterError(ValueError):
    """The multiterm equation has a term with no identity side."""


def canonical_method(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return name


def default_method(spec: ProblemSpec) -> str:
    return _ROUTE_METHOD[spec.route]


def _scaled_identity(m) -> float | None:
    m = sp.csr_matrix(m)
    if m.shape[0] != m.shape[1]:
        return None
    d = m.diagonal()
    if (m - sp.diags(d)).count_nonzero():
        return None
    return float(d[0]) if np.all(d == d[0]) else None


def collapse_sylvester(eq: MultitermEquation) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Rewrite ``sum L_i U R_i`` as ``A U + U B``.

    Works when every active term has a scalar multiple of the identity on at
    least one side.  Raises :class:`NotSylvesterError` otherwise.
    """
    m, p = eq.shape
    a = sp.csr_matrix((m, m))
    b = sp.csr_matrix((p, p))
    for t in eq.active_terms():
        c = _scaled_identity(t.right)
        if c is not None:
            a = a + c * t.left
            continue
        c = _scaled_identity(t.left)
        if c is not None:
            b = b + c * t.right
            continue
        raise NotSylvesterError(f"term {t.label!r} has no identity side")
    return a.tocsr(), b.tocsr()


def lowrank_rhs(f: np.ndarray, tol: float = RHS_RANK_TOL) -> LowRankFactor:
    """Numerical-rank factorization of a right-hand side matrix."""
    u, s, v = svd(f)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("right-hand side is zero")
    k = int(np.sum(s > tol * s[0]))
    return LowRankFactor(u[:, :k] * s[:k], v[:, :k])


def _build_precond(eq: MultitermEquation, inner: str):
    params = PrecondParams(inner=inner)
    if eq.layout == "2d":
        return build_precond_2d(eq.opset, params)
    splitting = "z-split" if eq.layout == "3d-zsplit" else "generic"
    return build_precond_3d(eq.opset, params, splitting=splitting)


def _ms(t0: float) -> int:
    return int(round(1000 * (time.perf_counter() - t0)))


def solve_equation(eq: MultitermEquation, method: str, tol: float = 1e-8):
    """Solve an assembled equation; returns ``(U or None, SolveReport)``.

    Solver failures (singular operators, a failed inner solve, memory
    budget) produce a report with ``converged=False`` and the error text in
    ``warnings`` rather than an exception.  ``setup_ms`` covers work done
    before the iteration (factorizations, preconditioner build).
    """
    method = canonical_method(method)
    rep = SolveReport(method=method, converged=False, iterations=0, residual=float("nan"))
    u = None
    t0 = time.perf_counter()
    try:
        if method == "direct-sylvester":
            a, b = collapse_sylvester(eq)
            bs = BartelsStewart(a.toarray(), b.toarray())
            rep.setup_ms = _ms(t0)
            t1 = time.perf_counter()
            u = bs.solve(eq.rhs)
            rep.solve_ms = _ms(t1)
            rep.residual = eq.residual(u)
            rep.converged = bool(rep.residual <= tol)
        elif method == "kpik-solver":
            a, b = collapse_sylvester(eq)
            g = lowrank_rhs(eq.rhs)
            rep.setup_ms = _ms(t0)
            t1 = time.perf_counter()
            y, krep = kpik_solve(a, b, g, KpikConfig(tol=tol), raise_on_failure=False)
            rep.solve_ms = _ms(t1)
            u = y.toarray()
            rep.iterations = krep.iterations
            rep.history = [r for _, r in krep.history]
            rep.residual = eq.residual(u)
            rep.converged = krep.converged
        elif method == "direct-kron":
            a, rhs = kron_expand(eq)
            try:
                lu = splu(a.to_scipy().tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(str(exc)) from exc
            rep.setup_ms = _ms(t0)
            t1 = time.perf_counter()
            x = lu.solve(rhs)
            rep.solve_ms = _ms(t1)
            u = x.reshape(eq.shape, order="F")
            rep.residual = eq.residual(u)
            rep.converged = bool(rep.residual <= tol)
        else:
            op = LinearOperator(eq.size, eq.matvec)
            rhs = eq.rhs_vector()
            cfg = KrylovConfig(tol=tol, maxit=MAXIT, flexible=method == "fgmres+kpik")
            p = None
            if method == "gmres+meq-precond":
                p = _build_precond(eq, "direct")
            elif method == "fgmres+kpik":
                p = _build_precond(eq, "kpik")
            rep.setup_ms = _ms(t0)
            t1 = time.perf_counter()
            solver = fgmres if cfg.flexible else gmres
            x, krep = solver(op, rhs, cfg, p)
            rep.solve_ms = _ms(t1)
            u = x.reshape(eq.shape, order="F")
            rep.iterations = krep.iterations
            rep.history = krep.history
            rep.residual = krep.residual
            rep.converged = krep.converged
            if p is not None and p.route == "kpik":
                rep.inner_iterations = p.inner_cycles
    except _SOLVER_ERRORS as exc:
        log.warning("%s failed: %s", method, exc)
        rep.warnings.append(f"{method} failed: {exc}")
        if isinstance(exc, KpikNotConverged):
            rep.residual = exc.best_residual
    if not rep.converged and not rep.warnings:
        rep.warnings.append(f"{method} did not reach tol={tol:g} (relres {rep.residual:.3e})")
    return u, rep


def solve_problem(spec: ProblemSpec, eps: float, n: int, method: str | None = None,
                  tol: float | None = None, ny: int | None = None, nz: int | None = None):
    """Assemble ``spec`` at ``(eps, n)`` and solve it; returns ``(U, SolveReport)``."""
    method = canonical_method(method or default_method(spec))
    tol = spec.tol if tol is None else tol
    t0 = time.perf_counter()
    eq = spec.assemble(eps, n, ny, nz)
    assemble_ms = _ms(t0)
    u, rep = solve_equation(eq, method, tol)
    rep.setup_ms += assemble_ms
    rep.problem = spec.id
    rep.eps = float(eps)
    rep.n = tuple(eq.grid.n)
    rep.warnings = validate(spec, eps, n) + rep.warnings
    return u, rep
