"""Full-memory GMRES and flexible GMRES with right preconditioning.

Arnoldi uses modified Gram-Schmidt followed by one re-orthogonalization
pass; the small least-squares problem is kept triangular with Givens
rotations so the residual norm is available at every step without forming
the iterate.  There is no restarting.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "LinearOperator",
    "KrylovConfig",
    "SolveReport",
    "gmres",
    "fgmres",
]

BREAKDOWN_TOL = 1e-14


class LinearOperator:
    """A square operator given by its action on vectors."""

    def __init__(self, n: int, apply: Callable[[np.ndarray], np.ndarray]):
        self.n = int(n)
        self._apply = apply

    @classmethod
    def from_matrix(cls, a) -> "LinearOperator":
        return cls(a.shape[0], lambda x: a @ x)

    @property
    def shape(self):
        return (self.n, self.n)

    def __call__(self, x):
        return self.apply(x)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"vector of shape {x.shape} for operator of size {self.n}")
        return np.asarray(self._apply(x), dtype=np.float64).reshape(self.n)


@dataclass(frozen=True)
class KrylovConfig:
    tol: float = 1e-8
    maxit: int = 200
    flexible: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.maxit < 1:
            raise ValueError("maxit must be >= 1")


@dataclass
class SolveReport:
    """Outcome of one solve; also the row type of the result tables."""

    method: str
    converged: bool
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)
    inner_iterations: int = 0
    setup_ms: int = 0
    solve_ms: int = 0
    problem: str = ""
    eps: float = float("nan")
    n: tuple[int, ...] = ()
    warnings: list[str] = field(default_factory=list)


def _as_op(op) -> LinearOperator:
    if isinstance(op, LinearOperator):
        return op
    if callable(op) and not hasattr(op, "shape"):
        raise TypeError("plain callables need wrapping in LinearOperator (dimension unknown)")
    return LinearOperator.from_matrix(op)


def _precond_fn(precond):
    if precond is None:
        return None
    if isinstance(precond, LinearOperator):
        return precond.apply
    if callable(precond):
        return precond
    return lambda v: precond @ v


def _givens(a: float, b: float) -> tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def _arnoldi_solve(op: LinearOperator, rhs, cfg: KrylovConfig, precond, flexible: bool, label: str):
    t0 = time.perf_counter()
    rhs = np.asarray(rhs, dtype=np.float64)
    n = op.n
    if rhs.shape != (n,):
        raise ValueError(f"rhs of shape {rhs.shape} for operator of size {n}")
    beta = float(np.linalg.norm(rhs))
    if beta == 0.0:
        raise ValueError("rhs must be nonzero")
    m = min(cfg.maxit, n)
    V = np.zeros((n, m + 1))
    Z = np.zeros((n, m)) if (flexible and precond is not None) else None
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    s = np.zeros(m + 1)
    s[0] = beta
    V[:, 0] = rhs / beta
    history = [1.0]
    k = 0
    converged = False
    for j in range(m):
        z = precond(V[:, j]) if precond is not None else V[:, j]
        if Z is not None:
            Z[:, j] = z
        w = op.apply(z)
        for i in range(j + 1):
            hij = V[:, i] @ w
            H[i, j] = hij
            w = w - hij * V[:, i]
        # second pass, done as one block projection
        corr = V[:, : j + 1].T @ w
        H[: j + 1, j] += corr
        w = w - V[:, : j + 1] @ corr
        H[j + 1, j] = np.linalg.norm(w)
        breakdown = H[j + 1, j] < BREAKDOWN_TOL * beta
        if not breakdown:
            V[:, j + 1] = w / H[j + 1, j]
        for i in range(j):
            hi, hi1 = H[i, j], H[i + 1, j]
            H[i, j] = cs[i] * hi + sn[i] * hi1
            H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
        cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
        H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
        H[j + 1, j] = 0.0
        s[j + 1] = -sn[j] * s[j]
        s[j] = cs[j] * s[j]
        k = j + 1
        history.append(abs(s[j + 1]) / beta)
        if history[-1] <= cfg.tol or breakdown:
            converged = True
            break
    y = np.linalg.solve(np.triu(H[:k, :k]), s[:k]) if k else np.zeros(0)
    if Z is not None:
        x = Z[:, :k] @ y
    else:
        x = V[:, :k] @ y
        if precond is not None:
            x = precond(x)
    res = float(np.linalg.norm(rhs - op.apply(x)) / beta)
    # the recurrence can drift from the true residual; trust the latter
    converged = converged and res <= 10 * max(cfg.tol, history[-1])
    report = SolveReport(
        method=label,
        converged=converged,
        iterations=k,
        residual=res,
        history=history,
        solve_ms=int(round(1000 * (time.perf_counter() - t0))),
    )
    return x, report


def gmres(op, rhs, cfg: KrylovConfig | None = None, precond=None):
    """GMRES for ``op x = rhs`` from a zero initial guess.

    ``precond`` (optional) applies an approximate inverse from the right: the
    iteration solves ``op M t = rhs`` and returns ``x = M t``.  The
    preconditioner must be a fixed linear map; use :func:`fgmres` otherwise.

    Returns the solution and a :class:`SolveReport` whose ``history`` holds
    the relative residual norms from the Givens recurrence.  Hitting
    ``maxit`` is reported through ``report.converged``, not raised.
    """
    cfg = cfg or KrylovConfig()
    return _arnoldi_solve(_as_op(op), rhs, cfg, _precond_fn(precond), False, "gmres")


def fgmres(op, rhs, cfg: KrylovConfig | None = None, precond=None):
    """Flexible GMRES: the right preconditioner may change between steps.

    The preconditioned directions ``z_j`` are stored and the iterate is
    ``Z y``, so inexact inner solves are handled correctly.
    """
    cfg = cfg or KrylovConfig(flexible=True)
    return _arnoldi_solve(_as_op(op), rhs, cfg, _precond_fn(precond), True, "fgmres")
