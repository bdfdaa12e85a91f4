"""Centered finite differences for separable convection-diffusion problems.

The discrete operator is kept as a multiterm matrix equation
``sum_i L_i U R_i = F`` rather than as one large sparse matrix.  Boundary
rows of the one-dimensional operators act as scaled identities, so that the
Dirichlet data enter only through the boundary entries of ``F``.

Layouts
-------
``"2d"``
    ``U[i, j] = u(x_i, y_j)``; shape ``(nx+1, ny+1)``.
``"3d-tall"``
    z-slabs stacked vertically, ``U[k*(nx+1) + i, j] = u(x_i, y_j, z_k)``;
    shape ``((nz+1)(nx+1), ny+1)``.
``"3d-zsplit"``
    z against the (x, y) pair, ``U[k, i + (nx+1)*j] = u(x_i, y_j, z_k)``;
    shape ``(nz+1, (nx+1)(ny+1))``.

Vectorization is always column-major over the layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg_core import CsrMatrix

__all__ = [
    "Grid",
    "SeparableWind",
    "Dirichlet",
    "InconsistentBoundaryError",
    "OperatorSet",
    "Term",
    "MultitermEquation",
    "const",
    "assemble_second_order",
    "assemble_first_order",
    "sample_diagonal",
    "build_operator_set",
    "assemble_2d",
    "assemble_rhs_boundary",
    "assemble_3d",
    "assemble_3d_zsplit",
    "kron_expand",
    "mesh_peclet",
    "grid_to_layout",
    "layout_to_grid",
]

Factor = Callable[[np.ndarray], np.ndarray]

CORNER_TOL = 1e-12
MAX_KRON_NNZ = 50_000_000


class InconsistentBoundaryError(ValueError):
    """Dirichlet data of two sides disagree where they meet."""


def const(c: float) -> Factor:
    """Constant factor function, vectorized over its argument."""
    c = float(c)

    def f(t):
        return np.full(np.shape(t), c)

    f.constant = c
    return f


# --------------------------------------------------------------------------
# Grid and wind
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on ``(0, L_0) x ... x (0, L_{d-1})``.

    ``n[a]`` is the number of subdivisions along axis ``a``; nodes are
    indexed ``0..n[a]``.
    """

    n: tuple[int, ...]
    lengths: tuple[float, ...] | None = None

    def __post_init__(self):
        n = tuple(int(k) for k in self.n)
        object.__setattr__(self, "n", n)
        if len(n) not in (2, 3):
            raise ValueError("only 2-D and 3-D grids are supported")
        if any(k < 2 for k in n):
            raise ValueError(f"need at least 2 subdivisions per axis, got {n}")
        lengths = (1.0,) * len(n) if self.lengths is None else tuple(map(float, self.lengths))
        if len(lengths) != len(n) or any(L <= 0 for L in lengths):
            raise ValueError("lengths must be positive, one per axis")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, n: int, dims: int = 2) -> "Grid":
        return cls((n,) * dims)

    @property
    def dims(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / k for L, k in zip(self.lengths, self.n))

    @property
    def shape(self) -> tuple[int, ...]:
        """Node counts per axis."""
        return tuple(k + 1 for k in self.n)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def nodes(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.lengths[axis], self.n[axis] + 1)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*(self.nodes(a) for a in range(self.dims)), indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.dims):
            idx = [slice(None)] * self.dims
            idx[a] = 0
            mask[tuple(idx)] = True
            idx[a] = -1
            mask[tuple(idx)] = True
        return mask


@dataclass(frozen=True)
class SeparableWind:
    """Convection field with ``w_l(x) = prod_a factors[l][a](x_a)``.

    ``factors[l][a]`` is the factor of component ``l`` depending on axis
    ``a``; in 2-D that is ``((phi1, psi1), (phi2, psi2))``.
    """

    factors: tuple[tuple[Factor, ...], ...]

    def __post_init__(self):
        d = len(self.factors)
        if d not in (2, 3) or any(len(c) != d for c in self.factors):
            raise ValueError("wind needs d components of d factors each (d = 2 or 3)")

    @classmethod
    def zero(cls, dims: int = 2) -> "SeparableWind":
        return cls(tuple(tuple(const(0.0) for _ in range(dims)) for _ in range(dims)))

    @property
    def dims(self) -> int:
        return len(self.factors)

    def __call__(self, *coords) -> tuple[np.ndarray, ...]:
        """Evaluate all components at the given coordinate arrays."""
        out = []
        for comp in self.factors:
            val = np.ones(np.broadcast(*coords).shape)
            for f, c in zip(comp, coords):
                val = val * f(np.asarray(c, dtype=np.float64))
            out.append(val)
        return tuple(out)

    def samples(self, grid: Grid) -> tuple[tuple[np.ndarray, ...], ...]:
        return tuple(
            tuple(sample_diagonal(f, grid.nodes(a)) for a, f in enumerate(comp))
            for comp in self.factors
        )


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet data per side.

    ``sides`` maps ``"x0", "x1", "y0", "y1"`` (and ``"z0", "z1"`` in 3-D) to
    callables of the remaining coordinates in axis order; missing sides are
    zero.  With ``corners="strict"`` mismatched data at shared edges raise
    :class:`InconsistentBoundaryError`; with ``corners="y-sides"`` the y
    sides take precedence, then z, then x.
    """

    sides: Mapping[str, Callable] = field(default_factory=dict)
    corners: str = "strict"

    def __post_init__(self):
        if self.corners not in ("strict", "y-sides"):
            raise ValueError("corners must be 'strict' or 'y-sides'")
        bad = set(self.sides) - {"x0", "x1", "y0", "y1", "z0", "z1"}
        if bad:
            raise ValueError(f"unknown boundary sides {sorted(bad)}")

    def _side_values(self, grid: Grid, name: str) -> np.ndarray | None:
        f = self.sides.get(name)
        if f is None:
            return None
        axis = "xyz".index(name[0])
        others = [grid.nodes(a) for a in range(grid.dims) if a != axis]
        mesh = np.meshgrid(*others, indexing="ij")
        vals = f(*mesh)
        vals = np.broadcast_to(np.asarray(vals, dtype=np.float64), mesh[0].shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite boundary data on side {name}")
        return vals

    def mismatches(self, grid: Grid) -> list[tuple[str, str, float]]:
        """Largest disagreement on each edge shared by two given sides."""
        out = []
        vals = {s: self._side_values(grid, s) for s in ("x0", "x1", "y0", "y1", "z0", "z1")[: 2 * grid.dims]}
        for s1 in vals:
            for s2 in vals:
                a1, a2 = "xyz".index(s1[0]), "xyz".index(s2[0])
                if a1 >= a2:
                    continue
                u1 = self._embed(grid, s1, vals[s1])
                u2 = self._embed(grid, s2, vals[s2])
                idx = [slice(None)] * grid.dims
                idx[a1] = 0 if s1[1] == "0" else -1
                idx[a2] = 0 if s2[1] == "0" else -1
                diff = float(np.max(np.abs(u1[tuple(idx)] - u2[tuple(idx)])))
                if diff > CORNER_TOL:
                    out.append((s1, s2, diff))
        return out

    @staticmethod
    def _embed(grid: Grid, name: str, vals) -> np.ndarray:
        u = np.zeros(grid.shape)
        if vals is None:
            return u
        axis = "xyz".index(name[0])
        idx = [slice(None)] * grid.dims
        idx[axis] = 0 if name[1] == "0" else -1
        u[tuple(idx)] = vals
        return u

    def boundary_values(self, grid: Grid) -> np.ndarray:
        """Grid array carrying the boundary data and zeros inside."""
        if self.corners == "strict":
            bad = self.mismatches(grid)
            if bad:
                s1, s2, d = bad[0]
                raise InconsistentBoundaryError(
                    f"boundary data on sides {s1} and {s2} differ by {d:.3g} where they meet"
                )
        u = np.zeros(grid.shape)
        order = ("x", "z", "y") if grid.dims == 3 else ("x", "y")
        for ax in order:
            for end in "01":
                name = ax + end
                vals = self._side_values(grid, name)
                if vals is None:
                    vals = 0.0
                axis = "xyz".index(ax)
                idx = [slice(None)] * grid.dims
                idx[axis] = 0 if end == "0" else -1
                u[tuple(idx)] = vals
        return u


# --------------------------------------------------------------------------
# 1-D operators
# --------------------------------------------------------------------------


def assemble_second_order(n: int, h: float) -> sp.csr_matrix:
    """Negative second difference with identity rows at both ends.

    Interior rows are ``(-1, 2, -1) / h**2``; rows 0 and ``n`` are
    ``e_row / h**2``.  The transpose is the operator used from the right.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if h <= 0:
        raise ValueError("need h > 0")
    m = n + 1
    main = np.full(m, 2.0)
    main[0] = main[-1] = 1.0
    lower = np.full(m - 1, -1.0)
    upper = np.full(m - 1, -1.0)
    lower[-1] = 0.0  # row n
    upper[0] = 0.0  # row 0
    t = sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2
    t.eliminate_zeros()
    return t


def assemble_first_order(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference ``(-1, 0, 1) / (2h)``; rows 0 and ``n`` zero."""
    if n < 2:
        raise ValueError("need n >= 2")
    if h <= 0:
        raise ValueError("need h > 0")
    m = n + 1
    lower = np.full(m - 1, -1.0)
    upper = np.full(m - 1, 1.0)
    lower[-1] = 0.0
    upper[0] = 0.0
    b = sp.diags([lower, upper], [-1, 1], format="csr") / (2.0 * h)
    b.eliminate_zeros()
    return b


def sample_diagonal(f: Factor, nodes) -> np.ndarray:
    """Values ``f(node_i)`` as a float array (the diagonal of a coefficient matrix)."""
    nodes = np.asarray(nodes, dtype=np.float64)
    vals = np.broadcast_to(np.asarray(f(nodes), dtype=np.float64), nodes.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("coefficient sample is not finite")
    return vals


@dataclass(frozen=True)
class OperatorSet:
    """Per-axis 1-D operators and sampled wind factors.

    ``second[a]`` and ``first[a]`` are the boundary-completed second and
    first difference matrices of axis ``a`` in left-multiplication form;
    ``diag[l][a]`` samples the factor of wind component ``l`` on axis ``a``.
    """

    grid: Grid
    eps: float
    second: tuple[sp.csr_matrix, ...]
    first: tuple[sp.csr_matrix, ...]
    diag: tuple[tuple[np.ndarray, ...], ...]

    # 2-D names: t1, b1 act from the left, t2 = t1(y)^T, b2 = b1(y)^T from the right
    @property
    def t1(self):
        return self.second[0]

    @property
    def b1(self):
        return self.first[0]

    @property
    def t2(self):
        return self.second[1].T.tocsr()

    @property
    def b2(self):
        return self.first[1].T.tocsr()

    @property
    def t3(self):
        return self.second[2].T.tocsr()

    @property
    def b3(self):
        return self.first[2].T.tocsr()

    def dmat(self, component: int, axis: int) -> sp.csr_matrix:
        return sp.diags(self.diag[component][axis], format="csr")


def build_operator_set(grid: Grid, wind: SeparableWind, eps: float) -> OperatorSet:
    if eps <= 0:
        raise ValueError("viscosity must be positive")
    if wind.dims != grid.dims:
        raise ValueError("wind and grid dimensions differ")
    second = tuple(assemble_second_order(n, h) for n, h in zip(grid.n, grid.h))
    first = tuple(assemble_first_order(n, h) for n, h in zip(grid.n, grid.h))
    return OperatorSet(grid, float(eps), second, first, wind.samples(grid))


# --------------------------------------------------------------------------
# Multiterm equation
# --------------------------------------------------------------------------


class Term(NamedTuple):
    left: sp.csr_matrix
    right: sp.csr_matrix
    label: str = ""


def _is_zero(m) -> bool:
    m = sp.csr_matrix(m)
    return m.nnz == 0 or not np.any(m.data)


@dataclass
class MultitermEquation:
    """``sum_i left_i @ U @ right_i = rhs`` for an unknown of ``rhs.shape``."""

    terms: list[Term]
    rhs: np.ndarray
    layout: str = "2d"
    grid: Grid | None = None
    opset: OperatorSet | None = None

    def __post_init__(self):
        m, p = self.rhs.shape
        for t in self.terms:
            if t.left.shape != (m, m) or t.right.shape != (p, p):
                raise ValueError(
                    f"term {t.label!r} has shapes {t.left.shape}, {t.right.shape}; "
                    f"unknown is {m}x{p}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.rhs.shape

    @property
    def size(self) -> int:
        return self.rhs.size

    def active_terms(self) -> list[Term]:
        """Terms whose multipliers are not identically zero."""
        return [t for t in self.terms if not (_is_zero(t.left) or _is_zero(t.right))]

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"unknown has shape {u.shape}, expected {self.shape}")
        out = np.zeros(self.shape)
        for left, right, _ in self.terms:
            lu = left @ u
            # (R^T (LU)^T)^T keeps the sparse factor on the left of the product
            out += (right.T @ lu.T).T
        return out

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.apply(x.reshape(self.shape, order="F")).reshape(-1, order="F")

    def rhs_vector(self) -> np.ndarray:
        return self.rhs.reshape(-1, order="F")

    def residual(self, u) -> float:
        """Relative Frobenius residual of ``u``."""
        return float(
            np.linalg.norm(self.apply(u) - self.rhs) / np.linalg.norm(self.rhs)
        )

    def to_grid(self, u) -> np.ndarray:
        return layout_to_grid(u, self.layout, self.grid)

    def from_grid(self, u) -> np.ndarray:
        return grid_to_layout(u, self.layout, self.grid)


def grid_to_layout(u: np.ndarray, layout: str, grid: Grid) -> np.ndarray:
    """Rearrange a grid-indexed array ``u[i, j(, k)]`` into the given layout."""
    if layout == "2d":
        return np.asarray(u)
    nx, ny, nz = grid.shape
    if layout == "3d-tall":
        return np.asarray(u).transpose(2, 0, 1).reshape(nz * nx, ny)
    if layout == "3d-zsplit":
        return np.asarray(u).reshape(nx * ny, nz, order="F").T.copy()
    raise ValueError(f"unknown layout {layout!r}")


def layout_to_grid(v: np.ndarray, layout: str, grid: Grid) -> np.ndarray:
    if layout == "2d":
        return np.asarray(v)
    nx, ny, nz = grid.shape
    if layout == "3d-tall":
        return np.asarray(v).reshape(nz, nx, ny).transpose(1, 2, 0).copy()
    if layout == "3d-zsplit":
        return np.asarray(v).T.reshape(nx, ny, nz, order="F").copy()
    raise ValueError(f"unknown layout {layout!r}")


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, format="csr")


def _forcing(grid: Grid, f) -> np.ndarray:
    if f is None:
        return np.zeros(grid.shape)
    if callable(f):
        vals = np.asarray(f(*grid.mesh()), dtype=np.float64)
        vals = np.broadcast_to(vals, grid.shape).copy()
    else:
        vals = np.full(grid.shape, float(f))
    if not np.all(np.isfinite(vals)):
        raise ValueError("forcing is not finite")
    return vals


def _rhs_from_boundary(eq_terms, layout, grid, f, bc: Dirichlet | None):
    """Interior nodes take ``f``; boundary nodes take the operator applied to the data.

    The boundary rows of every term only couple boundary values lying on the
    same side, so applying the full operator to the boundary data (zero
    inside) yields exactly the side-wise boundary formulas.
    """
    fvals = _forcing(grid, f)
    mask = grid.boundary_mask()
    bc = bc or Dirichlet()
    ub = bc.boundary_values(grid)
    tmp = MultitermEquation(list(eq_terms), grid_to_layout(np.zeros(grid.shape), layout, grid), layout, grid)
    lub = layout_to_grid(tmp.apply(grid_to_layout(ub, layout, grid)), layout, grid)
    out = np.where(mask, lub, fvals)
    return grid_to_layout(out, layout, grid), ub


def _terms_2d(ops: OperatorSet) -> list[Term]:
    g = ops.grid
    eps = ops.eps
    nx, ny = g.shape
    return [
        Term((eps * ops.t1).tocsr(), _eye(ny), "eps*T1 U"),
        Term(_eye(nx), (eps * ops.t2).tocsr(), "eps*U T2"),
        Term((ops.dmat(0, 0) @ ops.b1).tocsr(), ops.dmat(0, 1), "Phi1 B1 U Psi1"),
        Term(ops.dmat(1, 0), (ops.b2 @ ops.dmat(1, 1)).tocsr(), "Phi2 U B2 Psi2"),
    ]


def assemble_rhs_boundary(ops: OperatorSet, ub: np.ndarray, f=None) -> np.ndarray:
    """Right-hand side of the 2-D equation from boundary data ``ub``.

    Boundary columns are filled first (sides ``y = 0`` and ``y = L_y``),
    then boundary rows; corner values from the row formula are checked
    against those from the column formula.
    """
    g = ops.grid
    if g.dims != 2:
        raise ValueError("assemble_rhs_boundary is two-dimensional")
    eps = ops.eps
    hx, hy = g.h
    ub = np.asarray(ub, dtype=np.float64)
    if not np.all(np.isfinite(ub)):
        raise ValueError("non-finite boundary data")
    F = _forcing(g, f)
    phi1, psi1 = ops.diag[0]
    phi2, psi2 = ops.diag[1]
    t1, b1 = ops.t1, ops.b1
    t2, b2 = ops.t2, ops.b2
    for j in (0, -1):
        col = ub[:, j]
        F[:, j] = eps * (t1 @ col) + (eps / hy**2) * col + psi1[j] * (phi1 * (b1 @ col))
    corners = F[[0, 0, -1, -1], [0, -1, 0, -1]].copy()
    for i in (0, -1):
        row = ub[i, :]
        F[i, :] = (eps / hx**2) * row + eps * (t2.T @ row) + phi2[i] * ((b2.T @ row) * psi2)
    again = F[[0, 0, -1, -1], [0, -1, 0, -1]]
    scale = max(1.0, float(np.max(np.abs(corners))))
    if np.max(np.abs(again - corners)) > CORNER_TOL * scale:
        raise InconsistentBoundaryError("corner values of the row and column formulas differ")
    return F


def assemble_2d(grid: Grid, wind: SeparableWind, eps: float, f=None, bc: Dirichlet | None = None) -> MultitermEquation:
    """Four-term matrix equation of the 2-D problem.

    ``eps T1 U + eps U T2 + Phi1 B1 U Psi1 + Phi2 U B2 Psi2 = F``
    """
    if grid.dims != 2:
        raise ValueError("assemble_2d needs a 2-D grid")
    ops = build_operator_set(grid, wind, eps)
    ub = (bc or Dirichlet()).boundary_values(grid)
    rhs = assemble_rhs_boundary(ops, ub, f)
    return MultitermEquation(_terms_2d(ops), rhs, "2d", grid, ops)


def _terms_3d_tall(ops: OperatorSet) -> list[Term]:
    nx, ny, nz = ops.grid.shape
    eps = ops.eps
    tx, ty, tz = ops.second
    bx, by, bz = ops.first
    D = ops.dmat
    ix, iz = _eye(nx), _eye(nz)
    return [
        Term((eps * (sp.kron(iz, tx) + sp.kron(tz, ix))).tocsr(), _eye(ny), "eps*(I kron T1 + T1z kron I) U"),
        Term(_eye(nx * nz), (eps * ty.T).tocsr(), "eps*U T3"),
        Term(sp.kron(D(0, 2), D(0, 0) @ bx).tocsr(), D(0, 1), "(Ups1 kron Phi1 B1) U Psi1"),
        Term(sp.kron(D(1, 2), D(1, 0)).tocsr(), (by.T @ D(1, 1)).tocsr(), "(Ups2 kron Phi2) U B3 Psi2"),
        Term(sp.kron(D(2, 2) @ bz, D(2, 0)).tocsr(), D(2, 1), "(Ups3 B kron Phi3) U Psi3"),
    ]


def assemble_3d(grid: Grid, wind: SeparableWind, eps: float, f=None, bc: Dirichlet | None = None) -> MultitermEquation:
    """Five-term matrix equation of the 3-D problem in the tall layout."""
    if grid.dims != 3:
        raise ValueError("assemble_3d needs a 3-D grid")
    ops = build_operator_set(grid, wind, eps)
    terms = _terms_3d_tall(ops)
    rhs, _ = _rhs_from_boundary(terms, "3d-tall", grid, f, bc)
    return MultitermEquation(terms, rhs, "3d-tall", grid, ops)


def _terms_3d_zsplit(ops: OperatorSet) -> list[Term]:
    nx, ny, nz = ops.grid.shape
    eps = ops.eps
    tx, ty, tz = ops.second
    bx, by, bz = ops.first
    D = ops.dmat
    ix, iy = _eye(nx), _eye(ny)
    lap_xy = sp.kron(iy, tx) + sp.kron(ty, ix)
    return [
        Term((eps * tz).tocsr(), _eye(nx * ny), "eps*T3 U"),
        Term(_eye(nz), (eps * lap_xy.T).tocsr(), "eps*U (I kron T2 + T1^T kron I)"),
        Term(D(0, 2), sp.kron(D(0, 1), D(0, 0) @ bx).T.tocsr(), "Ups1 U (Psi1 kron Phi1 B1)^T"),
        Term(D(1, 2), sp.kron(D(1, 1) @ by, D(1, 0)).T.tocsr(), "Ups2 U (Psi2 B2 kron Phi2)^T"),
        Term((D(2, 2) @ bz).tocsr(), sp.kron(D(2, 1), D(2, 0)).tocsr(), "Ups3 B3 U (Psi3 kron Phi3)"),
    ]


def assemble_3d_zsplit(grid: Grid, wind: SeparableWind, eps: float, f=None, bc: Dirichlet | None = None) -> MultitermEquation:
    """3-D problem with z separated from (x, y): unknown of shape ``(nz+1, (nx+1)(ny+1))``."""
    if grid.dims != 3:
        raise ValueError("assemble_3d_zsplit needs a 3-D grid")
    ops = build_operator_set(grid, wind, eps)
    terms = _terms_3d_zsplit(ops)
    rhs, _ = _rhs_from_boundary(terms, "3d-zsplit", grid, f, bc)
    return MultitermEquation(terms, rhs, "3d-zsplit", grid, ops)


# --------------------------------------------------------------------------
# Kronecker form and diagnostics
# --------------------------------------------------------------------------


def kron_expand(eq: MultitermEquation, max_nnz: int = MAX_KRON_NNZ) -> tuple[CsrMatrix, np.ndarray]:
    """Return ``A = sum_i R_i^T kron L_i`` and ``vec(F)`` (column-major)."""
    est = sum(t.left.nnz * t.right.nnz for t in eq.terms)
    if est > max_nnz:
        raise MemoryError(
            f"Kronecker expansion would hold up to {est} nonzeros (budget {max_nnz})"
        )
    n = eq.size
    a = sp.csr_matrix((n, n))
    for left, right, _ in eq.terms:
        a = a + sp.kron(right.T, left, format="csr")
    return CsrMatrix.from_scipy(a), eq.rhs_vector().copy()


def mesh_peclet(grid: Grid, wind: SeparableWind, eps: float) -> float:
    """Largest cell Peclet number ``h_l |w_l| / (2 eps)`` over nodes and components."""
    if eps <= 0:
        raise ValueError("viscosity must be positive")
    best = 0.0
    for l, comp in enumerate(wind.samples(grid)):
        wmax = math.prod(float(np.max(np.abs(s))) for s in comp)
        best = max(best, grid.h[l] * wmax / (2.0 * eps))
    return best
