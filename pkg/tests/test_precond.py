import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from cdmeq.discretize import (
    Dirichlet,
    Grid,
    SeparableWind,
    assemble_2d,
    assemble_3d,
    assemble_3d_zsplit,
    build_operator_set,
    const,
)
from cdmeq.krylov import KrylovConfig, LinearOperator, fgmres, gmres
from cdmeq.linalg_core import svd
from cdmeq.precond import (
    PrecondParams,
    PreconditionerError,
    SylvesterPreconditioner,
    average_coefficient,
    averaged_wind_2d,
    build_precond_2d,
    build_precond_3d,
    truncate_rhs,
)

IFISS = SeparableWind(((lambda x: 1 - x**2, lambda y: 2 * y), (lambda x: -2 * x, lambda y: 1 - y**2)))
EX6 = SeparableWind(((lambda x: 1 - x**2, lambda y: y, lambda z: z), (const(0), const(0), const(0)),
                     (const(1), const(1), np.exp)))


def test_average_constant_and_linear():
    assert average_coefficient(const(3.5), np.linspace(0, 1, 9)) == 3.5
    for n in (2, 7, 64):
        assert average_coefficient(lambda t: t, np.linspace(0, 1, n + 1)) == pytest.approx(0.5, abs=1e-15)


def test_ifiss_average_is_one():
    avg = averaged_wind_2d(IFISS, Grid.uniform(129))
    assert avg.psi1_bar == pytest.approx(1.0, abs=1e-14)
    assert avg.phi2_bar == pytest.approx(-1.0, abs=1e-14)
    ops = build_operator_set(Grid.uniform(129), IFISS, 0.01)
    p = build_precond_2d(ops, setup=False)
    assert p.averages.psi1_bar == pytest.approx(avg.psi1_bar)


def test_modified_wind_reproduces_constant_factors():
    w = SeparableWind(((lambda x: x, const(2.0)), (const(-1.5), lambda y: y)))
    avg = averaged_wind_2d(w, Grid.uniform(8))
    x, y = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 5), indexing="ij")
    for a, b in zip(w(x, y), avg.wind(x, y)):
        assert np.allclose(a, b)


def test_modified_wind_consistency():
    grid = Grid.uniform(12)
    eps = 0.03
    p = build_precond_2d(build_operator_set(grid, IFISS, eps), setup=False)
    eq = assemble_2d(grid, averaged_wind_2d(IFISS, grid).wind, eps)
    u = np.random.default_rng(0).standard_normal(eq.shape)
    assert np.allclose(p.operator(u), eq.apply(u), rtol=1e-13, atol=1e-13 * np.abs(eq.apply(u)).max())


def test_linear_in_eps():
    grid = Grid.uniform(10)
    p1 = build_precond_2d(build_operator_set(grid, IFISS, 0.1), setup=False)
    p2 = build_precond_2d(build_operator_set(grid, IFISS, 0.2), setup=False)
    ops = build_operator_set(grid, IFISS, 0.1)
    assert np.allclose((p2.m1 - p1.m1).toarray(), 0.1 * ops.t1.toarray())
    assert np.allclose((p2.m2 - p1.m2).toarray(), 0.1 * ops.t2.toarray())


# -- truncation ---------------------------------------------------------------


def test_truncate_rank_one_exact():
    rng = np.random.default_rng(1)
    g = np.outer(rng.standard_normal(9), rng.standard_normal(7))
    f = truncate_rhs(g)
    assert f.rank == 1 and np.allclose(f.toarray(), g)


def test_truncate_identity_cap_binds():
    assert truncate_rhs(np.eye(20)).rank == 10
    assert truncate_rhs(np.eye(20), r_max=25).rank == 20


def test_truncate_zero():
    f = truncate_rhs(np.zeros((4, 5)))
    assert f.rank == 0 and f.shape == (4, 5)


@pytest.mark.parametrize("seed", range(5))
def test_truncation_error_is_next_singular_value(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((30, 20)) @ np.diag(0.5 ** np.arange(20)) @ rng.standard_normal((20, 20))
    f = truncate_rhs(g, 1e-2, 10)
    s = svd(g)[1]
    err = np.linalg.norm(g - f.toarray(), 2)
    assert err == pytest.approx(s[f.rank], rel=1e-8)
    if f.rank < 10:
        assert err <= 1e-2 * s[0]


# -- application --------------------------------------------------------------


@pytest.mark.parametrize("inner", ["direct", "kpik"])
def test_identity_coefficients_halve(inner):
    n = 15
    p = SylvesterPreconditioner(sp.identity(n), sp.identity(n), PrecondParams(inner=inner))
    rng = np.random.default_rng(2)
    g = np.outer(rng.standard_normal(n), rng.standard_normal(n)).reshape(-1, order="F")
    assert np.allclose(p(g), g / 2, rtol=1e-10)


def test_route_selection():
    ops = build_operator_set(Grid.uniform(20), IFISS, 0.1)
    assert build_precond_2d(ops, setup=False).route == "direct"
    assert build_precond_2d(ops, PrecondParams(direct_threshold=10), setup=False).route == "kpik"
    with pytest.raises(ValueError):
        PrecondParams(inner="lu")


def test_factorizations_cached():
    ops = build_operator_set(Grid.uniform(40), IFISS, 0.05)
    p = build_precond_2d(ops, PrecondParams(inner="kpik"))
    rng = np.random.default_rng(3)
    for _ in range(4):
        p(rng.standard_normal(41 * 41))
    a, bt = p._factored()
    assert a.factorizations == 1 and bt.factorizations == 1
    assert p.applications == 4 and len(p.ranks) == 4 and p.inner_cycles > 0


def test_inner_failure_raises():
    ops = build_operator_set(Grid.uniform(40), IFISS, 0.001)
    p = build_precond_2d(ops, PrecondParams(inner="kpik", tol_inner=1e-14, max_inner_cycles=2))
    with pytest.raises(PreconditionerError):
        p(np.random.default_rng(4).standard_normal(41 * 41))


def test_wrong_length_rejected():
    p = build_precond_2d(build_operator_set(Grid.uniform(6), IFISS, 0.1))
    with pytest.raises(ValueError):
        p(np.ones(10))


def test_collapse_two_iterations():
    # psi1 and phi2 constant: the preconditioner is the operator itself
    w = SeparableWind(((lambda x: 1 + x, const(0.7)), (const(-0.4), lambda y: np.cos(y))))
    bc = Dirichlet({"y1": lambda x: np.ones_like(x)}, corners="y-sides")
    eq = assemble_2d(Grid.uniform(64), w, 0.01, 0.0, bc)
    p = build_precond_2d(eq.opset, PrecondParams(inner="direct"))
    _, rep = fgmres(LinearOperator(eq.size, eq.matvec), eq.rhs_vector(), KrylovConfig(tol=1e-8), p)
    assert rep.converged and rep.iterations <= 2


def test_direct_inner_route_works_with_plain_gmres():
    eq = assemble_2d(Grid.uniform(48), IFISS, 0.02, 1.0)
    p = build_precond_2d(eq.opset, PrecondParams(inner="direct"))
    _, rep = gmres(LinearOperator(eq.size, eq.matvec), eq.rhs_vector(), KrylovConfig(tol=1e-8), p)
    assert rep.converged and rep.iterations < 30


# -- 3-D ----------------------------------------------------------------------


@pytest.mark.parametrize("layout", ["3d-tall", "3d-zsplit"])
def test_3d_zero_wind_exact(layout):
    grid = Grid.uniform(8, 3)
    build = assemble_3d if layout == "3d-tall" else assemble_3d_zsplit
    eq = build(grid, SeparableWind.zero(3), 0.5, 1.0)
    split = "generic" if layout == "3d-tall" else "z-split"
    p = build_precond_3d(eq.opset, PrecondParams(inner="direct"), splitting=split)
    _, rep = fgmres(LinearOperator(eq.size, eq.matvec), eq.rhs_vector(), KrylovConfig(tol=1e-9), p)
    assert rep.iterations <= 2


def test_zsplit_average_of_z_factor():
    grid = Grid.uniform(10, 3)
    p = build_precond_3d(build_operator_set(grid, EX6, 0.5), splitting="z-split", setup=False)
    assert p.averages["ups1_bar"] == pytest.approx(np.mean(grid.nodes(2)))
    assert p.averages["ups1_bar"] == pytest.approx(0.5)


def test_generic_averages():
    rng = np.random.default_rng(5)
    grid = Grid((6, 7, 8))
    w = SeparableWind(tuple(tuple((lambda c: (lambda t: c[0] + c[1] * t))(rng.uniform(0.5, 1.5, 2))
                                  for _ in range(3)) for _ in range(3)))
    ops = build_operator_set(grid, w, 0.3)
    p = build_precond_3d(ops, setup=False)
    assert p.averages["chi_bar"] == pytest.approx(np.mean(ops.diag[1][0]) * np.mean(ops.diag[1][2]))
    assert p.shape == (7 * 9, 8)


def test_3d_apply_matches_dense_inverse():
    grid = Grid.uniform(6, 3)
    ops = build_operator_set(grid, EX6, 0.2)
    params = PrecondParams(inner="kpik", tol_truncation=1e-15, r_max=49, tol_inner=1e-10)
    p = build_precond_3d(ops, params, splitting="z-split")
    m, q = p.shape
    big = sp.kron(sp.identity(q), p.m1) + sp.kron(p.m2.T, sp.identity(m))
    g = np.random.default_rng(6).standard_normal(m * q)
    ref = spsolve(big.tocsc(), g)
    assert np.linalg.norm(p(g) - ref) <= 10 * 1e-4 * np.linalg.norm(ref)


def test_3d_wrong_dims():
    with pytest.raises(ValueError):
        build_precond_3d(build_operator_set(Grid.uniform(5), IFISS, 0.1))
    with pytest.raises(ValueError):
        build_precond_2d(build_operator_set(Grid.uniform(5, 3), EX6, 0.1))
    with pytest.raises(ValueError):
        build_precond_3d(build_operator_set(Grid.uniform(5, 3), EX6, 0.1), splitting="x-split")


# -- empirical properties -----------------------------------------------------


def er_equation(n, eps):
    from cdmeq.problems import get_problem

    return get_problem("ex_er").assemble(eps, n)


def outer_iterations(eq, params, tol=1e-6):
    p = build_precond_2d(eq.opset, params)
    _, rep = fgmres(LinearOperator(eq.size, eq.matvec), eq.rhs_vector(), KrylovConfig(tol=tol), p)
    assert rep.converged
    return rep.iterations


def test_parameter_insensitivity():
    eq = er_equation(128, 0.1)
    base = outer_iterations(eq, PrecondParams(inner="kpik"))
    for tt in (5e-3, 2e-2):
        assert abs(outer_iterations(eq, PrecondParams(inner="kpik", tol_truncation=tt)) - base) <= 2
