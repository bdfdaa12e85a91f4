import numpy as np
import pytest

from cdmeq.discretize import Grid
from cdmeq.problems import (
    ProblemSpec,
    catalog,
    dump,
    dumps,
    get_problem,
    load,
    loads,
    make_factor,
    validate,
)
from cdmeq.routes import NotSylvesterError, collapse_sylvester, default_method, solve_problem


def test_catalog_ids():
    assert [s.id for s in catalog()] == ["ex1", "ex3", "ex_ifiss", "ex_er", "ex_3d_solve", "ex_3d_prec"]


def test_lookup():
    assert get_problem("ex_er").route == "fgmres+kpik-precond"
    rect = get_problem("ex1-rect")
    assert rect.grid(8).n == (8, 16) and rect.grid(8).lengths == (1.0, 2.0)
    with pytest.raises(KeyError):
        get_problem("ex99")


def test_factor_expressions():
    t = np.linspace(-1, 1, 7)
    assert np.allclose(make_factor("const:2.5")(t), 2.5)
    assert np.allclose(make_factor("linear:1,-3")(t), 1 - 3 * t)
    assert np.allclose(make_factor("tsin")(t), t * np.sin(t))
    assert make_factor("er-inlet")(0.5) == pytest.approx(1 + np.tanh(10.0))
    assert make_factor("er-inlet")(0.75) == 2.0
    assert make_factor("er-inlet")(0.0) == pytest.approx(1 + np.tanh(-10.0))
    for bad in ("nope", "const:x", "linear:1"):
        with pytest.raises(ValueError):
            make_factor(bad)


def test_ex1_second_component_zero_and_collapses():
    spec = get_problem("ex1")
    x, y = np.meshgrid(np.linspace(0, 1, 6), np.linspace(0, 1, 6), indexing="ij")
    assert np.all(spec.wind_field()(x, y)[1] == 0)
    a, b = collapse_sylvester(spec.assemble(0.0333, 16))
    assert a.shape == (17, 17) and b.shape == (17, 17)


def test_ifiss_is_not_sylvester():
    spec = get_problem("ex_ifiss")
    with pytest.raises(NotSylvesterError):
        collapse_sylvester(spec.assemble(0.005, 16))
    x, y = np.meshgrid(np.linspace(0, 1, 9), np.linspace(0, 1, 9), indexing="ij")
    assert max(np.abs(c).max() for c in spec.wind_field()(x, y)) > 0


def test_er_wind_divergence_free():
    w = get_problem("ex_er").wind_field()
    g = Grid.uniform(64)
    x, y = np.meshgrid(g.nodes(0), g.nodes(1), indexing="ij")
    # analytic partial derivatives of the separable factors
    dw1dx = -4 * (2 * x + 1) * y
    dw2dy = (-2 - 4 * x) * (-2 * y)
    assert np.abs(dw1dx + dw2dy).max() <= 1e-12
    # a centered difference of the sampled field agrees
    w1, w2 = w(x, y)
    h = g.h[0]
    div = (w1[2:, 1:-1] - w1[:-2, 1:-1] + w2[1:-1, 2:] - w2[1:-1, :-2]) / (2 * h)
    assert np.abs(div).max() <= 1e-10


def test_validate_peclet_and_corners():
    warns = validate(get_problem("ex_ifiss"), 0.0013, 129)
    assert any("Peclet" in w for w in warns)
    assert not any("Peclet" in w for w in validate(get_problem("ex_er"), 0.1, 256))
    corner = [w for w in validate(get_problem("ex1"), 0.0333, 65) if "common edge" in w]
    assert corner and all("y-sides" in w for w in corner)


def test_validate_quiet_for_zero_wind():
    spec = ProblemSpec(id="c", dims=2, wind=(("const:0", "const:0"),) * 2, eps=(1e-4,), n=(8,),
                       route="baseline", tol=1e-8)
    assert validate(spec) == []


def test_spec_rejects_inconsistencies():
    base = dict(id="c", dims=2, wind=(("const:1", "const:1"),) * 2, eps=(0.1,), n=(8,), route="baseline", tol=1e-8)
    ProblemSpec(**base)
    for change in ({"dims": 4}, {"route": "magic"}, {"eps": (-1.0,)}, {"layout": "3d-tall"},
                   {"bc": {"z0": "const:1"}}, {"wind": (("const:1",),) * 2}, {"wind": (("foo", "const:1"),) * 2}):
        with pytest.raises(ValueError):
            ProblemSpec(**{**base, **change})


@pytest.mark.parametrize("spec", [*catalog(), get_problem("ex1-rect")], ids=lambda s: s.id)
def test_roundtrip(spec, tmp_path):
    assert loads(dumps(spec)) == spec
    dump(spec, tmp_path / "p.txt")
    assert load(tmp_path / "p.txt") == spec


def test_loads_defaults_and_errors():
    spec = loads("dims = 2\neps = 0.1\nn = 8\nwind.1.x = tsin\n# comment\n\n")
    assert spec.wind == (("tsin", "const:1"), ("const:0", "const:1"))
    assert spec.layout == "2d" and spec.id == "custom"
    with pytest.raises(ValueError, match="unknown keys"):
        loads("dims = 2\neps = 0.1\nn = 8\ncolour = red\n")
    with pytest.raises(ValueError, match="missing"):
        loads("dims = 2\nn = 8\n")
    with pytest.raises(ValueError):
        loads("dims = 2\neps = 0.1\nn = 8\nwind.3.x = tsin\n")
    with pytest.raises(ValueError):
        loads("dims = 2\neps = 0.1\neps = 0.2\nn = 8\n")


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.id)
def test_each_entry_solves_small(spec):
    n = 6 if spec.dims == 3 else 16
    _, rep = solve_problem(spec, spec.eps[0], n, default_method(spec), tol=1e-8)
    assert rep.converged, rep.warnings
    assert rep.problem == spec.id and rep.residual <= 1e-8
