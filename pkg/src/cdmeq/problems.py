"""Catalog of benchmark convection-diffusion problems.

Wind factors and boundary data are given by short expression strings drawn
from a fixed registry (see :data:`FACTORS`), so problem definitions can be
written to and read from a plain ``key = value`` text format.

Examples of factor expressions::

    const:2          constant 2
    linear:0,-2      -2 t
    1-t^2            1 - t**2
    tsin             t sin t
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .discretize import (
    Dirichlet,
    Grid,
    MultitermEquation,
    SeparableWind,
    assemble_2d,
    assemble_3d,
    assemble_3d_zsplit,
    const,
    mesh_peclet,
)

__all__ = [
    "FACTORS",
    "ProblemSpec",
    "catalog",
    "get_problem",
    "make_factor",
    "validate",
    "loads",
    "dumps",
    "load",
    "dump",
    "ROUTES",
]

ROUTES = ("direct-sylvester", "kpik-solver", "gmres+meq-precond", "fgmres+kpik-precond", "baseline")


def _er_inlet(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t <= 0.5, 1.0 + np.tanh(10.0 + 20.0 * (2.0 * t - 1.0)), 2.0)


FACTORS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "1-t^2": lambda t: 1.0 - t**2,
    "1-(2t+1)^2": lambda t: 1.0 - (2.0 * t + 1.0) ** 2,
    "1+(t+1)^2/4": lambda t: 1.0 + (t + 1.0) ** 2 / 4.0,
    "tsin": lambda t: t * np.sin(t),
    "tcos": lambda t: t * np.cos(t),
    "exp(t^2-1)": lambda t: np.exp(t**2 - 1.0),
    "exp": np.exp,
    "sin(pi t)": lambda t: np.sin(np.pi * t),
    "er-inlet": _er_inlet,
}


def make_factor(expr: str) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized function of one variable for a registry expression.

    Besides the names in :data:`FACTORS`, ``const:c`` and ``linear:a,b``
    (meaning ``a + b t``) are accepted.  The returned callable carries the
    expression in its ``expr`` attribute.
    """
    expr = expr.strip()
    if expr.startswith("const:"):
        f = const(float(expr[6:]))
    elif expr.startswith("linear:"):
        try:
            a, b = (float(s) for s in expr[7:].split(","))
        except ValueError:
            raise ValueError(f"linear factor needs two coefficients, got {expr!r}") from None

        def f(t, a=a, b=b):
            return a + b * np.asarray(t, dtype=np.float64)
    elif expr in FACTORS:
        base = FACTORS[expr]

        def f(t, base=base):
            return base(np.asarray(t, dtype=np.float64))
    else:
        raise ValueError(f"unknown factor expression {expr!r}")
    f.expr = expr
    return f


_SIDES = ("x0", "x1", "y0", "y1", "z0", "z1")


@dataclass(frozen=True)
class ProblemSpec:
    """A convection-diffusion problem ``-eps lap u + w . grad u = f`` with Dirichlet data.

    Attributes
    ----------
    wind : tuple of tuples of str
        ``wind[l][a]`` is the factor expression of component ``l`` on axis ``a``.
    bc : dict
        Side name to factor expression of the first tangential coordinate;
        missing sides are zero.
    n_ratio : tuple of int
        Subdivisions on axis ``a`` are ``n * n_ratio[a]``.
    layout : str
        ``"2d"``, ``"3d-tall"`` or ``"3d-zsplit"``.
    """

    id: str
    dims: int
    wind: tuple[tuple[str, ...], ...]
    eps: tuple[float, ...]
    n: tuple[int, ...]
    route: str
    tol: float
    f: float = 0.0
    bc: dict[str, str] = field(default_factory=dict)
    lengths: tuple[float, ...] | None = None
    n_ratio: tuple[int, ...] | None = None
    layout: str | None = None
    corners: str = "strict"
    description: str = ""

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        if len(self.wind) != self.dims or any(len(c) != self.dims for c in self.wind):
            raise ValueError("wind needs dims components of dims factors")
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")
        bad = set(self.bc) - set(_SIDES[: 2 * self.dims])
        if bad:
            raise ValueError(f"unknown boundary sides {sorted(bad)}")
        if self.layout is None:
            object.__setattr__(self, "layout", "2d" if self.dims == 2 else "3d-tall")
        if (self.layout == "2d") != (self.dims == 2):
            raise ValueError(f"layout {self.layout!r} does not fit dims={self.dims}")
        if self.n_ratio is None:
            object.__setattr__(self, "n_ratio", (1,) * self.dims)
        for e in self.eps:
            if e <= 0:
                raise ValueError("viscosities must be positive")
        # fail early on bad expressions
        self.wind_field()
        self.dirichlet()

    def wind_field(self) -> SeparableWind:
        return SeparableWind(tuple(tuple(make_factor(e) for e in comp) for comp in self.wind))

    def dirichlet(self) -> Dirichlet:
        sides = {}
        for side, expr in self.bc.items():
            fac = make_factor(expr)
            sides[side] = lambda *c, fac=fac: fac(c[0])
        return Dirichlet(sides, corners=self.corners)

    def grid(self, n: int, ny: int | None = None, nz: int | None = None) -> Grid:
        sizes = [n * r for r in self.n_ratio]
        if ny is not None:
            sizes[1] = ny
        if nz is not None:
            if self.dims != 3:
                raise ValueError("nz given for a 2-D problem")
            sizes[2] = nz
        return Grid(tuple(sizes), self.lengths)

    def assemble(self, eps: float, n: int, ny: int | None = None, nz: int | None = None) -> MultitermEquation:
        grid = self.grid(n, ny, nz)
        wind, bc = self.wind_field(), self.dirichlet()
        builder = {"2d": assemble_2d, "3d-tall": assemble_3d, "3d-zsplit": assemble_3d_zsplit}[self.layout]
        return builder(grid, wind, eps, self.f, bc)


def _ex1(rect: bool = False) -> ProblemSpec:
    return ProblemSpec(
        id="ex1-rect" if rect else "ex1",
        dims=2,
        wind=(("1+(t+1)^2/4", "const:1"), ("const:0", "const:0")),
        eps=(0.0333, 0.0167, 0.0083),
        n=(65, 129, 257, 513, 1025),
        route="direct-sylvester",
        tol=1e-10,
        bc={"y0": "const:1"},
        lengths=(1.0, 2.0) if rect else None,
        n_ratio=(1, 2) if rect else None,
        corners="y-sides",
        description="x-only wind; the operator is a Sylvester operator"
        + (" (rectangle (0,1)x(0,2))" if rect else ""),
    )


def catalog() -> list[ProblemSpec]:
    """The six benchmark problems, in table order."""
    ex1 = _ex1()
    return [
        ex1,
        replace(
            ex1,
            id="ex3",
            n=(129, 257, 513, 1025, 1200),
            route="kpik-solver",
            tol=1e-8,
            description="problem ex1 solved iteratively as a Sylvester equation",
        ),
        ProblemSpec(
            id="ex_ifiss",
            dims=2,
            wind=(("1-t^2", "linear:0,2"), ("linear:0,-2", "1-t^2")),
            eps=(0.005, 0.0025, 0.0013),
            n=(129, 257, 513, 1025),
            route="fgmres+kpik-precond",
            tol=1e-6,
            bc={"y1": "const:1"},
            corners="y-sides",
            description="recirculating cavity flow with a hot wall",
        ),
        ProblemSpec(
            id="ex_er",
            dims=2,
            wind=(("1-(2t+1)^2", "linear:0,1"), ("linear:-2,-4", "1-t^2")),
            eps=(0.1, 0.05, 0.0333),
            n=(128, 256, 512, 1024, 2048),
            route="fgmres+kpik-precond",
            tol=1e-6,
            bc={"y0": "er-inlet"},
            corners="y-sides",
            description="divergence-free wind with a steep inflow layer at y = 0",
        ),
        ProblemSpec(
            id="ex_3d_solve",
            dims=3,
            wind=(("tsin", "const:1", "const:1"), ("const:1", "tcos", "const:1"), ("const:1", "const:1", "exp(t^2-1)")),
            eps=(0.005, 0.001, 0.0005),
            n=(50, 60, 70, 80, 90, 100),
            route="kpik-solver",
            tol=1e-9,
            f=1.0,
            layout="3d-tall",
            description="each wind component depends on its own variable; Sylvester form",
        ),
        ProblemSpec(
            id="ex_3d_prec",
            dims=3,
            wind=(("1-t^2", "linear:0,1", "linear:0,1"), ("const:0", "const:0", "const:0"), ("const:1", "const:1", "exp")),
            eps=(0.5, 0.1, 0.05),
            n=(50, 60, 70, 80, 90, 100),
            route="fgmres+kpik-precond",
            tol=1e-9,
            f=1.0,
            layout="3d-zsplit",
            description="z separated from (x, y); averaged z factor of the x-convection",
        ),
    ]


def get_problem(pid: str) -> ProblemSpec:
    """Catalog entry by id; ``"ex1-rect"`` is the rectangular variant of ``ex1``."""
    if pid == "ex1-rect":
        return _ex1(rect=True)
    for spec in catalog():
        if spec.id == pid:
            return spec
    raise KeyError(f"unknown problem {pid!r}")


def validate(spec: ProblemSpec, eps=None, n=None) -> list[str]:
    """Warnings for the problem at the given (or all listed) viscosities and sizes.

    A mesh Peclet number above one means centered differences may produce
    spurious oscillations.  Boundary data that disagree where two sides meet
    are reported as well; they are only resolved by the corner policy.
    """
    out = []
    eps_list = spec.eps if eps is None else [eps]
    n_list = spec.n if n is None else [n]
    wind = spec.wind_field()
    for e in eps_list:
        for k in n_list:
            pe = mesh_peclet(spec.grid(k), wind, e)
            if pe > 1.0:
                out.append(f"{spec.id}: mesh Peclet number {pe:.3g} > 1 at eps={e:g}, n={k}")
    grid = spec.grid(min(n_list))
    strict = Dirichlet(spec.dirichlet().sides, corners="strict")
    policy = f" (resolved by corner policy {spec.corners!r})" if spec.corners != "strict" else ""
    for s1, s2, d in strict.mismatches(grid):
        out.append(f"{spec.id}: boundary data on {s1} and {s2} differ by {d:.3g} at their common edge{policy}")
    return out


# ----------------------------------------------------------------------------
# key = value text format
# ----------------------------------------------------------------------------


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def dumps(spec: ProblemSpec) -> str:
    lines = [
        f"id = {spec.id}",
        f"dims = {spec.dims}",
        f"eps = {', '.join(repr(e) for e in spec.eps)}",
        f"n = {', '.join(str(k) for k in spec.n)}",
        f"route = {spec.route}",
        f"tol = {spec.tol!r}",
        f"f = {spec.f!r}",
        f"layout = {spec.layout}",
        f"corners = {spec.corners}",
    ]
    if spec.lengths is not None:
        lines.append(f"lengths = {', '.join(repr(v) for v in spec.lengths)}")
    if any(r != 1 for r in spec.n_ratio):
        lines.append(f"n_ratio = {', '.join(str(r) for r in spec.n_ratio)}")
    if spec.description:
        lines.append(f"description = {spec.description}")
    for l, comp in enumerate(spec.wind, start=1):
        for a, expr in enumerate(comp):
            lines.append(f"wind.{l}.{'xyz'[a]} = {expr}")
    for side in _SIDES:
        if side in spec.bc:
            lines.append(f"bc.{side} = {spec.bc[side]}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ProblemSpec:
    """Parse the ``key = value`` format written by :func:`dumps`.

    Blank lines and lines starting with ``#`` are ignored.  A wind
    component with no listed factor is zero; within a listed component the
    missing factors default to ``const:1``.
    """
    kv: dict[str, str] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {no}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in kv:
            raise ValueError(f"line {no}: duplicate key {key!r}")
        kv[key] = val
    try:
        dims = int(kv.pop("dims"))
        eps = _floats(kv.pop("eps"))
        n = tuple(int(v) for v in kv.pop("n").split(","))
    except KeyError as exc:
        raise ValueError(f"missing required key {exc.args[0]!r}") from None
    wind = [["const:1"] * dims for _ in range(dims)]
    seen = [False] * dims
    bc = {}
    for key in [k for k in kv if k.startswith("wind.")]:
        parts = key.split(".")
        if len(parts) != 3 or not parts[1].isdigit() or parts[2] not in "xyz"[:dims]:
            raise ValueError(f"bad wind key {key!r}")
        l, a = int(parts[1]) - 1, "xyz".index(parts[2])
        if not 0 <= l < dims:
            raise ValueError(f"bad wind component in {key!r}")
        wind[l][a] = kv.pop(key)
        seen[l] = True
    for l in range(dims):
        if not seen[l]:
            wind[l][0] = "const:0"
    for key in [k for k in kv if k.startswith("bc.")]:
        bc[key[3:]] = kv.pop(key)
    lengths = _floats(kv.pop("lengths")) if "lengths" in kv else None
    n_ratio = tuple(int(v) for v in kv.pop("n_ratio").split(",")) if "n_ratio" in kv else None
    spec = ProblemSpec(
        id=kv.pop("id", "custom"),
        dims=dims,
        wind=tuple(tuple(c) for c in wind),
        eps=eps,
        n=n,
        route=kv.pop("route", "fgmres+kpik-precond"),
        tol=float(kv.pop("tol", "1e-8")),
        f=float(kv.pop("f", "0")),
        bc=bc,
        lengths=lengths,
        n_ratio=n_ratio,
        layout=kv.pop("layout", None),
        corners=kv.pop("corners", "strict"),
        description=kv.pop("description", ""),
    )
    if kv:
        raise ValueError(f"unknown keys {sorted(kv)}")
    return spec


def load(path) -> ProblemSpec:
    return loads(Path(path).read_text())


def dump(spec: ProblemSpec, path) -> None:
    Path(path).write_text(dumps(spec))
