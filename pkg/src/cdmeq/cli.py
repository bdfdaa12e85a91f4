"""Command-line harness: ``cdmeq solve | bench | oracle``.

Exit status is 0 on success, 1 when a solver fails and 2 for invalid
arguments (unknown problem or method, unreadable spec, unwritable output).
"""
from __future__ import annotations

import argparse
import io
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .discretize import Grid, SeparableWind, assemble_2d, assemble_3d, assemble_3d_zsplit, kron_expand
from .krylov import SolveReport
from .problems import catalog, get_problem, load
from .routes import METHODS, canonical_method, default_method, solve_problem

__all__ = ["TableDef", "TABLES", "plan_table", "run_table", "emit_csv", "format_csv", "kron_oracle", "main"]

log = logging.getLogger("cdmeq")

CSV_HEADER = "problem,eps,nx,ny,nz,method,outer_iters,inner_iters,relres,setup_ms,solve_ms"
BASELINES = ("gmres-unprec", "direct-kron")


@dataclass(frozen=True)
class TableDef:
    """Grid/viscosity/method matrix of one result table."""

    problems: tuple[str, ...]
    methods: tuple[str, ...]
    n_paper: tuple[int, ...]
    n_desk: tuple[int, ...]
    n_smoke: tuple[int, ...]


TABLES = {
    1: TableDef(("ex1", "ex1-rect"), ("direct-sylvester", "direct-kron"),
                (65, 129, 257, 513, 1025), (65, 129, 257, 513), (16, 32)),
    2: TableDef(("ex3",), ("kpik-solver", "gmres-unprec", "direct-kron"),
                (129, 257, 513, 1025, 1200), (129, 257, 513), (16, 32)),
    3: TableDef(("ex_ifiss",), ("fgmres+kpik", "gmres-unprec", "direct-kron"),
                (129, 257, 513, 1025), (129, 257), (16, 32)),
    4: TableDef(("ex_er",), ("fgmres+kpik", "gmres-unprec", "direct-kron"),
                (128, 256, 512, 1024, 2048), (128, 256), (16, 32)),
    5: TableDef(("ex_3d_solve",), ("kpik-solver", "gmres-unprec"),
                (50, 60, 70, 80, 90, 100), (50, 60), (6, 8)),
    6: TableDef(("ex_3d_prec",), ("fgmres+kpik", "gmres-unprec"),
                (50, 60, 70, 80, 90, 100), (50, 60), (6, 8)),
}


def plan_table(table: int, scale: str = "desk") -> list[tuple[str, float, int, str]]:
    """Cells ``(problem, eps, n, method)`` in output order.

    Rows follow catalog order, then decreasing viscosity, then increasing
    ``n``, then the table's method order.
    """
    t = TABLES[table]
    sizes = {"paper": t.n_paper, "desk": t.n_desk, "smoke": t.n_smoke}[scale]
    order = {s.id: i for i, s in enumerate(catalog())}
    order["ex1-rect"] = order["ex1"] + 0.5
    cells = []
    for pid in sorted(t.problems, key=order.__getitem__):
        spec = get_problem(pid)
        for eps in sorted(spec.eps, reverse=True):
            for n in sorted(sizes):
                for m in t.methods:
                    cells.append((pid, eps, n, m))
    return cells


def run_table(table: int, scale: str = "desk") -> list[SolveReport]:
    reports = []
    for pid, eps, n, m in plan_table(table, scale):
        log.info("table %d: %s eps=%g n=%d %s", table, pid, eps, n, m)
        _, rep = solve_problem(get_problem(pid), eps, n, m)
        reports.append(rep)
    return reports


def _g(x: float) -> str:
    return f"{x:.6g}"


def format_csv(reports: Sequence[SolveReport], timing: bool = True) -> str:
    if not reports:
        raise ValueError("no reports to write")
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in reports:
        n = list(r.n) + [""] * (3 - len(r.n))
        ms = (r.setup_ms, r.solve_ms) if timing else (0, 0)
        fields = [r.problem, _g(r.eps), *map(str, n), r.method, str(r.iterations),
                  str(r.inner_iterations), _g(r.residual), str(ms[0]), str(ms[1])]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def emit_csv(reports: Sequence[SolveReport], path, timing: bool = True) -> None:
    """Write reports as CSV; ``timing=False`` zeroes the timing columns."""
    Path(path).write_text(format_csv(reports, timing))


# ----------------------------------------------------------------------------
# Kronecker oracle
# ----------------------------------------------------------------------------


def _random_factor(rng):
    c = rng.standard_normal(3)
    return lambda t, c=c: c[0] + c[1] * t + c[2] * t**2


def _random_wind(dims: int, rng) -> SeparableWind:
    return SeparableWind(tuple(tuple(_random_factor(rng) for _ in range(dims)) for _ in range(dims)))


def kron_deviation(eq, rng, samples: int = 1) -> float:
    """Max of ``||vec(sum L U R) - A vec(U)|| / (||A||_F ||U||_F)`` over random ``U``."""
    a, _ = kron_expand(eq)
    a_norm = a.frobenius_norm()
    worst = 0.0
    for _ in range(samples):
        u = rng.standard_normal(eq.shape)
        lhs = eq.apply(u).reshape(-1, order="F")
        rhs = a @ u.reshape(-1, order="F")
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / (a_norm * np.linalg.norm(u))))
    return worst


def kron_oracle(n: int, winds: int = 20, seed: int = 0) -> dict[str, float]:
    """Largest deviation per layout over random separable winds and viscosities."""
    rng = np.random.default_rng(seed)
    out = {"2d": 0.0, "3d-tall": 0.0, "3d-zsplit": 0.0}
    for _ in range(winds):
        eps = float(rng.uniform(0.01, 1.0))
        w2, w3 = _random_wind(2, rng), _random_wind(3, rng)
        g2, g3 = Grid.uniform(n, 2), Grid.uniform(n, 3)
        out["2d"] = max(out["2d"], kron_deviation(assemble_2d(g2, w2, eps), rng))
        out["3d-tall"] = max(out["3d-tall"], kron_deviation(assemble_3d(g3, w3, eps), rng))
        out["3d-zsplit"] = max(out["3d-zsplit"], kron_deviation(assemble_3d_zsplit(g3, w3, eps), rng))
    return out


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdmeq", description="Matrix-equation solvers for convection-diffusion problems.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one problem instance")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help="catalog id (" + ", ".join([c.id for c in catalog()] + ["ex1-rect"]) + ")")
    src.add_argument("--spec", help="problem file in key = value format")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--ny", type=int)
    s.add_argument("--nz", type=int)
    s.add_argument("--method", help="one of: " + ", ".join(METHODS) + " (default: the problem's route)")
    s.add_argument("--tol", type=float)
    s.add_argument("--out", help="write CSV here instead of stdout")
    s.add_argument("--no-timing", action="store_true", help="write zeros in the timing columns")

    b = sub.add_parser("bench", help="run the cells of one result table")
    b.add_argument("--table", type=int, choices=sorted(TABLES), required=True)
    b.add_argument("--scale", choices=("desk", "paper", "smoke"), default="desk")
    b.add_argument("--out", required=True)
    b.add_argument("--no-timing", action="store_true", help="write zeros in the timing columns")

    o = sub.add_parser("oracle", help="check multiterm operators against their Kronecker form")
    o.add_argument("--n", type=int, default=6)
    o.add_argument("--winds", type=int, default=20)
    o.add_argument("--seed", type=int, default=0)
    return p


def _check_writable(path: str) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write to {path}")


def _cmd_solve(args) -> int:
    try:
        spec = load(args.spec) if args.spec else get_problem(args.problem)
        method = canonical_method(args.method) if args.method else default_method(spec)
        if args.out:
            _check_writable(args.out)
    except (KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else exc
        print(f"cdmeq: {msg}", file=sys.stderr)
        return 2
    _, rep = solve_problem(spec, args.eps, args.n, method, args.tol, args.ny, args.nz)
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        emit_csv([rep], args.out, timing=not args.no_timing)
    else:
        sys.stdout.write(format_csv([rep], timing=not args.no_timing))
    return 0 if rep.converged else 1


def _cmd_bench(args) -> int:
    try:
        _check_writable(args.out)
    except OSError as exc:
        print(f"cdmeq: {exc}", file=sys.stderr)
        return 2
    reports = run_table(args.table, args.scale)
    emit_csv(reports, args.out, timing=not args.no_timing)
    # baselines are allowed to miss the tolerance; the table records it
    failed = [r for r in reports if not r.converged and r.method not in BASELINES]
    for r in failed:
        print(f"failed: {r.problem} eps={r.eps:g} n={r.n} {r.method}: {'; '.join(r.warnings[-1:])}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_oracle(args) -> int:
    dev = kron_oracle(args.n, args.winds, args.seed)
    for layout, d in dev.items():
        print(f"{layout:10s} max relative deviation {d:.3e}")
    return 0 if max(dev.values()) <= 1e-13 else 1


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = int(os.environ.get("CDMEQ_THREADS", "1"))
    except ValueError:
        print("cdmeq: CDMEQ_THREADS must be an integer", file=sys.stderr)
        return 2
    handler = {"solve": _cmd_solve, "bench": _cmd_bench, "oracle": _cmd_oracle}[args.command]
    with threadpool_limits(limits=max(1, threads)):
        return handler(args)


if __name__ == "__main__":
    sys.exit(main())
