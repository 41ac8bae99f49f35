"""Command-line interface (``isagpe``)."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .bench import FIG2_NS, FIG2_XBARS, cell_rows, cubic_problem, hausdorff_rows, iteration_rows
from .errors import BudgetExceeded, IsaError
from .interval import Interval
from .problem import DEFAULT_CASE_DOMAIN, ProblemError, case_study, load_problem
from .setinv import ENGINES, solve


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _g17(v):
    if isinstance(v, float):
        return float(f"{v:.17g}")
    return v


def _write_csv(rows, header, out):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.17g}" if isinstance(v, float) else ("" if v is None else v) for v in row])


@click.group()
def main():
    """Interval superposition arithmetic and guaranteed parameter estimation."""


@main.command("solve")
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--engine", type=click.Choice(ENGINES), default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--grid-N", "grid_n", type=int, default=None, help="ISM grid resolution per coordinate.")
@click.option("--budget", type=int, default=None, help="Maximum number of dequeued boxes.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def solve_cmd(problem, engine, epsilon, grid_n, budget, out_dir):
    """Compute inner and boundary subpavings of the feasible parameter set."""
    try:
        p = load_problem(problem, engine=engine, epsilon=epsilon, N=grid_n, budget=budget)
    except (ProblemError, IsaError, ValueError, OSError) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    code = 0
    try:
        sp = solve(p)
    except BudgetExceeded as err:
        click.echo(f"warning: {err}; writing partial subpaving", err=True)
        sp, code = err.partial, 2
    sp = sp.canonical()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "subpaving.json").write_text(json.dumps(sp.to_json(), indent=1) + "\n")
    (out / "subpaving.csv").write_text(sp.to_csv())
    stats = {k: _g17(v) for k, v in sp.stats.items()}
    (out / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
    click.echo(
        f"{stats['engine']}: {stats['iterations']} iterations, "
        f"{stats['interior_count']} interior, {stats['boundary_count']} boundary boxes"
    )
    sys.exit(code)


@main.command("bench-hausdorff")
@click.option("--N", "ns", default=",".join(map(str, FIG2_NS)), show_default=True, help="Comma-separated grid sizes.")
@click.option("--xbar2", "xbars", default=",".join(map(str, FIG2_XBARS)), show_default=True)
@click.option("--samples", default=400, show_default=True, help="Samples per coordinate for the range oracle.")
@click.option("--out", type=click.File("w"), default="-")
def bench_hausdorff(ns, xbars, samples, out):
    """Overestimation of exp(sin(x1) + sin(x2)cos(x2)) over [0,1] x [0,xbar2] as CSV."""
    _write_csv(hausdorff_rows(_ints(ns), _floats(xbars), samples), ["N", "xbar2", "d_H"], out)


@main.command("bench-iterations")
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--epsilon", "epsilons", default="0.01,0.001", show_default=True)
@click.option("--N", "ns", default="2,10,20", show_default=True)
@click.option("--out", type=click.File("w"), default="-")
def bench_iterations(problem, epsilons, ns, out):
    """Iterations and run time of SIVIA and the ISM engine against epsilon as CSV."""
    try:
        p = load_problem(problem)
    except (IsaError, ValueError, OSError) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    rows = iteration_rows(p, _floats(epsilons), _ints(ns))
    _write_csv(rows, ["engine", "N", "epsilon", "iterations", "boundary_count", "wall_ms"], out)


@main.command("cells")
@click.option("--N", "n", default=20, show_default=True)
@click.option("--y", "y", default="-2,2", show_default=True, help="Measurement interval lo,hi.")
@click.option("--half-width", default=3.0, show_default=True)
@click.option("--out", type=click.File("w"), default="-")
def cells(n, y, half_width, out):
    """One ISM pass classifying every cell of x1^3 + x2^3 over a square domain."""
    lo, hi = _floats(y)
    p = cubic_problem(n, half_width, Interval(lo, hi))
    _write_csv(cell_rows(p), ["class", "lo_1", "hi_1", "lo_2", "hi_2"], out)


@main.command("generate-case-study")
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--digits", default=3, show_default=True, help="Significant digits of each measurement.")
@click.option("--eta", default=1e-3, show_default=True)
@click.option("--epsilon", default=1e-2, show_default=True)
@click.option("--engine", type=click.Choice(ENGINES), default="sivia", show_default=True)
@click.option("--grid-N", "grid_n", default=2, show_default=True)
def generate_case_study(out_path, digits, eta, epsilon, engine, grid_n):
    """Write the two-parameter kinetics estimation problem with 15 measurements."""
    doc = case_study(digits=digits, eta=eta, domain=DEFAULT_CASE_DOMAIN, epsilon=epsilon, engine=engine, N=grid_n)
    Path(out_path).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
