"""Command-line entry points.

    epstein-lab verify <suite> [--grid N] [--tol X] [--out path]
    epstein-lab epstein --metric <builtin|csv> --out mesh.obj
    epstein-lab solve <problem.json>
    epstein-lab foliation --tau <c> --slope p/q [--weight w]
    epstein-lab schwarzian --map <name>

The seed for pseudo-random test families comes from EPSTEIN_LAB_SEED
(default 1234), overridable per command with --seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import foliation as fo
from .epstein import epstein_surface
from .errors import ConfigInvalid, EpsteinLabError, UnknownSuite
from .grid import (ConformalMetric, disk_chart, flat_metric, fuchsian_disk_metric,
                   poincare_metric, read_scalar_csv, spherical_metric, square_chart)
from .maps import map_from_name
from .report import export_obj, solve_problem_files
from .schwarzian import nehari_ratio, schwarzian_derivative
from .suites import run_suite


def _default_seed():
    return int(os.environ.get("EPSTEIN_LAB_SEED", "1234"))


def _cmd_verify(args):
    cfg = {"grid": args.grid, "seed": args.seed}
    if args.tol is not None:
        cfg["tol_override"] = args.tol
    try:
        report = run_suite(args.suite, cfg)
    except (UnknownSuite, ConfigInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.summary_lines():
        print(line)
    print(f"suite {report.suite}: {'PASS' if report.passed else 'FAIL'}")
    if args.out:
        report.write(args.out)
        print(f"report written to {args.out}")
    return 0 if report.passed else 1


def _metric_from_spec(spec, grid_n, half_width):
    if spec.endswith(".csv"):
        u = read_scalar_csv(spec)
        return ConformalMetric("flat", u)
    chart = square_chart(grid_n, half_width)
    if spec.startswith("flat"):
        u0 = float(spec.split(":", 1)[1]) if ":" in spec else 0.0
        return flat_metric(chart, u0)
    table = {
        "fuchsian": fuchsian_disk_metric,
        "poincare": poincare_metric,
        "spherical": spherical_metric,
    }
    if spec not in table:
        raise ConfigInvalid(f"unknown metric {spec!r}; builtins flat[:u0], "
                            "fuchsian, poincare, spherical, or a scalar CSV path")
    return table[spec](chart)


def _cmd_epstein(args):
    try:
        metric = _metric_from_spec(args.metric, args.grid, args.half_width)
    except (ConfigInvalid, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    surf = epstein_surface(metric)
    nverts, nfaces = export_obj(surf, args.out)
    print(f"wrote {args.out}: {nverts} vertices, {nfaces} faces")
    return 0


def _cmd_solve(args):
    report, code = solve_problem_files(args.problem, out_dir=args.out_dir,
                                       seed=args.seed)
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
    else:
        geo = report.get("geometry", {})
        print(f"solved {args.problem}: final residual {report['final_residual']:.3e}, "
              f"|aK_e + bH + c| = {geo.get('weingarten_sup', float('nan')):.3e}")
        print(f"artifacts: {report['solution_csv']}, {report['surface_obj']}")
    return code


def _parse_slope(text):
    p, _, q = text.partition("/")
    return int(p), int(q or "1")


def _cmd_foliation(args):
    tau = complex(args.tau)
    p, q = _parse_slope(args.slope)
    if math.gcd(p, q) != 1:
        print("error: slope p/q must be coprime", file=sys.stderr)
        return 2
    f = fo.SlopeFoliation(p, q, args.weight)
    m = fo.TorusModulus(tau)
    ext = fo.extremal_length(f, m)
    energy = fo.foliation_energy(f, m)
    resid = fo.gardiner_residual(f, m, direction=0.6 + 0.3j, eps=1e-4)
    print("p,q,w,tau,ext,E,gardiner_residual")
    print(f"{p},{q},{args.weight!r},{tau},{ext!r},{energy!r},{resid:.3e}")
    return 0


def _cmd_schwarzian(args):
    try:
        f = map_from_name(args.map)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    chart = disk_chart(args.grid, 0.8)
    q = schwarzian_derivative(f, chart)
    print(f"map {f.name}: sup |S(f)| on |z|<=0.8 is {q.abs_sup(1):.6e}, "
          f"holomorphy residual {q.holomorphy_residual():.3e}")
    full = disk_chart(args.grid, 1.0)
    out = nehari_ratio(f, full)
    print(f"nehari ratio sup |S|/rho = {out['ratio']:.6f} "
          f"({'PASS' if out['passes'] else 'FAIL'} against 3/2), "
          f"attained near z = {out['argmax']:.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="epstein-lab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=_default_seed(),
                        help="seed for pseudo-random test families")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", help="schwarzian | epstein | duality | conformal-change"
                                 " | weingarten | foliation | all")
    p.add_argument("--grid", type=int, default=61)
    p.add_argument("--tol", type=float, default=None,
                   help="override every check tolerance (negative controls)")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("epstein", help="export an envelope surface as OBJ")
    p.add_argument("--metric", required=True,
                   help="flat[:u0] | fuchsian | poincare | spherical | <u.csv>")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=81)
    p.add_argument("--half-width", type=float, default=0.5)
    p.set_defaults(func=_cmd_epstein)

    p = sub.add_parser("solve", help="solve a Monge-Ampere problem file")
    p.add_argument("problem")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("foliation", help="extremal length table for a torus foliation")
    p.add_argument("--tau", required=True, help="torus modulus, e.g. 0.3+1.2j")
    p.add_argument("--slope", required=True, help="p/q")
    p.add_argument("--weight", type=float, default=1.0)
    p.set_defaults(func=_cmd_foliation)

    p = sub.add_parser("schwarzian", help="Schwarzian report for a built-in map")
    p.add_argument("--map", required=True)
    p.add_argument("--grid", type=int, default=201)
    p.set_defaults(func=_cmd_schwarzian)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EpsteinLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
