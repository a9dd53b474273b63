"""Suite reports, OBJ export, and the problem-file solve driver."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import minkowski as mink
from .epstein import epstein_surface, fundamental_forms
from .errors import ConfigInvalid, IoError, NewtonDiverged, NotElliptic, PositivityLost
from .grid import (ConformalMetric, GridChart, ScalarField, SymTensor2Field,
                   flat_metric, fuchsian_disk_metric, square_chart, torus_chart,
                   write_scalar_csv)
from .weingarten import (MAProblem, NewtonConfig, WeingartenCoeffs,
                         ma_newton_solve, verify_solution_geometrically)


@dataclass(frozen=True)
class SuiteCheck:
    """One verification check with its identity anchor and tolerance."""

    name: str
    anchor: str
    residual: float
    tolerance: float
    convergence_order: float | None = None
    order_window: tuple | None = None

    @property
    def passed(self):
        ok = self.residual <= self.tolerance
        if self.convergence_order is not None and self.order_window is not None:
            lo, hi = self.order_window
            ok = ok and lo <= self.convergence_order <= hi
        return bool(ok)

    def to_dict(self):
        d = {"name": self.name, "anchor": self.anchor,
             "residual": float(self.residual), "tolerance": float(self.tolerance),
             "pass": self.passed}
        if self.convergence_order is not None:
            d["convergence_order"] = float(self.convergence_order)
        return d


@dataclass
class SuiteReport:
    suite: str
    config: dict
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, *args, **kwargs):
        self.checks.append(SuiteCheck(*args, **kwargs))

    def to_dict(self):
        checks = sorted((c.to_dict() for c in self.checks), key=lambda d: d["name"])
        return {"suite": self.suite, "config": self.config,
                "checks": checks, "pass": self.passed}

    def write(self, path):
        with open(path, "w", encoding="ascii") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def summary_lines(self):
        for c in sorted(self.checks, key=lambda c: c.name):
            status = "PASS" if c.passed else "FAIL"
            order = (f" order={c.convergence_order:.2f}"
                     if c.convergence_order is not None else "")
            yield (f"[{status}] {c.name}: residual={c.residual:.3e} "
                   f"tol={c.tolerance:.3e}{order}  ({c.anchor})")


# ---------------------------------------------------------------------------
# OBJ export


def export_obj(surface, path):
    """Write the surface as OBJ in Poincare-ball coordinates.

    Vertices are the valid nodes; each grid quad with four valid corners is
    split into two triangles.  Returns (vertex_count, face_count).
    """
    valid = surface.valid
    ny, nx = valid.shape
    index = -np.ones((ny, nx), dtype=int)
    coords = mink.to_poincare_ball(surface.points)
    try:
        with open(path, "w", encoding="ascii") as fh:
            count = 0
            for j in range(ny):
                for i in range(nx):
                    if valid[j, i]:
                        index[j, i] = count
                        count += 1
                        x, y, z = coords[j, i]
                        fh.write(f"v {x!r} {y!r} {z!r}\n")
            faces = 0
            for j in range(ny - 1):
                for i in range(nx - 1):
                    corners = index[j, i], index[j, i + 1], index[j + 1, i + 1], index[j + 1, i]
                    if all(c >= 0 for c in corners):
                        a, b, c, d = (c + 1 for c in corners)
                        fh.write(f"f {a} {b} {c}\n")
                        fh.write(f"f {a} {c} {d}\n")
                        faces += 2
    except OSError as exc:
        raise IoError(f"cannot write OBJ to {path}: {exc}") from exc
    return count, faces


def load_obj_vertices(path):
    verts = []
    try:
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                if line.startswith("v "):
                    verts.append([float(t) for t in line.split()[1:4]])
    except OSError as exc:
        raise IoError(f"cannot read OBJ from {path}: {exc}") from exc
    return np.asarray(verts)


# ---------------------------------------------------------------------------
# problem files


def _chart_from_config(cfg):
    try:
        boundary = cfg.get("boundary", "dirichlet-margin")
        if boundary == "periodic":
            return torus_chart(int(cfg["n"]), periods=(float(cfg.get("period", 1.0)),) * 2)
        return square_chart(int(cfg["n"]), float(cfg["half_width"]),
                            center=complex(cfg.get("center", "0")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad chart config: {exc}") from exc


def _holomorphic_poly(zz, rng, degree=3, amplitude=1.0):
    coeffs = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
    out = np.zeros_like(zz, dtype=complex)
    for k, ck in enumerate(coeffs):
        out = out + ck * zz**k
    scale = np.abs(out).max()
    return amplitude * out / (scale if scale > 0 else 1.0)


def build_base(base_cfg, chart, seed):
    """Base data (I* metric, II* tensor) from a problem-file base block."""
    kind = base_cfg.get("kind")
    rng = np.random.default_rng(int(base_cfg.get("seed", seed)))
    if kind == "fuchsian":
        h = fuchsian_disk_metric(chart)
        istar = ConformalMetric("flat", h.flat_log_factor())
        iistar = istar.metric_tensor()
        amp = float(base_cfg.get("perturb_amplitude", 0.0))
        if amp:
            q = _holomorphic_poly(chart.zz(), rng, amplitude=amp)
            iistar = iistar + SymTensor2Field.from_components(
                chart, q.real, -q.imag, -q.real)
        return istar, iistar
    if kind == "umbilic":
        lam = float(base_cfg.get("lam", 1.0))
        noise = float(base_cfg.get("noise", 0.0))
        istar = flat_metric(chart, float(base_cfg.get("u0", 0.0)))
        zz = chart.zz()
        bump = np.zeros(chart.shape)
        if noise:
            for _ in range(3):
                kx, ky = rng.integers(1, 4, size=2)
                ph = rng.uniform(0, 2 * np.pi)
                bump += rng.standard_normal() * np.sin(
                    2 * np.pi * kx * zz.real + ph) * np.cos(2 * np.pi * ky * zz.imag)
            bump *= noise / max(np.abs(bump).max(), 1e-30)
        factor = lam * (1.0 + bump)
        gt = istar.metric_tensor()
        iistar = SymTensor2Field.from_components(
            chart, factor * gt.t11, factor * gt.t12, factor * gt.t22)
        return istar, iistar
    if kind == "file":
        from .grid import read_scalar_csv, read_tensor_csv
        try:
            u = read_scalar_csv(base_cfg["istar_u_csv"])
            iistar = read_tensor_csv(base_cfg["iistar_csv"])
        except (KeyError, OSError, ValueError) as exc:
            raise ConfigInvalid(f"bad file base: {exc}") from exc
        return ConformalMetric("flat", u), iistar
    raise ConfigInvalid(f"unknown base kind {kind!r}")


def load_problem(path, seed=0):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot parse problem file {path}: {exc}") from exc
    try:
        a, b, c = (float(v) for v in cfg["coeffs"])
        coeffs = WeingartenCoeffs(a, b, c)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad coeffs: {exc}") from exc
    chart = _chart_from_config(cfg.get("chart", {}))
    istar, iistar = build_base(cfg.get("base", {}), chart, seed)
    problem = MAProblem(istar, iistar, coeffs,
                        boundary_value=float(cfg.get("boundary_value", 0.0)))
    newton_cfg = cfg.get("newton", {})
    newton = NewtonConfig(tol=float(newton_cfg.get("tol", 1e-11)),
                          max_iter=int(newton_cfg.get("max_iter", 25)))
    return problem, newton, cfg


def _as_dirichlet(chart):
    """Same nodes with dirichlet-margin differences (for rebuilding surfaces
    of solutions obtained on periodic charts)."""
    if not chart.periodic:
        return chart
    return GridChart(nx=chart.nx, ny=chart.ny, x0=chart.x0, y0=chart.y0,
                     dx=chart.dx, dy=chart.dy, boundary_kind="dirichlet-margin")


def solve_problem_files(path, out_dir=None, seed=0):
    """Drive a problem file end to end; returns (report_dict, exit_code).

    Exit codes: 0 ok, 2 config, 3 not elliptic, 4 diverged, 5 positivity lost.
    """
    try:
        problem, newton, cfg = load_problem(path, seed)
    except ConfigInvalid as exc:
        return {"error": str(exc)}, 2

    out_dir = out_dir or cfg.get("out_dir") or os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)

    try:
        sol = ma_newton_solve(problem, newton)
    except NotElliptic as exc:
        return {"error": str(exc)}, 3
    except NewtonDiverged as exc:
        return {"error": str(exc), "trace": exc.trace}, 4

    report = {
        "problem": os.path.basename(path),
        "coeffs": [problem.coeffs.a, problem.coeffs.b, problem.coeffs.c],
        "newton_trace": [float(r) for r in sol.newton_trace],
        "final_residual": float(sol.newton_trace[-1]),
        "positivity_certificate": float(sol.positivity_certificate),
        "pinned_mean": sol.pinned,
    }

    u_path = os.path.join(out_dir, "solution_u.csv")
    write_scalar_csv(sol.u, u_path)
    report["solution_csv"] = u_path

    if not sol.accepted:
        report["error"] = "positivity certificate failed (flagged, not accepted)"
        report_path = os.path.join(out_dir, "report.json")
        _write_json(report, report_path)
        return report, 5

    chart = _as_dirichlet(problem.chart)
    metric = ConformalMetric("flat", ScalarField(
        chart, problem.istar.flat_log_factor().values + sol.u.values))
    surf = epstein_surface(metric)
    geo_problem = MAProblem(ConformalMetric("flat", ScalarField(
        chart, problem.istar.flat_log_factor().values)),
        SymTensor2Field(chart, problem.iistar.values), problem.coeffs,
        problem.boundary_value)
    geo = verify_solution_geometrically(
        type(sol)(u=ScalarField(chart, sol.u.values), newton_trace=sol.newton_trace,
                  positivity_certificate=sol.positivity_certificate,
                  accepted=sol.accepted, pinned=sol.pinned), geo_problem)
    report["geometry"] = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                          for k, v in geo.items()}

    obj_path = os.path.join(out_dir, "surface.obj")
    nverts, nfaces = export_obj(surf, obj_path)
    report["surface_obj"] = obj_path
    report["surface_counts"] = [nverts, nfaces]

    report_path = os.path.join(out_dir, "report.json")
    _write_json(report, report_path)
    return report, 0


def _write_json(data, path):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
