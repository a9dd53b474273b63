"""Schwarzian derivative of holomorphic maps, Schwarzian tensor, Nehari ratio.

The sign and direction conventions: the quadratic differential attached to a
projective structure is the Schwarzian of the holomorphic map from the
structure to its uniformized model, and the tensor generalization is
B(g, e^{2u} g) = (Hess_g(u) - du o du)_0, traceless with respect to g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid
from .errors import CriticalPoint
from .grid import (ConformalMetric, ScalarField, SymTensor2Field, flat_metric,
                   grad_components, hessian_conformal, sup_interior,
                   tensor_norm, traceless_part)
from .maps import compose, sampled_map


@dataclass(frozen=True)
class QuadDiffField:
    """Complex field g(z) representing the quadratic differential g dz^2."""

    chart: object
    values: np.ndarray
    closed_form: object = None  # optional callable z -> g(z)

    def holomorphy_residual(self, depth=1):
        """sup |dbar g| = sup (1/2)|d_x g + i d_y g| by finite differences."""
        gx_r, gy_r = grad_components(self.values.real, self.chart)
        gx_i, gy_i = grad_components(self.values.imag, self.chart)
        dbar = 0.5 * np.abs((gx_r + 1j * gx_i) + 1j * (gy_r + 1j * gy_i))
        return sup_interior(dbar, self.chart, depth)

    def real_part_tensor(self):
        """Re(g dz^2) as a symmetric 2-tensor: (Re g, -Im g, -Re g)."""
        return SymTensor2Field.from_components(
            self.chart, self.values.real, -self.values.imag, -self.values.real)

    def abs_sup(self, depth=0):
        return sup_interior(np.abs(self.values), self.chart, depth)


def schwarzian_values(f, z):
    """S(f)(z) = f'''/f' - (3/2)(f''/f')^2 from the map's evaluators."""
    _, f1, f2, f3 = f.derivatives(z)
    fp = np.asarray(f1)
    if np.any((np.abs(fp) < 1e-13) & np.isfinite(fp.real)):
        raise CriticalPoint(np.asarray(z)[np.abs(fp) < 1e-13])
    ratio = f2 / f1
    return f3 / f1 - 1.5 * ratio * ratio


def schwarzian_derivative(f, chart):
    """Schwarzian derivative of f on the chart as a QuadDiffField."""
    zz = chart.zz()
    vals = np.asarray(schwarzian_values(f, zz), dtype=complex)
    if chart.mask is not None:
        vals = vals.copy()
        vals[~chart.mask] = np.nan
    return QuadDiffField(chart, vals, closed_form=lambda z: schwarzian_values(f, z))


def cocycle_residual(f, g, chart, via="closed", depth=2):
    """sup |S(g o f) - (S(g) o f) (f')^2 - S(f)| over the chart interior.

    ``via="closed"`` evaluates the composite's Schwarzian through the chain
    rule (round-off level); ``via="sampled"`` recomputes it from grid samples
    of g o f, which carries the second-order stencil error of the sampled
    third derivative and is the route used for convergence studies.
    """
    zz = chart.zz()
    comp = compose(g, f)
    if via == "sampled":
        comp = sampled_map(comp.f, chart)
    lhs = schwarzian_values(comp, zz)
    rhs = schwarzian_values(g, f.f(zz)) * f.f1(zz) ** 2 + schwarzian_values(f, zz)
    return sup_interior(np.abs(lhs - rhs), chart, depth)


def schwarzian_tensor(g, u):
    """Tensor B(g, e^{2u} g) = (Hess_g(u) - du o du)_0, traceless for g."""
    chart = g.chart
    chart.require_same(u.chart)
    hess = hessian_conformal(g, u)
    ux, uy = grad_components(u.values, chart)
    dudu = SymTensor2Field.from_components(chart, ux * ux, ux * uy, uy * uy)
    return traceless_part(hess - dudu, g)


def bbar_tensor(g, u):
    """Non trace-free variant: Hess_g(u) - du o du + (1/2) |du|_g^2 g."""
    chart = g.chart
    chart.require_same(u.chart)
    hess = hessian_conformal(g, u)
    ux, uy = grad_components(u.values, chart)
    dudu = SymTensor2Field.from_components(chart, ux * ux, ux * uy, uy * uy)
    w = g.flat_log_factor().values
    norm2 = np.exp(-2.0 * w) * (ux * ux + uy * uy)
    return hess - dudu + g.metric_tensor().scaled(0.5 * norm2)


def schwarzian_vs_derivative_residual(f, chart, depth=2):
    """sup-norm of B(flat, f* flat) - Re S(f), with pullback factor u = log|f'|."""
    zz = chart.zz()
    f.check_noncritical(zz)
    u = ScalarField(chart, np.log(np.abs(f.f1(zz))))
    tensor = schwarzian_tensor(flat_metric(chart), u)
    target = schwarzian_derivative(f, chart).real_part_tensor()
    target0 = traceless_part(target, flat_metric(chart))
    return (tensor - target0).sup(depth)


def cocycle_tensor_residual(g, u, v, depth=2):
    """sup |B(g, e^{2u+2v}g) - B(g, e^{2u}g) - B(e^{2u}g, e^{2u+2v}g)|."""
    lhs = schwarzian_tensor(g, u + v)
    rhs = schwarzian_tensor(g, u) + schwarzian_tensor(g.conformal(u), v)
    return (lhs - rhs).sup(depth)


def diffeo_naturality_residual(g, gprime_u, a, b, depth=2):
    """Naturality under the affine chart map phi(z) = a z + b, a real, a != 0.

    Compares B(phi*g, phi*g') with phi*B(g, g') sampled on the pulled-back
    chart; both sides are assembled from closed conformal factors so the
    residual is stencil-level.
    """
    chart = g.chart
    # phi* e^{2w(z)}|dz|^2 = e^{2 w(phi(z))} a^2 |dz|^2
    src = grid.GridChart(nx=chart.nx, ny=chart.ny,
                         x0=(chart.x0 - b.real) / a, y0=(chart.y0 - b.imag) / a,
                         dx=chart.dx / a, dy=chart.dy / a,
                         boundary_kind=chart.boundary_kind)
    phi_zz = a * src.zz() + b

    w = g.flat_log_factor()
    interp_w = ScalarField(src, _resample_exact(w.values, chart, phi_zz))
    pulled_g = ConformalMetric("flat", interp_w + np.log(abs(a)))
    pulled_u = ScalarField(src, _resample_exact(gprime_u.values, chart, phi_zz))

    lhs = schwarzian_tensor(pulled_g, pulled_u)
    rhs_src = schwarzian_tensor(g, gprime_u)
    rhs = SymTensor2Field(src, _resample_exact(rhs_src.values, chart, phi_zz) * a * a)
    return (lhs - rhs).sup(depth)


def _resample_exact(values, chart, zz):
    """Node-exact lookup of values at coordinates zz that land on chart nodes."""
    ii = np.rint((zz.real - chart.x0) / chart.dx).astype(int)
    jj = np.rint((zz.imag - chart.y0) / chart.dy).astype(int)
    if not (np.abs(chart.x0 + ii * chart.dx - zz.real) < 1e-9 * chart.dx).all():
        raise ValueError("affine map must send nodes to nodes for this check")
    return values[jj, ii]


def nehari_ratio(f, chart, margin_factor=5.0, tol=1e-9):
    """sup over the disk chart of |S(f)| / rho, rho = 4/(1-|z|^2)^2.

    The certificate passes when the ratio stays below 3/2; a strip of width
    margin_factor * dx at the rim is excluded to keep boundary stencils out
    of the holomorphy diagnostics.  Univalence of f is the caller's claim;
    a violation shows up as a ratio above 3/2.
    """
    zz = chart.zz()
    r = np.abs(zz)
    keep = r <= 1.0 - margin_factor * chart.dx
    mask = keep & chart.included()
    q = schwarzian_derivative(f, chart)
    rho = 4.0 / (1.0 - r**2) ** 2
    ratio = np.abs(q.values) / rho
    ratio = np.where(mask, ratio, np.nan)
    sup = float(np.nanmax(ratio))
    return {"ratio": sup, "passes": sup <= 1.5 + tol,
            "argmax": complex(zz[np.unravel_index(np.nanargmax(ratio), ratio.shape)])}
