"""Surfaces in the space of horospheres and their duality with envelope data.

A conformal metric g embeds isometrically in the light cone as the section
sigma = e^w l(z); its induced metric is g.  The dual surface of the envelope
surface of h is the section through x + N = sigma/incidence, whose embedded
metric is 2h.  The second fundamental form of an embedded metric g is the
closed form

    II*_c(g) = Hess_{h_S}(w) - dw o dw + (1/2)|dw|^2 h_S + (1/2)(e^{2w} - 1) h_S

from the spherical base h_S = e^{2w} ... g, which is the totally geodesic
case II*_c(h_S) = 0 integrated along conformal rays; the cocycle property of
the non-traceless Schwarzian tensor makes the formula base-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epstein import data_at_infinity, epstein_surface, fundamental_forms
from .errors import ChartMismatch
from .grid import (ConformalMetric, OperatorField, ScalarField, SymTensor2Field,
                   base_log_factor, gauss_curvature, grad_components,
                   hessian_conformal, operator_from_tensor, spherical_metric,
                   sup_interior, traceless_part)
from .maps import map_from_name
from .minkowski import LightConeSection, mink_inner
from .schwarzian import schwarzian_derivative


@dataclass(frozen=True)
class ConeSurfaceData:
    """Induced metric, second form and shape operator of a cone section."""

    chart: object
    istar_c: SymTensor2Field
    iistar_c: SymTensor2Field
    bstar_c: OperatorField

    def istar_c_metric(self):
        with np.errstate(invalid="ignore"):
            u = 0.25 * np.log(self.istar_c.det())
        return ConformalMetric("flat", ScalarField(self.chart, u))


def cone_first_form(section):
    """Pullback <d sigma, d sigma> of the degenerate cone metric, by differences."""
    chart = section.chart
    sigma = section.values
    tx = np.stack([grad_components(sigma[..., k], chart)[0] for k in range(4)], axis=-1)
    ty = np.stack([grad_components(sigma[..., k], chart)[1] for k in range(4)], axis=-1)
    return SymTensor2Field.from_components(chart,
                                           mink_inner(tx, tx),
                                           mink_inner(tx, ty),
                                           mink_inner(ty, ty))


def cone_second_form(g):
    """Second fundamental form of the isometric embedding of g in the cone.

    Evaluates the closed form from the spherical base; g is rewritten as
    e^{2w} h_S by exact log-factor arithmetic, never by resampling.
    """
    chart = g.chart
    h_s = spherical_metric(chart)
    w = g.flat_log_factor() - base_log_factor("spherical", chart)
    hess = hessian_conformal(h_s, w)
    wx, wy = grad_components(w.values, chart)
    dwdw = SymTensor2Field.from_components(chart, wx * wx, wx * wy, wy * wy)
    hs_tensor = h_s.metric_tensor()
    e2us = np.exp(2.0 * base_log_factor("spherical", chart).values)
    norm2 = (wx * wx + wy * wy) / e2us
    growth = 0.5 * (np.exp(2.0 * w.values) - 1.0)
    return hess - dwdw + hs_tensor.scaled(0.5 * norm2) + hs_tensor.scaled(growth)


def cone_data_embedded(g):
    """ConeSurfaceData of the isometric embedding of the metric g."""
    istar_c = g.metric_tensor()
    iistar_c = cone_second_form(g)
    bstar_c = operator_from_tensor(iistar_c, istar_c)
    return ConeSurfaceData(g.chart, istar_c, iistar_c, bstar_c)


def cone_data_for_metric(h):
    """Cone data of the dual surface of the envelope surface of h.

    The dual section passes through x + N = sigma / incidence, so its
    embedded metric is 2h; the first form is measured honestly from the
    section by finite differences, the second form from the closed form.
    """
    doubled = h.conformal(0.5 * np.log(2.0))
    section = LightConeSection.from_metric(doubled)
    istar_c = cone_first_form(section)
    iistar_c = cone_second_form(doubled)
    bstar_c = operator_from_tensor(iistar_c, istar_c)
    return ConeSurfaceData(h.chart, istar_c, iistar_c, bstar_c)


def cone_variation(u_dot, istar_c):
    """First variation of the cone second form: Hess_{I*_c}(du) + du * I*_c."""
    chart = istar_c.chart
    chart.require_same(u_dot.chart)
    hess = hessian_conformal(istar_c, u_dot)
    return hess + istar_c.metric_tensor().scaled(u_dot.values)


def duality_check(Inf, Cone, depth=3):
    """Residuals of the duality identities I*_c = 2 I*, II*_c = II* + I*."""
    if not Inf.chart.matches(Cone.chart):
        raise ChartMismatch("infinity data and cone data live on different charts")
    r1 = (Cone.istar_c - Inf.istar - Inf.istar).sup(depth)
    r2 = (Cone.iistar_c - (Inf.iistar + Inf.istar)).sup(depth)
    return r1, r2


def cone_gauss_residual(Cone, depth=3):
    """sup |K_{I*_c} - (1 - tr B*_c)|: the modified Gauss equation of the cone."""
    k = gauss_curvature(Cone.istar_c_metric())
    resid = k.values - (1.0 - Cone.bstar_c.trace())
    return sup_interior(resid, Cone.chart, depth)


UNIFORMIZER_REGISTRY = {
    "disk-identity": "identity",
    "strip": "strip-uniformizer",
    "half-plane": "half-plane-uniformizer",
}


def pulled_back_hyperbolic_metric(phi, chart):
    """phi*(Poincare metric of the disk) as a flat-base conformal metric."""
    zz = chart.zz()
    w = phi.f(zz)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.log(2.0 / (1.0 - np.abs(w) ** 2)) + np.log(np.abs(phi.f1(zz)))
    return ConformalMetric("flat", ScalarField(chart, u))


def schwarzian_at_infinity_check(domain, chart, depth=4):
    """Residual of II*_0 = Re S(phi) for the hyperbolic metric of the domain.

    ``domain`` picks a built-in uniformizer phi onto the disk; the data at
    infinity is built through the full envelope pipeline with
    I* = phi*(Poincare), then the traceless part of II* is compared with the
    real part of the Schwarzian derivative of phi.  Returns a dict with the
    absolute and relative sup-residuals.
    """
    if domain not in UNIFORMIZER_REGISTRY:
        raise ValueError(f"unknown domain {domain!r}; have {sorted(UNIFORMIZER_REGISTRY)}")
    phi = map_from_name(UNIFORMIZER_REGISTRY[domain])
    metric = pulled_back_hyperbolic_metric(phi, chart)
    surf = epstein_surface(metric)
    inf = data_at_infinity(fundamental_forms(surf))
    ii0 = traceless_part(inf.iistar, inf.istar)
    target = schwarzian_derivative(phi, chart).real_part_tensor()
    resid = (ii0 - target).sup(depth)
    scale = max(target.sup(depth), 1e-30)
    return {"residual": resid, "relative": resid / scale, "scale": scale}
