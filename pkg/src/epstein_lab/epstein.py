"""Envelope surfaces in H^3 from conformal metrics, and their data at infinity.

The envelope surface of a metric h = e^{2u}|dz|^2 is built per node by
solving the horosphere incidence/tangency system for the null section
sigma = e^u l(z) and its finite-difference frame.  The unit normal points
toward the base point of sigma, so the geodesic-plane case has shape
operator zero and the constant-metric case has shape operator +E.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import minkowski as mink
from .errors import (DegenerateMetric, DegenerateSurface, EigenvalueMinusOne,
                     SingularDictionary, SingularEnvelope)
from .grid import (ConformalMetric, OperatorField, ScalarField, SymTensor2Field,
                   gauss_curvature, grad_components, metric_trace,
                   operator_from_tensor, codazzi_residual, sup_interior)
from .minkowski import INCIDENCE, LightConeSection, mink_inner


@dataclass(frozen=True)
class EmbeddedSurface:
    """Grid map into the hyperboloid with unit normal field.

    Points and normals are NaN outside ``valid`` (stencil margins and nodes
    where the envelope solve failed).
    """

    chart: object
    points: np.ndarray        # (ny, nx, 4)
    normals: np.ndarray       # (ny, nx, 4)
    valid: np.ndarray         # (ny, nx) bool
    orientation: int = +1

    def hyperboloid_residual(self):
        return float(np.nanmax(np.abs(mink.mink_norm2(self.points) + 1.0)[self.valid]))

    def normal_residual(self):
        r = np.abs(mink.mink_norm2(self.normals) - 1.0) + np.abs(
            mink_inner(self.normals, self.points))
        return float(np.nanmax(r[self.valid]))


@dataclass(frozen=True)
class SurfaceData:
    """First/second/third fundamental forms and the shape operator."""

    chart: object
    first_form: SymTensor2Field
    second_form: SymTensor2Field
    third_form: SymTensor2Field
    shape: OperatorField
    valid: np.ndarray
    second_form_asymmetry: float


@dataclass(frozen=True)
class InfinityData:
    """The pair (I*, II*) with the derived shape operator at infinity."""

    chart: object
    istar: SymTensor2Field
    iistar: SymTensor2Field
    bstar: OperatorField
    valid: np.ndarray

    def istar_metric(self):
        """I* as a flat-base conformal metric, log factor (1/4) log det I*.

        Valid because first forms at infinity of envelope surfaces are
        conformal to |dz|^2; the off-diagonal part is stencil noise.
        """
        with np.errstate(invalid="ignore"):
            u = 0.25 * np.log(self.istar.det())
        return ConformalMetric("flat", ScalarField(self.chart, u))


def epstein_surface(h, orientation=+1, raise_on_failure=True):
    """Envelope surface of the conformal metric h.

    Per-node horosphere solve on sigma = e^u l(z) with centered-difference
    frames; the normal is recovered from the envelope geometry
    (N = sigma/incidence - x, unit, pointing toward the base point).
    """
    chart = h.chart
    section = LightConeSection.from_metric(h)
    sigma = section.values
    dx_sigma = np.stack([grad_components(sigma[..., k], chart)[0] for k in range(4)], axis=-1)
    dy_sigma = np.stack([grad_components(sigma[..., k], chart)[1] for k in range(4)], axis=-1)

    points = mink.horosphere_solve(sigma, dx_sigma, dy_sigma, orientation=orientation)
    normals = sigma / INCIDENCE - points
    if orientation < 0:
        normals = -normals

    solved = np.isfinite(points).all(axis=-1)
    expected = chart.interior(1)
    failed = expected & ~solved
    if failed.any() and raise_on_failure:
        nodes = [tuple(ix) for ix in np.argwhere(failed)]
        raise SingularEnvelope(nodes)
    valid = expected & solved
    points = np.where(valid[..., None], points, np.nan)
    normals = np.where(valid[..., None], normals, np.nan)
    return EmbeddedSurface(chart, points, normals, valid, orientation)


def surface_normal_from_tangents(surface):
    """Unit normal recomputed from tangent frames by the Minkowski cross product.

    Independent of the envelope formula for the normal; used by the honest
    Gauss-map diagnostics.  Sign matched to the stored normal field.
    """
    chart = surface.chart
    x = surface.points
    tx = np.stack([grad_components(x[..., k], chart)[0] for k in range(4)], axis=-1)
    ty = np.stack([grad_components(x[..., k], chart)[1] for k in range(4)], axis=-1)
    # N^a = eta^{ab} eps_bcde x^c tx^d ty^e
    eps = np.zeros((4, 4, 4, 4))
    for perm, sign in _permutations_with_signs():
        eps[perm] = sign
    n_low = np.einsum("bcde,...c,...d,...e->...b", eps, x, tx, ty)
    n = n_low * np.array([-1.0, 1.0, 1.0, 1.0])
    norm2 = mink.mink_norm2(n)
    with np.errstate(invalid="ignore"):
        n = n / np.sqrt(np.abs(norm2))[..., None]
    flip = mink_inner(n, surface.normals) < 0
    n = np.where(flip[..., None], -n, n)
    return n


def _permutations_with_signs():
    import itertools
    base = (0, 1, 2, 3)
    for perm in itertools.permutations(base):
        sign = 1
        p = list(perm)
        for i in range(4):
            while p[i] != i:
                j = p[i]
                p[i], p[j] = p[j], p[i]
                sign = -sign
        yield perm, sign


def hyperbolic_gauss_map(surface, from_tangents=False):
    """Boundary chart point of the forward normal geodesic, per node.

    With ``from_tangents`` the normal is recomputed from the embedded
    surface instead of the stored envelope normal, which makes the
    G = identity check non-circular.
    """
    n = surface_normal_from_tangents(surface) if from_tangents else surface.normals
    p = surface.points + n
    return mink.boundary_chart_point(p)


def fundamental_forms(surface, det_tol=1e-14):
    """First, second and third fundamental forms and the shape operator.

    I from <dx, dx>; the shape operator from the tangential part of dN
    solved against I; II symmetrized with the asymmetry reported.
    """
    chart = surface.chart
    x = surface.points
    n = surface.normals
    tx = np.stack([grad_components(x[..., k], chart)[0] for k in range(4)], axis=-1)
    ty = np.stack([grad_components(x[..., k], chart)[1] for k in range(4)], axis=-1)
    nx_ = np.stack([grad_components(n[..., k], chart)[0] for k in range(4)], axis=-1)
    ny_ = np.stack([grad_components(n[..., k], chart)[1] for k in range(4)], axis=-1)

    i11 = mink_inner(tx, tx)
    i12 = mink_inner(tx, ty)
    i22 = mink_inner(ty, ty)
    first = SymTensor2Field.from_components(chart, i11, i12, i22)

    det = first.det()
    degenerate = np.isfinite(det) & (det < det_tol)
    if degenerate.any():
        raise DegenerateSurface(f"induced metric degenerate at {int(degenerate.sum())} node(s)")

    # II(u, v) = <D_u N, v>; ambient derivative suffices since <N, dx> = 0
    s11 = mink_inner(nx_, tx)
    s12 = mink_inner(nx_, ty)
    s21 = mink_inner(ny_, tx)
    s22 = mink_inner(ny_, ty)
    asym = sup_interior(np.abs(s12 - s21), chart, 2)
    second = SymTensor2Field.from_components(chart, s11, 0.5 * (s12 + s21), s22)

    shape = operator_from_tensor(second, first)
    third_m = np.einsum("...ij,...jk->...ik", second.as_matrices(),
                        np.einsum("...ij,...jk->...ik",
                                  np.linalg.inv(_safe_mat(first)), second.as_matrices()))
    third = SymTensor2Field.from_components(chart, third_m[..., 0, 0],
                                            0.5 * (third_m[..., 0, 1] + third_m[..., 1, 0]),
                                            third_m[..., 1, 1])
    valid = surface.valid & chart.interior(2)
    return SurfaceData(chart, first, second, third, shape, valid, asym)


def _safe_mat(T):
    m = T.as_matrices()
    bad = ~np.isfinite(m).all(axis=(-1, -2))
    m = m.copy()
    m[bad] = np.eye(2)
    return m


def shape_at_infinity(B, det_tol=1e-12):
    """B* = (E + B)^{-1} (E - B)."""
    e = np.eye(2)
    eb = e + B.values
    det = eb[..., 0, 0] * eb[..., 1, 1] - eb[..., 0, 1] * eb[..., 1, 0]
    if np.any(np.isfinite(det) & (np.abs(det) < det_tol)):
        raise EigenvalueMinusOne("E + B is singular somewhere: eigenvalue -1")
    vals = np.linalg.solve(_finite_or_eye(eb), _finite_or(e - B.values))
    vals[~np.isfinite(B.values).all(axis=(-1, -2))] = np.nan
    return OperatorField(B.chart, vals)


def b_from_bstar(Bstar, det_tol=1e-12):
    """Inverse dictionary B = (E + B*)^{-1} (E - B*)."""
    e = np.eye(2)
    eb = e + Bstar.values
    det = eb[..., 0, 0] * eb[..., 1, 1] - eb[..., 0, 1] * eb[..., 1, 0]
    if np.any(np.isfinite(det) & (np.abs(det) < det_tol)):
        raise SingularDictionary("E + B* is singular somewhere")
    vals = np.linalg.solve(_finite_or_eye(eb), _finite_or(e - Bstar.values))
    vals[~np.isfinite(Bstar.values).all(axis=(-1, -2))] = np.nan
    return OperatorField(Bstar.chart, vals)


def _finite_or_eye(m):
    out = m.copy()
    out[~np.isfinite(m).all(axis=(-1, -2))] = np.eye(2)
    return out


def _finite_or(m, fill=0.0):
    out = m.copy()
    out[~np.isfinite(m).all(axis=(-1, -2))] = fill
    return out


def data_at_infinity(D):
    """(I*, II*) = ((I + 2 II + III)/2, (I - III)/2) plus the derived B*.

    The pushforward by the hyperbolic Gauss map is the chart identity for
    envelope surfaces, so the combination needs no interpolation.
    """
    istar = SymTensor2Field(D.chart, 0.5 * (D.first_form.values
                                            + 2.0 * D.second_form.values
                                            + D.third_form.values))
    sel = D.valid
    dets = istar.det()[sel]
    t11 = istar.t11[sel]
    fin = np.isfinite(dets)
    if np.any(dets[fin] <= 0) or np.any(t11[np.isfinite(t11)] <= 0):
        raise DegenerateMetric("I + 2 II + III is not positive definite (not h-tame)")
    iistar = SymTensor2Field(D.chart, 0.5 * (D.first_form.values - D.third_form.values))
    bstar = shape_at_infinity(D.shape)
    return InfinityData(D.chart, istar, iistar, bstar, D.valid)


def htame_check(D, margin_tol=0.0):
    """Per-node principal-curvature bounds of the shape operator.

    Returns (tame_field, margin): tame where both eigenvalues lie in
    (-1, 1); margin = 1 - max |eigenvalue| over valid nodes.
    """
    lam = D.shape.eigenvalues()
    extreme = np.abs(lam).max(axis=-1)
    tame = extreme < 1.0 - margin_tol
    margin = 1.0 - float(np.nanmax(extreme[D.valid]))
    return tame, margin


def admissibility_residuals(Inf, depth=3):
    """(codazzi, gauss) sup-residuals of the pair (I*, II*).

    codazzi: |d^{D*} II*|; gauss: |tr_{I*} II* + K*|.
    """
    metric = Inf.istar_metric()
    cod = codazzi_residual(Inf.iistar, metric)
    kstar = gauss_curvature(metric)
    tr = metric_trace(Inf.iistar, Inf.istar)
    gauss = np.abs(tr + kstar.values)
    return (sup_interior(cod.values, Inf.chart, depth),
            sup_interior(gauss, Inf.chart, depth))


def third_form_at_infinity(Inf):
    """III* = II* (I*)^{-1} II*, the unique choice matching the equidistant leaves."""
    inv = np.linalg.inv(_safe_mat(Inf.istar))
    m = np.einsum("...ij,...jk,...kl->...il", Inf.iistar.as_matrices(), inv,
                  Inf.iistar.as_matrices())
    return SymTensor2Field.from_components(
        Inf.chart, m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1])


def equidistant_metric(Inf, r):
    """Leaf metric (e^{2r} I* + 2 II* + e^{-2r} III*)/2 of the foliation at r."""
    third = third_form_at_infinity(Inf)
    leaf = SymTensor2Field(Inf.chart, 0.5 * (np.exp(2.0 * r) * Inf.istar.values
                                             + 2.0 * Inf.iistar.values
                                             + np.exp(-2.0 * r) * third.values))
    sel = Inf.valid
    det = leaf.det()[sel]
    fin = np.isfinite(det)
    if np.any(det[fin] <= 0):
        lam = Inf.bstar.eigenvalues()
        neg = lam[Inf.valid].ravel()
        neg = neg[np.isfinite(neg) & (neg < 0)]
        rmin = 0.5 * np.log(np.max(-neg)) if neg.size else -np.inf
        raise DegenerateMetric(f"leaf not positive definite; minimal admissible r ~ {rmin}")
    return leaf


def surface_distance_residual(s1, s2, r):
    """sup |<x1, x2> + cosh(r)| over common valid nodes (equidistance check)."""
    both = s1.valid & s2.valid
    val = mink_inner(s1.points, s2.points) + np.cosh(r)
    return float(np.nanmax(np.abs(val[both])))
