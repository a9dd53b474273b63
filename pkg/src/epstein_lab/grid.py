"""Grid charts over planar domains, finite-difference calculus and tensor algebra.

Conventions used throughout the package:

* a chart node ``(i, j)`` sits at the complex coordinate
  ``z = (x0 + i*dx) + 1j*(y0 + j*dy)``; arrays are stored with shape
  ``(ny, nx)`` so that axis 0 is y and axis 1 is x,
* symmetric 2-tensors are stored as the component triple
  ``(T11, T12, T22)`` in the chart frame ``(d/dx, d/dy)``,
* operator fields are per-node 2x2 matrices acting on chart-frame vectors,
* all differential operators are second-order centered stencils, one-sided
  at dirichlet margins and wrapped on periodic charts.

All operations are pure: they allocate fresh output arrays and never write
into their inputs, so node loops can be partitioned freely across workers.
Reductions sum in C order for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import ChartMismatch, DegenerateMetric, MaskTooSparse

BOUNDARY_KINDS = ("periodic", "dirichlet-margin")

#: default constant in the stencil tolerance C * (dx^2 + dy^2)
STENCIL_TOL_FACTOR = 10.0


def stencil_tolerance(chart, factor=STENCIL_TOL_FACTOR):
    """Default residual tolerance for second-order stencils on this chart."""
    return factor * (chart.dx**2 + chart.dy**2)


@dataclass(frozen=True)
class GridChart:
    """Rectangular grid over a planar domain, optionally periodically identified.

    ``mask`` flags included nodes (True); excluded nodes hold NaN in every
    field and never take part in stencils or reductions.
    """

    nx: int
    ny: int
    x0: float
    y0: float
    dx: float
    dy: float
    boundary_kind: str = "dirichlet-margin"
    mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.nx < 5 or self.ny < 5:
            raise ValueError("chart needs nx, ny >= 5")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("chart needs dx, dy > 0")
        if self.boundary_kind not in BOUNDARY_KINDS:
            raise ValueError(f"boundary_kind must be one of {BOUNDARY_KINDS}")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != (self.ny, self.nx):
                raise ValueError("mask shape must be (ny, nx)")
            if self.boundary_kind == "periodic" and not m.all():
                raise ValueError("periodic charts do not support excluded nodes")
            object.__setattr__(self, "mask", m)

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def periodic(self):
        return self.boundary_kind == "periodic"

    def xs(self):
        return self.x0 + self.dx * np.arange(self.nx)

    def ys(self):
        return self.y0 + self.dy * np.arange(self.ny)

    def zz(self):
        """Complex coordinate z = x + iy at every node, shape (ny, nx)."""
        x = self.xs()[None, :]
        y = self.ys()[:, None]
        return x + 1j * y

    def included(self):
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    def interior(self, depth=1):
        """Nodes whose centered stencils of radius ``depth`` stay on included nodes.

        On periodic charts every included node is interior.  Raises
        MaskTooSparse when nothing remains.
        """
        inc = self.included()
        if depth == 0 or self.periodic:
            out = inc
        else:
            out = ndimage.binary_erosion(
                inc, structure=np.ones((3, 3), dtype=bool),
                iterations=depth, border_value=0)
        if not out.any():
            raise MaskTooSparse(
                f"no interior node at stencil depth {depth} on {self.nx}x{self.ny} chart")
        return out

    def matches(self, other):
        return (self.nx == other.nx and self.ny == other.ny
                and np.isclose(self.x0, other.x0) and np.isclose(self.y0, other.y0)
                and np.isclose(self.dx, other.dx) and np.isclose(self.dy, other.dy)
                and self.boundary_kind == other.boundary_kind)

    def require_same(self, other):
        if not self.matches(other):
            raise ChartMismatch(f"charts differ: {self} vs {other}")

    def with_mask(self, mask):
        return replace(self, mask=np.asarray(mask, dtype=bool))


def square_chart(n, half_width, center=0.0 + 0.0j, boundary_kind="dirichlet-margin"):
    """n x n chart covering the square of given half width around ``center``."""
    h = 2.0 * half_width / (n - 1)
    return GridChart(nx=n, ny=n,
                     x0=center.real - half_width, y0=center.imag - half_width,
                     dx=h, dy=h, boundary_kind=boundary_kind)


def torus_chart(n, periods=(1.0, 1.0), origin=0.0 + 0.0j):
    """Periodic n x n chart for a flat torus with the given real periods."""
    px, py = periods
    return GridChart(nx=n, ny=n, x0=origin.real, y0=origin.imag,
                     dx=px / n, dy=py / n, boundary_kind="periodic")


def disk_chart(n, radius, center=0.0 + 0.0j, margin=0.0):
    """Square chart masked to the disk |z - center| <= radius."""
    chart = square_chart(n, radius, center=center)
    zz = chart.zz()
    mask = np.abs(zz - center) <= radius * (1.0 + 1e-12) - margin
    return chart.with_mask(mask)


# ---------------------------------------------------------------------------
# fields


def _masked(chart, values):
    values = np.array(values, dtype=float, copy=True)
    if chart.mask is not None:
        values[~chart.mask] = np.nan
    return values


@dataclass(frozen=True)
class ScalarField:
    chart: GridChart
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _masked(self.chart, self.values))

    @classmethod
    def from_function(cls, chart, fn):
        return cls(chart, np.asarray(fn(chart.zz()), dtype=float))

    @classmethod
    def constant(cls, chart, value):
        return cls(chart, np.full(chart.shape, float(value)))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self.chart.require_same(other.chart)
            return ScalarField(self.chart, self.values + other.values)
        return ScalarField(self.chart, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self.chart.require_same(other.chart)
            return ScalarField(self.chart, self.values - other.values)
        return ScalarField(self.chart, self.values - float(other))

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self.chart.require_same(other.chart)
            return ScalarField(self.chart, self.values * other.values)
        return ScalarField(self.chart, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.chart, -self.values)

    def exp(self):
        return ScalarField(self.chart, np.exp(self.values))

    def sup(self, depth=0):
        return sup_interior(self.values, self.chart, depth)


@dataclass(frozen=True)
class CovectorField:
    """Per-node 1-form with components (f_x, f_y), shape (ny, nx, 2)."""

    chart: GridChart
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.chart.ny, self.chart.nx, 2):
            raise ValueError("covector values must have shape (ny, nx, 2)")
        if self.chart.mask is not None:
            v[~self.chart.mask] = np.nan
        object.__setattr__(self, "values", v)

    @property
    def dx_comp(self):
        return self.values[..., 0]

    @property
    def dy_comp(self):
        return self.values[..., 1]


@dataclass(frozen=True)
class SymTensor2Field:
    """Symmetric 2-tensor with components (T11, T12, T22), shape (ny, nx, 3)."""

    chart: GridChart
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.chart.ny, self.chart.nx, 3):
            raise ValueError("tensor values must have shape (ny, nx, 3)")
        if self.chart.mask is not None:
            v[~self.chart.mask] = np.nan
        object.__setattr__(self, "values", v)

    @classmethod
    def from_components(cls, chart, t11, t12, t22):
        return cls(chart, np.stack(np.broadcast_arrays(
            np.asarray(t11, dtype=float),
            np.asarray(t12, dtype=float),
            np.asarray(t22, dtype=float)), axis=-1))

    @classmethod
    def zero(cls, chart):
        return cls(chart, np.zeros((chart.ny, chart.nx, 3)))

    @property
    def t11(self):
        return self.values[..., 0]

    @property
    def t12(self):
        return self.values[..., 1]

    @property
    def t22(self):
        return self.values[..., 2]

    def __add__(self, other):
        self.chart.require_same(other.chart)
        return SymTensor2Field(self.chart, self.values + other.values)

    def __sub__(self, other):
        self.chart.require_same(other.chart)
        return SymTensor2Field(self.chart, self.values - other.values)

    def __neg__(self):
        return SymTensor2Field(self.chart, -self.values)

    def scaled(self, factor):
        """Pointwise scaling; ``factor`` is a number or an (ny, nx) array."""
        f = factor.values if isinstance(factor, ScalarField) else np.asarray(factor)
        return SymTensor2Field(self.chart, self.values * f[..., None]
                               if f.ndim == 2 else self.values * f)

    def as_matrices(self):
        m = np.empty(self.values.shape[:-1] + (2, 2))
        m[..., 0, 0] = self.t11
        m[..., 0, 1] = self.t12
        m[..., 1, 0] = self.t12
        m[..., 1, 1] = self.t22
        return m

    def det(self):
        return self.t11 * self.t22 - self.t12**2

    def sup(self, depth=0):
        return sup_interior(np.abs(self.values).max(axis=-1), self.chart, depth)


@dataclass(frozen=True)
class OperatorField:
    """Per-node 2x2 real matrix B^i_j in the chart frame, shape (ny, nx, 2, 2)."""

    chart: GridChart
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.chart.ny, self.chart.nx, 2, 2):
            raise ValueError("operator values must have shape (ny, nx, 2, 2)")
        if self.chart.mask is not None:
            v[~self.chart.mask] = np.nan
        object.__setattr__(self, "values", v)

    @classmethod
    def identity(cls, chart, scale=1.0):
        v = np.zeros((chart.ny, chart.nx, 2, 2))
        v[..., 0, 0] = scale
        v[..., 1, 1] = scale
        return cls(chart, v)

    def trace(self):
        return self.values[..., 0, 0] + self.values[..., 1, 1]

    def det(self):
        v = self.values
        return v[..., 0, 0] * v[..., 1, 1] - v[..., 0, 1] * v[..., 1, 0]

    def eigenvalues(self):
        """Per-node eigenvalues (real part) sorted ascending, shape (ny, nx, 2).

        Operators in this package are self-adjoint for some metric, so the
        spectrum is real; tiny imaginary parts from round-off are dropped.
        """
        tr = self.trace()
        disc = (tr / 2.0)**2 - self.det()
        root = np.sqrt(np.maximum(disc, 0.0))
        lam = np.stack([tr / 2.0 - root, tr / 2.0 + root], axis=-1)
        return lam

    def compose(self, other):
        self.chart.require_same(other.chart)
        return OperatorField(self.chart, np.einsum("...ij,...jk->...ik",
                                                   self.values, other.values))

    def __add__(self, other):
        self.chart.require_same(other.chart)
        return OperatorField(self.chart, self.values + other.values)

    def __sub__(self, other):
        self.chart.require_same(other.chart)
        return OperatorField(self.chart, self.values - other.values)

    def self_adjoint_residual(self, g):
        """sup |gB - (gB)^T| over included nodes, g a metric tensor field."""
        gm = as_metric_tensor(g).as_matrices()
        gb = np.einsum("...ij,...jk->...ik", gm, self.values)
        return sup_interior(np.abs(gb - np.swapaxes(gb, -1, -2)).max(axis=(-1, -2)),
                            self.chart, 0)


# ---------------------------------------------------------------------------
# conformal metrics over named bases


CONFORMAL_BASES = ("flat", "spherical", "disk-hyperbolic")


def base_log_factor(base, chart):
    """Flat-base log factor of the named base metric: base = e^{2w} |dz|^2."""
    zz = chart.zz()
    r2 = np.abs(zz)**2
    if base == "flat":
        w = np.zeros(chart.shape)
    elif base == "spherical":
        w = np.log(2.0 / (1.0 + r2))
    elif base == "disk-hyperbolic":
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(r2 < 1.0, np.log(2.0) - np.log1p(-np.minimum(r2, 1.0)), np.nan)
    else:
        raise ValueError(f"unknown base {base!r}, expected one of {CONFORMAL_BASES}")
    return ScalarField(chart, w)


@dataclass(frozen=True)
class ConformalMetric:
    """Metric e^{2u} * base over a chart, base one of flat / spherical / disk-hyperbolic."""

    base: str
    u: ScalarField

    def __post_init__(self):
        if self.base not in CONFORMAL_BASES:
            raise ValueError(f"unknown base {self.base!r}")

    @property
    def chart(self):
        return self.u.chart

    def flat_log_factor(self):
        """Log factor w with metric = e^{2w} |dz|^2 (base folded into flat)."""
        return self.u + base_log_factor(self.base, self.chart)

    def metric_tensor(self):
        w = self.flat_log_factor().values
        e2w = np.exp(2.0 * w)
        zero = np.zeros_like(e2w)
        return SymTensor2Field.from_components(self.chart, e2w, zero, e2w)

    def conformal(self, v):
        """The metric e^{2v} * self, v a ScalarField or a constant."""
        if not isinstance(v, ScalarField):
            v = ScalarField.constant(self.chart, v)
        return ConformalMetric(self.base, self.u + v)

    def area(self, depth=0):
        """Total area of the chart for this metric (trapezoid quadrature)."""
        w = self.flat_log_factor().values
        return quadrature(np.exp(2.0 * w), self.chart, depth)


def flat_metric(chart, u0=0.0):
    return ConformalMetric("flat", ScalarField.constant(chart, u0))


def spherical_metric(chart):
    return ConformalMetric("spherical", ScalarField.constant(chart, 0.0))


def poincare_metric(chart):
    """Hyperbolic metric of curvature -1 on the unit disk, 2|dz|/(1-|z|^2)."""
    return ConformalMetric("disk-hyperbolic", ScalarField.constant(chart, 0.0))


def fuchsian_disk_metric(chart):
    """Disk metric of curvature -2, sqrt(2)|dz|/(1-|z|^2).

    This is the normalization of the hyperbolic metric whose envelope surface
    is the totally geodesic plane over the disk (shape operator zero); the
    curvature -1 metric gives the equidistant surface at tanh(r) = 1/3 instead.
    """
    return ConformalMetric("disk-hyperbolic",
                           ScalarField.constant(chart, -0.5 * np.log(2.0)))


def as_metric_tensor(g):
    if isinstance(g, ConformalMetric):
        return g.metric_tensor()
    if isinstance(g, SymTensor2Field):
        return g
    raise TypeError("metric must be a ConformalMetric or SymTensor2Field")


def require_positive_definite(g, depth=0, where="metric"):
    gt = as_metric_tensor(g)
    sel = gt.chart.interior(depth)
    dets = gt.det()[sel]
    t11 = gt.t11[sel]
    good = np.isfinite(dets)
    if np.any(dets[good] <= 0.0) or np.any(t11[good] <= 0.0):
        raise DegenerateMetric(f"{where} not positive definite on the chart interior")
    return gt


# ---------------------------------------------------------------------------
# finite differences


def _d1(values, h, axis, periodic):
    if periodic:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


def _d2(values, h, axis, periodic):
    if periodic:
        return (np.roll(values, -1, axis=axis) - 2.0 * values
                + np.roll(values, 1, axis=axis)) / (h * h)
    out = np.empty_like(values, dtype=float)
    v = np.moveaxis(values, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    # one-sided 4-point second derivative, O(h^2)
    o[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    o[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return out


def grad_components(values, chart):
    """Raw centered/one-sided gradient of an (ny, nx) array: (d/dx, d/dy)."""
    gx = _d1(values, chart.dx, 1, chart.periodic)
    gy = _d1(values, chart.dy, 0, chart.periodic)
    return gx, gy


def fd_gradient(f, chart=None):
    """Gradient 1-form of a scalar field by second-order differences."""
    if chart is None:
        chart = f.chart
    else:
        chart.require_same(f.chart)
    chart.interior(1)
    gx, gy = grad_components(f.values, chart)
    return CovectorField(chart, np.stack([gx, gy], axis=-1))


def fd_hessian_flat(f):
    """Flat-chart Hessian of a scalar field (u_xx, u_xy, u_yy)."""
    chart = f.chart
    chart.interior(1)
    v = f.values
    hxx = _d2(v, chart.dx, 1, chart.periodic)
    hyy = _d2(v, chart.dy, 0, chart.periodic)
    gx = _d1(v, chart.dx, 1, chart.periodic)
    hxy = _d1(gx, chart.dy, 0, chart.periodic)
    return SymTensor2Field.from_components(chart, hxx, hxy, hyy)


def hessian_conformal(h, v):
    """Hessian of v for the Levi-Civita connection of the conformal metric h.

    Uses the conformal transformation rule
    Hess_{e^{2w} flat}(v) = Hess_flat(v) - 2 sym(dw o dv) + <dw, dv>_flat * flat,
    with spherical / disk bases reduced to an explicit flat-base log factor.
    """
    chart = h.chart
    chart.require_same(v.chart)
    w = h.flat_log_factor()
    hess = fd_hessian_flat(v)
    wx, wy = grad_components(w.values, chart)
    vx, vy = grad_components(v.values, chart)
    dot = wx * vx + wy * vy
    corr11 = -2.0 * wx * vx + dot
    corr12 = -(wx * vy + wy * vx)
    corr22 = -2.0 * wy * vy + dot
    return hess + SymTensor2Field.from_components(chart, corr11, corr12, corr22)


def gauss_curvature(h):
    """Gauss curvature of a conformal metric: K = -e^{-2w} Lap_flat(w)."""
    chart = h.chart
    w = h.flat_log_factor().values
    lap = (_d2(w, chart.dx, 1, chart.periodic)
           + _d2(w, chart.dy, 0, chart.periodic))
    return ScalarField(chart, -np.exp(-2.0 * w) * lap)


# ---------------------------------------------------------------------------
# tensor algebra


def _metric_inverse(gt):
    det = gt.det()
    bad = np.isfinite(det) & (det <= 0.0)
    if bad.any():
        raise DegenerateMetric("det g <= 0 at %d node(s)" % int(bad.sum()))
    inv11 = gt.t22 / det
    inv12 = -gt.t12 / det
    inv22 = gt.t11 / det
    return inv11, inv12, inv22


def metric_trace(T, g):
    """tr_g(T) = g^{ij} T_ij as an (ny, nx) array."""
    gt = as_metric_tensor(g)
    i11, i12, i22 = _metric_inverse(gt)
    return i11 * T.t11 + 2.0 * i12 * T.t12 + i22 * T.t22


def traceless_part(T, g):
    """T minus (1/2) tr_g(T) g; output has tr_g = 0 to round-off."""
    gt = as_metric_tensor(g)
    T.chart.require_same(gt.chart)
    tr = metric_trace(T, gt)
    return T - gt.scaled(0.5 * tr)


def tensor_inner(T1, T2, g):
    """Pointwise inner product <T1, T2>_g = g^{ik} g^{jl} T1_ij T2_kl."""
    gt = as_metric_tensor(g)
    i11, i12, i22 = _metric_inverse(gt)
    a11, a12, a22 = T1.t11, T1.t12, T1.t22
    b11, b12, b22 = T2.t11, T2.t12, T2.t22
    # (g^{-1} A g^{-1})_{kl} contracted against B_{kl}
    c11 = i11 * (i11 * a11 + i12 * a12) + i12 * (i11 * a12 + i12 * a22)
    c12 = i11 * (i12 * a11 + i22 * a12) + i12 * (i12 * a12 + i22 * a22)
    c22 = i12 * (i12 * a11 + i22 * a12) + i22 * (i12 * a12 + i22 * a22)
    return c11 * b11 + 2.0 * c12 * b12 + c22 * b22


def quadrature(density, chart, depth=0):
    """Trapezoid quadrature of an (ny, nx) density over the chart.

    Periodic charts use the plain Riemann sum (exact trapezoid on a torus).
    Excluded / non-finite nodes contribute zero.
    """
    w = np.ones(chart.shape)
    if not chart.periodic:
        w[0, :] *= 0.5
        w[-1, :] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
    sel = chart.interior(depth) if depth > 0 else chart.included()
    w[~sel] = 0.0
    vals = np.where(np.isfinite(density) & sel, density, 0.0)
    return float(np.sum(vals * w) * chart.dx * chart.dy)


def tensor_pairing(T1, T2, g, depth=0):
    """Integral of <T1, T2>_g against the g-area element."""
    gt = require_positive_definite(g, depth)
    T1.chart.require_same(T2.chart)
    T1.chart.require_same(gt.chart)
    integrand = tensor_inner(T1, T2, gt) * np.sqrt(gt.det())
    return quadrature(integrand, T1.chart, depth)


def conformal_christoffels(h):
    """Christoffel symbols of e^{2w}|dz|^2 in closed conformal form.

    Returns (wx, wy); the nonzero symbols are
    G^1_11 = wx, G^1_12 = wy, G^1_22 = -wx, G^2_11 = -wy, G^2_12 = wx, G^2_22 = wy.
    """
    w = h.flat_log_factor()
    return grad_components(w.values, h.chart)


def codazzi_residual(T, g):
    """Pointwise norm of d^D T = (D_1 T)(2, .) - (D_2 T)(1, .) for the metric g."""
    if not isinstance(g, ConformalMetric):
        raise TypeError("codazzi_residual expects the metric as a ConformalMetric")
    chart = g.chart
    chart.require_same(T.chart)
    wx, wy = conformal_christoffels(g)
    t11, t12, t22 = T.t11, T.t12, T.t22
    d1 = lambda a: _d1(a, chart.dx, 1, chart.periodic)
    d2 = lambda a: _d1(a, chart.dy, 0, chart.periodic)

    # covariant derivatives D_i T_{jk} = d_i T_jk - G^l_ij T_lk - G^l_ik T_jl
    # chart indices: 1 = x, 2 = y
    g111, g112, g122 = wx, wy, -wx
    g211, g212, g222 = -wy, wx, wy

    def cov(i, j, k, dT):
        gij = (g111, g211) if (i, j) == (1, 1) else \
              (g112, g212) if (i, j) in ((1, 2), (2, 1)) else (g122, g222)
        gik = (g111, g211) if (i, k) == (1, 1) else \
              (g112, g212) if (i, k) in ((1, 2), (2, 1)) else (g122, g222)
        t_1k = t11 if k == 1 else t12
        t_2k = t12 if k == 1 else t22
        t_j1 = t11 if j == 1 else t12
        t_j2 = t12 if j == 1 else t22
        return dT - (gij[0] * t_1k + gij[1] * t_2k) - (gik[0] * t_j1 + gik[1] * t_j2)

    r1 = cov(1, 2, 1, d1(t12)) - cov(2, 1, 1, d2(t11))
    r2 = cov(1, 2, 2, d1(t22)) - cov(2, 1, 2, d2(t12))
    return ScalarField(chart, np.sqrt(r1**2 + r2**2))


def tensor_norm(T, g):
    """Pointwise g-norm sqrt(<T, T>_g) of a symmetric 2-tensor field."""
    return ScalarField(T.chart, np.sqrt(np.maximum(tensor_inner(T, T, g), 0.0)))


def operator_from_tensor(T, g):
    """Raise the first index: B = g^{-1} T, self-adjoint for g when T is symmetric."""
    gt = as_metric_tensor(g)
    i11, i12, i22 = _metric_inverse(gt)
    v = np.empty(T.values.shape[:-1] + (2, 2))
    v[..., 0, 0] = i11 * T.t11 + i12 * T.t12
    v[..., 0, 1] = i11 * T.t12 + i12 * T.t22
    v[..., 1, 0] = i12 * T.t11 + i22 * T.t12
    v[..., 1, 1] = i12 * T.t12 + i22 * T.t22
    return OperatorField(T.chart, v)


def tensor_from_operator(B, g):
    """Lower the first index: T_ij = g_ik B^k_j (B self-adjoint for g)."""
    gt = as_metric_tensor(g)
    gm = gt.as_matrices()
    m = np.einsum("...ik,...kj->...ij", gm, B.values)
    t11 = m[..., 0, 0]
    t22 = m[..., 1, 1]
    t12 = 0.5 * (m[..., 0, 1] + m[..., 1, 0])
    return SymTensor2Field.from_components(B.chart, t11, t12, t22)


def sup_interior(values, chart, depth=0):
    """Max of |values| over the interior of the chart, ignoring NaN nodes."""
    sel = chart.interior(depth) if depth > 0 else chart.included()
    v = np.abs(np.asarray(values))
    picked = v[sel]
    picked = picked[np.isfinite(picked)]
    if picked.size == 0:
        raise MaskTooSparse("no finite values on the requested interior")
    return float(picked.max())


# ---------------------------------------------------------------------------
# CSV serialization: one 6-value header line, then row-major node records


def _write_csv(path, chart, columns):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{chart.nx},{chart.ny},{chart.x0!r},{chart.y0!r},"
                 f"{chart.dx!r},{chart.dy!r}\n")
        flat = [np.asarray(c).ravel() for c in columns]
        for row in zip(*flat):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_csv(path, ncols, boundary_kind="dirichlet-margin"):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 6:
            raise ValueError("expected a 6-value header line (nx, ny, x0, y0, dx, dy)")
        nx, ny = int(header[0]), int(header[1])
        x0, y0, dx, dy = (float(v) for v in header[2:])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (nx * ny, ncols):
        raise ValueError(f"expected {nx * ny} rows of {ncols} columns, got {data.shape}")
    chart = GridChart(nx=nx, ny=ny, x0=x0, y0=y0, dx=dx, dy=dy,
                      boundary_kind=boundary_kind)
    nanmask = ~np.isfinite(data).all(axis=1)
    if nanmask.any():
        chart = chart.with_mask(~nanmask.reshape(ny, nx))
    return chart, data


def write_scalar_csv(field, path):
    _write_csv(path, field.chart, [field.values])


def read_scalar_csv(path, boundary_kind="dirichlet-margin"):
    chart, data = _read_csv(path, 1, boundary_kind)
    return ScalarField(chart, data[:, 0].reshape(chart.shape))


def write_tensor_csv(field, path):
    _write_csv(path, field.chart, [field.t11, field.t12, field.t22])


def read_tensor_csv(path, boundary_kind="dirichlet-margin"):
    chart, data = _read_csv(path, 3, boundary_kind)
    return SymTensor2Field(chart, data.reshape(chart.ny, chart.nx, 3))
