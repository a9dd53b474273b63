"""Linear Weingarten surfaces: residuals, classification, Monge-Ampere solver.

A surface with a det(B) + b tr(B)/2 + c = 0 is encoded at infinity by
det((a-b+c) B* + (c-a) E) = b^2 - 4ac, and prescribing the conformal factor
e^{2u} of the first form at infinity turns this into a Monge-Ampere equation
for u.  The solver runs damped Newton with the exact linearization obtained
from the adjugate form of Jacobi's determinant derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .epstein import epstein_surface, fundamental_forms, htame_check
from .errors import (DegenerateFrontCoefficients, NewtonDiverged, NotElliptic)
from .grid import (ConformalMetric, ScalarField, SymTensor2Field,
                   grad_components, operator_from_tensor, sup_interior)


@dataclass(frozen=True)
class WeingartenCoeffs:
    """Coefficient triple of a K_e + b H + c = 0, not all zero."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0 and self.b == 0 and self.c == 0:
            raise ValueError("coefficients must not all vanish")

    @property
    def discriminant(self):
        return self.b**2 - 4.0 * self.a * self.c

    @property
    def elliptic(self):
        return self.discriminant > 0

    @property
    def sign_ok(self):
        return (self.c - self.a) * (self.a - self.b + self.c) <= 0

    @property
    def degenerate_front(self):
        return self.a - self.b + self.c == 0 or self.a + self.b + self.c == 0


def classify(co):
    """Type flags and the special-case tag of a coefficient triple."""
    if co.a == 0 and co.c == 0 and co.b != 0:
        tag = "minimal"
    elif co.a == 0 and co.b == co.c and co.b != 0:
        tag = "cmc1"
    elif co.b == 0 and co.a != 0 and -1.0 < co.c / co.a < 0.0:
        tag = f"constant-Ke({-co.c / co.a:g})"
    else:
        tag = "generic"
    return {"elliptic": co.elliptic, "sign_ok": co.sign_ok,
            "degenerate_front": co.degenerate_front, "tag": tag}


def weingarten_residual_surface(D, co):
    """a det(B) + b tr(B)/2 + c pointwise on a surface."""
    vals = co.a * D.shape.det() + co.b * 0.5 * D.shape.trace() + co.c
    return ScalarField(D.chart, vals)


def weingarten_residual_infinity(Inf, co):
    """det((a-b+c) B* + (c-a) E) - (b^2 - 4ac) pointwise."""
    alpha = co.a - co.b + co.c
    if alpha == 0:
        raise DegenerateFrontCoefficients(
            "a - b + c = 0; use cmc1_residual for the quasilinear front case")
    gamma = co.c - co.a
    m = alpha * Inf.bstar.values + gamma * np.eye(2)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return ScalarField(Inf.chart, det - co.discriminant)


def cmc1_residual(Inf):
    """tr(B*) + 2 pointwise: the quasilinear degenerate-front residual."""
    return ScalarField(Inf.chart, Inf.bstar.trace() + 2.0)


def bstar_transfer_residual(Bstar, B):
    """sup-residuals of the det/tr transfer between B and B*.

    det(B) = (det B* - tr B* + 1)/(det B* + tr B* + 1) and
    tr(B) = 2 (1 - det B*)/(det B* + tr B* + 1).
    """
    d, t = Bstar.det(), Bstar.trace()
    denom = d + t + 1.0
    r_det = np.abs(B.det() - (d - t + 1.0) / denom)
    r_tr = np.abs(B.trace() - 2.0 * (1.0 - d) / denom)
    return float(np.nanmax(r_det)), float(np.nanmax(r_tr))


# ---------------------------------------------------------------------------
# Monge-Ampere problem


@dataclass(frozen=True)
class MAProblem:
    """Base data at infinity, coefficients, and boundary data for the solve.

    ``istar`` is the base metric (flat-base conformal form), ``iistar`` its
    second form; on dirichlet charts ``boundary_value`` fixes u on a 2-node
    margin, on periodic charts every node is an unknown.
    """

    istar: ConformalMetric
    iistar: SymTensor2Field
    coeffs: WeingartenCoeffs
    boundary_value: float = 0.0

    @property
    def chart(self):
        return self.istar.chart

    def bstar(self):
        return operator_from_tensor(self.iistar, self.istar.metric_tensor())


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-11
    max_iter: int = 25
    damping: bool = True
    max_halvings: int = 30


@dataclass(frozen=True)
class MASolution:
    u: ScalarField
    newton_trace: list
    positivity_certificate: float
    accepted: bool
    pinned: bool = False


def _conformal_pieces(P, u_vals):
    """Matrix A, log factors and gradients entering residual and linearization."""
    chart = P.chart
    w = P.istar.flat_log_factor().values
    wx, wy = grad_components(w, chart)
    ux, uy = grad_components(u_vals, chart)

    from .grid import _d1, _d2  # second-order primitives
    uxx = _d2(u_vals, chart.dx, 1, chart.periodic)
    uyy = _d2(u_vals, chart.dy, 0, chart.periodic)
    uxy = _d1(ux, chart.dy, 0, chart.periodic)

    # Hess_{I*}(u) - du o du + (1/2)|du|^2_{I*} I*, assembled over the flat chart
    h11 = uxx - wx * ux + wy * uy
    h12 = uxy - (wx * uy + wy * ux)
    h22 = uyy - wy * uy + wx * ux
    b11 = h11 - 0.5 * ux * ux + 0.5 * uy * uy
    b12 = h12 - ux * uy
    b22 = h22 - 0.5 * uy * uy + 0.5 * ux * ux

    co = P.coeffs
    alpha = co.a - co.b + co.c
    gamma = co.c - co.a
    e2w = np.exp(2.0 * w)
    e2u = np.exp(2.0 * u_vals)
    a11 = alpha * (P.iistar.t11 + b11) + gamma * e2u * e2w
    a12 = alpha * (P.iistar.t12 + b12)
    a22 = alpha * (P.iistar.t22 + b22) + gamma * e2u * e2w
    m11 = P.iistar.t11 + b11
    m12 = P.iistar.t12 + b12
    m22 = P.iistar.t22 + b22
    return dict(w=w, wx=wx, wy=wy, ux=ux, uy=uy, e2w=e2w, e2u=e2u,
                a11=a11, a12=a12, a22=a22, m11=m11, m12=m12, m22=m22,
                alpha=alpha, gamma=gamma, beta=co.discriminant)


def ma_residual(u, P):
    """Pointwise Monge-Ampere residual of u for the problem P.

    det_{I*}((a-b+c)(II* + Hess(u) - du o du + (1/2)|du|^2 I*) + (c-a) e^{2u} I*)
    - (b^2 - 4ac) e^{4u}, with det_{I*}(T) = det((I*)^{-1} T).
    """
    pieces = _conformal_pieces(P, u.values if isinstance(u, ScalarField) else u)
    detA = pieces["a11"] * pieces["a22"] - pieces["a12"] ** 2
    vals = detA / pieces["e2w"] ** 2 - pieces["beta"] * pieces["e2u"] ** 2
    return ScalarField(P.chart, vals)


def ma_residual_operator_form(u, P):
    """Same residual assembled from the shape-operator form of the equation.

    det((a-b+c)(B* + Hess#(u) - du o Du + (1/2)|du|^2 E) + (c-a) e^{2u} E)
    - (b^2 - 4ac) e^{4u}; agrees with ma_residual to round-off.
    """
    pieces = _conformal_pieces(P, u.values if isinstance(u, ScalarField) else u)
    inv = 1.0 / pieces["e2w"]
    o11 = pieces["alpha"] * pieces["m11"] * inv + pieces["gamma"] * pieces["e2u"]
    o12 = pieces["alpha"] * pieces["m12"] * inv
    o22 = pieces["alpha"] * pieces["m22"] * inv + pieces["gamma"] * pieces["e2u"]
    det = o11 * o22 - o12 * o12
    return ScalarField(P.chart, det - pieces["beta"] * pieces["e2u"] ** 2)


def positivity_certificate(u_vals, P):
    """Min relative eigenvalue of II* + Bbar(I*, e^{2u} I*) against I*."""
    pieces = _conformal_pieces(P, u_vals)
    inv = 1.0 / pieces["e2w"]
    m11 = pieces["m11"] * inv
    m12 = pieces["m12"] * inv
    m22 = pieces["m22"] * inv
    tr = m11 + m22
    det = m11 * m22 - m12 * m12
    lam_min = 0.5 * tr - np.sqrt(np.maximum((0.5 * tr) ** 2 - det, 0.0))
    sel = P.chart.interior(1)
    vals = lam_min[sel]
    return float(np.nanmin(vals[np.isfinite(vals)]))


def _unknown_mask(P):
    if P.chart.periodic:
        return np.ones(P.chart.shape, dtype=bool)
    return P.chart.interior(2)


def _initial_guess(P):
    """Constant solving the spatially averaged umbilic scalar equation."""
    co = P.coeffs
    bstar = P.bstar()
    sel = P.chart.interior(1)
    lam = 0.5 * bstar.trace()[sel]
    lam_bar = float(np.nanmean(lam[np.isfinite(lam)]))
    alpha, gamma = co.a - co.b + co.c, co.c - co.a
    delta = co.a + co.b + co.c
    roots = []
    if delta != 0:
        for s in (+1.0, -1.0):
            roots.append(lam_bar * (-gamma + s * np.sqrt(co.discriminant)) / delta)
    elif gamma != 0:
        roots.append(-alpha * lam_bar / (2.0 * gamma))
    t = next((r for r in roots if np.isfinite(r) and r > 0), 1.0)
    return 0.5 * np.log(t)


def _assemble_jacobian(P, pieces, unknown):
    """Sparse exact linearization of the discrete residual over unknown nodes."""
    chart = P.chart
    ny, nx = chart.shape
    idx = -np.ones(chart.shape, dtype=int)
    order = np.argwhere(unknown)
    idx[unknown] = np.arange(len(order))

    inv4 = 1.0 / pieces["e2w"] ** 2
    alpha, gamma, beta = pieces["alpha"], pieces["gamma"], pieces["beta"]
    a11, a12, a22 = pieces["a11"], pieces["a12"], pieces["a22"]
    sx = pieces["wx"] + pieces["ux"]
    sy = pieces["wy"] + pieces["uy"]

    c_xx = inv4 * alpha * a22
    c_yy = inv4 * alpha * a11
    c_xy = -2.0 * inv4 * alpha * a12
    c_x = inv4 * alpha * (sx * (a11 - a22) + 2.0 * sy * a12)
    c_y = inv4 * alpha * (sy * (a22 - a11) + 2.0 * sx * a12)
    c_0 = (inv4 * 2.0 * gamma * pieces["e2u"] * pieces["e2w"] * (a11 + a22)
           - 4.0 * beta * pieces["e2u"] ** 2)

    dx, dy = chart.dx, chart.dy
    stencil = [
        ((0, 1), c_xx / dx**2 + c_x / (2 * dx)),
        ((0, -1), c_xx / dx**2 - c_x / (2 * dx)),
        ((1, 0), c_yy / dy**2 + c_y / (2 * dy)),
        ((-1, 0), c_yy / dy**2 - c_y / (2 * dy)),
        ((0, 0), -2.0 * c_xx / dx**2 - 2.0 * c_yy / dy**2 + c_0),
        ((1, 1), c_xy / (4 * dx * dy)),
        ((-1, -1), c_xy / (4 * dx * dy)),
        ((1, -1), -c_xy / (4 * dx * dy)),
        ((-1, 1), -c_xy / (4 * dx * dy)),
    ]

    jj, ii = np.nonzero(unknown)
    rows, cols, data = [], [], []
    for (oj, oi), coeff in stencil:
        tj, ti = jj + oj, ii + oi
        if chart.periodic:
            tj, ti = tj % ny, ti % nx
            keep = np.ones(len(jj), dtype=bool)
        else:
            keep = (tj >= 0) & (tj < ny) & (ti >= 0) & (ti < nx)
        tcol = idx[tj[keep], ti[keep]]
        inside = tcol >= 0  # neighbors outside the unknown set hold fixed u
        rows.append(idx[jj[keep], ii[keep]][inside])
        cols.append(tcol[inside])
        data.append(coeff[jj[keep], ii[keep]][inside])
    n = len(order)
    return sparse.csr_matrix((np.concatenate(data),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))


def ma_newton_solve(P, cfg=NewtonConfig(), u0=None):
    """Damped Newton solve of the Monge-Ampere equation for the problem P.

    The linearization is the exact derivative of the discrete residual
    (adjugate form of the determinant derivative plus the conformal-Hessian
    rule); backtracking halves the step until the sup-residual decreases.
    """
    if not P.coeffs.elliptic:
        raise NotElliptic(f"b^2 - 4ac = {P.coeffs.discriminant} <= 0")
    chart = P.chart
    unknown = _unknown_mask(P)

    if u0 is None:
        u_vals = np.full(chart.shape, _initial_guess(P))
    elif isinstance(u0, ScalarField):
        u_vals = u0.values.copy()
    else:
        u_vals = np.full(chart.shape, float(u0))
    if not chart.periodic:
        u_vals[~unknown] = P.boundary_value

    def sup_res(vals):
        r = ma_residual(vals, P).values
        return float(np.nanmax(np.abs(r[unknown])))

    trace = [sup_res(u_vals)]
    pinned = False
    for _ in range(cfg.max_iter):
        if trace[-1] < cfg.tol:
            break
        pieces = _conformal_pieces(P, u_vals)
        J = _assemble_jacobian(P, pieces, unknown)
        detA = pieces["a11"] * pieces["a22"] - pieces["a12"] ** 2
        F = detA / pieces["e2w"] ** 2 - pieces["beta"] * pieces["e2u"] ** 2
        rhs = -F[unknown]
        v = sparse_linalg.spsolve(J, rhs)
        lin_res = np.linalg.norm(J @ v - rhs)
        if not np.isfinite(v).all() or lin_res > 1e-8 * max(np.linalg.norm(rhs), 1e-300):
            # constant-direction kernel: pin the mean of the correction
            pinned = True
            aug = sparse.vstack([J, sparse.csr_matrix(np.ones((1, J.shape[0])))])
            rhs_aug = np.concatenate([rhs, [0.0]])
            v = sparse_linalg.lsqr(aug, rhs_aug, atol=1e-14, btol=1e-14)[0]

        step = 1.0
        improved = False
        for _ in range(cfg.max_halvings if cfg.damping else 1):
            trial = u_vals.copy()
            trial[unknown] += step * v
            r = sup_res(trial)
            if r < trace[-1]:
                u_vals, improved = trial, True
                trace.append(r)
                break
            step *= 0.5
        if not improved:
            raise NewtonDiverged(trace)
    else:
        if trace[-1] >= cfg.tol:
            raise NewtonDiverged(trace, "max_iter reached")

    cert = positivity_certificate(u_vals, P)
    return MASolution(u=ScalarField(chart, u_vals), newton_trace=trace,
                      positivity_certificate=cert, accepted=cert > 0.0,
                      pinned=pinned)


def verify_solution_geometrically(sol, P, depth=3):
    """Rebuild the envelope surface of e^{2u} I* and check the surface equation.

    Returns the sup of |a K_e + b H + c| on the reconstructed surface plus
    the tameness margin -- the end-to-end closure of the solve.
    """
    metric = P.istar.conformal(sol.u)
    surf = epstein_surface(metric)
    D = fundamental_forms(surf)
    resid = weingarten_residual_surface(D, P.coeffs)
    tame, margin = htame_check(D)
    sel = P.chart.interior(depth)
    return {
        "weingarten_sup": sup_interior(resid.values, P.chart, depth),
        "tame_margin": margin,
        "all_tame": bool(np.all(tame[sel & D.valid])),
    }
