"""Minkowski R^{3,1}, the hyperboloid model of H^3 and the light cone.

Vectors are ndarrays with a trailing axis of length 4 and inner product
<x, y> = -x0 y0 + x1 y1 + x2 y2 + x3 y3.  The future light cone doubles as
the space of horospheres: the null vector sigma stands for the horosphere
{ x in H^3 : <x, sigma> = -INCIDENCE }.

The incidence constant is calibrated once and for all so that the envelope
surface of a constant conformal metric e^{2u0}|dz|^2 has first-form-at-
infinity (I + 2 II + III)/2 equal to e^{2u0}|dz|^2: a horizontal plane at
height t in the upper half-space picture has induced metric |dz|^2/t^2 and
is umbilic with unit principal curvatures, so the combination equals
2|dz|^2/t^2 and the plane must sit at t = sqrt(2) e^{-u0}, which back-solves
the incidence constant to 1/sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrame, NoRealRoot
from .grid import ScalarField

#: horosphere incidence constant, pinned by the plane calibration above
INCIDENCE = 1.0 / np.sqrt(2.0)

_SIGN = np.array([-1.0, 1.0, 1.0, 1.0])


def mink_inner(x, y):
    """Bilinear form of signature (-, +, +, +) on trailing 4-vectors."""
    return np.einsum("...i,...i->...", np.asarray(x) * _SIGN, np.asarray(y))


def mink_norm2(x):
    return mink_inner(x, x)


def standard_null_section(z):
    """Null vector over the boundary chart, calibrated so <dl, dl> = |dz|^2.

    l(z) = (1 + |z|^2, 2 Re z, 2 Im z, 1 - |z|^2) / 2.
    """
    z = np.asarray(z)
    r2 = np.abs(z) ** 2
    return 0.5 * np.stack([1.0 + r2, 2.0 * z.real, 2.0 * z.imag, 1.0 - r2], axis=-1)


#: constant null partner with <m, l(z)> = -1 and d^2 l = delta_ij m
NULL_PARTNER = np.array([1.0, 0.0, 0.0, -1.0])


def boundary_chart_point(p):
    """Chart coordinate of a future null direction: (p1 + i p2)/(p0 + p3).

    Inverse of standard_null_section up to positive scale.
    """
    p = np.asarray(p)
    denom = p[..., 0] + p[..., 3]
    return (p[..., 1] + 1j * p[..., 2]) / denom


def to_poincare_ball(x):
    """Hyperboloid point to Poincare-ball coordinates (x1, x2, x3)/(1 + x0)."""
    x = np.asarray(x)
    return x[..., 1:] / (1.0 + x[..., 0])[..., None]


def from_poincare_ball(p):
    """Inverse ball map; |p| < 1."""
    p = np.asarray(p)
    s = np.sum(p * p, axis=-1)
    x0 = (1.0 + s) / (1.0 - s)
    rest = 2.0 * p / (1.0 - s)[..., None]
    return np.concatenate([x0[..., None], rest], axis=-1)


def hyperboloid_residual(x):
    """|<x, x> + 1|, zero on the hyperboloid."""
    return np.abs(mink_norm2(x) + 1.0)


@dataclass(frozen=True)
class LightConeSection:
    """Per-node null vector sigma = e^{u} l(z) built from a conformal metric.

    The log factor is taken relative to the flat base, so the pullback of
    the degenerate cone metric is exactly the metric it was built from.
    """

    chart: object
    log_factor: ScalarField
    values: np.ndarray  # (ny, nx, 4)

    @classmethod
    def from_metric(cls, h, scale=0.0):
        """Section of the metric e^{2 scale} h; scale shifts the log factor."""
        chart = h.chart
        w = h.flat_log_factor() + scale
        sigma = np.exp(w.values)[..., None] * standard_null_section(chart.zz())
        return cls(chart, w, sigma)

    def null_residual(self):
        return float(np.nanmax(np.abs(mink_norm2(self.values))))


def horosphere_solve(sigma, d1, d2, orientation=+1, incidence=INCIDENCE,
                     cond_tol=1e10):
    """Envelope point(s) of a horosphere family from a frame (sigma, d1, d2).

    Solves <x, sigma> = -incidence, <x, d1> = 0, <x, d2> = 0, <x, x> = -1.
    The three linear constraints leave an affine line; meeting the
    hyperboloid gives a quadratic whose genuine branch (orientation +1) is
    the root nearer the base of the cone, i.e. with the smaller time
    coordinate among future-sheet roots -- the branch whose normal geodesic
    heads to the base point of sigma, as locked by the geodesic-plane test.

    Accepts batched inputs with trailing axis 4; returns points of the same
    batch shape.  Raises DegenerateFrame / NoRealRoot on scalar input;
    batched input returns NaN rows for failed nodes (caller masks/reports).
    """
    sigma = np.asarray(sigma, dtype=float)
    scalar_input = sigma.ndim == 1
    sigma = np.atleast_2d(sigma)
    d1 = np.atleast_2d(np.asarray(d1, dtype=float))
    d2 = np.atleast_2d(np.asarray(d2, dtype=float))
    batch = sigma.shape[:-1]

    rows = np.stack([sigma, d1, d2], axis=-2)          # (..., 3, 4)
    M = rows * _SIGN                                   # Minkowski pairings as plain rows
    rhs = np.zeros(batch + (3,))
    rhs[..., 0] = -incidence

    finite = np.isfinite(M).all(axis=(-1, -2))
    M = np.where(finite[..., None, None], M, 0.0)
    U, S, Vt = np.linalg.svd(M, full_matrices=True)
    bad = ~finite | (S[..., 2] * cond_tol < S[..., 0]) | (S[..., 0] == 0)
    with np.errstate(divide="ignore"):
        sinv = np.where(S > 0, 1.0 / S, 0.0)
    # min-norm particular solution and the kernel direction of M
    x0 = np.einsum("...ij,...j->...i", np.swapaxes(Vt, -1, -2)[..., :3] * sinv[..., None, :],
                   np.einsum("...ij,...i->...j", U, rhs))
    v = Vt[..., 3, :]

    a = mink_norm2(v)
    b = 2.0 * mink_inner(x0, v)
    c = mink_norm2(x0) + 1.0
    disc = b * b - 4.0 * a * c

    failed = bad | (disc < 0)
    disc = np.where(disc < 0, np.nan, disc)
    sq = np.sqrt(disc)
    # stable quadratic roots; the near-null kernel direction makes |a| tiny
    qq = -0.5 * (b + np.sign(np.where(b == 0, 1.0, b)) * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(np.abs(a) > 0, qq / np.where(a == 0, np.nan, a), np.nan)
        t2 = np.where(np.abs(qq) > 0, c / qq, np.nan)
    cand = np.stack([x0 + t1[..., None] * v, x0 + t2[..., None] * v], axis=-2)

    time = cand[..., 0]
    future = time > 0
    resid = np.abs(mink_norm2(cand) + 1.0)
    ok = future & np.isfinite(resid) & (resid < 1e-6)
    # prefer the genuine (bounded) root: smaller time coordinate, orientation -1
    # picks the branch escaping up the cone when it exists
    time_sel = np.where(ok, time, np.inf if orientation > 0 else -np.inf)
    idx = np.argmin(time_sel, axis=-1) if orientation > 0 else np.argmax(time_sel, axis=-1)
    point = np.take_along_axis(cand, idx[..., None, None].repeat(4, axis=-1), axis=-2)[..., 0, :]
    none_ok = ~ok.any(axis=-1)
    failed = failed | none_ok
    point = np.where(failed[..., None], np.nan, point)

    if scalar_input:
        if bad.any():
            raise DegenerateFrame("frame vectors are numerically dependent")
        if failed.any():
            raise NoRealRoot("no future-sheet intersection with the hyperboloid")
        return point[0]
    return point


def lorentz_boost(direction, rapidity):
    """Pure boost along a unit spatial direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    L = np.eye(4)
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    L[0, 0] = ch
    L[0, 1:] = sh * d
    L[1:, 0] = sh * d
    L[1:, 1:] = np.eye(3) + (ch - 1.0) * np.outer(d, d)
    return L


def random_time_preserving_lorentz(rng, max_rapidity=1.0):
    """Seeded element of the identity component: rotation o boost o rotation."""
    def rotation():
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1.0
        R = np.eye(4)
        R[1:, 1:] = q
        return R

    boost = lorentz_boost(rng.normal(size=3), rng.uniform(-max_rapidity, max_rapidity))
    return rotation() @ boost @ rotation()


def apply_lorentz(L, x):
    return np.einsum("ij,...j->...i", L, np.asarray(x))
