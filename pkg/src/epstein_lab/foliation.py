"""Measured foliations on flat tori: extremal length, energy, pairings.

A slope-(p, q) foliation with transverse weight w on the torus C/(Z + tau Z)
is realized horizontally by the constant quadratic differential

    Q = w^2 (p + q conj(tau))^2 / (Im tau)^2 dz^2,

pinned so that the transverse measure pairs with the curve class (m, n) as
w |p n - q m| and the extremal length ext = integral |Q| agrees with the
classical curve-family value w^2 |p + q tau|^2 / Im tau (verified against a
brute-force modulus maximization in the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StepTooLarge, ZeroDifferential
from .grid import SymTensor2Field, quadrature, tensor_pairing
from .schwarzian import QuadDiffField


@dataclass(frozen=True)
class TorusModulus:
    tau: complex

    def __post_init__(self):
        if self.tau.imag <= 0:
            raise ValueError("torus modulus needs Im tau > 0")


@dataclass(frozen=True)
class TorusQuadDiff:
    """Constant quadratic differential A dz^2 on the torus."""

    coeff: complex

    def abs_integral(self, tau):
        return abs(self.coeff) * tau.imag


@dataclass(frozen=True)
class SlopeFoliation:
    """Measured foliation with closed leaves of slope (p, q), weight w > 0."""

    p: int
    q: int
    weight: float = 1.0

    def __post_init__(self):
        if math.gcd(self.p, self.q) != 1:
            raise ValueError("slope (p, q) must be coprime")
        if self.weight <= 0:
            raise ValueError("weight must be positive")


@dataclass(frozen=True)
class MetricVariation:
    """Traceless h-self-adjoint endomorphism field u with hdot = h(u . , .)."""

    chart: object
    values: np.ndarray  # (ny, nx, 2, 2)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        tr = np.abs(v[..., 0, 0] + v[..., 1, 1]).max()
        asym = np.abs(v[..., 0, 1] - v[..., 1, 0]).max()
        if tr > 1e-10 or asym > 1e-10:
            raise ValueError("variation must be traceless and self-adjoint for flat h")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_entries(cls, chart, a, b):
        v = np.empty((chart.ny, chart.nx, 2, 2))
        v[..., 0, 0] = a
        v[..., 0, 1] = b
        v[..., 1, 0] = b
        v[..., 1, 1] = -np.asarray(a) * np.ones(chart.shape)
        return cls(chart, v)


def horizontal_direction_field(Q, eps=1e-14):
    """Unit direction e^{i theta} with Q e^{2 i theta} real positive.

    Zeros of Q are foliation singularities: scalar input raises, field input
    returns NaN there.
    """
    if isinstance(Q, TorusQuadDiff):
        if abs(Q.coeff) < eps:
            raise ZeroDifferential("constant differential vanishes")
        return np.exp(-0.5j * np.angle(Q.coeff))
    vals = Q.values if isinstance(Q, QuadDiffField) else np.asarray(Q)
    theta = -0.5 * np.angle(vals)
    out = np.exp(1j * theta)
    return np.where(np.abs(vals) < eps, np.nan, out)


def torus_foliation_Q(f, modulus):
    """The unique constant Q with horizontal foliation f on the torus."""
    tau = modulus.tau
    a = (f.weight * (f.p + f.q * np.conj(tau)) / tau.imag) ** 2
    return TorusQuadDiff(complex(a))


def extremal_length_from_Q(Q, modulus_or_chart):
    """Integral of |Q| against the flat area element."""
    if isinstance(Q, TorusQuadDiff):
        return Q.abs_integral(modulus_or_chart.tau)
    chart = Q.chart if isinstance(Q, QuadDiffField) else modulus_or_chart
    return quadrature(np.abs(Q.values), chart)


def extremal_length(f, modulus):
    """Closed-form ext = w^2 |p + q tau|^2 / Im tau (equals integral |Q|)."""
    tau = modulus.tau
    return f.weight**2 * abs(f.p + f.q * tau) ** 2 / tau.imag


def foliation_energy(f, modulus):
    """Energy of the harmonic map to the dual tree: E = 2 ext."""
    return 2.0 * extremal_length(f, modulus)


def torus_deformation_beltrami(tau, direction, eps):
    """Beltrami coefficient of the affine map between the tau and tau + eps*d lattices.

    The map z -> a z + b zbar fixing 1 and sending tau to tau + eps*d has
    b = eps d / (conj(tau) - tau); returns mu = b / a.
    """
    b = eps * direction / (np.conj(tau) - tau)
    a = 1.0 - b
    return b / a


def gardiner_residual(f, modulus, direction, eps=1e-4):
    """|central difference of E_f - (-4 Re <Phi_f, mu_dot>)| at the modulus.

    Phi_f = -Q_f, the pairing is integral of Phi * mu over the fundamental
    domain (area Im tau for constant integrands), and mu_dot is the
    derivative of the affine-deformation Beltrami at eps = 0.
    """
    tau = modulus.tau
    for s in (+1, -1):
        if (tau + s * eps * direction).imag <= 0:
            raise StepTooLarge("deformation leaves the upper half-plane")
    e_plus = foliation_energy(f, TorusModulus(tau + eps * direction))
    e_minus = foliation_energy(f, TorusModulus(tau - eps * direction))
    lhs = (e_plus - e_minus) / (2.0 * eps)

    phi = -torus_foliation_Q(f, modulus).coeff
    mu_dot = direction / (np.conj(tau) - tau)  # d/d eps of b/a at eps = 0
    pairing = (phi * mu_dot * tau.imag).real
    return abs(lhs + 4.0 * pairing)


def beltrami_from_variation(hdot):
    """mu = (a + i b)/2 dzbar/dz for the variation with matrix ((a, b), (b, -a))."""
    a = hdot.values[..., 0, 0]
    b = hdot.values[..., 0, 1]
    return 0.5 * (a + 1j * b)


def pairing_residual(q_vals, hdot, rho2, chart, factor=4.0):
    """|integral <Re q, hdot>_h da_h - factor * Re(integral q mu)| on a flat torus.

    ``q_vals`` is the complex field of q dz^2, ``rho2`` the constant conformal
    factor of h = rho2 |dz|^2; the correct constant is factor = 4 and the
    anti-regression tests perturb it.
    """
    q_vals = np.asarray(q_vals) * np.ones(chart.shape)
    req = SymTensor2Field.from_components(chart, q_vals.real, -q_vals.imag, -q_vals.real)
    a = hdot.values[..., 0, 0] * rho2
    b = hdot.values[..., 0, 1] * rho2
    hdot_tensor = SymTensor2Field.from_components(chart, a, b, -a)
    metric = SymTensor2Field.from_components(
        chart, rho2 * np.ones(chart.shape), np.zeros(chart.shape),
        rho2 * np.ones(chart.shape))
    lhs = tensor_pairing(req, hdot_tensor, metric)
    mu = beltrami_from_variation(hdot)
    rhs = factor * quadrature((q_vals * mu).real, chart)
    return abs(lhs - rhs)


def nehari_ext_certificate(q_field, hyp, chart=None, bound=1.5):
    """Check integral |q| <= bound * hyperbolic area on a disk chart.

    ``q_field`` should come from the Schwarzian of a univalent map, so the
    pointwise bound |q|/rho <= 3/2 makes the certificate pass; synthetic
    oversized differentials are the negative control.
    """
    chart = chart if chart is not None else q_field.chart
    total = quadrature(np.abs(q_field.values), chart)
    area = hyp.area()
    ok = total <= bound * area + 1e-12
    return {"q_integral": total, "hyp_area": area, "bound": bound,
            "margin": bound * area - total, "passes": bool(ok)}
