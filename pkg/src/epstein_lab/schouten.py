"""Schouten tensor of conformally flat metrics on the 3-torus.

Fields live on periodic n x n x n grids (plain ndarrays indexed [k, j, i]
for (z, y, x)); derivatives are second-order centered with wraparound.
Two routes to the Schouten tensor are kept deliberately separate: the closed
conformal transformation law from the flat base, and an assembly from
finite-difference Christoffel symbols and the Ricci tensor, used as an
independent curvature oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedDimension


def _check_dim(d):
    if d != 3:
        raise UnsupportedDimension(f"only d = 3 is supported, got {d}")


def grad3(u, spacings):
    """Periodic centered gradient, shape (3,) + u.shape; component i is d/dx_i."""
    axes = (2, 1, 0)  # x, y, z
    return np.stack([(np.roll(u, -1, axis=ax) - np.roll(u, 1, axis=ax)) / (2.0 * h)
                     for ax, h in zip(axes, spacings)])


def hess3(u, spacings):
    """Periodic centered Hessian, shape (3, 3) + u.shape."""
    axes = (2, 1, 0)
    out = np.empty((3, 3) + u.shape)
    for i in range(3):
        hi, ai = spacings[i], axes[i]
        out[i, i] = (np.roll(u, -1, axis=ai) - 2.0 * u + np.roll(u, 1, axis=ai)) / hi**2
    g = grad3(u, spacings)
    for i in range(3):
        for j in range(i + 1, 3):
            hj, aj = spacings[j], axes[j]
            mixed = (np.roll(g[i], -1, axis=aj) - np.roll(g[i], 1, axis=aj)) / (2.0 * hj)
            out[i, j] = mixed
            out[j, i] = mixed
    return out


def schouten_conformal(u, spacings, d=3):
    """Schouten tensor of e^{2u} * delta on the flat torus, via the conformal law.

    Returns (schouten, h2) with h2 = -schouten, both shape (3, 3) + u.shape.
    """
    _check_dim(d)
    du = grad3(u, spacings)
    hess = hess3(u, spacings)
    norm2 = np.einsum("i...,i...->...", du, du)
    eye = np.eye(3)[(...,) + (None,) * u.ndim]
    sch = -hess + np.einsum("i...,j...->ij...", du, du) - 0.5 * norm2 * eye
    return sch, -sch


def hessian_conformal3(w, v, spacings):
    """Hessian of v for the metric e^{2w} * delta on the torus.

    Same conformal rule as in two dimensions:
    Hess_flat(v) - 2 sym(dw o dv) + <dw, dv> delta.
    """
    dw = grad3(w, spacings)
    dv = grad3(v, spacings)
    dot = np.einsum("i...,i...->...", dw, dv)
    eye = np.eye(3)[(...,) + (None,) * w.ndim]
    sym = np.einsum("i...,j...->ij...", dw, dv)
    sym = 0.5 * (sym + np.swapaxes(sym, 0, 1))
    return hess3(v, spacings) - 2.0 * sym + dot * eye


def conformal_change_residual3(w, u, spacings):
    """Residual of the second-expansion-coefficient law at d = 3.

    For h0 = e^{2w} delta and h0' = e^{2u} h0 the coefficients h2 = -Schouten
    must satisfy  h2' - h2 = Hess_{h0}(u) - du o du + (1/2)|du|_{h0}^2 h0.
    Returns the sup-norm of the difference of both sides.
    """
    _, h2 = schouten_conformal(w, spacings)
    _, h2p = schouten_conformal(w + u, spacings)
    du = grad3(u, spacings)
    e2w = np.exp(2.0 * w)
    norm2 = np.einsum("i...,i...->...", du, du) / e2w
    eye = np.eye(3)[(...,) + (None,) * w.ndim]
    rhs = (hessian_conformal3(w, u, spacings)
           - np.einsum("i...,j...->ij...", du, du)
           + 0.5 * norm2 * e2w * eye)
    return float(np.max(np.abs(h2p - h2 - rhs)))


# ---------------------------------------------------------------------------
# independent oracle: Christoffel symbols and Ricci by finite differences


def ricci_fd(metric, spacings):
    """Ricci tensor of a metric field (3, 3) + grid by FD Christoffel symbols."""
    ginv = np.linalg.inv(np.moveaxis(metric, (0, 1), (-2, -1)))
    ginv = np.moveaxis(ginv, (-2, -1), (0, 1))
    dg = np.stack([grad3(metric[i, j], spacings) for i in range(3) for j in range(3)])
    dg = dg.reshape((3, 3, 3) + metric.shape[2:])  # dg[i, j, k] = d_k g_ij
    dg = np.moveaxis(dg, 2, 0)                     # dg[k, i, j] = d_k g_ij

    # Gamma^k_ij = (1/2) g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    gamma = np.empty((3, 3, 3) + metric.shape[2:])
    for k in range(3):
        for i in range(3):
            for j in range(3):
                s = np.zeros(metric.shape[2:])
                for l in range(3):
                    s += ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                gamma[k, i, j] = 0.5 * s

    dgamma = np.stack([grad3(gamma[k, i, j], spacings)
                       for k in range(3) for i in range(3) for j in range(3)])
    dgamma = dgamma.reshape((3, 3, 3, 3) + metric.shape[2:])  # [k, i, j, m] = d_m G^k_ij
    dgamma = np.moveaxis(dgamma, 3, 0)                        # [m, k, i, j]

    ric = np.empty((3, 3) + metric.shape[2:])
    for i in range(3):
        for j in range(3):
            term = np.zeros(metric.shape[2:])
            for k in range(3):
                term += dgamma[k, k, i, j] - dgamma[i, k, k, j]
                for l in range(3):
                    term += gamma[k, k, l] * gamma[l, i, j] - gamma[k, i, l] * gamma[l, k, j]
            ric[i, j] = term
    return ric


def schouten_fd_oracle(u, spacings, d=3):
    """Schouten tensor of e^{2u} * delta assembled from the FD Ricci oracle.

    Sch = (Ric - Scal/(2(d-1)) g) / (d - 2).
    """
    _check_dim(d)
    e2u = np.exp(2.0 * u)
    eye = np.eye(3)[(...,) + (None,) * u.ndim]
    metric = e2u * eye
    ric = ricci_fd(metric, spacings)
    ginv_diag = 1.0 / e2u
    scal = ginv_diag * (ric[0, 0] + ric[1, 1] + ric[2, 2])
    return (ric - scal / (2.0 * (d - 1)) * metric) / (d - 2)
