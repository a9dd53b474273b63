"""Holomorphic maps with evaluators for f, f', f'', f'''.

Built-in maps carry all four derivatives in closed form.  Maps sampled on a
grid fall back to finite differences along the x-direction of the chart
(valid for holomorphic data); the 5-point window gives fourth-order f', f''
but only second-order f''', so sampled Schwarzians are one order lossy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CriticalPoint

CRITICAL_TOL = 1e-13


@dataclass(frozen=True)
class HolomorphicMap:
    """Closed-form evaluator bundle (f, f', f'', f''')."""

    name: str
    f: Callable
    f1: Callable
    f2: Callable
    f3: Callable

    def __call__(self, z):
        return self.f(z)

    def derivatives(self, z):
        return self.f(z), self.f1(z), self.f2(z), self.f3(z)

    def check_noncritical(self, z):
        fp = np.asarray(self.f1(z))
        bad = np.abs(fp) < CRITICAL_TOL
        if np.any(bad & np.isfinite(fp.real)):
            where = np.asarray(z)[bad] if np.asarray(z).shape else z
            raise CriticalPoint(where)


def mobius(a, b, c, d):
    """The map z -> (az + b)/(cz + d); requires ad - bc != 0."""
    det = a * d - b * c
    if det == 0:
        raise ValueError("mobius map needs ad - bc != 0")
    return HolomorphicMap(
        name=f"mobius:{a},{b},{c},{d}",
        f=lambda z: (a * z + b) / (c * z + d),
        f1=lambda z: det / (c * z + d) ** 2,
        f2=lambda z: -2.0 * c * det / (c * z + d) ** 3,
        f3=lambda z: 6.0 * c**2 * det / (c * z + d) ** 4,
    )


EXP = HolomorphicMap("exp", np.exp, np.exp, np.exp, np.exp)

LOG = HolomorphicMap("log", np.log,
                     lambda z: 1.0 / z,
                     lambda z: -1.0 / z**2,
                     lambda z: 2.0 / z**3)

SQUARE = HolomorphicMap("square",
                        lambda z: z**2,
                        lambda z: 2.0 * z,
                        lambda z: 2.0 * np.ones_like(z),
                        lambda z: np.zeros_like(z))

KOEBE = HolomorphicMap("koebe",
                       lambda z: z / (1.0 - z) ** 2,
                       lambda z: (1.0 + z) / (1.0 - z) ** 3,
                       lambda z: (4.0 + 2.0 * z) / (1.0 - z) ** 4,
                       lambda z: (18.0 + 6.0 * z) / (1.0 - z) ** 5)

IDENTITY = mobius(1.0, 0.0, 0.0, 1.0)


def compose(g, f):
    """g after f, with derivatives assembled by the chain rule."""
    def c0(z):
        return g.f(f.f(z))

    def c1(z):
        return g.f1(f.f(z)) * f.f1(z)

    def c2(z):
        w, w1, w2 = f.f(z), f.f1(z), f.f2(z)
        return g.f2(w) * w1**2 + g.f1(w) * w2

    def c3(z):
        w, w1, w2, w3 = f.derivatives(z)
        return g.f3(w) * w1**3 + 3.0 * g.f2(w) * w1 * w2 + g.f1(w) * w3

    return HolomorphicMap(f"{g.name}o{f.name}", c0, c1, c2, c3)


def strip_uniformizer():
    """Riemann map of the strip {0 < Im z < pi} onto the unit disk.

    exp sends the strip to the upper half-plane, then (w - i)/(w + i) sends
    the half-plane to the disk; the Schwarzian is -1/2 dz^2 on the strip.
    """
    cayley = mobius(1.0, -1.0j, 1.0, 1.0j)
    m = compose(cayley, EXP)
    return HolomorphicMap("strip-uniformizer", m.f, m.f1, m.f2, m.f3)


def half_plane_uniformizer():
    """Mobius map of the upper half-plane onto the unit disk."""
    m = mobius(1.0, -1.0j, 1.0, 1.0j)
    return HolomorphicMap("half-plane-uniformizer", m.f, m.f1, m.f2, m.f3)


def sampled_map(fn, chart):
    """Derivative evaluators from grid samples of a holomorphic function.

    f' and f'' use the fourth-order 5-point stencils, f''' the second-order
    one, all along the x-direction of the chart; only nodes at least two
    columns away from a chart edge are valid.
    """
    h = chart.dx

    def shift(z, k):
        return fn(z + k * h)

    def f1(z):
        return (-shift(z, 2) + 8 * shift(z, 1) - 8 * shift(z, -1) + shift(z, -2)) / (12 * h)

    def f2(z):
        return (-shift(z, 2) + 16 * shift(z, 1) - 30 * fn(z)
                + 16 * shift(z, -1) - shift(z, -2)) / (12 * h * h)

    def f3(z):
        return (shift(z, 2) - 2 * shift(z, 1) + 2 * shift(z, -1) - shift(z, -2)) / (2 * h**3)

    return HolomorphicMap("sampled", fn, f1, f2, f3)


def _parse_builtin(spec):
    if spec.startswith("mobius:"):
        parts = [complex(p) for p in spec.split(":", 1)[1].split(",")]
        if len(parts) != 4:
            raise ValueError("mobius spec needs four coefficients a,b,c,d")
        return mobius(*parts)
    table = {
        "exp": EXP,
        "log": LOG,
        "square": SQUARE,
        "koebe": KOEBE,
        "identity": IDENTITY,
        "strip-uniformizer": strip_uniformizer(),
        "half-plane-uniformizer": half_plane_uniformizer(),
    }
    if spec not in table:
        raise ValueError(f"unknown map {spec!r}; builtins: {sorted(table)} or mobius:a,b,c,d")
    return table[spec]


def map_from_name(spec):
    """Resolve a CLI map name like 'exp', 'koebe', 'mobius:2,1,1,1'."""
    return _parse_builtin(spec)


def random_mobius(rng, scale=1.0):
    """Seeded Mobius map with complex coefficients, conditioned away from degeneracy."""
    while True:
        a, b, c, d = (rng.normal(scale=scale) + 1j * rng.normal(scale=scale)
                      for _ in range(4))
        if abs(a * d - b * c) > 0.1:
            return mobius(a, b, c, d)
