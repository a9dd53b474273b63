"""Numerical laboratory for the geometry at infinity of hyperbolic 3-space.

Builds envelope surfaces in H^3 from conformal metrics on planar domains,
computes their fundamental forms and data at infinity, the dual surfaces in
the space of horospheres, Schwarzian derivatives and tensors, linear
Weingarten / Monge-Ampere solvers, and extremal lengths of measured
foliations on flat tori.
"""

__version__ = "0.1.0"
