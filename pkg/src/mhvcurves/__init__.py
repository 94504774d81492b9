"""Scattering amplitude maps of MHV curves: combinatorics, matrix models and real densities."""

from __future__ import annotations

from .scalars import DegenerateError, Mobius, Poly, ProjPoint, agm, cross_ratio

__all__ = ["DegenerateError", "Mobius", "Poly", "ProjPoint", "agm", "cross_ratio"]
__version__ = "0.1.0"
