"""Adaptive isogeometric boundary element method for 2D Laplace problems.

Galerkin discretizations of the weakly-singular and hyper-singular integral
equations on closed NURBS curves, with local mesh refinement driven by
weighted-residual error estimation and multiplicity-based smoothness control.
"""

__version__ = "0.1.0"
