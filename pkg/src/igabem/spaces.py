"""Discrete ansatz spaces over a knot mesh.

Four kinds:

- ``weak_nurbs``: the full rational spline space on the clamped knot
  vector of the mesh; dimension equals the multiplicity-weighted knot
  count #N.
- ``hyper_nurbs``: same space with the two endpoint basis functions merged
  into one periodic function (value at the seam matched from both sides);
  dimension #N - 1.  Requires equal first/last weights.
- ``pw_poly_discontinuous``: per-element Legendre polynomials in the
  parameter variable; dimension (p+1) * #elements.
- ``pw_poly_continuous``: continuous transformed piecewise polynomials,
  realized as the unit-weight spline space with all interior
  multiplicities at p, endpoint-merged; dimension p * #elements.

Basis indexing is 0-based; textbook spline indices i = 1-p .. N-p map to
j = i + p - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import splines as sp

KINDS = ("hyper_nurbs", "weak_nurbs", "pw_poly_discontinuous", "pw_poly_continuous")


@dataclass(eq=False, frozen=True)
class DiscreteSpace:
    kind: str
    mesh: object
    p: int
    knots: np.ndarray  # clamped knot vector (spline kinds); breaks (pw kind)
    weights: np.ndarray  # per spline basis function; unused for pw kind
    dim: int
    merged: bool  # endpoint pair identified

    @property
    def num_full(self):
        """Number of underlying spline functions before endpoint merging."""
        if self.kind == "pw_poly_discontinuous":
            return self.dim
        return sp.num_basis(self.knots, self.p)

    def expand(self, coefs):
        """Coefficients on the merged basis -> full spline coefficients."""
        coefs = np.asarray(coefs, dtype=float)
        if not self.merged:
            return coefs
        return np.concatenate([coefs, coefs[:1]])

    def contract(self, full):
        """Inverse of expand; endpoint coefficients must agree."""
        full = np.asarray(full, dtype=float)
        if not self.merged:
            return full
        if abs(full[0] - full[-1]) > 1e-9 * (1.0 + np.abs(full).max()):
            raise ValueError("endpoint coefficients differ; not a merged-space member")
        return full[:-1]

    def eval(self, coefs, t, order=0):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "pw_poly_discontinuous":
            return self._eval_pw(coefs, t, order)
        full = self.expand(coefs)
        span, vals, ders = sp.nurbs_funs_derivs(self.knots, self.p, self.weights, t)
        table = vals if order == 0 else ders
        idx = span[:, None] - self.p + np.arange(self.p + 1)[None, :]
        return np.einsum("nk,nk->n", table, full[idx])

    def _eval_pw(self, coefs, t, order):
        breaks = self.knots  # stored breakpoints for the pw kind
        e = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, len(breaks) - 2)
        lo, hi = breaks[e], breaks[e + 1]
        xi = 2.0 * (t - lo) / (hi - lo) - 1.0
        c = np.asarray(coefs, dtype=float).reshape(-1, self.p + 1)
        out = np.zeros(len(t))
        for k in range(self.p + 1):
            ck = np.zeros(k + 1)
            ck[k] = 1.0
            leg = np.polynomial.legendre.legval(xi, ck)
            if order == 1:
                dk = np.polynomial.legendre.legder(ck)
                leg = np.polynomial.legendre.legval(xi, dk) * 2.0 / (hi - lo)
            out += c[e, k] * leg
        return out

    def element_span(self, e):
        """Knot-vector span index of element e (spline kinds)."""
        mults = self.mesh.mults if self.kind != "pw_poly_continuous" else None
        if self.kind == "pw_poly_discontinuous":
            raise ValueError("no spans for the discontinuous polynomial kind")
        if mults is None:
            mults = (self.p + 1,) + (self.p,) * (self.mesh.num_elements - 1)
        return self.p + sum(mults[1 : e + 1])

    def active_full(self, e):
        """Global indices of the p+1 spline functions alive on element e."""
        span = self.element_span(e)
        return np.arange(span - self.p, span + 1)

    def active_coef(self, e):
        """Coefficient indices for element e (merged index folded to 0)."""
        idx = self.active_full(e)
        if self.merged:
            idx = np.where(idx == self.num_full - 1, 0, idx)
        return idx


@dataclass(eq=False)
class DiscreteSolution:
    space: DiscreteSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.dim,):
            raise ValueError("coefficient length must equal the space dimension")

    def __call__(self, t, order=0):
        return self.space.eval(self.coefficients, t, order)


def mesh_knot_vector(mesh, mults=None):
    """Clamped knot vector of a mesh as floats (dyadic, hence exact)."""
    mults = mesh.mults if mults is None else mults
    out = [0.0] * (mesh.p + 1)
    for z, m in zip(mesh.nodes[1:], mults[1:]):
        out.extend([float(z)] * m)
    out.extend([1.0] * (mesh.p + 1))
    return np.array(out)


def _initial_knot_vector(mesh):
    p = mesh.p
    out = [0.0] * (p + 1)
    for z, m in mesh.initial[1:]:
        out.extend([float(z)] * m)
    out.extend([1.0] * (p + 1))
    return np.array(out)


def propagate_weights(mesh, initial_weights, target_knots):
    """Weights of the refined basis, from repeated knot insertion.

    The weight function itself is preserved exactly; the returned vector
    are its coefficients on the refined knot vector.
    """
    knots = _initial_knot_vector(mesh)
    w = np.asarray(initial_weights, dtype=float)
    if len(w) != sp.num_basis(knots, mesh.p):
        raise ValueError("one weight per initial basis function required")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    inserts = []
    have = list(knots)
    for x in target_knots:
        if x in have:
            have.remove(x)
        else:
            inserts.append(x)
    knots, w = sp.refine_coefficients(knots, mesh.p, w, sorted(inserts))
    if not np.array_equal(knots, target_knots):
        raise ValueError("mesh is not a refinement of its initial mesh")
    return w


def build_space(mesh, kind, initial_weights=None):
    if kind not in KINDS:
        raise ValueError(f"unknown space kind '{kind}'")
    p = mesh.p
    if kind == "pw_poly_discontinuous":
        breaks = np.array([float(b) for b in mesh.breaks])
        dim = (p + 1) * mesh.num_elements
        return DiscreteSpace(kind, mesh, p, breaks, np.array([]), dim, False)
    if kind == "pw_poly_continuous":
        mults = (p + 1,) + (p,) * (mesh.num_elements - 1)
        knots = mesh_knot_vector(mesh, mults)
        n = sp.num_basis(knots, p)
        return DiscreteSpace(kind, mesh, p, knots, np.ones(n), n - 1, True)
    knots = mesh_knot_vector(mesh)
    if initial_weights is None:
        w = np.ones(sp.num_basis(knots, p))
    else:
        w = propagate_weights(mesh, initial_weights, knots)
    n = sp.num_basis(knots, p)
    if kind == "hyper_nurbs":
        if abs(w[0] - w[-1]) > 1e-14 * max(w[0], w[-1]):
            raise ValueError("endpoint weights must agree for the merged space")
        return DiscreteSpace(kind, mesh, p, knots, w, n - 1, True)
    return DiscreteSpace(kind, mesh, p, knots, w, n, False)


def eval_solution(sol, t, derivative_order=0):
    """Values of the solution at parameters t; order 1 differentiates in
    ARCLENGTH (parameter derivative divided by the parametrization speed)."""
    vals = sol(t, order=derivative_order)
    if derivative_order == 1:
        vals = vals / sol.space.mesh.curve.speed(np.atleast_1d(t))
    return vals


def nested_embed(sol, fine_space):
    """Re-express a solution on a refined mesh of the same kind.

    Replays the knot insertions on homogeneous coefficients, so the
    function is unchanged up to rounding.
    """
    space = sol.space
    if space.kind != fine_space.kind:
        raise ValueError("spaces must be of the same kind")
    if space.kind == "pw_poly_discontinuous":
        raise ValueError("embedding implemented for spline kinds only")
    coarse = dict(zip(space.mesh.nodes, space.mesh.mults))
    fine = dict(zip(fine_space.mesh.nodes, fine_space.mesh.mults))
    if any(z not in fine or fine[z] < m for z, m in coarse.items()):
        raise ValueError("target mesh does not refine the source mesh")
    full = space.expand(sol.coefficients)
    hom = np.column_stack([full * space.weights, space.weights])
    knots = space.knots
    have = list(knots)
    inserts = []
    for x in fine_space.knots:
        if x in have:
            have.remove(x)
        else:
            inserts.append(x)
    knots, hom = sp.refine_coefficients(knots, space.p, hom, sorted(inserts))
    if not np.array_equal(knots, fine_space.knots):
        raise ValueError("knot vectors do not nest")
    coefs = hom[:, 0] / hom[:, 1]
    return DiscreteSolution(fine_space, fine_space.contract(coefs))
