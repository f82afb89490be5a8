"""Projection and quasi-interpolation operators.

Three families:

- ``l2_project_pw``: elementwise L2 projection, with arclength measure,
  onto the discontinuous transformed piecewise polynomials.
- ``build_dual_basis`` and the Scott-Zhang operators built on it: each
  rational basis function gets a locally supported dual function; the
  quasi-interpolant reads coefficients off a data function through those
  dual functionals and reproduces space members wherever the data agrees
  with one locally.
- ``sz_data_weak``: the same quasi-interpolant targeted at the continuous
  piecewise polynomials, used to approximate Dirichlet data.

Dual functions live on a single element per basis index (the largest
element inside the support), so the dual pairings reduce to small exactly
integrable Gram systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import quadrature as qd
from . import splines as sp
from .spaces import DiscreteSolution, DiscreteSpace, build_space


def _capped_depth(a, b, depth, n):
    # keep the innermost cell wide enough that its nodes stay strictly off
    # the graded endpoint after rounding (data may blow up there)
    xg, _ = qd.gauss_legendre(n)
    margin = min(xg[0], 1.0 - xg[-1])
    ulp = np.spacing(max(abs(a), abs(b), 1e-30))
    cap = int(np.floor(np.log2((b - a) * margin / (4.0 * ulp))))
    return max(1, min(depth, cap))


def element_rule(curve, lo, hi, n=16, depth=30):
    """Quadrature on one element, dyadically graded toward corner endpoints.

    Data functions are smooth except at the corners of the curve, so a
    plain Gauss rule suffices on interior elements.
    """
    corners = set(curve.corners) if curve is not None else set()
    if Fraction(0) in corners:
        corners.add(Fraction(1))
    a, b = float(lo), float(hi)
    left = Fraction(lo) in corners
    right = Fraction(hi) in corners
    if left and right:
        mid = 0.5 * (a + b)
        xl, wl = qd.dyadic_rule(a, mid, "left", _capped_depth(a, mid, depth, n), n)
        xr, wr = qd.dyadic_rule(mid, b, "right", _capped_depth(mid, b, depth, n), n)
        return np.concatenate([xl, xr]), np.concatenate([wl, wr])
    if left:
        return qd.dyadic_rule(a, b, "left", _capped_depth(a, b, depth, n), n)
    if right:
        return qd.dyadic_rule(a, b, "right", _capped_depth(a, b, depth, n), n)
    return qd.gauss_on(a, b, n)


def _legendre_table(p, lo, hi, x):
    """Rows k = 0..p of Legendre P_k mapped to [lo, hi], columns = x."""
    xi = 2.0 * (x - lo) / (hi - lo) - 1.0
    out = np.empty((p + 1, len(x)))
    for k in range(p + 1):
        ck = np.zeros(k + 1)
        ck[k] = 1.0
        out[k] = np.polynomial.legendre.legval(xi, ck)
    return out


def l2_project_pw(f, mesh, p=None, n=16, depth=30):
    """L2-orthogonal projection of f onto pw_poly_discontinuous.

    f is a callable on the parameter domain; the inner product carries the
    arclength factor.  Elementwise (p+1) x (p+1) mass solves.
    """
    p = mesh.p if p is None else p
    curve = mesh.curve
    breaks = np.array([float(b) for b in mesh.breaks])
    space = DiscreteSpace(
        "pw_poly_discontinuous", mesh, p, breaks, np.array([]), (p + 1) * mesh.num_elements, False
    )
    coefs = np.empty(space.dim)
    for e in range(mesh.num_elements):
        lo, hi = mesh.element(e)
        x, w = element_rule(curve, lo, hi, n, depth)
        ds = w * (curve.speed(x) if curve is not None else 1.0)
        L = _legendre_table(p, float(lo), float(hi), x)
        mass = (L * ds) @ L.T
        rhs = L @ (ds * f(x))
        coefs[e * (p + 1) : (e + 1) * (p + 1)] = np.linalg.solve(mass, rhs)
    return DiscreteSolution(space, coefs)


@dataclass(eq=False)
class DualBasis:
    """Locally supported duals of a rational spline basis.

    Function i is a degree <= p polynomial on one element, scaled by the
    weight function over w_i; pairings with the space basis are the
    identity."""

    space: DiscreteSpace
    element_of: np.ndarray  # host element per full basis index
    coefs: np.ndarray  # Legendre coefficients on the host element

    def weight_function(self, t):
        """Denominator of the rational basis at parameters t."""
        space = self.space
        span, vals = sp.basis_funs(space.knots, space.p, t)
        idx = span[:, None] - space.p + np.arange(space.p + 1)[None, :]
        return np.einsum("nk,nk->n", vals, space.weights[idx])

    def eval(self, i, t):
        """Dual function i at parameters t (zero off its host element)."""
        space = self.space
        t = np.atleast_1d(np.asarray(t, dtype=float))
        e = int(self.element_of[i])
        lo, hi = (float(z) for z in space.mesh.element(e))
        inside = (t >= lo) & (t <= hi)
        out = np.zeros(len(t))
        if np.any(inside):
            L = _legendre_table(space.p, lo, hi, t[inside])
            poly = self.coefs[i] @ L
            scale = self.weight_function(t[inside]) / space.weights[i]
            out[inside] = poly * scale
        return out

    def apply(self, v, n=16, depth=30):
        """All dual functionals of a callable v, one value per full index."""
        space = self.space
        mesh = space.mesh
        out = np.empty(space.num_full)
        for e in range(mesh.num_elements):
            hosted = np.nonzero(self.element_of == e)[0]
            if len(hosted) == 0:
                continue
            lo, hi = mesh.element(e)
            x, w = element_rule(mesh.curve, lo, hi, n, depth)
            common = w * self.weight_function(x) * v(x)
            L = _legendre_table(space.p, float(lo), float(hi), x)
            for i in hosted:
                out[i] = (self.coefs[i] @ L) @ common / space.weights[i]
        return out


def build_dual_basis(space):
    """Duals for a spline-kind space; biorthogonal by construction.

    Host element: the largest element in the support of basis function i.
    The weight function cancels in pairings with the rational basis, so a
    (p+1)-point Gauss rule makes the local Gram systems exact.
    """
    if space.kind == "pw_poly_discontinuous":
        raise ValueError("dual basis applies to the spline kinds")
    mesh = space.mesh
    p = space.p
    sizes = mesh.sizes()
    active = [space.active_full(e) for e in range(mesh.num_elements)]
    hosts = {}
    for e, idx in enumerate(active):
        for i in idx:
            if i not in hosts or sizes[e] > sizes[hosts[i]]:
                hosts[i] = e
    element_of = np.array([hosts[i] for i in range(space.num_full)])
    xg, wg = qd.gauss_legendre(p + 1)
    coefs = np.zeros((space.num_full, p + 1))
    for e in range(mesh.num_elements):
        hosted = [i for i in range(space.num_full) if element_of[i] == e]
        if not hosted:
            continue
        lo, hi = (float(z) for z in mesh.element(e))
        x = lo + (hi - lo) * xg
        w = (hi - lo) * wg
        L = _legendre_table(p, lo, hi, x)
        span, bvals = sp.basis_funs(space.knots, p, x)
        # columns of B: the p+1 active B-splines on this element
        gram = (L * w) @ bvals
        for i in hosted:
            rhs = np.zeros(p + 1)
            rhs[list(active[e]).index(i)] = 1.0
            coefs[i] = np.linalg.solve(gram.T, rhs)
    return DualBasis(space, element_of, coefs)


def _scott_zhang(space, v, n=16, depth=30):
    dual = build_dual_basis(space)
    lam = dual.apply(v, n, depth)
    if space.merged:
        c = lam[:-1].copy()
        c[0] = 0.5 * (lam[0] + lam[-1])
    else:
        c = lam
    return DiscreteSolution(space, c)


def scott_zhang_hyper(space, v, n=16, depth=30):
    """Quasi-interpolant onto the seam-merged rational space."""
    if space.kind != "hyper_nurbs":
        raise ValueError("expected a hyper_nurbs space")
    return _scott_zhang(space, v, n, depth)


def scott_zhang_weak(space, v, n=16, depth=30):
    """Quasi-interpolant onto the full rational space (no merging)."""
    if space.kind != "weak_nurbs":
        raise ValueError("expected a weak_nurbs space")
    return _scott_zhang(space, v, n, depth)


def sz_data_weak(u, mesh, n=16, depth=30):
    """Continuous piecewise-polynomial approximation of Dirichlet data."""
    space = build_space(mesh, "pw_poly_continuous")
    return _scott_zhang(space, u, n, depth)
