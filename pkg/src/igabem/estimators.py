"""Node-wise error indicators driving refinement and coarsening.

Every indicator is a weighted L2 norm collected over node patches, with the
quadratic sum convention alpha(S)^2 = sum_{z in S} alpha(z)^2.  The
refinement indicator eta(z)^2 = res(z)^2 + osc(z)^2 combines the weighted
residual of the integral equation with the data oscillation on the patch
pi(z) of the two elements touching z.  The multiplicity-decrease indicator
mu(z) measures, over the wider order-(2p+1) patch, how much of the solution
is lost when every knot multiplicity is lowered by one.

Weights use the arclength element width h: the residual of the
hyper-singular equation and both weak-mode terms carry h^{1/2}; mu carries
h^{-1/2} for the hyper-singular field (error in H^{1/2}) and h^{1/2} for the
weakly-singular one (error in H^{-1/2}).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import operators as op
from . import projections as pj
from . import spaces as spc
from .mesh import arclength_widths

KINDS = ("eta", "res", "osc", "mu")


@dataclass(frozen=True)
class NodeIndicators:
    """Per-node nonnegative values aligned with mesh.nodes."""

    kind: str
    mesh: object
    values: np.ndarray
    parts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown indicator kind '{self.kind}'")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.mesh.nodes),):
            raise ValueError("one value per mesh node required")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("indicator values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    def total(self):
        return float(np.sqrt(np.sum(self.values**2)))


def _patch_sums(mesh, element_sq, order):
    """Node values: square root of the element sums over order-m patches."""
    vals = np.empty(len(mesh.nodes))
    for j, z in enumerate(mesh.nodes):
        idx = list(mesh.patch(z, order))
        vals[j] = np.sqrt(max(float(np.sum(element_sq[idx])), 0.0))
    return vals


def _gauss_grid(mesh, npts):
    X, WQ = op._grid(mesh, npts)
    spd = mesh.curve.speed(X.ravel()).reshape(X.shape)
    return X, WQ * spd


def _element_norms_sq(mesh, values, ds, h, exponent):
    """h^exponent * int_e values^2 ds, per element."""
    return np.asarray(h, dtype=float) ** exponent * np.sum(
        ds * values.reshape(ds.shape) ** 2, axis=1
    )


def _value_and_derivative(data):
    """Split data given as a DiscreteSolution or a (value, derivative) pair."""
    if isinstance(data, spc.DiscreteSolution):
        return data, lambda t: data(t, order=1)
    if isinstance(data, tuple) and len(data) == 2:
        return data
    raise TypeError("data must be a DiscreteSolution or a (value, derivative) pair")


def _combine(mesh, res_sq, osc_sq):
    res = NodeIndicators(
        "res", mesh, _patch_sums(mesh, res_sq, 1), {"element_sq": res_sq}
    )
    osc = NodeIndicators(
        "osc", mesh, _patch_sums(mesh, osc_sq, 1), {"element_sq": osc_sq}
    )
    eta = np.sqrt(res.values**2 + osc.values**2)
    return NodeIndicators("eta", mesh, eta, {"res": res, "osc": osc})


def compute_eta_hyper(mesh, U_sol, phi, phi_disc, q=None, n=12, n_log=10, indirect=False):
    """Refinement indicators for the hyper-singular equation.

    res(z) = || h^{1/2} (g - W U) ||_{L2(pi(z))} with g = (1/2 - K') phi_disc
    evaluated pointwise, osc(z) = || h^{1/2} (phi - phi_disc) ||_{L2(pi(z))}.
    In the indirect ansatz the datum is g itself, so g = phi_disc pointwise.
    """
    phi = op._as_callable(phi)
    phi_disc = op._as_callable(phi_disc)
    npts = mesh.p + 4
    X, ds = _gauss_grid(mesh, npts)
    flat = X.ravel()
    h = arclength_widths(mesh)
    if indirect:
        g = phi_disc(flat)
    else:
        g = 0.5 * phi_disc(flat) - op.eval_Kprime_pointwise(phi_disc, mesh, flat, n)
    wu = op.eval_W_on_solution(U_sol, flat, q=q, n=n, n_log=n_log)
    res_sq = _element_norms_sq(mesh, g - wu, ds, h, 1)
    osc_sq = _element_norms_sq(mesh, phi(flat) - phi_disc(flat), ds, h, 1)
    return _combine(mesh, res_sq, osc_sq)


def compute_eta_weak(mesh, Phi_sol, u, u_disc, q=None, n=12, n_log=10, indirect=False):
    """Refinement indicators for the weakly-singular equation.

    res(z) = || h^{1/2} d/ds (g - V Phi) ||_{L2(pi(z))} with the residual
    g - V Phi = (1/2 + K) u_disc - V Phi interpolated per element and
    differentiated in arclength; osc(z) uses the analytic derivative of
    u - u_disc.  Both u and u_disc may be given as (value, derivative)
    callables; u_disc may also be a continuous DiscreteSolution.  In the
    indirect ansatz the datum is g itself, so the residual is u_disc - V Phi.
    """
    uval, uder = _value_and_derivative(u)
    dval, dder = _value_and_derivative(u_disc)
    npts = mesh.p + 4
    q = mesh.p + 4 if q is None else q
    X, ds = _gauss_grid(mesh, npts)
    flat = X.ravel()
    h = arclength_widths(mesh)

    if indirect:
        def residual(t):
            return dval(t) - op.eval_V_pointwise(Phi_sol, mesh, t, True, n, n_log)
    else:
        def residual(t):
            return (
                0.5 * dval(t)
                + op.eval_K_pointwise(dval, mesh, t, n)
                - op.eval_V_pointwise(Phi_sol, mesh, t, True, n, n_log)
            )

    dres = op._interpolant_derivative(mesh, residual, flat, q, n, n_log)
    res_sq = _element_norms_sq(mesh, dres, ds, h, 1)
    osc_sq = _element_norms_sq(mesh, uder(flat) - dder(flat), ds, h, 1)
    return _combine(mesh, res_sq, osc_sq)


def compute_mu(mesh, solution, initial_weights=None):
    """Multiplicity-coarsening indicators.

    mu(z) measures the solution component lost under the smoothed space on
    the once-lowered mesh, integrated over the order-(2p+1) patch of z:
    mu(z) = || h^{-1/2} (1 - J) U ||  (hyper) or || h^{1/2} (1 - I) Phi ||
    (weak), where J, I are the respective quasi-interpolants.
    """
    kind = solution.space.kind
    if kind == "hyper_nurbs":
        sz, exponent = pj.scott_zhang_hyper, -1
    elif kind == "weak_nurbs":
        sz, exponent = pj.scott_zhang_weak, 1
    else:
        raise ValueError("mu indicators need a hyper or weak NURBS solution")
    coarse = spc.build_space(mesh.ominus_one(), kind, initial_weights)
    projected = sz(coarse, solution)
    npts = mesh.p + 4
    X, ds = _gauss_grid(mesh, npts)
    flat = X.ravel()
    h = arclength_widths(mesh)
    diff = solution(flat) - projected(flat)
    mu_sq = _element_norms_sq(mesh, diff, ds, h, exponent)
    order = 2 * mesh.p + 1
    return NodeIndicators(
        "mu", mesh, _patch_sums(mesh, mu_sq, order), {"element_sq": mu_sq}
    )


def write_indicator_csv(path, eta, mu=None):
    """Debug dump: one row per node with res, osc, eta and mu columns."""
    mesh = eta.mesh
    res = eta.parts["res"].values
    osc = eta.parts["osc"].values
    muv = mu.values if mu is not None else np.zeros(len(mesh.nodes))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node", "res", "osc", "eta", "mu"])
        for j, z in enumerate(mesh.nodes):
            w.writerow([float(z), res[j], osc[j], eta.values[j], muv[j]])
