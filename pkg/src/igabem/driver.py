"""Adaptive loop: solve, estimate, mark, refine and coarsen.

Each step solves the Galerkin system on the current mesh, computes the
refinement indicators eta and the multiplicity indicators mu, then marks a
minimal Doerfler set M1 on eta and a cheapest-first set M- on mu subject to
the budget mu(M-)^2 <= vartheta * eta^2 and the cardinality cap
|M-| <= cmark * |M1|.  Neighbors of M- join the refinement marks so both
elements next to a coarsened node get bisected, and the new mesh is
coarsen_multiplicity(refine(mesh, M1 u M2), M-).  Uniform mode marks every
node, which bisects all elements without touching multiplicities.

Marking arithmetic runs on exact rationals: the Doerfler inequality
theta * eta^2 <= eta(M1)^2 and the coarsening budget hold as stated, not up
to rounding, and every step re-checks them before touching the mesh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import estimators as est
from . import geometry as geo
from . import mesh as msh
from . import operators as op
from . import projections as pj
from . import spaces as spc

GEOMETRIES = ("pacman", "heart", "circle")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of one experiment run."""

    mode: str = "hyper_direct"
    geometry: str = "pacman"
    p: int = 2
    theta: float = 0.5
    vartheta: float = 0.0
    cmin: float = 1.0
    cmark: float = 1.0
    uniform: bool = False
    coarsen_free: bool = False
    max_dof: int = 500
    threads: int = 1

    def __post_init__(self):
        if self.mode not in op.MODES:
            raise ValueError(f"unknown mode '{self.mode}'")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry '{self.geometry}'")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.vartheta < 0.0:
            raise ValueError("vartheta must be nonnegative")
        if self.cmin < 1.0:
            raise ValueError("cmin must be at least 1")
        if self.cmark <= 0.0:
            raise ValueError("cmark must be positive")
        if self.p < 1:
            raise ValueError("degree p must be at least 1")
        if self.max_dof < 1:
            raise ValueError("max_dof must be positive")

    @property
    def field(self):
        return self.mode.split("_")[0]


@dataclass(frozen=True)
class RunRecord:
    """Snapshot of one completed step of the loop."""

    ell: int
    knots: int
    dim: int
    eta: float
    res: float
    osc: float
    mu: float
    marked: int
    coarsened: int
    histogram: tuple  # ((node parameter, multiplicity), ...)


@dataclass(frozen=True)
class Problem:
    """Geometry plus boundary data of the reference harmonic potential."""

    curve: object
    u: object
    du: object
    phi: object


def make_problem(config):
    """Curve and trace data for a config; weak modes shrink the geometry
    so the single-layer operator stays elliptic."""
    curve = geo.make_geometry(config.geometry, weak_scale=config.field == "weak")
    u_fn, grad_fn = geo.exact_data(config.geometry)

    def u(t):
        return u_fn(curve.point(np.asarray(t, dtype=float)))

    def du(t):
        t = np.asarray(t, dtype=float)
        d = curve.deriv(t)
        tau = d / np.hypot(d[..., 0], d[..., 1])[..., None]
        return np.einsum("...k,...k->...", grad_fn(curve.point(t)), tau)

    def phi(t):
        t = np.asarray(t, dtype=float)
        g = grad_fn(curve.point(t))
        return np.einsum("...k,...k->...", g, curve.normal(t))

    return Problem(curve, u, du, phi)


def solve_and_estimate(mesh, problem, config):
    """One Galerkin solve with its eta and mu indicators."""
    indirect = config.mode.endswith("indirect")
    if config.field == "hyper":
        space = spc.build_space(mesh, "hyper_nurbs")
        A = op.assemble_W_stabilized(space, threads=config.threads)
        phid = pj.l2_project_pw(problem.phi, mesh)
        b = op.apply_Kprime_rhs(phid, space, indirect=indirect, threads=config.threads)
        sol = op.solve(op.GalerkinSystem(A, b, space, config.mode))
        eta = est.compute_eta_hyper(mesh, sol, problem.phi, phid, indirect=indirect)
    else:
        space = spc.build_space(mesh, "weak_nurbs")
        A = op.assemble_V(space, space, threads=config.threads)
        b = op.apply_K_rhs(problem.u, space, indirect=indirect, threads=config.threads)
        sol = op.solve(op.GalerkinSystem(A, b, space, config.mode))
        data = (problem.u, problem.du)
        eta = est.compute_eta_weak(mesh, sol, data, data, indirect=indirect)
    return sol, eta, est.compute_mu(mesh, sol)


def _squares(indicators):
    return [Fraction(float(v)) ** 2 for v in indicators.values]


def doerfler_mark(indicators, theta, cmin=1.0):
    """Exactly minimal node set M1 with theta * eta^2 <= eta(M1)^2.

    Greedy on descending squared values (ties by ascending node parameter)
    over exact rationals; the descending prefix is the smallest possible
    set, so cmin > 1 is accepted but yields the same cmin = 1 greedy.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if cmin < 1.0:
        raise ValueError("cmin must be at least 1")
    nodes = indicators.mesh.nodes
    sq = _squares(indicators)
    goal = Fraction(float(theta)) * sum(sq)
    order = sorted(range(len(nodes)), key=lambda j: (-sq[j], nodes[j]))
    got = Fraction(0)
    out = []
    for j in order:
        if got >= goal:
            break
        got += sq[j]
        out.append(nodes[j])
    return out


def coarsen_mark(mu, eta_sq, vartheta, cmark, num_marked, eligible, coarsen_free=False):
    """Cheapest-first multiplicity-decrease candidates M-.

    Greedy on ascending mu (ties by ascending node parameter) over the
    eligible nodes while mu(M-)^2 <= vartheta * eta^2 and
    |M-| <= cmark * num_marked both hold.  vartheta = 0 returns the empty
    set unless coarsen_free asks to keep collecting zero-cost nodes.
    """
    if vartheta < 0.0:
        raise ValueError("vartheta must be nonnegative")
    if cmark <= 0.0:
        raise ValueError("cmark must be positive")
    if vartheta == 0.0 and not coarsen_free:
        return []
    eligible = set(eligible)
    nodes = mu.mesh.nodes
    sq = _squares(mu)
    budget = Fraction(float(vartheta)) * Fraction(float(eta_sq))
    order = sorted(
        (j for j in range(len(nodes)) if nodes[j] in eligible),
        key=lambda j: (sq[j], nodes[j]),
    )
    got = Fraction(0)
    out = []
    for j in order:
        if len(out) + 1 > cmark * num_marked or got + sq[j] > budget:
            break
        got += sq[j]
        out.append(nodes[j])
    return out


def _verify_marking(eta, mu, config, m1, mminus, eta_sq):
    """Re-check both marking inequalities on exact rationals."""
    nodes = eta.mesh.nodes
    sq = dict(zip(nodes, _squares(eta)))
    total = sum(sq.values())
    got = sum(sq[z] for z in m1)
    if Fraction(float(config.theta)) * total > got:
        raise RuntimeError("marked set misses the Doerfler inequality")
    if m1:
        small = min(m1, key=lambda z: (sq[z], z))
        if Fraction(float(config.theta)) * total <= got - sq[small]:
            raise RuntimeError("marked set is not minimal")
    musq = dict(zip(nodes, _squares(mu)))
    budget = Fraction(float(config.vartheta)) * Fraction(float(eta_sq))
    if sum(musq[z] for z in mminus) > budget:
        raise RuntimeError("coarsening set exceeds its budget")
    if len(mminus) > config.cmark * len(m1):
        raise RuntimeError("coarsening set exceeds its cardinality cap")


def adapt_step(mesh, eta, mu, config):
    """Mark on the given indicators and return (new mesh, M1, M-)."""
    if config.uniform:
        m1, mminus = list(mesh.nodes), []
    else:
        m1 = doerfler_mark(eta, config.theta, config.cmin)
        eligible = [
            z for z, m in zip(mesh.nodes, mesh.mults) if m > mesh.floor_of(z)
        ]
        eta_sq = eta.total() ** 2
        mminus = coarsen_mark(
            mu,
            eta_sq,
            config.vartheta,
            config.cmark,
            len(m1),
            eligible,
            config.coarsen_free,
        )
        _verify_marking(eta, mu, config, m1, mminus, eta_sq)
    marks = set(m1)
    for z in mminus:
        marks.add(z)
        marks.update(mesh.neighbors(z))
    refined = mesh.refine(marks)
    if mminus:
        refined = refined.coarsen_multiplicity(mminus)
    if len(refined.nodes) > 3 * len(mesh.nodes):
        raise RuntimeError("refinement produced more than 3 sons per node")
    return refined, m1, mminus


def run(config, on_step=None):
    """Iterate the loop until the space dimension exceeds max_dof.

    Returns one RunRecord per solve; the last record is the first whose
    dimension exceeds the target.  Deterministic given the config.
    """
    problem = make_problem(config)
    mesh = msh.initial_mesh(problem.curve, config.p, config.field)
    records = []
    ell = 0
    while True:
        sol, eta, mu = solve_and_estimate(mesh, problem, config)
        if on_step is not None:
            on_step(ell, mesh, sol, eta, mu)
        hist = tuple((float(z), m) for z, m in zip(mesh.nodes, mesh.mults))
        done = sol.space.dim > config.max_dof
        if done:
            m1, mminus = [], []
        else:
            mesh, m1, mminus = adapt_step(mesh, eta, mu, config)
        records.append(
            RunRecord(
                ell,
                sum(m for _, m in hist),
                sol.space.dim,
                eta.total(),
                eta.parts["res"].total(),
                eta.parts["osc"].total(),
                mu.total(),
                len(m1),
                len(mminus),
                hist,
            )
        )
        if done:
            return records
        ell += 1


def rate_estimate(records, window=8):
    """Least-squares slope of log eta against log N over the last window."""
    pts = [(r.knots, r.eta) for r in records[-window:] if r.eta > 0]
    if len(pts) < 2:
        raise ValueError("need at least two positive-eta records")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def write_run_csv(path, records):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["ell", "knots", "dim", "eta", "res", "osc", "mu", "marked", "coarsened"]
        )
        for r in records:
            w.writerow(
                [r.ell, r.knots, r.dim, r.eta, r.res, r.osc, r.mu, r.marked, r.coarsened]
            )


def write_knot_histogram(path, record):
    """One 't multiplicity' line per node of the recorded mesh."""
    with open(path, "w") as f:
        for t, m in record.histogram:
            f.write(f"{t!r} {m}\n")
