"""Admissible knot meshes on a closed curve.

A mesh is a strictly increasing tuple of dyadic-rational breakpoints
0 = z_0 < z_1 < ... < z_n = 1 with one multiplicity per distinct node
(z_0 and z_n are the same node of the closed curve and stored once).
The seam node keeps multiplicity p+1 (clamped knot vectors); interior
multiplicities range in 1..max_mult, where max_mult is p for spaces of
continuous functions and p+1 when jumps are allowed.

All breakpoints are exact fractions, so midpoint bisection, mesh-ratio
comparisons and node identity are exact; floats appear only at evaluation
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class KnotMesh:
    p: int
    max_mult: int
    breaks: tuple  # n+1 Fractions, 0 .. 1
    mults: tuple  # n ints, one per distinct node
    initial: tuple = field(compare=False, repr=False)  # ((node, mult), ...)
    kappa0: Fraction = field(compare=False, repr=False)
    curve: object = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if self.breaks[0] != 0 or self.breaks[-1] != 1:
            raise ValueError("parameter domain must be [0, 1]")
        if any(a >= b for a, b in zip(self.breaks[:-1], self.breaks[1:])):
            raise ValueError("breakpoints must increase strictly")
        if len(self.mults) != len(self.breaks) - 1:
            raise ValueError("need one multiplicity per distinct node")
        if self.mults[0] != self.p + 1:
            raise ValueError("seam node must have multiplicity p+1")
        if any(not 1 <= m <= self.max_mult for m in self.mults[1:]):
            raise ValueError("interior multiplicity out of range")

    @property
    def num_elements(self):
        return len(self.mults)

    @property
    def nodes(self):
        return self.breaks[:-1]

    @property
    def num_knots(self):
        """Multiplicity-weighted knot count (the rate-plot abscissa)."""
        return sum(self.mults)

    def element(self, e):
        return self.breaks[e], self.breaks[e + 1]

    def elements(self):
        return [(self.breaks[e], self.breaks[e + 1]) for e in range(self.num_elements)]

    def node_index(self, z):
        i = self.breaks.index(z)
        if i == len(self.breaks) - 1:
            i = 0
        return i

    def mult_of(self, z):
        return self.mults[self.node_index(z)]

    def initial_mult(self, z):
        return dict(self.initial).get(z, 0)

    def floor_of(self, z):
        return max(1, self.initial_mult(z))

    def sizes(self):
        return [b - a for a, b in zip(self.breaks[:-1], self.breaks[1:])]

    def refine(self, marked):
        """Locally refine: bisect fully-marked elements, raise the
        multiplicity of other marked nodes (bisecting their neighbor
        elements instead once the cap is reached), then re-establish the
        local mesh-ratio bound by recursive bisection of oversized
        elements.  Midpoints enter with multiplicity 1."""
        marked = set(marked)
        node_set = set(self.nodes) | {Fraction(1)}
        bad = marked - node_set
        if bad:
            raise ValueError(f"marked nodes not in mesh: {sorted(bad)}")
        if Fraction(1) in marked:
            marked.discard(Fraction(1))
            marked.add(Fraction(0))
        n = self.num_elements
        mults = list(self.mults)
        ism = [z in marked for z in self.nodes]
        bisect = set()
        for e in range(n):
            if ism[e] and ism[(e + 1) % n]:
                bisect.add(e)
        for j in range(n):
            if not ism[j] or j in bisect or (j - 1) % n in bisect:
                continue
            cap = self.p + 1 if j == 0 else self.max_mult
            if mults[j] < cap:
                mults[j] += 1
            else:
                bisect.add(j)
                bisect.add((j - 1) % n)
        pairs = []
        for e in range(n):
            pairs.append((self.breaks[e], mults[e]))
            if e in bisect:
                pairs.append(((self.breaks[e] + self.breaks[e + 1]) / 2, 1))
        pairs = _close(pairs, 2 * self.kappa0)
        new_breaks = tuple(z for z, _ in pairs) + (Fraction(1),)
        new_mults = tuple(m for _, m in pairs)
        return replace(self, breaks=new_breaks, mults=new_mults)

    def coarsen_multiplicity(self, nodes):
        """Decrease the multiplicity of each given node by one.

        Rejects nodes already at the floor max{1, initial multiplicity}.
        """
        mults = list(self.mults)
        for z in set(nodes):
            j = self.node_index(z)
            if mults[j] <= self.floor_of(z):
                raise ValueError(f"node {z} already at multiplicity floor")
            mults[j] -= 1
        return replace(self, mults=tuple(mults))

    def ominus_one(self):
        """The smoothed mesh: every multiplicity lowered by one but never
        below max{1, initial multiplicity}; node positions unchanged."""
        mults = tuple(
            max(m - 1, self.floor_of(z)) for z, m in zip(self.nodes, self.mults)
        )
        return replace(self, mults=mults)

    def overlay(self, other):
        """Coarsest common refinement: node union, multiplicity max."""
        if (self.p, self.max_mult, self.initial) != (
            other.p,
            other.max_mult,
            other.initial,
        ):
            raise ValueError("overlay requires meshes over the same initial mesh")
        mine = dict(zip(self.nodes, self.mults))
        theirs = dict(zip(other.nodes, other.mults))
        union = sorted(set(mine) | set(theirs))
        mults = tuple(max(mine.get(z, 1), theirs.get(z, 1)) for z in union)
        return replace(
            self, breaks=tuple(union) + (Fraction(1),), mults=mults
        )

    def patch(self, z, m):
        """Element indices of the order-m patch around node z (2m elements,
        wrapping around the seam; m = 0 gives the empty element set)."""
        j = self.node_index(z)
        n = self.num_elements
        return tuple(sorted({(j + k) % n for k in range(-m, m)}))

    def neighbors(self, z):
        """The two nodes adjacent to z (one on each side, wrapping)."""
        j = self.node_index(z)
        n = self.num_elements
        return (self.nodes[(j - 1) % n], self.nodes[(j + 1) % n])

    def tilde_h(self, z, rho=0.5):
        """Equivalent mesh width at a node: patch parameter width shrunk by
        rho per multiplicity unit of the node and its two neighbors.
        Diagnostic quantity; the estimators use plain arclength widths."""
        j = self.node_index(z)
        n = self.num_elements
        sizes = self.sizes()
        width = float(sizes[(j - 1) % n] + sizes[j])
        total = (
            self.mults[(j - 1) % n] + self.mults[j] + self.mults[(j + 1) % n]
        )
        return width * rho**total

    def knots_lines(self):
        """Histogram dump: one 't multiplicity' line per distinct node."""
        return [f"{float(z)!r} {m}" for z, m in zip(self.nodes, self.mults)]


def _close(pairs, limit):
    """Bisect elements larger than limit times a neighbor until none are."""
    while True:
        nodes = [z for z, _ in pairs]
        n = len(nodes)
        sizes = [
            (nodes[(e + 1) % n] if e + 1 < n else Fraction(1) + nodes[0]) - nodes[e]
            for e in range(n)
        ]
        grown = []
        for e in range(n):
            if (
                sizes[e] > limit * sizes[(e + 1) % n]
                or sizes[e] > limit * sizes[(e - 1) % n]
            ):
                grown.append(e)
        if not grown:
            return pairs
        out = []
        grown = set(grown)
        for e in range(n):
            out.append(pairs[e])
            if e in grown:
                out.append((nodes[e] + sizes[e] / 2, 1))
        pairs = out


def initial_mesh(curve, p, mode):
    """Uniform initial mesh over the curve's segments.

    mode 'hyper' caps interior multiplicities at p (continuous functions),
    'weak' at p+1 (jumps allowed).  The seam node carries p+1.
    """
    if mode not in ("hyper", "weak"):
        raise ValueError("mode must be 'hyper' or 'weak'")
    max_mult = p if mode == "hyper" else p + 1
    breaks = tuple(curve.breaks)
    mults = (p + 1,) + (1,) * (len(breaks) - 2)
    sizes = [b - a for a, b in zip(breaks[:-1], breaks[1:])]
    kappa0 = max(
        max(sizes[e] / sizes[(e + 1) % len(sizes)] for e in range(len(sizes))),
        Fraction(1),
    )
    initial = tuple(zip(breaks[:-1], mults))
    return KnotMesh(
        p=p,
        max_mult=max_mult,
        breaks=breaks,
        mults=mults,
        initial=initial,
        kappa0=kappa0,
        curve=curve,
    )


@lru_cache(maxsize=512)
def _element_sizes(mesh):
    hhat = np.array([float(b - a) for a, b in mesh.elements()])
    h = np.array(
        [mesh.curve.arclength(float(a), float(b)) for a, b in mesh.elements()]
    )
    return h, hhat


def mesh_size(mesh, e):
    """(arclength width, parameter width) of element e."""
    h, hhat = _element_sizes(mesh)
    return float(h[e]), float(hhat[e])


def arclength_widths(mesh):
    """Arclength widths of all elements, cached per mesh."""
    return _element_sizes(mesh)[0]
