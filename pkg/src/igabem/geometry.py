"""Closed NURBS boundary curves and exact harmonic reference data.

Each curve is a list of rational quadratic Bezier segments over a uniform
partition of the periodic parameter domain [0, 1].  Circular arcs are exact
(standard conic weights); straight edges are degree-elevated lines.  All
curves are traversed counterclockwise, so the outward unit normal is the
tangent rotated by -90 degrees.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

_BERNSTEIN_D2 = np.array([2.0, -4.0, 2.0])


class BezierSegment:
    """Rational quadratic Bezier arc in homogeneous form.

    ``hom`` has rows (w*x, w*y, w) for the three control points.
    """

    def __init__(self, points, weights):
        points = np.asarray(points, dtype=float)
        weights = np.asarray(weights, dtype=float)
        self.hom = np.column_stack([points * weights[:, None], weights])

    @classmethod
    def line(cls, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return cls([a, 0.5 * (a + b), b], [1.0, 1.0, 1.0])

    @classmethod
    def arc(cls, center, radius, th0, th1):
        """Circle arc from angle th0 to th1, |th1 - th0| < pi."""
        sweep = th1 - th0
        if not 0 < abs(sweep) < np.pi:
            raise ValueError("arc sweep must be in (0, pi)")
        w_mid = np.cos(0.5 * sweep)
        thm = 0.5 * (th0 + th1)
        c = np.asarray(center, dtype=float)
        p0 = c + radius * np.array([np.cos(th0), np.sin(th0)])
        p2 = c + radius * np.array([np.cos(th1), np.sin(th1)])
        pm = c + (radius / w_mid) * np.array([np.cos(thm), np.sin(thm)])
        return cls([p0, pm, p2], [1.0, w_mid, 1.0])


def _bernstein(u):
    u = np.asarray(u, dtype=float)
    return np.stack([(1 - u) ** 2, 2 * u * (1 - u), u**2], axis=-1)


def _bernstein_d1(u):
    u = np.asarray(u, dtype=float)
    return np.stack([-2 * (1 - u), 2 - 4 * u, 2 * u], axis=-1)


class BoundaryCurve:
    """Piecewise-rational closed curve on the periodic parameter [0, 1]."""

    def __init__(self, segments, corners):
        self.segments = segments
        self.nseg = len(segments)
        self.breaks = [Fraction(k, self.nseg) for k in range(self.nseg + 1)]
        self.corners = list(corners)
        self._hom = np.stack([s.hom for s in segments])
        self._breaks_f = np.array([float(b) for b in self.breaks])

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        sm = np.mod(s, 1.0)
        k = np.clip(
            np.searchsorted(self._breaks_f, sm, side="right") - 1, 0, self.nseg - 1
        )
        u = (sm - self._breaks_f[k]) * self.nseg
        return k, u

    def _hom_eval(self, s, basis):
        k, u = self._locate(s)
        b = basis(u)
        return np.einsum("...k,...kd->...d", b, self._hom[k])

    def point(self, s):
        h = self._hom_eval(s, _bernstein)
        return h[..., :2] / h[..., 2:3]

    def deriv(self, s):
        """dgamma/ds with respect to the global parameter."""
        h = self._hom_eval(s, _bernstein)
        hd = self._hom_eval(s, _bernstein_d1)
        A, w = h[..., :2], h[..., 2:3]
        Ad, wd = hd[..., :2], hd[..., 2:3]
        return (Ad * w - A * wd) / w**2 * self.nseg

    def deriv2(self, s):
        h = self._hom_eval(s, _bernstein)
        hd = self._hom_eval(s, _bernstein_d1)
        hdd = self._hom_eval(s, lambda u: np.broadcast_to(
            _BERNSTEIN_D2, np.shape(u) + (3,)))
        A, w = h[..., :2], h[..., 2:3]
        Ad, wd = hd[..., :2], hd[..., 2:3]
        Add, wdd = hdd[..., :2], hdd[..., 2:3]
        f2 = Add / w - (2 * Ad * wd + A * wdd) / w**2 + 2 * A * wd**2 / w**3
        return f2 * self.nseg**2

    def speed(self, s):
        d = self.deriv(s)
        return np.hypot(d[..., 0], d[..., 1])

    def normal(self, s):
        """Outward unit normal (counterclockwise traversal)."""
        d = self.deriv(s)
        n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
        return n / np.hypot(d[..., 0], d[..., 1])[..., None]

    def curvature(self, s):
        d1 = self.deriv(s)
        d2 = self.deriv2(s)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.hypot(d1[..., 0], d1[..., 1]) ** 3

    def arclength(self, a=0.0, b=1.0, n=32):
        from .quadrature import gauss_on

        cuts = [a] + [
            float(c) for c in self._breaks_f if a < c < b
        ] + [b]
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            x, w = gauss_on(lo, hi, n)
            total += float(np.dot(w, self.speed(x)))
        return total

    def outer_radius(self, samples=4096):
        s = np.linspace(0.0, 1.0, samples, endpoint=False)
        p = self.point(s)
        return float(np.hypot(p[:, 0], p[:, 1]).max())

    def scaled(self, factor):
        segs = []
        for seg in self.segments:
            w = seg.hom[:, 2]
            pts = seg.hom[:, :2] / w[:, None] * factor
            segs.append(BezierSegment(pts, w))
        return BoundaryCurve(segs, self.corners)


def make_pacman():
    """Sector of opening angle 7 pi / 4 with the mouth around the -x axis.

    Segments: two halves of the outgoing edge, two arcs, two halves of the
    incoming edge.  Tangent discontinuities sit exactly at 0, 1/3, 2/3.
    """
    beta = 7 * np.pi / 8
    d_out = np.array([np.cos(-beta), np.sin(-beta)])
    d_in = np.array([np.cos(beta), np.sin(beta)])
    origin = np.zeros(2)
    segs = [
        BezierSegment.line(origin, 0.5 * d_out),
        BezierSegment.line(0.5 * d_out, d_out),
        BezierSegment.arc(origin, 1.0, -beta, 0.0),
        BezierSegment.arc(origin, 1.0, 0.0, beta),
        BezierSegment.line(d_in, 0.5 * d_in),
        BezierSegment.line(0.5 * d_in, origin),
    ]
    corners = [Fraction(0), Fraction(1, 3), Fraction(2, 3)]
    return BoundaryCurve(segs, corners)


def make_heart():
    """Disk of radius sqrt(10)/2 about (-1/2,-1/2) minus the first-quadrant
    wedge between the unit edges along +y and +x.

    The interior angle at the origin is 3 pi / 2; tangents jump exactly at
    0, 1/6, 5/6.  The four arc pieces join with continuous tangent.
    """
    center = np.array([-0.5, -0.5])
    radius = np.sqrt(10.0) / 2.0
    a1 = np.arctan2(1.5, 0.5)
    a2 = np.arctan2(0.5, 1.5) + 2 * np.pi
    th = np.linspace(a1, a2, 5)
    origin = np.zeros(2)
    segs = [BezierSegment.line(origin, np.array([0.0, 1.0]))]
    segs += [
        BezierSegment.arc(center, radius, th[k], th[k + 1]) for k in range(4)
    ]
    segs.append(BezierSegment.line(np.array([1.0, 0.0]), origin))
    corners = [Fraction(0), Fraction(1, 6), Fraction(5, 6)]
    return BoundaryCurve(segs, corners)


def make_circle(nseg=6, radius=0.5):
    """Exact circle of given radius about the origin, nseg equal arcs."""
    th = 2 * np.pi * np.arange(nseg + 1) / nseg
    segs = [
        BezierSegment.arc(np.zeros(2), radius, th[k], th[k + 1])
        for k in range(nseg)
    ]
    return BoundaryCurve(segs, [])


def make_geometry(name, weak_scale=False):
    """Named geometry; with weak_scale the curve is shrunk into the disk of
    radius 0.2499 so the single-layer operator is elliptic (diameter < 1)."""
    if name == "pacman":
        curve = make_pacman()
    elif name == "heart":
        curve = make_heart()
    elif name == "circle":
        curve = make_circle()
    else:
        raise ValueError(f"unknown geometry '{name}'")
    if weak_scale:
        curve = curve.scaled(0.2499 / curve.outer_radius())
    return curve


def _polar(points):
    points = np.asarray(points, dtype=float)
    r = np.hypot(points[..., 0], points[..., 1])
    beta = np.arctan2(points[..., 1], points[..., 0])
    return r, beta


def _wedge_data(tau, shift, branch_cut):
    """u = r^tau cos(tau (beta + shift)) with beta wrapped below branch_cut."""

    def u_fn(points):
        r, beta = _polar(points)
        beta = np.where(beta > branch_cut, beta - 2 * np.pi, beta)
        return r**tau * np.cos(tau * (beta + shift))

    def grad_fn(points):
        r, beta = _polar(points)
        beta = np.where(beta > branch_cut, beta - 2 * np.pi, beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = tau * np.where(r > 0, r ** (tau - 1.0), np.inf)
            c = np.cos(tau * (beta + shift))
            s = np.sin(tau * (beta + shift))
            er = np.stack([np.cos(beta), np.sin(beta)], axis=-1)
            eb = np.stack([-np.sin(beta), np.cos(beta)], axis=-1)
            return amp[..., None] * (c[..., None] * er - s[..., None] * eb)

    return u_fn, grad_fn


def exact_data(name):
    """(u, grad_u) of the reference harmonic potential for a geometry.

    pacman: u = r^(4/7) cos(4 beta / 7), vanishing on both straight edges,
    singular gradient at the origin.  heart: u = r^(2/3) cos(2(beta+pi/2)/3)
    with the branch chosen so the +y edge carries the interior limit; u is
    merely continuous at the origin.  circle: u = x, globally smooth.
    """
    if name == "pacman":
        return _wedge_data(4.0 / 7.0, 0.0, np.pi)
    if name == "heart":
        # points with atan2 angle >= pi/2 (the +y edge and the second
        # quadrant) belong to the branch (-3pi/2, pi/2]
        return _wedge_data(2.0 / 3.0, np.pi / 2.0, np.pi / 2.0 - 1e-14)
    if name == "circle":
        def u_fn(points):
            return np.asarray(points, dtype=float)[..., 0]

        def grad_fn(points):
            points = np.asarray(points, dtype=float)
            g = np.zeros_like(points)
            g[..., 0] = 1.0
            return g

        return u_fn, grad_fn
    raise ValueError(f"unknown geometry '{name}'")


def singular_exponent(name):
    """Expected lowest wedge exponent tau of the reference solution."""
    return {"pacman": 4.0 / 7.0, "heart": 2.0 / 3.0, "circle": None}[name]
