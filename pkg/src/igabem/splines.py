"""B-spline and NURBS primitives on arbitrary knot vectors.

Conventions: a knot vector ``t`` of length m+1 with degree ``p`` carries
N = m - p basis functions B_0..B_{N-1}; B_j is supported on
[t[j], t[j+p+1]].  Evaluation at the right endpoint of the last nonempty
span is taken as the limit from the left, so clamped vectors give
B_{N-1}(t[-1]) = 1.
"""

from __future__ import annotations

import numpy as np


def num_basis(knots, p):
    return len(knots) - p - 1


def find_span(knots, p, x):
    """Largest i with knots[i] <= x, clamped to the nonempty-span range.

    Evaluation at the right end lands in the last nonempty span (limit from
    the left), which is what makes clamped vectors interpolatory there.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    nonempty = np.nonzero(knots[:-1] < knots[1:])[0]
    span = np.searchsorted(knots, x, side="right") - 1
    return np.clip(span, nonempty[0], nonempty[-1])


def eval_bspline(knots, p, j, x):
    """Single basis function B_{j,p} by the Cox-de Boor recursion.

    Slow reference implementation; vectorized only over x.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = len(knots) - 1
    last = knots[-p - 1] if p > 0 else knots[-1]
    vals = np.zeros((m, len(x)))
    for i in range(m):
        vals[i] = np.where((knots[i] <= x) & (x < knots[i + 1]), 1.0, 0.0)
        # limit from the left at the end of the last nonempty span
        if knots[i] < knots[i + 1] and knots[i + 1] == knots[-1]:
            vals[i] = np.where(x == knots[-1], 1.0, vals[i])
    for q in range(1, p + 1):
        nxt = np.zeros((m - q, len(x)))
        for i in range(m - q):
            d1 = knots[i + q] - knots[i]
            d2 = knots[i + q + 1] - knots[i + 1]
            if d1 > 0:
                nxt[i] += (x - knots[i]) / d1 * vals[i]
            if d2 > 0:
                nxt[i] += (knots[i + q + 1] - x) / d2 * vals[i + 1]
        vals = nxt
    out = vals[j]
    return out if out.shape != (1,) else float(out[0])


def eval_bspline_deriv(knots, p, j, x):
    """First derivative of B_{j,p} via the degree-reduction formula."""
    knots = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    if p == 0:
        return out if out.shape != (1,) else 0.0
    d1 = knots[j + p] - knots[j]
    d2 = knots[j + p + 1] - knots[j + 1]
    if d1 > 0:
        out += p / d1 * eval_bspline(knots, p - 1, j, x)
    if d2 > 0:
        out -= p / d2 * eval_bspline(knots, p - 1, j + 1, x)
    return out if out.shape != (1,) else float(out[0])


def basis_funs(knots, p, x):
    """(spans, vals): the p+1 nonzero basis values at each x.

    vals[k, r] is B_{spans[k]-p+r}(x[k]).  Vectorized triangle scheme.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    span = find_span(knots, p, x)
    vals = np.ones((len(x), 1))
    left = np.empty((len(x), p))
    right = np.empty((len(x), p))
    for q in range(1, p + 1):
        left[:, q - 1] = x - knots[span - q + 1]
        right[:, q - 1] = knots[span + q] - x
        saved = np.zeros(len(x))
        new = np.empty((len(x), q + 1))
        for r in range(q):
            denom = right[:, r] + left[:, q - r - 1]
            temp = np.where(denom > 0, vals[:, r] / np.where(denom > 0, denom, 1.0), 0.0)
            new[:, r] = saved + right[:, r] * temp
            saved = left[:, q - r - 1] * temp
        new[:, q] = saved
        vals = new
    return span, vals


def basis_funs_derivs(knots, p, x):
    """(spans, vals, ders): nonzero basis values and first derivatives at x."""
    knots = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    span, vals = basis_funs(knots, p, x)
    ders = np.zeros_like(vals)
    if p == 0:
        return span, vals, ders
    _, low = basis_funs(knots, p - 1, x)
    # spans at degree p-1 equal the degree-p spans for interior x; recompute
    # explicitly so multiple right-end knots stay consistent
    span_low = find_span(knots, p - 1, x)
    # B'_{j,p} = p/(t[j+p]-t[j]) B_{j,p-1} - p/(t[j+p+1]-t[j+1]) B_{j+1,p-1}
    n = len(x)
    low_of = np.zeros((n, p + 2))  # B_{span-p+r, p-1}(x) for r = 0..p+1
    for r in range(p + 2):
        j = span - p + r
        idx = j - (span_low - (p - 1))
        ok = (idx >= 0) & (idx <= p - 1)
        low_of[:, r] = np.where(ok, low[np.arange(n), np.clip(idx, 0, p - 1)], 0.0)
    for r in range(p + 1):
        j = span - p + r
        d1 = knots[j + p] - knots[j]
        d2 = knots[j + p + 1] - knots[j + 1]
        term = np.zeros(n)
        term += np.where(d1 > 0, p * low_of[:, r] / np.where(d1 > 0, d1, 1.0), 0.0)
        term -= np.where(d2 > 0, p * low_of[:, r + 1] / np.where(d2 > 0, d2, 1.0), 0.0)
        ders[:, r] = term
    return span, vals, ders


def nurbs_funs_derivs(knots, p, weights, x):
    """(spans, vals, ders) of the rational basis w_j B_j / sum_k w_k B_k."""
    weights = np.asarray(weights, dtype=float)
    span, bvals, bders = basis_funs_derivs(knots, p, x)
    idx = span[:, None] - p + np.arange(p + 1)[None, :]
    wloc = weights[idx]
    num = wloc * bvals
    dnum = wloc * bders
    den = num.sum(axis=1, keepdims=True)
    dden = dnum.sum(axis=1, keepdims=True)
    vals = num / den
    ders = (dnum * den - num * dden) / den**2
    return span, vals, ders


def insert_knot(knots, p, coefs, x):
    """One Boehm insertion of x.  coefs has shape (N,) or (N, d).

    For NURBS pass homogeneous coefficients (w*point, w); the weight
    function is then preserved exactly.
    """
    knots = np.asarray(knots, dtype=float)
    coefs = np.asarray(coefs, dtype=float)
    k = int(find_span(knots, p, np.array([x]))[0])
    if x < knots[p] or x > knots[len(knots) - p - 1]:
        raise ValueError("insertion outside the clamped range")
    new_knots = np.insert(knots, k + 1, x)
    N = coefs.shape[0]
    new = np.empty((N + 1,) + coefs.shape[1:])
    new[: k - p + 1] = coefs[: k - p + 1]
    for i in range(k - p + 1, k + 1):
        denom = knots[i + p] - knots[i]
        alpha = (x - knots[i]) / denom if denom > 0 else 0.0
        new[i] = alpha * coefs[i] + (1.0 - alpha) * coefs[i - 1]
    new[k + 1 :] = coefs[k:]
    return new_knots, new


def refine_coefficients(knots, p, coefs, inserts):
    """Insert each value of ``inserts`` in turn; returns (knots, coefs)."""
    for x in inserts:
        knots, coefs = insert_knot(knots, p, coefs, x)
    return knots, coefs


def greville(knots, p):
    """Greville abscissae (knot averages), one per basis function."""
    knots = np.asarray(knots, dtype=float)
    N = num_basis(knots, p)
    return np.array([knots[j + 1 : j + p + 1].mean() for j in range(N)])
