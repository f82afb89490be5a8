"""Gauss rules and singular quadrature for boundary-integral pair integrals.

Provides Gauss-Legendre rules on [0, 1], a Gauss rule for the weight
log(1/t) on [0, 1], and rules for double integrals

    int_{Qs} int_{Qt} f(s, t) * log|gamma(s) - gamma(t)| dt ds

over pairs of parameter elements of a closed curve.  On identical and
node-sharing pairs the chord factors as |s - t| (resp. the corner distance)
times a smooth positive function, which holds as long as the curve has no
cusps; the log of the smooth factor goes to plain Gauss nodes and the
genuinely singular log goes to the log-weight rule.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the n-point Gauss-Legendre rule on [0, 1]."""
    if n < 1:
        raise ValueError("rule order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _log_recurrence(n):
    # Chebyshev algorithm on the exact moments int_0^1 t^k log(1/t) dt
    # = 1/(k+1)^2.  Exact rational arithmetic keeps the ill-conditioned
    # moment problem stable; floats enter only in the final Jacobi matrix.
    m = [Fraction(1, (k + 1) ** 2) for k in range(2 * n)]
    sigma_prev = [Fraction(0)] * (2 * n + 1)
    sigma = list(m) + [Fraction(0)]
    alpha = [m[1] / m[0]]
    beta = [m[0]]
    for k in range(1, n):
        sigma_new = [Fraction(0)] * (2 * n + 1)
        for l in range(k, 2 * n - k):
            sigma_new[l] = (
                sigma[l + 1]
                - alpha[k - 1] * sigma[l]
                - beta[k - 1] * sigma_prev[l]
            )
        alpha.append(sigma_new[k + 1] / sigma_new[k] - sigma[k] / sigma[k - 1])
        beta.append(sigma_new[k] / sigma[k - 1])
        sigma_prev, sigma = sigma, sigma_new
    return alpha, beta


@lru_cache(maxsize=None)
def gauss_log(n):
    """Nodes and weights for int_0^1 f(t) log(1/t) dt, exact for deg <= 2n-1."""
    if n < 1:
        raise ValueError("rule order must be >= 1")
    alpha, beta = _log_recurrence(n)
    d = np.array([float(a) for a in alpha])
    e = np.sqrt([float(b) for b in beta[1:]])
    nodes, vecs = eigh_tridiagonal(d, e)
    weights = float(beta[0]) * vecs[0, :] ** 2
    return nodes, weights


def gauss_on(a, b, n):
    """Gauss-Legendre rule mapped to [a, b]."""
    x, w = gauss_legendre(n)
    return a + (b - a) * x, (b - a) * w


def dyadic_rule(a, b, toward, depth, n=16):
    """Composite Gauss rule on [a, b], dyadically graded toward one endpoint.

    toward is 'left' or 'right'.  Extra levels resolve integrands whose scale
    of variation shrinks near that endpoint (nearly singular kernels).
    """
    frac = np.concatenate(([0.0], 0.5 ** np.arange(depth, -1, -1.0)))
    if toward == "left":
        lo = a + (b - a) * frac[:-1]
        hi = a + (b - a) * frac[1:]
    elif toward == "right":
        hi = b - (b - a) * frac[:-1]
        lo = b - (b - a) * frac[1:]
    else:
        raise ValueError("toward must be 'left' or 'right'")
    x, w = gauss_legendre(n)
    nodes = lo[:, None] + (hi - lo)[:, None] * x
    weights = (hi - lo)[:, None] * w
    return nodes.ravel(), weights.ravel()


def chord(curve, s, t):
    """|gamma(s) - gamma(t)| for parameter arrays s, t."""
    d = curve.point(s) - curve.point(t)
    return np.hypot(d[..., 0], d[..., 1])


def chord_ratio(curve, s, t):
    """|gamma(s)-gamma(t)| / |s-t|, extended by the speed on the diagonal."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    delta = np.abs(s - t)
    tiny = delta < 1e-11
    r = chord(curve, s, t) / np.where(tiny, 1.0, delta)
    if np.any(tiny):
        r = np.where(tiny, curve.speed(0.5 * (s + t)), r)
    return r


def classify_pair(elem_s, elem_t):
    """'identical', ('adjacent', shared node), or 'far'.

    Elements are (lo, hi) pairs of Fractions in [0, 1]; adjacency wraps
    around the closed-curve seam 0 ~ 1.  Pairs sharing both endpoints
    (2-element meshes) are not supported.
    """
    a0, a1 = elem_s
    b0, b1 = elem_t
    if a0 == b0 and a1 == b1:
        return "identical", None
    right_of_s = a1 if a1 != 1 else Fraction(0)
    right_of_t = b1 if b1 != 1 else Fraction(0)
    shares = []
    if right_of_s == b0:
        shares.append(b0)
    if right_of_t == a0:
        shares.append(a0)
    if len(shares) == 2:
        raise ValueError("element pair shares two nodes; mesh too coarse")
    if shares:
        return "adjacent", shares[0]
    return "far", None


def pair_rule_far(curve, elem_s, elem_t, n=16):
    """(S, T, W) with sum W*f(S,T) ~ the log-kernel pair integral, far case."""
    xs, ws = gauss_on(float(elem_s[0]), float(elem_s[1]), n)
    xt, wt = gauss_on(float(elem_t[0]), float(elem_t[1]), n)
    S, T = np.meshgrid(xs, xt, indexing="ij")
    W = np.outer(ws, wt) * np.log(chord(curve, S, T))
    return S.ravel(), T.ravel(), W.ravel()


def pair_rule_identical(curve, elem, n=16, n_log=12):
    """Log-kernel pair rule on one element squared (diagonal singularity).

    Split log|x-y| = log(chord/|s-t|) + log|s-t|.  The first factor is smooth
    on the square and gets a plain tensor rule.  For the second, integrate
    along diagonal strips: with delta = |s-t| in (0, h],

        II F log|s-t| = int_0^h log(delta) G(delta) d(delta),
        G(delta) = int of F(sig, sig-delta) + F(sig, sig+delta) over sig,

    and delta = h*x turns log(delta) into log h plus log x, handled by plain
    Gauss and the log-weight rule.  G is smooth, so no endpoint loss.
    """
    a, b = float(elem[0]), float(elem[1])
    h = b - a
    xg, wg = gauss_legendre(n)
    xl, wl = gauss_log(n_log)
    s = a + h * xg
    S0, T0 = np.meshgrid(s, s, indexing="ij")
    W0 = np.outer(h * wg, h * wg) * np.log(chord_ratio(curve, S0, T0))
    deltas = np.concatenate([h * xg, h * xl])
    cs = np.concatenate([h * np.log(h) * wg, -h * wl])
    L = h - deltas
    base = a + np.outer(L, xg)
    S_hi = base + deltas[:, None]
    W1 = np.outer(cs * L, wg)
    S = np.concatenate([S0.ravel(), S_hi.ravel(), base.ravel()])
    T = np.concatenate([T0.ravel(), base.ravel(), S_hi.ravel()])
    W = np.concatenate([W0.ravel(), W1.ravel(), W1.ravel()])
    return S, T, W


def _arm(elem, shared):
    """Map distance-from-shared-node to the element parameter, plus length."""
    lo, hi = elem
    length = float(hi - lo)
    right_end = hi if hi != 1 else Fraction(0)
    if right_end == shared:
        hi_f = float(hi)
        return (lambda u: hi_f - u), length
    if lo == shared:
        lo_f = float(lo)
        return (lambda u: lo_f + u), length
    raise ValueError("element does not touch the shared node")


def pair_rule_adjacent(curve, elem_s, elem_t, shared, n=16, n_log=12):
    """Log-kernel pair rule for elements meeting at one node (maybe a corner).

    With u, v the distances from the shared node into each element, the
    chord is (u+v) times a smooth positive factor (no-cusp assumption), so
    on the triangle v <= (b/a) u the kernel is log u plus a smooth rest.
    """
    s_of, a = _arm(elem_s, shared)
    t_of, b = _arm(elem_t, shared)
    xg, wg = gauss_legendre(n)
    xl, wl = gauss_log(n_log)
    S_parts, T_parts, W_parts = [], [], []
    for swap in (False, True):
        # radial variable r on [0, R] along one arm, q = slope*r*x_ang on the
        # other (rows: angular node, columns: radial node); plain radial nodes
        # carry log R + log(chord/r), log radial nodes the -log(1/x) weight
        R = b if swap else a
        slope = (a / b) if swap else (b / a)
        r0 = R * xg
        r1 = R * xl
        Q0 = slope * np.outer(xg, r0)
        Q1 = slope * np.outer(xg, r1)
        R0 = np.broadcast_to(r0, Q0.shape)
        R1 = np.broadcast_to(r1, Q1.shape)
        if swap:
            S0, T0 = s_of(Q0), t_of(R0)
            S1, T1 = s_of(Q1), t_of(R1)
        else:
            S0, T0 = s_of(R0), t_of(Q0)
            S1, T1 = s_of(R1), t_of(Q1)
        W0 = np.outer(wg, R * wg) * (slope * r0) * (
            np.log(R) + np.log(chord(curve, S0, T0) / r0)
        )
        W1 = -np.outer(wg, R * wl) * (slope * r1)
        S_parts += [S0.ravel(), S1.ravel()]
        T_parts += [T0.ravel(), T1.ravel()]
        W_parts += [W0.ravel(), W1.ravel()]
    return np.concatenate(S_parts), np.concatenate(T_parts), np.concatenate(W_parts)


def near_grading(elem_s, elem_t):
    """(toward_s, toward_t, depth) for a disjoint pair, from the wrapped gap.

    toward_* is the endpoint of each element facing the other one across the
    shorter way around the closed parameter circle; depth grows like
    log2(size/gap) so the graded rules resolve the almost-singularity.
    """
    a0, a1 = float(elem_s[0]), float(elem_s[1])
    b0, b1 = float(elem_t[0]), float(elem_t[1])
    gap_fwd = (b0 - a1) % 1.0
    gap_bwd = (a0 - b1) % 1.0
    if gap_fwd <= gap_bwd:
        toward_s, toward_t, gap = "right", "left", gap_fwd
    else:
        toward_s, toward_t, gap = "left", "right", gap_bwd
    size = max(a1 - a0, b1 - b0)
    if gap <= 0:
        depth = 40
    else:
        depth = int(np.ceil(np.log2(max(size / gap, 1.0)))) + 2
    return toward_s, toward_t, min(max(depth, 1), 40)


def pair_rule_near(curve, elem_s, elem_t, toward_s, toward_t, depth, n=12):
    """Tensor rule for a close but non-touching pair, graded toward the gap.

    Returns (S, T, W) with W carrying plain weights times log(chord); use for
    log kernels.  For bounded kernels use pair_nodes_near instead.
    """
    xs, ws = dyadic_rule(float(elem_s[0]), float(elem_s[1]), toward_s, depth, n)
    xt, wt = dyadic_rule(float(elem_t[0]), float(elem_t[1]), toward_t, depth, n)
    S, T = np.meshgrid(xs, xt, indexing="ij")
    W = np.outer(ws, wt) * np.log(chord(curve, S, T))
    return S.ravel(), T.ravel(), W.ravel()


def pair_nodes_plain(curve, elem_s, elem_t, n=16):
    """Tensor nodes and plain product weights (kernel left to the caller)."""
    xs, ws = gauss_on(float(elem_s[0]), float(elem_s[1]), n)
    xt, wt = gauss_on(float(elem_t[0]), float(elem_t[1]), n)
    S, T = np.meshgrid(xs, xt, indexing="ij")
    return S.ravel(), T.ravel(), np.outer(ws, wt).ravel()


def pair_nodes_duffy(curve, elem_s, elem_t, shared, n=16):
    """Corner-resolving nodes/weights for bounded kernels on a touching pair.

    The triangle maps v = slope*u*w concentrate nodes so that kernels that
    behave like 1/(u+v) stay resolved; weights are plain (no kernel factor).
    """
    s_of, a = _arm(elem_s, shared)
    t_of, b = _arm(elem_t, shared)
    xg, wg = gauss_legendre(n)
    S_parts, T_parts, W_parts = [], [], []
    for swap in (False, True):
        R = b if swap else a
        slope = (a / b) if swap else (b / a)
        r = R * xg
        for w_ang, x_ang in zip(wg, xg):
            q = slope * r * x_ang
            if swap:
                S, T = s_of(q), t_of(r)
            else:
                S, T = s_of(r), t_of(q)
            W = w_ang * (R * wg) * (slope * r)
            S_parts.append(S)
            T_parts.append(T)
            W_parts.append(W)
    return np.concatenate(S_parts), np.concatenate(T_parts), np.concatenate(W_parts)


def pair_nodes_near(curve, elem_s, elem_t, toward_s, toward_t, depth, n=12):
    """Graded tensor nodes with plain weights for a close non-touching pair."""
    xs, ws = dyadic_rule(float(elem_s[0]), float(elem_s[1]), toward_s, depth, n)
    xt, wt = dyadic_rule(float(elem_t[0]), float(elem_t[1]), toward_t, depth, n)
    S, T = np.meshgrid(xs, xt, indexing="ij")
    return S.ravel(), T.ravel(), np.outer(ws, wt).ravel()


def integrate_pair(curve, elem_s, elem_t, f, split=None, n=16, n_log=12):
    """int_{elem_s} int_{elem_t} f(s,t) log|gamma(s)-gamma(t)| dt ds.

    f maps parameter arrays (S, T) to values; split overrides the automatic
    pair classification ('identical' | 'adjacent' | 'far').
    """
    kind, shared = classify_pair(elem_s, elem_t)
    if split is not None:
        kind = split
    if kind == "identical":
        S, T, W = pair_rule_identical(curve, elem_s, n=n, n_log=n_log)
    elif kind == "adjacent":
        if shared is None:
            _, shared = classify_pair(elem_s, elem_t)
        S, T, W = pair_rule_adjacent(curve, elem_s, elem_t, shared, n=n, n_log=n_log)
    else:
        S, T, W = pair_rule_far(curve, elem_s, elem_t, n=n)
    return float(np.dot(W, f(S, T)))
