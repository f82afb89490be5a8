"""Boundary integral operators and Galerkin systems for the 2D Laplace
equation.

The fundamental solution is G(x,y) = -(1/2 pi) log|x-y|.  Galerkin entries
are double parameter integrals; diagonal and corner-touching pairs use the
dedicated log rules from the quadrature module, close non-touching pairs
get graded tensor rules, everything else plain tensor Gauss.

The hyper-singular form is never touched directly: integration by parts
turns it into the single-layer form on parameter derivatives,

    <W u, v> = <V u', v'>,    u' = du/dt (speed factors cancel),

and the rank-one term (int u ds)(int v ds) makes the stabilized form an
equivalent scalar product.

The double-layer kernel and its adjoint are bounded along smooth arcs with
limit -kappa/2 on the diagonal, but behave like 1/r across corners, where
the corner-concentrated node sets take over.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import quadrature as qd
from . import splines as sp
from .spaces import DiscreteSolution

INV2PI = 1.0 / (2.0 * np.pi)
NEAR_FACTOR = 2.0  # gap below this times the larger size -> graded rule
DIAG_GUARD = 1e-6  # wrapped parameter distance below which the curvature
# limit replaces the cancellation-prone double-layer ratio

MODES = ("hyper_direct", "hyper_indirect", "weak_direct", "weak_indirect")


def _require_same_mesh(trial, test):
    if trial.mesh is not test.mesh:
        raise ValueError("trial and test spaces must live on the same mesh")
    return trial.mesh


def _element_bounds(mesh):
    b = np.array([float(z) for z in mesh.breaks])
    return b[:-1], b[1:]


def _active(space, e):
    if space.kind == "pw_poly_discontinuous":
        q = space.p + 1
        return np.arange(e * q, (e + 1) * q)
    return space.active_coef(e)


def _pw_table(space, e_of, t, order):
    lo = np.array([float(space.mesh.breaks[e]) for e in e_of])
    hi = np.array([float(space.mesh.breaks[e + 1]) for e in e_of])
    xi = 2.0 * (t - lo) / (hi - lo) - 1.0
    out = np.empty((len(t), space.p + 1))
    for k in range(space.p + 1):
        ck = np.zeros(k + 1)
        ck[k] = 1.0
        if order == 0:
            out[:, k] = np.polynomial.legendre.legval(xi, ck)
        else:
            dk = np.polynomial.legendre.legder(ck)
            out[:, k] = np.polynomial.legendre.legval(xi, dk) * 2.0 / (hi - lo)
    return out


def _local_at(space, e, t, order):
    """(len(t), p+1) values of the functions active on element e at t."""
    t = np.asarray(t, dtype=float)
    if space.kind == "pw_poly_discontinuous":
        return _pw_table(space, np.full(len(t), e), t, order)
    span, vals, ders = sp.nurbs_funs_derivs(space.knots, space.p, space.weights, t)
    expected = space.element_span(e)
    if not np.all(span == expected):
        raise AssertionError("quadrature node escaped its element")
    return ders if order else vals


def _local_table(space, X, order):
    """(nel, n, p+1) active-function values on each element's node grid."""
    nel, n = X.shape
    if space.kind == "pw_poly_discontinuous":
        e_of = np.repeat(np.arange(nel), n)
        return _pw_table(space, e_of, X.ravel(), order).reshape(nel, n, -1)
    span, vals, ders = sp.nurbs_funs_derivs(
        space.knots, space.p, space.weights, X.ravel()
    )
    expected = np.repeat([space.element_span(e) for e in range(nel)], n)
    if not np.all(span == expected):
        raise AssertionError("quadrature node escaped its element")
    table = ders if order else vals
    return table.reshape(nel, n, -1)


def _grid(mesh, n):
    lo, hi = _element_bounds(mesh)
    xg, wg = qd.gauss_legendre(n)
    X = lo[:, None] + (hi - lo)[:, None] * xg
    WQ = (hi - lo)[:, None] * wg
    return X, WQ


def _special_mask(lo, hi, es):
    """Boolean row: which t-elements need non-plain rules against es."""
    h = hi - lo
    fwd = (lo - hi[es]) % 1.0
    bwd = (lo[es] - hi) % 1.0
    gap = np.minimum(fwd, bwd)
    mask = gap < NEAR_FACTOR * np.maximum(h, h[es])
    mask[es] = True
    return mask


def _log_pair_rule(curve, elem_s, elem_t, n, n_log):
    kind, shared = qd.classify_pair(elem_s, elem_t)
    if kind == "identical":
        return qd.pair_rule_identical(curve, elem_s, n=n, n_log=n_log)
    if kind == "adjacent":
        return qd.pair_rule_adjacent(curve, elem_s, elem_t, shared, n=n, n_log=n_log)
    ts, tt, depth = qd.near_grading(elem_s, elem_t)
    return qd.pair_rule_near(curve, elem_s, elem_t, ts, tt, depth, n=12)


def _bounded_pair_nodes(curve, elem_s, elem_t, n):
    kind, shared = qd.classify_pair(elem_s, elem_t)
    if kind == "identical":
        return qd.pair_nodes_plain(curve, elem_s, elem_t, n=n)
    if kind == "adjacent":
        return qd.pair_nodes_duffy(curve, elem_s, elem_t, shared, n=n)
    ts, tt, depth = qd.near_grading(elem_s, elem_t)
    return qd.pair_nodes_near(curve, elem_s, elem_t, ts, tt, depth, n=12)


def _smooth_guard(curve, S, T, mask):
    """Drop guard entries whose short arc from S to T crosses a corner.

    The curvature limit of the double-layer ratio only holds along a smooth
    arc; across a corner the ratio genuinely grows like 1/r while the raw
    quotient stays well conditioned, so those pairs keep it.  Containment
    of a corner in the short arc is decided from forward arc lengths; the
    margin of those comparisons is the corner-to-endpoint distance, so the
    test stays exact however close the pair sits to the corner.
    """
    corners = [float(c) for c in getattr(curve, "corners", ())]
    if not corners or not np.any(mask):
        return mask
    Sb = np.broadcast_to(S, mask.shape)[mask]
    Tb = np.broadcast_to(T, mask.shape)[mask]
    fwd = (Tb - Sb) % 1.0
    short_fwd = fwd <= 0.5
    split = np.zeros(len(Sb), dtype=bool)
    for c in corners:
        a = (c - Sb) % 1.0
        split |= np.where(short_fwd, a <= fwd, a >= fwd)
    if not np.any(split):
        return mask
    out = mask.copy()
    out[mask] = ~split
    return out


def _dlp_values(curve, S, T, nu_at_trial):
    """Double-layer kernel values k(S,T) with the diagonal curvature limit.

    nu_at_trial True: nu at the trial point T (operator K); False: nu at
    the test point S (adjoint K').
    """
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    d = curve.point(S) - curve.point(T)
    r2 = np.einsum("...k,...k->...", d, d)
    if nu_at_trial:
        num = np.einsum("...k,...k->...", curve.normal(T), d)
    else:
        num = -np.einsum("...k,...k->...", curve.normal(S), d)
    delta = np.abs(S - T)
    delta = np.minimum(delta, 1.0 - delta)
    limit_at = T if nu_at_trial else S
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / r2
    mask = _smooth_guard(curve, S, T, delta < DIAG_GUARD)
    if np.any(mask):
        ratio = np.where(mask, -0.5 * curve.curvature(limit_at), ratio)
    return INV2PI * ratio


def _assemble_log(trial, test, order, with_speed, n, n_log, threads):
    """Matrix of -(1/2 pi) II log|x-y| (trial fns) (test fns) [speeds]."""
    mesh = _require_same_mesh(trial, test)
    curve = mesh.curve
    nel = mesh.num_elements
    lo, hi = _element_bounds(mesh)
    elems = [mesh.element(e) for e in range(nel)]
    X, WQ = _grid(mesh, n)
    SPD = curve.speed(X.ravel()).reshape(nel, n)
    factor = WQ * SPD if with_speed else WQ
    trial_fold = _local_table(trial, X, order) * factor[:, :, None]
    test_fold = _local_table(test, X, order) * factor[:, :, None]
    rows = np.array([_active(test, e) for e in range(nel)])
    cols = np.array([_active(trial, e) for e in range(nel)])
    pts = curve.point(X.ravel())
    A = np.zeros((test.dim, trial.dim))

    def row_work(es):
        specials = np.nonzero(_special_mask(lo, hi, es))[0]
        d = curve.point(X[es])[:, None, :] - pts[None, :, :]
        with np.errstate(divide="ignore"):
            K = 0.5 * np.log(np.einsum("ijk,ijk->ij", d, d))
        K = K.reshape(n, nel, n)
        K[:, specials, :] = 0.0
        M = test_fold[es].T @ K.reshape(n, -1)
        contrib = np.einsum("aej,ejb->eab", M.reshape(-1, nel, n), trial_fold)
        extra = []
        speed_s = SPD[es]
        for et in specials:
            S, T, W = _log_pair_rule(curve, elems[es], elems[int(et)], n, n_log)
            f = W
            if with_speed:
                f = f * curve.speed(S) * curve.speed(T)
            vs = _local_at(test, es, S, order)
            vt = _local_at(trial, int(et), T, order)
            extra.append((int(et), (vs * f[:, None]).T @ vt))
        return es, contrib, extra

    def scatter(result):
        es, contrib, extra = result
        np.add.at(A, (rows[es][None, :, None], cols[:, None, :]), contrib)
        for et, L in extra:
            np.add.at(A, (rows[es][:, None], cols[et][None, :]), L)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for result in pool.map(row_work, range(nel)):
                scatter(result)
    else:
        for es in range(nel):
            scatter(row_work(es))
    return -INV2PI * A


def assemble_V(trial, test, n=12, n_log=10, threads=1):
    """Galerkin single-layer matrix <V b_j, b_i> with arclength measure."""
    return _assemble_log(trial, test, 0, True, n, n_log, threads)


def integral_of_basis(space, n=12):
    """Vector of int_Gamma R_i ds."""
    mesh = space.mesh
    X, WQ = _grid(mesh, n)
    fold = WQ * mesh.curve.speed(X.ravel()).reshape(X.shape)
    table = _local_table(space, X, 0)
    out = np.zeros(space.dim)
    for e in range(mesh.num_elements):
        np.add.at(out, _active(space, e), fold[e] @ table[e])
    return out


def assemble_W_stabilized(space, n=12, n_log=10, threads=1):
    """Stabilized hyper-singular form <V u', v'> + (int u ds)(int v ds)."""
    if space.p == 0:
        raise ValueError("the hyper-singular form needs degree p >= 1")
    A = _assemble_log(space, space, 1, False, n, n_log, threads)
    s = integral_of_basis(space, n)
    return A + np.outer(s, s)


def assemble_mass(trial, test, n=12):
    """<b_j, b_i> with arclength measure."""
    mesh = _require_same_mesh(trial, test)
    X, WQ = _grid(mesh, n)
    fold = WQ * mesh.curve.speed(X.ravel()).reshape(X.shape)
    ttab = _local_table(trial, X, 0)
    stab = _local_table(test, X, 0) * fold[:, :, None]
    M = np.zeros((test.dim, trial.dim))
    for e in range(mesh.num_elements):
        np.add.at(
            M,
            (_active(test, e)[:, None], _active(trial, e)[None, :]),
            stab[e].T @ ttab[e],
        )
    return M


def _as_callable(f):
    if isinstance(f, DiscreteSolution) or callable(f):
        return f
    raise TypeError("expected a DiscreteSolution or a callable on [0,1]")


def _dlp_rhs(density, test, nu_at_trial, n, threads):
    """Vector of <D density, psi_i> where D is K (nu at trial) or K'."""
    mesh = test.mesh
    curve = mesh.curve
    nel = mesh.num_elements
    lo, hi = _element_bounds(mesh)
    elems = [mesh.element(e) for e in range(nel)]
    X, WQ = _grid(mesh, n)
    flat = X.ravel()
    SPD = curve.speed(flat).reshape(nel, n)
    fold = WQ * SPD
    test_fold = _local_table(test, X, 0) * fold[:, :, None]
    rows = np.array([_active(test, e) for e in range(nel)])
    gv = (density(flat) * fold.ravel()).reshape(nel, n)
    pts = curve.point(flat)
    nu_g = curve.normal(flat)
    kap_g = curve.curvature(flat)
    b = np.zeros(test.dim)

    def row_work(es):
        specials = np.nonzero(_special_mask(lo, hi, es))[0]
        d = curve.point(X[es])[:, None, :] - pts[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        if nu_at_trial:
            num = np.einsum("jk,ijk->ij", nu_g, d)
        else:
            num = -np.einsum("ik,ijk->ij", curve.normal(X[es]), d)
        delta = np.abs(X[es][:, None] - flat[None, :])
        delta = np.minimum(delta, 1.0 - delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / r2
        guard = _smooth_guard(
            curve, X[es][:, None], flat[None, :], delta < DIAG_GUARD
        )
        if np.any(guard):
            lim = kap_g[None, :] if nu_at_trial else curve.curvature(X[es])[:, None]
            ratio = np.where(guard, -0.5 * np.broadcast_to(lim, ratio.shape), ratio)
        K = (INV2PI * ratio).reshape(n, nel, n)
        K[:, specials, :] = 0.0
        vec = test_fold[es].T @ (K.reshape(n, -1) @ gv.ravel()[:, None]).ravel()
        for et in specials:
            S, T, W = _bounded_pair_nodes(curve, elems[es], elems[int(et)], n)
            kv = _dlp_values(curve, S, T, nu_at_trial)
            common = W * kv * curve.speed(S) * curve.speed(T) * density(T)
            vec = vec + _local_at(test, es, S, 0).T @ common
        return es, vec

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for es, vec in pool.map(row_work, range(nel)):
                np.add.at(b, rows[es], vec)
    else:
        for es in range(nel):
            es, vec = row_work(es)
            np.add.at(b, rows[es], vec)
    return b


def _mass_apply(density, test, n=12):
    mesh = test.mesh
    X, WQ = _grid(mesh, n)
    fold = WQ * mesh.curve.speed(X.ravel()).reshape(X.shape)
    table = _local_table(test, X, 0)
    gv = density(X.ravel()).reshape(X.shape) * fold
    b = np.zeros(test.dim)
    for e in range(mesh.num_elements):
        np.add.at(b, _active(test, e), table[e].T @ gv[e])
    return b


def apply_Kprime_rhs(phi_h, test, indirect=False, n=12, threads=1):
    """RHS of the hyper-singular equation: <(1/2 - K') phi_h, R_i>.

    phi_h must be discrete (exact Neumann data destabilizes the method);
    indirect mode skips the operator and returns the plain mass pairing,
    which accepts any callable datum.
    """
    if indirect:
        return _mass_apply(_as_callable(phi_h), test, n)
    if not isinstance(phi_h, DiscreteSolution):
        raise TypeError("the hyper-singular right-hand side needs discrete data")
    return 0.5 * _mass_apply(phi_h, test, n) - _dlp_rhs(phi_h, test, False, n, threads)


def apply_K_rhs(u_h, test, indirect=False, n=12, threads=1):
    """RHS of the weakly-singular equation: <(1/2 + K) u_h, psi_i>.

    u_h may be a DiscreteSolution or a callable (data approximation is
    optional here); indirect mode returns the plain mass pairing.
    """
    u_h = _as_callable(u_h)
    if indirect:
        return _mass_apply(u_h, test, n)
    return 0.5 * _mass_apply(u_h, test, n) + _dlp_rhs(u_h, test, True, n, threads)


def _near_nodes_for_sample(lo, hi, gap, toward_left, es, s0, n):
    """Graded rule on element es facing the off-element sample s0."""
    depth = int(np.ceil(np.log2((hi[es] - lo[es]) / max(gap[es], 1e-300)))) + 2
    toward = "left" if toward_left[es] else "right"
    return qd.dyadic_rule(lo[es], hi[es], toward, min(max(depth, 1), 40), n)


def _sample_layout(lo, hi, samples):
    """Containing element, wrapped gaps, facing sides, and near masks."""
    e0 = np.minimum(
        np.searchsorted(np.append(lo, 1.0), samples, side="right") - 1, len(lo) - 1
    ).astype(int)
    fwd = (lo[None, :] - samples[:, None]) % 1.0
    bwd = (samples[:, None] - hi[None, :]) % 1.0
    toward_left = fwd <= bwd
    gap = np.where(toward_left, fwd, bwd)
    near = gap < (hi - lo)[None, :]
    near[np.arange(len(samples)), e0] = True
    return e0, gap, toward_left, near


def _near_batch(lo, hi, samples, e0, gap, toward_left, near, n):
    """Concatenated graded rules over all (sample, near off-element) pairs."""
    idx, xs, ws = [], [], []
    for k, s0 in enumerate(samples):
        for es in np.nonzero(near[k])[0]:
            if es == e0[k]:
                continue
            x, w = _near_nodes_for_sample(lo, hi, gap[k], toward_left[k], es, s0, n)
            idx.append(np.full(len(x), k))
            xs.append(x)
            ws.append(w)
    if not xs:
        return np.empty(0, dtype=int), np.empty(0), np.empty(0)
    return np.concatenate(idx).astype(int), np.concatenate(xs), np.concatenate(ws)


def _far_block(nel, n):
    return max(1, 4_000_000 // max(nel * n, 1))


def eval_V_pointwise(density, mesh, samples, with_speed=True, n=12, n_log=10):
    """V density at parameters: -(1/2 pi) int log|x - gamma(t)| density dt.

    The far field reuses one Gauss grid over all elements; the containing
    element is split at the sample with the log factored out radially, and
    elements closer than their own width get a rule graded toward the
    sample.  Samples are processed together so basis and geometry lookups
    stay vectorized.
    """
    density = _as_callable(density)
    curve = mesh.curve
    samples = np.asarray(samples, dtype=float)
    ns = len(samples)
    lo, hi = _element_bounds(mesh)
    nel = len(lo)
    X, WQ = _grid(mesh, n)
    pts = curve.point(X.ravel())
    gv = WQ.ravel() * density(X.ravel())
    if with_speed:
        gv = gv * curve.speed(X.ravel())
    xg, wg = qd.gauss_legendre(n)
    xl, wl = qd.gauss_log(n_log)

    def load(T):
        f = density(T)
        return f * curve.speed(T) if with_speed else f

    e0, gap, toward_left, near = _sample_layout(lo, hi, samples)
    acc = np.zeros(ns)
    P = curve.point(samples)
    block = _far_block(nel, n)
    for c0 in range(0, ns, block):
        c1 = min(ns, c0 + block)
        d = P[c0:c1, None, :] - pts[None, :, :]
        with np.errstate(divide="ignore"):
            kv = 0.5 * np.log(np.einsum("ijk,ijk->ij", d, d))
        kv[np.repeat(near[c0:c1], n, axis=1)] = 0.0
        acc[c0:c1] = kv @ gv
    # containing element: split at the sample, log factored out radially
    for sign in (-1.0, 1.0):
        a = samples - lo[e0] if sign < 0 else hi[e0] - samples
        rows = np.nonzero(a > 1e-14)[0]
        if not len(rows):
            continue
        aR = a[rows][:, None]
        sR = samples[rows]
        T0 = sR[:, None] + sign * aR * xg
        ch = qd.chord(curve, np.repeat(sR, n), T0.ravel()).reshape(-1, n)
        w0 = aR * wg * (np.log(ch / (aR * xg)) + np.log(aR))
        acc[rows] += np.einsum("ij,ij->i", w0, load(T0.ravel()).reshape(-1, n))
        TL = sR[:, None] + sign * aR * xl
        acc[rows] -= aR[:, 0] * (load(TL.ravel()).reshape(-1, n_log) @ wl)
    # near off-containing elements: graded rules, one batched evaluation
    kidx, xs, ws = _near_batch(lo, hi, samples, e0, gap, toward_left, near, n)
    if len(xs):
        wlog = ws * np.log(qd.chord(curve, samples[kidx], xs))
        acc += np.bincount(kidx, weights=wlog * load(xs), minlength=ns)
    return -INV2PI * acc


def _dlp_pointwise(density, mesh, samples, nu_at_trial, n=12):
    density = _as_callable(density)
    curve = mesh.curve
    samples = np.asarray(samples, dtype=float)
    ns = len(samples)
    lo, hi = _element_bounds(mesh)
    nel = len(lo)
    X, WQ = _grid(mesh, n)
    flat = X.ravel()
    gv = WQ.ravel() * density(flat) * curve.speed(flat)
    pts = curve.point(flat)
    nu_g = curve.normal(flat)
    kap_g = curve.curvature(flat)
    xg, wg = qd.gauss_legendre(n)

    e0, gap, toward_left, near = _sample_layout(lo, hi, samples)
    acc = np.zeros(ns)
    P = curve.point(samples)
    nu_s = None if nu_at_trial else curve.normal(samples)
    kap_s = None if nu_at_trial else curve.curvature(samples)
    block = _far_block(nel, n)
    for c0 in range(0, ns, block):
        c1 = min(ns, c0 + block)
        d = P[c0:c1, None, :] - pts[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        if nu_at_trial:
            num = np.einsum("jk,ijk->ij", nu_g, d)
        else:
            num = -np.einsum("ik,ijk->ij", nu_s[c0:c1], d)
        delta = np.abs(samples[c0:c1, None] - flat[None, :])
        delta = np.minimum(delta, 1.0 - delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / r2
        guard = _smooth_guard(
            curve, samples[c0:c1, None], flat[None, :], delta < DIAG_GUARD
        )
        if np.any(guard):
            lim = kap_g[None, :] if nu_at_trial else kap_s[c0:c1, None]
            ratio = np.where(guard, -0.5 * np.broadcast_to(lim, ratio.shape), ratio)
        kv = INV2PI * ratio
        kv[np.repeat(near[c0:c1], n, axis=1)] = 0.0
        acc[c0:c1] = kv @ gv
    # containing element: plain Gauss on each side of the sample
    for side_left in (True, False):
        a = samples - lo[e0] if side_left else hi[e0] - samples
        rows = np.nonzero(a > 1e-14)[0]
        if not len(rows):
            continue
        aR = a[rows][:, None]
        sR = samples[rows]
        start = lo[e0[rows]][:, None] if side_left else sR[:, None]
        x = start + aR * xg
        kvs = _dlp_values(curve, np.repeat(sR, n), x.ravel(), nu_at_trial)
        f = (kvs * density(x.ravel()) * curve.speed(x.ravel())).reshape(-1, n)
        acc[rows] += aR[:, 0] * (f @ wg)
    kidx, xs, ws = _near_batch(lo, hi, samples, e0, gap, toward_left, near, n)
    if len(xs):
        kvs = _dlp_values(curve, samples[kidx], xs, nu_at_trial)
        acc += np.bincount(
            kidx, weights=ws * kvs * density(xs) * curve.speed(xs), minlength=ns
        )
    return acc


def eval_K_pointwise(u, mesh, samples, n=12):
    """Double-layer potential K u on the boundary."""
    return _dlp_pointwise(u, mesh, samples, True, n)


def eval_Kprime_pointwise(phi, mesh, samples, n=12):
    """Adjoint double-layer K' phi on the boundary."""
    return _dlp_pointwise(phi, mesh, samples, False, n)


def _check_not_corner(mesh, samples):
    corners = {float(c) for c in getattr(mesh.curve, "corners", ())}
    corners |= {1.0 for c in corners if c == 0.0}
    if corners.intersection(np.asarray(samples, dtype=float).tolist()):
        raise ValueError("samples must avoid the corners of the curve")


def _group_by_element(mesh, samples):
    breaks = np.array([float(z) for z in mesh.breaks])
    e_of = np.clip(
        np.searchsorted(breaks, samples, side="right") - 1, 0, mesh.num_elements - 1
    )
    groups = {}
    for i, e in enumerate(e_of):
        groups.setdefault(int(e), []).append(i)
    return groups


def _interpolant_derivative(mesh, pointwise_fn, samples, q, n, n_log):
    """Arclength derivative of a potential via per-element Chebyshev fits.

    The potential is evaluated in one batched call over all Chebyshev nodes
    so the pointwise evaluator can reuse its far-field grid.
    """
    curve = mesh.curve
    samples = np.asarray(samples, dtype=float)
    out = np.empty(len(samples))
    cheb = np.cos((2 * np.arange(q) + 1) * np.pi / (2 * q))[::-1]
    groups = _group_by_element(mesh, samples)
    elems = sorted(groups)
    bounds = [tuple(float(z) for z in mesh.element(e)) for e in elems]
    nodes = np.concatenate(
        [lo + 0.5 * (hi - lo) * (cheb + 1.0) for lo, hi in bounds]
    )
    vals = pointwise_fn(nodes)
    for i, e in enumerate(elems):
        lo, hi = bounds[i]
        coef = np.polynomial.chebyshev.chebfit(cheb, vals[i * q:(i + 1) * q], q - 1)
        dcoef = np.polynomial.chebyshev.chebder(coef) * 2.0 / (hi - lo)
        idx = groups[e]
        xi = 2.0 * (samples[idx] - lo) / (hi - lo) - 1.0
        out[idx] = np.polynomial.chebyshev.chebval(xi, dcoef) / curve.speed(
            samples[idx]
        )
    return out


def eval_V_on_solution(phi_sol, samples, derivative=0, q=None, n=12, n_log=10):
    """Single-layer potential of a discrete density at boundary samples.

    derivative=1 returns the arclength derivative, computed by
    differentiating a per-element Chebyshev interpolant of the potential.
    """
    mesh = phi_sol.space.mesh
    _check_not_corner(mesh, samples)
    q = phi_sol.space.p + 3 if q is None else q
    if derivative == 0:
        return eval_V_pointwise(phi_sol, mesh, samples, True, n, n_log)
    fn = lambda t: eval_V_pointwise(phi_sol, mesh, t, True, n, n_log)
    return _interpolant_derivative(mesh, fn, samples, q, n, n_log)


def eval_W_on_solution(U_sol, samples, q=None, n=12, n_log=10):
    """Hyper-singular operator on a discrete function at boundary samples.

    W U = -d/ds [ V(dU/ds) ]; the inner potential is sampled at q Chebyshev
    points per element and the interpolant differentiated in arclength.
    """
    mesh = U_sol.space.mesh
    _check_not_corner(mesh, samples)
    q = U_sol.space.p + 3 if q is None else q
    density = lambda t: U_sol(t, order=1)
    fn = lambda t: eval_V_pointwise(density, mesh, t, False, n, n_log)
    return -_interpolant_derivative(mesh, fn, samples, q, n, n_log)


@dataclass(eq=False)
class GalerkinSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    space: object
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'")


def solve(system):
    """Cholesky solve with one refinement step; relative residual <= 1e-12."""
    A, b = system.matrix, system.rhs
    try:
        cho = scipy.linalg.cho_factor(A)
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"Cholesky failed for mode {system.mode}, dim {len(b)}: {exc}"
        ) from exc
    x = scipy.linalg.cho_solve(cho, b)
    scale = np.linalg.norm(b)
    if scale > 0:
        for _ in range(3):
            r = b - A @ x
            if np.linalg.norm(r) <= 1e-13 * scale:
                break
            x = x + scipy.linalg.cho_solve(cho, r)
        rel = np.linalg.norm(b - A @ x) / scale
        if rel > 1e-12:
            raise RuntimeError(
                f"solver residual {rel:.2e} exceeds 1e-12 (dim {len(b)})"
            )
    return DiscreteSolution(system.space, x)
