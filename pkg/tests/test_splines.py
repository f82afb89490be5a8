"""Tests for B-spline/NURBS evaluation and knot insertion."""

import numpy as np
import pytest

from igabem import splines as sp


def random_clamped(rng, p):
    nk = rng.integers(0, 5)
    interior = np.sort(rng.uniform(0.05, 0.95, nk))
    mult = rng.integers(1, p + 1, nk) if nk else np.array([], int)
    return np.concatenate(
        [[0] * (p + 1), np.repeat(interior, mult), [1] * (p + 1)]
    ).astype(float)


def test_cardinal_quadratic_values():
    k = [0.0, 1.0, 2.0, 3.0]
    assert sp.eval_bspline(k, 2, 0, 1.5) == pytest.approx(0.75)
    assert sp.eval_bspline(k, 2, 0, 0.5) == pytest.approx(0.125)
    assert sp.eval_bspline_deriv(k, 2, 0, 0.5) == pytest.approx(0.5)


def test_clamped_endpoint_interpolation():
    k = [0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]
    assert sp.eval_bspline(k, 2, 0, 0.0) == pytest.approx(1.0)
    assert sp.eval_bspline(k, 2, 3, 1.0) == pytest.approx(1.0)
    assert sp.eval_bspline(k, 2, 1, 0.0) == pytest.approx(0.0)


def test_partition_of_unity_and_positivity():
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = int(rng.integers(1, 5))
        knots = random_clamped(rng, p)
        x = rng.uniform(0, 1, 50)
        _, vals = sp.basis_funs(knots, p, x)
        assert np.abs(vals.sum(axis=1) - 1).max() < 1e-13
        assert vals.min() > -1e-14


def test_basis_matches_cox_de_boor_reference():
    rng = np.random.default_rng(0)
    for _ in range(15):
        p = int(rng.integers(1, 5))
        knots = random_clamped(rng, p)
        N = sp.num_basis(knots, p)
        x = rng.uniform(0, 1, 30)
        span, vals, ders = sp.basis_funs_derivs(knots, p, x)
        for j in range(N):
            ref_v = np.atleast_1d(sp.eval_bspline(knots, p, j, x))
            ref_d = np.atleast_1d(sp.eval_bspline_deriv(knots, p, j, x))
            got_v = np.zeros(len(x))
            got_d = np.zeros(len(x))
            for kx in range(len(x)):
                idx = j - (span[kx] - p)
                if 0 <= idx <= p:
                    got_v[kx] = vals[kx, idx]
                    got_d[kx] = ders[kx, idx]
            assert np.abs(ref_v - got_v).max() < 1e-12
            assert np.abs(ref_d - got_d).max() < 1e-9


def test_derivatives_sum_to_zero():
    # derivative of the partition of unity
    rng = np.random.default_rng(3)
    k = np.array([0, 0, 0, 0.25, 0.25, 0.6, 1, 1, 1], float)
    x = rng.uniform(0, 1, 40)
    _, _, ders = sp.basis_funs_derivs(k, 2, x)
    assert np.abs(ders.sum(axis=1)).max() < 1e-11


def test_insert_knot_linear_example():
    k = np.array([0.0, 0.0, 0.5, 1.0, 1.0])
    c = np.array([1.0, 2.0, 3.0])
    nk, nc = sp.insert_knot(k, 1, c, 0.25)
    assert np.allclose(nk, [0, 0, 0.25, 0.5, 1, 1])
    assert np.allclose(nc, [1.0, 1.5, 2.0, 3.0])


def test_insertion_preserves_rational_curve():
    rng = np.random.default_rng(5)
    p = 2
    knots = np.array([0, 0, 0, 0.3, 0.7, 1, 1, 1], float)
    N = sp.num_basis(knots, p)
    ctrl = rng.uniform(-1, 1, (N, 2))
    w = rng.uniform(0.5, 2.0, N)
    hom = np.column_stack([ctrl * w[:, None], w])
    x = np.linspace(0, 1, 101)

    def crv(kn, h):
        span, vals = sp.basis_funs(kn, p, x)
        out = np.zeros((len(x), 3))
        for r in range(p + 1):
            out += vals[:, r, None] * h[span - p + r]
        return out[:, :2] / out[:, 2:3], out[:, 2]

    before, w_before = crv(knots, hom)
    k2, h2 = sp.refine_coefficients(knots, p, hom, [0.15, 0.5, 0.5, 0.85, 0.3])
    after, w_after = crv(k2, h2)
    assert np.abs(before - after).max() < 1e-13
    assert np.abs(w_before - w_after).max() < 1e-13


def test_insert_outside_range_raises():
    k = np.array([0.0, 0.0, 0.5, 1.0, 1.0])
    with pytest.raises(ValueError):
        sp.insert_knot(k, 1, np.array([1.0, 2.0, 3.0]), 1.5)


def test_greville():
    k = np.array([0, 0, 0, 0.5, 1, 1, 1], float)
    assert np.allclose(sp.greville(k, 2), [0.0, 0.25, 0.75, 1.0])


def test_nurbs_funs_derivs_partition():
    rng = np.random.default_rng(11)
    p = 2
    knots = np.array([0, 0, 0, 0.4, 0.4, 0.8, 1, 1, 1], float)
    w = rng.uniform(0.5, 2.0, sp.num_basis(knots, p))
    x = rng.uniform(0, 1, 60)
    _, vals, ders = sp.nurbs_funs_derivs(knots, p, w, x)
    assert np.abs(vals.sum(axis=1) - 1).max() < 1e-13
    assert np.abs(ders.sum(axis=1)).max() < 1e-10
