"""Tests for the discrete ansatz spaces."""

import numpy as np
import pytest
from fractions import Fraction as F

from igabem import geometry as geo
from igabem import mesh as msh
from igabem import spaces as spc
from igabem import splines as sp


@pytest.fixture
def m0():
    return msh.initial_mesh(geo.make_geometry("pacman"), 2, "hyper")


def test_dimensions(m0):
    assert spc.build_space(m0, "hyper_nurbs").dim == 7
    assert spc.build_space(m0, "weak_nurbs").dim == 8
    assert spc.build_space(m0, "pw_poly_discontinuous").dim == 18
    assert spc.build_space(m0, "pw_poly_continuous").dim == 12
    m1 = m0.refine([F(1, 6), F(1, 3)])
    assert spc.build_space(m1, "hyper_nurbs").dim == 8
    assert spc.build_space(m1, "hyper_nurbs").dim == m1.num_knots - 1


def test_unknown_kind(m0):
    with pytest.raises(ValueError):
        spc.build_space(m0, "mystery")


def test_constants_reproduced(m0):
    t = np.linspace(0.001, 0.999, 79)
    for kind in ("hyper_nurbs", "weak_nurbs", "pw_poly_continuous"):
        s = spc.build_space(m0, kind)
        sol = spc.DiscreteSolution(s, np.full(s.dim, 3.25))
        assert np.abs(sol(t) - 3.25).max() < 1e-12
        assert np.abs(sol(t, order=1)).max() < 1e-11


def test_hyper_basis_continuous_at_seam(m0):
    s = spc.build_space(m0, "hyper_nurbs")
    for i in range(s.dim):
        e = np.zeros(s.dim)
        e[i] = 1.0
        sol = spc.DiscreteSolution(s, e)
        assert abs(sol(np.array([0.0]))[0] - sol(np.array([1 - 1e-13]))[0]) < 1e-9


def test_weak_endpoint_functions_jump_at_seam(m0):
    s = spc.build_space(m0, "weak_nurbs")
    e = np.zeros(s.dim)
    e[0] = 1.0
    sol = spc.DiscreteSolution(s, e)
    assert sol(np.array([0.0]))[0] == pytest.approx(1.0)
    assert abs(sol(np.array([1 - 1e-13]))[0]) < 1e-9


def test_unit_weight_space_is_bspline_combination(m0):
    s = spc.build_space(m0, "weak_nurbs")
    rng = np.random.default_rng(3)
    c = rng.uniform(-1, 1, s.dim)
    sol = spc.DiscreteSolution(s, c)
    t = np.linspace(0.001, 0.999, 57)
    ref = np.zeros(len(t))
    for j in range(s.num_full):
        ref += c[j] * np.atleast_1d(sp.eval_bspline(s.knots, 2, j, t))
    assert np.abs(sol(t) - ref).max() < 1e-12


def test_smoothness_matches_multiplicity(m0):
    # C^(p - mult): mult 1 keeps the first derivative continuous, mult 2
    # (= p) leaves only continuity
    m = m0.refine([F(1, 3)])
    s = spc.build_space(m, "hyper_nurbs")
    rng = np.random.default_rng(5)
    sol = spc.DiscreteSolution(s, rng.uniform(-1, 1, s.dim))
    eps = 1e-9
    for node, mult in ((1 / 3, 2), (1 / 2, 1)):
        v_jump = abs(sol(np.array([node + eps]))[0] - sol(np.array([node - eps]))[0])
        d_jump = abs(
            sol(np.array([node + eps]), 1)[0] - sol(np.array([node - eps]), 1)[0]
        )
        assert v_jump < 1e-7
        if mult == 2:
            assert d_jump > 1e-2
        else:
            assert d_jump < 1e-6


def test_weak_full_multiplicity_allows_jump():
    mw = msh.initial_mesh(geo.make_geometry("pacman"), 2, "weak")
    m = mw.refine([F(1, 3)]).refine([F(1, 3)]).refine([F(1, 3)])
    assert m.mult_of(F(1, 3)) == 3
    s = spc.build_space(m, "weak_nurbs")
    jumps = []
    for i in range(s.dim):
        e = np.zeros(s.dim)
        e[i] = 1.0
        sol = spc.DiscreteSolution(s, e)
        jumps.append(
            abs(sol(np.array([1 / 3 + 1e-12]))[0] - sol(np.array([1 / 3 - 1e-12]))[0])
        )
    assert max(jumps) > 0.5


def test_nested_embed(m0):
    rng = np.random.default_rng(7)
    m = m0.refine([F(1, 3)])
    fine = m.refine([F(1, 2), F(2, 3)]).refine([F(0)])
    s = spc.build_space(m, "hyper_nurbs")
    sf = spc.build_space(fine, "hyper_nurbs")
    sol = spc.DiscreteSolution(s, rng.uniform(-1, 1, s.dim))
    emb = spc.nested_embed(sol, sf)
    t = rng.uniform(0, 1, 100)
    assert np.abs(sol(t) - emb(t)).max() < 1e-12
    same = spc.nested_embed(sol, s)
    assert np.abs(same.coefficients - sol.coefficients).max() < 1e-13


def test_nested_embed_rejects_non_refinement(m0):
    ma = m0.refine([F(1, 6), F(1, 3)])
    mb = m0.refine([F(1, 2), F(2, 3)])
    sa = spc.build_space(ma, "hyper_nurbs")
    sb = spc.build_space(mb, "hyper_nurbs")
    sol = spc.DiscreteSolution(sa, np.ones(sa.dim))
    with pytest.raises(ValueError):
        spc.nested_embed(sol, sb)


def test_double_embed_equals_single_via_overlay(m0):
    rng = np.random.default_rng(11)
    ma = m0.refine([F(1, 6), F(1, 3)])
    mo = ma.overlay(m0.refine([F(1, 2), F(2, 3)]))
    sa = spc.build_space(ma, "hyper_nurbs")
    so = spc.build_space(mo, "hyper_nurbs")
    sol = spc.DiscreteSolution(sa, rng.uniform(-1, 1, sa.dim))
    one = spc.nested_embed(sol, so)
    fine = mo.refine([F(1, 4)])
    sfine = spc.build_space(fine, "hyper_nurbs")
    two = spc.nested_embed(one, sfine)
    direct = spc.nested_embed(sol, sfine)
    assert np.abs(two.coefficients - direct.coefficients).max() < 1e-12


def test_weight_propagation_bounds(m0):
    rng = np.random.default_rng(13)
    w0 = rng.uniform(0.5, 2.0, 8)
    w0[-1] = w0[0]
    mesh = m0
    for _ in range(6):
        nodes = mesh.nodes
        marked = [nodes[i] for i in rng.choice(len(nodes), 2, replace=False)]
        mesh = mesh.refine(marked)
    s = spc.build_space(mesh, "hyper_nurbs", initial_weights=w0)
    assert s.weights.min() >= w0.min() - 1e-12
    assert s.weights.max() <= w0.max() + 1e-12


def test_hyper_rejects_mismatched_endpoint_weights(m0):
    w0 = np.ones(8)
    w0[-1] = 2.0
    with pytest.raises(ValueError):
        spc.build_space(m0, "hyper_nurbs", initial_weights=w0)
    # weak kind accepts the same weights
    spc.build_space(m0, "weak_nurbs", initial_weights=w0)


def test_derivative_right_continuous_at_full_knot(m0):
    m = m0.refine([F(1, 3)])
    s = spc.build_space(m, "hyper_nurbs")
    rng = np.random.default_rng(17)
    sol = spc.DiscreteSolution(s, rng.uniform(-1, 1, s.dim))
    d_at = sol(np.array([1 / 3]), 1)[0]
    d_right = sol(np.array([1 / 3 + 1e-11]), 1)[0]
    assert abs(d_at - d_right) < 1e-8


def test_eval_solution_arclength_derivative(m0):
    m = m0.refine([F(1, 3)])
    s = spc.build_space(m, "hyper_nurbs")
    rng = np.random.default_rng(19)
    sol = spc.DiscreteSolution(s, rng.uniform(-1, 1, s.dim))
    t = np.array([0.21, 0.4, 0.55, 0.71])
    got = spc.eval_solution(sol, t, 1)
    h = 1e-7
    curve = m.curve
    ref = (sol(t + h) - sol(t - h)) / (2 * h) / curve.speed(t)
    assert np.abs(got - ref).max() < 1e-6


def test_pw_discontinuous_eval(m0):
    s = spc.build_space(m0, "pw_poly_discontinuous")
    c = np.zeros(s.dim)
    # element 2 gets 1 + xi (Legendre P0 + P1 on the element)
    c[2 * 3 + 0] = 1.0
    c[2 * 3 + 1] = 1.0
    sol = spc.DiscreteSolution(s, c)
    t = np.array([1 / 3 + 1e-9, 5 / 12, 0.5 - 1e-9])
    assert np.allclose(sol(t), [0.0, 1.0, 2.0], atol=1e-6)
    # outside the element: zero
    assert abs(sol(np.array([0.2]))[0]) < 1e-14
    # derivative: dP1/dt = 2/h
    assert sol(np.array([5 / 12]), 1)[0] == pytest.approx(2 / (1 / 6))
