"""Tests for knot meshes: refinement, coarsening, patches, overlay."""

import numpy as np
import pytest
from fractions import Fraction as F

from igabem import geometry as geo
from igabem import mesh as msh


@pytest.fixture
def m0():
    return msh.initial_mesh(geo.make_geometry("pacman"), 2, "hyper")


def test_initial_mesh(m0):
    assert m0.breaks == tuple(F(k, 6) for k in range(7))
    assert m0.mults == (3, 1, 1, 1, 1, 1)
    assert m0.num_knots == 8
    assert m0.kappa0 == 1


def test_refine_empty_is_identity(m0):
    assert m0.refine([]) == m0


def test_refine_bisects_fully_marked_element(m0):
    m = m0.refine([F(1, 6), F(1, 3)])
    assert F(1, 4) in m.breaks
    assert m.mult_of(F(1, 4)) == 1
    # the endpoints were covered by the bisection, multiplicities unchanged
    assert m.mult_of(F(1, 6)) == 1
    assert m.mult_of(F(1, 3)) == 1


def test_refine_raises_multiplicity(m0):
    m = m0.refine([F(1, 3)])
    assert m.mult_of(F(1, 3)) == 2
    assert m.num_elements == 6


def test_refine_at_cap_bisects_neighbors(m0):
    m = m0.refine([F(1, 3)]).refine([F(1, 3)])
    assert m.mult_of(F(1, 3)) == 2  # cap p for continuous spaces
    assert F(1, 4) in m.breaks and F(5, 12) in m.breaks


def test_weak_mode_cap_is_p_plus_one():
    m0w = msh.initial_mesh(geo.make_geometry("pacman"), 2, "weak")
    m = m0w.refine([F(1, 3)]).refine([F(1, 3)]).refine([F(1, 3)])
    assert m.mult_of(F(1, 3)) == 3
    m = m.refine([F(1, 3)])
    assert m.mult_of(F(1, 3)) == 3
    assert F(1, 4) in m.breaks and F(5, 12) in m.breaks


def test_seam_node_bisects_both_sides(m0):
    m = m0.refine([F(0)])
    assert F(1, 12) in m.breaks and F(11, 12) in m.breaks
    assert m.mult_of(F(0)) == 3
    assert m0.refine([F(1)]) == m


def test_refine_rejects_unknown_node(m0):
    with pytest.raises(ValueError):
        m0.refine([F(1, 5)])


def test_coarsen_and_floor(m0):
    m = m0.refine([F(1, 3)])
    assert m.coarsen_multiplicity([F(1, 3)]) == m0
    with pytest.raises(ValueError):
        m0.coarsen_multiplicity([F(1, 3)])
    assert m0.coarsen_multiplicity([]) == m0


def test_ominus_one(m0):
    m = m0.refine([F(1, 3)])
    assert m.ominus_one() == m0
    assert m0.ominus_one() == m0
    # applying twice reduces by at most 2, never below floor
    m2 = m.refine([F(1, 2)])
    assert m2.ominus_one().ominus_one() == m0.overlay(m0)


def test_patch(m0):
    assert m0.patch(F(1, 2), 0) == ()
    assert m0.patch(F(1, 2), 1) == (2, 3)
    assert m0.patch(F(1, 2), 2) == (1, 2, 3, 4)
    assert m0.patch(F(0), 2) == (0, 1, 4, 5)
    assert len(m0.patch(F(1, 2), 5)) == 6  # saturates the closed curve


def test_tilde_h(m0):
    assert m0.tilde_h(F(1, 2)) == pytest.approx((1 / 3) * 0.5**3, abs=1e-15)
    m = m0.refine([F(1, 2)])
    # raising the multiplicity by one multiplies tilde_h by rho
    assert m.tilde_h(F(1, 2)) == pytest.approx(0.5 * m0.tilde_h(F(1, 2)), abs=1e-15)
    # bisecting a patch element strictly decreases tilde_h
    mb = m0.refine([F(1, 3), F(1, 2)])
    assert mb.tilde_h(F(1, 2)) < m0.tilde_h(F(1, 2))


def test_overlay_exact_count(m0):
    ma = m0.refine([F(1, 6), F(1, 3)])
    mb = m0.refine([F(1, 2), F(2, 3)])
    mo = ma.overlay(mb)
    assert mo.num_knots == ma.num_knots + mb.num_knots - m0.num_knots
    assert ma.overlay(ma) == ma
    assert ma.overlay(m0) == ma
    assert F(1, 4) in mo.breaks and F(7, 12) in mo.breaks


def test_overlay_requires_same_initial(m0):
    other = msh.initial_mesh(geo.make_geometry("pacman"), 2, "weak")
    with pytest.raises(ValueError):
        m0.overlay(other)


def test_mesh_size(m0):
    h, hhat = msh.mesh_size(m0, 0)
    assert hhat == pytest.approx(1 / 6)
    # first element is half of a straight unit edge
    assert h == pytest.approx(0.5, abs=1e-12)
    h_arc, _ = msh.mesh_size(m0, 2)
    assert h_arc == pytest.approx(7 * np.pi / 8, abs=1e-12)


def test_refine_fuzz_invariants(m0):
    rng = np.random.default_rng(42)
    mesh = m0
    limit = 2 * mesh.kappa0
    steps = 0
    while steps < 1000 and mesh.num_elements < 600:
        nodes = mesh.nodes
        take = min(int(rng.integers(1, 4)), len(nodes))
        marked = [nodes[i] for i in rng.choice(len(nodes), take, replace=False)]
        new = mesh.refine(marked)
        sz = new.sizes()
        n = len(sz)
        assert all(sz[e] <= limit * sz[(e + 1) % n] for e in range(n))
        old = dict(zip(mesh.nodes, mesh.mults))
        cur = dict(zip(new.nodes, new.mults))
        assert all(z in cur and cur[z] >= m for z, m in old.items())
        assert new.num_knots <= 3 * mesh.num_knots
        mesh = new
        steps += 1


def test_knots_lines(m0):
    lines = m0.refine([F(1, 3)]).knots_lines()
    assert lines[0] == "0.0 3"
    parts = [ln.split() for ln in lines]
    assert [int(p[1]) for p in parts] == [3, 1, 2, 1, 1, 1]
