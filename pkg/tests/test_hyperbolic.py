import numpy as np
import pytest

from anosovlab.hyperbolic import (angular_gap, canonical_chain, chain_is_valid,
                                  make_chain, orbit_log_jacobian,
                                  periodic_exponents, random_chain,
                                  shift_chain, stable_direction,
                                  stable_leaf_segment, unstable_direction,
                                  unstable_segment)
from anosovlab.torus import project, torus_distance


def test_canonical_chain_valid(gen1):
    c = canonical_chain(gen1, np.array([0.3, 0.8]), 12)
    assert len(c) == 12
    assert chain_is_valid(gen1, c)
    assert np.allclose(c.base, [0.3, 0.8])


def test_shift_chain_advances_base(gen1):
    c = canonical_chain(gen1, np.array([0.21, 0.47]), 10)
    s = shift_chain(gen1, c)
    assert torus_distance(s.base, gen1.eval_torus(c.base)) < 1e-12
    # the old base becomes the first past point of the shifted chain
    assert torus_distance(s.points[1], c.base) < 1e-12
    assert chain_is_valid(gen1, s)


def test_linear_directions_are_eigenvectors(linear):
    rng = np.random.default_rng(8)
    for x in rng.random((4, 2)):
        es = stable_direction(linear, x)
        assert angular_gap(es, linear.model.e_s) < 1e-13
        for chain in (canonical_chain(linear, x, 14),
                      random_chain(linear, x, 14, rng)):
            eu = unstable_direction(linear, chain)
            assert angular_gap(eu, linear.model.e_u) < 1e-12


def test_stable_direction_invariant(gen1):
    # Df e_s(x) must be parallel to e_s(f x)
    rng = np.random.default_rng(9)
    for x in rng.random((5, 2)):
        v = stable_direction(gen1, x, depth=40)
        w = gen1.derivative(project(x)) @ v
        assert angular_gap(w, stable_direction(gen1, gen1.eval_torus(x), depth=40)) < 1e-11


def test_linear_stable_leaf_is_straight(linear):
    seg = stable_leaf_segment(linear, np.array([0.4, 0.1]), halflength=0.3)
    assert seg.length == pytest.approx(0.6, rel=1e-6)
    d = seg.points - seg.points[len(seg.points) // 2]
    off = d @ linear.model.e_u  # eigenbasis is not orthogonal; project crudely
    span = d @ linear.model.e_s
    # all displacement sits along e_s
    coeff = np.linalg.solve(
        np.column_stack([linear.model.e_s, linear.model.e_u]), d.T)
    assert np.max(np.abs(coeff[1])) < 1e-9
    assert np.max(np.abs(span)) > 0.1
    del off


def test_unstable_segment_through_base(gen1):
    chain = canonical_chain(gen1, np.array([0.37, 0.66]), 16)
    seg = unstable_segment(gen1, chain, radius=0.5, step=1e-3)
    d, s, _ = seg.nearest(chain.base)
    assert d < 1e-3          # nearest() is vertex-quantized at the step size
    assert abs(s) < 2e-3
    assert seg.length >= 0.5 - 1e-6
    # point_at inverts arclength on the polyline
    p = seg.point_at(0.21)
    d2, s2, _ = seg.nearest(project(p))
    assert abs(s2 - 0.21) < 2e-3 and d2 < 1e-3


def test_periodic_exponents_fixed_point(gen1, db_gen1):
    orb = [o for o in db_gen1.orbits_up_to(1)][0]
    lam_s, lam_u = periodic_exponents(gen1, np.array(orb.point), 1)
    ev = np.linalg.eigvals(gen1.derivative(np.array(orb.point)))
    mods = np.sort(np.abs(ev))
    assert lam_s == pytest.approx(float(np.log(mods[0])), abs=1e-10)
    assert lam_u == pytest.approx(float(np.log(mods[1])), abs=1e-10)
    assert orbit_log_jacobian(gen1, np.array(orb.point), 1) == pytest.approx(
        lam_s + lam_u, abs=1e-10)


def test_make_chain_branch_labels(gen1):
    base = np.array([0.52, 0.13])
    c0 = make_chain(gen1, base, (0, 0, 0, 0))
    c1 = make_chain(gen1, base, (1, 1, 1, 1))
    assert chain_is_valid(gen1, c0) and chain_is_valid(gen1, c1)
    assert torus_distance(c0.points[1], c1.points[1]) > 1e-3
