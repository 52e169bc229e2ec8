import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatflow import corpus
from flatflow.errors import DisconnectedSurface, LoopNotClosed
from flatflow.flow import FlowState, parallel_transport, trace_geodesic
from flatflow.holonomy import (
    LoopLeg,
    develop,
    holonomy_group,
    is_really_flat,
    loop_around_cone_point,
    polygonal_loop_holonomy,
    random_loop,
)
from flatflow.surface import PolygonSpec, SurfaceSpec, validate
from flatflow.turns import IDENTITY, OrthogonalPart


@pytest.mark.parametrize("name,order,structure", [
    ("torus", 1, "cyclic C1"),
    ("octagon", 1, "cyclic C1"),
    ("pillowcase", 2, "cyclic C2"),
    ("triangle_double", 4, "cyclic C4"),
    ("triangle_unfolding", 1, "cyclic C1"),
    ("klein_square", 2, "dihedral D1"),
])
def test_group_structure(surfaces, name, order, structure):
    g = holonomy_group(surfaces[name])
    assert (g.order, g.structure) == (order, structure)


def test_triangle_double_generators(surfaces):
    s = surfaces["triangle_double"]
    gens = set(develop(s).developed.values())
    assert gens == {OrthogonalPart.rotation(Fraction(1, 4)), OrthogonalPart.rotation(Fraction(1, 2))}


def test_projective_plane_group():
    g = holonomy_group(corpus.projective_plane())
    assert g.has_reflections and g.rotation_order == 2


def test_developed_placements_agree_on_tree_edges(surfaces):
    s = surfaces["triangle_unfolding"]
    atlas = develop(s)
    for gi in atlas.tree:
        g = s.gluings[gi]
        pa, pb = s.index[g.a[0]], s.index[g.b[0]]
        a0 = s.polygons[pa].vertices[g.a[1]]
        qb = s.polygons[pb]
        b1 = qb.vertices[(g.b[1] + 1) % qb.n]
        x, y = atlas.placements[pa].apply(a0)
        u, v = atlas.placements[pb].apply(b1)
        assert math.hypot(x - u, y - v) < 1e-12


def test_disconnected():
    sq = ((0, 0), (1, 0), (1, 1), (0, 1))
    s = validate(SurfaceSpec((PolygonSpec("a", sq), PolygonSpec("b", sq))))
    assert not s.connected
    with pytest.raises(DisconnectedSurface):
        develop(s)


@pytest.mark.parametrize("name", [n for n in corpus.NAMES])
def test_random_loops_oracle(surfaces, name):
    s = surfaces[name]
    rng = np.random.default_rng(7)
    for _ in range(30):
        h = polygonal_loop_holonomy(s, random_loop(s, rng))
        assert h.residual < 1e-8
        # exact part is the ordered product of inverse crossing parts
        m = IDENTITY
        for part in h.crossings:
            m = m @ part.inverse()
        assert m == h.exact_part


@pytest.mark.parametrize("name,orbit,angle,part", [
    ("pillowcase", 0, math.pi, OrthogonalPart.rotation(Fraction(1, 2))),
    ("triangle_double", 1, math.pi / 2, OrthogonalPart.rotation(Fraction(1, 4))),
    ("octagon", 0, 6 * math.pi, IDENTITY),
    ("torus", 0, 2 * math.pi, IDENTITY),
])
def test_loop_around_cone_point(surfaces, name, orbit, angle, part):
    s = surfaces[name]
    h = polygonal_loop_holonomy(s, loop_around_cone_point(s, orbit))
    assert h.turning_sum == pytest.approx(angle, abs=1e-9)
    assert h.exact_part == part


def test_transport_around_pillowcase_cone_flips_vectors(pillowcase):
    legs = loop_around_cone_point(pillowcase, 0)
    v = (0.6, 0.8)
    for leg in legs:
        traj = trace_geodesic(pillowcase, leg.state, leg.length)
        v = parallel_transport(pillowcase, traj, v)
    assert v == pytest.approx((-0.6, -0.8), abs=1e-12)


def test_transport_matches_inverse_holonomy(surfaces):
    s = surfaces["triangle_double"]
    rng = np.random.default_rng(3)
    for _ in range(20):
        legs = random_loop(s, rng)
        v = (1.0, 0.0)
        for leg in legs:
            v = parallel_transport(s, trace_geodesic(s, leg.state, leg.length), v)
        want = polygonal_loop_holonomy(s, legs).exact_part.inverse().apply((1.0, 0.0))
        assert v == pytest.approx(want, abs=1e-9)


def test_contractible_loop_has_trivial_holonomy(torus):
    legs = [LoopLeg(FlowState(0, 0.2, 0.2, 1.0, 0.0), 0.5),
            LoopLeg(FlowState(0, 0.7, 0.2, 0.0, 1.0), 0.5),
            LoopLeg(FlowState(0, 0.7, 0.7, -1.0, 0.0), 0.5),
            LoopLeg(FlowState(0, 0.2, 0.7, 0.0, -1.0), 0.5)]
    h = polygonal_loop_holonomy(torus, legs)
    assert h.exact_part == IDENTITY and h.turning_sum == pytest.approx(2 * math.pi)


def test_meridian_transport_is_identity(torus):
    traj = trace_geodesic(torus, FlowState(0, 0.5, 0.3, 0.0, 1.0), 1.0)
    assert parallel_transport(torus, traj, (0.3, -0.4)) == pytest.approx((0.3, -0.4))


def test_open_loop_rejected(torus):
    with pytest.raises(LoopNotClosed):
        polygonal_loop_holonomy(torus, [LoopLeg(FlowState(0, 0.2, 0.2, 1.0, 0.0), 0.3)])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_klein_loops_orientation(seed):
    s = corpus.load("klein_square")
    legs = random_loop(s, np.random.default_rng(seed))
    h = polygonal_loop_holonomy(s, legs)
    assert h.residual < 1e-8
    flips = sum(p.reflect for p in h.crossings)
    assert h.orientation_preserving == (flips % 2 == 0)


# -- really flat --------------------------------------------------------------------------

@pytest.mark.parametrize("name", corpus.NAMES)
def test_corpus_is_really_flat(surfaces, name):
    assert is_really_flat(surfaces[name]).verdict


def test_radian_table_is_not_really_flat():
    rep = is_really_flat(corpus.radian_table())
    assert not rep.verdict
    assert rep.irrational_walls


def test_trapezoid_wall_classes(surfaces):
    rep = is_really_flat(surfaces["trapezoid_table"])
    assert rep.wall_angle_classes == (0, Fraction(1, 3), Fraction(2, 3))


def test_mobius_band_really_flat():
    assert is_really_flat(corpus.mobius_band()).verdict
