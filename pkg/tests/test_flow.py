import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatflow import corpus
from flatflow.covers import double, lift_state, project_trajectory, random_state
from flatflow.errors import InvalidStart, NumericStall, SingularHit, WallEncountered
from flatflow.flow import (
    CROSSING,
    REFLECTION,
    TERMINATED,
    FlowState,
    advance_one_event,
    cross_edge,
    event_records,
    make_state,
    trace_billiard,
    trace_geodesic,
)


def test_torus_step(torus):
    new, ev = advance_one_event(torus, FlowState(0, 0.5, 0.5, 1.0, 0.0))
    assert ev.kind == CROSSING and ev.point == (1.0, 0.5)
    assert (new.x, new.y, new.dx, new.dy) == (0.0, 0.5, 1.0, 0.0)
    assert new.t == 0.5


def test_table_reflection(table):
    new, ev = advance_one_event(table, FlowState(0, 0.5, 0.5, 1.0, 0.0))
    assert ev.kind == REFLECTION and ev.point == (1.0, 0.5)
    assert (new.dx, new.dy) == (-1.0, 0.0)


def test_aimed_at_corner(torus):
    with pytest.raises(SingularHit):
        advance_one_event(torus, make_state(torus, "sq", (0.5, 0.5), (1, 1)))


def test_horizontal_closed_orbit(torus):
    traj = trace_geodesic(torus, make_state(torus, "sq", (0.5, 0.25), (1, 0)), 3)
    assert len(traj.events) == 3
    assert traj.final.position == pytest.approx((0.5, 0.25))


def test_slope_two_returns(torus):
    traj = trace_geodesic(torus, make_state(torus, "sq", (0.5, 0.25), (1, 2)), math.sqrt(5))
    assert [e.gluing for e in traj.events] == [0, 1, 0]   # gluing 0 joins top/bottom
    assert traj.final.position == pytest.approx((0.5, 0.25), abs=1e-12)
    assert traj.length == pytest.approx(math.sqrt(5), rel=1e-15)


def test_start_at_cone_point(surfaces):
    s = surfaces["octagon"]
    v = s.polygons[0].vertices[3]
    with pytest.raises(SingularHit) as info:
        trace_geodesic(s, FlowState(0, v[0], v[1], 1.0, 0.0), 1.0)
    assert info.value.t == 0.0


def test_square_billiard_diagonal_hits_corner(table):
    with pytest.raises(SingularHit):
        trace_billiard(table, make_state(table, "sq", (0.5, 0.5), (1, 1)), math.sqrt(2))
    traj = trace_billiard(table, make_state(table, "sq", (0.5, 0.5), (1, 1)), 2, stop_on_singular=True)
    assert traj.terminated.kind == TERMINATED
    assert traj.final.position == pytest.approx((1.0, 1.0))
    assert traj.length == pytest.approx(math.sqrt(0.5))


def test_square_billiard_back_and_forth(table):
    traj = trace_billiard(table, make_state(table, "sq", (0.25, 0.5), (1, 0)), 2)
    assert [e.point for e in traj.events] == [(1.0, 0.5), (0.0, 0.5)]
    assert traj.final.position == pytest.approx((0.25, 0.5))


def test_walls_need_permission(table):
    with pytest.raises(WallEncountered):
        trace_geodesic(table, make_state(table, "sq", (0.5, 0.5), (1, 0.3)), 2)


def test_edge_starts(torus, table):
    pushed = trace_geodesic(torus, FlowState(0, 1.0, 0.5, 1.0, 0.0), 0.25)
    assert pushed.initial.position == (0.0, 0.5)
    with pytest.raises(InvalidStart):
        trace_geodesic(torus, FlowState(0, 1.0, 0.5, 0.0, 1.0), 0.25)
    with pytest.raises(InvalidStart):
        trace_billiard(table, FlowState(0, 1.0, 0.5, 1.0, 0.0), 0.25)
    with pytest.raises(InvalidStart):
        trace_geodesic(torus, FlowState(0, 1.5, 0.5, 1.0, 0.0), 0.25)
    with pytest.raises(InvalidStart):
        make_state(torus, "sq", (0.5, 0.5), (0, 0))
    assert pushed.n_segments == 1


def test_numeric_stall_on_zero_direction(torus):
    with pytest.raises(NumericStall):
        advance_one_event(torus, FlowState(0, 0.5, 0.5, 0.0, 0.0))


def test_zero_length(torus):
    traj = trace_geodesic(torus, FlowState(0, 0.5, 0.5, 1.0, 0.0), 0.0)
    assert traj.events == [] and traj.length == 0.0


def test_event_records(torus):
    traj = trace_geodesic(torus, make_state(torus, "sq", (0.5, 0.25), (1, 0)), 1.2)
    rows = event_records(torus, traj)
    assert rows[0][5] == "start" and rows[-1][5] == "end"
    assert rows[1][5:] == ("crossing", "g1")


def _check_trajectory(surface, traj):
    """Segment sums, unit speed and isometry consistency at every event."""
    assert math.fsum(traj.seg_length) == pytest.approx(traj.length, rel=1e-9, abs=1e-12)
    assert all(ln >= 0 for ln in traj.seg_length)
    for dx, dy in zip(traj.seg_dx, traj.seg_dy):
        assert abs(math.hypot(dx, dy) - 1) < 1e-12
    segs = list(traj.segments())
    for k, ev in enumerate(traj.events):
        p, _, end, _ = segs[k]
        assert p == ev.polygon and math.dist(end, ev.point) < 1e-9
        if ev.kind == CROSSING:
            _, x, y, dx, dy = cross_edge(surface, ev.polygon, ev.edge, *ev.point,
                                         traj.seg_dx[k], traj.seg_dy[k])
            nxt = segs[k + 1] if k + 1 < len(segs) else None
            if nxt is not None:
                assert nxt[0] == ev.entry.polygon
                assert math.dist(nxt[1], (x, y)) < 1e-6
                assert math.dist((traj.seg_dx[k + 1], traj.seg_dy[k + 1]), (dx, dy)) < 1e-12


@pytest.mark.parametrize("name", corpus.NAMES)
def test_reversibility_and_consistency(surfaces, name):
    s = surfaces[name]
    rng = np.random.default_rng(11)
    done = 0
    while done < 100:
        start = random_state(s, rng)
        try:
            fwd = trace_billiard(s, start, 20.0)
            back = trace_billiard(s, fwd.final.reversed(), 20.0)
        except SingularHit:
            continue
        _check_trajectory(s, fwd)
        assert back.final.polygon == start.polygon
        assert math.dist(back.final.position, start.position) < 1e-6
        done += 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0, 2 * math.pi))
def test_torus_unfolds_to_plane(x, y, a):
    s = corpus.load("torus")
    st_ = FlowState(0, x, y, math.cos(a), math.sin(a))
    try:
        traj = trace_geodesic(s, st_, 7.3)
    except SingularHit:
        return
    want = ((x + 7.3 * math.cos(a)) % 1.0, (y + 7.3 * math.sin(a)) % 1.0)
    got = traj.final.position
    assert min(abs(got[0] - want[0]), 1 - abs(got[0] - want[0])) < 1e-9
    assert min(abs(got[1] - want[1]), 1 - abs(got[1] - want[1])) < 1e-9


def test_billiard_equals_folded_double_geodesic(surfaces):
    tri = surfaces["triangle_table"]
    dbl, fold = double(tri)
    rng = np.random.default_rng(5)
    done = 0
    while done < 5:
        start = random_state(tri, rng)
        try:
            billiard = trace_billiard(tri, start, 100.0)
            up = trace_geodesic(dbl, lift_state(fold, start, 0), 100.0)
        except SingularHit:
            continue
        down = project_trajectory(fold, up)
        assert len(down.events) == len(billiard.events)
        for a, b in zip(down.events, billiard.events):
            assert a.kind == b.kind == REFLECTION
            assert math.dist(a.point, b.point) < 1e-6
        assert math.dist(down.final.position, billiard.final.position) < 1e-6
        done += 1
