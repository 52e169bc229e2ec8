"""Unit-speed geodesic and billiard flow, one boundary event at a time.

The state always lives in the chart of the polygon that contains it; crossing
an edge re-anchors position and direction into the neighbouring chart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import InvalidStart, NumericStall, SingularHit, WallEncountered
from .surface import FlatSurface
from .turns import OrthogonalPart

CROSSING = "crossing"
REFLECTION = "reflection"
TERMINATED = "terminated"


@dataclass(frozen=True)
class FlowState:
    polygon: int
    x: float
    y: float
    dx: float
    dy: float
    t: float = 0.0

    @property
    def position(self):
        return (self.x, self.y)

    @property
    def direction(self):
        return (self.dx, self.dy)

    def reversed(self) -> "FlowState":
        return replace(self, dx=-self.dx, dy=-self.dy, t=0.0)


def make_state(surface: FlatSurface, polygon, point, direction=None, angle=None, t=0.0) -> FlowState:
    """Build a state from a polygon id (or index), a point and a direction or angle."""
    pi = polygon if isinstance(polygon, int) else surface.index[polygon]
    if angle is not None:
        dx, dy = math.cos(angle), math.sin(angle)
    else:
        dx, dy = direction
        n = math.hypot(dx, dy)
        if n == 0.0:
            raise InvalidStart("zero direction")
        dx, dy = dx / n, dy / n
    return FlowState(pi, float(point[0]), float(point[1]), dx, dy, t)


@dataclass(frozen=True, slots=True)
class Event:
    kind: str                 # crossing | reflection | terminated
    t: float
    polygon: int              # polygon where the event happens
    point: tuple              # in that polygon's chart
    edge: int                 # exit edge (or vertex index when terminated)
    gluing: int | None = None
    part: OrthogonalPart | None = None
    entry: FlowState | None = None


@dataclass
class Trajectory:
    initial: FlowState
    events: list = field(default_factory=list)
    # per-segment columns: polygon, start point, direction, length
    seg_polygon: list = field(default_factory=list)
    seg_x: list = field(default_factory=list)
    seg_y: list = field(default_factory=list)
    seg_dx: list = field(default_factory=list)
    seg_dy: list = field(default_factory=list)
    seg_length: list = field(default_factory=list)
    final: FlowState | None = None
    length: float = 0.0
    terminated: Event | None = None

    def add_segment(self, state: FlowState, length: float):
        self.seg_polygon.append(state.polygon)
        self.seg_x.append(state.x)
        self.seg_y.append(state.y)
        self.seg_dx.append(state.dx)
        self.seg_dy.append(state.dy)
        self.seg_length.append(length)

    def segments(self):
        """Yield (polygon, (x0, y0), (x1, y1), length) for each straight piece."""
        for p, x, y, dx, dy, ln in zip(self.seg_polygon, self.seg_x, self.seg_y,
                                       self.seg_dx, self.seg_dy, self.seg_length):
            yield p, (x, y), (x + ln * dx, y + ln * dy), ln

    @property
    def n_segments(self) -> int:
        return len(self.seg_length)


def _vertex_near(poly, point, tol):
    for k, (vx, vy) in enumerate(poly.vertices):
        if math.hypot(point[0] - vx, point[1] - vy) <= tol:
            return k
    return None


def exit_distance(poly, x, y, dx, dy):
    best_t, best_e = math.inf, -1
    for e, ((nx, ny), c) in enumerate(zip(poly.normals, poly.offsets)):
        dn = nx * dx + ny * dy
        if dn > 1e-15:
            t = (c - nx * x - ny * y) / dn
            if t < best_t:
                best_t, best_e = t, e
    return max(best_t, 0.0), best_e


def cross_edge(surface: FlatSurface, pi: int, e: int, px: float, py: float, dx: float, dy: float):
    """Carry a point on edge ``e`` of polygon ``pi`` (and a direction) through its gluing."""
    poly = surface.polygons[pi]
    link = surface.links[pi][e]
    (x0, y0) = poly.vertices[e]
    ex, ey = poly.edges[e]
    s = ((px - x0) * ex + (py - y0) * ey) / (ex * ex + ey * ey)
    s = min(1.0, max(0.0, s))
    q = surface.polygons[link.target]
    j = link.target_edge
    b0 = q.vertices[j]
    b1 = q.vertices[(j + 1) % q.n]
    if link.part.reflect:
        nx_, ny_ = b0[0] + s * (b1[0] - b0[0]), b0[1] + s * (b1[1] - b0[1])
    else:
        nx_, ny_ = b1[0] + s * (b0[0] - b1[0]), b1[1] + s * (b0[1] - b1[1])
    (a, b), (c, d) = link.matrix
    ndx, ndy = a * dx + b * dy, c * dx + d * dy
    norm = math.hypot(ndx, ndy)
    return link, nx_, ny_, ndx / norm, ndy / norm


def normalize_start(surface: FlatSurface, state: FlowState) -> FlowState:
    """Reject starts at corners; push edge starts into the polygon the direction enters."""
    tol = surface.tolerances
    poly = surface.polygons[state.polygon]
    k = _vertex_near(poly, state.position, tol.delta_vertex * max(1.0, poly.scale))
    if k is not None:
        raise SingularHit(poly.id, k, state.t, state.position)
    if not poly.contains(state.position, 1e-9):
        raise InvalidStart(f"start {state.position} lies outside polygon {poly.id!r}")
    for e, ((nx, ny), c) in enumerate(zip(poly.normals, poly.offsets)):
        dist = c - nx * state.x - ny * state.y
        if abs(dist) <= 1e-12 * poly.scale:
            dn = nx * state.dx + ny * state.dy
            if abs(dn) <= 1e-12:
                raise InvalidStart(f"start is tangent to edge {e} of polygon {poly.id!r}")
            if dn > 0:
                if surface.links[state.polygon][e] is None:
                    raise InvalidStart(f"start points out through wall {e} of {poly.id!r}")
                link, x, y, dx, dy = cross_edge(surface, state.polygon, e, state.x, state.y,
                                                state.dx, state.dy)
                return FlowState(link.target, x, y, dx, dy, state.t)
    return state


def advance_one_event(surface: FlatSurface, state: FlowState, billiard: bool = True,
                      max_length: float = math.inf):
    """Move to the next boundary event.

    Returns ``(new_state, event)``; ``event`` is None when ``max_length`` is
    reached first (the new state is then the truncated end point).
    """
    poly = surface.polygons[state.polygon]
    t_exit, e = exit_distance(poly, state.x, state.y, state.dx, state.dy)
    if e < 0:
        raise NumericStall(f"no exit edge from polygon {poly.id!r}")
    if t_exit >= max_length:
        return FlowState(state.polygon, state.x + max_length * state.dx,
                         state.y + max_length * state.dy, state.dx, state.dy,
                         state.t + max_length), None
    px, py = state.x + t_exit * state.dx, state.y + t_exit * state.dy
    t = state.t + t_exit
    tol = surface.tolerances.delta_vertex * max(1.0, poly.scale)
    for k in (e, (e + 1) % poly.n):
        vx, vy = poly.vertices[k]
        if math.hypot(px - vx, py - vy) <= tol:
            raise SingularHit(poly.id, k, t, (px, py))
    if t_exit < 1e-12 * poly.scale:
        raise NumericStall(f"zero-length step in polygon {poly.id!r} at t={t}")
    link = surface.links[state.polygon][e]
    if link is None:
        if not billiard:
            raise WallEncountered(f"wall {e} of polygon {poly.id!r} at t={t}")
        nx, ny = poly.normals[e]
        dn = state.dx * nx + state.dy * ny
        dx, dy = state.dx - 2 * dn * nx, state.dy - 2 * dn * ny
        new = FlowState(state.polygon, px, py, dx, dy, t)
        return new, Event(REFLECTION, t, state.polygon, (px, py), e, entry=new)
    link, x, y, dx, dy = cross_edge(surface, state.polygon, e, px, py, state.dx, state.dy)
    new = FlowState(link.target, x, y, dx, dy, t)
    return new, Event(CROSSING, t, state.polygon, (px, py), e, link.gluing, link.part, new)


def _trace(surface, state, length, billiard, stop_on_singular, max_events):
    state = normalize_start(surface, state)
    traj = Trajectory(initial=state)
    t0 = state.t
    remaining = length
    n_events = 0
    while remaining > 0.0 and n_events < max_events:
        try:
            new, event = advance_one_event(surface, state, billiard, remaining)
        except SingularHit as hit:
            if not stop_on_singular:
                raise
            seg = hit.t - state.t
            traj.add_segment(state, seg)
            end = FlowState(state.polygon, hit.point[0], hit.point[1], state.dx, state.dy, hit.t)
            traj.terminated = Event(TERMINATED, hit.t, state.polygon, hit.point, hit.vertex)
            traj.events.append(traj.terminated)
            traj.final = end
            traj.length = hit.t - t0
            return traj
        seg = new.t - state.t
        traj.add_segment(state, seg)
        remaining -= seg
        state = new
        if event is None:
            break
        traj.events.append(event)
        n_events += 1
    traj.final = state
    traj.length = state.t - t0
    return traj


def trace_geodesic(surface: FlatSurface, state: FlowState, length: float, *,
                   allow_walls: bool = False, stop_on_singular: bool = False,
                   max_events: int | float = math.inf) -> Trajectory:
    """Trace the geodesic from ``state`` for ``length`` (or until ``max_events``).

    Walls raise WallEncountered unless ``allow_walls`` is set, in which case
    they reflect as in :func:`trace_billiard`.
    """
    return _trace(surface, state, length, allow_walls, stop_on_singular, max_events)


def trace_billiard(surface: FlatSurface, state: FlowState, length: float, *,
                   stop_on_singular: bool = False,
                   max_events: int | float = math.inf) -> Trajectory:
    """Billiard flow: specular reflection at walls."""
    return _trace(surface, state, length, True, stop_on_singular, max_events)


def parallel_transport(surface: FlatSurface, path: Trajectory, vector):
    """Carry ``vector`` along ``path``; returns it in the chart where the path ends."""
    vx, vy = vector
    for ev in path.events:
        if ev.kind == CROSSING:
            (a, b), (c, d) = surface.links[ev.polygon][ev.edge].matrix
            vx, vy = a * vx + b * vy, c * vx + d * vy
        elif ev.kind == REFLECTION:
            nx, ny = surface.polygons[ev.polygon].normals[ev.edge]
            dn = vx * nx + vy * ny
            vx, vy = vx - 2 * dn * nx, vy - 2 * dn * ny
    return (vx, vy)


def event_records(surface: FlatSurface, traj: Trajectory):
    """Rows (event_index, t, polygon_id, x, y, event_type, edge_or_gluing_id)."""
    ids = [p.id for p in surface.polygons]
    s = traj.initial
    rows = [(0, s.t, ids[s.polygon], s.x, s.y, "start", "")]
    for i, ev in enumerate(traj.events, start=1):
        if ev.kind == CROSSING:
            ref = f"g{ev.gluing}"
        elif ev.kind == REFLECTION:
            ref = f"{ids[ev.polygon]}:{ev.edge}"
        else:
            ref = f"{ids[ev.polygon]}@v{ev.edge}"
        rows.append((i, ev.t, ids[ev.polygon], ev.point[0], ev.point[1], ev.kind, ref))
    if traj.terminated is None and traj.final is not None:
        f = traj.final
        rows.append((len(rows), f.t, ids[f.polygon], f.x, f.y, "end", ""))
    return rows
