"""Holonomy of flat surfaces.

Surfaces are developed into the plane along a breadth-first spanning tree of
the dual graph.  Every gluing outside the tree then carries an exact linear
part in the developed frame; together these generate the holonomy group.

Holonomy of a loop is reported as the rotation of the developing frame after
going once around (for a loop with turning sum ``Theta`` that is
``rot(Theta)``).  A chart vector carried around the same loop comes back as
the inverse of that element applied to it.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DisconnectedSurface, LoopNotClosed, RationalitySnapFailure
from .flow import REFLECTION, FlowState, cross_edge, exit_distance, trace_geodesic
from .surface import FlatSurface
from .turns import IDENTITY, OrthogonalPart, RationalTurn, snap_rational, wrap_angle


@dataclass(frozen=True)
class Placement:
    linear: OrthogonalPart
    shift: tuple[float, float]

    def apply(self, p):
        x, y = self.linear.apply(p)
        return (x + self.shift[0], y + self.shift[1])


@dataclass(frozen=True)
class DevelopedAtlas:
    root: int
    tree: frozenset              # gluing indices used as tree edges
    parent: tuple                # parent polygon index (root -> -1)
    placements: tuple            # Placement per polygon
    developed: dict              # non-tree gluing index -> OrthogonalPart (a -> b)


def develop(surface: FlatSurface, root: int = 0, rng=None) -> DevelopedAtlas:
    """Lay the polygons out along a BFS tree; ``rng`` shuffles the neighbour order."""
    if not surface.connected:
        raise DisconnectedSurface("surface has several connected components")
    n = len(surface.polygons)
    placements = [None] * n
    parent = [-1] * n
    placements[root] = Placement(IDENTITY, (0.0, 0.0))
    tree = set()
    queue = deque([root])
    while queue:
        p = queue.popleft()
        poly = surface.polygons[p]
        order = list(range(poly.n))
        if rng is not None:
            rng.shuffle(order)
        for e in order:
            link = surface.links[p][e]
            if link is None or placements[link.target] is not None:
                continue
            q = link.target
            g = link.part
            a0 = poly.vertices[e]
            qp = surface.polygons[q]
            j = link.target_edge
            b_img = qp.vertices[j] if g.reflect else qp.vertices[(j + 1) % qp.n]
            lp = placements[p]
            ginv = g.inverse()
            gb = ginv.apply(b_img)
            shift = lp.apply((a0[0] - gb[0], a0[1] - gb[1]))
            placements[q] = Placement(lp.linear @ ginv, shift)
            parent[q] = p
            tree.add(link.gluing)
            queue.append(q)
    developed = {}
    for gi, g in enumerate(surface.gluings):
        if gi in tree:
            continue
        pa = surface.index[g.a[0]]
        pb = surface.index[g.b[0]]
        developed[gi] = placements[pb].linear @ g.part @ placements[pa].linear.inverse()
    return DevelopedAtlas(root, frozenset(tree), tuple(parent), tuple(placements), developed)


def holonomy_generators(surface: FlatSurface, atlas: DevelopedAtlas | None = None):
    atlas = atlas or develop(surface)
    return [atlas.developed[gi] for gi in sorted(atlas.developed)]


@dataclass(frozen=True)
class HolonomyGroup:
    rotation_order: int
    has_reflections: bool
    reflection_axis: RationalTurn | None
    elements: tuple[OrthogonalPart, ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def trivial(self) -> bool:
        return self.order == 1

    @property
    def structure(self) -> str:
        if self.has_reflections:
            return f"dihedral D{self.rotation_order}"
        return f"cyclic C{self.rotation_order}"


def close_group(generators) -> tuple[OrthogonalPart, ...]:
    elements = {IDENTITY}
    frontier = [IDENTITY]
    gens = set(generators) | {g.inverse() for g in generators}
    while frontier:
        nxt = []
        for h in frontier:
            for g in gens:
                k = h @ g
                if k not in elements:
                    elements.add(k)
                    nxt.append(k)
        frontier = nxt
    return tuple(sorted(elements))


def holonomy_group(surface: FlatSurface, atlas: DevelopedAtlas | None = None) -> HolonomyGroup:
    elements = close_group(holonomy_generators(surface, atlas))
    rotations = [h for h in elements if not h.reflect]
    reflections = [h for h in elements if h.reflect]
    n = len(rotations)
    assert all(n % h.turn.denominator == 0 for h in rotations)
    return HolonomyGroup(n, bool(reflections),
                         reflections[0].turn if reflections else None, elements)


# -- polygonal loops ---------------------------------------------------------------

@dataclass(frozen=True)
class LoopLeg:
    state: FlowState
    length: float


@dataclass(frozen=True)
class LoopHolonomy:
    turning_sum: float
    exact_part: OrthogonalPart
    vertex_angles: tuple[float, ...]
    residual: float                  # |angle(exact(d0)) - angle(d0) - Theta| mod 2pi
    crossings: tuple[OrthogonalPart, ...]

    @property
    def orientation_preserving(self) -> bool:
        return not self.exact_part.reflect


def polygonal_loop_holonomy(surface: FlatSurface, loop, billiard: bool = False) -> LoopHolonomy:
    """Turning sum and exact holonomy of a closed polygonal path.

    ``loop`` is a cyclic sequence of :class:`LoopLeg`; each leg is traced as a
    geodesic and must end where the next one starts.  With ``billiard`` set,
    legs may bounce off walls; a bounce acts like crossing into a mirror copy
    of the polygon, so it contributes the reflection across that wall.
    """
    legs = list(loop)
    if not legs:
        raise LoopNotClosed("empty loop")
    m = IDENTITY
    crossings = []
    angles = []
    for i, leg in enumerate(legs):
        traj = trace_geodesic(surface, leg.state, leg.length, allow_walls=billiard)
        for ev in traj.events:
            part = ev.part
            if ev.kind == REFLECTION:
                part = OrthogonalPart(rational_wall_turn(surface, ev.polygon, ev.edge), True)
            if part is not None:
                crossings.append(part)
                m = m @ part.inverse()
        end = traj.final
        nxt = legs[(i + 1) % len(legs)].state
        scale = max(1.0, surface.polygons[nxt.polygon].scale)
        if end.polygon != nxt.polygon or math.hypot(end.x - nxt.x, end.y - nxt.y) > 1e-9 * scale:
            raise LoopNotClosed(f"leg {i} ends at polygon {end.polygon} {end.position}, "
                                f"next leg starts at polygon {nxt.polygon} {nxt.position}")
        turn = math.atan2(end.dx * nxt.dy - end.dy * nxt.dx, end.dx * nxt.dx + end.dy * nxt.dy)
        angles.append(m.det * turn)
    angles = angles[-1:] + angles[:-1]   # angles[i] is the turn at the start of leg i
    theta = math.fsum(angles)
    d0 = legs[0].state.direction
    image = m.apply(d0)
    residual = abs(wrap_angle(math.atan2(image[1], image[0]) - math.atan2(d0[1], d0[0]) - theta))
    return LoopHolonomy(theta, m, tuple(angles), residual, tuple(crossings))


def _interior_point(poly, rng, margin=0.15):
    """Random point well inside a convex polygon (convex combination of vertices)."""
    w = rng.dirichlet(np.ones(poly.n))
    w = margin / poly.n + (1 - margin) * w
    c = poly.centroid()
    x = sum(wi * v[0] for wi, v in zip(w, poly.vertices))
    y = sum(wi * v[1] for wi, v in zip(w, poly.vertices))
    # shrink toward the centroid to stay clear of corners
    return (float(c[0] + (1 - margin) * (x - c[0])), float(c[1] + (1 - margin) * (y - c[1])))


def _leg_toward(poly_index, src, dst, extra=0.0):
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    d = math.hypot(dx, dy)
    return LoopLeg(FlowState(poly_index, src[0], src[1], dx / d, dy / d), d + extra)


def _home_paths(surface: FlatSurface, home: int):
    """For each polygon, the edge to cross to get one step closer to ``home``."""
    step = {home: None}
    queue = deque([home])
    while queue:
        q = queue.popleft()
        for e, link in enumerate(surface.links[q]):
            if link is not None and link.target not in step:
                step[link.target] = link.target_edge
                queue.append(link.target)
    return step


def random_loop(surface: FlatSurface, rng, max_steps: int = 6, start: int | None = None):
    """A random closed polygonal loop avoiding corners and walls."""
    p0 = int(rng.integers(len(surface.polygons))) if start is None else start
    home = _home_paths(surface, p0)
    c0 = _interior_point(surface.polygons[p0], rng)
    edges_out = []
    p = p0
    for _ in range(int(rng.integers(1, max_steps + 1))):
        glued = [e for e, lk in enumerate(surface.links[p]) if lk is not None]
        if not glued:
            break
        e = glued[int(rng.integers(len(glued)))]
        edges_out.append(e)
        p = surface.links[p][e].target
    legs = []
    cur_p, cur = p0, c0

    def cross(e):
        nonlocal cur_p, cur
        poly = surface.polygons[cur_p]
        s = float(rng.uniform(0.2, 0.8))
        (x0, y0), (ex, ey) = poly.vertices[e], poly.edges[e]
        target = (x0 + s * ex, y0 + s * ey)
        probe = _leg_toward(cur_p, cur, target)
        st = probe.state
        link = surface.links[cur_p][e]
        _, qx, qy, qdx, qdy = cross_edge(surface, cur_p, e, target[0], target[1], st.dx, st.dy)
        b, _ = exit_distance(surface.polygons[link.target], qx, qy, qdx, qdy)
        leg = LoopLeg(st, probe.length + float(rng.uniform(0.2, 0.6)) * b)
        traj = trace_geodesic(surface, leg.state, leg.length)
        legs.append(leg)
        cur_p, cur = traj.final.polygon, traj.final.position

    for e in edges_out:
        cross(e)
    while cur_p != p0:
        cross(home[cur_p])
    if not legs:
        poly = surface.polygons[p0]
        c1 = _interior_point(poly, rng)
        c2 = _interior_point(poly, rng)
        return [_leg_toward(p0, c0, c1), _leg_toward(p0, c1, c2), _leg_toward(p0, c2, c0)]
    legs.append(_leg_toward(p0, cur, c0))
    return legs


def loop_around_cone_point(surface: FlatSurface, orbit: int, size: float = 0.2):
    """Small loop winding once counterclockwise around an interior vertex orbit."""
    walk = surface.walks[orbit]
    if not walk.closed:
        raise ValueError(f"orbit {orbit} is a boundary corner")
    r = math.inf
    for p, v in walk.corners:
        poly = surface.polygons[p]
        vx, vy = poly.vertices[v]
        r = min(r, poly.lengths[v], poly.lengths[v - 1])
        for e in range(poly.n):
            if e not in (v, (v - 1) % poly.n):
                (nx, ny), c = poly.normals[e], poly.offsets[e]
                r = min(r, c - nx * vx - ny * vy)
    r *= size

    def unit_to(poly, v, w):
        (vx, vy), (wx, wy) = poly.vertices[v], poly.vertices[w]
        d = math.hypot(wx - vx, wy - vy)
        return ((wx - vx) / d, (wy - vy) / d)

    legs = []
    p, v = walk.corners[0]
    poly = surface.polygons[p]
    V = poly.vertices[v]
    ua = unit_to(poly, v, (v + 1) % poly.n)
    ub = unit_to(poly, v, (v - 1) % poly.n)
    q0 = (V[0] + 0.5 * r * (ua[0] + ub[0]), V[1] + 0.5 * r * (ua[1] + ub[1]))
    cur_p, cur = p, q0
    for (p, v), sense in zip(walk.corners, walk.senses):
        poly = surface.polygons[p]
        V = poly.vertices[v]
        w = (v - 1) % poly.n if sense > 0 else (v + 1) % poly.n
        u = unit_to(poly, v, w)
        target = (V[0] + r * u[0], V[1] + r * u[1])
        leg = _leg_toward(cur_p, cur, target, extra=0.25 * r)
        legs.append(leg)
        end = trace_geodesic(surface, leg.state, leg.length).final
        cur_p, cur = end.polygon, end.position
    legs.append(_leg_toward(cur_p, cur, q0))
    return legs


# -- really flat -----------------------------------------------------------------

@dataclass(frozen=True)
class ReallyFlatReport:
    holonomy_finite: bool
    rotation_order: int
    group: HolonomyGroup
    has_boundary: bool
    boundary_condition: bool
    wall_angle_classes: tuple[Fraction, ...]
    irrational_walls: tuple[tuple[str, int], ...]

    @property
    def verdict(self) -> bool:
        return self.holonomy_finite and (not self.has_boundary or self.boundary_condition)


def developed_wall_angles(surface: FlatSurface, atlas: DevelopedAtlas | None = None):
    atlas = atlas or develop(surface)
    out = []
    for p, e in surface.walls:
        a = surface.polygons[p].edge_direction_angle(e)
        out.append(((p, e), atlas.placements[p].linear.map_angle(a)))
    return out


def is_really_flat(surface: FlatSurface) -> ReallyFlatReport:
    """Finite holonomy plus pi-rational wall angles under the holonomy action.

    Holonomy is always finite for surfaces in the exact-turn format, so the
    verdict hinges on the boundary condition.
    """
    tol = surface.tolerances
    atlas = develop(surface)
    group = holonomy_group(surface, atlas)
    walls = developed_wall_angles(surface, atlas)
    classes = set()
    bad = []
    if walls:
        ref = walls[0][1]
        for wall, a in walls:
            ok = True
            for h in group.elements:
                x = ((h.map_angle(a) - ref) / math.pi) % 1.0
                r = snap_rational(x, tol.eps_ang / math.pi, tol.q_max)
                if r is None:
                    ok = False
                else:
                    classes.add(r % 1)
            if not ok:
                bad.append((surface.polygons[wall[0]].id, wall[1]))
    return ReallyFlatReport(
        holonomy_finite=True,
        rotation_order=group.rotation_order,
        group=group,
        has_boundary=surface.has_boundary,
        boundary_condition=not bad,
        wall_angle_classes=tuple(sorted(classes)),
        irrational_walls=tuple(bad),
    )


def rational_wall_turn(surface: FlatSurface, p: int, e: int) -> RationalTurn:
    """Exact turn ``t`` of the reflection across wall ``(p, e)`` (axis angle ``pi*t``)."""
    tol = surface.tolerances
    a = surface.polygons[p].edge_direction_angle(e)
    x = (a / math.pi) % 1.0
    r = snap_rational(x, tol.eps_ang / math.pi, tol.q_max)
    if r is None:
        raise RationalitySnapFailure(
            f"wall {e} of polygon {surface.polygons[p].id!r} has direction {a!r}, "
            f"not a rational multiple of pi")
    return RationalTurn.of(r)
