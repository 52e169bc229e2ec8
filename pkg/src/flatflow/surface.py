"""Surface descriptions: parsing, validation and the derived combinatorics.

A surface is a finite set of strictly convex polygons (each in its own chart,
vertices counterclockwise) together with gluings of pairs of edges by plane
isometries.  Edge ``i`` of a polygon runs from vertex ``i`` to vertex ``i+1``.
Edges that take part in no gluing are walls.

For a gluing ``a -> b`` with linear part ``g``, the chart transition carries
polygon ``a`` onto the far side of edge ``b``:

* orientation preserving: start of ``a`` goes to the end of ``b``;
* reflection: start of ``a`` goes to the start of ``b``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    BadFraction,
    ConeSnapFailure,
    DanglingEdgeRef,
    DuplicatePolygonId,
    EdgeLengthMismatch,
    EdgeReused,
    GaussBonnetViolation,
    NonConvexPolygon,
    RationalitySnapFailure,
    SurfaceSyntaxError,
    TurnMismatch,
)
from .turns import (
    IDENTITY,
    TWO_PI,
    OrthogonalPart,
    RationalTurn,
    snap_rational,
    wrap_angle,
)


@dataclass(frozen=True)
class Tolerances:
    eps_len: float = 1e-9
    eps_ang: float = 1e-9
    eps_cone: float = 1e-8
    q_max: int = 3600
    delta_vertex: float = 1e-9
    eps_traj: float = 1e-6


DEFAULT_TOLERANCES = Tolerances()


# -- parsed (unvalidated) form --------------------------------------------------

@dataclass(frozen=True)
class PolygonSpec:
    id: str
    vertices: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class GluingSpec:
    a: tuple[str, int]
    b: tuple[str, int]
    turn: RationalTurn
    reflect: bool = False

    @property
    def part(self) -> OrthogonalPart:
        return OrthogonalPart(self.turn, self.reflect)


@dataclass(frozen=True)
class SurfaceSpec:
    polygons: tuple[PolygonSpec, ...]
    gluings: tuple[GluingSpec, ...] = ()


def _syntax(msg, path):
    return SurfaceSyntaxError(f"{msg} at {path}")


def _as_point(obj, path):
    if not (isinstance(obj, list) and len(obj) == 2):
        raise _syntax("expected [x, y]", path)
    out = []
    for c in obj:
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise _syntax("coordinate must be a number", path)
        out.append(float(c))
    return (out[0], out[1])


def _as_edge_ref(obj, path):
    if not (isinstance(obj, list) and len(obj) == 2 and isinstance(obj[0], str)
            and isinstance(obj[1], int) and not isinstance(obj[1], bool)):
        raise _syntax("edge reference must be [polygon-id, edge-index]", path)
    return (obj[0], obj[1])


def spec_from_dict(doc) -> SurfaceSpec:
    if not isinstance(doc, dict):
        raise _syntax("top level must be an object", "$")
    unknown = set(doc) - {"polygons", "gluings"}
    if unknown:
        raise _syntax(f"unknown keys {sorted(unknown)}", "$")
    raw_polys = doc.get("polygons")
    if not isinstance(raw_polys, list):
        raise _syntax("'polygons' must be a list", "$.polygons")
    polygons = []
    seen = set()
    for i, p in enumerate(raw_polys):
        path = f"$.polygons[{i}]"
        if not isinstance(p, dict) or set(p) != {"id", "vertices"}:
            raise _syntax("polygon must have exactly 'id' and 'vertices'", path)
        if not isinstance(p["id"], str) or not p["id"]:
            raise _syntax("polygon id must be a non-empty string", path)
        if p["id"] in seen:
            raise DuplicatePolygonId(f"duplicate polygon id {p['id']!r} at {path}")
        seen.add(p["id"])
        if not isinstance(p["vertices"], list):
            raise _syntax("'vertices' must be a list", path)
        verts = tuple(_as_point(v, f"{path}.vertices[{j}]") for j, v in enumerate(p["vertices"]))
        polygons.append(PolygonSpec(p["id"], verts))
    raw_gluings = doc.get("gluings", [])
    if not isinstance(raw_gluings, list):
        raise _syntax("'gluings' must be a list", "$.gluings")
    gluings = []
    for i, g in enumerate(raw_gluings):
        path = f"$.gluings[{i}]"
        if not isinstance(g, dict) or set(g) != {"a", "b", "turn", "reflect"}:
            raise _syntax("gluing must have exactly 'a', 'b', 'turn', 'reflect'", path)
        if not isinstance(g["reflect"], bool):
            raise _syntax("'reflect' must be a boolean", path)
        try:
            turn = RationalTurn.parse(g["turn"])
        except BadFraction as exc:
            raise BadFraction(f"{exc} at {path}.turn") from None
        gluings.append(GluingSpec(_as_edge_ref(g["a"], path + ".a"),
                                  _as_edge_ref(g["b"], path + ".b"), turn, g["reflect"]))
    return SurfaceSpec(tuple(polygons), tuple(gluings))


def parse_surface(text: str) -> SurfaceSpec:
    """Parse a surface-description document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SurfaceSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return spec_from_dict(doc)


# -- validated form ------------------------------------------------------------

def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


class Polygon:
    """A validated convex polygon with precomputed edge data for the tracer."""

    def __init__(self, pid: str, vertices):
        self.id = pid
        self.vertices = tuple((float(x), float(y)) for x, y in vertices)
        n = self.n = len(self.vertices)
        if n < 3:
            raise NonConvexPolygon(pid, "fewer than 3 vertices")
        self.edges = []
        self.lengths = []
        self.normals = []
        self.offsets = []
        for i in range(n):
            (x0, y0), (x1, y1) = self.vertices[i], self.vertices[(i + 1) % n]
            dx, dy = x1 - x0, y1 - y0
            ln = math.hypot(dx, dy)
            if ln == 0.0:
                raise NonConvexPolygon(pid, f"edge {i} has zero length")
            nx, ny = dy / ln, -dx / ln  # outward for counterclockwise order
            self.edges.append((dx, dy))
            self.lengths.append(ln)
            self.normals.append((nx, ny))
            self.offsets.append(nx * x0 + ny * y0)
        self.angles = []
        turning = 0.0
        for i in range(n):
            ax, ay = self.edges[i - 1]
            bx, by = self.edges[i]
            c = _cross(ax, ay, bx, by)
            if c <= 1e-12 * self.lengths[i - 1] * self.lengths[i]:
                raise NonConvexPolygon(pid, f"vertex {i} is not a strict left turn")
            ext = math.atan2(c, ax * bx + ay * by)
            turning += ext
            self.angles.append(math.pi - ext)
        if abs(turning - TWO_PI) > 1e-9:
            raise NonConvexPolygon(pid, "boundary winds more than once")
        self.area = 0.5 * sum(
            _cross(*self.vertices[i], *self.vertices[(i + 1) % n]) for i in range(n)
        )
        self.scale = max(self.lengths)

    def edge_direction_angle(self, i: int) -> float:
        return math.atan2(self.edges[i][1], self.edges[i][0])

    def centroid(self):
        n = self.n
        return (sum(v[0] for v in self.vertices) / n, sum(v[1] for v in self.vertices) / n)

    def contains(self, p, tol=1e-12) -> bool:
        return all(nx * p[0] + ny * p[1] - c <= tol * self.scale
                   for (nx, ny), c in zip(self.normals, self.offsets))

    def __repr__(self):
        return f"Polygon({self.id!r}, {self.vertices!r})"


@dataclass(frozen=True)
class EdgeLink:
    """Crossing data for one directed side of a gluing."""
    gluing: int
    target: int
    target_edge: int
    part: OrthogonalPart          # source chart -> target chart
    matrix: tuple


@dataclass(frozen=True)
class ConePoint:
    index: int
    corners: tuple[tuple[str, int], ...]
    float_angle: float
    boundary: bool
    winding: int | None = None             # m in theta = 2 pi (m + r)
    turn: RationalTurn | None = None       # r
    k: int | None = None
    l: int | None = None

    @property
    def exact_angle(self) -> Fraction | None:
        """theta / 2pi as an exact rational, when known."""
        if self.turn is None:
            return None
        return self.winding + self.turn.value

    @property
    def regular_angle(self) -> float:
        return math.pi if self.boundary else TWO_PI

    @property
    def singular(self) -> bool:
        if self.exact_angle is not None:
            return self.exact_angle != (Fraction(1, 2) if self.boundary else 1)
        return abs(self.float_angle - self.regular_angle) > 1e-8


@dataclass(frozen=True)
class CornerWalk:
    corners: tuple[tuple[int, int], ...]   # (polygon index, vertex), in sweep order
    senses: tuple[int, ...]                # +1 counterclockwise sweep in that chart, -1 clockwise
    closed: bool
    holonomy: OrthogonalPart               # chart-to-developed map after a full turn


@dataclass(frozen=True, eq=False)
class FlatSurface:
    polygons: tuple[Polygon, ...]
    gluings: tuple[GluingSpec, ...]
    links: tuple
    walls: tuple[tuple[int, int], ...]
    cone_points: tuple[ConePoint, ...]
    corner_orbit: dict
    walks: tuple[CornerWalk, ...]
    area: float
    euler_characteristic: int
    orientable: bool
    connected: bool
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES)

    @property
    def has_boundary(self) -> bool:
        return bool(self.walls)

    @property
    def index(self) -> dict:
        return {p.id: i for i, p in enumerate(self.polygons)}

    def polygon(self, pid) -> Polygon:
        return self.polygons[self.index[pid]]

    @property
    def spec(self) -> SurfaceSpec:
        return SurfaceSpec(tuple(PolygonSpec(p.id, p.vertices) for p in self.polygons),
                           self.gluings)

    def gauss_bonnet_residual(self) -> float:
        return gauss_bonnet_terms(self)[0]


def gauss_bonnet_terms(surface: FlatSurface) -> tuple[float, float]:
    terms = [cp.regular_angle - cp.float_angle for cp in surface.cone_points]
    total = sum(terms)
    return abs(total - TWO_PI * surface.euler_characteristic), sum(abs(t) for t in terms)


def _geometric_turn(pa: Polygon, ea: int, pb: Polygon, eb: int, reflect: bool) -> float:
    ua = pa.edge_direction_angle(ea)
    ub = pb.edge_direction_angle(eb)
    if reflect:
        return ua + ub
    return (ub + math.pi) - ua


def _link(gluing_index, target, target_edge, part) -> EdgeLink:
    return EdgeLink(gluing_index, target, target_edge, part, part.matrix())


def walk_corner(links, polygons, start: tuple[int, int], sense: int = 1):
    """Sweep around a vertex starting at ``start`` until returning or hitting a wall.

    Returns (corners, senses, closed, M) where M is the exact composite
    chart-to-developed map after the sweep (meaningful when closed).
    """
    p, v = start
    corners, senses = [], []
    m = IDENTITY
    while True:
        corners.append((p, v))
        senses.append(sense)
        n = polygons[p].n
        exit_edge = (v - 1) % n if sense > 0 else v
        link = links[p][exit_edge]
        if link is None:
            return corners, senses, False, m
        q, j = link.target, link.target_edge
        nq = polygons[q].n
        at_end = sense > 0  # our vertex is the end vertex of the exit edge
        if link.part.reflect:
            w = (j + 1) % nq if at_end else j
            sense = -sense
        else:
            w = j if at_end else (j + 1) % nq
        m = m @ link.part.inverse()
        p, v = q, w
        if (p, v) == start:
            return corners, senses, True, m


def validate(spec: SurfaceSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> FlatSurface:
    """Check geometry and build the immutable :class:`FlatSurface`."""
    tol = tolerances
    polygons = tuple(Polygon(p.id, p.vertices) for p in spec.polygons)
    index = {p.id: i for i, p in enumerate(polygons)}
    links = [[None] * p.n for p in polygons]

    def resolve(ref, gi):
        pid, e = ref
        if pid not in index:
            raise DanglingEdgeRef(f"gluing {gi}: unknown polygon {pid!r}")
        pi = index[pid]
        if not 0 <= e < polygons[pi].n:
            raise DanglingEdgeRef(f"gluing {gi}: polygon {pid!r} has no edge {e}")
        return pi, e

    for gi, g in enumerate(spec.gluings):
        pa, ea = resolve(g.a, gi)
        pb, eb = resolve(g.b, gi)
        if (pa, ea) == (pb, eb):
            raise EdgeReused(f"gluing {gi}: edge {g.a} glued to itself")
        for pi, e, ref in ((pa, ea, g.a), (pb, eb, g.b)):
            if links[pi][e] is not None:
                raise EdgeReused(f"gluing {gi}: edge {list(ref)} already glued")
        la, lb = polygons[pa].lengths[ea], polygons[pb].lengths[eb]
        if abs(la - lb) > tol.eps_len * max(1.0, la):
            raise EdgeLengthMismatch(gi, abs(la - lb))
        geom = _geometric_turn(polygons[pa], ea, polygons[pb], eb, g.reflect)
        if abs(wrap_angle(geom - g.turn.radians)) > tol.eps_ang:
            raise TurnMismatch(gi, g.part, (geom / TWO_PI) % 1.0)
        part = g.part
        links[pa][ea] = _link(gi, pb, eb, part)
        links[pb][eb] = _link(gi, pa, ea, part.inverse())
    links = tuple(tuple(row) for row in links)
    walls = tuple((pi, e) for pi, row in enumerate(links) for e, lk in enumerate(row) if lk is None)

    # corner orbits
    corner_orbit = {}
    walks = []
    for pi, poly in enumerate(polygons):
        for v in range(poly.n):
            if (pi, v) in corner_orbit:
                continue
            fwd, fsen, closed, m = walk_corner(links, polygons, (pi, v), 1)
            if closed:
                corners, senses = fwd, fsen
            else:
                back, bsen, _, _ = walk_corner(links, polygons, (pi, v), -1)
                corners = list(reversed(back[1:])) + fwd
                senses = [-s for s in reversed(bsen[1:])] + fsen
                m = None
            k = len(walks)
            for c in corners:
                corner_orbit[c] = k
            walks.append(CornerWalk(tuple(corners), tuple(senses), closed, m))

    cone_points = tuple(
        _cone_point(k, w, polygons, tol) for k, w in enumerate(walks)
    )

    area = sum(p.area for p in polygons)
    n_edges = len(spec.gluings) + len(walls)
    chi = len(walks) - n_edges + len(polygons)

    # orientability (per component) and connectivity
    sign = [0] * len(polygons)
    orientable = True
    components = 0
    for root in range(len(polygons)):
        if sign[root]:
            continue
        components += 1
        sign[root] = 1
        stack = [root]
        while stack:
            p = stack.pop()
            for lk in links[p]:
                if lk is None:
                    continue
                s = sign[p] * lk.part.det
                if sign[lk.target] == 0:
                    sign[lk.target] = s
                    stack.append(lk.target)
                elif sign[lk.target] != s:
                    orientable = False

    surface = FlatSurface(
        polygons=polygons,
        gluings=tuple(spec.gluings),
        links=links,
        walls=walls,
        cone_points=cone_points,
        corner_orbit=corner_orbit,
        walks=tuple(walks),
        area=area,
        euler_characteristic=chi,
        orientable=orientable,
        connected=components == 1,
        tolerances=tol,
    )
    residual, scale = gauss_bonnet_terms(surface)
    if residual > 1e-9 * (1.0 + scale):
        raise GaussBonnetViolation(residual)
    return surface


def _cone_point(k, walk: CornerWalk, polygons, tol: Tolerances) -> ConePoint:
    theta = sum(polygons[p].angles[v] for p, v in walk.corners)
    corners = tuple((polygons[p].id, v) for p, v in walk.corners)
    if walk.closed:
        r = walk.holonomy
        if r.reflect:
            raise ConeSnapFailure(f"orbit {k}: orientation reverses around an interior vertex")
        m = round(theta / TWO_PI - float(r.turn.value))
        if abs(theta - TWO_PI * (m + float(r.turn.value))) > tol.eps_cone:
            raise ConeSnapFailure(
                f"orbit {k}: angle {theta!r} inconsistent with exact part {r.turn}")
        exact = m + r.turn.value
        return ConePoint(k, corners, theta, False, m, r.turn, exact.numerator, exact.denominator)
    # boundary corner: no gluing data pins the angle, so snap the float
    try:
        x = snap_rational(theta / TWO_PI, tol.eps_cone / TWO_PI, tol.q_max)
    except Exception:
        x = None
    if x is None:
        return ConePoint(k, corners, theta, True)
    m = math.floor(x)
    return ConePoint(k, corners, theta, True, m, RationalTurn.of(x - m), x.numerator, x.denominator)


# -- convenience queries ----------------------------------------------------------

def corner_orbits(surface: FlatSurface) -> tuple[ConePoint, ...]:
    return surface.cone_points


def cone_exact_angle(surface: FlatSurface, orbit: ConePoint | int) -> tuple[int, RationalTurn]:
    """Exact cone angle as (winding m, fractional turn r): theta = 2 pi (m + r)."""
    cp = surface.cone_points[orbit if isinstance(orbit, int) else orbit.index]
    if cp.turn is None:
        raise RationalitySnapFailure(f"boundary corner {cp.index} has an irrational angle")
    return cp.winding, cp.turn


def area(surface: FlatSurface) -> float:
    return surface.area


def euler_characteristic(surface: FlatSurface) -> int:
    return surface.euler_characteristic


def gauss_bonnet_residual(surface: FlatSurface) -> float:
    return surface.gauss_bonnet_residual()


def singular_set(surface: FlatSurface) -> tuple[ConePoint, ...]:
    return tuple(cp for cp in surface.cone_points if cp.singular)


def load_surface(text: str, tolerances: Tolerances = DEFAULT_TOLERANCES) -> FlatSurface:
    return validate(parse_surface(text), tolerances)
