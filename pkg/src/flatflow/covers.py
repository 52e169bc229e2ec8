"""Flat covering maps built sheet by sheet.

Every polygon of a total surface is a *sheet*: an isometric copy of one base
polygon, placed in its own chart by an exact linear part plus a float shift.
When the linear part reverses orientation the vertex list is reversed so the
sheet stays counterclockwise (vertex ``k`` of the sheet is base vertex ``-k``).

Everything else about a cover (which gluing or wall each total gluing lies
over, the deck group, ramification indices, branch points) is recovered from
the sheets, so a cover read back from disk behaves like a constructed one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlreadyOrientable,
    BranchPointLift,
    FlatflowError,
    HasBoundary,
    NoBoundary,
    NotOrientable,
    RamificationHit,
    SingularHit,
    SingularProject,
)
from .flow import CROSSING, REFLECTION, TERMINATED, Event, FlowState, Trajectory, trace_billiard
from .holonomy import (
    develop,
    holonomy_group,
    is_really_flat,
    polygonal_loop_holonomy,
    random_loop,
    rational_wall_turn,
    LoopLeg,
)
from .surface import FlatSurface, GluingSpec, PolygonSpec, SurfaceSpec, validate
from .turns import IDENTITY, OrthogonalPart, RationalTurn


@dataclass(frozen=True)
class Sheet:
    base: int
    label: str
    linear: OrthogonalPart
    shift: tuple[float, float] = (0.0, 0.0)

    def point_to_total(self, p):
        x, y = self.linear.apply(p)
        return (x + self.shift[0], y + self.shift[1])

    def point_to_base(self, p):
        return self.linear.inverse().apply((p[0] - self.shift[0], p[1] - self.shift[1]))

    def dir_to_total(self, d):
        return self.linear.apply(d)

    def dir_to_base(self, d):
        return self.linear.inverse().apply(d)

    def vertex_to_base(self, k, n):
        return (-k) % n if self.linear.reflect else k

    def edge_to_base(self, k, n):
        return (-k - 1) % n if self.linear.reflect else k

    # both maps are involutions
    vertex_from_base = vertex_to_base
    edge_from_base = edge_to_base


def sheet_polygon(base_poly, sheet: Sheet, new_id: str) -> PolygonSpec:
    n = base_poly.n
    verts = tuple(sheet.point_to_total(base_poly.vertices[sheet.vertex_to_base(k, n)])
                  for k in range(n))
    return PolygonSpec(new_id, verts)


@dataclass(frozen=True, eq=False)
class CoverMap:
    base: FlatSurface
    total: FlatSurface
    sheets: tuple[Sheet, ...]                 # indexed by total polygon index
    kind: str = "cover"
    origin: tuple = ()                        # per total gluing: ("gluing", gi) | ("wall", (p, e))
    deck: tuple = ()                          # permutations of total polygon indices
    ramification: dict = field(default_factory=dict)   # total orbit -> m
    base_orbit_of: dict = field(default_factory=dict)  # total orbit -> base orbit
    branch: tuple = ()                        # base orbits with some m > 1

    @property
    def degree(self) -> int:
        return len(self.sheets) // len(self.base.polygons)

    def fiber_polygons(self, base_polygon: int):
        return [i for i, s in enumerate(self.sheets) if s.base == base_polygon]

    @property
    def galois(self) -> bool:
        return len(self.deck) == self.degree

    def deck_labels(self):
        return [self.sheets[sigma[0]].label for sigma in self.deck]


# -- generic assembly ---------------------------------------------------------------

def _edge_origin(base, sheets, total):
    origin = []
    for g in total.gluings:
        t = total.index[g.a[0]]
        s = sheets[t]
        pb = base.polygons[s.base]
        kb = s.edge_to_base(g.a[1], pb.n)
        link = base.links[s.base][kb]
        origin.append(("wall", (s.base, kb)) if link is None else ("gluing", link.gluing))
    return tuple(origin)


def _deck_candidates(base, total, sheets):
    """All sheet permutations that respect gluings and lie over the identity."""
    deck = []
    t0 = 0
    for target in range(len(sheets)):
        if sheets[target].base != sheets[t0].base:
            continue
        sigma = {t0: target}
        stack = [t0]
        ok = True
        while stack and ok:
            t = stack.pop()
            st, su = sheets[t], sheets[sigma[t]]
            n = total.polygons[t].n
            for k in range(n):
                kb = st.edge_to_base(k, n)
                k2 = su.edge_from_base(kb, n)
                l1 = total.links[t][k]
                l2 = total.links[sigma[t]][k2]
                if (l1 is None) != (l2 is None):
                    ok = False
                    break
                if l1 is None:
                    continue
                u, u2 = l1.target, l2.target
                nu = total.polygons[u].n
                if sheets[u].base != sheets[u2].base or \
                        sheets[u].edge_to_base(l1.target_edge, nu) != \
                        sheets[u2].edge_to_base(l2.target_edge, nu):
                    ok = False
                    break
                if u in sigma:
                    if sigma[u] != u2:
                        ok = False
                        break
                else:
                    sigma[u] = u2
                    stack.append(u)
        if ok and len(sigma) == len(sheets) and len(set(sigma.values())) == len(sheets):
            deck.append(tuple(sigma[i] for i in range(len(sheets))))
    return tuple(deck)


def _ramification(base, total, sheets):
    ram, base_of = {}, {}
    for cp in total.cone_points:
        tid, v = cp.corners[0]
        t = total.index[tid]
        s = sheets[t]
        n = total.polygons[t].n
        b = base.corner_orbit[(s.base, s.vertex_to_base(v, n))]
        for tid2, v2 in cp.corners:
            t2 = total.index[tid2]
            s2 = sheets[t2]
            if base.corner_orbit[(s2.base, s2.vertex_to_base(v2, n if t2 == t else
                                                             total.polygons[t2].n))] != b:
                raise FlatflowError(f"total orbit {cp.index} does not lie over a single point")
        m, rem = divmod(len(cp.corners), len(base.cone_points[b].corners))
        if rem:
            raise FlatflowError(f"total orbit {cp.index}: corner count not a multiple of base")
        ram[cp.index] = m
        base_of[cp.index] = b
    branch = tuple(sorted({base_of[k] for k, m in ram.items() if m > 1}))
    return ram, base_of, branch


def make_cover(base: FlatSurface, total: FlatSurface, sheets, kind: str = "cover") -> CoverMap:
    """Derive origin, deck group and ramification data from the sheet placements."""
    sheets = tuple(sheets)
    if len(sheets) != len(total.polygons):
        raise FlatflowError("one sheet per total polygon is required")
    ram, base_of, branch = _ramification(base, total, sheets)
    return CoverMap(
        base=base,
        total=total,
        sheets=sheets,
        kind=kind,
        origin=_edge_origin(base, sheets, total),
        deck=_deck_candidates(base, total, sheets),
        ramification=ram,
        base_orbit_of=base_of,
        branch=branch,
    )


def _assemble(base: FlatSurface, fibers, connect, extra_gluings=(), kind="cover"):
    """Build the total surface.

    ``fibers[p]`` lists (label, linear) sheets over base polygon ``p``;
    ``connect(gi, k)`` gives the sheet number over ``b`` glued to sheet ``k``
    over ``a`` along base gluing ``gi``.  ``extra_gluings`` yields
    ((p, k, e), (p2, k2, e2), part) in base edge numbering.
    """
    sheets, ids, where = [], [], {}
    polys = []
    for p, fiber in enumerate(fibers):
        bp = base.polygons[p]
        for k, (label, linear) in enumerate(fiber):
            s = Sheet(p, label, linear)
            tid = f"{bp.id}.{k}"
            where[(p, k)] = len(sheets)
            sheets.append(s)
            ids.append(tid)
            polys.append(sheet_polygon(bp, s, tid))

    def edge_ref(p, k, e):
        t = where[(p, k)]
        return (ids[t], sheets[t].edge_from_base(e, base.polygons[p].n))

    def part(p, k, g, p2, k2):
        a, b = sheets[where[(p, k)]], sheets[where[(p2, k2)]]
        return b.linear @ g @ a.linear.inverse()

    gluings = []
    for gi, g in enumerate(base.gluings):
        pa, pb = base.index[g.a[0]], base.index[g.b[0]]
        for k in range(len(fibers[pa])):
            k2 = connect(gi, k)
            h = part(pa, k, g.part, pb, k2)
            gluings.append(GluingSpec(edge_ref(pa, k, g.a[1]), edge_ref(pb, k2, g.b[1]),
                                      h.turn, h.reflect))
    for (p, k, e), (p2, k2, e2), g in extra_gluings:
        h = part(p, k, g, p2, k2)
        gluings.append(GluingSpec(edge_ref(p, k, e), edge_ref(p2, k2, e2), h.turn, h.reflect))
    total = validate(SurfaceSpec(tuple(polys), tuple(gluings)), base.tolerances)
    return make_cover(base, total, sheets, kind)


# -- the three constructions ------------------------------------------------------------

def double(surface: FlatSurface) -> tuple[FlatSurface, CoverMap]:
    """Two copies glued wall to wall; the map to ``surface`` folds them together."""
    if not surface.has_boundary:
        raise NoBoundary("the double needs at least one wall")
    fibers = [[("0", IDENTITY), ("1", IDENTITY)] for _ in surface.polygons]
    extra = [((p, 0, e), (p, 1, e), OrthogonalPart(rational_wall_turn(surface, p, e), True))
             for p, e in surface.walls]
    cover = _assemble(surface, fibers, lambda gi, k: k, extra, kind="double")
    return cover.total, cover


def orientation_double(surface: FlatSurface) -> tuple[FlatSurface, CoverMap]:
    """The orientable double cover of a closed non-orientable surface."""
    if surface.orientable:
        raise AlreadyOrientable("surface is already orientable")
    if surface.has_boundary:
        raise HasBoundary("double the surface first")
    mirror = OrthogonalPart.reflection(0)
    fibers = [[("+", IDENTITY), ("-", mirror)] for _ in surface.polygons]
    dets = [g.part.det for g in surface.gluings]
    cover = _assemble(surface, fibers, lambda gi, k: k if dets[gi] > 0 else 1 - k,
                      kind="orientation")
    return cover.total, cover


def very_flat_cover(surface: FlatSurface) -> tuple[FlatSurface, CoverMap]:
    """The cover with one sheet per holonomy element; its total surface is a translation surface."""
    if surface.has_boundary:
        raise HasBoundary("double the surface first")
    if not surface.orientable:
        raise NotOrientable("take the orientation double first")
    atlas = develop(surface)
    group = holonomy_group(surface, atlas)
    elements = list(group.elements)
    position = {h: i for i, h in enumerate(elements)}
    fibers = [[(str(h.turn), h @ atlas.placements[p].linear) for h in elements]
              for p in range(len(surface.polygons))]
    steps = []
    for gi, g in enumerate(surface.gluings):
        pa, pb = surface.index[g.a[0]], surface.index[g.b[0]]
        d = atlas.placements[pb].linear @ g.part @ atlas.placements[pa].linear.inverse()
        steps.append(d.inverse())
    cover = _assemble(surface, fibers,
                      lambda gi, k: position[elements[k] @ steps[gi]], kind="galois")
    return cover.total, cover


def unfold(surface: FlatSurface):
    """double (if walls) -> orientation double (if needed) -> very flat cover.

    Returns (total, composite cover over ``surface``, list of stage covers).
    """
    stages = []
    current = surface
    if current.has_boundary:
        current, c = double(current)
        stages.append(c)
    if not current.orientable:
        current, c = orientation_double(current)
        stages.append(c)
    current, c = very_flat_cover(current)
    stages.append(c)
    composite = stages[-1]
    for lower in reversed(stages[:-1]):
        composite = compose(composite, lower)
    return current, composite, stages


def compose(upper: CoverMap, lower: CoverMap) -> CoverMap:
    """The cover ``upper.total -> lower.base`` through ``upper.base == lower.total``."""
    if upper.base is not lower.total:
        raise FlatflowError("covers do not compose")
    sheets = []
    for s2 in upper.sheets:
        s1 = lower.sheets[s2.base]
        sx, sy = s2.linear.apply(s1.shift)
        sheets.append(Sheet(s1.base, f"{s1.label}/{s2.label}", s2.linear @ s1.linear,
                            (sx + s2.shift[0], sy + s2.shift[1])))
    return make_cover(lower.base, upper.total, sheets, kind="composite")


# -- lifting and projecting ---------------------------------------------------------------

def _near_corner(surface, p, point):
    poly = surface.polygons[p]
    tol = surface.tolerances.delta_vertex * max(1.0, poly.scale)
    for k, (vx, vy) in enumerate(poly.vertices):
        if math.hypot(point[0] - vx, point[1] - vy) <= tol:
            return k
    return None


def lift_state(cover: CoverMap, state: FlowState, sheet: int = 0) -> FlowState:
    """Lift a base state to the ``sheet``-th polygon over its polygon."""
    k = _near_corner(cover.base, state.polygon, state.position)
    if k is not None and cover.base.corner_orbit[(state.polygon, k)] in cover.branch:
        raise BranchPointLift(f"point {state.position} is a branch point")
    t = cover.fiber_polygons(state.polygon)[sheet]
    s = cover.sheets[t]
    x, y = s.point_to_total(state.position)
    dx, dy = s.dir_to_total(state.direction)
    return FlowState(t, x, y, dx, dy, state.t)


def project_state(cover: CoverMap, state: FlowState) -> FlowState:
    k = _near_corner(cover.total, state.polygon, state.position)
    if k is not None and cover.total.cone_points[
            cover.total.corner_orbit[(state.polygon, k)]].singular:
        raise SingularProject(f"point {state.position} is a singular point")
    s = cover.sheets[state.polygon]
    x, y = s.point_to_base(state.position)
    dx, dy = s.dir_to_base(state.direction)
    return FlowState(s.base, x, y, dx, dy, state.t)


def _project_unchecked(cover, state):
    s = cover.sheets[state.polygon]
    x, y = s.point_to_base(state.position)
    dx, dy = s.dir_to_base(state.direction)
    return FlowState(s.base, x, y, dx, dy, state.t)


def project_trajectory(cover: CoverMap, traj: Trajectory) -> Trajectory:
    """Push a total trajectory down; event times are unchanged."""
    if traj.terminated is not None:
        ev = traj.terminated
        orbit = cover.total.corner_orbit[(ev.polygon, ev.edge)]
        if cover.ramification.get(orbit, 1) > 1:
            raise RamificationHit(f"trajectory reaches ramification point {orbit}")
    out = Trajectory(initial=_project_unchecked(cover, traj.initial))
    for p, x, y, dx, dy, ln in zip(traj.seg_polygon, traj.seg_x, traj.seg_y,
                                   traj.seg_dx, traj.seg_dy, traj.seg_length):
        out.add_segment(_project_unchecked(cover, FlowState(p, x, y, dx, dy)), ln)
    base = cover.base
    for ev in traj.events:
        s = cover.sheets[ev.polygon]
        n = cover.total.polygons[ev.polygon].n
        point = s.point_to_base(ev.point)
        edge = s.edge_to_base(ev.edge, n) if ev.kind != TERMINATED else s.vertex_to_base(ev.edge, n)
        entry = _project_unchecked(cover, ev.entry) if ev.entry is not None else None
        if ev.kind == CROSSING:
            kind, ref = cover.origin[ev.gluing]
            if kind == "wall":
                out.events.append(Event(REFLECTION, ev.t, s.base, point, edge, entry=entry))
            else:
                link = base.links[s.base][edge]
                out.events.append(Event(CROSSING, ev.t, s.base, point, edge, ref, link.part, entry))
        else:
            out.events.append(Event(ev.kind, ev.t, s.base, point, edge, entry=entry))
    if traj.terminated is not None:
        out.terminated = out.events[-1]
    out.final = _project_unchecked(cover, traj.final)
    out.length = traj.length
    return out


def compare_trajectories(a: Trajectory, b: Trajectory) -> float:
    """Largest per-event position gap; inf if the event sequences differ in kind or chart."""
    if len(a.events) != len(b.events):
        return math.inf
    worst = 0.0
    for ea, eb in zip(a.events, b.events):
        if ea.kind != eb.kind or ea.polygon != eb.polygon:
            return math.inf
        worst = max(worst, math.hypot(ea.point[0] - eb.point[0], ea.point[1] - eb.point[1]),
                    abs(ea.t - eb.t))
    if a.final.polygon != b.final.polygon:
        return math.inf
    return max(worst, math.hypot(a.final.x - b.final.x, a.final.y - b.final.y))


# -- verification -----------------------------------------------------------------------------

def random_state(surface: FlatSurface, rng) -> FlowState:
    """Uniform point (by area) with uniform direction, away from corners."""
    areas = np.array([p.area for p in surface.polygons])
    while True:
        p = int(rng.choice(len(areas), p=areas / areas.sum()))
        poly = surface.polygons[p]
        # fan triangle from vertex 0, chosen by area
        tri = [(0, i, i + 1) for i in range(1, poly.n - 1)]
        ta = np.array([_tri_area(poly.vertices[a], poly.vertices[b], poly.vertices[c])
                       for a, b, c in tri])
        a, b, c = tri[int(rng.choice(len(tri), p=ta / ta.sum()))]
        u, v = rng.random(2)
        if u + v > 1:
            u, v = 1 - u, 1 - v
        A, B, C = poly.vertices[a], poly.vertices[b], poly.vertices[c]
        x = A[0] + u * (B[0] - A[0]) + v * (C[0] - A[0])
        y = A[1] + u * (B[1] - A[1]) + v * (C[1] - A[1])
        if _near_corner(surface, p, (x, y)) is None and min(
                c0 - nx * x - ny * y for (nx, ny), c0 in zip(poly.normals, poly.offsets)) > 1e-9:
            ang = float(rng.uniform(0, 2 * math.pi))
            return FlowState(p, float(x), float(y), math.cos(ang), math.sin(ang))


def _tri_area(a, b, c):
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def riemann_hurwitz_expected(cover: CoverMap) -> int:
    """Euler characteristic the total must have.

    deg*chi - sum(m - 1), plus deg/2 per wall of the base: each wall edge has
    only deg/2 preimages because the cover folds across it.
    """
    base = cover.base
    folded = cover.degree * len(base.walls)
    if folded % 2:
        raise FlatflowError("odd degree over a bordered base")
    return (cover.degree * base.euler_characteristic + folded // 2
            - sum(m - 1 for m in cover.ramification.values()))


@dataclass
class VerificationReport:
    checks: dict = field(default_factory=dict)   # name -> (passed, detail)

    @property
    def ok(self) -> bool:
        return all(p for p, _ in self.checks.values())

    @property
    def violations(self):
        return [name for name, (p, _) in self.checks.items() if not p]

    def lines(self):
        return [f"{'PASS' if p else 'FAIL'} {name}: {detail}" for name, (p, detail) in
                self.checks.items()]


def loop_functoriality(cover: CoverMap, rng, n_loops: int = 100) -> tuple[int, int]:
    """Random loops upstairs vs their projections; returns (checked, mismatches)."""
    checked = bad = 0
    for _ in range(n_loops):
        legs = random_loop(cover.total, rng)
        up = polygonal_loop_holonomy(cover.total, legs)
        down_legs = [LoopLeg(_project_unchecked(cover, leg.state), leg.length) for leg in legs]
        down = polygonal_loop_holonomy(cover.base, down_legs, billiard=cover.base.has_boundary)
        a = cover.sheets[legs[0].state.polygon].linear
        expected = a @ down.exact_part @ a.inverse()
        checked += 1
        # a reflected sheet chart measures turning with the opposite sign
        if up.exact_part != expected or abs(up.turning_sum - a.det * down.turning_sum) > 1e-8:
            bad += 1
    return checked, bad


def verify_flat_cover(cover: CoverMap, seed: int = 0, samples: int = 1000,
                      fibers: int = 10, loops: int = 20) -> VerificationReport:
    """Check the flat-cover axioms, reporting every violated one."""
    rep = VerificationReport()
    rng = np.random.default_rng(seed)
    base, total = cover.base, cover.total
    tol = base.tolerances

    gap = abs(total.area - cover.degree * base.area)
    rep.checks["degree_area"] = (gap <= 1e-9 * total.area,
                                 f"degree {cover.degree}, area gap {gap:.2e}")

    worst, failures = 0.0, 0
    for _ in range(samples):
        st = random_state(total, rng)
        try:
            up = trace_billiard(total, st, 1e-3)
            down = trace_billiard(base, _project_unchecked(cover, st), 1e-3)
        except SingularHit:
            continue
        except FlatflowError:
            failures += 1
            continue
        end = _project_unchecked(cover, up.final)
        if end.polygon != down.final.polygon:
            failures += 1
            continue
        worst = max(worst, math.hypot(end.x - down.final.x, end.y - down.final.y))
    rep.checks["local_isometry"] = (failures == 0 and worst <= 1e-9,
                                    f"{samples} samples, worst {worst:.2e}, chart mismatches {failures}")

    bad_angles = []
    for k, m in cover.ramification.items():
        up = total.cone_points[k].float_angle
        down = base.cone_points[cover.base_orbit_of[k]].float_angle
        if abs(up - m * down) > tol.eps_cone:
            bad_angles.append(k)
    rep.checks["angle_relation"] = (not bad_angles,
                                    f"{len(cover.ramification)} points, violations {bad_angles}")

    rh = riemann_hurwitz_expected(cover)
    rep.checks["riemann_hurwitz"] = (rh == total.euler_characteristic,
                                     f"expected chi {rh}, total chi {total.euler_characteristic}")

    transitive = cover.galois
    for _ in range(fibers):
        p = int(rng.integers(len(base.polygons)))
        lifts = set(cover.fiber_polygons(p))
        first = min(lifts)
        orbit = {sigma[first] for sigma in cover.deck}
        transitive &= orbit == lifts
    rep.checks["deck_transitivity"] = (transitive,
                                       f"|deck| = {len(cover.deck)}, degree {cover.degree}")

    if loops:
        try:
            checked, bad = loop_functoriality(cover, rng, loops)
            rep.checks["holonomy_functoriality"] = (bad == 0, f"{checked} loops, {bad} mismatches")
        except FlatflowError as exc:
            rep.checks["holonomy_functoriality"] = (False, f"error: {exc}")
    return rep


def really_flat_witness(cover: CoverMap) -> tuple[bool, bool]:
    return is_really_flat(cover.total).verdict, is_really_flat(cover.base).verdict


def trace_commutation(cover: CoverMap, rng, events: int = 1000, runs: int = 1) -> float:
    """Trace upstairs then project vs project then trace; worst per-event gap."""
    worst = 0.0
    done = 0
    while done < runs:
        st = random_state(cover.total, rng)
        try:
            up = trace_geodesic_any(cover.total, st, math.inf, events)
            down = trace_geodesic_any(cover.base, _project_unchecked(cover, st), math.inf,
                                      len(up.events))
        except SingularHit:
            continue
        worst = max(worst, compare_trajectories(project_trajectory(cover, up), down))
        done += 1
    return worst


def trace_geodesic_any(surface: FlatSurface, state: FlowState, length: float, max_events):
    """Geodesic flow that reflects at walls when the surface has any."""
    return trace_billiard(surface, state, length, max_events=max_events)


def cover_from_sidecar(base: FlatSurface, total: FlatSurface, doc: dict) -> CoverMap:
    """Rebuild a cover from its sidecar; deck and ramification are recomputed and compared."""
    base_index = base.index
    try:
        sheets = []
        for p in total.polygons:
            e = doc["sheet_index"][p.id]
            sheets.append(Sheet(base_index[e["base"]], str(e["sheet"]),
                                OrthogonalPart(RationalTurn.parse(e["turn"]), bool(e["reflect"])),
                                (float(e["shift"][0]), float(e["shift"][1]))))
    except (KeyError, TypeError, IndexError) as exc:
        raise FlatflowError(f"malformed cover sidecar: missing {exc}") from None
    cover = make_cover(base, total, sheets, kind=str(doc.get("kind", "cover")))
    if "degree" in doc and doc["degree"] != cover.degree:
        raise FlatflowError(f"sidecar degree {doc['degree']} but sheets give {cover.degree}")
    return cover
