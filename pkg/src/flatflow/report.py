"""Plain-dictionary summaries of surfaces and covers (for the CLI and golden files)."""
from __future__ import annotations

from .covers import CoverMap
from .holonomy import holonomy_group, is_really_flat
from .surface import FlatSurface


def _fraction(x) -> str | None:
    return None if x is None else f"{x.numerator}/{x.denominator}"


def cone_point_record(surface: FlatSurface, cp) -> dict:
    return {
        "corners": [list(c) for c in cp.corners],
        "angle": cp.float_angle,
        "angle_over_2pi": _fraction(cp.exact_angle),
        "boundary": cp.boundary,
        "singular": cp.singular,
    }


def surface_report(surface: FlatSurface) -> dict:
    group = holonomy_group(surface)
    rf = is_really_flat(surface)
    return {
        "polygons": len(surface.polygons),
        "gluings": len(surface.gluings),
        "walls": len(surface.walls),
        "area": surface.area,
        "euler_characteristic": surface.euler_characteristic,
        "orientable": surface.orientable,
        "cone_points": [cone_point_record(surface, cp) for cp in surface.cone_points],
        "singular_points": sum(cp.singular for cp in surface.cone_points),
        "holonomy": {
            "order": group.order,
            "rotation_order": group.rotation_order,
            "structure": group.structure,
            "elements": [str(h) for h in group.elements],
        },
        "really_flat": rf.verdict,
        "wall_angle_classes": [_fraction(c) for c in rf.wall_angle_classes],
    }


def cone_key(surface: FlatSurface, orbit: int) -> str:
    pid, v = surface.cone_points[orbit].corners[0]
    return f"{pid}:{v}"


def export_cover(cover: CoverMap) -> dict:
    """Sidecar document describing a cover map over the base and total surfaces."""
    base, total = cover.base, cover.total
    sheet_index = {}
    for t, s in enumerate(cover.sheets):
        sheet_index[total.polygons[t].id] = {
            "base": base.polygons[s.base].id,
            "sheet": s.label,
            "turn": str(s.linear.turn),
            "reflect": s.linear.reflect,
            "shift": list(s.shift),
        }
    ids = [p.id for p in total.polygons]
    return {
        "kind": cover.kind,
        "degree": cover.degree,
        "sheet_index": sheet_index,
        "deck": [[ids[i] for i in sigma] for sigma in cover.deck],
        "branch": [cone_key(base, b) for b in cover.branch],
        "ramification": {cone_key(total, k): m for k, m in sorted(cover.ramification.items())},
    }
