"""Canonical text form for surfaces and other documents.

Keys are sorted, floats carry 17 significant digits, fractions are reduced.
The writer is deterministic so outputs can be compared byte for byte.
"""
from __future__ import annotations

import json
import math

from .surface import FlatSurface, SurfaceSpec


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be serialized")
    if x == 0.0:
        x = 0.0  # no negative zero
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _scalar(obj) -> str | None:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    return None


def _inline(obj) -> bool:
    if isinstance(obj, (list, tuple)):
        return all(_scalar(v) is not None or (isinstance(v, (list, tuple)) and _inline(v))
                   for v in obj) and len(obj) <= 8
    return _scalar(obj) is not None


def dumps(obj, sort_keys: bool = True, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON writer; short scalar lists stay on one line."""
    s = _scalar(obj)
    if s is not None:
        return s
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        keys = sorted(obj) if sort_keys else list(obj)
        items = [f"{pad}{_scalar(str(k))}: {dumps(obj[k], sort_keys, indent, _level + 1)}"
                 for k in keys]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if _inline(obj):
            return "[" + ", ".join(dumps(v, sort_keys, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, sort_keys, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def spec_to_dict(spec: SurfaceSpec) -> dict:
    return {
        "polygons": [{"id": p.id, "vertices": [list(v) for v in p.vertices]}
                     for p in spec.polygons],
        "gluings": [{"a": list(g.a), "b": list(g.b), "turn": str(g.turn), "reflect": g.reflect}
                    for g in spec.gluings],
    }


def export_surface(surface: FlatSurface | SurfaceSpec) -> str:
    spec = surface.spec if isinstance(surface, FlatSurface) else surface
    return dumps(spec_to_dict(spec)) + "\n"
