"""Bundled example surfaces.

Each entry has a builder here and a committed canonical file
(``<name>.surf``) plus an expected report (``<name>.report.json``) next to
this module.  ``regenerate()`` rewrites the files from the builders.
"""
from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

from ..canonical import dumps, export_surface
from ..surface import FlatSurface, GluingSpec, PolygonSpec, SurfaceSpec, load_surface, validate
from ..turns import RationalTurn

_Z = RationalTurn.of(0)
_HALF = RationalTurn.of(0.5)


def _glue(a, b, turn=_Z, reflect=False):
    return GluingSpec(a, b, turn if isinstance(turn, RationalTurn) else RationalTurn.parse(turn),
                      reflect)


def square(side: float = 1.0, pid: str = "sq") -> PolygonSpec:
    s = float(side)
    return PolygonSpec(pid, ((0.0, 0.0), (s, 0.0), (s, s), (0.0, s)))


def torus(side: float = 1.0) -> FlatSurface:
    """Square with opposite sides identified by translations."""
    return validate(SurfaceSpec((square(side),), (
        _glue(("sq", 0), ("sq", 2)),
        _glue(("sq", 1), ("sq", 3)),
    )))


def square_table(side: float = 1.0) -> FlatSurface:
    return validate(SurfaceSpec((square(side),)))


def pillowcase() -> FlatSurface:
    """Double of a square table of total area 1 (two squares of side sqrt(1/2))."""
    from ..covers import double
    return double(square_table(math.sqrt(0.5)))[0]


def triangle_table() -> FlatSurface:
    """Right isosceles triangle with unit legs."""
    return validate(SurfaceSpec((PolygonSpec("tri", ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))),)))


def triangle_double() -> FlatSurface:
    from ..covers import double
    return double(triangle_table())[0]


def triangle_unfolding() -> FlatSurface:
    from ..covers import unfold
    return unfold(triangle_table())[0]


def octagon() -> FlatSurface:
    """Regular octagon of circumradius 1, opposite sides glued by translations."""
    verts = tuple((math.cos(math.pi / 8 + k * math.pi / 4), math.sin(math.pi / 8 + k * math.pi / 4))
                  for k in range(8))
    return validate(SurfaceSpec((PolygonSpec("oct", verts),),
                                tuple(_glue(("oct", k), ("oct", k + 4)) for k in range(4))))


def klein_square() -> FlatSurface:
    """Square with one translation gluing and one reflection gluing."""
    return validate(SurfaceSpec((square(),), (
        _glue(("sq", 0), ("sq", 2)),
        _glue(("sq", 1), ("sq", 3), reflect=True),
    )))


def trapezoid_table() -> FlatSurface:
    """Isosceles trapezoid with angles pi/3 and 2pi/3."""
    h = math.sqrt(3.0) / 2
    return validate(SurfaceSpec((PolygonSpec("trap", ((0.0, 0.0), (2.0, 0.0), (1.5, h), (0.5, h))),)))


# -- surfaces used as controls, not part of the corpus -------------------------------------

def radian_table() -> FlatSurface:
    """Triangle with a 1 radian corner at the origin; its angles are not pi-rational."""
    return validate(SurfaceSpec((PolygonSpec("rad", ((0.0, 0.0), (1.0, 0.0),
                                                     (math.cos(1.0), math.sin(1.0)))),)))


def mobius_band() -> FlatSurface:
    return validate(SurfaceSpec((square(),), (_glue(("sq", 1), ("sq", 3), reflect=True),)))


def projective_plane() -> FlatSurface:
    return validate(SurfaceSpec((square(),), (
        _glue(("sq", 0), ("sq", 2), _HALF, True),
        _glue(("sq", 1), ("sq", 3), reflect=True),
    )))


BUILDERS = {
    "torus": torus,
    "square_table": square_table,
    "pillowcase": pillowcase,
    "triangle_table": triangle_table,
    "triangle_double": triangle_double,
    "triangle_unfolding": triangle_unfolding,
    "octagon": octagon,
    "klein_square": klein_square,
    "trapezoid_table": trapezoid_table,
}

NAMES = tuple(BUILDERS)


def corpus_dir() -> Path:
    return Path(str(resources.files(__name__)))


def path(name: str) -> Path:
    return corpus_dir() / f"{name}.surf"


def text(name: str) -> str:
    return path(name).read_text()


def load(name: str) -> FlatSurface:
    """Load a committed corpus surface."""
    return load_surface(text(name))


def expected_report(name: str) -> str:
    return (corpus_dir() / f"{name}.report.json").read_text()


def regenerate(target: Path | None = None):
    from ..report import surface_report
    target = target or corpus_dir()
    for name, build in BUILDERS.items():
        s = build()
        (target / f"{name}.surf").write_text(export_surface(s))
        (target / f"{name}.report.json").write_text(dumps(surface_report(s)) + "\n")
