"""Finite-time equidistribution statistics for geodesic and billiard flows.

Occupancy is exact: every straight segment of a trajectory is clipped against
the triangles of a cell partition.  Discrepancy at time K is the L1 distance
between normalized occupancy and normalized cell area.

Random streams: sample ``i`` on attempt ``a`` draws from
``numpy.random.Generator(PCG64(SeedSequence(seed, spawn_key=(i, a))))``;
a parallel-family direction comes from ``spawn_key=(2**32,)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .canonical import dumps
from .covers import lift_state, project_trajectory, random_state, unfold
from .errors import (
    CheckpointBeyondLength,
    DepthTooLarge,
    ModeSurfaceMismatch,
    SingularHit,
    UnknownTestFunction,
)
from .flow import FlowState, Trajectory, trace_billiard, trace_geodesic
from .holonomy import develop, holonomy_group
from .surface import FlatSurface

MAX_DEPTH = 8
MODES = ("directional", "generic", "parallel-family", "billiard")


# -- partition --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CellPartition:
    surface: FlatSurface
    depth: int
    triangles: np.ndarray        # (C, 3, 2) counterclockwise
    areas: np.ndarray            # (C,)
    cell_polygon: np.ndarray     # (C,)
    first_cell: tuple            # per polygon: index of its first cell
    total_area: float

    @property
    def n_cells(self) -> int:
        return len(self.areas)

    def cells_of(self, polygon: int) -> range:
        start = self.first_cell[polygon]
        end = self.first_cell[polygon + 1] if polygon + 1 < len(self.first_cell) else self.n_cells
        return range(start, end)

    def locate(self, polygon: int, point) -> int:
        """Lowest-index cell of ``polygon`` containing ``point``."""
        for c in self.cells_of(polygon):
            if _in_triangle(self.triangles[c], point):
                return c
        raise ValueError(f"point {point} not in polygon {polygon}")


def _in_triangle(tri, p, tol=1e-12):
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -tol:
            return False
    return True


def _subdivide(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    kids = np.stack([
        np.stack([a, ab, ca], 1),
        np.stack([ab, b, bc], 1),
        np.stack([ca, bc, c], 1),
        np.stack([ab, bc, ca], 1),
    ], 1)
    return kids.reshape(-1, 3, 2)


def _tri_areas(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def build_partition(surface: FlatSurface, depth: int) -> CellPartition:
    """Fan triangulation from vertex 0 of each polygon, split ``depth`` times into 4.

    Children of cell ``c`` at the next depth are cells ``4c .. 4c+3``.
    """
    if depth > MAX_DEPTH:
        raise DepthTooLarge(f"depth {depth} exceeds {MAX_DEPTH}")
    if depth < 0:
        raise DepthTooLarge(f"depth {depth} is negative")
    blocks, owners, first = [], [], []
    count = 0
    for p, poly in enumerate(surface.polygons):
        v = np.array(poly.vertices)
        fan = np.stack([np.stack([v[0], v[i], v[i + 1]]) for i in range(1, poly.n - 1)])
        for _ in range(depth):
            fan = _subdivide(fan)
        first.append(count)
        count += len(fan)
        blocks.append(fan)
        owners.append(np.full(len(fan), p))
    tris = np.concatenate(blocks)
    areas = _tri_areas(tris)
    return CellPartition(surface, depth, tris, areas, np.concatenate(owners), tuple(first),
                         float(math.fsum(areas)))


# -- occupancy ---------------------------------------------------------------------------

def _clip(tris, x, y, dx, dy, ln):
    """Parameter intervals of segments inside triangles: arrays (S, C) of t0, t1."""
    t0 = np.zeros((len(x), len(tris)))
    t1 = np.broadcast_to(ln[:, None], t0.shape).copy()
    for k in range(3):
        a = tris[:, k]
        b = tris[:, (k + 1) % 3]
        ex, ey = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
        # outward normal (ey, -ex) for counterclockwise triangles
        num = ey[None, :] * (a[None, :, 0] - x[:, None]) - ex[None, :] * (a[None, :, 1] - y[:, None])
        den = ey[None, :] * dx[:, None] - ex[None, :] * dy[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / den
        t1 = np.where(den > 0, np.minimum(t1, t), t1)
        t0 = np.where(den < 0, np.maximum(t0, t), t0)
        t1 = np.where((den == 0) & (num < 0), -np.inf, t1)
    return t0, t1


def _resolve_overlaps(t0, t1, lengths, ln):
    """Segments lying on a shared cell edge get counted twice; keep the lowest cell."""
    over = np.nonzero(lengths.sum(axis=1) > ln * (1 + 1e-9) + 1e-12)[0]
    for r in over:
        covered = []
        for c in np.nonzero(lengths[r] > 0)[0]:
            a, b = t0[r, c], min(t1[r, c], ln[r])
            free = b - a
            for u, v in covered:
                free -= max(0.0, min(b, v) - max(a, u))
            lengths[r, c] = max(0.0, free)
            covered.append((a, b))
    return lengths


def segment_cell_lengths(partition: CellPartition, polygon: int, x, y, dx, dy, ln) -> np.ndarray:
    """(S, C_p) lengths of segments of one polygon inside each of its cells."""
    cells = partition.cells_of(polygon)
    tris = partition.triangles[cells.start:cells.stop]
    x, y, dx, dy, ln = (np.asarray(v, dtype=float) for v in (x, y, dx, dy, ln))
    t0, t1 = _clip(tris, x, y, dx, dy, ln)
    lengths = t1 - t0
    # grazing contacts leave rounding slivers
    lengths[lengths <= 1e-13 * partition.surface.polygons[polygon].scale] = 0.0
    return _resolve_overlaps(t0, t1, lengths, ln)


def _segment_table(traj: Trajectory):
    return (np.array(traj.seg_polygon, dtype=int), np.array(traj.seg_x), np.array(traj.seg_y),
            np.array(traj.seg_dx), np.array(traj.seg_dy), np.array(traj.seg_length))


def _split_at(table, cuts):
    """Split segments at the given times; returns the table plus a bucket per segment."""
    poly, x, y, dx, dy, ln = table
    start = np.concatenate([[0.0], np.cumsum(ln)[:-1]]) if len(ln) else np.zeros(0)
    rows = []
    cut_list = list(cuts)
    j = 0
    for i in range(len(ln)):
        s, e = start[i], start[i] + ln[i]
        a = s
        px, py = x[i], y[i]
        while j < len(cut_list) and cut_list[j] < e:
            k = cut_list[j]
            if k > a:
                rows.append((poly[i], px, py, dx[i], dy[i], k - a, j))
                px, py = x[i] + (k - s) * dx[i], y[i] + (k - s) * dy[i]
                a = k
            j += 1
        rows.append((poly[i], px, py, dx[i], dy[i], e - a, j))
    if not rows:
        return (np.zeros(0, int),) + tuple(np.zeros(0) for _ in range(5)) + (np.zeros(0, int),)
    cols = list(zip(*rows))
    return (np.array(cols[0], dtype=int), *(np.array(c) for c in cols[1:6]),
            np.array(cols[6], dtype=int))


def occupancy_buckets(traj: Trajectory, partition: CellPartition, cuts=()) -> np.ndarray:
    """Per-cell time in each interval between consecutive ``cuts``: shape (len(cuts)+1, C)."""
    poly, x, y, dx, dy, ln, bucket = _split_at(_segment_table(traj), cuts)
    out = np.zeros((len(cuts) + 1, partition.n_cells))
    chunk = 4096
    for p in range(len(partition.surface.polygons)):
        idx = np.nonzero(poly == p)[0]
        cells = partition.cells_of(p)
        for s in range(0, len(idx), chunk):
            sel = idx[s:s + chunk]
            lengths = segment_cell_lengths(partition, p, x[sel], y[sel], dx[sel], dy[sel], ln[sel])
            np.add.at(out[:, cells.start:cells.stop], bucket[sel], lengths)
    return out


def occupancy(traj: Trajectory, partition: CellPartition) -> np.ndarray:
    """Time spent in each cell over the whole trajectory."""
    return occupancy_buckets(traj, partition)[0]


def prefix_occupancies(traj: Trajectory, partition: CellPartition, checkpoints) -> np.ndarray:
    checkpoints = _check_checkpoints(traj, checkpoints)
    buckets = occupancy_buckets(traj, partition, checkpoints)
    return np.cumsum(buckets, axis=0)[:len(checkpoints)]


def _check_checkpoints(traj, checkpoints):
    cps = [float(k) for k in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])) or any(k <= 0 for k in cps):
        raise ValueError("checkpoints must be positive and strictly increasing")
    if cps and cps[-1] > traj.length * (1 + 1e-12):
        raise CheckpointBeyondLength(f"checkpoint {cps[-1]} beyond trajectory length {traj.length}")
    return cps


def discrepancy(times: np.ndarray, k: float, partition: CellPartition) -> float:
    return float(np.abs(times / k - partition.areas / partition.total_area).sum())


def discrepancy_series(traj: Trajectory, partition: CellPartition, checkpoints) -> list[float]:
    prefix = prefix_occupancies(traj, partition, checkpoints)
    return [discrepancy(row, k, partition) for row, k in zip(prefix, checkpoints)]


# -- test functions ------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    name: str
    kind: str            # one | cell | bump
    cell: int | None = None

    def evaluate(self, surface: FlatSurface, polygon: int, x, y):
        x = np.asarray(x, dtype=float)
        if self.kind == "one":
            return np.ones_like(x)
        if self.kind == "bump":
            poly = surface.polygons[polygon]
            out = np.ones_like(x)
            for (nx, ny), c in zip(poly.normals, poly.offsets):
                out = out * np.clip((c - nx * x - ny * np.asarray(y)) / poly.scale, 0.0, None)
            return out
        raise UnknownTestFunction(f"{self.name} has no pointwise form here")


# not a pytest class
TestFunction.__test__ = False


def test_function(name: str, partition: CellPartition | None = None) -> TestFunction:
    """Look up a registered observable: ``one``, ``bump`` or ``cell:<k>``."""
    if name in ("one", "bump"):
        return TestFunction(name, name)
    if name.startswith("cell:"):
        try:
            k = int(name[5:])
        except ValueError:
            raise UnknownTestFunction(f"bad cell index in {name!r}") from None
        if partition is not None and not 0 <= k < partition.n_cells:
            raise UnknownTestFunction(f"cell {k} out of range")
        return TestFunction(name, "cell", k)
    raise UnknownTestFunction(f"unknown test function {name!r}")


test_function.__test__ = False


def _smooth_time_integrals(f, surface, table, bucket, n_buckets, step=1e-3):
    poly, x, y, dx, dy, ln = table
    out = np.zeros(n_buckets)
    for i in range(len(ln)):
        if ln[i] <= 0:
            continue
        n = max(1, int(math.ceil(ln[i] / step)))
        h = ln[i] / n
        s = (np.arange(n) + 0.5) * h
        vals = f.evaluate(surface, int(poly[i]), x[i] + s * dx[i], y[i] + s * dy[i])
        out[bucket[i]] += h * vals.sum()
    return out


def birkhoff_average(traj: Trajectory, f: TestFunction | str, checkpoints,
                     partition: CellPartition | None = None) -> list[float]:
    """(1/K) * integral of f along the trajectory up to each checkpoint."""
    if isinstance(f, str):
        f = test_function(f, partition)
    cps = _check_checkpoints(traj, checkpoints)
    if f.kind == "one":
        return [1.0 for _ in cps]
    if f.kind == "cell":
        if partition is None:
            raise UnknownTestFunction("cell indicators need a partition")
        prefix = prefix_occupancies(traj, partition, cps)
        return [float(row[f.cell]) / k for row, k in zip(prefix, cps)]
    poly, x, y, dx, dy, ln, bucket = _split_at(_segment_table(traj), cps)
    ints = np.cumsum(_smooth_time_integrals(f, traj_surface(traj, partition),
                                            (poly, x, y, dx, dy, ln), bucket, len(cps) + 1))
    return [float(v) / k for v, k in zip(ints, cps)]


def traj_surface(traj, partition):
    if partition is None:
        raise UnknownTestFunction("smooth test functions need the partition's surface")
    return partition.surface


def _three_point(f, surface, p, tris):
    mids = [(tris[:, i] + tris[:, (i + 1) % 3]) / 2 for i in range(3)]
    vals = sum(f.evaluate(surface, p, m[:, 0], m[:, 1]) for m in mids) / 3
    return float(np.sum(vals * _tri_areas(tris)))


def space_average(surface: FlatSurface, f: TestFunction | str,
                  partition: CellPartition | None = None, tol: float = 1e-8) -> float:
    """(1/A) * integral of f over the surface."""
    if isinstance(f, str):
        f = test_function(f, partition)
    if f.kind == "one":
        return 1.0
    if f.kind == "cell":
        if partition is None:
            raise UnknownTestFunction("cell indicators need a partition")
        return float(partition.areas[f.cell] / partition.total_area)
    total = 0.0
    for p, poly in enumerate(surface.polygons):
        v = np.array(poly.vertices)
        tris = np.stack([np.stack([v[0], v[i], v[i + 1]]) for i in range(1, poly.n - 1)])
        prev = _three_point(f, surface, p, tris)
        for _ in range(12):
            tris = _subdivide(tris)
            cur = _three_point(f, surface, p, tris)
            done = abs(cur - prev) <= tol * max(1.0, abs(cur))
            prev = cur
            if done:
                break
        total += prev
    return total / surface.area


# -- experiments ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "generic"
    n_samples: int = 20
    length: float = 1e4
    depth: int = 2
    seed: int = 0
    checkpoints: tuple = ()
    threshold: float = 0.1
    quantile: float = 0.9
    test_functions: tuple = ("one", "cell:0")
    angle: float | None = None
    via_cover: bool = False
    max_resamples: int = 100


def default_checkpoints(length: float) -> tuple:
    cps = []
    k = 100.0
    while k < length:
        cps.append(k)
        k *= 10
    cps.append(float(length))
    return tuple(cps)


def substream(seed: int, *key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _check_mode(surface: FlatSurface, cfg: ExperimentConfig):
    if cfg.mode not in MODES:
        raise ModeSurfaceMismatch(f"unknown mode {cfg.mode!r}; expected one of {MODES}")
    if cfg.mode == "billiard":
        if not surface.has_boundary:
            raise ModeSurfaceMismatch("billiard mode needs walls")
        return
    if surface.has_boundary and not cfg.via_cover:
        raise ModeSurfaceMismatch(f"{cfg.mode} mode needs a closed surface (use billiard mode)")
    if cfg.mode == "directional" and not holonomy_group(surface).trivial:
        raise ModeSurfaceMismatch("directional mode needs trivial holonomy")


def _start_state(surface, cfg, rng, family_dir, atlas):
    st = random_state(surface, rng)
    if cfg.mode == "parallel-family":
        dx, dy = atlas.placements[st.polygon].linear.inverse().apply(family_dir)
        return FlowState(st.polygon, st.x, st.y, dx, dy)
    if cfg.angle is not None:
        return FlowState(st.polygon, st.x, st.y, math.cos(cfg.angle), math.sin(cfg.angle))
    return st


def _run_sample(surface, cfg, i, family_dir, atlas, cover):
    for attempt in range(cfg.max_resamples + 1):
        rng = substream(cfg.seed, i, attempt)
        start = _start_state(surface, cfg, rng, family_dir, atlas)
        try:
            if cover is not None:
                up = lift_state(cover, start, int(rng.integers(cover.degree)))
                traj = project_trajectory(cover, trace_geodesic(cover.total, up, cfg.length))
            elif cfg.mode == "billiard":
                traj = trace_billiard(surface, start, cfg.length)
            else:
                traj = trace_geodesic(surface, start, cfg.length)
            return start, traj, attempt
        except SingularHit:
            continue
    raise SingularHit("?", -1, 0.0)


def _quantiles(values):
    arr = np.array(values)
    return {f"q{int(q * 100):02d}": float(np.quantile(arr, q)) for q in (0.1, 0.5, 0.9)}


def run_experiment(surface: FlatSurface, cfg: ExperimentConfig) -> dict:
    """Seeded batch of trajectories with discrepancy and Birkhoff tables.

    Returns a plain dictionary whose key order is fixed; serialize it with
    :func:`report_text`.
    """
    _check_mode(surface, cfg)
    cps = cfg.checkpoints or default_checkpoints(cfg.length)
    part = build_partition(surface, cfg.depth)
    funcs = [test_function(name, part) for name in cfg.test_functions]
    atlas = develop(surface) if cfg.mode == "parallel-family" else None
    family_dir = None
    if cfg.mode == "parallel-family":
        ang = cfg.angle if cfg.angle is not None else float(
            substream(cfg.seed, 2 ** 32).uniform(0, 2 * math.pi))
        family_dir = (math.cos(ang), math.sin(ang))
    cover = unfold(surface)[1] if cfg.via_cover else None

    samples = []
    resampled = 0
    for i in range(cfg.n_samples):
        start, traj, attempts = _run_sample(surface, cfg, i, family_dir, atlas, cover)
        resampled += attempts
        series = discrepancy_series(traj, part, cps)
        samples.append({
            "index": i,
            "start": {"polygon": surface.polygons[start.polygon].id, "x": start.x, "y": start.y,
                      "dx": start.dx, "dy": start.dy},
            "resampled": attempts,
            "events": len(traj.events),
            "discrepancy": series,
            "birkhoff": {f.name: birkhoff_average(traj, f, cps, part) for f in funcs},
            "below_threshold": series[-1] < cfg.threshold,
            "non_decreasing": len(series) > 1 and series[-1] > 0.5 * series[0],
        })

    finals = [s["discrepancy"][-1] for s in samples]
    medians = [float(np.median([s["discrepancy"][j] for s in samples])) for j in range(len(cps))]
    fraction = sum(s["below_threshold"] for s in samples) / max(1, len(samples))
    median_decreasing = len(cps) > 1 and medians[-1] < medians[0]
    consistent = fraction >= cfg.quantile and median_decreasing
    config = asdict(cfg)
    config["checkpoints"] = list(cps)
    config["test_functions"] = list(cfg.test_functions)
    return {
        "surface": {"polygons": len(surface.polygons), "area": surface.area,
                    "euler_characteristic": surface.euler_characteristic},
        "config": config,
        "generator": "PCG64 via SeedSequence(seed, spawn_key=(sample, attempt))",
        "partition": {"depth": part.depth, "cells": part.n_cells},
        "space_averages": {f.name: space_average(surface, f, part) for f in funcs},
        "samples": samples,
        "summary": {
            "samples": len(samples),
            "singular_resamples": resampled,
            "median_discrepancy": medians,
            "final_discrepancy": _quantiles(finals),
            "fraction_below_threshold": fraction,
            "median_decreasing": median_decreasing,
            "non_equidistributing": medians[-1] >= cfg.threshold,
            "verdict": ("consistent with ergodicity" if consistent
                        else "not consistent with equidistribution at this scale"),
        },
    }


def report_text(report: dict) -> str:
    return dumps(report, sort_keys=False) + "\n"


def discrepancy_csv_rows(report: dict):
    cps = report["config"]["checkpoints"]
    yield ("sample", "checkpoint", "discrepancy")
    for s in report["samples"]:
        for k, d in zip(cps, s["discrepancy"]):
            yield (s["index"], k, d)
