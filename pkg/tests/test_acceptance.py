"""Acceptance criteria, one printed PASS/FAIL line each."""
import io
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from flatflow import corpus
from flatflow.canonical import export_surface
from flatflow.cli import main
from flatflow.covers import (
    double,
    lift_state,
    loop_functoriality,
    project_trajectory,
    random_state,
    trace_commutation,
    unfold,
)
from flatflow.errors import SingularHit
from flatflow.ergodicity import ExperimentConfig, run_experiment
from flatflow.flow import trace_billiard, trace_geodesic
from flatflow.holonomy import holonomy_group, is_really_flat, polygonal_loop_holonomy, random_loop
from flatflow.surface import load_surface


def report(number, ok, detail, elapsed, limit):
    within = elapsed < limit
    bound = f"limit {limit:g}s" if math.isfinite(limit) else "no time limit"
    line = (f"criterion {number}: {'PASS' if ok and within else 'FAIL'} - {detail} "
            f"[{elapsed:.2f}s, {bound}]")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert within, line


def corpus_covers():
    out = []
    for name in corpus.NAMES:
        _, cover, stages = unfold(corpus.load(name))
        out += [(f"{name}/{c.kind}", c) for c in stages]
        if len(stages) > 1:
            out.append((f"{name}/composite", cover))
    return out


def test_criterion_1_structure():
    t0 = time.perf_counter()
    worst, mismatched = 0.0, []
    for name in corpus.NAMES:
        text = corpus.text(name)
        s = load_surface(text)
        worst = max(worst, s.gauss_bonnet_residual())
        if export_surface(s) != text:
            mismatched.append(name)
    elapsed = time.perf_counter() - t0
    report(1, worst < 1e-9 and not mismatched,
           f"{len(corpus.NAMES)} corpus surfaces, max Gauss-Bonnet residual {worst:.1e}, "
           f"round-trip mismatches {mismatched}", elapsed, 1)


def test_criterion_2_loop_oracle():
    t0 = time.perf_counter()
    worst, loops = 0.0, 0
    for name in corpus.NAMES:
        s = corpus.load(name)
        rng = np.random.default_rng(2024)
        for _ in range(100):
            h = polygonal_loop_holonomy(s, random_loop(s, rng))
            worst = max(worst, h.residual)
            loops += 1
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-8, f"{loops} loops, max |Theta - angle(exact)| mod 2pi = {worst:.1e}",
           elapsed, 10)


def test_criterion_3_unfoldings():
    t0 = time.perf_counter()
    pc, cover, _ = unfold(corpus.load("pillowcase"))
    ok_pc = (holonomy_group(pc).trivial and cover.degree == 2
             and abs(pc.area - 2) <= 1e-9 * pc.area and pc.euler_characteristic == 0
             and all(cp.exact_angle.denominator == 1 for cp in pc.cone_points))
    tri_double, _ = double(corpus.load("triangle_table"))
    tt, cover2, _ = unfold(tri_double)
    ok_tri = (holonomy_group(tt).trivial and cover2.degree == 4
              and abs(tt.area - 4) <= 1e-9 * tt.area
              and not any(cp.singular for cp in tt.cone_points))
    elapsed = time.perf_counter() - t0
    report(3, ok_pc and ok_tri,
           f"pillowcase -> degree {cover.degree}, area {pc.area:.12g}, chi {pc.euler_characteristic}, "
           f"angles/2pi {sorted(str(cp.exact_angle) for cp in pc.cone_points)}; "
           f"triangle double -> degree {cover2.degree}, area {tt.area:.12g}, "
           f"singular {sum(cp.singular for cp in tt.cone_points)}", elapsed, 1)


def test_criterion_4_functoriality():
    covers = corpus_covers()
    t0 = time.perf_counter()
    checked = bad = 0
    for i, (_, cover) in enumerate(covers):
        n, b = loop_functoriality(cover, np.random.default_rng(100 + i), 100)
        checked += n
        bad += b
    elapsed = time.perf_counter() - t0
    report(4, bad == 0, f"{len(covers)} covers, {checked} lifted loops, {bad} exact-part mismatches",
           elapsed, 10)


def test_criterion_5_trajectory_transfer():
    covers = corpus_covers()
    t0 = time.perf_counter()
    worst = 0.0
    for i, (_, cover) in enumerate(covers):
        worst = max(worst, trace_commutation(cover, np.random.default_rng(500 + i), events=1000))
    worst_fold = 0.0
    for name in ("square_table", "triangle_table", "trapezoid_table"):
        base = corpus.load(name)
        dbl, fold = double(base)
        rng = np.random.default_rng(77)
        done = 0
        while done < 3:
            st = random_state(base, rng)
            try:
                billiard = trace_billiard(base, st, 100.0)
                folded = project_trajectory(fold, trace_geodesic(dbl, lift_state(fold, st), 100.0))
            except SingularHit:
                continue
            if len(billiard.events) != len(folded.events):
                worst_fold = math.inf
                break
            for a, b in zip(billiard.events, folded.events):
                worst_fold = max(worst_fold, math.dist(a.point, b.point), abs(a.t - b.t))
            worst_fold = max(worst_fold, math.dist(billiard.final.position, folded.final.position))
            done += 1
    elapsed = time.perf_counter() - t0
    report(5, worst <= 1e-6 and worst_fold <= 1e-6,
           f"lift/project over 1000 events on {len(covers)} covers: worst {worst:.1e}; "
           f"billiard vs folded double over length 100: worst {worst_fold:.1e}", elapsed, 30)


def test_criterion_6_equidistribution():
    runs = [("torus", "directional"), ("octagon", "directional"), ("pillowcase", "generic")]
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, mode in runs:
        rep = run_experiment(corpus.load(name), ExperimentConfig(mode=mode, n_samples=20, length=1e4,
                                                                  depth=2, seed=0))
        summ = rep["summary"]
        good = summ["fraction_below_threshold"] >= 0.9 and summ["median_decreasing"]
        ok &= good
        med = summ["median_discrepancy"]
        parts.append(f"{name}/{mode}: {summ['fraction_below_threshold']:.0%} below 0.1, "
                     f"median D {med[0]:.3g} -> {med[-1]:.3g}")
    elapsed = time.perf_counter() - t0
    report(6, ok, "; ".join(parts), elapsed, 300)


def test_criterion_7_negative_controls():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(n_samples=5, length=1e4, depth=2, seed=0, angle=0.0)
    horiz = run_experiment(corpus.load("torus"), ExperimentConfig(**{**cfg.__dict__, "mode": "directional"}))
    bill = run_experiment(corpus.load("square_table"), ExperimentConfig(**{**cfg.__dict__, "mode": "billiard"}))
    radian = is_really_flat(corpus.radian_table())
    flagged = [r["summary"]["non_equidistributing"] and all(s["non_decreasing"] for s in r["samples"])
               for r in (horiz, bill)]
    elapsed = time.perf_counter() - t0
    report(7, all(flagged) and not radian.verdict,
           f"horizontal torus median D {horiz['summary']['median_discrepancy'][-1]:.3g}, "
           f"slope-0 billiard median D {bill['summary']['median_discrepancy'][-1]:.3g} (both flagged: "
           f"{all(flagged)}); 1-radian table really flat: {radian.verdict}", elapsed, 10)


def test_criterion_8_determinism(tmp_path):
    commands = [
        ["--surface", corpus.path("pillowcase"), "--mode", "generic", "--samples", "4", "--length", "2000"],
        ["--surface", corpus.path("square_table"), "--mode", "billiard", "--samples", "3", "--length", "1000"],
        ["--surface", corpus.path("torus"), "--mode", "parallel-family", "--samples", "3", "--length", "1000"],
    ]
    t0 = time.perf_counter()
    same = []
    for k, cmd in enumerate(commands):
        outs = []
        for rep in range(2):
            path = tmp_path / f"r{k}_{rep}.json"
            code = main(["ergodicity", *map(str, cmd), "--seed", "17", "--out", str(path)],
                        out=io.StringIO(), err=io.StringIO())
            assert code == 0
            outs.append(path.read_bytes())
        same.append(outs[0] == outs[1])
    elapsed = time.perf_counter() - t0
    report(8, all(same), f"{len(commands)} ergodicity commands run twice, byte-identical: {same}",
           elapsed, math.inf)
