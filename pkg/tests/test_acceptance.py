"""End-to-end acceptance checks A1-A8, one test each."""
import json
import math
import time
from fractions import Fraction

import numpy as np

from conftest import traced
from rsgraphic import cli
from rsgraphic.assemble import assemble
from rsgraphic.corpus import CORPUS
from rsgraphic.graphic import branch_side, cusp_branches, cusp_census, validate
from rsgraphic.classifier import graphic_profile
from rsgraphic.pipeline import analyze, load_problem, trace_pair
from rsgraphic.sweep import BRANCH_MAP, UNFLIPPED_BRANCH_MAP, BoundViolation, balance, bounds, sweep, sweep_all
from rsgraphic.synthetic import random_curves, random_graphic

FLIPPED = {"down_right": "left_of_tip", "up_left": "right_of_tip"}


def corpus_traces(step=2e-3):
    return [(ex.name, traced(ex.name, step)) for ex in CORPUS]


def test_a1_sphere_baseline(acceptance, monkeypatch):
    monkeypatch.setenv("RSGRAPHIC_THREADS", "1")
    t0 = time.perf_counter()
    result = trace_pair(load_problem("x1", "x2"), step=1e-3)
    report = analyze(result.graphic)
    elapsed = time.perf_counter() - t0

    g = result.graphic
    assert len(g.loops) == 1
    pts = np.concatenate([a.points for a in g.loops[0].arcs])
    dev = float(np.max(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 1.0)))
    samples = result.curves.loops[0]
    ok = (dev < 1e-6
          and set(samples.kind) == {"definite"}
          and not g.cusps()
          and result.profile_F.counts == result.profile_G.counts == (1, 0, 0, 1)
          and [lbl for a in g.loops[0].arcs for lbl in a.label] == ["d"] * len(g.loops[0].arcs)
          and all(r["stab"] == r["destab"] == 0 for r in report["reports"])
          and all(report["bounds"][k] == 0 for k in ("d_plus", "d_minus", "surface", "theorem1_floor", "theorem2_floor"))
          and elapsed < 5.0)
    acceptance("A1", ok, f"radial deviation {dev:.1e}, {elapsed:.2f} s")
    assert dev < 1e-6
    assert set(samples.kind) == {"definite"} and not g.cusps()
    assert result.profile_F.counts == result.profile_G.counts == (1, 0, 0, 1)
    assert all(r["stab"] == r["destab"] == 0 for r in report["reports"])
    assert report["bounds"]["theorem1"] == report["bounds"]["theorem2"] == "0/1"
    assert elapsed < 5.0
    assert ok


def test_a2_index_table_matches_hessian(acceptance):
    traces = corpus_traces()
    bad = [(name, c.describe()) for name, r in traces for c in r.mismatches]
    checked = sum(len(r.checks) for _, r in traces)
    with_cusps = [name for name, r in traces if r.graphic.cusps()]
    ok = not bad and len(traces) >= 3 and with_cusps
    acceptance("A2", ok, f"{len(traces)} pairs, {checked} features, {len(bad)} mismatches, cusps in {with_cusps}")
    assert not bad
    assert len(traces) >= 3 and with_cusps


def test_a3_cusps_are_type_one(acceptance):
    sides, total = [], 0
    for _, r in corpus_traces():
        for lp in r.graphic.loops:
            for k, ft in enumerate(lp.features):
                if ft.kind != "cusp":
                    continue
                total += 1
                inc, out = cusp_branches(lp, k)
                sides.append((branch_side(inc, ft.position, ft.tip_direction),
                              branch_side(out, ft.position, ft.tip_direction)))
    ok = total > 0 and all(a * b == -1 for a, b in sides)
    acceptance("A3", ok, f"{total} cusps, all branches on opposite sides of the tip tangent")
    assert total > 0
    assert all(a * b == -1 for a, b in sides)


def test_a4_bound_invariants_on_fuzz(acceptance):
    rng = np.random.default_rng(2024)
    n, violations = 10_000, []
    for i in range(n):
        g = random_graphic(rng)
        pf, pg = graphic_profile(g, require_unique_extrema=True)
        rep = sweep_all(g)
        c = cusp_census(g)
        gsum = pf.genus + pg.genus
        d_plus = min(rep["up"].effects, rep["down"].effects)
        d_minus = min(rep["reflected_up"].effects, rep["reflected_down"].effects)
        surface = min(d_plus, d_minus)
        total = sum(c.values())
        if d_plus > math.floor(gsum + Fraction(c["negative_slope"], 2)):
            violations.append((i, "d_plus"))
        if d_minus > math.floor(gsum + Fraction(c["positive_slope"], 2)):
            violations.append((i, "d_minus"))
        if surface > math.floor(gsum + Fraction(total, 4)):
            violations.append((i, "surface"))
        try:
            b = bounds(g, rep)
        except BoundViolation as exc:
            violations.append((i, str(exc)))
            continue
        if (b.d_plus_bound, b.d_minus_bound, b.surface_bound) != (d_plus, d_minus, surface):
            violations.append((i, "library disagrees"))
    acceptance("A4", not violations, f"{n} graphics, {len(violations)} violations")
    assert violations == []


def test_a5_branch_convention_oracle(acceptance):
    results = {}
    cases = 0
    for name, r in corpus_traces():
        g = r.graphic
        if cusp_census(g)["negative_slope"] == 0:
            continue
        cases += 1
        for tag, bmap in (("unflipped", UNFLIPPED_BRANCH_MAP), ("flipped", dict(UNFLIPPED_BRANCH_MAP, **FLIPPED))):
            up = sweep(g, "up", bmap)
            delta, target = balance(g, up)
            cusp_events = [(e.rule, e.effect) for e in up.events if e.rule in ("R5", "R6")]
            results.setdefault(tag, []).append((name, delta, target, cusp_events))
    holds = {tag: all(d == t for _, d, t, _ in rows) for tag, rows in results.items()}
    expected = UNFLIPPED_BRANCH_MAP if holds["unflipped"] else dict(UNFLIPPED_BRANCH_MAP, **FLIPPED)
    ok = cases > 0 and BRANCH_MAP == expected and (holds["unflipped"] or holds["flipped"])
    detail = ", ".join(f"{tag} map balance {'holds' if h else 'fails'}" for tag, h in holds.items())
    acceptance("A5", ok, f"{cases} traced graphics with negative-slope cusps; {detail}; shipped map "
               f"{'unflipped' if BRANCH_MAP == UNFLIPPED_BRANCH_MAP else 'flipped'}")
    assert cases > 0
    assert all(ev for _, _, _, ev in results["unflipped"])
    assert BRANCH_MAP == expected
    assert holds["unflipped"] or holds["flipped"]


def test_a6_parity_and_alternation(acceptance):
    found = []
    for name, r in corpus_traces():
        found += [(name, v.rule) for v in validate(r.graphic) if v.rule in ("V1", "V2")]
    rng = np.random.default_rng(7)
    fuzz = 0
    for _ in range(2000):
        try:
            g = assemble(random_curves(rng))
        except ValueError:
            continue
        fuzz += 1
        found += [("fuzz", v.rule) for v in validate(g) if v.rule in ("V1", "V2")]
    for _ in range(200):
        g = random_graphic(rng)
        fuzz += 1
        found += [("fuzz", v.rule) for v in validate(g) if v.rule in ("V1", "V2")]
    acceptance("A6", not found, f"{len(CORPUS)} traced + {fuzz} fuzz graphics, {len(found)} V1/V2 violations")
    assert found == []


def _discrete(g):
    return [[(ft.kind, ft.convexity, ft.slope_sign, ft.branch_labels) for ft in lp.features]
            + [(a.label, a.gray_side) for a in lp.arcs] for lp in g.loops]


def test_a7_step_halving(acceptance):
    worst, changed = 0.0, []
    for ex in CORPUS:
        coarse, fine = traced(ex.name, 2e-3).graphic, traced(ex.name, 1e-3).graphic
        if _discrete(coarse) != _discrete(fine) or len(coarse.crossings) != len(fine.crossings):
            changed.append((ex.name, "discrete data"))
            continue
        for a, b in zip(coarse.loops, fine.loops):
            for fa, fb in zip(a.features, b.features):
                worst = max(worst, float(np.linalg.norm(np.subtract(fa.position, fb.position))))
        ra = analyze(coarse, allow_multiple_extrema=True)
        rb = analyze(fine, allow_multiple_extrema=True)
        effects = [[(e["rule"], e["effect"]) for e in r["events"]] for r in ra["reports"]]
        if effects != [[(e["rule"], e["effect"]) for e in r["events"]] for r in rb["reports"]]:
            changed.append((ex.name, "event effects"))
    ok = worst < 1e-6 and not changed
    acceptance("A7", ok, f"max feature shift {worst:.1e}, discrete changes {changed}")
    assert not changed
    assert worst < 1e-6


def _run_cli(tmp, ex):
    tmp.mkdir()
    manifest = tmp / "m.json"
    manifest.write_text(json.dumps(ex.manifest(2e-3)))
    out = {k: tmp / k for k in ("graphic.json", "report.json", "out.svg")}
    assert cli.main(["trace", "--manifest", str(manifest), "-o", str(out["graphic.json"]),
                     "--log", str(tmp / "trace.log")]) == 0
    assert cli.main(["sweep", str(out["graphic.json"]), "--allow-multiple-extrema",
                     "-o", str(out["report.json"])]) == 0
    assert cli.main(["render", str(out["graphic.json"]), str(out["report.json"]),
                     "-o", str(out["out.svg"])]) == 0
    return {k: p.read_bytes() for k, p in out.items()}


def test_a8_determinism(acceptance, tmp_path):
    differing = []
    for ex in CORPUS:
        first = _run_cli(tmp_path / f"{ex.name}_1", ex)
        second = _run_cli(tmp_path / f"{ex.name}_2", ex)
        differing += [f"{ex.name}/{k}" for k in first if first[k] != second[k]]
    acceptance("A8", not differing, f"{len(CORPUS)} examples x 3 files, differing: {differing or 'none'}")
    assert differing == []
