"""Morse checks, singular-set tracing, graphic extraction and the four scans, wired together."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classifier import classification_report, indexed_features
from .expr import Expression, evaluate, parse
from .graphic import Graphic
from .manifold import ImplicitThreeManifold, by_name
from .morse import DEFAULT_SEEDS, MorseProfile, find_critical_points, profile
from .sweep import BRANCH_MAP, VARIANTS, AssumptionViolated, BoundViolation, balance, bounds, sweep
from .tracer import NotStable, SingularCurveSet, extract_graphic, trace_singular_set, verify_stability

MATCH_TOL = 1e-6
REPORT_VERSION = 1


@dataclass
class Problem:
    F: Expression
    G: Expression
    manifold: ImplicitThreeManifold
    F_text: str = ""
    G_text: str = ""


def load_problem(F: str, G: str, manifold="s3", constraint=None, level=1.0) -> Problem:
    """Parse both functions and pick the manifold: an explicit constraint wins over a name."""
    Fe, Ge = parse(F), parse(G)
    m = ImplicitThreeManifold.from_text(constraint, level) if constraint else by_name(manifold)
    return Problem(Fe, Ge, m, F, G)


@dataclass
class IndexCheck:
    """A critical point of F or G on M and the graphic feature at its image."""
    function: str
    image: tuple
    morse_index: int | None
    table_index: int | None
    loop: int | None = None
    feature: int | None = None

    @property
    def ok(self):
        return self.morse_index is not None and self.morse_index == self.table_index

    def describe(self):
        where = "unmatched" if self.loop is None else f"loop {self.loop} feature {self.feature}"
        return (f"{self.function} at ({self.image[0]:.9f}, {self.image[1]:.9f}): morse index {self.morse_index}, "
                f"table index {self.table_index}, {where}")


def match_critical_points(g: Graphic, problem: Problem, crit_F, crit_G, tol=MATCH_TOL):
    """Pair each critical point with the vertical (F) or horizontal (G) feature at its image.

    Features left over without a critical point are reported too, with ``morse_index`` None.
    """
    items = indexed_features(g)
    checks = []
    for name, crit in (("F", crit_F), ("G", crit_G)):
        pool = [it for it in items if it.function == name]
        used = set()
        for c in crit:
            img = np.array([evaluate(problem.F, c.position), evaluate(problem.G, c.position)])
            best, dist = None, np.inf
            for j, it in enumerate(pool):
                d = np.linalg.norm(np.asarray(it.feature.position) - img)
                if d < dist and j not in used:
                    best, dist = j, d
            if best is None or dist > tol:
                checks.append(IndexCheck(name, tuple(img), c.index, None))
                continue
            used.add(best)
            it = pool[best]
            checks.append(IndexCheck(name, tuple(img), c.index, it.index, it.loop, it.position_in_loop))
        for j, it in enumerate(pool):
            if j not in used:
                checks.append(IndexCheck(name, tuple(it.feature.position), None, it.index, it.loop, it.position_in_loop))
    return checks


@dataclass
class TraceResult:
    problem: Problem
    critical_F: list
    critical_G: list
    profile_F: MorseProfile
    profile_G: MorseProfile
    curves: SingularCurveSet
    graphic: Graphic
    checks: list
    log: list = field(default_factory=list)

    @property
    def mismatches(self):
        return [c for c in self.checks if not c.ok]


def trace_pair(problem: Problem, step=2e-3, seeds=4096, morse_seeds=DEFAULT_SEEDS) -> TraceResult:
    """Trace the graphic of ``F x G`` and cross-check its features against both Morse functions."""
    m = problem.manifold
    log = [f"F = {problem.F_text or problem.F}", f"G = {problem.G_text or problem.G}",
           f"manifold {m.name}: {m.source} = {m.level!r}", f"step {step!r}, {seeds} seeds"]
    crit_F = find_critical_points(problem.F, m, morse_seeds)
    crit_G = find_critical_points(problem.G, m, morse_seeds)
    pF, pG = profile(crit_F), profile(crit_G)
    for name, crit, p in (("F", crit_F, pF), ("G", crit_G, pG)):
        log.append(f"{name}: index counts {list(p.counts)}, genus {p.genus}, extrema unique {p.extrema_unique}")
        for c in crit:
            log.append(f"  index {c.index} at {np.round(c.position, 9).tolist()} value {c.value:.12g}")
    extra = np.array([c.position for c in crit_F + crit_G])
    curves = trace_singular_set(problem.F, problem.G, m, step=step, seeds=seeds, extra_seeds=extra)
    log.extend(curves.log)
    report = verify_stability(curves)
    if not report.ok:
        for issue in report.issues:
            log.append(f"unstable: {issue.kind} at {issue.position}: {issue.message}")
        raise NotStable(f"{len(report.issues)} stability issue(s), first: {report.issues[0].message}")
    g = extract_graphic(curves)
    log.append(f"graphic: {len(g.loops)} loop(s), {sum(len(lp.features) for lp in g.loops)} features, "
               f"{len(g.cusps())} cusp(s), {len(g.crossings)} crossing(s)")
    checks = match_critical_points(g, problem, crit_F, crit_G)
    for c in checks:
        log.append(("ok " if c.ok else "MISMATCH ") + c.describe())
    return TraceResult(problem, crit_F, crit_G, pF, pG, curves, g, checks, log)


def worker_count(n_jobs):
    cap = os.environ.get("RSGRAPHIC_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, n_jobs))


def run_sweeps(g: Graphic, variants=VARIANTS, branch_map=BRANCH_MAP):
    """Scans run concurrently; results come back in the order of ``variants``."""
    with ThreadPoolExecutor(worker_count(len(variants))) as pool:
        reports = list(pool.map(lambda v: sweep(g, v, branch_map), variants))
    return dict(zip(variants, reports))


def analyze(g: Graphic, variants=VARIANTS, allow_multiple_extrema=False, branch_map=BRANCH_MAP) -> dict:
    """The report written by ``rsgraphic sweep``.

    Bounds need all four scans; they are null when a subset was requested or when the
    extrema are not unique and ``allow_multiple_extrema`` is set.
    """
    reports = run_sweeps(g, tuple(variants), branch_map)
    b = None
    if set(VARIANTS) <= set(reports):
        try:
            b = bounds(g, reports, branch_map).to_json()
        except AssumptionViolated:
            if not allow_multiple_extrema:
                raise
    bal = None
    if "up" in reports:
        delta, genus_delta = balance(g, reports["up"])
        bal = {"stab_minus_destab": delta, "genus_G_minus_genus_F": genus_delta, "holds": delta == genus_delta}
    return {
        "version": REPORT_VERSION,
        "reports": [reports[v].to_json() for v in variants],
        "bounds": b,
        "classification": classification_report(g),
        "balance": bal,
    }


def run_pipeline(problem: Problem, step=2e-3, seeds=4096, variants=VARIANTS, allow_multiple_extrema=False,
                 branch_map=BRANCH_MAP):
    """Trace then analyse. The genus balance of the up scan must hold for a traced graphic."""
    result = trace_pair(problem, step, seeds)
    report = analyze(result.graphic, variants, allow_multiple_extrema, branch_map)
    bal = report["balance"]
    if bal is not None and not bal["holds"]:
        raise BoundViolation(f"up scan changes genus by {bal['stab_minus_destab']}, "
                             f"but genus(G) - genus(F) = {bal['genus_G_minus_genus_F']}")
    return result, report
