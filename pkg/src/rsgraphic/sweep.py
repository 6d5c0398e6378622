"""Scanning-band event classification and Reidemeister-Singer distance bounds.

A horizontal band moves up through the graphic. Each feature it passes is
either inert or adds/removes a canceling handle pair (stabilization or
destabilization). The down scan applies the same rules to the graphic turned
by 180 degrees, i.e. to the pair (-F, -G); the reflected scans use -G.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .classifier import graphic_profile
from .graphic import Graphic, cusp_census, features_by_scan, reflect, rotate180
from .morse import ProfileInvalid

VARIANTS = ("up", "down", "reflected_up", "reflected_down")
STAB, DESTAB, NONE = "stabilization", "destabilization", "none"
TIE_TOL = 1e-12

# Which tip-relative branch plays the part of the "right arc" of a slanted cusp.
# The slanted entries are the ones fixed by the canceling-pair check: with the
# tip direction pointing into the cusp, a down-right cusp's right-hand arc (the
# one with larger f) lies to the left of the tip.
BRANCH_MAP = {
    "down_right": "left_of_tip",
    "up_left": "right_of_tip",
    "right": "left_of_tip",     # upper arc of a right-pointing horizontal cusp
    "up": "right_of_tip",       # right arc of an up-pointing vertical cusp
}
UNFLIPPED_BRANCH_MAP = dict(BRANCH_MAP, down_right="right_of_tip", up_left="left_of_tip")


class AssumptionViolated(ValueError):
    pass


class UnresolvedTie(ValueError):
    pass


class BoundViolation(AssertionError):
    pass


@dataclass(frozen=True)
class SweepEvent:
    loop: int
    index: int
    kind: str
    position: tuple
    r: float
    effect: str
    rule: str

    def to_json(self):
        return {"rule": self.rule, "loop": self.loop, "feature": self.index, "kind": self.kind,
                "position": list(self.position), "r": self.r, "effect": self.effect}


@dataclass(frozen=True)
class SweepReport:
    variant: str
    events: tuple
    stab_count: int
    destab_count: int

    @property
    def final_genus_delta(self):
        return self.stab_count - self.destab_count

    @property
    def effects(self):
        return self.stab_count + self.destab_count

    def to_json(self):
        return {"variant": self.variant, "events": [e.to_json() for e in self.events],
                "stab": self.stab_count, "destab": self.destab_count}


def _branch(ft, which):
    left, right = ft.branch_labels
    return left if which == "left_of_tip" else right


def _label(loop, k):
    return loop.arcs[k].label


def classify_event(loop, k, branch_map=BRANCH_MAP):
    """``(rule, effect)`` for feature k of a loop under an upward scan."""
    ft = loop.features[k]
    if ft.kind == "horizontal":
        if ft.convexity == "down":
            return "R1", STAB if _label(loop, k) == "i" else NONE
        return "R4", NONE
    if ft.kind == "vertical":
        if ft.convexity == "left":
            return "R2", DESTAB if _label(loop, k) == "i" else NONE
        return "R3", NONE
    if ft.kind == "cusp":
        df, dg = ft.tip_direction
        if ft.slope_sign == "negative":
            if df > 0 and dg < 0:
                return "R5", STAB if _branch(ft, branch_map["down_right"]) == "i" else NONE
            return "R6", DESTAB if _branch(ft, branch_map["up_left"]) == "i" else NONE
        if ft.slope_sign == "positive":
            return "R7", NONE
        if ft.slope_sign == "zero":
            if df > 0 and _branch(ft, branch_map["right"]) == "i":
                return "R8", STAB
            return "R8", NONE
        if dg > 0 and _branch(ft, branch_map["up"]) == "i":
            return "R8", DESTAB
        return "R8", NONE
    return "R9", NONE


def _check_ties(order):
    active = [t for t in order if t[2].kind != "crossing_ref"]
    for a, b in zip(active, active[1:]):
        if abs(a[2].g - b[2].g) <= TIE_TOL and abs(a[2].f - b[2].f) <= TIE_TOL:
            raise UnresolvedTie(f"features {a[:2]} and {b[:2]} coincide at {a[2].position}")


def _scan(g: Graphic, rules_on: Graphic, direction, variant, branch_map):
    order = features_by_scan(g, direction)
    _check_ties(order)
    events, stab, destab = [], 0, 0
    for li, k, ft in order:
        rule, effect = classify_event(rules_on.loops[li], k, branch_map)
        r = ft.g if direction == "up" else -ft.g
        events.append(SweepEvent(li, k, ft.kind, (float(ft.f), float(ft.g)), float(r), effect, rule))
        stab += effect == STAB
        destab += effect == DESTAB
    return SweepReport(variant, tuple(events), stab, destab)


def sweep(g: Graphic, variant="up", branch_map=BRANCH_MAP) -> SweepReport:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    base = reflect(g) if variant.startswith("reflected") else g
    if variant.endswith("up"):
        return _scan(base, base, "up", variant, branch_map)
    return _scan(base, rotate180(base), "down", variant, branch_map)


def sweep_all(g: Graphic, branch_map=BRANCH_MAP, variants=VARIANTS):
    return {v: sweep(g, v, branch_map) for v in variants}


@dataclass(frozen=True)
class BoundReport:
    genus_F: int
    genus_G: int
    cusp_counts: dict
    d_plus_bound: int
    d_minus_bound: int
    surface_bound: int
    theorem1_bound: Fraction
    theorem2_bound: Fraction

    def to_json(self):
        return {
            "d_plus": self.d_plus_bound, "d_minus": self.d_minus_bound, "surface": self.surface_bound,
            "theorem1": _ratio(self.theorem1_bound), "theorem2": _ratio(self.theorem2_bound),
            "theorem1_floor": math.floor(self.theorem1_bound), "theorem2_floor": math.floor(self.theorem2_bound),
            "genus_F": self.genus_F, "genus_G": self.genus_G, "cusp_counts": dict(self.cusp_counts),
        }


def _ratio(q: Fraction):
    return f"{q.numerator}/{q.denominator}"


def bounds(g: Graphic, reports=None, branch_map=BRANCH_MAP) -> BoundReport:
    """Distance bounds from the four scans, checked against the genus and cusp counts."""
    try:
        pf, pg = graphic_profile(g, require_unique_extrema=True)
    except ProfileInvalid as exc:
        raise AssumptionViolated(str(exc)) from None
    reports = reports or sweep_all(g, branch_map)
    census = cusp_census(g)
    gf, gg = pf.genus, pg.genus
    d_plus = min(reports["up"].effects, reports["down"].effects)
    d_minus = min(reports["reflected_up"].effects, reports["reflected_down"].effects)
    surface = min(d_plus, d_minus)
    total = sum(census.values())
    t1 = Fraction(gf + gg) + Fraction(total, 2)
    t2 = Fraction(gf + gg) + Fraction(total, 4)
    checks = [
        (d_plus <= math.floor(gf + gg + Fraction(census["negative_slope"], 2)), "d_plus exceeds the negative-slope bound"),
        (d_minus <= math.floor(gf + gg + Fraction(census["positive_slope"], 2)), "d_minus exceeds the positive-slope bound"),
        (surface <= math.floor(t2), "surface bound exceeds g_F + g_G + c/4"),
        (reports["up"].effects + reports["down"].effects <= 2 * (gf + gg) + census["negative_slope"],
         "up and down scans count more events than indefinite extrema plus negative-slope cusps"),
    ]
    for ok, msg in checks:
        if not ok:
            raise BoundViolation(msg)
    return BoundReport(gf, gg, census, d_plus, d_minus, surface, t1, t2)


def balance(g: Graphic, report: SweepReport):
    """``(stab - destab, genus_G - genus_F)``; equal for graphics of actual maps."""
    pf, pg = graphic_profile(g, require_unique_extrema=False)
    return report.final_genus_delta, pg.genus - pf.genus


def report_from_json(data) -> SweepReport:
    events = tuple(SweepEvent(e["loop"], e["feature"], e["kind"], tuple(e["position"]), e["r"], e["effect"], e["rule"])
                   for e in data["events"])
    return SweepReport(data["variant"], events, data["stab"], data["destab"])
