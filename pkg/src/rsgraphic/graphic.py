"""Combinatorial model of a graphic: decorated closed image curves in the (f, g) plane.

A loop is a cyclic list of features with the arc that runs from each feature
to the next one, so ``arcs[k]`` starts at ``features[k]`` and ends at
``features[k + 1]``. Sides (gray side, cusp branches) are stored relative to
the traversal direction of the loop.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

TOL = 1e-9
CUSP_CROSSING_TOL = 1e-6
PROBE_GAP = 1e-6

KINDS = ("horizontal", "vertical", "cusp", "inflection", "crossing_ref")
CONVEXITIES = ("up", "down", "left", "right", "none")
SLOPES = ("positive", "negative", "zero", "infinite")


class SchemaError(ValueError):
    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


@dataclass(eq=False)
class Feature:
    kind: str
    position: tuple
    convexity: str = "none"
    tip_direction: tuple | None = None
    # (label on the left of the tip, label on the right), facing along tip_direction
    branch_labels: tuple | None = None
    slope_sign: str = "zero"

    @property
    def f(self):
        return self.position[0]

    @property
    def g(self):
        return self.position[1]


@dataclass(eq=False)
class Arc:
    label: str
    gray_side: str | None
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)


@dataclass(eq=False)
class Loop:
    features: list
    arcs: list


@dataclass(eq=False)
class Crossing:
    position: tuple
    angle: float
    refs: tuple = ()


@dataclass(eq=False)
class Graphic:
    loops: list
    crossings: list = field(default_factory=list)

    @property
    def bounding_box(self):
        pts = np.concatenate([a.points for lp in self.loops for a in lp.arcs])
        return (float(pts[:, 0].min()), float(pts[:, 0].max())), (float(pts[:, 1].min()), float(pts[:, 1].max()))

    def iter_features(self):
        for li, lp in enumerate(self.loops):
            for fi, ft in enumerate(lp.features):
                yield li, fi, ft

    def cusps(self):
        return [ft for _, _, ft in self.iter_features() if ft.kind == "cusp"]

    def __eq__(self, other):
        return isinstance(other, Graphic) and serialize(self) == serialize(other)


@dataclass(frozen=True)
class Violation:
    rule: str
    loop: int
    index: int
    message: str

    def to_json(self):
        return {"rule": self.rule, "loop": self.loop, "index": self.index, "message": self.message}


# --- geometry helpers ------------------------------------------------------

def right_of(d):
    """Unit vector to the right when facing along ``d``."""
    return np.array([d[1], -d[0]])


def cusp_slope_sign(d, tol=TOL):
    if abs(d[1]) <= tol:
        return "zero"
    if abs(d[0]) <= tol:
        return "infinite"
    return "positive" if d[0] * d[1] > 0 else "negative"


def _branch_probes(points, origin, count=5, min_dist=PROBE_GAP):
    """Up to ``count`` polyline points leaving ``origin``, skipping those within ``min_dist``.

    A branch leaves a cusp at distance r with lateral offset of order r^1.5, so samples
    very close to the tip carry no usable side information.
    """
    out = []
    for p in points:
        if np.hypot(*(p - origin)) > min_dist:
            out.append(p)
        if len(out) == count:
            break
    return out


def branch_side(points, cusp, d):
    """Side (+1 right, -1 left, 0 undecided) of a branch relative to the tip tangent line."""
    r = right_of(d)
    c = np.asarray(cusp)
    s = [float((p - c) @ r) for p in _branch_probes(points, c)]
    s = [x for x in s if abs(x) > 1e-15]
    if not s:
        return 0
    if all(x > 0 for x in s):
        return 1
    if all(x < 0 for x in s):
        return -1
    return 0


def cusp_branches(loop: Loop, k: int):
    """Polylines of the two branches at cusp feature ``k``, each starting at the cusp."""
    n = len(loop.features)
    incoming = loop.arcs[(k - 1) % n].points[::-1]
    outgoing = loop.arcs[k].points
    return incoming, outgoing


# --- validation ------------------------------------------------------------

def validate(g: Graphic) -> list:
    out = []
    if not g.loops:
        out.append(Violation("V0", -1, -1, "graphic has no loops"))
    for li, lp in enumerate(g.loops):
        n = len(lp.features)
        if n == 0 or len(lp.arcs) != n:
            out.append(Violation("V0", li, -1, f"{n} features but {len(lp.arcs)} arcs"))
            continue
        ncusp = sum(ft.kind == "cusp" for ft in lp.features)
        if ncusp % 2:
            out.append(Violation("V1", li, -1, f"odd cusp count {ncusp}"))
        for k, ft in enumerate(lp.features):
            prev, nxt = lp.arcs[(k - 1) % n], lp.arcs[k]
            if ft.kind == "cusp":
                if prev.label == nxt.label:
                    out.append(Violation("V2", li, k, f"labels {prev.label}/{nxt.label} do not alternate at cusp"))
            elif prev.label != nxt.label:
                out.append(Violation("V2", li, k, f"label changes {prev.label}->{nxt.label} at a {ft.kind} point"))
        for k, arc in enumerate(lp.arcs):
            if (arc.gray_side is not None) != (arc.label == "d") or arc.gray_side not in ("left", "right", None):
                out.append(Violation("V3", li, k, f"arc label {arc.label} with gray side {arc.gray_side}"))
        out.extend(_check_polyline_links(li, lp))
        out.extend(_check_cusps(li, lp))
        out.extend(_check_features(li, lp))
    cusp_pos = [np.asarray(ft.position) for ft in g.cusps()]
    for ci, cr in enumerate(g.crossings):
        if not cr.angle > 0:
            out.append(Violation("V4", -1, ci, f"crossing angle {cr.angle} is not positive"))
        for c in cusp_pos:
            if np.hypot(*(np.asarray(cr.position) - c)) < CUSP_CROSSING_TOL:
                out.append(Violation("V4", -1, ci, "crossing coincides with a cusp"))
    return out


def _check_polyline_links(li, lp):
    n = len(lp.features)
    out = []
    for k, arc in enumerate(lp.arcs):
        a, b = np.asarray(lp.features[k].position), np.asarray(lp.features[(k + 1) % n].position)
        if len(arc.points) < 2 or np.abs(arc.points[0] - a).max() > TOL or np.abs(arc.points[-1] - b).max() > TOL:
            out.append(Violation("V6", li, k, "arc polyline does not join its end features"))
    return out


def _check_cusps(li, lp):
    out = []
    for k, ft in enumerate(lp.features):
        if ft.kind != "cusp":
            continue
        if ft.tip_direction is None or ft.branch_labels is None:
            out.append(Violation("V5", li, k, "cusp without tip direction or branch labels"))
            continue
        d = np.asarray(ft.tip_direction, dtype=float)
        if abs(np.hypot(*d) - 1.0) > 1e-6:
            out.append(Violation("V5", li, k, "tip direction is not a unit vector"))
            continue
        if sorted(ft.branch_labels) != ["d", "i"]:
            out.append(Violation("V5", li, k, f"branch labels {ft.branch_labels} need one d and one i"))
            continue
        if ft.slope_sign != cusp_slope_sign(d):
            out.append(Violation("V6", li, k, f"slope sign {ft.slope_sign} disagrees with tip {tuple(d)}"))
        incoming, outgoing = cusp_branches(lp, k)
        s_in = branch_side(incoming, ft.position, d)
        s_out = branch_side(outgoing, ft.position, d)
        if s_in * s_out != -1:
            out.append(Violation("V5", li, k, "branches are not separated by the tip tangent line (type two)"))
            continue
        n = len(lp.features)
        lab_in, lab_out = lp.arcs[(k - 1) % n].label, lp.arcs[k].label
        right = lab_in if s_in > 0 else lab_out
        left = lab_out if s_in > 0 else lab_in
        if (left, right) != tuple(ft.branch_labels):
            out.append(Violation("V5", li, k, f"branch labels {ft.branch_labels} disagree with arcs ({left}, {right})"))
    return out


def _neighbours(lp, k):
    n = len(lp.features)
    return lp.arcs[(k - 1) % n].points[-2], lp.arcs[k].points[1]


def _check_features(li, lp):
    out = []
    for k, ft in enumerate(lp.features):
        if ft.kind not in KINDS:
            out.append(Violation("V6", li, k, f"unknown feature kind {ft.kind}"))
            continue
        if ft.kind in ("cusp", "crossing_ref"):
            continue
        p, q = _neighbours(lp, k)
        f0, g0 = ft.position
        if ft.kind == "horizontal":
            if ft.convexity not in ("up", "down") or ft.slope_sign != "zero":
                out.append(Violation("V6", li, k, f"horizontal point with convexity {ft.convexity}"))
                continue
            sgn = 1 if ft.convexity == "down" else -1
            if sgn * (p[1] - g0) < -TOL or sgn * (q[1] - g0) < -TOL:
                out.append(Violation("V6", li, k, f"neighbours contradict convexity {ft.convexity}"))
        elif ft.kind == "vertical":
            if ft.convexity not in ("left", "right") or ft.slope_sign != "infinite":
                out.append(Violation("V6", li, k, f"vertical point with convexity {ft.convexity}"))
                continue
            sgn = 1 if ft.convexity == "left" else -1
            if sgn * (p[0] - f0) < -TOL or sgn * (q[0] - f0) < -TOL:
                out.append(Violation("V6", li, k, f"neighbours contradict convexity {ft.convexity}"))
        elif ft.kind == "inflection":
            df, dg = q[0] - p[0], q[1] - p[1]
            if ft.slope_sign in ("positive", "negative"):
                observed = "positive" if df * dg > 0 else "negative"
                if abs(df) > TOL and abs(dg) > TOL and observed != ft.slope_sign:
                    out.append(Violation("V6", li, k, f"inflection slope {ft.slope_sign} but neighbours give {observed}"))
    return out


# --- scans and symmetries --------------------------------------------------

def features_by_scan(g: Graphic, direction="up"):
    """``(loop, index, feature)`` triples ordered by g, ascending for "up" and descending for "down".

    Features whose g differ by at most ``TOL`` count as tied and are ordered by f, then loop.
    """
    if direction not in ("up", "down"):
        raise ValueError(f"unknown scan direction {direction!r}")
    sign = 1.0 if direction == "up" else -1.0
    items = sorted(g.iter_features(), key=lambda t: (sign * t[2].g, t[2].f, t[0], t[1]))
    out, group = [], []
    for t in items:
        if group and sign * (t[2].g - group[0][2].g) > TOL:
            out.extend(sorted(group, key=lambda t: (t[2].f, t[0], t[1])))
            group = []
        group.append(t)
    out.extend(sorted(group, key=lambda t: (t[2].f, t[0], t[1])))
    return out


_SWAP_UD = {"up": "down", "down": "up"}
_SWAP_LR = {"left": "right", "right": "left"}
_SWAP_SLOPE = {"positive": "negative", "negative": "positive"}


def _transform(g: Graphic, sf: float, sg: float) -> Graphic:
    """Apply ``(f, g) -> (sf f, sg g)`` with sf, sg in {+1, -1}."""
    flips_orientation = sf * sg < 0

    def conv(c):
        if sg < 0:
            c = _SWAP_UD.get(c, c)
        if sf < 0:
            c = _SWAP_LR.get(c, c)
        return c

    def pt(p):
        return (sf * p[0], sg * p[1])

    loops = []
    for lp in g.loops:
        feats = []
        for ft in lp.features:
            tip = None if ft.tip_direction is None else pt(ft.tip_direction)
            labels = ft.branch_labels
            if labels is not None and flips_orientation:
                labels = (labels[1], labels[0])
            slope = _SWAP_SLOPE.get(ft.slope_sign, ft.slope_sign) if flips_orientation else ft.slope_sign
            feats.append(Feature(ft.kind, pt(ft.position), conv(ft.convexity), tip, labels, slope))
        arcs = []
        for a in lp.arcs:
            side = a.gray_side
            if side is not None and flips_orientation:
                side = _SWAP_LR[side]
            arcs.append(Arc(a.label, side, a.points * np.array([sf, sg])))
        loops.append(Loop(feats, arcs))
    crossings = [Crossing(pt(c.position), c.angle, c.refs) for c in g.crossings]
    return Graphic(loops, crossings)


def reflect(g: Graphic) -> Graphic:
    """Mirror in the f-axis, i.e. replace G by -G."""
    return _transform(g, 1.0, -1.0)


def rotate180(g: Graphic) -> Graphic:
    """Point reflection ``(f, g) -> (-f, -g)``, i.e. replace (F, G) by (-F, -G)."""
    return _transform(g, -1.0, -1.0)


def negative_slope_cusps(g):
    return sum(ft.slope_sign == "negative" for ft in g.cusps())


def cusp_census(g):
    c = {"negative_slope": 0, "positive_slope": 0, "horizontal": 0, "vertical": 0}
    key = {"negative": "negative_slope", "positive": "positive_slope", "zero": "horizontal", "infinite": "vertical"}
    for ft in g.cusps():
        c[key[ft.slope_sign]] += 1
    return c


# --- JSON ------------------------------------------------------------------

def _num(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {x}")
    return format(x, ".17g")


def dumps(obj) -> str:
    """Deterministic compact JSON with 17 significant digits for floats."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(g: Graphic) -> dict:
    loops = []
    for lp in g.loops:
        arcs = [{"label": a.label, "gray_side": a.gray_side, "points": [[float(p[0]), float(p[1])] for p in a.points]}
                for a in lp.arcs]
        feats = []
        for ft in lp.features:
            feats.append({
                "kind": ft.kind,
                "position": [float(ft.position[0]), float(ft.position[1])],
                "convexity": ft.convexity,
                "tip_direction": None if ft.tip_direction is None else [float(x) for x in ft.tip_direction],
                "branch_labels": None if ft.branch_labels is None else {"left": ft.branch_labels[0], "right": ft.branch_labels[1]},
                "slope_sign": ft.slope_sign,
            })
        loops.append({"arcs": arcs, "features": feats})
    crossings = [{"position": [float(c.position[0]), float(c.position[1])], "angle": float(c.angle),
                  "refs": [list(r) for r in c.refs]} for c in g.crossings]
    return {"version": 1, "loops": loops, "crossings": crossings}


def serialize(g: Graphic) -> bytes:
    return (dumps(to_json(g)) + "\n").encode("utf-8")


_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_LABEL = {"enum": ["d", "i"]}
SCHEMA = {
    "type": "object",
    "required": ["version", "loops", "crossings"],
    "properties": {
        "version": {"const": 1},
        "loops": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["arcs", "features"],
                "properties": {
                    "arcs": {"type": "array", "minItems": 1, "items": {
                        "type": "object",
                        "required": ["label", "gray_side", "points"],
                        "properties": {
                            "label": _LABEL,
                            "gray_side": {"enum": ["left", "right", None]},
                            "points": {"type": "array", "minItems": 2, "items": _PAIR},
                        },
                    }},
                    "features": {"type": "array", "minItems": 1, "items": {
                        "type": "object",
                        "required": ["kind", "position", "convexity", "tip_direction", "branch_labels", "slope_sign"],
                        "properties": {
                            "kind": {"enum": list(KINDS)},
                            "position": _PAIR,
                            "convexity": {"enum": list(CONVEXITIES)},
                            "tip_direction": {"oneOf": [{"type": "null"}, _PAIR]},
                            "branch_labels": {"oneOf": [{"type": "null"}, {
                                "type": "object", "required": ["left", "right"],
                                "properties": {"left": _LABEL, "right": _LABEL}}]},
                            "slope_sign": {"enum": list(SLOPES)},
                        },
                    }},
                },
            },
        },
        "crossings": {"type": "array", "items": {
            "type": "object",
            "required": ["position", "angle"],
            "properties": {"position": _PAIR, "angle": {"type": "number"},
                           "refs": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}},
        }},
    },
}


def _pointer(path):
    return "".join(f"/{p}" for p in path)


def from_json(data) -> Graphic:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message, _pointer(exc.absolute_path)) from None
    loops = []
    for li, lp in enumerate(data["loops"]):
        feats = []
        for ft in lp["features"]:
            bl = ft["branch_labels"]
            feats.append(Feature(
                ft["kind"], (float(ft["position"][0]), float(ft["position"][1])), ft["convexity"],
                None if ft["tip_direction"] is None else (float(ft["tip_direction"][0]), float(ft["tip_direction"][1])),
                None if bl is None else (bl["left"], bl["right"]), ft["slope_sign"]))
        arcs = [Arc(a["label"], a["gray_side"], np.array(a["points"], dtype=float)) for a in lp["arcs"]]
        if len(arcs) != len(feats):
            raise SchemaError(f"{len(feats)} features but {len(arcs)} arcs", f"/loops/{li}")
        loops.append(Loop(feats, arcs))
    crossings = [Crossing((float(c["position"][0]), float(c["position"][1])), float(c["angle"]),
                          tuple(tuple(r) for r in c.get("refs", []))) for c in data["crossings"]]
    return Graphic(loops, crossings)


def deserialize(raw) -> Graphic:
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg} at char {exc.pos}", "") from None
    return from_json(data)


def with_features(loop: Loop, features) -> Loop:
    return replace(loop, features=list(features))
