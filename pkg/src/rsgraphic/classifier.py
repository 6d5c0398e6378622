"""Read Morse indices of F and G off a graphic.

Horizontal points of the graphic correspond to critical points of G and
vertical points to critical points of F. The index is determined by the fold
type, the convexity and the side on which the image lies (the gray side).
"""
from __future__ import annotations

from dataclasses import dataclass

from .graphic import Feature, Graphic, Loop
from .morse import MorseProfile, ProfileInvalid, profile_from_counts


class NotHorizontal(ValueError):
    pass


class NotVertical(ValueError):
    pass


class DegenerateFeature(ValueError):
    """A horizontal or vertical inflection: the function is not Morse there."""


# (label, convexity, gray side in absolute terms) -> index
HORIZONTAL_TABLE = {
    ("d", "down", "above"): 0,
    ("d", "down", "below"): 2,
    ("d", "up", "above"): 1,
    ("d", "up", "below"): 3,
    ("i", "down", None): 1,
    ("i", "up", None): 2,
}
VERTICAL_TABLE = {
    ("d", "left", "right"): 0,
    ("d", "left", "left"): 2,
    ("d", "right", "right"): 1,
    ("d", "right", "left"): 3,
    ("i", "left", None): 1,
    ("i", "right", None): 2,
}


@dataclass(frozen=True)
class IndexedFeature:
    loop: int
    position_in_loop: int
    feature: Feature
    function: str
    index: int

    def to_json(self):
        return {"loop": self.loop, "feature": self.position_in_loop, "kind": self.feature.kind,
                "position": list(self.feature.position), "function": self.function, "index": self.index}


def absolute_gray_horizontal(gray_side, moving_right):
    """Traversal-relative gray side to above/below: moving +f, left is above."""
    left_is_above = moving_right
    return "above" if (gray_side == "left") == left_is_above else "below"


def absolute_gray_vertical(gray_side, moving_up):
    """Traversal-relative gray side to the f side: moving +g, left is -f."""
    left_is_left = moving_up
    return "left" if (gray_side == "left") == left_is_left else "right"


def _context(loop: Loop, k: int):
    n = len(loop.features)
    prev, nxt = loop.arcs[(k - 1) % n], loop.arcs[k]
    return prev, nxt, prev.points[-2], nxt.points[1]


def index_of_horizontal(loop: Loop, k: int) -> int:
    ft = loop.features[k]
    if ft.kind == "cusp" and ft.slope_sign == "zero":
        left, right = ft.branch_labels
        upper = left if ft.tip_direction[0] > 0 else right
        return 1 if upper == "i" else 2
    if ft.kind != "horizontal":
        raise NotHorizontal(f"feature {k} is a {ft.kind} point")
    if ft.convexity not in ("up", "down"):
        raise DegenerateFeature(f"horizontal point at {ft.position} has no convexity")
    _, arc, p, q = _context(loop, k)
    if arc.label == "i":
        return HORIZONTAL_TABLE[("i", ft.convexity, None)]
    side = absolute_gray_horizontal(arc.gray_side, q[0] > p[0])
    return HORIZONTAL_TABLE[("d", ft.convexity, side)]


def index_of_vertical(loop: Loop, k: int) -> int:
    ft = loop.features[k]
    if ft.kind == "cusp" and ft.slope_sign == "infinite":
        left, right = ft.branch_labels
        rightmost = right if ft.tip_direction[1] > 0 else left
        return 1 if rightmost == "i" else 2
    if ft.kind != "vertical":
        raise NotVertical(f"feature {k} is a {ft.kind} point")
    if ft.convexity not in ("left", "right"):
        raise DegenerateFeature(f"vertical point at {ft.position} has no convexity")
    _, arc, p, q = _context(loop, k)
    if arc.label == "i":
        return VERTICAL_TABLE[("i", ft.convexity, None)]
    side = absolute_gray_vertical(arc.gray_side, q[1] > p[1])
    return VERTICAL_TABLE[("d", ft.convexity, side)]


def indexed_features(g: Graphic):
    out = []
    for li, lp in enumerate(g.loops):
        for k, ft in enumerate(lp.features):
            if ft.kind == "horizontal" or (ft.kind == "cusp" and ft.slope_sign == "zero"):
                out.append(IndexedFeature(li, k, ft, "G", index_of_horizontal(lp, k)))
            elif ft.kind == "vertical" or (ft.kind == "cusp" and ft.slope_sign == "infinite"):
                out.append(IndexedFeature(li, k, ft, "F", index_of_vertical(lp, k)))
    return out


def _counts(items, function):
    c = [0, 0, 0, 0]
    for it in items:
        if it.function == function:
            c[it.index] += 1
    return c


def graphic_profile(g: Graphic, require_unique_extrema=True) -> tuple[MorseProfile, MorseProfile]:
    """Morse profiles ``(F, G)`` read from the vertical and horizontal features."""
    items = indexed_features(g)
    pf = profile_from_counts(_counts(items, "F"))
    pg = profile_from_counts(_counts(items, "G"))
    if require_unique_extrema:
        for name, p in (("F", pf), ("G", pg)):
            if not p.extrema_unique:
                raise ProfileInvalid(f"{name} has index counts {p.counts}; the extrema are not unique")
    return pf, pg


def classification_report(g: Graphic, require_unique_extrema=False):
    items = indexed_features(g)
    pf, pg = graphic_profile(g, require_unique_extrema)
    return {"features": [it.to_json() for it in items], "F": pf.to_json(), "G": pg.to_json()}
