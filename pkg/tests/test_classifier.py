import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from rsgraphic.assemble import assemble
from rsgraphic.classifier import (HORIZONTAL_TABLE, VERTICAL_TABLE, NotHorizontal, NotVertical,
                                  absolute_gray_horizontal, absolute_gray_vertical, classification_report,
                                  graphic_profile, index_of_horizontal, index_of_vertical, indexed_features)
from rsgraphic.graphic import reflect
from rsgraphic.morse import ProfileInvalid
from rsgraphic.synthetic import ParametricCurve, Placement, circle_graphic, ellipse, lips, nested_graphic, random_graphic


def shaded_outside(r=1.0):
    """Counter-clockwise definite circle with the gray side outside."""
    return ParametricCurve(lambda u: r * np.array([np.cos(u), np.sin(u)]),
                           lambda u: r * np.array([-np.sin(u), np.cos(u)]),
                           lambda u: "definite", lambda u: "right", samples=128)


def feature_at(g, kind, where):
    """(loop, index) of the feature of ``kind`` extremal in the given direction."""
    key = {"bottom": lambda ft: ft.g, "top": lambda ft: -ft.g, "left": lambda ft: ft.f, "right": lambda ft: -ft.f}[where]
    items = [(li, k, ft) for li, lp in enumerate(g.loops) for k, ft in enumerate(lp.features) if ft.kind == kind]
    li, k, _ = min(items, key=lambda t: key(t[2]))
    return g.loops[li], k


def test_definite_down_gray_above_is_minimum():
    assert index_of_horizontal(*feature_at(circle_graphic(), "horizontal", "bottom")) == 0
    assert index_of_horizontal(*feature_at(circle_graphic(), "horizontal", "top")) == 3


def test_gray_outside_gives_middle_indices():
    g = assemble([shaded_outside()])
    assert index_of_horizontal(*feature_at(g, "horizontal", "bottom")) == 2
    assert index_of_horizontal(*feature_at(g, "horizontal", "top")) == 1
    assert index_of_vertical(*feature_at(g, "vertical", "left")) == 2
    assert index_of_vertical(*feature_at(g, "vertical", "right")) == 1


def test_indefinite_extrema():
    g = assemble([ellipse(1.0, 1.0, "indefinite")])
    assert index_of_horizontal(*feature_at(g, "horizontal", "bottom")) == 1
    assert index_of_horizontal(*feature_at(g, "horizontal", "top")) == 2
    assert index_of_vertical(*feature_at(g, "vertical", "left")) == 1
    assert index_of_vertical(*feature_at(g, "vertical", "right")) == 2


def test_definite_vertical_extrema():
    g = circle_graphic()
    assert index_of_vertical(*feature_at(g, "vertical", "left")) == 0
    assert index_of_vertical(*feature_at(g, "vertical", "right")) == 3


def test_table_entries():
    assert HORIZONTAL_TABLE[("d", "down", "above")] == 0
    assert HORIZONTAL_TABLE[("i", "up", None)] == 2
    assert VERTICAL_TABLE[("d", "left", "right")] == 0
    assert VERTICAL_TABLE[("i", "left", None)] == 1
    # the vertical table is the horizontal one turned by 90 degrees
    turn = {"down": "left", "up": "right", "above": "right", "below": "left", None: None}
    for (lab, conv, side), idx in HORIZONTAL_TABLE.items():
        assert VERTICAL_TABLE[(lab, turn[conv], turn[side])] == idx


def test_horizontal_cusp_indefinite_above():
    g = assemble([lips(0.5, upper="indefinite")])
    cusps = [(lp, k) for lp in g.loops for k, ft in enumerate(lp.features) if ft.kind == "cusp"]
    assert len(cusps) == 2
    assert all(lp.features[k].slope_sign == "zero" for lp, k in cusps)
    assert [index_of_horizontal(lp, k) for lp, k in cusps] == [1, 1]
    g = assemble([lips(0.5, upper="definite")])
    assert [index_of_horizontal(lp, k) for lp in g.loops for k, ft in enumerate(lp.features) if ft.kind == "cusp"] == [2, 2]


@pytest.mark.parametrize("angle, expected", [(-math.pi / 2, 1), (math.pi / 2, 2)])
def test_vertical_cusp(angle, expected):
    # turning the lips by -90 degrees puts the indefinite (upper) branch on the right
    g = assemble([lips(0.5, upper="indefinite", placement=Placement(angle=angle))])
    cusps = [(lp, k) for lp in g.loops for k, ft in enumerate(lp.features) if ft.kind == "cusp"]
    assert all(lp.features[k].slope_sign == "infinite" for lp, k in cusps)
    assert {index_of_vertical(lp, k) for lp, k in cusps} == {expected}


def test_absolute_gray_conversion():
    assert absolute_gray_horizontal("left", moving_right=True) == "above"
    assert absolute_gray_horizontal("left", moving_right=False) == "below"
    assert absolute_gray_horizontal("right", moving_right=True) == "below"
    assert absolute_gray_vertical("left", moving_up=True) == "left"
    assert absolute_gray_vertical("right", moving_up=True) == "right"
    assert absolute_gray_vertical("left", moving_up=False) == "right"


def test_kind_checks():
    lp = circle_graphic().loops[0]
    k_h = next(k for k, ft in enumerate(lp.features) if ft.kind == "horizontal")
    k_v = next(k for k, ft in enumerate(lp.features) if ft.kind == "vertical")
    with pytest.raises(NotHorizontal):
        index_of_horizontal(lp, k_v)
    with pytest.raises(NotVertical):
        index_of_vertical(lp, k_h)


def test_circle_profiles():
    pf, pg = graphic_profile(circle_graphic())
    assert pf.counts == pg.counts == (1, 0, 0, 1)
    assert pf.genus == pg.genus == 0


def test_nested_profile():
    pf, pg = graphic_profile(nested_graphic())
    assert pg.counts == (1, 1, 1, 1) and pg.genus == 1


def test_two_minima_violate_standing_assumption():
    g = assemble([ellipse(1, 1, placement=Placement(center=(-3, 0))), ellipse(1, 1, placement=Placement(center=(3, 0.5)))])
    with pytest.raises(ProfileInvalid):
        graphic_profile(g)
    _, pg = graphic_profile(g, require_unique_extrema=False)
    assert pg.counts == (2, 0, 0, 2) and not pg.extrema_unique


def test_report_layout():
    rep = classification_report(nested_graphic())
    assert rep["G"]["counts"] == [1, 1, 1, 1]
    assert {f["function"] for f in rep["features"]} == {"F", "G"}


graphics = st.integers(0, 2**32 - 1).map(lambda s: random_graphic(np.random.default_rng(s), samples=64))


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(graphics)
def test_reflection_covariance(g):
    a = {(it.loop, it.position_in_loop): it for it in indexed_features(g)}
    b = {(it.loop, it.position_in_loop): it for it in indexed_features(reflect(g))}
    assert a.keys() == b.keys()
    for key, it in a.items():
        assert b[key].index == (3 - it.index if it.function == "G" else it.index)
    for p in graphic_profile(g):
        c = p.counts
        assert c[0] - c[1] + c[2] - c[3] == 0
