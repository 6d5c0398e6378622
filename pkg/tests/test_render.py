import re
from pathlib import Path

from rsgraphic.graphic import deserialize
from rsgraphic.plotting import save_png
from rsgraphic.render import event_trace_render, render_svg
from rsgraphic.sweep import sweep
from rsgraphic.synthetic import circle_graphic, nested_graphic

DATA = Path(__file__).parent / "data"


def test_circle_golden_file():
    g = deserialize((DATA / "circle.json").read_bytes())
    svg = event_trace_render(sweep(g, "up"), g)
    assert svg == (DATA / "circle_up.svg").read_text()


def test_circle_markers():
    g = circle_graphic()
    svg = render_svg(g, sweep(g, "up"))
    assert len(re.findall(r'<g class="event ', svg)) == 4
    assert len(re.findall(r'<path class="arc-d"', svg)) == 4
    assert "stroke-dasharray" not in svg


def test_nested_effect_markers():
    g = nested_graphic()
    svg = render_svg(g, sweep(g, "up"))
    assert len(re.findall(r'class="event stabilization"', svg)) == 1
    assert len(re.findall(r'class="event destabilization"', svg)) == 1
    assert len(set(re.findall(r'data-loop="(\d+)"', svg))) == 2
    assert "stroke-dasharray" in svg


def test_identical_input_identical_output():
    a, b = nested_graphic(), nested_graphic()
    assert render_svg(a, sweep(a, "down"), "t") == render_svg(b, sweep(b, "down"), "t")


def test_png(tmp_path):
    g = nested_graphic()
    out = tmp_path / "plot.png"
    save_png(g, out, sweep(g, "up"))
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
