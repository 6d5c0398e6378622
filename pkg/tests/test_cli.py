import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rsgraphic.assemble import assemble
from rsgraphic.cli import main
from rsgraphic.graphic import deserialize, dumps, serialize, validate
from rsgraphic.pipeline import analyze
from rsgraphic.synthetic import Placement, deltoid, ellipse, nested_graphic, random_graphic

DATA = Path(__file__).parent / "data"


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def traced_circle(tmp_path_factory):
    d = tmp_path_factory.mktemp("circle")
    code = run("trace", "--manifold", "s3", "--f", "x1", "--g", "x2", "-o", d / "graphic.json", "--log", d / "trace.log")
    assert code == 0
    return d


def test_trace_circle(traced_circle):
    g = deserialize((traced_circle / "graphic.json").read_bytes())
    assert len(g.loops) == 1
    log = (traced_circle / "trace.log").read_text()
    assert "loop 1" in log and "MISMATCH" not in log


def test_degenerate_pair_exit_code(tmp_path):
    assert run("trace", "--f", "x1", "--g", "x1", "-o", tmp_path / "g.json", "--log", tmp_path / "t.log") == 4
    assert not (tmp_path / "g.json").exists()


def test_bad_expression_in_manifest(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"F": "x1 + * x2", "G": "x2"}))
    assert run("trace", "--manifest", m, "-o", tmp_path / "g.json", "--log", tmp_path / "t.log") == 2
    assert "offset 5" in capsys.readouterr().err


def test_manifest_schema_error(tmp_path):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"F": "x1", "G": "x2", "tracer": {"step": "big"}}))
    assert run("trace", "--manifest", m) == 2
    assert run("trace", "--manifest", tmp_path / "missing.json") == 2


def test_flag_overrides_manifest(tmp_path):
    # the manifest pair is degenerate; the flag replaces G and the trace succeeds
    m = tmp_path / "m.json"
    out = tmp_path / "from_manifest.json"
    m.write_text(json.dumps({"manifold": "s3", "F": "x1", "G": "x1", "tracer": {"step": 0.004},
                             "outputs": {"graphic": str(out), "log": str(tmp_path / "t.log")}}))
    assert run("trace", "--manifest", m, "--g", "x2") == 0
    assert "step 0.004" in (tmp_path / "t.log").read_text()
    assert len(deserialize(out.read_bytes()).loops) == 1


def test_validate(traced_circle, tmp_path, capsys):
    assert run("validate", traced_circle / "graphic.json") == 0
    bad = tmp_path / "deltoid.json"
    bad.write_bytes(serialize(assemble([deltoid()])))
    assert run("validate", bad) == 1
    assert '"rule":"V1"' in capsys.readouterr().out


def test_validate_matches_library(tmp_path, capsys):
    g = random_graphic(np.random.default_rng(5), require_valid=False)
    path = tmp_path / "fuzz.json"
    path.write_bytes(serialize(g))
    code = run("validate", path)
    printed = [line for line in capsys.readouterr().out.splitlines() if line]
    assert printed == [dumps(v.to_json()) for v in validate(g)]
    assert code == (1 if printed else 0)


def test_sweep_circle(traced_circle, tmp_path):
    out = tmp_path / "report.json"
    assert run("sweep", traced_circle / "graphic.json", "-o", out) == 0
    rep = json.loads(out.read_text())
    b = rep["bounds"]
    assert (b["d_plus"], b["d_minus"], b["surface"], b["theorem1"]) == (0, 0, 0, "0/1")
    assert [r["variant"] for r in rep["reports"]] == ["up", "down", "reflected_up", "reflected_down"]


def test_sweep_nested(tmp_path):
    g = tmp_path / "nested.json"
    g.write_bytes(serialize(nested_graphic()))
    out = tmp_path / "report.json"
    assert run("sweep", g, "--variant", "up", "-o", out) == 0
    rep = json.loads(out.read_text())
    assert (rep["reports"][0]["stab"], rep["reports"][0]["destab"]) == (1, 1)
    assert rep["bounds"] is None


def test_sweep_missing_file(tmp_path):
    assert run("sweep", tmp_path / "nope.json") == 2


def test_multiple_extrema_flag(tmp_path):
    g = tmp_path / "two.json"
    g.write_bytes(serialize(assemble([ellipse(1, 1, placement=Placement(center=(-3, 0))),
                                      ellipse(1, 1, placement=Placement(center=(3, 0.5)))])))
    assert run("sweep", g, "-o", tmp_path / "r.json") == 3
    assert run("sweep", g, "--allow-multiple-extrema", "-o", tmp_path / "r.json") == 0
    assert json.loads((tmp_path / "r.json").read_text())["bounds"] is None


def test_classify(tmp_path):
    g = tmp_path / "nested.json"
    g.write_bytes(serialize(nested_graphic()))
    out = tmp_path / "c.json"
    assert run("classify", g, "-o", out) == 0
    assert json.loads(out.read_text())["G"]["genus"] == 1


def test_render_golden(tmp_path):
    report = tmp_path / "r.json"
    assert run("sweep", DATA / "circle.json", "-o", report) == 0
    out = tmp_path / "out.svg"
    assert run("render", DATA / "circle.json", report, "-o", out) == 0
    assert out.read_text() == (DATA / "circle_up.svg").read_text()


def test_render_empty_loops(tmp_path, capsys):
    g = tmp_path / "empty.json"
    g.write_text('{"version":1,"loops":[],"crossings":[]}')
    assert run("render", g, "-o", tmp_path / "o.svg") == 2
    assert "/loops" in capsys.readouterr().err


def test_trace_then_sweep_matches_library(traced_circle, tmp_path):
    out = tmp_path / "report.json"
    assert run("sweep", traced_circle / "graphic.json", "-o", out) == 0
    g = deserialize((traced_circle / "graphic.json").read_bytes())
    assert out.read_text() == dumps(analyze(g)) + "\n"


def test_thread_cap_does_not_change_output(traced_circle, tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    monkeypatch.setenv("RSGRAPHIC_THREADS", "1")
    assert run("sweep", traced_circle / "graphic.json", "-o", a) == 0
    monkeypatch.setenv("RSGRAPHIC_THREADS", "4")
    assert run("sweep", traced_circle / "graphic.json", "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rsgraphic.cli", "validate", str(DATA / "circle.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0
