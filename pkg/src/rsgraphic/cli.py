"""``rsgraphic trace|validate|classify|sweep|render``.

Exit codes: 0 ok, 1 validation violations or a broken internal invariant, 2 bad input
(parse, schema, missing file), 3 Morse failure, 4 stability failure, 5 trace failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from .classifier import DegenerateFeature, NotHorizontal, NotVertical, classification_report
from .expr import ExpressionError
from .graphic import SchemaError, deserialize, dumps, serialize, validate
from .manifold import RetractDiverged
from .morse import MorseError
from .pipeline import analyze, load_problem, trace_pair
from .render import render_svg
from .sweep import VARIANTS, AssumptionViolated, BoundViolation, report_from_json
from .tracer import FeatureTooClose, IndefiniteBoundary, NotStable, TraceError, TypeTwoDetected

EXIT_OK, EXIT_VIOLATIONS, EXIT_INPUT, EXIT_MORSE, EXIT_STABILITY, EXIT_TRACE = 0, 1, 2, 3, 4, 5

DEFAULTS = {
    "manifold": "s3",
    "constraint": None,
    "level": 1.0,
    "F": None,
    "G": None,
    "step": 2e-3,
    "seeds": 4096,
    "morse_seeds": 4096,
    "graphic": "graphic.json",
    "log": "trace.log",
}

MANIFEST_SCHEMA = {
    "type": "object",
    "properties": {
        "manifold": {"oneOf": [
            {"type": "string"},
            {"type": "object", "required": ["constraint"],
             "properties": {"constraint": {"type": "string"}, "level": {"type": "number"}},
             "additionalProperties": False},
        ]},
        "F": {"type": "string"},
        "G": {"type": "string"},
        "tracer": {"type": "object", "properties": {
            "step": {"type": "number", "exclusiveMinimum": 0},
            "seeds": {"type": "integer", "minimum": 1},
            "morse_seeds": {"type": "integer", "minimum": 1},
        }, "additionalProperties": False},
        "outputs": {"type": "object", "properties": {
            "graphic": {"type": "string"}, "log": {"type": "string"},
        }, "additionalProperties": False},
    },
    "additionalProperties": False,
}


class InputError(Exception):
    pass


def read_manifest(path):
    """Flatten a manifest into the keys of ``DEFAULTS``."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest is not JSON: {exc.msg} at char {exc.pos}") from None
    try:
        jsonschema.validate(data, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "".join(f"/{p}" for p in exc.absolute_path)
        raise InputError(f"manifest {where or '/'}: {exc.message}") from None
    out = {}
    man = data.get("manifold")
    if isinstance(man, str):
        out["manifold"] = man
    elif isinstance(man, dict):
        out["constraint"] = man["constraint"]
        out["level"] = man.get("level", 1.0)
    for key in ("F", "G"):
        if key in data:
            out[key] = data[key]
    out.update(data.get("tracer", {}))
    out.update(data.get("outputs", {}))
    return out


def resolve(args):
    """Flag > manifest > default."""
    cfg = dict(DEFAULTS)
    if getattr(args, "manifest", None):
        cfg.update(read_manifest(args.manifest))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _load_graphic(path):
    try:
        return deserialize(Path(path).read_bytes())
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except SchemaError as exc:
        raise InputError(f"{path}: schema error at {exc.pointer or '/'}: {exc}") from None


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if isinstance(text, bytes):
        Path(path).write_bytes(text)
    else:
        Path(path).write_text(text)


def cmd_trace(args):
    cfg = resolve(args)
    if not cfg["F"] or not cfg["G"]:
        raise InputError("both F and G are required (--f/--g or the manifest)")
    try:
        problem = load_problem(cfg["F"], cfg["G"], cfg["manifold"], cfg["constraint"], cfg["level"])
    except (ExpressionError, KeyError) as exc:
        raise InputError(str(exc).strip("'\"")) from None
    log = []
    try:
        result = trace_pair(problem, cfg["step"], cfg["seeds"], cfg["morse_seeds"])
    except Exception as exc:
        log.append(f"failed: {type(exc).__name__}: {exc}")
        _write(cfg["log"], "\n".join(log) + "\n")
        raise
    _write(cfg["log"], "\n".join(result.log) + "\n")
    if result.mismatches:
        for c in result.mismatches:
            print("index mismatch: " + c.describe(), file=sys.stderr)
        return EXIT_STABILITY
    _write(cfg["graphic"], serialize(result.graphic))
    print(f"{cfg['graphic']}: {len(result.graphic.loops)} loop(s), {len(result.graphic.cusps())} cusp(s)")
    return EXIT_OK


def cmd_validate(args):
    g = _load_graphic(args.graphic)
    violations = validate(g)
    for v in violations:
        print(dumps(v.to_json()))
    return EXIT_VIOLATIONS if violations else EXIT_OK


def _emit(obj, path):
    text = dumps(obj) + "\n"
    if path:
        _write(path, text)
    else:
        sys.stdout.write(text)


def cmd_classify(args):
    g = _load_graphic(args.graphic)
    _emit(classification_report(g, require_unique_extrema=args.require_unique_extrema), args.output)
    return EXIT_OK


def cmd_sweep(args):
    g = _load_graphic(args.graphic)
    variants = {"all": VARIANTS, "reflected": VARIANTS[2:]}.get(args.variant, (args.variant,))
    _emit(analyze(g, variants, args.allow_multiple_extrema), args.output)
    return EXIT_OK


def cmd_render(args):
    g = _load_graphic(args.graphic)
    report = None
    if args.report:
        try:
            data = json.loads(Path(args.report).read_text())
        except FileNotFoundError:
            raise InputError(f"file not found: {args.report}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.report}: not JSON ({exc.msg})") from None
        chosen = [r for r in data.get("reports", []) if r["variant"] == args.variant]
        if not chosen:
            raise InputError(f"{args.report} has no {args.variant!r} scan")
        report = report_from_json(chosen[0])
    _write(args.output, render_svg(g, report, args.title))
    if args.png:
        from .plotting import save_png
        save_png(g, args.png, report)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="rsgraphic", description="Graphics of Morse function pairs and sweep bounds.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("trace", help="trace the graphic of F x G")
    t.add_argument("--manifest", help="JSON manifest; flags override its values")
    t.add_argument("--manifold", help="named manifold (s3)")
    t.add_argument("--constraint", help="constraint expression C; M = {C = level}")
    t.add_argument("--level", type=float)
    t.add_argument("--f", dest="F", help="expression for F")
    t.add_argument("--g", dest="G", help="expression for G")
    t.add_argument("--step", type=float)
    t.add_argument("--seeds", type=int)
    t.add_argument("--morse-seeds", dest="morse_seeds", type=int)
    t.add_argument("-o", "--output", dest="graphic", help="graphic file (default graphic.json)")
    t.add_argument("--log", help="trace log (default trace.log)")
    t.set_defaults(func=cmd_trace)

    v = sub.add_parser("validate", help="check a graphic file")
    v.add_argument("graphic")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("classify", help="Morse indices at horizontal and vertical points")
    c.add_argument("graphic")
    c.add_argument("--require-unique-extrema", action="store_true",
                   help="exit 3 unless F and G each have one minimum and one maximum")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("sweep", help="scan events and distance bounds")
    s.add_argument("graphic")
    s.add_argument("--variant", default="all", choices=("all", "reflected") + VARIANTS)
    s.add_argument("--allow-multiple-extrema", action="store_true")
    s.add_argument("-o", "--output", default="report.json")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("render", help="SVG drawing, optionally with scan events")
    r.add_argument("graphic")
    r.add_argument("report", nargs="?")
    r.add_argument("--variant", default="up", choices=VARIANTS)
    r.add_argument("--title")
    r.add_argument("-o", "--output", default="out.svg")
    r.add_argument("--png", help="also write a PNG plot")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MorseError, AssumptionViolated, DegenerateFeature, NotHorizontal, NotVertical) as exc:
        print(f"morse failure: {exc}", file=sys.stderr)
        return EXIT_MORSE
    except NotStable as exc:
        print(f"not stable: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except (TraceError, FeatureTooClose, TypeTwoDetected, IndefiniteBoundary, RetractDiverged) as exc:
        print(f"trace failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except BoundViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_VIOLATIONS


if __name__ == "__main__":
    sys.exit(main())
