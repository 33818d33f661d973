"""Command-line entry point.

    logicbench check FILE [--annotate] [--in-place]
    logicbench explain FILE:LINE [--annotate] [--in-place]
    logicbench slice FILE:LINE [--kind fail|wrong|loop|intersect]
    logicbench mark FILE --manifest MANIFEST

Common flags: --budget N, --fair-depth N, --per-depth N, --refs DIR,
--no-reference, --json.  Exit codes: 0 no findings, 1 findings, 2 parse or
usage error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

from .diagnosis import (Explanation, PreconditionError,
                        explain_incorrect_negative, explain_incorrect_positive)
from .engine import Budget
from .feedback import (CheckReport, CODE_UNEXPECTED_FAILURE, NONTERMINATION,
                       WRONG_FIRST_ANSWER, annotate_file, check_file)
from .marking import SATISFIED, mark_exercise, parse_manifest, ManifestError
from .parser import (AssertionItem, AssertionKind, MachineItem, ParseError,
                     SourceFile, parse_file, render_file)
from .reference import (ReferenceRegistry, builtin_registry, empty_registry,
                        load_reference_dir, reference_verdict)
from .render import render_conjunction, render_suggestion, suggestion_assertion_text
from .slicer import (ProgramFragment, SlicerPreconditionError, active_lines,
                     intersect_fragments, render_fragment, slice_incorrectness,
                     slice_insufficiency, slice_nontermination, total_lines)

JSON_SCHEMA_VERSION = "v1"


@dataclass
class CliConfig:
    budget: Budget
    registry: ReferenceRegistry
    as_json: bool


class UsageError(Exception):
    pass


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, default=100_000,
                   help="resolution step budget (default 100000)")
    p.add_argument("--fair-depth", type=int, default=64,
                   help="iterative deepening depth limit (default 64)")
    p.add_argument("--per-depth", type=int, default=50_000,
                   help="step budget per deepening pass (default 50000)")
    p.add_argument("--refs", metavar="DIR", default=None,
                   help="directory of reference packs to load")
    p.add_argument("--no-reference", action="store_true",
                   help="drop the built-in reference library")
    p.add_argument("--json", action="store_true", dest="as_json",
                   help="structured output (schema v1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logicbench",
        description="Assertion-driven workbench for pure logic programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="validate assertions and user code")
    p_check.add_argument("file")
    p_check.add_argument("--annotate", action="store_true",
                         help="print the file with feedback lines inserted")
    p_check.add_argument("--in-place", action="store_true",
                         help="with --annotate, rewrite the file")
    _common_flags(p_check)

    p_explain = sub.add_parser("explain", help="explain a wrong assertion")
    p_explain.add_argument("target", metavar="FILE:LINE")
    p_explain.add_argument("--annotate", action="store_true")
    p_explain.add_argument("--in-place", action="store_true")
    _common_flags(p_explain)

    p_slice = sub.add_parser("slice", help="localize an error by slicing")
    p_slice.add_argument("target", metavar="FILE:LINE")
    p_slice.add_argument("--kind", choices=("fail", "wrong", "loop", "intersect"),
                         default=None)
    _common_flags(p_slice)

    p_mark = sub.add_parser("mark", help="grade an exercise file")
    p_mark.add_argument("file")
    p_mark.add_argument("--manifest", required=True)
    _common_flags(p_mark)
    return parser


def _config(args) -> CliConfig:
    if args.budget <= 0 or args.fair_depth <= 0 or args.per_depth <= 0:
        raise UsageError("budget values must be positive")
    budget = Budget(args.budget, args.fair_depth, args.per_depth)
    registry = empty_registry() if args.no_reference else builtin_registry()
    if args.refs:
        registry = load_reference_dir(args.refs, registry)
    return CliConfig(budget, registry, args.as_json)


def _read_file(path: str) -> SourceFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise UsageError(str(err))
    return parse_file(text, path)


def _split_target(target: str):
    path, sep, line = target.rpartition(":")
    if not sep or not line.isdigit():
        raise UsageError(f"expected FILE:LINE, got {target!r}")
    return path, int(line)


def _item_span(item) -> int:
    raw = item.raw
    return raw.count("\n") + (0 if raw.endswith("\n") else 1)


def _assertion_at(sf: SourceFile, line: int):
    for idx, item in enumerate(sf.items):
        if isinstance(item, AssertionItem):
            if item.line <= line < item.line + _item_span(item):
                return idx, item
    raise UsageError(f"{sf.name}:{line} is not an assertion")


def _assertion_lines(annotated: SourceFile):
    lines = []
    line = 1
    for item in annotated.items:
        if isinstance(item, MachineItem):
            line += 1
            continue
        if isinstance(item, AssertionItem):
            lines.append(line)
        line += _item_span(item)
    return lines


# -- check -------------------------------------------------------------------


def cmd_check(args) -> int:
    cfg = _config(args)
    sf = _read_file(args.file)
    report = check_file(sf, cfg.registry, cfg.budget)
    annotated, findings = annotate_file(sf, report)
    if cfg.as_json:
        positions = _assertion_lines(annotated)
        payload = {
            "version": JSON_SCHEMA_VERSION,
            "command": "check",
            "file": sf.name,
            "assertions": [
                {"line": pos, "kind": r.assertion.kind.name,
                 "goals": render_conjunction(r.assertion.goals),
                 "status": r.status, "reason": r.reason}
                for pos, r in zip(positions, report.records)
            ],
            "findings": [{"line": f.line, "status": f.status, "message": f.message}
                         for f in findings],
            "missing": [{"predicate": f"{k[0]}/{k[1]}"} for k, _ in report.missing],
        }
        print(json.dumps(payload, indent=2))
    elif args.annotate:
        text = render_file(annotated)
        if args.in_place:
            with open(args.file, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        for f in findings:
            print(f"{sf.name}:{f.line}: {f.message}")
        ok = sum(1 for r in report.records if r.status == "OK")
        print(f"{len(report.records)} assertions: {ok} ok, {len(findings)} findings")
    return 1 if findings else 0


# -- explain -----------------------------------------------------------------


def cmd_explain(args) -> int:
    cfg = _config(args)
    path, line = _split_target(args.target)
    sf = _read_file(path)
    idx, item = _assertion_at(sf, line)
    assertion = item.assertion
    explanation = _explain_assertion(assertion, cfg)
    if explanation is None or not explanation.stages:
        if cfg.as_json:
            print(json.dumps({"version": JSON_SCHEMA_VERSION, "command": "explain",
                              "file": path, "line": line, "kind": None,
                              "stages": []}, indent=2))
        else:
            print(f"{path}:{line}: nothing to explain")
        return 0

    lines = _explanation_lines(explanation, assertion)
    if cfg.as_json:
        payload = {
            "version": JSON_SCHEMA_VERSION, "command": "explain",
            "file": path, "line": line, "kind": explanation.kind,
            "stages": [
                {"label": st.label,
                 "assertion": suggestion_assertion_text(st.kind, st.equations, st.goals)}
                for st in explanation.stages
            ],
        }
        print(json.dumps(payload, indent=2))
    elif args.annotate:
        machine = tuple(MachineItem(text, 0) for text in lines)
        items = sf.items[:idx + 1] + machine + sf.items[idx + 1:]
        text = render_file(SourceFile(sf.name, items))
        if args.in_place:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        for text in lines:
            print(text)
    return 1


def _explain_assertion(assertion, cfg: CliConfig) -> Optional[Explanation]:
    verdict = reference_verdict(cfg.registry, assertion.goals, cfg.budget)
    try:
        if assertion.kind == AssertionKind.NEG and verdict.is_true:
            return explain_incorrect_negative(assertion.goals, cfg.registry,
                                              cfg.budget)
        if assertion.kind == AssertionKind.POS and verdict.is_false:
            return explain_incorrect_positive(assertion.goals, cfg.registry,
                                              cfg.budget)
    except PreconditionError:
        return None
    return None


def _explanation_lines(explanation: Explanation, assertion):
    lines = []
    if explanation.kind == "SPECIALIZED_POSITIVE":
        lines.append("%@@ % != Should be a positive assertion.")
    else:
        lines.append("%@@ % != Should be a negative assertion.")
    for stage in explanation.stages:
        for fl in render_suggestion(stage.equations, stage.goals, stage.label,
                                    stage.kind):
            lines.append(fl.render())
    return lines


# -- slice -------------------------------------------------------------------

_SLICEABLE = {
    CODE_UNEXPECTED_FAILURE: "fail",
    WRONG_FIRST_ANSWER: "wrong",
    NONTERMINATION: "loop",
}


def cmd_slice(args) -> int:
    cfg = _config(args)
    path, line = _split_target(args.target)
    sf = _read_file(path)
    idx, item = _assertion_at(sf, line)
    report = check_file(sf, cfg.registry, cfg.budget)
    record = next((r for r in report.records if r.item_index == idx), None)
    assert record is not None
    kind = args.kind or _SLICEABLE.get(record.status)
    if kind is None:
        print(f"{path}:{line}: status {record.status}; nothing to slice")
        return 0
    program = sf.program()

    try:
        if kind == "intersect":
            return _slice_intersect(sf, report, program, cfg)
        fragment, extra_lines = _run_slicer(kind, record, program, cfg)
    except SlicerPreconditionError as err:
        raise UsageError(f"{path}:{line}: {err}")

    if cfg.as_json:
        payload = {
            "version": JSON_SCHEMA_VERSION, "command": "slice",
            "file": path, "line": line, "kind": kind,
            "fragments": [_fragment_json(fragment)],
            "intersection": None,
        }
        print(json.dumps(payload, indent=2))
    else:
        for text in extra_lines:
            print(text)
        print(render_fragment(fragment), end="")
    return 1


def _run_slicer(kind: str, record, program, cfg: CliConfig):
    assertion = record.assertion
    if kind == "fail":
        fragment = slice_insufficiency(program, assertion.goals, cfg.budget,
                                       assertion.kind)
        return fragment, ["% Generalized fragment still fails."]
    if kind == "wrong":
        stages, fragment = slice_incorrectness(program, assertion.goals,
                                               record.witness or _empty_subst(),
                                               cfg.registry, cfg.budget)
        lines = []
        if record.witness is not None:
            rendered = render_conjunction(record.witness.apply_all(assertion.goals))
            lines.append(f"%@@ % {rendered}. % Incorrect!")
        for stage in stages:
            lines.append(f"%@@ % {stage.label}")
            lines.append("%@@ " + suggestion_assertion_text(stage.kind, (), stage.goals))
        lines.append("% Specialized fragment still succeeds.")
        return fragment, lines
    if kind == "loop":
        fragment = slice_nontermination(program, assertion.goals, cfg.budget,
                                        assertion.kind)
        return fragment, ["% Fragment does not terminate."]
    raise UsageError(f"unknown slice kind {kind!r}")


def _empty_subst():
    from .terms import Substitution
    return Substitution({})


def _slice_intersect(sf: SourceFile, report: CheckReport, program, cfg: CliConfig) -> int:
    fragments = []
    for record in report.records:
        kind = _SLICEABLE.get(record.status)
        if kind is None:
            continue
        fragment, _ = _run_slicer(kind, record, program, cfg)
        fragments.append(fragment)
    if not fragments:
        print("no sliceable findings in the file")
        return 0
    lines = intersect_fragments(fragments)
    total = total_lines(program)
    if cfg.as_json:
        payload = {
            "version": JSON_SCHEMA_VERSION, "command": "slice",
            "file": sf.name, "line": None, "kind": "intersect",
            "fragments": [_fragment_json(f) for f in fragments],
            "intersection": {
                "active": sorted([list(en) for en in lines]),
                "total": total,
            },
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"{len(lines)} of {total} lines remain suspect:")
        for ci, part, gi in sorted(lines):
            clause = program.clauses[ci]
            if part == "head":
                print(f"  clause {ci + 1} head: {render_conjunction([clause.head])}")
            else:
                print(f"  clause {ci + 1} goal {gi + 1}: "
                      f"{render_conjunction([clause.body[gi]])}")
    return 1


def _fragment_json(fragment: ProgramFragment) -> dict:
    return {
        "query": f"{fragment.query_kind.token} "
                 f"{render_conjunction(fragment.query_goals)}.",
        "marks": [
            {"clause": i, "removed": m.removed, "false_at": m.false_at,
             "deleted": sorted(m.deleted)}
            for i, m in enumerate(fragment.marks)
        ],
        "active": sorted([list(en) for en in active_lines(fragment)]),
        "text": render_fragment(fragment),
    }


# -- mark --------------------------------------------------------------------


def cmd_mark(args) -> int:
    cfg = _config(args)
    sf = _read_file(args.file)
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = parse_manifest(fh.read())
    except OSError as err:
        raise UsageError(str(err))
    except ManifestError as err:
        raise UsageError(str(err))
    report = check_file(sf, cfg.registry, cfg.budget)
    interval = mark_exercise(sf, report, manifest)
    violated = any(s == "VIOLATED" for _, s in interval.states)
    if cfg.as_json:
        payload = {
            "version": JSON_SCHEMA_VERSION, "command": "mark",
            "file": sf.name, "name": manifest.name,
            "low": interval.low_percent, "high": interval.high_percent,
            "items": [
                {"kind": item.kind,
                 "predicate": f"{item.predicate[0]}/{item.predicate[1]}",
                 "weight": item.weight, "state": state}
                for item, state in interval.states
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        k = interval.satisfied_count()
        n = len(interval.states)
        print(f"{interval.low_percent}–{interval.high_percent}% "
              f"({k}/{n} satisfied)")
        for item, state in interval.states:
            pred = f"{item.predicate[0]}/{item.predicate[1]}"
            print(f"  {item.kind} {pred}: {state}")
    return 1 if violated else 0


# -- entry -------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {"check": cmd_check, "explain": cmd_explain,
                "slice": cmd_slice, "mark": cmd_mark}
    try:
        return handlers[args.command](args)
    except (UsageError, ParseError) as err:
        print(f"logicbench: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # internal error contract
        print(f"logicbench: internal error: {err!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
