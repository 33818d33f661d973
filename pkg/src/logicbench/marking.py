"""Grade an exercise file against a manifest of required items.

The grade is an interval percentage: the lower bound counts items proven
satisfied, the upper bound additionally counts items not yet disproven.
A manifest is line oriented:

    name: lists
    item POS_GROUND alldifferent/1
    item POS_MOST_GENERAL alldifferent/1
    item NEG alldifferent/1 2

with an optional integer weight (default 1) per item.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .feedback import (AssertionRecord, CheckReport, INCONCLUSIVE, OK)
from .parser import AssertionKind, SourceFile
from .terms import is_ground, pred_key, Compound, Var

ITEM_KINDS = ("POS_GROUND", "POS_MOST_GENERAL", "NEG", "NONTERM", "TERM",
              "DEFINED", "ALL_PASS")

SATISFIED = "SATISFIED"
VIOLATED = "VIOLATED"
INCONCLUSIVE_ITEM = "INCONCLUSIVE"
ABSENT = "ABSENT"


@dataclass(frozen=True)
class ManifestItem:
    kind: str
    predicate: "tuple[str, int]"
    weight: int = 1


@dataclass(frozen=True)
class ExerciseManifest:
    name: str
    items: "tuple[ManifestItem, ...]"

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("a manifest needs at least one item")


class ManifestError(ValueError):
    pass


def parse_manifest(text: str) -> ExerciseManifest:
    name = ""
    items: list[ManifestItem] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("name:"):
            name = line[len("name:"):].strip()
            continue
        parts = line.split()
        if parts[0] != "item" or len(parts) not in (3, 4):
            raise ManifestError(f"line {lineno}: expected 'item KIND functor/arity [weight]'")
        kind = parts[1]
        if kind not in ITEM_KINDS:
            raise ManifestError(f"line {lineno}: unknown item kind {kind!r}")
        if "/" not in parts[2]:
            raise ManifestError(f"line {lineno}: predicate must be functor/arity")
        functor, _, arity = parts[2].rpartition("/")
        if not arity.isdigit():
            raise ManifestError(f"line {lineno}: bad arity in {parts[2]!r}")
        weight = 1
        if len(parts) == 4:
            if not parts[3].isdigit() or int(parts[3]) < 1:
                raise ManifestError(f"line {lineno}: weight must be a positive integer")
            weight = int(parts[3])
        items.append(ManifestItem(kind, (functor, int(arity)), weight))
    return ExerciseManifest(name, tuple(items))


@dataclass(frozen=True)
class MarkInterval:
    low_percent: int
    high_percent: int
    states: "tuple[tuple[ManifestItem, str], ...]"

    def satisfied_count(self) -> int:
        return sum(1 for _, s in self.states if s == SATISFIED)


def _mentions(assertion, predicate) -> bool:
    return any(pred_key(g) == predicate for g in assertion.goals)


def _most_general_goal(assertion, predicate) -> bool:
    if len(assertion.goals) != 1:
        return False
    g = assertion.goals[0]
    if pred_key(g) != predicate:
        return False
    if type(g) is not Compound:
        return True
    args = g.args
    return (all(type(a) is Var for a in args)
            and len({a.id for a in args}) == len(args))


def _aggregate(states) -> str:
    states = list(states)
    if not states:
        return ABSENT
    if SATISFIED in states:
        return SATISFIED
    if INCONCLUSIVE_ITEM in states:
        return INCONCLUSIVE_ITEM
    return VIOLATED


def _record_state(record: AssertionRecord, needs_code: bool) -> str:
    if record.status == OK:
        if record.ref_verdict is not None and record.ref_verdict.is_unspecified \
                and not needs_code:
            return INCONCLUSIVE_ITEM
        if needs_code and not record.code_ran:
            return INCONCLUSIVE_ITEM
        return SATISFIED
    if record.status == INCONCLUSIVE:
        return INCONCLUSIVE_ITEM
    return VIOLATED


def _item_state(item: ManifestItem, file: SourceFile, report: CheckReport) -> str:
    if item.kind == "DEFINED":
        program = file.program()
        return SATISFIED if item.predicate in program.predicates() else ABSENT
    if item.kind == "ALL_PASS":
        if not report.records:
            return ABSENT
        statuses = [r.status for r in report.records]
        if all(s == OK for s in statuses):
            return SATISFIED
        if any(s == INCONCLUSIVE for s in statuses):
            return INCONCLUSIVE_ITEM
        return VIOLATED

    matching: list[str] = []
    for r in report.records:
        a = r.assertion
        if not _mentions(a, item.predicate):
            continue
        if item.kind == "POS_GROUND":
            if a.kind != AssertionKind.POS or not all(is_ground(g) for g in a.goals):
                continue
            matching.append(_record_state(r, needs_code=False))
        elif item.kind == "POS_MOST_GENERAL":
            if a.kind != AssertionKind.POS or not _most_general_goal(a, item.predicate):
                continue
            matching.append(_record_state(r, needs_code=False))
        elif item.kind == "NEG":
            if a.kind != AssertionKind.NEG or a.ends_in_false():
                continue
            matching.append(_record_state(r, needs_code=False))
        elif item.kind == "TERM":
            if a.kind != AssertionKind.NEG or not a.ends_in_false():
                continue
            matching.append(_record_state(r, needs_code=True))
        elif item.kind == "NONTERM":
            if a.kind != AssertionKind.NEGFAIR or not a.ends_in_false():
                continue
            matching.append(_record_state(r, needs_code=True))
    return _aggregate(matching)


def mark_exercise(file: SourceFile, report: CheckReport,
                  manifest: ExerciseManifest) -> MarkInterval:
    """Classify each manifest item and compute the interval percentage.

    low = floor(100 * satisfied / total); high = ceil(100 * (satisfied +
    inconclusive) / total).  Absent and violated items count in neither
    numerator.  Items are weight-averaged.
    """
    states = tuple((item, _item_state(item, file, report))
                   for item in manifest.items)
    total = sum(item.weight for item in manifest.items)
    sat = sum(item.weight for item, s in states if s == SATISFIED)
    inc = sum(item.weight for item, s in states if s == INCONCLUSIVE_ITEM)
    low = math.floor(100 * sat / total)
    high = math.ceil(100 * (sat + inc) / total)
    return MarkInterval(low, high, states)
