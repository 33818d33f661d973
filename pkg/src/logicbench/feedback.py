"""Check a source file and weave the results back in as machine lines.

Each assertion passes through three phases.  The reference phase compares
positive and negative assertions with the reference implementations; it
speaks only on decisive verdicts.  The code phase runs the user's program:
positives by depth-first search (escalating to fair search on budget
exhaustion) with the first answer re-judged by the reference, negatives
through the universal-termination check, fair assertions through fair
search and the loop prover.  The definition phase records predicates that
are neither defined by the user nor builtin.

Feedback lines are byte-stable; line references point into the annotated
file so the `explain file:line` and `slice file:line` pointers stay valid
after saving.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .engine import (Budget, BudgetExhausted, DEFAULT_BUDGET, EngineError,
                     Disproven, FiniteFailure, NonTerminating, Proven,
                     Solutions, Terminates, Unknown,
                     check_universal_termination, prove_failure_loopcheck,
                     solve_dfs, solve_fair)
from .parser import (Assertion, AssertionItem, AssertionKind, MachineItem,
                     SourceFile, strip_machine_lines)
from .reference import ReferenceRegistry, reference_verdict
from .terms import (Atom, Compound, Program, Substitution, Term, goals_vars,
                    pred_key)
from .verdicts import Verdict

BUILTIN_KEYS = frozenset({("true", 0), ("false", 0), ("fail", 0),
                          ("=", 2), ("dif", 2)})

OK = "OK"
REF_MISMATCH_NEG = "REF_MISMATCH_NEG"
REF_MISMATCH_POS = "REF_MISMATCH_POS"
CODE_UNEXPECTED_FAILURE = "CODE_UNEXPECTED_FAILURE"
CODE_UNEXPECTED_SUCCESS = "CODE_UNEXPECTED_SUCCESS"
WRONG_FIRST_ANSWER = "WRONG_FIRST_ANSWER"
NONTERMINATION = "NONTERMINATION"
FAIR_UNEXPECTED_SUCCESS = "FAIR_UNEXPECTED_SUCCESS"
FAIR_UNEXPECTED_FAILURE = "FAIR_UNEXPECTED_FAILURE"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class AssertionRecord:
    assertion: Assertion
    item_index: int
    status: str
    ref_verdict: Optional[Verdict] = None
    reason: Optional[str] = None
    witness: Optional[Substitution] = None
    code_ran: bool = False


@dataclass(frozen=True)
class CheckReport:
    file: SourceFile
    records: "tuple[AssertionRecord, ...]"
    missing: "tuple[tuple[tuple[str, int], int], ...]"  # (pred key, anchor item)

    def has_findings(self) -> bool:
        return bool(self.missing) or any(r.status != OK for r in self.records)


def check_file(file: SourceFile, registry: ReferenceRegistry,
               budget: Budget = DEFAULT_BUDGET) -> CheckReport:
    program = file.program()
    user_preds = program.predicates()
    records: list[AssertionRecord] = []
    missing_anchor: dict[tuple[str, int], int] = {}
    for idx, item in enumerate(file.items):
        if not isinstance(item, AssertionItem):
            continue
        a = item.assertion
        for g in a.goals:
            key = pred_key(g)
            if key not in BUILTIN_KEYS and key not in user_preds:
                missing_anchor[key] = idx
        records.append(_check_assertion(a, idx, program, user_preds,
                                        registry, budget))
    missing = tuple(sorted(missing_anchor.items(), key=lambda kv: (kv[1], kv[0])))
    return CheckReport(file, tuple(records), missing)


def _check_assertion(a: Assertion, idx: int, program: Program, user_preds,
                     registry: ReferenceRegistry, budget: Budget) -> AssertionRecord:
    verdict: Optional[Verdict] = None
    if a.kind in (AssertionKind.POS, AssertionKind.NEG):
        verdict = reference_verdict(registry, a.goals, budget)
        if a.kind == AssertionKind.POS and verdict.is_false:
            return AssertionRecord(a, idx, REF_MISMATCH_POS, verdict)
        if a.kind == AssertionKind.NEG and verdict.is_true:
            return AssertionRecord(a, idx, REF_MISMATCH_NEG, verdict)

    non_builtin = {pred_key(g) for g in a.goals} - BUILTIN_KEYS
    if not non_builtin <= user_preds:
        return AssertionRecord(a, idx, OK, verdict)

    try:
        status, reason, witness = _code_phase(a, program, registry, budget)
    except EngineError as err:
        return AssertionRecord(a, idx, INCONCLUSIVE, verdict,
                               reason=str(err), code_ran=True)
    return AssertionRecord(a, idx, status, verdict, reason=reason,
                           witness=witness, code_ran=True)


def _code_phase(a: Assertion, program: Program, registry: ReferenceRegistry,
                budget: Budget):
    if a.kind == AssertionKind.POS:
        return _check_positive(a, program, registry, budget)
    if a.kind == AssertionKind.NEG:
        return _check_negative(a, program, budget)
    if a.kind == AssertionKind.POSFAIR:
        return _check_fair_positive(a, program, budget)
    return _check_fair_negative(a, program, budget)


def _check_positive(a, program, registry, budget):
    out = solve_dfs(program, a.goals, budget, "first")
    if isinstance(out, BudgetExhausted):
        out = solve_fair(program, a.goals, budget)
        if isinstance(out, BudgetExhausted):
            return INCONCLUSIVE, "budget", None
    if isinstance(out, FiniteFailure):
        return CODE_UNEXPECTED_FAILURE, None, None
    answer = out.answers[0]
    grounded = _ground_answer(a.goals, answer.bindings)
    rv = reference_verdict(registry, grounded, budget)
    if rv.is_false:
        return WRONG_FIRST_ANSWER, None, answer.bindings
    return OK, None, answer.bindings


def _check_negative(a, program, budget):
    result = check_universal_termination(program, a.goals, budget)
    if isinstance(result, Terminates):
        if isinstance(result.outcome, Solutions):
            return CODE_UNEXPECTED_SUCCESS, None, None
        return OK, None, None
    if isinstance(result, NonTerminating):
        return NONTERMINATION, None, None
    return INCONCLUSIVE, "budget", None


def _check_fair_positive(a, program, budget):
    out = solve_fair(program, a.goals, budget)
    if isinstance(out, Solutions):
        return OK, None, out.answers[0].bindings
    if isinstance(out, FiniteFailure):
        return FAIR_UNEXPECTED_FAILURE, None, None
    proof = prove_failure_loopcheck(program, a.goals, budget)
    if isinstance(proof, Proven):
        return FAIR_UNEXPECTED_FAILURE, None, None
    if isinstance(proof, Disproven):
        return OK, None, proof.witness.bindings
    return INCONCLUSIVE, "budget", None


def _check_fair_negative(a, program, budget):
    if a.ends_in_false():
        result = check_universal_termination(program, a.goals, budget)
        if isinstance(result, NonTerminating):
            return OK, None, None
        if isinstance(result, Terminates):
            return CODE_UNEXPECTED_SUCCESS, None, None
        return INCONCLUSIVE, "budget", None
    proof = prove_failure_loopcheck(program, a.goals, budget)
    if isinstance(proof, Disproven):
        return FAIR_UNEXPECTED_SUCCESS, None, proof.witness.bindings
    if isinstance(proof, Proven):
        return OK, None, None
    return INCONCLUSIVE, "budget", None


def _next_any_start(goals) -> int:
    top = -1

    def scan(t: Term) -> None:
        nonlocal top
        if type(t) is Atom and t.name.startswith("any") and t.name[3:].isdigit():
            top = max(top, int(t.name[3:]))
        elif type(t) is Compound:
            for arg in t.args:
                scan(arg)

    for g in goals:
        scan(g)
    return top + 1


def _ground_answer(goals, bindings: Substitution):
    """Apply the first answer and ground leftover free variables so pending
    disequations in the student's answer cannot block the judgment."""
    applied = bindings.apply_all(goals)
    start = _next_any_start(applied)
    grounding = Substitution({v.id: Atom(f"any{start + k}")
                              for k, v in enumerate(goals_vars(applied))})
    return grounding.apply_all(applied)


# -- feedback text -------------------------------------------------------------

_POINTER_STATUSES = {
    REF_MISMATCH_POS: ("!= should be negative", "explain"),
    REF_MISMATCH_NEG: ("!= should be positive", "explain"),
    CODE_UNEXPECTED_FAILURE: ("! unexpected failure", "slice"),
    WRONG_FIRST_ANSWER: ("!= first solution is incorrect", "slice"),
    NONTERMINATION: ("! universal non-termination", "slice"),
}

_PLAIN_STATUSES = {
    CODE_UNEXPECTED_SUCCESS: "! unexpected success",
    FAIR_UNEXPECTED_SUCCESS: "!++ unexpected success under fair search",
    FAIR_UNEXPECTED_FAILURE: "!++ unexpected failure under fair search",
}


def _message_for(status: str, reason: Optional[str], file_name: str,
                 line: int) -> Optional[str]:
    if status in _POINTER_STATUSES:
        text, command = _POINTER_STATUSES[status]
        return f"{text} — details: {command} {file_name}:{line}"
    if status in _PLAIN_STATUSES:
        return _PLAIN_STATUSES[status]
    if status == INCONCLUSIVE:
        return f"? inconclusive ({reason or 'unknown'})"
    return None


@dataclass(frozen=True)
class Finding:
    line: int  # position in the annotated file
    status: str
    message: str


def annotate_file(file: SourceFile, report: CheckReport):
    """Strip machine lines, insert one feedback line per non-OK assertion and
    one per missing definition.  Returns (annotated SourceFile, findings).

    Running annotate twice yields identical bytes because the inserted lines
    are recomputed from user content only.
    """
    base_items = []
    index_map: dict[int, int] = {}
    for old_idx, it in enumerate(report.file.items):
        if isinstance(it, MachineItem):
            continue
        index_map[old_idx] = len(base_items)
        base_items.append(it)

    records_by_item: dict[int, AssertionRecord] = {}
    for r in report.records:
        records_by_item[index_map[r.item_index]] = r
    missing_by_item: dict[int, list] = {}
    for key, old_idx in report.missing:
        missing_by_item.setdefault(index_map[old_idx], []).append(key)

    out_items = []
    findings: list[Finding] = []
    line = 1
    for new_idx, it in enumerate(base_items):
        height = _item_height(it)
        anchor = line
        out_items.append(it)
        line += height
        record = records_by_item.get(new_idx)
        if record is not None:
            message = _message_for(record.status, record.reason,
                                   report.file.name, anchor)
            if message is not None:
                out_items.append(MachineItem("%@ " + message, line))
                findings.append(Finding(anchor, record.status, message))
                line += 1
        for functor, arity in missing_by_item.get(new_idx, ()):
            message = f"!def {functor}/{arity} missing"
            out_items.append(MachineItem("%@ " + message, line))
            findings.append(Finding(anchor, "DEF_MISSING", message))
            line += 1
    out_items = _ensure_newlines(out_items)
    return SourceFile(report.file.name, tuple(out_items)), findings


def _item_height(it) -> int:
    raw = it.raw
    return raw.count("\n") + (0 if raw.endswith("\n") else 1)


def _ensure_newlines(items):
    """A user item followed by a machine line needs a trailing newline."""
    fixed = list(items)
    for i, it in enumerate(fixed[:-1]):
        if isinstance(it, MachineItem):
            continue
        if not it.raw.endswith("\n") and isinstance(fixed[i + 1], MachineItem):
            fixed[i] = replace(it, raw=it.raw + "\n")
    return fixed
