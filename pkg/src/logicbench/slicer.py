"""Error-localizing program slicers.

Three symptoms, three slicers, all greedy over the program text:

  * insufficiency (unexpected failure): delete body goals, keeping each
    deletion only while the query still fails finitely.  Deleted goals are
    displayed struck and marked with a `*`.
  * incorrectness (unexpected success): remove whole clauses (false/0 as
    first goal) while the offending goal still succeeds.
  * non-termination: remove clauses and hide goal suffixes behind an
    inserted false/0 while a loop certificate persists.

Each fragment keeps the symptom alive: as long as only struck or hidden
parts are edited, the error persists.  The intersection of fragments from
different symptoms narrows the error down further.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .diagnosis import staged_generalization, Stage
from .engine import (Budget, BudgetExhausted, DEFAULT_BUDGET, FiniteFailure,
                     NonTerminating, Solutions, check_universal_termination,
                     solve_dfs)
from .parser import AssertionKind
from .reference import ReferenceRegistry, reference_verdict
from .render import _Namer, _goal_text, _term_text, render_conjunction
from .terms import Atom, Clause, Compound, Program, Substitution, Term

_FALSE_GOAL = Atom("false")


class SlicerPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ClauseMark:
    """Slice marker for one clause.

    `removed` and `false_at == 0` both eliminate the clause.  `false_at == k`
    hides every goal from position k on behind an inserted false/0.
    `deleted` holds goal positions struck by generalization.  Deletion and
    false-insertion never co-occur in one clause.
    """

    removed: bool = False
    false_at: Optional[int] = None
    deleted: "frozenset[int]" = frozenset()

    def __post_init__(self) -> None:
        if self.deleted and (self.removed or self.false_at is not None):
            raise ValueError("deleted goals cannot combine with false insertion")

    def eliminates_clause(self) -> bool:
        return self.removed or self.false_at == 0


KEPT = ClauseMark()


@dataclass(frozen=True)
class ProgramFragment:
    base: Program
    marks: "tuple[ClauseMark, ...]"
    query_kind: AssertionKind
    query_goals: "tuple[Term, ...]"
    inconclusive: bool = False

    def to_program(self) -> Program:
        clauses = []
        for clause, mark in zip(self.base.clauses, self.marks):
            if mark.eliminates_clause():
                continue
            if mark.false_at is not None:
                body = clause.body[:mark.false_at] + (_FALSE_GOAL,)
            else:
                body = tuple(g for i, g in enumerate(clause.body)
                             if i not in mark.deleted)
            clauses.append(Clause(clause.head, body, clause.source_line))
        return Program(clauses)


# A line set holds (clause index, 'head' | 'goal', goal index) triples.


def active_lines(fragment: ProgramFragment) -> frozenset:
    """Parts of the base program still displayed un-struck by the fragment."""
    active = set()
    for ci, (clause, mark) in enumerate(zip(fragment.base.clauses, fragment.marks)):
        if mark.eliminates_clause():
            continue
        active.add((ci, "head", 0))
        for gi in range(len(clause.body)):
            if gi in mark.deleted:
                continue
            if mark.false_at is not None and mark.false_at <= gi:
                continue
            active.add((ci, "goal", gi))
    return frozenset(active)


def total_lines(program: Program) -> int:
    """Head and each body goal count as one line; facts are head-only."""
    return sum(1 + len(c.body) for c in program.clauses)


def intersect_fragments(fragments) -> frozenset:
    fragments = list(fragments)
    if not fragments:
        return frozenset()
    base = fragments[0].base
    for f in fragments[1:]:
        if f.base != base:
            raise ValueError("fragments over different base programs")
    result = active_lines(fragments[0])
    for f in fragments[1:]:
        result &= active_lines(f)
    return result


# -- slicer (a): insufficiency ------------------------------------------------


def slice_insufficiency(program: Program, goals, budget: Budget = DEFAULT_BUDGET,
                        query_kind: AssertionKind = AssertionKind.POS) -> ProgramFragment:
    """Greedy maximal goal deletion preserving finite failure."""
    goals = tuple(goals)
    if not isinstance(solve_dfs(program, goals, budget, "all", unknown_fail=True),
                      FiniteFailure):
        raise SlicerPreconditionError("the query does not fail finitely")

    marks = [ClauseMark() for _ in program.clauses]
    inconclusive = False

    def still_fails() -> Optional[bool]:
        frag = ProgramFragment(program, tuple(marks), query_kind, goals)
        out = solve_dfs(frag.to_program(), goals, budget, "all", unknown_fail=True)
        if isinstance(out, BudgetExhausted):
            return None
        return isinstance(out, FiniteFailure)

    changed = True
    while changed:
        changed = False
        for ci, clause in enumerate(program.clauses):
            for gi in range(len(clause.body)):
                if gi in marks[ci].deleted:
                    continue
                marks[ci] = replace(marks[ci], deleted=marks[ci].deleted | {gi})
                verdict = still_fails()
                if verdict is True:
                    changed = True
                else:
                    if verdict is None:
                        inconclusive = True
                    marks[ci] = replace(marks[ci], deleted=marks[ci].deleted - {gi})
    return ProgramFragment(program, tuple(marks), query_kind, goals, inconclusive)


# -- slicer (b): incorrectness ------------------------------------------------


def slice_incorrectness(program: Program, goals, witness: Substitution,
                        registry: ReferenceRegistry,
                        budget: Budget = DEFAULT_BUDGET):
    """Generalize the incorrect witness, then remove clauses while the most
    general still-succeeding goal keeps succeeding.

    Returns (stages, fragment): the stage suggestions are negative
    assertions; each still succeeds on the user program and is not accepted
    by the reference.  For success preservation an inserted false/0 at any
    position equals removing the clause, so only whole-clause removal is
    tried.
    """
    goals = tuple(goals)
    instantiated = witness.apply_all(goals)
    kept_goals = tuple(g for g in instantiated
                       if not (_is_eq(g) and g.args[0] == g.args[1]))
    if not kept_goals:
        kept_goals = instantiated
    if not reference_verdict(registry, kept_goals, budget).is_false:
        raise SlicerPreconditionError("the reference does not refute the witness")

    def succeeds(prog: Program, query) -> bool:
        out = solve_dfs(prog, query, budget, "first", unknown_fail=True)
        return isinstance(out, Solutions)

    if not succeeds(program, kept_goals):
        raise SlicerPreconditionError("the witness goal does not succeed")

    success_memo: dict[str, bool] = {}
    verdict_memo: dict[str, object] = {}

    def keep(cand_goals, rendering):
        spent = 0
        v = verdict_memo.get(rendering)
        if v is None:
            v = reference_verdict(registry, cand_goals, budget)
            verdict_memo[rendering] = v
            spent = 1
        if not v.is_false:
            return False, spent
        ok = success_memo.get(rendering)
        if ok is None:
            ok = succeeds(program, cand_goals)
            success_memo[rendering] = ok
        return ok, spent

    emitted = staged_generalization(kept_goals, registry, keep)
    stages = tuple(Stage(label, AssertionKind.NEG, (), cand.goals)
                   for label, cand in emitted)
    target = emitted[-1][1].goals if emitted else kept_goals

    marks = [ClauseMark() for _ in program.clauses]

    def fragment_program() -> Program:
        return ProgramFragment(program, tuple(marks), AssertionKind.NEG,
                               target).to_program()

    for ci in range(len(program.clauses)):
        marks[ci] = ClauseMark(false_at=0)
        if not succeeds(fragment_program(), target):
            marks[ci] = KEPT
    return stages, ProgramFragment(program, tuple(marks), AssertionKind.NEG, target)


def _is_eq(g: Term) -> bool:
    return type(g) is Compound and g.functor == "=" and len(g.args) == 2


# -- slicer (c): non-termination ----------------------------------------------


def slice_nontermination(program: Program, goals, budget: Budget = DEFAULT_BUDGET,
                         query_kind: AssertionKind = AssertionKind.NEG) -> ProgramFragment:
    """Greedy false/0 insertion preserving a loop certificate.

    First each clause is tentatively eliminated, then in each kept clause
    the inserted false/0 is pushed leftward from the end while
    non-termination evidence persists.
    """
    goals = tuple(goals)
    if not isinstance(check_universal_termination(program, goals, budget,
                                                  unknown_fail=True),
                      NonTerminating):
        raise SlicerPreconditionError("no non-termination evidence for the query")

    marks = [ClauseMark() for _ in program.clauses]

    def still_loops() -> bool:
        frag = ProgramFragment(program, tuple(marks), query_kind, goals)
        result = check_universal_termination(frag.to_program(), goals, budget,
                                             unknown_fail=True)
        return isinstance(result, NonTerminating)

    for ci in range(len(program.clauses)):
        marks[ci] = ClauseMark(removed=True)
        if not still_loops():
            marks[ci] = KEPT
    for ci, clause in enumerate(program.clauses):
        if marks[ci].removed or not clause.body:
            continue
        n = len(clause.body)
        for k in range(n, 0, -1):
            marks[ci] = ClauseMark(false_at=k)
            if still_loops():
                continue
            marks[ci] = ClauseMark(false_at=k + 1) if k < n else KEPT
            break
    return ProgramFragment(program, tuple(marks), query_kind, goals)


# -- rendering ----------------------------------------------------------------


def _struck(text: str) -> str:
    return f"~~{text}~~"


def render_fragment(fragment: ProgramFragment) -> str:
    """Program text with slice markers; the query is printed first."""
    lines = [f"{fragment.query_kind.token} {render_conjunction(fragment.query_goals)}."]
    prev_key = None
    for clause, mark in zip(fragment.base.clauses, fragment.marks):
        if prev_key is not None and clause.key != prev_key:
            lines.append("")
        elif prev_key is None:
            lines.append("")
        prev_key = clause.key
        lines.extend(_clause_lines(clause, mark))
    return "\n".join(lines) + "\n"


def _clause_lines(clause: Clause, mark: ClauseMark):
    namer = _Namer((clause.head,) + clause.body)
    head = _term_text(clause.head, namer)
    body = [_goal_text(g, namer) for g in clause.body]
    if mark.eliminates_clause():
        if not body:
            return [_struck(f"{head} :- false.")]
        out = [_struck(f"{head} :- false,")]
        for i, g in enumerate(body):
            sep = "," if i < len(body) - 1 else "."
            out.append("    " + _struck(g + sep))
        return out
    if not body:
        return [f"{head}."]
    out = [f"{head} :-"]
    false_at = mark.false_at
    for i, g in enumerate(body):
        last = i == len(body) - 1
        if false_at is not None and i >= false_at:
            sep = "," if not last else "."
            out.append("    " + _struck(g + sep))
        elif i in mark.deleted:
            sep = "," if not last else "."
            out.append(f"    * {_struck(g)}{sep}")
        else:
            sep = "," if not last else "."
            out.append(f"    {g}{sep}")
    if false_at is not None:
        insert_pos = 1 + false_at  # after the head line and the kept goals
        if false_at == len(body):
            out[-1] = out[-1][:-1] + ","  # reopen the last kept goal
            out.append("    false.")
        else:
            out.insert(insert_pos, "    false,")
    return out
