"""On-demand explanations for assertions the reference disagrees with.

An incorrect negative assertion (the reference can satisfy it) is explained
by specialization: the reference answer is applied and the remaining free
variables are grounded with fresh constants any0, any1, ...

An incorrect positive assertion (the reference refutes it) is explained by
staged generalization.  Rewrite rules, each application making the goal
conjunction weaker:

  DROP_GOAL            delete one goal of the conjunction
  GENERALIZE_SUBTERM   replace a subterm of a goal argument by a fresh var
  SHARE_IDENTICAL      replace all copies of a repeated subterm by one
                       shared fresh variable
  SEPARATE_WITH_DIF    replace two non-unifiable subterms by fresh V1, V2
                       and add the goal dif(V1, V2)
  REPLACE_BY_IMPLIED   replace a goal by goals it is known to imply

Stage one searches with the first two rules, stage two with the first four,
stage three with all five.  Each stage is a best-first search from the
original goals keeping only candidates the reference still refutes, capped
at 500 verdict calls; its result is the most general surviving candidate.
Generality is judged by (fewest non-trivial nodes, then most distinct
variables, then fewest goals), ties broken by canonical rendering.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Optional

from .engine import Budget, DEFAULT_BUDGET
from .parser import AssertionKind
from .reference import ReferenceRegistry, lookup_implications, reference_verdict
from .render import render_conjunction
from .terms import (Atom, Compound, Term, Var, VarAllocator, _compare,
                    enumerate_subterms, goals_vars, ground_with_any,
                    is_ground, max_var_id, replace_at, term_size, term_vars)

DROP_GOAL = "DROP_GOAL"
GENERALIZE_SUBTERM = "GENERALIZE_SUBTERM"
SHARE_IDENTICAL = "SHARE_IDENTICAL"
SEPARATE_WITH_DIF = "SEPARATE_WITH_DIF"
REPLACE_BY_IMPLIED = "REPLACE_BY_IMPLIED"

ALL_RULES = (DROP_GOAL, GENERALIZE_SUBTERM, SHARE_IDENTICAL,
             SEPARATE_WITH_DIF, REPLACE_BY_IMPLIED)

STAGE_RULES = (
    ("Generalized negative assertion.", ALL_RULES[:2]),
    ("Further generalization.", ALL_RULES[:4]),
    ("Further generalization.", ALL_RULES),
)

SEARCH_CAP = 500


class PreconditionError(ValueError):
    pass


def generality_key(goals) -> "tuple[int, int, int]":
    """Larger key = more general (lexicographic)."""
    size = sum(term_size(g) for g in goals)
    nvars = len(goals_vars(goals))
    return (-size, nvars, -len(goals))


@dataclass(frozen=True)
class GeneralizationCandidate:
    goals: "tuple[Term, ...]"
    rules_used: "frozenset[str]"
    key: "tuple[int, int, int]"
    rendering: str


@dataclass(frozen=True)
class Stage:
    label: str
    kind: AssertionKind
    equations: "tuple[tuple[Var, Atom], ...]"
    goals: "tuple[Term, ...]"


@dataclass(frozen=True)
class Explanation:
    kind: str  # 'SPECIALIZED_POSITIVE' | 'GENERALIZED_NEGATIVE'
    stages: "tuple[Stage, ...]"
    anchor_line: int = 0


def _fresh_allocator(goals) -> VarAllocator:
    top = max((max_var_id(g) for g in goals), default=-1)
    return VarAllocator(top + 1)


def apply_generalization_rule(rule: str, goals, registry: Optional[ReferenceRegistry] = None):
    """All single applications of one rewrite rule; unverified."""
    goals = tuple(goals)
    allocator = _fresh_allocator(goals)
    out: list[tuple[Term, ...]] = []

    if rule == DROP_GOAL:
        if len(goals) > 1:
            for i in range(len(goals)):
                out.append(goals[:i] + goals[i + 1:])
        return out

    if rule == GENERALIZE_SUBTERM:
        for gi, g in enumerate(goals):
            for path, sub in enumerate_subterms(g):
                if type(sub) is Var:
                    continue
                new_goal = replace_at(g, path, allocator.fresh())
                out.append(goals[:gi] + (new_goal,) + goals[gi + 1:])
        return out

    if rule == SHARE_IDENTICAL:
        classes: dict[Term, list[tuple[int, tuple[int, ...]]]] = {}
        for gi, g in enumerate(goals):
            for path, sub in enumerate_subterms(g):
                if type(sub) is Var:
                    continue
                classes.setdefault(sub, []).append((gi, path))
        for sub, positions in classes.items():
            if len(positions) < 2:
                continue
            shared = allocator.fresh()
            new_goals = list(goals)
            for gi, path in positions:
                new_goals[gi] = replace_at(new_goals[gi], path, shared)
            out.append(tuple(new_goals))
        return out

    if rule == SEPARATE_WITH_DIF:
        positions = []
        for gi, g in enumerate(goals):
            for path, sub in enumerate_subterms(g):
                if type(sub) is not Var:
                    positions.append((gi, path, sub))
        for a in range(len(positions)):
            for b in range(a + 1, len(positions)):
                gi, pa, sa = positions[a]
                gj, pb, sb = positions[b]
                if gi == gj and (_prefix(pa, pb) or _prefix(pb, pa)):
                    continue
                if _compare({}, sa, sb) != "clash":
                    continue
                v1, v2 = allocator.fresh(), allocator.fresh()
                new_goals = list(goals)
                new_goals[gi] = replace_at(new_goals[gi], pa, v1)
                new_goals[gj] = replace_at(new_goals[gj], pb, v2)
                new_goals.append(Compound("dif", (v1, v2)))
                out.append(tuple(new_goals))
        return out

    if rule == REPLACE_BY_IMPLIED:
        if registry is None:
            return out
        for gi, g in enumerate(goals):
            if type(g) not in (Atom, Compound):
                continue
            for rhs in lookup_implications(registry, g):
                out.append(goals[:gi] + rhs + goals[gi + 1:])
        return out

    raise ValueError(f"unknown rule {rule!r}")


def _prefix(p, q) -> bool:
    return len(p) <= len(q) and q[:len(p)] == p


def staged_generalization(goals, registry: ReferenceRegistry,
                          keep: Callable, cap: int = SEARCH_CAP):
    """Run the three stages; yields (label, winner or None per emission rule).

    `keep(goals, rendering)` returns (still_refuted, verdict_calls_spent).
    """
    goals = tuple(goals)
    emitted: list[tuple[str, GeneralizationCandidate]] = []
    prev = GeneralizationCandidate(goals, frozenset(), generality_key(goals),
                                   render_conjunction(goals))
    for label, rules in STAGE_RULES:
        best = _search_stage(goals, rules, registry, keep, cap)
        if best is not None and best.key > prev.key:
            emitted.append((label, best))
            prev = best
    return emitted


def _search_stage(goals, rules, registry, keep, cap) -> Optional[GeneralizationCandidate]:
    start = GeneralizationCandidate(tuple(goals), frozenset(),
                                    generality_key(goals),
                                    render_conjunction(goals))
    seen = {start.rendering}
    pool = [start]
    heap = [(_heap_sort_key(start, 0))]
    seq = 1
    calls = 0
    while heap and calls < cap:
        cand = heapq.heappop(heap)[-1]
        for rule in rules:
            for child_goals in apply_generalization_rule(rule, cand.goals, registry):
                rendering = render_conjunction(child_goals)
                if rendering in seen:
                    continue
                seen.add(rendering)
                if calls >= cap:
                    break
                ok, spent = keep(child_goals, rendering)
                calls += spent
                if not ok:
                    continue
                child = GeneralizationCandidate(
                    child_goals, cand.rules_used | {rule},
                    generality_key(child_goals), rendering)
                pool.append(child)
                heapq.heappush(heap, _heap_sort_key(child, seq))
                seq += 1
    best = pool[0]
    for c in pool[1:]:
        if c.key > best.key or (c.key == best.key and c.rendering < best.rendering):
            best = c
    return best


def _heap_sort_key(cand: GeneralizationCandidate, seq: int):
    # heapq pops the smallest entry; negate the key so the most general
    # candidate is expanded first, with deterministic tie-breaking
    return (-cand.key[0], -cand.key[1], -cand.key[2], cand.rendering, seq, cand)


def _refutation_keep(registry: ReferenceRegistry, budget: Budget):
    memo: dict[str, object] = {}

    def keep(goals, rendering):
        v = memo.get(rendering)
        spent = 0
        if v is None:
            v = reference_verdict(registry, goals, budget)
            memo[rendering] = v
            spent = 1
        return v.is_false, spent

    return keep


def _next_any_start(goals) -> int:
    """First any<k> index not already appearing as a constant in the goals."""
    top = -1

    def scan(t: Term) -> None:
        nonlocal top
        if type(t) is Atom and t.name.startswith("any") and t.name[3:].isdigit():
            top = max(top, int(t.name[3:]))
        elif type(t) is Compound:
            for a in t.args:
                scan(a)

    for g in goals:
        scan(g)
    return top + 1


def explain_incorrect_negative(goals, registry: ReferenceRegistry,
                               budget: Budget = DEFAULT_BUDGET,
                               anchor_line: int = 0) -> Explanation:
    """Specialize a negative assertion the reference can in fact satisfy."""
    goals = tuple(goals)
    verdict = reference_verdict(registry, goals, budget)
    if not verdict.is_true:
        raise PreconditionError("the reference does not satisfy this goal")
    assert verdict.answer is not None
    applied = verdict.answer.apply_all(goals)
    kept = tuple(g for g in applied
                 if not (type(g) is Compound and g.functor == "=" and
                         len(g.args) == 2 and g.args[0] == g.args[1]))
    if kept:
        applied = kept

    start = _next_any_start(applied)
    equations: list[tuple[Var, Atom]] = []
    mapping: dict[int, Atom] = {}
    for k, v in enumerate(goals_vars(applied)):
        constant = Atom(f"any{start + k}")
        if v.name:
            equations.append((v, constant))
        else:
            mapping[v.id] = constant

    def subst(t: Term) -> Term:
        tp = type(t)
        if tp is Var:
            return mapping.get(t.id, t)
        if tp is Compound:
            return Compound(t.functor, tuple(subst(a) for a in t.args))
        return t

    suggestion_goals = tuple(subst(g) for g in applied)
    check_goals = tuple(Compound("=", (v, c)) for v, c in equations) + suggestion_goals
    recheck = reference_verdict(registry, check_goals, budget)
    if not recheck.is_true:
        raise PreconditionError("specialized suggestion failed to re-verify")
    stage = Stage("Also this more specific query should be true.",
                  AssertionKind.POS, tuple(equations), suggestion_goals)
    return Explanation("SPECIALIZED_POSITIVE", (stage,), anchor_line)


def explain_incorrect_positive(goals, registry: ReferenceRegistry,
                               budget: Budget = DEFAULT_BUDGET,
                               anchor_line: int = 0) -> Explanation:
    """Generalize a positive assertion the reference refutes."""
    goals = tuple(goals)
    if not reference_verdict(registry, goals, budget).is_false:
        raise PreconditionError("the reference does not refute this goal")
    keep = _refutation_keep(registry, budget)
    stages = tuple(
        Stage(label, AssertionKind.NEG, (), cand.goals)
        for label, cand in staged_generalization(goals, registry, keep))
    return Explanation("GENERALIZED_NEGATIVE", stages, anchor_line)
