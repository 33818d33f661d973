"""The registry of reference implementations and the verdict procedure.

Reference predicates validate assertions before any user code exists.  They
are "inaccessible" in the sense that diagnostics never print their clauses.
A conjunction is judged True only when a run yields an answer that is
unconditional: disequations still pending at solution time are acceptable
when they arose inside resolved reference clauses (grounding the answer's
free variables with fresh constants would satisfy them all), but a dif/2
goal written at the query level keeps the verdict Unspecified.

The built-in library ships alldifferent/1, nonmember_of/2, list_length/2,
and a family-relations rule pack (child_of/2, ancestor_of/2) expressed as
committed-choice rules.  More references load from a directory:
`<name>.ref.pl` (clauses), `<name>.ref.chr` (rules), `<name>.imp`
(implication rules `lhs ==> rhs1, ..., rhsn.`).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from . import chr as chr_rules
from .engine import (Budget, BudgetExhausted, DEFAULT_BUDGET, FiniteFailure,
                     Solutions, UncallableGoalError, UnknownPredicateError,
                     dfs_stream, solve_fair)
from .parser import parse_file, parse_query, tokenize, _SentenceParser, ParseError
from .terms import (Atom, Clause, Compound, Int, Program, Substitution, Term,
                    Var, VarAllocator, list_parts, match_one_way, pred_key,
                    term_vars)
from .verdicts import (Verdict, VERDICT_FALSE, verdict_true,
                       verdict_unspecified)


@dataclass(frozen=True)
class ImplicationRule:
    """lhs ==> rhs1, ..., rhsn: the rhs goals are implied by the lhs."""

    lhs: Term
    rhs: "tuple[Term, ...]"

    def __post_init__(self) -> None:
        lhs_ids = {v.id for v in term_vars(self.lhs)}
        for g in self.rhs:
            for v in term_vars(g):
                if v.id not in lhs_ids:
                    raise ValueError("implication rhs variables must occur in lhs")


@dataclass(frozen=True)
class ReferenceEntry:
    key: "tuple[str, int]"
    clauses: "tuple[Clause, ...]" = ()
    rules: "tuple[chr_rules.CHRRule, ...]" = ()
    native: Optional[object] = None
    implication_rules: "tuple[ImplicationRule, ...]" = ()
    budget_override: Optional[Budget] = None

    def __post_init__(self) -> None:
        kinds = sum(1 for x in (self.clauses, self.rules, self.native) if x)
        if kinds != 1:
            raise ValueError("an entry has exactly one body kind")


class ReferenceRegistry:
    """Immutable after construction; verdict calls are independent."""

    def __init__(self, entries):
        self.entries: dict[tuple[str, int], ReferenceEntry] = dict(entries)
        clauses: list[Clause] = []
        natives: dict[tuple[str, int], object] = {}
        for entry in self.entries.values():
            clauses.extend(entry.clauses)
            if entry.native is not None:
                natives[entry.key] = entry.native
        self.program = Program(clauses)
        self.natives = natives
        self.chr_predicates = {k for k, e in self.entries.items() if e.rules}

    def chr_ruleset(self, key) -> "tuple[chr_rules.CHRRule, ...]":
        return self.entries[key].rules

    def budget_for(self, goals, default: Budget) -> Budget:
        overrides = []
        for g in goals:
            try:
                entry = self.entries.get(pred_key(g))
            except ValueError:
                continue
            if entry is not None and entry.budget_override is not None:
                overrides.append(entry.budget_override)
        if not overrides:
            return default
        return min(overrides, key=lambda b: b.max_steps)


def _instantiate(t: Term, bindings: dict) -> Term:
    # single-level replacement: matched subterms are inserted verbatim and
    # never re-walked, so rule/goal variable-id collisions are harmless
    if type(t) is Var:
        return bindings.get(t.id, t)
    if type(t) is Compound:
        return Compound(t.functor, tuple(_instantiate(a, bindings) for a in t.args))
    return t


def lookup_implications(registry: ReferenceRegistry, goal: Term):
    """Instantiated consequent conjunctions of every implication rule whose
    pattern the goal instantiates."""
    out = []
    for entry in registry.entries.values():
        for rule in entry.implication_rules:
            bindings = match_one_way(rule.lhs, goal)
            if bindings is None:
                continue
            out.append(tuple(_instantiate(g, bindings) for g in rule.rhs))
    return out


def _answer_stream(registry: ReferenceRegistry, goals, budget: Budget):
    """(answers, status) with status 'exhausted' | 'budget' | 'error'."""
    run = dfs_stream(registry.program, goals, budget, natives=registry.natives)
    answers = []
    try:
        for a in run.answers():
            answers.append(a)
    except (UnknownPredicateError, UncallableGoalError):
        return answers, "error"
    return answers, ("exhausted" if run.completed else "budget")


def reference_verdict(registry: ReferenceRegistry, goals,
                      budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Judge a conjunction against the reference implementations.

    True with the first unconditional answer; False on finite failure;
    Unspecified when only conditional answers exist, the budget ran out, or
    a predicate has no reference.  Depth-first search escalates to fair
    search for a witness when its budget is exhausted.
    """
    goals = tuple(goals)
    if not goals:
        return verdict_true(Substitution({}))
    budget = registry.budget_for(goals, budget)
    for g in goals:
        try:
            key = pred_key(g)
        except ValueError:
            return verdict_unspecified("unknown_predicate")
        if key in registry.chr_predicates:
            return _chr_backed_verdict(registry, goals, budget)

    run = dfs_stream(registry.program, goals, budget, natives=registry.natives)
    saw_answer = False
    try:
        for answer in run.answers():
            saw_answer = True
            if answer.query_pending.is_empty():
                return verdict_true(answer.bindings)
    except (UnknownPredicateError, UncallableGoalError):
        return verdict_unspecified("unknown_predicate")
    if run.completed:
        if saw_answer:
            return verdict_unspecified("pending")
        return VERDICT_FALSE

    # out of steps: one fair attempt at a witness
    try:
        fair = solve_fair(registry.program, goals, budget, natives=registry.natives)
    except (UnknownPredicateError, UncallableGoalError):
        return verdict_unspecified("unknown_predicate")
    if isinstance(fair, Solutions):
        answer = fair.answers[0]
        if answer.query_pending.is_empty():
            return verdict_true(answer.bindings)
        return verdict_unspecified("pending")
    if isinstance(fair, FiniteFailure):
        return VERDICT_FALSE
    return verdict_unspecified("budget")


def _chr_backed_verdict(registry: ReferenceRegistry, goals, budget: Budget) -> Verdict:
    rulesets = []
    for g in goals:
        key = pred_key(g)
        if key in registry.chr_predicates:
            rules = registry.chr_ruleset(key)
            if rules not in rulesets:
                rulesets.append(rules)
    rules = tuple(r for rs in rulesets for r in rs)

    def prefix_solver(prefix, b):
        return _answer_stream(registry, prefix, b)

    return chr_rules.chr_verdict(rules, goals, budget, prefix_solver)


# -- built-in reference library ----------------------------------------------

_LIBRARY_CLAUSES = """\
alldifferent([]).
alldifferent([X|Xs]) :-
    nonmember_of(X, Xs),
    alldifferent(Xs).

nonmember_of(_X, []).
nonmember_of(X, [E|Es]) :-
    dif(X, E),
    nonmember_of(X, Es).
"""

_LIBRARY_IMPLICATIONS = """\
alldifferent([_|Xs]) ==> alldifferent(Xs).
"""

# Tight enough that diagnosis searches stay quick, large enough that every
# decisive verdict on exercise-sized goals completes well inside it.
ALLDIFFERENT_BUDGET = Budget(max_steps=600, max_depth=8, per_depth_steps=300)


def _list_length_native(run, args):
    """list_length(List, N): relate a list to its length, enumerating
    closures of an open tail shortest first."""
    lst, n = args

    def close_to(tail, k, length):
        def attempt():
            t = tail
            for _ in range(k):
                cell = Compound(".", (run.fresh(), run.fresh()))
                if not run.unify(t, cell):
                    return False
                t = cell.args[1]
            return run.unify(t, Atom("[]")) and run.unify(n, Int(length))
        return attempt

    elems, tail = [], run.walk(lst)
    while type(tail) is Compound and tail.functor == "." and len(tail.args) == 2:
        elems.append(tail.args[0])
        tail = run.walk(tail.args[1])
    base = len(elems)
    if type(tail) is Atom and tail.name == "[]":
        yield close_to(tail, 0, base)
        return
    if type(tail) is not Var:
        return
    target = run.walk(n)
    if type(target) is Int:
        if target.value >= base:
            yield close_to(tail, target.value - base, target.value)
        return
    k = 0
    while True:
        yield close_to(tail, k, base + k)
        k += 1


def _family_rules() -> "tuple[chr_rules.CHRRule, ...]":
    text = resources.files("logicbench.data").joinpath("family.chr").read_text()
    return chr_rules.parse_chr_rules(text)


def parse_implication_rules(text: str) -> "tuple[ImplicationRule, ...]":
    allocator = VarAllocator()
    rules: list[ImplicationRule] = []
    for chunk, base_line in chr_rules._sentences(text):
        toks = tokenize(chunk, base_line)
        if not toks:
            continue
        p = _SentenceParser(toks, allocator)
        lhs = p.parse_term()
        p.expect("punct", "==>")
        rhs = [p.parse_term()]
        while p.at_punct(","):
            p.next()
            rhs.append(p.parse_term())
        p.expect("end")
        rules.append(ImplicationRule(lhs, tuple(rhs)))
    return tuple(rules)


def builtin_registry() -> ReferenceRegistry:
    lib = parse_file(_LIBRARY_CLAUSES, "<builtin>")
    by_key: dict[tuple[str, int], list[Clause]] = {}
    for c in lib.clauses():
        by_key.setdefault(c.key, []).append(c)
    implications = parse_implication_rules(_LIBRARY_IMPLICATIONS)
    family = _family_rules()
    entries = {
        ("alldifferent", 1): ReferenceEntry(
            ("alldifferent", 1), clauses=tuple(by_key[("alldifferent", 1)]),
            implication_rules=implications, budget_override=ALLDIFFERENT_BUDGET),
        ("nonmember_of", 2): ReferenceEntry(
            ("nonmember_of", 2), clauses=tuple(by_key[("nonmember_of", 2)])),
        ("list_length", 2): ReferenceEntry(
            ("list_length", 2), native=_list_length_native),
        ("child_of", 2): ReferenceEntry(("child_of", 2), rules=family),
        ("ancestor_of", 2): ReferenceEntry(("ancestor_of", 2), rules=family),
    }
    return ReferenceRegistry(entries)


def empty_registry() -> ReferenceRegistry:
    return ReferenceRegistry({})


def load_reference_dir(path: str, base: Optional[ReferenceRegistry] = None) -> ReferenceRegistry:
    """Extend a registry with reference packs from a directory."""
    entries = dict(base.entries) if base is not None else {}
    implications_by_key: dict[tuple[str, int], list[ImplicationRule]] = {}

    for fname in sorted(os.listdir(path)):
        full = os.path.join(path, fname)
        if fname.endswith(".imp"):
            with open(full, encoding="utf-8") as fh:
                for rule in parse_implication_rules(fh.read()):
                    implications_by_key.setdefault(pred_key(rule.lhs), []).append(rule)
    for fname in sorted(os.listdir(path)):
        full = os.path.join(path, fname)
        if fname.endswith(".ref.pl"):
            with open(full, encoding="utf-8") as fh:
                sf = parse_file(fh.read(), fname)
            by_key: dict[tuple[str, int], list[Clause]] = {}
            for c in sf.clauses():
                by_key.setdefault(c.key, []).append(c)
            for key, cls in by_key.items():
                entries[key] = ReferenceEntry(
                    key, clauses=tuple(cls),
                    implication_rules=tuple(implications_by_key.get(key, ())))
        elif fname.endswith(".ref.chr"):
            with open(full, encoding="utf-8") as fh:
                rules = chr_rules.parse_chr_rules(fh.read())
            for key in chr_rules.rule_constraint_predicates(rules):
                entries[key] = ReferenceEntry(
                    key, rules=rules,
                    implication_rules=tuple(implications_by_key.get(key, ())))
    return ReferenceRegistry(entries)
