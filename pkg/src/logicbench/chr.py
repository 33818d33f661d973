"""A minimal committed-choice rule engine over a constraint store.

Simplification rules (`<=>`) remove their matched heads, propagation rules
(`==>`) keep them; both add their body constraints.  Head matching is
one-way: rule variables bind to store terms, store-side variables are never
instantiated.  Guards are conjunctions of distinct/2 conditions, satisfied
when the two terms are non-unifiable or their disequality is entailed by
the pending dif store.  Duplicate constraints are suppressed and a
propagation history prevents a rule from re-firing on the same constraint
tuple, so transitive-closure style rule sets terminate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .engine import Budget, DEFAULT_BUDGET
from .parser import ParseError, Token, _SentenceParser, tokenize
from .terms import (Atom, Compound, DifStore, Substitution, Term, Var,
                    VarAllocator, pred_key, _compare)
from .verdicts import (Verdict, VERDICT_FALSE, verdict_true,
                       verdict_unspecified)

SIMPLIFICATION = "simplification"
PROPAGATION = "propagation"


@dataclass(frozen=True)
class Distinct:
    """Guard condition: the two terms must be provably different."""

    left: Term
    right: Term


@dataclass(frozen=True)
class CHRRule:
    name: str
    kind: str  # SIMPLIFICATION | PROPAGATION
    heads: "tuple[Term, ...]"
    guard: "tuple[Distinct, ...]" = ()
    body: "object" = ()  # 'false' | 'true' | tuple of constraint Terms

    def __post_init__(self) -> None:
        if not self.heads:
            raise ValueError("a rule needs at least one head")


@dataclass
class ConstraintStore:
    """Multiset of constraints plus the propagation-firing history."""

    constraints: "dict[int, Term]" = field(default_factory=dict)
    history: "set[tuple[str, tuple[int, ...]]]" = field(default_factory=set)
    _ids: "itertools.count" = field(default_factory=itertools.count)

    def add(self, c: Term) -> bool:
        """Insert unless an identical constraint is already present."""
        if any(existing == c for existing in self.constraints.values()):
            return False
        self.constraints[next(self._ids)] = c
        return True

    def snapshot(self) -> "tuple[Term, ...]":
        return tuple(self.constraints[i] for i in sorted(self.constraints))


@dataclass(frozen=True)
class ChrResult:
    status: str  # 'consistent' | 'inconsistent' | 'budget'
    store: "tuple[Term, ...]"
    trace: "tuple[str, ...]"


def _match(pattern: Term, term: Term, bindings: dict) -> bool:
    """One-way match; pattern vars bind, store vars only match pattern vars."""
    tp = type(pattern)
    if tp is Var:
        prev = bindings.get(pattern.id)
        if prev is None:
            bindings[pattern.id] = term
            return True
        return prev == term
    if type(term) is Var:
        return False
    if tp is Atom:
        return type(term) is Atom and pattern.name == term.name
    if tp is Compound:
        if (type(term) is not Compound or pattern.functor != term.functor
                or len(pattern.args) != len(term.args)):
            return False
        return all(_match(p, t, bindings) for p, t in zip(pattern.args, term.args))
    return pattern == term


def _apply(t: Term, bindings: dict) -> Term:
    tp = type(t)
    if tp is Var:
        return bindings.get(t.id, t)
    if tp is Compound:
        return Compound(t.functor, tuple(_apply(a, bindings) for a in t.args))
    return t


def _dif_entailed(a: Term, b: Term, difs: DifStore) -> bool:
    for (x, y) in difs.pairs:
        if (x == a and y == b) or (x == b and y == a):
            return True
    return False


def _guard_holds(guard, bindings: dict, difs: DifStore) -> bool:
    for cond in guard:
        a = _apply(cond.left, bindings)
        b = _apply(cond.right, bindings)
        if _compare({}, a, b) == "clash":
            continue
        if _dif_entailed(a, b, difs):
            continue
        return False
    return True


def _find_match(rule: CHRRule, store: ConstraintStore, difs: DifStore):
    """First head match in insertion order, or None."""
    ids = sorted(store.constraints)

    def extend(head_idx: int, used: "tuple[int, ...]", bindings: dict):
        if head_idx == len(rule.heads):
            if rule.kind == PROPAGATION and (rule.name, used) in store.history:
                return None
            if not _guard_holds(rule.guard, bindings, difs):
                return None
            return used, bindings
        pattern = rule.heads[head_idx]
        for cid in ids:
            if cid in used:
                continue
            trial = dict(bindings)
            if _match(pattern, store.constraints[cid], trial):
                found = extend(head_idx + 1, used + (cid,), trial)
                if found is not None:
                    return found
        return None

    return extend(0, (), {})


def chr_run(rules, initial, difs: DifStore = DifStore(),
            budget: Budget = DEFAULT_BUDGET) -> ChrResult:
    """Run the rules to fixpoint over the initial constraints."""
    store = ConstraintStore()
    for c in initial:
        store.add(c)
    trace: list[str] = []
    firings = 0
    while True:
        fired = False
        for rule in rules:
            found = _find_match(rule, store, difs)
            if found is None:
                continue
            used, bindings = found
            firings += 1
            matched = [store.constraints[i] for i in used]
            trace.append(f"{rule.name}: " + ", ".join(map(repr, matched)))
            if rule.body == "false":
                return ChrResult("inconsistent", store.snapshot(), tuple(trace))
            if rule.kind == SIMPLIFICATION:
                for cid in used:
                    del store.constraints[cid]
            else:
                store.history.add((rule.name, used))
            if rule.body != "true":
                for c in rule.body:
                    store.add(_apply(c, bindings))
            fired = True
            break
        if not fired:
            return ChrResult("consistent", store.snapshot(), tuple(trace))
        if firings >= budget.max_steps:
            return ChrResult("budget", store.snapshot(), tuple(trace))


def rule_constraint_predicates(rules) -> "set[tuple[str, int]]":
    """Predicates governed by the rules (head and body constraints)."""
    preds: set[tuple[str, int]] = set()
    for r in rules:
        for h in r.heads:
            preds.add(pred_key(h))
        if r.body not in ("true", "false"):
            for c in r.body:
                preds.add(pred_key(c))
    return preds


def chr_verdict(rules, goals, budget: Budget = DEFAULT_BUDGET,
                prefix_solver=None) -> Verdict:
    """Judge a conjunction whose constraint goals are governed by `rules`.

    Non-constraint goals (=/2 and reference-library calls) are evaluated
    first; every answer instantiates the constraint goals and contributes
    its pending disequations to the guard context.  The verdict is False
    only when every answer leads to an inconsistent store and the answer
    enumeration was exhaustive; a consistent non-empty store is Unspecified
    (pending), so a conjunction with constraints never comes out True.
    """
    goals = tuple(goals)
    if not goals:
        return verdict_true(Substitution({}))
    constraint_preds = rule_constraint_predicates(rules)
    prefix = tuple(g for g in goals if pred_key(g) not in constraint_preds)
    constraints = tuple(g for g in goals if pred_key(g) in constraint_preds)
    if not constraints:
        raise ValueError("chr_verdict needs at least one constraint goal")
    if prefix and prefix_solver is None:
        raise ValueError("non-constraint goals need a prefix solver")

    if prefix:
        answers, status = prefix_solver(prefix, budget)
    else:
        answers, status = [ _EMPTY_ANSWER ], "exhausted"
    if status == "budget" and not answers:
        return verdict_unspecified("budget")
    if status == "error":
        return verdict_unspecified("unknown_predicate")
    if not answers:
        return VERDICT_FALSE

    saw_pending = False
    for ans in answers:
        store_init = [ans.bindings.apply(c) for c in constraints]
        result = chr_run(rules, store_init, ans.pending, budget)
        if result.status == "budget":
            return verdict_unspecified("budget")
        if result.status == "consistent":
            saw_pending = True
    if saw_pending:
        return verdict_unspecified("pending")
    if status != "exhausted":
        return verdict_unspecified("budget")
    return VERDICT_FALSE


class _EmptyAnswer:
    bindings = Substitution({})
    pending = DifStore(())


_EMPTY_ANSWER = _EmptyAnswer()


# -- rule file surface syntax -----------------------------------------------
#
#   name @ H1, H2 <=> G1 \= G2, ... | body.      (simplification)
#   name @ H1 <=> body.                           (guardless simplification)
#   name @ H1, H2 ==> body.                       (propagation)
#
# where body is `false`, `true`, or a conjunction of constraints.


def parse_chr_rules(text: str) -> "tuple[CHRRule, ...]":
    allocator = VarAllocator()
    rules: list[CHRRule] = []
    for chunk, base_line in _sentences(text):
        toks = tokenize(chunk, base_line)
        if not toks:
            continue
        rules.append(_parse_rule(toks, allocator))
    return tuple(rules)


def _sentences(text: str):
    buf: list[str] = []
    start = 1
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not buf:
            if not stripped or stripped.startswith("%"):
                continue
            start = i
        buf.append(line)
        if stripped.endswith("."):
            yield "\n".join(buf), start
            buf = []
    if buf:
        raise ParseError("rule not terminated by '.'", start)


def _parse_rule(toks: "list[Token]", allocator: VarAllocator) -> CHRRule:
    p = _SentenceParser(toks, allocator)
    p.varmap = {}
    name_tok = p.expect("atom")
    p.expect("punct", "@")
    heads = [p.parse_term()]
    while p.at_punct(","):
        p.next()
        heads.append(p.parse_term())
    arrow = p.next()
    if arrow.kind != "punct" or arrow.value not in ("<=>", "==>"):
        raise ParseError("expected '<=>' or '==>'", arrow.line, arrow.col)
    kind = SIMPLIFICATION if arrow.value == "<=>" else PROPAGATION
    guard: list[Distinct] = []
    body_terms = [p.parse_term()]
    while p.at_punct(",") or p.at_punct("\\="):
        if p.at_punct("\\="):
            p.next()
            rhs = p.parse_term()
            body_terms[-1] = ("distinct", body_terms[-1], rhs)
        else:
            p.next()
            body_terms.append(p.parse_term())
    if p.at_punct("|"):
        for t in body_terms:
            if not (isinstance(t, tuple) and t[0] == "distinct"):
                raise ParseError("guards must be '\\=' conditions",
                                 arrow.line, arrow.col)
            guard.append(Distinct(t[1], t[2]))
        p.next()
        body_terms = [p.parse_term()]
        while p.at_punct(","):
            p.next()
            body_terms.append(p.parse_term())
    p.expect("end")
    for t in body_terms:
        if isinstance(t, tuple):
            raise ParseError("'\\=' is only allowed in guards",
                             arrow.line, arrow.col)
    body: object
    if len(body_terms) == 1 and type(body_terms[0]) is Atom:
        if body_terms[0].name == "false":
            body = "false"
        elif body_terms[0].name == "true":
            body = "true"
        else:
            body = tuple(body_terms)
    else:
        body = tuple(body_terms)
    return CHRRule(name_tok.value, kind, tuple(heads), tuple(guard), body)
