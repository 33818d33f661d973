"""Canonical textual form for terms, conjunctions, and suggestions.

Variable display: a variable carrying a source name keeps it; an unnamed
variable occurring once renders as `_`; unnamed variables occurring more
than once are numbered V0, V1, ... in order of first occurrence.  Parsing a
rendering yields a variant of the original term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .parser import Assertion, AssertionKind
from .terms import Atom, Clause, Compound, Int, Term, Var, list_parts

_BARE_ATOM = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


class _Namer:
    """Assigns display names to the variables of one rendering unit."""

    def __init__(self, terms):
        counts: dict[int, int] = {}
        named: dict[int, str] = {}
        order: list[int] = []
        taken: set[str] = set()

        def scan(root: Term) -> None:
            stack = [root]
            while stack:
                t = stack.pop()
                tp = type(t)
                if tp is Var:
                    if t.id not in counts:
                        order.append(t.id)
                    counts[t.id] = counts.get(t.id, 0) + 1
                    if t.name and t.id not in named and t.name not in taken:
                        named[t.id] = t.name
                        taken.add(t.name)
                elif tp is Compound:
                    stack.extend(reversed(t.args))

        for t in terms:
            scan(t)
        self.names: dict[int, str] = dict(named)
        counter = 0
        for vid in order:
            if vid in self.names:
                continue
            if counts[vid] == 1:
                self.names[vid] = "_"
            else:
                while f"V{counter}" in taken:
                    counter += 1
                self.names[vid] = f"V{counter}"
                taken.add(f"V{counter}")
                counter += 1

    def name(self, v: Var) -> str:
        return self.names.get(v.id, "_")


def _atom_text(name: str) -> str:
    if name == "[]" or _BARE_ATOM.match(name):
        return name
    return f"'{name}'"


def _term_text(t: Term, namer: _Namer) -> str:
    tp = type(t)
    if tp is Var:
        return namer.name(t)
    if tp is Atom:
        return _atom_text(t.name)
    if tp is Int:
        return str(t.value)
    if t.functor == "." and len(t.args) == 2:
        elems, tail = list_parts(t)
        inner = ",".join(_term_text(e, namer) for e in elems)
        if type(tail) is Atom and tail.name == "[]":
            return f"[{inner}]"
        return f"[{inner}|{_term_text(tail, namer)}]"
    args = ", ".join(_term_text(a, namer) for a in t.args)
    return f"{_atom_text(t.functor)}({args})"


def _goal_text(g: Term, namer: _Namer) -> str:
    if type(g) is Compound and g.functor == "=" and len(g.args) == 2:
        return f"{_term_text(g.args[0], namer)} = {_term_text(g.args[1], namer)}"
    return _term_text(g, namer)


def render_term(t: Term) -> str:
    return _term_text(t, _Namer([t]))


def render_goal(g: Term) -> str:
    return _goal_text(g, _Namer([g]))


def render_conjunction(goals) -> str:
    namer = _Namer(goals)
    return ", ".join(_goal_text(g, namer) for g in goals)


def render_assertion(kind: AssertionKind, goals) -> str:
    return f"{kind.token} {render_conjunction(goals)}."


def render_clause(clause: Clause, indent: str = "    ") -> str:
    """Multi-line canonical clause text (no trailing newline)."""
    namer = _Namer((clause.head,) + clause.body)
    head = _term_text(clause.head, namer)
    if not clause.body:
        return f"{head}."
    lines = [f"{head} :-"]
    for i, g in enumerate(clause.body):
        sep = "," if i < len(clause.body) - 1 else "."
        lines.append(f"{indent}{_goal_text(g, namer)}{sep}")
    return "\n".join(lines)


@dataclass(frozen=True)
class FeedbackLine:
    """One machine-owned output line; rendered form always starts "%@"."""

    severity: str  # DEF_MISSING | REF_MISMATCH | CODE_FAIL | CODE_WRONG_ANSWER |
    #                NONTERMINATION | FAIR_MISMATCH | SUGGESTION | INCONCLUSIVE
    text: str
    anchor_line: int = 0

    def render(self) -> str:
        prefix = "%@@ " if self.severity == "SUGGESTION" else "%@ "
        return prefix + self.text


def render_suggestion(equations, goals, note: str,
                      kind: AssertionKind = AssertionKind.POS,
                      anchor_line: int = 0):
    """A comment line plus an assertion suggestion, both "%@@ "-prefixed.

    Deleting the prefix from the suggestion line leaves a parseable
    assertion.  `equations` are (variable, constant) pairs rendered as
    leading `=`/2 goals.
    """
    eq_goals = tuple(Compound("=", (v, c)) for v, c in equations)
    body = render_conjunction(eq_goals + tuple(goals))
    lines = []
    if note:
        lines.append(FeedbackLine("SUGGESTION", f"% {note}", anchor_line))
    lines.append(FeedbackLine("SUGGESTION", f"{kind.token} {body}.", anchor_line))
    return lines


def suggestion_assertion_text(kind: AssertionKind, equations, goals) -> str:
    eq_goals = tuple(Compound("=", (v, c)) for v, c in equations)
    return render_assertion(kind, eq_goals + tuple(goals))
