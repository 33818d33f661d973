"""Term representation and the operations everything else is built on.

Terms are immutable: variables (identified by integer id), atoms, integers,
and compounds.  Lists are ordinary compounds '.'/2 terminated by the atom
'[]'.  Substitutions are triangular (a binding may map a variable to a term
containing further bound variables); `Substitution.apply` resolves fully, so
applying twice equals applying once.  Unification runs with the occurs check
on, and cooperates with a store of pending disequations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class Var:
    """A logic variable.  Identity is the id; the name is display-only."""

    id: int
    name: Optional[str] = field(default=None, compare=False)

    def __repr__(self) -> str:
        return f"Var({self.id}{',' + self.name if self.name else ''})"


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Int:
    value: int


@dataclass(frozen=True)
class Compound:
    functor: str
    args: "tuple[Term, ...]"

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("compound terms have arity >= 1; use Atom for arity 0")


Term = Union[Var, Atom, Int, Compound]

EMPTY_LIST = Atom("[]")
TRUE = Atom("true")
FALSE = Atom("false")


def cons(head: Term, tail: Term) -> Compound:
    return Compound(".", (head, tail))


def make_list(items, tail: Term = EMPTY_LIST) -> Term:
    out = tail
    for item in reversed(list(items)):
        out = cons(item, out)
    return out


def list_parts(t: Term) -> "tuple[list[Term], Term]":
    """Split a (possibly open) list into its element prefix and tail term."""
    elems: list[Term] = []
    while type(t) is Compound and t.functor == "." and len(t.args) == 2:
        elems.append(t.args[0])
        t = t.args[1]
    return elems, t


class VarAllocator:
    """Hands out fresh variable ids.  Passed explicitly; no global state."""

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)

    def fresh(self, name: Optional[str] = None) -> Var:
        return Var(next(self._counter), name)


def term_vars(t: Term, acc: Optional[list[Var]] = None, seen: Optional[set[int]] = None) -> list[Var]:
    """All distinct variables of `t` in first-occurrence (pre-order) order."""
    if acc is None:
        acc, seen = [], set()
    assert seen is not None
    stack = [t]
    while stack:
        s = stack.pop()
        tp = type(s)
        if tp is Var:
            if s.id not in seen:
                seen.add(s.id)
                acc.append(s)
        elif tp is Compound:
            stack.extend(reversed(s.args))
    return acc


def goals_vars(goals) -> list[Var]:
    acc: list[Var] = []
    seen: set[int] = set()
    for g in goals:
        term_vars(g, acc, seen)
    return acc


def term_size(t: Term) -> int:
    """Number of nodes in the term tree."""
    n = 0
    stack = [t]
    while stack:
        s = stack.pop()
        n += 1
        if type(s) is Compound:
            stack.extend(s.args)
    return n


def max_var_id(t: Term) -> int:
    top = -1
    stack = [t]
    while stack:
        s = stack.pop()
        tp = type(s)
        if tp is Var:
            top = max(top, s.id)
        elif tp is Compound:
            stack.extend(s.args)
    return top


def is_ground(t: Term) -> bool:
    stack = [t]
    while stack:
        s = stack.pop()
        tp = type(s)
        if tp is Var:
            return False
        if tp is Compound:
            stack.extend(s.args)
    return True


@dataclass(frozen=True)
class Substitution:
    """Mapping from variable id to term.  Treated as immutable."""

    bindings: "dict[int, Term]" = field(default_factory=dict)

    def walk(self, t: Term) -> Term:
        """Follow variable bindings until an unbound variable or non-var."""
        while type(t) is Var:
            nxt = self.bindings.get(t.id)
            if nxt is None:
                return t
            t = nxt
        return t

    def apply(self, t: Term) -> Term:
        """Resolve `t` fully; the result contains no bound variables."""
        t = self.walk(t)
        if type(t) is not Compound:
            return t
        frames: list[list] = [[t, [], 0]]
        result: Term = t
        while frames:
            node, acc, idx = frames[-1]
            if idx == len(node.args):
                frames.pop()
                built = Compound(node.functor, tuple(acc))
                if frames:
                    frames[-1][1].append(built)
                    frames[-1][2] += 1
                else:
                    result = built
                continue
            child = self.walk(node.args[idx])
            if type(child) is Compound:
                frames.append([child, [], 0])
            else:
                acc.append(child)
                frames[-1][2] += 1
        return result

    def apply_all(self, goals) -> "tuple[Term, ...]":
        return tuple(self.apply(g) for g in goals)

    def is_empty(self) -> bool:
        return not self.bindings

    def items(self):
        return self.bindings.items()


EMPTY_SUBST = Substitution({})


@dataclass(frozen=True)
class DifStore:
    """Pending disequations.  Pairs are kept in substitution-applied form."""

    pairs: "tuple[tuple[Term, Term], ...]" = ()

    def is_empty(self) -> bool:
        return not self.pairs

    def __iter__(self) -> Iterator["tuple[Term, Term]"]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


EMPTY_DIFS = DifStore(())


@dataclass(frozen=True)
class Clause:
    """`head.` for facts, `head :- g1, ..., gn.` otherwise."""

    head: Term
    body: "tuple[Term, ...]" = ()
    source_line: int = 0

    def __post_init__(self) -> None:
        if type(self.head) in (Var, Int):
            raise ValueError("clause head must be an atom or compound")

    @property
    def key(self) -> "tuple[str, int]":
        return pred_key(self.head)


def pred_key(goal: Term) -> "tuple[str, int]":
    """(functor, arity) of a callable term."""
    tg = type(goal)
    if tg is Atom:
        return (goal.name, 0)
    if tg is Compound:
        return (goal.functor, len(goal.args))
    raise ValueError(f"not a callable term: {goal!r}")


class Program:
    """An ordered clause database with a (functor, arity) index."""

    def __init__(self, clauses):
        self.clauses: tuple[Clause, ...] = tuple(clauses)
        index: dict[tuple[str, int], list[int]] = {}
        for i, c in enumerate(self.clauses):
            index.setdefault(c.key, []).append(i)
        self.index: dict[tuple[str, int], tuple[int, ...]] = {
            k: tuple(v) for k, v in index.items()
        }
        self._max_var_id = max(
            (max(max_var_id(c.head), *(max_var_id(g) for g in c.body))
             if c.body else max_var_id(c.head))
            for c in self.clauses
        ) if self.clauses else -1

    def clauses_for(self, key) -> "tuple[int, ...]":
        return self.index.get(key, ())

    def predicates(self) -> "set[tuple[str, int]]":
        return set(self.index)

    def max_var_id(self) -> int:
        return self._max_var_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Program) and self.clauses == other.clauses

    def __len__(self) -> int:
        return len(self.clauses)


def _unify_into(bindings: dict, t1: Term, t2: Term) -> bool:
    """Destructive unification into `bindings`, occurs check on."""

    def walk(t: Term) -> Term:
        while type(t) is Var:
            nxt = bindings.get(t.id)
            if nxt is None:
                return t
            t = nxt
        return t

    def occurs(vid: int, t: Term) -> bool:
        pending = [t]
        while pending:
            s = walk(pending.pop())
            tp = type(s)
            if tp is Var:
                if s.id == vid:
                    return True
            elif tp is Compound:
                pending.extend(s.args)
        return False

    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a, b = walk(a), walk(b)
        if a is b:
            continue
        ta, tb = type(a), type(b)
        if ta is Var:
            if tb is Var and a.id == b.id:
                continue
            if occurs(a.id, b):
                return False
            bindings[a.id] = b
        elif tb is Var:
            if occurs(b.id, a):
                return False
            bindings[b.id] = a
        elif ta is Atom:
            if tb is not Atom or a.name != b.name:
                return False
        elif ta is Int:
            if tb is not Int or a.value != b.value:
                return False
        else:
            if tb is not Compound or a.functor != b.functor or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
    return True


def _compare(bindings: dict, a: Term, b: Term) -> str:
    """'identical', 'clash' (non-unifiable), or 'pending' under `bindings`."""
    probe = dict(bindings)
    if not _unify_into(probe, a, b):
        return "clash"
    return "pending" if len(probe) > len(bindings) else "identical"


def unify(t1: Term, t2: Term, subst: Substitution = EMPTY_SUBST,
          difs: DifStore = EMPTY_DIFS):
    """Most general unifier of t1 and t2 extending `subst`.

    Every pending disequation is rechecked: a pair that became identical
    fails the whole unification, a pair that became non-unifiable is
    entailed and dropped, anything else stays pending.  Returns
    (Substitution, DifStore) or None on failure.
    """
    work = dict(subst.bindings)
    if not _unify_into(work, t1, t2):
        return None
    result = Substitution(work)
    kept: list[tuple[Term, Term]] = []
    for (a, b) in difs.pairs:
        state = _compare(work, a, b)
        if state == "identical":
            return None
        if state == "pending":
            pair = (result.apply(a), result.apply(b))
            if pair not in kept:
                kept.append(pair)
    return result, DifStore(tuple(kept))


def add_dif(subst: Substitution, difs: DifStore, a: Term, b: Term):
    """Record dif(a, b): None if violated, else the updated store."""
    state = _compare(subst.bindings, a, b)
    if state == "identical":
        return None
    if state == "clash":
        return difs
    pair = (subst.apply(a), subst.apply(b))
    if pair in difs.pairs:
        return difs
    return DifStore(difs.pairs + (pair,))


def variant_of(t1: Term, t2: Term) -> bool:
    """True iff a bijective variable renaming maps t1 onto t2."""
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        ta, tb = type(a), type(b)
        if ta is Var:
            if tb is not Var:
                return False
            if fwd.setdefault(a.id, b.id) != b.id:
                return False
            if bwd.setdefault(b.id, a.id) != a.id:
                return False
        elif ta is Atom:
            if tb is not Atom or a.name != b.name:
                return False
        elif ta is Int:
            if tb is not Int or a.value != b.value:
                return False
        else:
            if tb is not Compound or a.functor != b.functor or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
    return True


def variant_goals(g1, g2) -> bool:
    """Variant check over whole conjunctions (shared renaming)."""
    if len(g1) != len(g2):
        return False
    w1 = g1[0] if len(g1) == 1 else Compound(",", tuple(g1))
    w2 = g2[0] if len(g2) == 1 else Compound(",", tuple(g2))
    return variant_of(w1, w2)


def match_one_way(pattern: Term, term: Term, bindings: Optional[dict] = None):
    """Match `term` against `pattern` binding only pattern variables.

    Returns the binding dict (pattern var id -> subterm) or None.  A pattern
    variable seen twice must map to syntactically identical subterms.
    """
    if bindings is None:
        bindings = {}
    stack = [(pattern, term)]
    while stack:
        p, t = stack.pop()
        tp = type(p)
        if tp is Var:
            prev = bindings.get(p.id)
            if prev is None:
                bindings[p.id] = t
            elif prev != t:
                return None
        elif tp is Atom:
            if type(t) is not Atom or p.name != t.name:
                return None
        elif tp is Int:
            if type(t) is not Int or p.value != t.value:
                return None
        else:
            if type(t) is not Compound or p.functor != t.functor or len(p.args) != len(t.args):
                return None
            stack.extend(zip(p.args, t.args))
    return bindings


def instance_of(t: Term, general: Term) -> bool:
    """True iff `t` is an instance of `general`."""
    return match_one_way(general, t) is not None


def ground_with_any(goal: Term, start_index: int = 0):
    """Bind every free variable of `goal` to a fresh constant any<k>.

    Variables are numbered in first-occurrence order starting at
    `start_index`.  Returns the grounded term and the bindings as
    (variable, constant) equations.
    """
    if start_index < 0:
        raise ValueError("start_index must be >= 0")
    frees = term_vars(goal)
    bindings = [(v, Atom(f"any{start_index + k}")) for k, v in enumerate(frees)]
    mapping = {v.id: c for v, c in bindings}

    def subst(t: Term) -> Term:
        tp = type(t)
        if tp is Var:
            return mapping.get(t.id, t)
        if tp is Compound:
            return Compound(t.functor, tuple(subst(a) for a in t.args))
        return t

    return subst(goal), bindings


def enumerate_subterms(goal: Term):
    """All subterm positions inside the arguments of `goal`, in pre-order.

    Positions are paths of 1-based argument indices; the goal's own functor
    position is excluded.
    """
    out: list[tuple[tuple[int, ...], Term]] = []
    if type(goal) is not Compound:
        return out

    def walk(t: Term, path: tuple[int, ...]) -> None:
        out.append((path, t))
        if type(t) is Compound:
            for i, a in enumerate(t.args, start=1):
                walk(a, path + (i,))

    for i, a in enumerate(goal.args, start=1):
        walk(a, (i,))
    return out


def replace_at(goal: Term, path: "tuple[int, ...]", replacement: Term) -> Term:
    """Return `goal` with the subterm at `path` replaced."""
    if not path:
        return replacement
    if type(goal) is not Compound:
        raise ValueError("path leads into a leaf")
    i = path[0] - 1
    args = list(goal.args)
    args[i] = replace_at(args[i], path[1:], replacement)
    return Compound(goal.functor, tuple(args))


def rename_apart(clause: Clause, allocator: VarAllocator) -> Clause:
    """Replace every variable of the clause by a fresh one."""
    mapping: dict[int, Var] = {}

    def rn(t: Term) -> Term:
        tp = type(t)
        if tp is Var:
            w = mapping.get(t.id)
            if w is None:
                w = allocator.fresh()
                mapping[t.id] = w
            return w
        if tp is Compound:
            return Compound(t.functor, tuple(rn(a) for a in t.args))
        return t

    return Clause(rn(clause.head), tuple(rn(g) for g in clause.body), clause.source_line)
