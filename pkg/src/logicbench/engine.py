"""SLD resolution with disequality constraints and explicit budgets.

Three search modes share one core:

  * solve_dfs        -- Prolog's depth-first, left-to-right, source-order
                        search, each head-unification attempt costing one
                        budget step;
  * solve_fair       -- iterative deepening on the number of clause
                        resolutions per branch, each pass step-bounded;
  * prove_failure_loopcheck -- depth-first exploration that prunes a branch
                        whenever its selected goal is a variant of an
                        ancestor selected goal, used to prove failure.

The engine is destructive internally (bindings dict plus trail) but every
value it returns is immutable.  A run is single-threaded and deterministic:
identical inputs and budgets yield identical outcomes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

from .terms import (Atom, Clause, Compound, DifStore, Int, Program,
                    Substitution, Term, Var, goals_vars, variant_of)

BUILTIN_PREDICATES = frozenset({("true", 0), ("false", 0), ("fail", 0),
                                ("=", 2), ("dif", 2)})

# Query-level dif goals are tagged so answers can report which pending
# disequations were stated by the query itself rather than arising inside
# resolved clauses.
_QDIF = "$qdif"


@dataclass(frozen=True)
class Budget:
    max_steps: int = 100_000
    max_depth: int = 64
    per_depth_steps: int = 50_000

    def __post_init__(self) -> None:
        if self.max_steps <= 0 or self.max_depth <= 0 or self.per_depth_steps <= 0:
            raise ValueError("budget values must be positive")


DEFAULT_BUDGET = Budget()


@dataclass(frozen=True)
class Answer:
    """One solution: bindings restricted to the query's variables, plus the
    pending disequations (and the subset stated at query level)."""

    bindings: Substitution
    pending: DifStore
    query_pending: DifStore

    def unconditional(self) -> bool:
        return self.pending.is_empty()


@dataclass(frozen=True)
class Solutions:
    answers: "tuple[Answer, ...]"
    exhausted: bool
    steps_used: int
    depth: Optional[int] = None


@dataclass(frozen=True)
class FiniteFailure:
    steps_used: int


@dataclass(frozen=True)
class BudgetExhausted:
    steps_used: int


Outcome = Union[Solutions, FiniteFailure, BudgetExhausted]


@dataclass(frozen=True)
class LoopCertificate:
    """Selected goals from the root to a goal that is a variant of an
    ancestor on the same branch."""

    goals: "tuple[Term, ...]"
    ancestor_index: int

    def __post_init__(self) -> None:
        assert variant_of(self.goals[self.ancestor_index], self.goals[-1])


@dataclass(frozen=True)
class Proven:
    pruned: int
    certificate: Optional[LoopCertificate]
    steps_used: int


@dataclass(frozen=True)
class Disproven:
    witness: Answer
    steps_used: int


@dataclass(frozen=True)
class Unknown:
    steps_used: int


FailureProof = Union[Proven, Disproven, Unknown]


@dataclass(frozen=True)
class Terminates:
    outcome: Outcome


@dataclass(frozen=True)
class NonTerminating:
    certificate: LoopCertificate


TerminationResult = Union[Terminates, NonTerminating, Unknown]


class EngineError(Exception):
    pass


class UnknownPredicateError(EngineError):
    def __init__(self, functor: str, arity: int):
        super().__init__(f"unknown predicate {functor}/{arity}")
        self.functor = functor
        self.arity = arity


class UncallableGoalError(EngineError):
    pass


class _OutOfSteps(Exception):
    pass


class _VariantFound(Exception):
    pass


# A native predicate receives the run and the (unwalked) argument tuple and
# yields zero or more attempt thunks; each thunk may bind variables through
# run.unify and reports success or failure.  Attempts cost one step each.
Native = Callable[["_Run", "tuple[Term, ...]"], Iterator[Callable[[], bool]]]


def _mark_query_difs(goals) -> "tuple[Term, ...]":
    out = []
    for g in goals:
        if type(g) is Compound and g.functor == "dif" and len(g.args) == 2:
            out.append(Compound(_QDIF, g.args))
        else:
            out.append(g)
    return tuple(out)


def _cons_list(goals, tail=None):
    for g in reversed(goals):
        tail = (g, tail)
    return tail


_EMPTY_STORE = ((), frozenset())


class _Run:
    """One deterministic engine run over an immutable program."""

    def __init__(self, program: Program, goals, step_limit: int, *,
                 natives: Optional[dict] = None, unknown_fail: bool = False,
                 depth_limit: Optional[int] = None,
                 variant_mode: Optional[str] = None):
        self.program = program
        self.natives = natives or {}
        self.unknown_fail = unknown_fail
        self.step_limit = step_limit
        self.depth_limit = depth_limit
        self.variant_mode = variant_mode  # None | 'prune' | 'stop'

        self.query_goals = tuple(goals)
        self.query_vars = goals_vars(self.query_goals)
        self._qvar_ids = {v.id for v in self.query_vars}

        self.bindings: dict[int, Term] = {}
        self.trail: list[int] = []
        start = max((v.id for v in self.query_vars), default=-1)
        start = max(start, program.max_var_id()) + 1
        self._fresh = itertools.count(start)

        self.steps = 0
        self.cutoff_hit = False
        self.pruned = 0
        self.first_certificate: Optional[LoopCertificate] = None
        self.out_of_steps = False
        self.completed = False
        self._stack: list = []

    # -- bindings ------------------------------------------------------

    def walk(self, t: Term) -> Term:
        b = self.bindings
        while type(t) is Var:
            nxt = b.get(t.id)
            if nxt is None:
                return t
            t = nxt
        return t

    def resolve(self, t: Term) -> Term:
        """Deep-apply the current bindings (iterative; terms can nest deep)."""
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

    def fresh(self) -> Var:
        return Var(next(self._fresh))

    def _occurs(self, vid: int, t: Term) -> bool:
        stack = [t]
        while stack:
            s = self.walk(stack.pop())
            tp = type(s)
            if tp is Var:
                if s.id == vid:
                    return True
            elif tp is Compound:
                stack.extend(s.args)
        return False

    def _bind(self, v: Var, t: Term) -> None:
        self.bindings[v.id] = t
        self.trail.append(v.id)

    def undo_to(self, mark: int) -> None:
        b, tr = self.bindings, self.trail
        while len(tr) > mark:
            del b[tr.pop()]

    def unify(self, a: Term, b: Term) -> bool:
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            x = self.walk(x)
            y = self.walk(y)
            if x is y:
                continue
            tx, ty = type(x), type(y)
            if tx is Var:
                if ty is Var:
                    if x.id != y.id:
                        self._bind(x, y)
                    continue
                if self._occurs(x.id, y):
                    return False
                self._bind(x, y)
                continue
            if ty is Var:
                if self._occurs(y.id, x):
                    return False
                self._bind(y, x)
                continue
            if tx is Atom:
                if ty is not Atom or x.name != y.name:
                    return False
                continue
            if tx is Int:
                if ty is not Int or x.value != y.value:
                    return False
                continue
            if (ty is not Compound or x.functor != y.functor
                    or len(x.args) != len(y.args)):
                return False
            stack.extend(zip(x.args, y.args))
        return True

    def compare(self, a: Term, b: Term) -> str:
        """'identical' | 'clash' | 'pending' under the current bindings."""
        mark = len(self.trail)
        ok = self.unify(a, b)
        bound = len(self.trail) > mark
        self.undo_to(mark)
        if not ok:
            return "clash"
        return "pending" if bound else "identical"

    # -- disequation store ----------------------------------------------
    #
    # store = (entries, ids): entries are (a, b, from_query, free var ids)
    # and ids is the union of every entry's free variables.  A pending pair
    # can only change state when one of its free variables is bound, so a
    # recheck first tests the trail delta against `ids` and usually returns
    # the store untouched.

    def _free_ids(self, a: Term, b: Term) -> frozenset:
        out = set()
        stack = [a, b]
        while stack:
            s = self.walk(stack.pop())
            tp = type(s)
            if tp is Var:
                out.add(s.id)
            elif tp is Compound:
                stack.extend(s.args)
        return frozenset(out)

    def _recheck(self, store, bound_ids):
        entries, ids = store
        if not entries or ids.isdisjoint(bound_ids):
            return store
        bound = frozenset(bound_ids)
        out = []
        union = frozenset()
        for entry in entries:
            if entry[3].isdisjoint(bound):
                out.append(entry)
                union |= entry[3]
                continue
            state = self.compare(entry[0], entry[1])
            if state == "identical":
                return None
            if state == "pending":
                free = self._free_ids(entry[0], entry[1])
                out.append((entry[0], entry[1], entry[2], free))
                union |= free
        return (tuple(out), union)

    def _add_dif(self, store, a: Term, b: Term, from_query: bool):
        state = self.compare(a, b)
        if state == "identical":
            return None
        if state == "clash":
            return store
        free = self._free_ids(a, b)
        entries, ids = store
        return (entries + ((a, b, from_query, free),), ids | free)

    # -- resolution ----------------------------------------------------

    def _rename(self, clause: Clause) -> Clause:
        mapping: dict[int, Var] = {}

        def rn(t: Term) -> Term:
            tp = type(t)
            if tp is Var:
                w = mapping.get(t.id)
                if w is None:
                    w = self.fresh()
                    mapping[t.id] = w
                return w
            if tp is Compound:
                return Compound(t.functor, tuple(rn(a) for a in t.args))
            return t

        return Clause(rn(clause.head), tuple(rn(g) for g in clause.body))

    def _charge(self) -> None:
        self.steps += 1
        if self.steps > self.step_limit:
            self.steps = self.step_limit
            raise _OutOfSteps

    def _advance(self, goals, depth: int, store):
        """Run deterministic builtins; stop at a solution, a failure, or a
        goal that needs clause or native resolution."""
        while goals is not None:
            g, rest = goals
            g = self.walk(g)
            tg = type(g)
            if tg is Var or tg is Int:
                raise UncallableGoalError(f"uncallable goal: {g!r}")
            if tg is Atom:
                name = g.name
                if name == "true":
                    goals = rest
                    continue
                if name in ("false", "fail"):
                    return ("fail",)
                key = (name, 0)
            else:
                key = (g.functor, len(g.args))
                if key == ("=", 2):
                    mark = len(self.trail)
                    if not self.unify(g.args[0], g.args[1]):
                        return ("fail",)
                    store = self._recheck(store, self.trail[mark:])
                    if store is None:
                        return ("fail",)
                    goals = rest
                    continue
                if key[1] == 2 and key[0] in ("dif", _QDIF):
                    store = self._add_dif(store, g.args[0], g.args[1],
                                          key[0] == _QDIF)
                    if store is None:
                        return ("fail",)
                    goals = rest
                    continue
            return ("call", g, key, rest, depth, store)
        return ("sol", store)

    def _ancestor_check(self, goal: Term, ancestors):
        """Snapshot the selected goal; detect a variant ancestor."""
        snap = self.resolve(goal)
        chain = []
        node = ancestors
        while node is not None:
            chain.append(node[0])
            node = node[1]
        chain.reverse()
        for i, anc in enumerate(chain):
            if variant_of(anc, snap):
                cert = LoopCertificate(tuple(chain) + (snap,), i)
                if self.first_certificate is None:
                    self.first_certificate = cert
                if self.variant_mode == "stop":
                    raise _VariantFound
                self.pruned += 1
                return None
        return snap

    def _extract(self, store) -> Answer:
        ren: dict[int, Var] = {}
        claimed: set[int] = set()
        for v in self.query_vars:
            w = self.walk(v)
            if (type(w) is Var and w.id != v.id and w.id not in self._qvar_ids
                    and w.id not in claimed):
                ren[w.id] = v
                claimed.add(w.id)

        def res(t: Term) -> Term:
            t = self.walk(t)
            tp = type(t)
            if tp is Var:
                return ren.get(t.id, t)
            if tp is Compound:
                return Compound(t.functor, tuple(res(a) for a in t.args))
            return t

        bindings: dict[int, Term] = {}
        for v in self.query_vars:
            t = res(v)
            if not (type(t) is Var and t.id == v.id):
                bindings[v.id] = t
        pend: list[tuple[Term, Term]] = []
        qpend: list[tuple[Term, Term]] = []
        for a, b, from_query, _ in store[0]:
            pair = (res(a), res(b))
            if pair not in pend:
                pend.append(pair)
            if from_query and pair not in qpend:
                qpend.append(pair)
        return Answer(Substitution(bindings), DifStore(tuple(pend)),
                      DifStore(tuple(qpend)))

    # -- the search loop -----------------------------------------------

    # Frame layout: [trail_mark, goal, rest_goals, depth, store, ancestors,
    #                clause_positions or None, next_index, native_iter or None]

    def _push(self, st, ancestors) -> bool:
        _, goal, key, rest, depth, store = st
        native = self.natives.get(key)
        anc = ancestors
        if native is None:
            if self.variant_mode is not None:
                snap = self._ancestor_check(goal, ancestors)
                if snap is None:
                    return False  # pruned
                anc = (snap, ancestors)
            if self.depth_limit is not None and depth >= self.depth_limit:
                self.cutoff_hit = True
                return False
            positions = self.program.clauses_for(key)
            if not positions and key not in BUILTIN_PREDICATES:
                if self.unknown_fail:
                    return False
                raise UnknownPredicateError(key[0], key[1])
            self._stack.append([len(self.trail), goal, rest, depth, store,
                                anc, positions, 0, None])
        else:
            args = tuple(goal.args) if type(goal) is Compound else ()
            self._stack.append([len(self.trail), goal, rest, depth, store,
                                anc, None, 0, native(self, args)])
        return True

    def answers(self) -> Iterator[Answer]:
        """Depth-first generator of answers.  After exhaustion, inspect
        `completed` / `out_of_steps` / `cutoff_hit` for how it ended."""
        stack = self._stack
        clauses = self.program.clauses
        try:
            st = self._advance(_cons_list(_mark_query_difs(self.query_goals)), 0,
                               _EMPTY_STORE)
            if st[0] == "sol":
                self.completed = True
                yield self._extract(st[1])
                return
            if st[0] == "fail":
                self.completed = True
                return
            if not self._push(st, None):
                self.completed = True
                return
            while stack:
                frame = stack[-1]
                self.undo_to(frame[0])
                positions = frame[6]
                if positions is not None:
                    idx = frame[7]
                    if idx >= len(positions):
                        stack.pop()
                        continue
                    frame[7] = idx + 1
                    self._charge()
                    rc = self._rename(clauses[positions[idx]])
                    if not self.unify(rc.head, frame[1]):
                        continue
                    new_store = self._recheck(frame[4], self.trail[frame[0]:])
                    if new_store is None:
                        continue
                    st = self._advance(_cons_list(rc.body, frame[2]),
                                       frame[3] + 1, new_store)
                else:
                    thunk = next(frame[8], None)
                    if thunk is None:
                        stack.pop()
                        continue
                    self._charge()
                    if not thunk():
                        continue
                    new_store = self._recheck(frame[4], self.trail[frame[0]:])
                    if new_store is None:
                        continue
                    st = self._advance(frame[2], frame[3], new_store)
                if st[0] == "fail":
                    continue
                if st[0] == "sol":
                    yield self._extract(st[1])
                    continue
                self._push(st, frame[5])
            self.completed = True
        except _OutOfSteps:
            self.out_of_steps = True
        except _VariantFound:
            pass

    @property
    def exhausted_now(self) -> bool:
        return not self._stack


# -- public operations -------------------------------------------------


def dfs_stream(program: Program, goals, budget: Budget, *,
               natives: Optional[dict] = None, unknown_fail: bool = False) -> _Run:
    """A run prepared for lazy answer consumption via `.answers()`."""
    return _Run(program, goals, budget.max_steps, natives=natives,
                unknown_fail=unknown_fail)


def solve_dfs(program: Program, goals, budget: Budget = DEFAULT_BUDGET,
              want: str = "all", *, natives: Optional[dict] = None,
              unknown_fail: bool = False) -> Outcome:
    """Depth-first search; clauses in source order, leftmost goal first."""
    run = dfs_stream(program, goals, budget, natives=natives,
                     unknown_fail=unknown_fail)
    answers = []
    exhausted_at_yield = False
    for a in run.answers():
        answers.append(a)
        if want == "first":
            exhausted_at_yield = run.exhausted_now
            break
    if want == "first" and answers:
        return Solutions(tuple(answers), exhausted_at_yield, run.steps)
    if run.out_of_steps:
        if answers:
            return Solutions(tuple(answers), False, run.steps)
        return BudgetExhausted(run.steps)
    if answers:
        return Solutions(tuple(answers), True, run.steps)
    return FiniteFailure(run.steps)


def solve_fair(program: Program, goals, budget: Budget = DEFAULT_BUDGET, *,
               natives: Optional[dict] = None,
               unknown_fail: bool = False) -> Outcome:
    """Iterative deepening on resolution depth d = 1, 2, ..., max_depth.

    Each pass is bounded by per_depth_steps (and the global step budget);
    the first answer found is returned.  FiniteFailure requires some pass to
    complete with no depth cutoff.
    """
    total = 0
    for d in range(1, budget.max_depth + 1):
        limit = min(budget.per_depth_steps, budget.max_steps - total)
        if limit <= 0:
            return BudgetExhausted(total)
        run = _Run(program, goals, limit, natives=natives,
                   unknown_fail=unknown_fail, depth_limit=d)
        answer = next(run.answers(), None)
        total += run.steps
        if answer is not None:
            return Solutions((answer,), False, total, depth=d)
        if run.out_of_steps:
            return BudgetExhausted(total)
        if not run.cutoff_hit:
            return FiniteFailure(total)
    return BudgetExhausted(total)


def prove_failure_loopcheck(program: Program, goals,
                            budget: Budget = DEFAULT_BUDGET, *,
                            natives: Optional[dict] = None,
                            unknown_fail: bool = False) -> FailureProof:
    """Prove that the goals cannot succeed.

    The derivation tree is explored depth-first; a branch whose selected
    goal is a variant of an ancestor selected goal is pruned.  Proven
    requires complete coverage of the pruned tree within budget; the number
    of pruning events is reported because pruning is not sound in general.
    """
    run = _Run(program, goals, budget.max_steps, natives=natives,
               unknown_fail=unknown_fail, variant_mode="prune")
    for a in run.answers():
        return Disproven(a, run.steps)
    if run.out_of_steps:
        return Unknown(run.steps)
    return Proven(run.pruned, run.first_certificate, run.steps)


def find_loop_certificate(program: Program, goals,
                          budget: Budget = DEFAULT_BUDGET, *,
                          natives: Optional[dict] = None,
                          unknown_fail: bool = False) -> Optional[LoopCertificate]:
    """First variant-ancestor pair along the depth-first frontier, if any."""
    run = _Run(program, goals, budget.max_steps, natives=natives,
               unknown_fail=unknown_fail, variant_mode="stop")
    for _ in run.answers():
        pass
    return run.first_certificate


def check_universal_termination(program: Program, goals,
                                budget: Budget = DEFAULT_BUDGET, *,
                                natives: Optional[dict] = None,
                                unknown_fail: bool = False) -> TerminationResult:
    """Does the search for all solutions of the goals finish finitely?

    Equivalent to running (goals, false) to exhaustion, but the Terminates
    payload keeps the solutions outcome so callers can tell unexpected
    success from plain finite failure.  NonTerminating always carries a loop
    certificate; budget exhaustion alone yields Unknown.
    """
    out = solve_dfs(program, goals, budget, "all", natives=natives,
                    unknown_fail=unknown_fail)
    if isinstance(out, FiniteFailure):
        return Terminates(out)
    if isinstance(out, Solutions) and out.exhausted:
        return Terminates(out)
    cert = find_loop_certificate(program, goals, budget, natives=natives,
                                 unknown_fail=unknown_fail)
    if cert is not None:
        return NonTerminating(cert)
    return Unknown(out.steps_used)
