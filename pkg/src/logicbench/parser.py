"""Source file parsing.

A source file holds clauses, assertions, comments, and machine feedback
lines, one clause or assertion per line group (a clause may span several
lines; it ends at a `.` followed by whitespace or a comment).  Assertions
are introduced by one of the tokens

    <-      positive        (the goal must have a solution)
    </-     negative        (the goal must have none; with a trailing
                             `false` it demands universal termination)
    <<-     fair positive   (a solution must exist under fair search)
    <</-    fair negative   (no solution even under fair search; with a
                             trailing `false` it demands non-termination)

Lines starting with `%@` are machine-owned and survive as MachineItem so
re-annotation stays idempotent.  Parsing preserves the raw text of every
user item byte for byte.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from .terms import (Atom, Clause, Compound, Int, Program, Term, Var,
                    VarAllocator, make_list)

MACHINE_PREFIX = "%@"

ASSERTION_TOKENS = {
    "<-": "POS",
    "</-": "NEG",
    "<<-": "POSFAIR",
    "<</-": "NEGFAIR",
}

BUILTIN_GOALS = {("true", 0), ("false", 0), ("fail", 0), ("=", 2), ("dif", 2)}


class AssertionKind(enum.Enum):
    POS = "<-"
    NEG = "</-"
    POSFAIR = "<<-"
    NEGFAIR = "<</-"

    @property
    def token(self) -> str:
        return self.value


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int = 0):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Assertion:
    kind: AssertionKind
    goals: "tuple[Term, ...]"
    source_line: int = 0

    def ends_in_false(self) -> bool:
        last = self.goals[-1]
        return type(last) is Atom and last.name in ("false", "fail")


@dataclass(frozen=True)
class ClauseItem:
    clause: Clause
    raw: str
    line: int


@dataclass(frozen=True)
class AssertionItem:
    assertion: Assertion
    raw: str
    line: int


@dataclass(frozen=True)
class CommentItem:
    raw: str
    line: int


@dataclass(frozen=True)
class MachineItem:
    text: str  # full line content, starts with "%@", no newline
    line: int


Item = Union[ClauseItem, AssertionItem, CommentItem, MachineItem]


@dataclass(frozen=True)
class SourceFile:
    name: str
    items: "tuple[Item, ...]"

    def clauses(self) -> "tuple[Clause, ...]":
        return tuple(it.clause for it in self.items if isinstance(it, ClauseItem))

    def assertions(self) -> "tuple[Assertion, ...]":
        return tuple(it.assertion for it in self.items if isinstance(it, AssertionItem))

    def program(self) -> Program:
        return Program(self.clauses())


def render_file(sf: SourceFile) -> str:
    parts = []
    for it in sf.items:
        if isinstance(it, MachineItem):
            parts.append(it.text + "\n")
        else:
            parts.append(it.raw)
    return "".join(parts)


def strip_machine_lines(sf: SourceFile) -> SourceFile:
    return SourceFile(sf.name, tuple(it for it in sf.items
                                     if not isinstance(it, MachineItem)))


# --- tokenizer -------------------------------------------------------------

_PUNCT = ("<</-", "<<-", "</-", "<-", ":-", "==>", "<=>", "\\=", "~>",
          "@", "(", ")", "[", "]", "|", ",", "=")


@dataclass(frozen=True)
class Token:
    kind: str  # 'atom' | 'var' | 'int' | 'punct' | 'end'
    value: str
    line: int
    col: int


def tokenize(text: str, base_line: int = 1) -> "list[Token]":
    toks: list[Token] = []
    i, line, col = 0, base_line, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == ".":
            nxt = text[i + 1] if i + 1 < n else ""
            if nxt in ("", " ", "\t", "\r", "\n", "%"):
                toks.append(Token("end", ".", line, col))
                i += 1
                col += 1
                continue
            raise ParseError("unexpected '.'", line, col)
        matched = None
        for p in _PUNCT:
            if text.startswith(p, i):
                matched = p
                break
        if matched:
            toks.append(Token("punct", matched, line, col))
            i += len(matched)
            col += len(matched)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch == "'":
            j = text.find("'", i + 1)
            if j < 0 or "\n" in text[i:j]:
                raise ParseError("unterminated quoted atom", line, col)
            toks.append(Token("atom", text[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "var" if (ch == "_" or ch.isupper()) else "atom"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    return toks


# --- sentence parser -------------------------------------------------------

class _SentenceParser:
    def __init__(self, tokens: "list[Token]", allocator: VarAllocator):
        self.toks = tokens
        self.pos = 0
        self.allocator = allocator
        self.varmap: dict[str, Var] = {}

    def peek(self) -> Optional[Token]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else Token("end", "", 0, 0)
            raise ParseError("unexpected end of clause", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value or kind
            raise ParseError(f"expected {want!r}, found {tok.value!r}", tok.line, tok.col)
        return tok

    def at_punct(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "punct" and tok.value == value

    def parse_sentence(self):
        tok = self.peek()
        assert tok is not None
        if tok.kind == "punct" and tok.value in ASSERTION_TOKENS:
            self.next()
            kind = AssertionKind[ASSERTION_TOKENS[tok.value]]
            goals = self.parse_conjunction()
            self.expect("end")
            self._done()
            return Assertion(kind, goals, tok.line)
        head = self.parse_term()
        if type(head) in (Var, Int):
            raise ParseError("clause head must be an atom or compound", tok.line, tok.col)
        body: tuple[Term, ...] = ()
        if self.at_punct(":-"):
            self.next()
            body = self.parse_conjunction()
        self.expect("end")
        self._done()
        for g in body:
            if type(g) in (Var, Int):
                raise ParseError("clause body goals must be callable", tok.line, tok.col)
        return Clause(head, body, tok.line)

    def _done(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise ParseError("only one clause or assertion per line group",
                             tok.line, tok.col)

    def parse_conjunction(self) -> "tuple[Term, ...]":
        goals = [self.parse_goal()]
        while self.at_punct(","):
            self.next()
            goals.append(self.parse_goal())
        return tuple(goals)

    def parse_goal(self) -> Term:
        tok = self.peek()
        t = self.parse_term()
        if self.at_punct("="):
            self.next()
            rhs = self.parse_term()
            return Compound("=", (t, rhs))
        if type(t) in (Var, Int):
            assert tok is not None
            raise ParseError("goals must be callable terms", tok.line, tok.col)
        return t

    def parse_term(self) -> Term:
        tok = self.next()
        if tok.kind == "var":
            if tok.value == "_":
                return self.allocator.fresh()
            v = self.varmap.get(tok.value)
            if v is None:
                v = self.allocator.fresh(tok.value)
                self.varmap[tok.value] = v
            return v
        if tok.kind == "int":
            return Int(int(tok.value))
        if tok.kind == "atom":
            if self.at_punct("("):
                self.next()
                args = [self.parse_term()]
                while self.at_punct(","):
                    self.next()
                    args.append(self.parse_term())
                self.expect("punct", ")")
                return Compound(tok.value, tuple(args))
            return Atom(tok.value)
        if tok.kind == "punct" and tok.value == "[":
            return self.parse_list(tok)
        if tok.kind == "punct" and tok.value == "~>":
            raise ParseError("viewer assertions ('Viewer ~> Goal') are not supported",
                             tok.line, tok.col)
        raise ParseError(f"unexpected token {tok.value!r}", tok.line, tok.col)

    def parse_list(self, opening: Token) -> Term:
        if self.at_punct("]"):
            self.next()
            return Atom("[]")
        items = [self.parse_term()]
        while self.at_punct(","):
            self.next()
            items.append(self.parse_term())
        tail: Term = Atom("[]")
        if self.at_punct("|"):
            self.next()
            tail = self.parse_term()
        self.expect("punct", "]")
        return make_list(items, tail)


def _sentence_complete(tokens: "list[Token]") -> bool:
    return any(t.kind == "end" for t in tokens)


def parse_file(text: str, name: str = "<input>") -> SourceFile:
    """Parse a whole source file; raises ParseError on the first problem."""
    allocator = VarAllocator()
    items: list[Item] = []
    lines = text.splitlines(keepends=True)
    i = 0
    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        stripped = raw.rstrip("\n").rstrip("\r")
        if stripped.startswith(MACHINE_PREFIX):
            items.append(MachineItem(stripped, lineno))
            i += 1
            continue
        if not stripped.strip() or stripped.lstrip().startswith("%"):
            items.append(CommentItem(raw, lineno))
            i += 1
            continue
        # accumulate a sentence; machine lines inside are extracted, full
        # comment lines stay part of the sentence's raw text
        buf = [raw]
        start = lineno
        j = i + 1
        toks = tokenize(raw, start)
        while not _sentence_complete(toks):
            if j >= len(lines):
                raise ParseError("clause or assertion not terminated by '.'", start, 1)
            nxt = lines[j]
            nxt_stripped = nxt.rstrip("\n").rstrip("\r")
            if nxt_stripped.startswith(MACHINE_PREFIX):
                items.append(MachineItem(nxt_stripped, j + 1))
                j += 1
                continue
            buf.append(nxt)
            toks = tokenize("".join(buf), start)
            j += 1
        parser = _SentenceParser(toks, allocator)
        parsed = parser.parse_sentence()
        rawtext = "".join(buf)
        if isinstance(parsed, Assertion):
            items.append(AssertionItem(parsed, rawtext, start))
        else:
            items.append(ClauseItem(parsed, rawtext, start))
        i = j
    return SourceFile(name, tuple(items))


def parse_query(text: str, allocator: Optional[VarAllocator] = None) -> "tuple[Term, ...]":
    """Parse a goal conjunction like "X = a, p(X)" (test and CLI helper)."""
    toks = tokenize(text + " .")
    parser = _SentenceParser(toks, allocator or VarAllocator())
    goals = parser.parse_conjunction()
    parser.expect("end")
    return goals
