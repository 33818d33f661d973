"""Three-valued judgment of a goal conjunction against a reference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .terms import Substitution


@dataclass(frozen=True)
class Verdict:
    """True (with an unconditional answer), False, or Unspecified.

    A True verdict always carries an answer substitution and never any
    pending constraints.  Unspecified records why no judgment was possible:
    'budget', 'pending', or 'unknown_predicate'.
    """

    kind: str  # 'true' | 'false' | 'unspecified'
    answer: Optional[Substitution] = None
    reason: Optional[str] = None

    @property
    def is_true(self) -> bool:
        return self.kind == "true"

    @property
    def is_false(self) -> bool:
        return self.kind == "false"

    @property
    def is_unspecified(self) -> bool:
        return self.kind == "unspecified"


def verdict_true(answer: Substitution) -> Verdict:
    return Verdict("true", answer=answer)


VERDICT_FALSE = Verdict("false")


def verdict_unspecified(reason: str) -> Verdict:
    return Verdict("unspecified", reason=reason)
