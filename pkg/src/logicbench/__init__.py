"""Assertion-driven workbench for pure logic programs.

Test cases live in the program text as assertions, are validated against
reference implementations before any code exists, and keep checking the
code as it grows.  Wrong assertions are explained by specialization or
staged generalization; wrong code is localized by slicing; progress is
graded as an interval percentage.
"""

from .engine import (Budget, Answer, Solutions, FiniteFailure, BudgetExhausted,
                     LoopCertificate, Proven, Disproven, Unknown, Terminates,
                     NonTerminating, solve_dfs, solve_fair,
                     prove_failure_loopcheck, check_universal_termination)
from .parser import (Assertion, AssertionKind, ParseError, SourceFile,
                     parse_file, parse_query, render_file, strip_machine_lines)
from .reference import (ReferenceRegistry, builtin_registry, load_reference_dir,
                        reference_verdict, lookup_implications)
from .terms import (Atom, Clause, Compound, DifStore, Int, Program,
                    Substitution, Term, Var, VarAllocator, unify, variant_of,
                    ground_with_any, enumerate_subterms, rename_apart)
from .verdicts import Verdict

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
