"""Verification and supervisor synthesis for a discrete-time process calculus.

The package covers: parsing process terms, deriving labelled transition
systems, checking trace opacity against partially observing attackers,
detecting timing leaks, and synthesising maximally permissive supervisors
that disable controllable actions or insert delay.
"""

from .errors import (
    BudgetExceededError,
    IncompleteLtsError,
    InternalCheckError,
    ModelError,
    NonConvertibleTestError,
    ObserverError,
    ParseError,
    TpaError,
    WellformednessError,
)
from .equivalence import bisimilar, distinguishing_trace, passes_test, weak_traces_equal
from .observation import (
    MOrwellianObserver,
    PluginObserver,
    Rule,
    StaticObserver,
    compare_observers,
    hiding_observer,
    identity_observer,
)
from .opacity import check_opacity, check_timing_attack, safe_automaton
from .parser import parse_term
from .predicates import (
    Predicate,
    always,
    builtin_contains,
    from_test_process,
    holds,
    is_time_dependable,
    never,
    secrecy_bundle,
)
from .model import (
    CheckDecl,
    CheckResult,
    ModelFile,
    RunReport,
    load_model,
    run_checks,
)
from .semantics import Lts, build_lts, traces
from .supervisor import (
    ControlDecision,
    SupervisorAutomaton,
    check_controllability,
    compare_supervisors,
    identity_supervisor,
    insertion_only_enforceable,
    supervised_product,
    synthesize,
    verify_supervisor,
)
from .terms import (
    NIL,
    TAU,
    TICK,
    TIME,
    Action,
    Choice,
    Label,
    Nil,
    Par,
    Prefix,
    Rec,
    Relabel,
    Restrict,
    Term,
    Var,
    act,
    check_wellformed,
    free_variables,
    is_regular,
    print_term,
    require_wellformed,
    substitute,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Label",
    "Term",
    "Nil",
    "Var",
    "Prefix",
    "Choice",
    "Par",
    "Restrict",
    "Relabel",
    "Rec",
    "NIL",
    "TAU",
    "TIME",
    "TICK",
    "act",
    "parse_term",
    "print_term",
    "free_variables",
    "substitute",
    "check_wellformed",
    "require_wellformed",
    "is_regular",
    "TpaError",
    "ParseError",
    "WellformednessError",
    "IncompleteLtsError",
    "BudgetExceededError",
    "ObserverError",
    "NonConvertibleTestError",
    "ModelError",
    "InternalCheckError",
    "Lts",
    "build_lts",
    "traces",
    "bisimilar",
    "weak_traces_equal",
    "distinguishing_trace",
    "holds",
    "StaticObserver",
    "MOrwellianObserver",
    "PluginObserver",
    "Rule",
    "identity_observer",
    "hiding_observer",
    "compare_observers",
    "Predicate",
    "always",
    "never",
    "builtin_contains",
    "secrecy_bundle",
    "passes_test",
    "from_test_process",
    "is_time_dependable",
    "check_opacity",
    "check_timing_attack",
    "safe_automaton",
    "ControlDecision",
    "SupervisorAutomaton",
    "identity_supervisor",
    "check_controllability",
    "synthesize",
    "supervised_product",
    "verify_supervisor",
    "compare_supervisors",
    "insertion_only_enforceable",
    "ModelFile",
    "CheckDecl",
    "CheckResult",
    "RunReport",
    "load_model",
    "run_checks",
    "__version__",
]
