"""Behavioural comparisons: strong bisimilarity, weak trace language
equality, and running a trace against a test process.

Weak traces erase tau and keep everything else, including the clock
action, so timing differences stay visible.  Comparisons need complete
transition systems; a budget-truncated one raises IncompleteLtsError
rather than producing a confident wrong answer.
"""

from __future__ import annotations

from .automata import Dfa, Nfa, determinize, equal_witness
from .errors import IncompleteLtsError
from .semantics import Lts, build_lts
from .terms import (
    NIL,
    TICK,
    Label,
    Prefix,
    Restrict,
    Par,
    Term,
    Trace,
    act,
    syntactic_names,
)


def _require_complete(lts: Lts, role: str) -> None:
    if not lts.complete:
        raise IncompleteLtsError(f"{role} was truncated by the state budget")


def bisimilar(left: Lts, right: Lts) -> bool:
    """Strong bisimilarity of the initial states (partition refinement)."""
    _require_complete(left, "left system")
    _require_complete(right, "right system")
    offset = left.num_states
    n = offset + right.num_states
    succ: list[tuple[tuple[Label, int], ...]] = []
    for i in range(left.num_states):
        succ.append(left.successors(i))
    for j in range(right.num_states):
        succ.append(tuple((lab, dst + offset) for lab, dst in right.successors(j)))

    block = [0] * n
    while True:
        signatures = [
            frozenset((lab, block[dst]) for lab, dst in succ[s]) for s in range(n)
        ]
        renumber: dict = {}
        new = [0] * n
        for s in range(n):
            key = (block[s], signatures[s])
            if key not in renumber:
                renumber[key] = len(renumber)
            new[s] = renumber[key]
        if new == block:
            break
        block = new
    return block[left.initial] == block[right.initial + offset]


def weak_trace_dfa(lts: Lts, alphabet=None) -> Dfa:
    """Deterministic acceptor of the full weak trace language.

    Tau edges become epsilon moves; every subset state except the empty
    sink accepts, so the language is prefix closed by construction.
    """
    _require_complete(lts, "system")
    if alphabet is None:
        alphabet = [lab for lab in lts.labels() if lab.kind != "tau"]
    transitions: dict = {}
    epsilon: dict = {}
    for src, lab, dst in lts.transitions:
        if lab.kind == "tau":
            epsilon.setdefault(src, set()).add(dst)
        else:
            transitions.setdefault((src, lab), set()).add(dst)
    nfa = Nfa(
        lts.num_states,
        {lts.initial},
        range(lts.num_states),
        transitions,
        epsilon,
        alphabet,
    )
    dfa, _ = determinize(nfa)
    return dfa


def weak_member(lts: Lts, word: Trace) -> bool:
    """Membership of one word in the weak trace language, without
    determinizing: a breadth-first walk over tau-closed state sets."""
    _require_complete(lts, "system")
    frontier = lts.tau_closure(frozenset((lts.initial,)))
    for letter in word:
        if letter.kind == "tau":
            continue
        stepped = set()
        for state in frontier:
            for lab, dst in lts.successors(state):
                if lab == letter:
                    stepped.add(dst)
        if not stepped:
            return False
        frontier = lts.tau_closure(frozenset(stepped))
    return True


def weak_traces_equal(left: Lts, right: Lts) -> bool:
    return distinguishing_trace(left, right) is None


def distinguishing_trace(left: Lts, right: Lts) -> Trace | None:
    """Least weak trace of one system that the other cannot do, if any."""
    alphabet = sorted(
        {lab for lab in left.labels() + right.labels() if lab.kind != "tau"},
        key=Label.sort_key,
    )
    gap = equal_witness(weak_trace_dfa(left, alphabet), weak_trace_dfa(right, alphabet))
    return None if gap is None else gap[0]


# ---------------------------------------------------------------------------
# Tests as processes


def _fresh_name(taken: frozenset) -> str:
    name = "done"
    while name in taken:
        name += "_"
    return name


def passes_test(trace: Trace, test: Term, strict_tau_urgency: bool = False) -> bool:
    """Run a trace against a test process; True iff the test signals tick.

    The trace is turned into a prefix chain that ends in a fresh
    completion action; the chain runs in parallel with the test under a
    restriction hiding every shared name.  Passing means the composite
    has a weak trace consisting of exactly the trace's clock actions,
    then the completion action, then tick: the test experienced the
    trace's letters and timing in full and succeeds exactly then.
    """
    if any(lab.kind == "tick" for lab in trace):
        raise ValueError("traces submitted to a test cannot contain tick")
    names = syntactic_names(test)
    trace_names = frozenset(
        lab.action.name for lab in trace if lab.is_visible()
    )
    done = _fresh_name(names | trace_names)
    chain: Term = Prefix(act(done), NIL)
    for lab in reversed(trace):
        chain = Prefix(lab, chain)
    composite = Restrict(Par(chain, test), names | trace_names)
    lts = build_lts(composite, strict_tau_urgency=strict_tau_urgency)
    _require_complete(lts, "test composition")
    expected = tuple(lab for lab in trace if lab.kind == "time") + (act(done), TICK)
    return weak_member(lts, expected)


__all__ = [
    "bisimilar",
    "weak_trace_dfa",
    "weak_member",
    "weak_traces_equal",
    "distinguishing_trace",
    "passes_test",
]
