"""Trace predicates as deterministic acceptors.

A predicate is a total deterministic automaton over transition labels.
Totality over the unbounded label universe is kept finitely: each state
lists explicit letter edges plus one default successor for every letter
it does not mention.  Complement is then a flip of the accepting set,
so a predicate and its negation are both available, which the opacity
and synthesis constructions rely on.

Predicates can also be written as test processes: a term that
synchronizes against the trace and signals tick on success.  Such a
test is compiled to an acceptor by a belief-set construction over the
test's transition system, and the compilation is validated against the
reference trace-runner semantics before it is returned.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .automata import Dfa, determinize, Nfa, subset_witness
from .errors import (
    IncompleteLtsError,
    ModelError,
    NonConvertibleTestError,
    ObserverError,
)
from .equivalence import passes_test
from .observation import StaticObserver
from .semantics import Lts, build_lts
from .terms import TAU, TIME, Label, Term, Trace, act, free_variables, is_regular

_ORIGINS = ("builtin", "automaton-literal", "test-process")


@dataclass(frozen=True)
class Predicate:
    """Deterministic acceptor, total over all labels via per-state defaults."""

    n_states: int
    initial: int
    accepting: frozenset[int]
    edges: tuple[tuple[int, Label, int], ...]
    defaults: tuple[int, ...]
    name: str = ""
    origin: str = "builtin"

    def __post_init__(self):
        if self.n_states < 1:
            raise ModelError("a predicate needs at least one state")
        if not 0 <= self.initial < self.n_states:
            raise ModelError("initial state out of range")
        if len(self.defaults) != self.n_states:
            raise ModelError("one default successor per state is required")
        for d in self.defaults:
            if not 0 <= d < self.n_states:
                raise ModelError("default successor out of range")
        for s in self.accepting:
            if not 0 <= s < self.n_states:
                raise ModelError("accepting state out of range")
        if self.origin not in _ORIGINS:
            raise ModelError(f"unknown predicate origin {self.origin!r}")
        seen = set()
        for src, letter, dst in self.edges:
            if letter.kind == "tick":
                raise ModelError("predicates do not name tick explicitly")
            if not (0 <= src < self.n_states and 0 <= dst < self.n_states):
                raise ModelError("edge endpoint out of range")
            if (src, letter) in seen:
                raise ModelError(f"two edges from state {src} on {letter}")
            seen.add((src, letter))
        table = {}
        for src, letter, dst in self.edges:
            table[(src, letter)] = dst
        object.__setattr__(self, "_table", table)

    def step(self, state: int, letter: Label) -> int:
        nxt = self._table.get((state, letter))
        if nxt is None:
            return self.defaults[state]
        return nxt

    def letters(self) -> tuple[Label, ...]:
        return tuple(
            sorted({letter for _, letter, _ in self.edges}, key=Label.sort_key)
        )


def holds(p: Predicate, word: Trace) -> bool:
    state = p.initial
    for letter in word:
        state = p.step(state, letter)
    return state in p.accepting


def complement(p: Predicate) -> Predicate:
    flipped = frozenset(range(p.n_states)) - p.accepting
    name = p.name[4:] if p.name.startswith("not_") else ("not_" + p.name if p.name else "")
    return Predicate(p.n_states, p.initial, flipped, p.edges, p.defaults, name, p.origin)


def minimize(p: Predicate) -> Predicate:
    """Language-preserving state merge (partition refinement).

    The default successor is refined like one extra letter, which is
    sound because every unlisted letter takes exactly the default edge
    in every state.
    """
    letters = p.letters()
    block = [1 if s in p.accepting else 0 for s in range(p.n_states)]
    while True:
        renumber: dict = {}
        new = [0] * p.n_states
        for s in range(p.n_states):
            key = (
                block[s],
                tuple(block[p.step(s, x)] for x in letters),
                block[p.defaults[s]],
            )
            if key not in renumber:
                renumber[key] = len(renumber)
            new[s] = renumber[key]
        if new == block:
            break
        block = new

    n = len(set(block))
    rep = {}
    for s in range(p.n_states):
        rep.setdefault(block[s], s)
    defaults = tuple(block[p.defaults[rep[b]]] for b in range(n))
    edges = []
    for b in range(n):
        for x in letters:
            dst = block[p.step(rep[b], x)]
            if dst != defaults[b]:
                edges.append((b, x, dst))
    accepting = frozenset(block[s] for s in p.accepting)
    return Predicate(
        n, block[p.initial], accepting, tuple(edges), defaults, p.name, p.origin
    )


def materialize(p: Predicate, letters) -> Dfa:
    """A concrete total automaton over the given working alphabet."""
    alphabet = tuple(sorted(set(letters), key=Label.sort_key))
    delta = {}
    for s in range(p.n_states):
        for letter in alphabet:
            delta[(s, letter)] = p.step(s, letter)
    return Dfa(p.n_states, alphabet, delta, p.accepting, p.initial)


def _probe_letter(taken, stem: str = "other") -> Label:
    names = {l.action.name for l in taken if l.is_visible()}
    name = stem
    while name in names:
        name += "x"
    return act(name)


def joint_alphabet(p: Predicate, q: Predicate) -> tuple[Label, ...]:
    """Working alphabet on which the two predicates' languages can be
    compared exactly: every letter either automaton names, tau, the
    clock, and one probe letter.  All unnamed letters behave exactly
    like the probe in both automata (they all take default edges), so a
    verdict over this alphabet carries over to the full label universe.
    """
    letters = set(p.letters()) | set(q.letters()) | {TAU, TIME}
    letters.add(_probe_letter(letters))
    return tuple(sorted(letters, key=Label.sort_key))


def predicate_subset(p: Predicate, q: Predicate) -> Trace | None:
    """None if every word satisfying p satisfies q; else the least gap word."""
    alphabet = joint_alphabet(p, q)
    return subset_witness(materialize(p, alphabet), materialize(q, alphabet))


def predicates_equal(p: Predicate, q: Predicate) -> bool:
    return predicate_subset(p, q) is None and predicate_subset(q, p) is None


# ---------------------------------------------------------------------------
# Built-in families


def builtin_contains(names) -> Predicate:
    """Accepts exactly the words containing one of the given action names
    (either polarity)."""
    if not names:
        raise ModelError("contains needs at least one action name")
    edges = []
    for n in sorted(names):
        edges.append((0, act(n), 1))
        edges.append((0, act(n, True), 1))
    return Predicate(
        n_states=2,
        initial=0,
        accepting=frozenset({1}),
        edges=tuple(edges),
        defaults=(0, 1),
        name="contains_" + "_".join(sorted(names)),
        origin="builtin",
    )


def hiding_attacker(names) -> StaticObserver:
    """The observer that pairs with builtin_contains for secrecy checks:
    the secret names are erased, everything else is passed through."""
    from .observation import hiding_observer

    return hiding_observer(names, name="hides_" + "_".join(sorted(names)))


def secrecy_bundle(names) -> tuple[Predicate, StaticObserver]:
    """Predicate and matching observer for the hidden-actions question:
    can an attacker who cannot see these actions tell they happened."""
    return builtin_contains(names), hiding_attacker(names)


def never() -> Predicate:
    return Predicate(1, 0, frozenset(), (), (0,), "never", "builtin")


def always() -> Predicate:
    return Predicate(1, 0, frozenset({0}), (), (0,), "always", "builtin")


# ---------------------------------------------------------------------------
# Tests as predicates


def from_test_process(test: Term, validate_depth: int = 4, max_states: int = 100000) -> Predicate:
    """Compile a test process into the acceptor of the traces it passes.

    The acceptor tracks the belief set: every state the test can be in
    after weakly synchronizing with the trace so far.  A visible letter
    advances members through the matching co-action; the clock advances
    members that cannot move internally (internal work preempts the
    clock); tau in the trace costs the test nothing.  A belief accepts
    when some member can signal tick.

    The result is checked against the reference runner on every word up
    to validate_depth over the test's own letters; any disagreement
    raises NonConvertibleTestError instead of returning a wrong acceptor.
    """
    if free_variables(test):
        raise NonConvertibleTestError("test process must be closed")
    if not is_regular(test):
        raise NonConvertibleTestError("test process must be regular")
    lts = build_lts(test, max_states=max_states)
    if not lts.complete:
        raise IncompleteLtsError("test process exceeded the state budget")

    consumable = tuple(
        sorted(
            {lab.co() for lab in lts.labels() if lab.is_visible()},
            key=Label.sort_key,
        )
    )

    def tau_free(state: int) -> bool:
        return all(lab.kind != "tau" for lab, _ in lts.successors(state))

    def has_tick(state: int) -> bool:
        return any(lab.kind == "tick" for lab, _ in lts.successors(state))

    start = lts.tau_closure(frozenset({lts.initial}))
    index: dict[frozenset, int] = {start: 0}
    beliefs = [start]
    edges = []
    queue = deque([start])
    while queue:
        belief = queue.popleft()
        sid = index[belief]

        def target(members) -> int:
            closed = lts.tau_closure(frozenset(members))
            dst = index.get(closed)
            if dst is None:
                dst = len(beliefs)
                index[closed] = dst
                beliefs.append(closed)
                queue.append(closed)
            return dst

        edges.append((sid, TAU, sid))
        timed = {
            dst
            for s in belief
            if tau_free(s)
            for lab, dst in lts.successors(s)
            if lab.kind == "time"
        }
        edges.append((sid, TIME, target(timed)))
        for letter in consumable:
            stepped = {
                dst
                for s in belief
                for lab, dst in lts.successors(s)
                if lab == letter.co()
            }
            edges.append((sid, letter, target(stepped)))

    sink = index.get(frozenset())
    if sink is None:
        sink = len(beliefs)
        beliefs.append(frozenset())
        edges.append((sink, TAU, sink))
        edges.append((sink, TIME, sink))
        for letter in consumable:
            edges.append((sink, letter, sink))
    accepting = frozenset(
        i for i, belief in enumerate(beliefs) if any(has_tick(s) for s in belief)
    )
    result = minimize(
        Predicate(
            n_states=len(beliefs),
            initial=0,
            accepting=accepting,
            edges=tuple(edges),
            defaults=tuple(sink for _ in beliefs),
            name="test",
            origin="test-process",
        )
    )

    def expand(letters, depth):
        frontier = [()]
        for _ in range(depth):
            frontier = [w + (x,) for w in frontier for x in letters]
            yield from frontier

    words = {()}
    words.update(expand(list(consumable) + [TIME], validate_depth))
    # tau in a word must cost the test nothing; probe that shallowly too
    words.update(expand(list(consumable) + [TIME, TAU], min(validate_depth, 3)))
    for w in sorted(words, key=lambda w: (len(w), [l.sort_key() for l in w])):
        if holds(result, w) != passes_test(w, test):
            raise NonConvertibleTestError(
                "test verdict is not synchronization-determined on "
                + ".".join(str(l) for l in w)
            )
    return result


# ---------------------------------------------------------------------------
# Time dependability


def _insertion_closure(dfa: Dfa, max_states: int = 100000) -> Dfa:
    """Acceptor of the words that reach acceptance after inserting extra
    clock letters anywhere: every clock edge doubles as a free move."""
    transitions: dict = {}
    epsilon: dict = {}
    for (src, letter), dst in dfa.delta.items():
        transitions.setdefault((src, letter), set()).add(dst)
        if letter.kind == "time":
            epsilon.setdefault(src, set()).add(dst)
    nfa = Nfa(
        dfa.n_states,
        {dfa.initial},
        dfa.accepting,
        transitions,
        epsilon,
        dfa.alphabet,
    )
    closed, _ = determinize(nfa, max_states=max_states)
    return closed


def is_time_dependable(
    p: Predicate,
    plant: Lts,
    attacker: StaticObserver,
    literal: bool = False,
    max_states: int = 100000,
) -> bool:
    """Can clock insertion always de-expose a leaking trace?

    Primary reading: every trace of the plant that the safe sublanguage
    excludes has a clock-padded superword inside the safe sublanguage.
    This is the property insertion-based enforcement needs.

    literal=True switches to the predicate-only reading: every word
    satisfying the predicate has a clock-padded superword violating it.
    That reading ignores the plant and the attacker, and is
    unsatisfiable for monotone predicates (padding never removes a
    letter), which is why it is not the default.
    """
    if literal:
        alphabet = joint_alphabet(p, p)
        sat = materialize(p, alphabet)
        unsat_padded = _insertion_closure(materialize(complement(p), alphabet), max_states)
        return subset_witness(sat, unsat_padded) is None

    from .opacity import safe_automaton

    if not plant.complete:
        raise IncompleteLtsError("plant was truncated by the state budget")
    if not isinstance(attacker, StaticObserver):
        raise ObserverError("time dependability is decided for static attackers")
    safety = safe_automaton(plant, p, attacker, max_states=max_states)
    padded_safe = _insertion_closure(safety.acceptor, max_states)
    return subset_witness(safety.unsafe, padded_safe) is None


__all__ = [
    "Predicate",
    "holds",
    "complement",
    "materialize",
    "joint_alphabet",
    "predicate_subset",
    "predicates_equal",
    "builtin_contains",
    "hiding_attacker",
    "secrecy_bundle",
    "never",
    "always",
    "from_test_process",
    "is_time_dependable",
]
