"""Opacity checking: can a partial observer be certain the secret held.

A trace is safe when the predicate fails on it, when it is observed as
nothing at all, or when some other trace of the same plant carries the
same observation and fails the predicate.  The safe traces form a
regular language; the pipeline here builds its acceptor:

  1. an automaton of the observations produced by predicate-violating
     runs is built (erased letters become epsilon moves) and
     determinized;
  2. the plant's trace automaton is determinized;
  3. a product of plant, predicate and the observation automaton marks
     each trace safe or leaking, with a flag for "nothing emitted yet".

Opacity holds exactly when no reachable trace leaks; otherwise the
shortest leaking trace (lexicographically least among those) comes back
as the witness.

Windowed observers do not read letters in isolation, so the plant is
first unfolded into an annotated automaton whose letters carry their
own context window.  Future context is guessed and then verified letter
by letter; words whose guesses never resolved are not accepted, which
makes the annotated language exactly the image of the plant's traces.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

from .automata import Dfa, Nfa, determinize, extend_with_sink, shortest_accepted, subset_witness
from .errors import BudgetExceededError, IncompleteLtsError, InternalCheckError, ObserverError
from .observation import (
    MOrwellianObserver,
    Observer,
    StaticObserver,
    compare_observers,
    derive_untimed,
    observe,
)
from .predicates import Predicate, holds, predicate_subset
from .semantics import Lts
from .terms import Label, Trace


@dataclass(frozen=True)
class AnnotatedLetter:
    """A plant letter together with the window it was read in."""

    base: Label
    window: tuple[Label, ...]

    def sort_key(self):
        return (self.base.sort_key(), tuple(l.sort_key() for l in self.window))

    def __str__(self) -> str:
        inside = ".".join(str(l) for l in self.window)
        return f"{self.base}[{inside}]"


def _plant_nfa(plant: Lts) -> Nfa:
    """The plant as a trace acceptor: every state accepts, letters raw."""
    transitions: dict = {}
    for src, lab, dst in plant.transitions:
        transitions.setdefault((src, lab), set()).add(dst)
    return Nfa(
        plant.num_states,
        {plant.initial},
        range(plant.num_states),
        transitions,
        {},
        plant.labels(),
    )


def _annotated_nfa(plant: Lts, observer: MOrwellianObserver, max_states: int) -> Nfa:
    """Unfold the plant so each transition carries its own window.

    States track the last m-1 letters and the guessed next letters; a
    guess is checked against each actual letter and unresolved guesses
    block acceptance.  With time_transparent the clock letter bypasses
    the bookkeeping entirely, matching windows over clock-free traces.
    """
    m = observer.window
    keep = m - 1
    guessable = tuple(
        lab
        for lab in plant.labels()
        if not (observer.time_transparent and lab.kind == "time")
    )

    start = (plant.initial, (), (), False)
    index = {start: 0}
    states = [start]
    transitions: dict = {}
    alphabet = set()
    queue = deque([start])
    while queue:
        state = queue.popleft()
        sid = index[state]
        p, hist, commit, exact = state

        def push(letter, nxt):
            alphabet.add(letter)
            dst = index.get(nxt)
            if dst is None:
                if len(states) >= max_states:
                    raise BudgetExceededError(
                        f"window annotation exceeded the {max_states}-state budget"
                    )
                dst = len(states)
                index[nxt] = dst
                states.append(nxt)
                queue.append(nxt)
            transitions.setdefault((sid, letter), set()).add(dst)

        for lab, p2 in plant.successors(p):
            if observer.time_transparent and lab.kind == "time":
                push(AnnotatedLetter(lab, ()), (p2, hist, commit, exact))
                continue
            if commit:
                if lab != commit[0]:
                    continue
                rest = commit[1:]
                futures = [(rest, True)] if exact else [(rest, True)] + [
                    (rest + (z,), False) for z in guessable
                ]
            elif exact:
                continue
            else:
                futures = [((), True)]
                frontier = [()]
                for _ in range(keep):
                    frontier = [f + (z,) for f in frontier for z in guessable]
                    futures.extend((f, True) for f in frontier)
                if keep:
                    futures.extend((f, False) for f in frontier)
                else:
                    futures = [((), False)]
            new_hist = (hist + (lab,))[-keep:] if keep else ()
            for fut, ex2 in futures:
                window = hist + (lab,) + fut
                push(AnnotatedLetter(lab, window), (p2, new_hist, fut, ex2))

    accepting = frozenset(i for i, (_, _, commit, _) in enumerate(states) if not commit)
    nfa = Nfa(len(states), {0}, accepting, transitions, {}, alphabet)
    plant_part = tuple(p for p, _, _, _ in states)
    return nfa, plant_part


def _observer_pieces(plant: Lts, observer: Observer, max_states: int):
    """The trace automaton to run the pipeline on, with letter accessors
    and a map from its states back to plant states."""
    if isinstance(observer, StaticObserver):
        return _plant_nfa(plant), (lambda l: l), observer.image, (lambda s: s)
    if isinstance(observer, MOrwellianObserver):
        nfa, plant_part = _annotated_nfa(plant, observer, max_states)
        return (
            nfa,
            (lambda l: l.base),
            (lambda l: observer.image_in_window(l.base, l.window)),
            (lambda s: plant_part[s]),
        )
    raise ObserverError(
        "automata-based verification needs a static or windowed observer"
    )


@dataclass(frozen=True)
class SafeTraceAutomaton:
    """Acceptors for the safe and leaking sublanguages of the plant.

    acceptor and unsafe share one alphabet and partition the plant's
    trace language; observable is the determinized automaton of the
    observations that predicate-violating runs can produce.  Letters may
    be window-annotated; raw_word projects a word of them back to labels.
    plant_sets gives, per product state, the plant states reachable by
    the words that lead there; supervision reads it to decide whether a
    clock insertion is available in every run the belief allows.
    """

    acceptor: Dfa
    unsafe: Dfa
    observable: Dfa
    raw_letter: object
    plant_sets: tuple[frozenset, ...]

    def raw_word(self, word) -> Trace:
        return tuple(self.raw_letter(letter) for letter in word)

    @property
    def in_trace(self) -> frozenset:
        return self.acceptor.accepting | self.unsafe.accepting


def safe_automaton(
    plant: Lts, phi: Predicate, attacker: Observer, max_states: int = 100000
) -> SafeTraceAutomaton:
    if not plant.complete:
        raise IncompleteLtsError("plant was truncated by the state budget")
    if holds(phi, ()):
        warnings.warn(
            "predicate holds on the empty trace; opacity notions assume it does not",
            stacklevel=2,
        )

    trace_nfa, raw, image, plant_of = _observer_pieces(plant, attacker, max_states)
    alphabet = trace_nfa.alphabet

    # observations of predicate-violating runs, determinized
    obs_transitions: dict = {}
    obs_epsilon: dict = {}
    obs_states: dict = {}

    def obs_id(pair) -> int:
        sid = obs_states.get(pair)
        if sid is None:
            sid = len(obs_states)
            obs_states[pair] = sid
        return sid

    images = set()
    for (src, letter), dsts in trace_nfa.transitions.items():
        img = image(letter)
        if img is not None:
            images.add(img)
    start_pairs = [(s, phi.initial) for s in trace_nfa.initial]
    queue = deque(start_pairs)
    seen = set(start_pairs)
    for pair in start_pairs:
        obs_id(pair)
    while queue:
        s, q = queue.popleft()
        sid = obs_id((s, q))
        for letter in alphabet:
            for dst in trace_nfa.transitions.get((s, letter), ()):
                q2 = phi.step(q, raw(letter))
                nxt = (dst, q2)
                if nxt not in seen:
                    if len(obs_states) >= max_states:
                        raise BudgetExceededError(
                            f"observation automaton exceeded the {max_states}-state budget"
                        )
                    seen.add(nxt)
                    queue.append(nxt)
                did = obs_id(nxt)
                img = image(letter)
                if img is None:
                    obs_epsilon.setdefault(sid, set()).add(did)
                else:
                    obs_transitions.setdefault((sid, img), set()).add(did)
    obs_accepting = frozenset(
        sid
        for (s, q), sid in obs_states.items()
        if s in trace_nfa.accepting and q not in phi.accepting
    )
    obs_nfa = Nfa(
        len(obs_states),
        {obs_id(p) for p in start_pairs},
        obs_accepting,
        obs_transitions,
        obs_epsilon,
        images,
    )
    observable, _ = determinize(obs_nfa, max_states=max_states)
    observable = extend_with_sink(observable, images)

    plant_dfa, plant_subsets = determinize(trace_nfa, max_states=max_states)

    # plant x predicate x observation product, with an emitted flag
    start = (plant_dfa.initial, phi.initial, observable.initial, False)
    index = {start: 0}
    product_states = [start]
    delta: dict = {}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        sid = index[state]
        dp, q, d, emitted = state
        for letter in alphabet:
            img = image(letter)
            nxt = (
                plant_dfa.step(dp, letter),
                phi.step(q, raw(letter)),
                d if img is None else observable.step(d, img),
                emitted or img is not None,
            )
            dst = index.get(nxt)
            if dst is None:
                if len(product_states) >= max_states:
                    raise BudgetExceededError(
                        f"safety product exceeded the {max_states}-state budget"
                    )
                dst = len(product_states)
                index[nxt] = dst
                product_states.append(nxt)
                queue.append(nxt)
            delta[(sid, letter)] = dst

    def in_trace(dp) -> bool:
        return dp in plant_dfa.accepting

    safe_states = frozenset(
        i
        for i, (dp, q, d, emitted) in enumerate(product_states)
        if in_trace(dp)
        and (q not in phi.accepting or not emitted or d in observable.accepting)
    )
    unsafe_states = frozenset(
        i
        for i, (dp, q, d, emitted) in enumerate(product_states)
        if in_trace(dp)
        and q in phi.accepting
        and emitted
        and d not in observable.accepting
    )
    acceptor = Dfa(len(product_states), alphabet, delta, safe_states)
    unsafe = Dfa(len(product_states), alphabet, delta, unsafe_states)
    plant_sets = tuple(
        frozenset(plant_of(s) for s in plant_subsets[dp])
        for (dp, _, _, _) in product_states
    )

    # independent consistency check: the safe language never leaves the
    # trace language, and the leak acceptor is exactly their difference
    if subset_witness(acceptor, plant_dfa) is not None:
        raise InternalCheckError("safe language escaped the trace language")
    gap = subset_witness(plant_dfa, acceptor)
    leak = shortest_accepted(unsafe)
    if (gap is None) != (leak is None) or gap != leak:
        raise InternalCheckError("safe/leak acceptors disagree on the difference")

    return SafeTraceAutomaton(acceptor, unsafe, observable, raw, plant_sets)


@dataclass(frozen=True)
class OpacityVerdict:
    outcome: str  # Opaque | NotOpaque | Incomplete
    witness: Trace | None = None
    observable: tuple[Label, ...] | None = None
    bound: int | None = None
    k_states: int = 0

    @property
    def opaque(self) -> bool:
        return self.outcome == "Opaque"


def check_opacity(
    plant: Lts, phi: Predicate, attacker: Observer, max_states: int = 100000
) -> OpacityVerdict:
    """Decide opacity; budget overruns come back as Incomplete, not errors."""
    if not plant.complete:
        return OpacityVerdict("Incomplete", bound=plant.num_states)
    try:
        safety = safe_automaton(plant, phi, attacker, max_states=max_states)
    except BudgetExceededError:
        return OpacityVerdict("Incomplete", bound=max_states)
    leak = shortest_accepted(safety.unsafe)
    if leak is None:
        return OpacityVerdict("Opaque", k_states=safety.acceptor.n_states)
    witness = safety.raw_word(leak)
    return OpacityVerdict(
        "NotOpaque",
        witness=witness,
        observable=observe(attacker, witness),
        k_states=safety.acceptor.n_states,
    )


@dataclass(frozen=True)
class TimingVerdict:
    outcome: str  # Prone | NotProne | Incomplete
    timed: OpacityVerdict | None = None
    untimed: OpacityVerdict | None = None


def check_timing_attack(
    plant: Lts, phi: Predicate, attacker: Observer, max_states: int = 100000
) -> TimingVerdict:
    """Prone means the secret leaks only through timing: the attacker wins,
    but their clock-blind counterpart would not."""
    if not isinstance(attacker, StaticObserver):
        raise ObserverError("timing-attack analysis is defined for static attackers")
    timed = check_opacity(plant, phi, attacker, max_states=max_states)
    if timed.outcome == "Incomplete":
        return TimingVerdict("Incomplete", timed=timed)
    untimed = check_opacity(plant, phi, derive_untimed(attacker), max_states=max_states)
    if untimed.outcome == "Incomplete":
        return TimingVerdict("Incomplete", timed=timed, untimed=untimed)
    prone = timed.outcome == "NotOpaque" and untimed.outcome == "Opaque"
    return TimingVerdict("Prone" if prone else "NotProne", timed=timed, untimed=untimed)


def check_monotonicity_instance(
    plant: Lts,
    phi1: Predicate,
    phi2: Predicate,
    o1: Observer,
    o2: Observer,
    max_states: int = 100000,
) -> bool | None:
    """One instance of the ordering law: a bigger secret under a sharper
    attacker being opaque forces the smaller secret under the blunter
    attacker to be opaque.

    Returns None when the side conditions do not hold or a check came
    back Incomplete; otherwise whether the implication held.
    """
    if not compare_observers(o2, o1).is_stronger:
        return None
    if predicate_subset(phi2, phi1) is not None:
        return None
    strong = check_opacity(plant, phi1, o1, max_states=max_states)
    weak = check_opacity(plant, phi2, o2, max_states=max_states)
    if strong.outcome == "Incomplete" or weak.outcome == "Incomplete":
        return None
    if strong.outcome == "Opaque":
        return weak.outcome == "Opaque"
    return True


__all__ = [
    "AnnotatedLetter",
    "SafeTraceAutomaton",
    "OpacityVerdict",
    "TimingVerdict",
    "safe_automaton",
    "check_opacity",
    "check_timing_attack",
    "check_monotonicity_instance",
]
