"""Supervisor synthesis: keep a plant inside its safe sublanguage.

A supervisor watches the plant through its own observation map, disables
controllable actions, and may insert clock ticks before letting the
plant continue.  Synthesis is a safety game on beliefs: each belief is
the set of safety-product states consistent with what the supervisor
has observed, and a belief survives when some decision (a set of
disabled actions plus an insertion count) avoids every unsafe state and
leads only to surviving beliefs.  The greatest fixpoint of that pruning
yields the winning region; the exported policy starts from the
admissible decision that disables least and inserts least per belief,
then trades decisions for admissible alternatives whenever doing so
strictly grows the supervised language, so incomparable minimal choices
cannot strand behavior a different winning policy would keep.

Insertions are a commitment: a policy entry with insert = k stands for
a chain of k machine states whose only move is the inserted tick, so
the machine steps through its own insertions the same way it steps
through observed plant ticks.  Insertion is only admissible when every
plant state the belief allows can actually tick.

Both observation maps must be static here.  Windowed attackers are fine
for verification, but a window reads the future, so whether a prefix is
safe is not determined when the supervisor has to act on it.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from itertools import combinations

from .automata import Dfa, Nfa, determinize, extend_with_sink, subset_witness
from .errors import BudgetExceededError, InternalCheckError, ModelError, ObserverError
from .observation import Observer, StaticObserver
from .opacity import SafeTraceAutomaton, _plant_nfa, safe_automaton
from .predicates import Predicate
from .semantics import Lts
from .terms import TIME, Label, Trace, label_from_string


@dataclass(frozen=True)
class ControlDecision:
    """What the supervisor does at one state: disable these controllable
    actions, and insert this many clock ticks on entry."""

    disabled: tuple[Label, ...] = ()
    insert: int = 0

    def __post_init__(self):
        if self.insert < 0:
            raise ModelError("insertion count cannot be negative")
        if any(not lab.is_visible() for lab in self.disabled):
            raise ModelError("only visible actions can be disabled")
        ordered = tuple(sorted(set(self.disabled), key=Label.sort_key))
        object.__setattr__(self, "disabled", ordered)


@dataclass(frozen=True)
class SupervisorAutomaton:
    """A finite-state control policy, deterministic on observed symbols.

    step is a partial map; a symbol with no entry leaves the state
    unchanged.  policy has one decision per state.
    """

    n_states: int
    initial: int
    step: tuple[tuple[int, Label, int], ...]
    policy: tuple[ControlDecision, ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_states < 1:
            raise ModelError("a supervisor needs at least one state")
        if not 0 <= self.initial < self.n_states:
            raise ModelError("initial state out of range")
        if len(self.policy) != self.n_states:
            raise ModelError("policy must cover every state")
        table: dict = {}
        for src, symbol, dst in self.step:
            if not (0 <= src < self.n_states and 0 <= dst < self.n_states):
                raise ModelError("step entry out of range")
            if (src, symbol) in table:
                raise ModelError(f"duplicate step entry for state {src}, {symbol.pretty()}")
            table[(src, symbol)] = dst
        object.__setattr__(self, "_table", table)

    def next_node(self, node: int, symbol: Label) -> int:
        return self._table.get((node, symbol), node)

    def to_json(self) -> str:
        doc = {
            "states": [
                self.notes[i] if i < len(self.notes) else f"s{i}"
                for i in range(self.n_states)
            ],
            "initial": self.initial,
            "step": {},
            "policy": {},
        }
        by_src: dict = {}
        for src, symbol, dst in self.step:
            by_src.setdefault(src, []).append((symbol, dst))
        for src in sorted(by_src):
            doc["step"][str(src)] = {
                symbol.pretty(): dst
                for symbol, dst in sorted(by_src[src], key=lambda e: e[0].sort_key())
            }
        for i, dec in enumerate(self.policy):
            doc["policy"][str(i)] = {
                "disabled": [lab.pretty() for lab in dec.disabled],
                "insert": dec.insert,
            }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SupervisorAutomaton":
        doc = json.loads(text)
        n = len(doc["states"])
        step = tuple(
            (int(src), label_from_string(symbol), int(dst))
            for src, edges in doc.get("step", {}).items()
            for symbol, dst in edges.items()
        )
        policy = [ControlDecision()] * n
        for key, entry in doc.get("policy", {}).items():
            policy[int(key)] = ControlDecision(
                tuple(label_from_string(p) for p in entry.get("disabled", ())),
                int(entry.get("insert", 0)),
            )
        return cls(
            n,
            int(doc.get("initial", 0)),
            step,
            tuple(policy),
            tuple(str(s) for s in doc["states"]),
        )


def identity_supervisor() -> SupervisorAutomaton:
    """The supervisor that never intervenes."""
    return SupervisorAutomaton(1, 0, (), (ControlDecision(),), ("anything goes",))


@dataclass(frozen=True)
class ControllabilityReport:
    outcome: str  # Controllable | Uncontrollable
    word: Trace | None = None
    letter: Label | None = None


def check_controllability(
    safety: SafeTraceAutomaton, controllable
) -> ControllabilityReport:
    """Can only controllable actions take a safe trace out of safety?

    Scans safe product states in shortest-word order; the first exit on
    a visible action outside the controllable set is the witness.  Exits
    that leave the trace language do not count: the plant never takes
    them at all.
    """
    dfa = safety.acceptor
    unsafe = safety.unsafe.accepting
    in_trace = safety.in_trace
    blocked = frozenset(controllable)
    seen = {dfa.initial}
    queue = deque([(dfa.initial, ())])
    while queue:
        state, word = queue.popleft()
        if state in dfa.accepting:
            for letter in dfa.alphabet:
                if letter.kind != "act" or letter in blocked:
                    continue
                if dfa.delta[(state, letter)] in unsafe:
                    return ControllabilityReport(
                        "Uncontrollable", safety.raw_word(word), safety.raw_letter(letter)
                    )
        for letter in dfa.alphabet:
            nxt = dfa.delta[(state, letter)]
            if nxt in in_trace and nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, word + (letter,)))
    return ControllabilityReport("Controllable")


@dataclass(frozen=True)
class SynthesisResult:
    outcome: str  # Supervisor | NoSupervisor | TrivialOnly
    supervisor: SupervisorAutomaton | None = None
    reason: str = ""
    controllability: ControllabilityReport | None = None
    losing: tuple[tuple[int, ...], ...] = ()


class _Game:
    """The belief safety game over one safety product."""

    def __init__(self, plant: Lts, safety: SafeTraceAutomaton, sup_observer, controllable, max_insert: int):
        self.delta = safety.acceptor.delta
        self.alphabet = safety.acceptor.alphabet
        self.safe = safety.acceptor.accepting
        self.in_trace = safety.in_trace
        self.plant_sets = safety.plant_sets
        self.max_insert = max_insert
        self.can_tick = frozenset(
            p for p in range(plant.num_states) if plant.time_successor(p) is not None
        )
        self.images = {}
        for letter in self.alphabet:
            if letter.kind == "time":
                self.images[letter] = TIME  # the supervisor always sees the clock
            else:
                self.images[letter] = sup_observer.image(letter)
        self.invisible = tuple(
            lab for lab in self.alphabet if self.images[lab] is None
        )
        feasible_somewhere = {
            letter
            for state in self.in_trace
            for letter in self.alphabet
            if self.delta[(state, letter)] in self.in_trace
        }
        self.relevant = frozenset(controllable) & feasible_somewhere

    def candidate_decisions(self, belief):
        """Decisions worth evaluating at this belief.

        Disabling a letter the plant cannot offer during the decision
        window is a no-op, so only subsets of the locally reachable
        controllable letters are enumerated.  Reachability is taken
        optimistically (all insertions, all invisible moves, safety
        ignored), which can only add harmless duplicates.
        """
        reach = set(belief)
        cur = set(belief)
        for _ in range(self.max_insert):
            if not all(p in self.can_tick for s in cur for p in self.plant_sets[s]):
                break
            cur = {self.delta[(s, TIME)] for s in cur}
            reach |= cur
        work = list(reach)
        while work:
            s = work.pop()
            for letter in self.invisible:
                nxt = self.delta[(s, letter)]
                if nxt in self.in_trace and nxt not in reach:
                    reach.add(nxt)
                    work.append(nxt)
        letters = sorted(
            {
                letter
                for s in reach
                for letter in self.relevant
                if self.delta[(s, letter)] in self.in_trace
            },
            key=Label.sort_key,
        )
        return [
            (frozenset(combo), i)
            for size in range(len(letters) + 1)
            for i in range(self.max_insert + 1)
            for combo in combinations(letters, size)
        ]

    def closure(self, belief, disabled):
        """Extend a belief along allowed invisible moves; None when one
        of them reaches an unsafe state the supervisor cannot notice."""
        out = set(belief)
        work = list(belief)
        while work:
            s = work.pop()
            for letter in self.invisible:
                if letter in disabled:
                    continue
                nxt = self.delta[(s, letter)]
                if nxt not in self.in_trace or nxt in out:
                    continue
                if nxt not in self.safe:
                    return None
                out.add(nxt)
                work.append(nxt)
        return frozenset(out)

    def evaluate(self, belief, disabled, insert):
        """Play one decision from a belief.

        Returns (burst trail, closed belief, successors-by-symbol), or
        None when the decision is inadmissible: an insertion the plant
        cannot take, or an unpreventable step into an unsafe state.
        """
        cur = belief
        trail = [belief]
        for _ in range(insert):
            if not all(p in self.can_tick for s in cur for p in self.plant_sets[s]):
                return None
            stepped = {self.delta[(s, TIME)] for s in cur}
            if not stepped <= self.safe:
                return None
            cur = frozenset(stepped)
            trail.append(cur)
        closed = self.closure(cur, disabled)
        if closed is None:
            return None
        successors: dict = {}
        allowed = set()
        for s in closed:
            for letter in self.alphabet:
                if letter in disabled:
                    continue
                nxt = self.delta[(s, letter)]
                if nxt not in self.in_trace:
                    continue
                allowed.add(letter)
                symbol = self.images[letter]
                if symbol is None:
                    continue  # closure already folded it in
                if nxt not in self.safe:
                    return None  # observing it comes too late
                successors.setdefault(symbol, set()).add(nxt)
        return (
            trail,
            closed,
            {k: frozenset(v) for k, v in successors.items()},
            frozenset(allowed),
        )


def _extract_policy(options: dict, winning: set, init: frozenset, pins: dict) -> dict:
    """Map every reachable belief to an admissible decision.

    Pinned beliefs keep their pinned decision; everything else takes the
    first admissible option, which disables and inserts as little as the
    candidate order allows.
    """
    policy: dict = {}
    queue = deque([init])
    while queue:
        belief = queue.popleft()
        if belief in policy:
            continue
        pick = pins.get(belief)
        if pick is None or not all(nxt in winning for nxt in pick[4].values()):
            pick = None
            for option in options[belief]:
                if all(nxt in winning for nxt in option[4].values()):
                    pick = option
                    break
        if pick is None:
            raise InternalCheckError("a winning belief lost all its admissible decisions")
        policy[belief] = pick
        for symbol in sorted(pick[4], key=Label.sort_key):
            queue.append(pick[4][symbol])
    return policy


def _export(policy: dict, init: frozenset) -> SupervisorAutomaton:
    """Unroll a belief policy into a supervisor machine.

    Each belief becomes a chain of nodes: one per pending insertion, tied
    by clock edges, then a listening node holding the observation edges.
    """
    entry: dict = {}
    tail: dict = {}
    node_policy: list[ControlDecision] = []
    node_notes: list[str] = []
    edges: list[tuple[int, Label, int]] = []
    order = deque([init])
    while order:
        belief = order.popleft()
        if belief in entry:
            continue
        disabled, insert, _, _, successors, _ = policy[belief]
        dec = tuple(sorted(disabled, key=Label.sort_key))
        ids = ",".join(str(i) for i in sorted(belief))
        node_policy.append(ControlDecision(dec, insert))
        node_notes.append(f"belief {{{ids}}}" + (f" +{insert}t" if insert else ""))
        entry[belief] = node = len(node_policy) - 1
        for k in range(insert):
            node_policy.append(ControlDecision(dec, insert - k - 1))
            node_notes.append(f"belief {{{ids}}} +{insert - k - 1}t")
            edges.append((node, TIME, len(node_policy) - 1))
            node = len(node_policy) - 1
        tail[belief] = node
        for symbol in sorted(successors, key=Label.sort_key):
            order.append(successors[symbol])
    for belief, node in tail.items():
        successors = policy[belief][4]
        for symbol in sorted(successors, key=Label.sort_key):
            edges.append((node, symbol, entry[successors[symbol]]))
    return SupervisorAutomaton(
        len(node_policy),
        entry[init],
        tuple(edges),
        tuple(node_policy),
        tuple(node_notes),
    )


def synthesize(
    plant: Lts,
    phi: Predicate,
    attacker: Observer,
    sup_observer: Observer,
    controllable,
    max_insert: int = 4,
    max_states: int = 100000,
) -> SynthesisResult:
    """Build the maximally permissive belief-based supervisor.

    NoSupervisor comes back when the initial belief is losing, and also
    when insertion is off and the safe sublanguage is uncontrollable: in
    that case some safe trace has an uncontrollable extension out of
    safety, so no total supervision of the plant's traces exists, even
    if a policy could steer around the spot by disabling earlier.
    TrivialOnly marks the degenerate success where every visible action
    was controllable and the policy still disables each one it meets.
    """
    if not isinstance(attacker, StaticObserver) or not isinstance(sup_observer, StaticObserver):
        raise ObserverError("synthesis needs static observation maps on both sides")
    controllable = frozenset(controllable)
    if any(not lab.is_visible() for lab in controllable):
        raise ModelError("controllable actions must be visible")

    safety = safe_automaton(plant, phi, attacker, max_states=max_states)
    report = check_controllability(safety, controllable)
    if max_insert == 0 and report.outcome == "Uncontrollable":
        return SynthesisResult(
            "NoSupervisor",
            reason="the safe sublanguage is uncontrollable and insertion is off",
            controllability=report,
        )

    game = _Game(plant, safety, sup_observer, controllable, max_insert)
    init = frozenset({safety.acceptor.initial})

    options: dict = {}
    queue = deque([init])
    while queue:
        belief = queue.popleft()
        if belief in options:
            continue
        if len(options) >= max_states:
            raise BudgetExceededError(
                f"belief exploration exceeded the {max_states}-state budget"
            )
        local = []
        for disabled, insert in game.candidate_decisions(belief):
            played = game.evaluate(belief, disabled, insert)
            if played is None:
                continue
            local.append((disabled, insert) + played)
        options[belief] = local
        for _, _, _, _, successors, _ in local:
            for nxt in successors.values():
                if nxt not in options:
                    queue.append(nxt)

    winning = set(options)
    changed = True
    while changed:
        changed = False
        for belief in list(winning):
            ok = any(
                all(nxt in winning for nxt in successors.values())
                for _, _, _, _, successors, _ in options[belief]
            )
            if not ok:
                winning.discard(belief)
                changed = True
    losing = tuple(sorted(tuple(sorted(b)) for b in set(options) - winning))

    if init not in winning:
        return SynthesisResult(
            "NoSupervisor",
            reason="no decision at the initial belief avoids unsafe states",
            controllability=report,
            losing=losing,
        )

    policy = _extract_policy(options, winning, init, {})
    sup = _export(policy, init)

    # greedy seeding can settle on a minimal decision that strands more
    # behavior than an incomparable alternative would; sweep the other
    # admissible options and keep any that strictly grows the language
    language = _language(supervised_product(plant, sup_observer, sup), max_states)
    pool = sum(
        1
        for belief in options
        for option in options[belief]
        if all(nxt in winning for nxt in option[4].values())
    )
    # on big option spaces, only try decisions that let something new
    # through; shrinking the allowed set at equal insertion cannot add
    # words directly, it can only sharpen knowledge downstream
    exhaustive = pool <= 400
    pins: dict = {}
    attempts = 0
    improved = True
    while improved and attempts < 2000:
        improved = False
        for belief in list(policy):
            current = policy[belief]
            for option in options[belief]:
                if option == current:
                    continue
                if not all(nxt in winning for nxt in option[4].values()):
                    continue
                if not exhaustive and option[1] == current[1] and option[5] <= current[5]:
                    continue
                if attempts >= 2000:
                    break
                attempts += 1
                trial_pins = dict(pins)
                trial_pins[belief] = option
                trial_policy = _extract_policy(options, winning, init, trial_pins)
                trial_sup = _export(trial_policy, init)
                trial_language = _language(
                    supervised_product(plant, sup_observer, trial_sup), max_states
                )
                left, right = _aligned(language, trial_language)
                if subset_witness(left, right) is None and subset_witness(right, left) is not None:
                    pins = trial_pins
                    policy = trial_policy
                    sup = trial_sup
                    language = trial_language
                    improved = True
                    break
            if improved or attempts >= 2000:
                break

    checked = verify_supervisor(plant, phi, attacker, sup_observer, sup, max_states=max_states)
    if checked.outcome != "Valid":
        raise InternalCheckError(
            f"synthesized supervisor failed verification on {checked.witness}"
        )

    # the degenerate success: every controllable action was in scope and
    # the policy blocks each one it ever meets
    universe = {lab for lab in plant.labels() if lab.kind == "act"}
    trivial = controllable >= universe and bool(universe)
    met_controllable = False
    if trivial:
        for belief, (disabled, _, _, closed, _, _) in policy.items():
            feasible = {
                letter
                for s in closed
                for letter in game.alphabet
                if letter in controllable and game.delta[(s, letter)] in game.in_trace
            }
            if feasible:
                met_controllable = True
                if not feasible <= set(disabled):
                    trivial = False
                    break
    outcome = "TrivialOnly" if trivial and met_controllable else "Supervisor"
    return SynthesisResult(outcome, sup, controllability=report, losing=losing)


def supervised_product(
    plant: Lts, sup_observer: Observer, sup: SupervisorAutomaton
) -> Lts:
    """Compose plant and supervisor into the controlled system.

    States pair a plant state with a machine state.  While the machine
    state has ticks left to insert, the only move is that tick; then the
    plant moves, minus disabled proposals, and the machine follows what
    it observes.  Raises when an insertion is demanded at a plant state
    that cannot tick: synthesis never produces that, so reaching it
    means the supervisor was not built for this plant.
    """
    if not isinstance(sup_observer, StaticObserver):
        raise ObserverError("supervision needs a static observation map")
    if any(lab.kind == "tick" for lab in plant.labels()):
        raise ModelError("plants that report success cannot be supervised")

    start = (plant.initial, sup.initial)
    index = {start: 0}
    pairs = [start]
    transitions: list[tuple[int, Label, int]] = []
    queue = deque([start])

    def target(pair) -> int:
        dst = index.get(pair)
        if dst is None:
            dst = len(pairs)
            index[pair] = dst
            pairs.append(pair)
            queue.append(pair)
        return dst

    while queue:
        pair = queue.popleft()
        sid = index[pair]
        p, node = pair
        decision = sup.policy[node]
        if decision.insert > 0:
            p2 = plant.time_successor(p)
            if p2 is None:
                raise InternalCheckError(
                    "insertion demanded at a plant state that cannot tick"
                )
            transitions.append((sid, TIME, target((p2, sup.next_node(node, TIME)))))
            continue
        disabled = set(decision.disabled)
        for lab, p2 in plant.successors(p):
            if lab in disabled:
                continue
            symbol = TIME if lab.kind == "time" else sup_observer.image(lab)
            node2 = node if symbol is None else sup.next_node(node, symbol)
            transitions.append((sid, lab, target((p2, node2))))

    # pass-through audit: nothing outside the disabled set was pruned
    emitted = {(src, lab) for src, lab, _ in transitions}
    for pair, sid in index.items():
        p, node = pair
        if sup.policy[node].insert > 0:
            continue
        for lab, _ in plant.successors(p):
            if lab not in sup.policy[node].disabled and (sid, lab) not in emitted:
                raise InternalCheckError("supervised product lost an allowed action")

    return Lts(
        states=tuple(f"{plant.states[p]} # s{node}" for p, node in pairs),
        terms=tuple(plant.terms[p] for p, _ in pairs),
        transitions=tuple(transitions),
        complete=True,
    )


def _language(lts: Lts, max_states: int) -> Dfa:
    dfa, _ = determinize(_plant_nfa(lts), max_states=max_states)
    return dfa


def _aligned(left: Dfa, right: Dfa) -> tuple[Dfa, Dfa]:
    letters = set(left.alphabet) | set(right.alphabet)
    return extend_with_sink(left, letters), extend_with_sink(right, letters)


@dataclass(frozen=True)
class VerifyReport:
    outcome: str  # Valid | Invalid
    witness: Trace | None = None


def verify_supervisor(
    plant: Lts,
    phi: Predicate,
    attacker: Observer,
    sup_observer: Observer,
    sup: SupervisorAutomaton,
    max_states: int = 100000,
) -> VerifyReport:
    """Is every trace of the supervised system a safe trace of the plant?

    Decided by language inclusion against the safe-trace acceptor; the
    witness is the shortest supervised trace that escapes.  Windowed
    attackers are handled by projecting the annotated acceptor back to
    plain labels before comparing.
    """
    safety = safe_automaton(plant, phi, attacker, max_states=max_states)
    acceptor = safety.acceptor
    if not all(isinstance(l, Label) for l in acceptor.alphabet):
        projected: dict = {}
        for (s, letter), dst in acceptor.delta.items():
            projected.setdefault((s, safety.raw_letter(letter)), set()).add(dst)
        k_nfa = Nfa(
            acceptor.n_states,
            {acceptor.initial},
            acceptor.accepting,
            projected,
            {},
            {safety.raw_letter(l) for l in acceptor.alphabet},
        )
        acceptor, _ = determinize(k_nfa, max_states=max_states)
    controlled = _language(supervised_product(plant, sup_observer, sup), max_states)
    left, right = _aligned(controlled, acceptor)
    witness = subset_witness(left, right)
    if witness is None:
        return VerifyReport("Valid")
    return VerifyReport("Invalid", witness=witness)


@dataclass(frozen=True)
class SupervisorComparison:
    verdict: str  # Equal | MorePermissive | LessPermissive | Incomparable
    only_first: Trace | None = None
    only_second: Trace | None = None


def compare_supervisors(
    plant: Lts,
    sup_observer: Observer,
    first: SupervisorAutomaton,
    second: SupervisorAutomaton,
    max_states: int = 100000,
) -> SupervisorComparison:
    """Order two supervisors by the languages they leave the plant."""
    d1 = _language(supervised_product(plant, sup_observer, first), max_states)
    d2 = _language(supervised_product(plant, sup_observer, second), max_states)
    d1, d2 = _aligned(d1, d2)
    extra1 = subset_witness(d1, d2)
    extra2 = subset_witness(d2, d1)
    if extra1 is None and extra2 is None:
        verdict = "Equal"
    elif extra2 is None:
        verdict = "MorePermissive"
    elif extra1 is None:
        verdict = "LessPermissive"
    else:
        verdict = "Incomparable"
    return SupervisorComparison(verdict, only_first=extra1, only_second=extra2)


def insertion_only_enforceable(
    plant: Lts,
    phi: Predicate,
    attacker: Observer,
    sup_observer: Observer,
    budget: int = 4,
    max_states: int = 100000,
) -> bool:
    """Can ticks alone keep the plant safe, with nothing disabled?"""
    result = synthesize(
        plant,
        phi,
        attacker,
        sup_observer,
        controllable=frozenset(),
        max_insert=budget,
        max_states=max_states,
    )
    return result.outcome == "Supervisor"


__all__ = [
    "ControlDecision",
    "SupervisorAutomaton",
    "ControllabilityReport",
    "SynthesisResult",
    "VerifyReport",
    "SupervisorComparison",
    "identity_supervisor",
    "check_controllability",
    "synthesize",
    "supervised_product",
    "verify_supervisor",
    "compare_supervisors",
    "insertion_only_enforceable",
]
