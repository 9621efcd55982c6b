"""Finite automata over transition labels.

Small, explicit toolkit: nondeterministic automata with epsilon moves,
budgeted subset construction, products, complement, and shortest-witness
queries.  Letters are usually Label values, but any hashable value with
a sort_key() method works (window-annotated letters use this).
Deterministic automata keep a total transition function, so every
construction must say explicitly where unknown letters go.

Witness searches return the lexicographically least word among the
shortest ones, following the label order tau < t < names < tick.
"""

from __future__ import annotations

from collections import deque

from .errors import BudgetExceededError
from .terms import Label, Trace


class Nfa:
    """Nondeterministic automaton; transitions may be missing (= empty)."""

    def __init__(
        self,
        n_states: int,
        initial,
        accepting,
        transitions: dict,
        epsilon: dict | None = None,
        alphabet=(),
    ):
        self.n_states = n_states
        self.initial = frozenset(initial)
        self.accepting = frozenset(accepting)
        self.transitions = {k: frozenset(v) for k, v in transitions.items()}
        self.epsilon = {k: frozenset(v) for k, v in (epsilon or {}).items()}
        self.alphabet = tuple(sorted(set(alphabet), key=lambda l: l.sort_key()))

    def closure(self, states) -> frozenset:
        out = set(states)
        work = list(states)
        while work:
            s = work.pop()
            for nxt in self.epsilon.get(s, ()):
                if nxt not in out:
                    out.add(nxt)
                    work.append(nxt)
        return frozenset(out)

    def move(self, states, letter: Label) -> frozenset:
        out: set = set()
        for s in states:
            out |= self.transitions.get((s, letter), frozenset())
        return frozenset(out)


class Dfa:
    """Deterministic automaton, total over its alphabet."""

    def __init__(self, n_states: int, alphabet, delta: dict, accepting, initial: int = 0):
        self.n_states = n_states
        self.alphabet = tuple(sorted(set(alphabet), key=lambda l: l.sort_key()))
        self.delta = dict(delta)
        self.accepting = frozenset(accepting)
        self.initial = initial
        for s in range(n_states):
            for letter in self.alphabet:
                if (s, letter) not in self.delta:
                    raise ValueError(f"delta is not total: state {s}, letter {letter}")

    def step(self, state: int, letter: Label) -> int:
        return self.delta[(state, letter)]

    def run(self, word: Trace) -> int:
        state = self.initial
        for letter in word:
            state = self.delta[(state, letter)]
        return state

    def accepts(self, word: Trace) -> bool:
        return self.run(word) in self.accepting


def determinize(nfa: Nfa, max_states: int = 100000) -> tuple[Dfa, tuple[frozenset, ...]]:
    """Budgeted subset construction.

    Returns the automaton and, per deterministic state, the set of
    original states it stands for (the empty set is the rejecting sink).
    Raises BudgetExceededError when the budget would be crossed.
    """
    alphabet = nfa.alphabet
    start = nfa.closure(nfa.initial)
    index: dict[frozenset, int] = {start: 0}
    subsets: list[frozenset] = [start]
    delta: dict = {}
    queue = deque([start])
    while queue:
        subset = queue.popleft()
        sid = index[subset]
        for letter in alphabet:
            target = nfa.closure(nfa.move(subset, letter))
            dst = index.get(target)
            if dst is None:
                if len(subsets) >= max_states:
                    raise BudgetExceededError(
                        f"determinization exceeded the {max_states}-state budget"
                    )
                dst = len(subsets)
                index[target] = dst
                subsets.append(target)
                queue.append(target)
            delta[(sid, letter)] = dst
    accepting = frozenset(
        i for i, subset in enumerate(subsets) if subset & nfa.accepting
    )
    dfa = Dfa(len(subsets), alphabet, delta, accepting)
    return dfa, tuple(subsets)


def complement(dfa: Dfa) -> Dfa:
    accepting = frozenset(range(dfa.n_states)) - dfa.accepting
    return Dfa(dfa.n_states, dfa.alphabet, dfa.delta, accepting, dfa.initial)


def product(left: Dfa, right: Dfa, accept) -> Dfa:
    """Synchronous product; `accept(in_left, in_right)` marks accepting pairs.

    Both automata must share one alphabet; only reachable pairs are built.
    """
    if left.alphabet != right.alphabet:
        raise ValueError("product requires a common alphabet")
    alphabet = left.alphabet
    start = (left.initial, right.initial)
    index = {start: 0}
    pairs = [start]
    delta: dict = {}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        sid = index[pair]
        for letter in alphabet:
            nxt = (left.step(pair[0], letter), right.step(pair[1], letter))
            dst = index.get(nxt)
            if dst is None:
                dst = len(pairs)
                index[nxt] = dst
                pairs.append(nxt)
                queue.append(nxt)
            delta[(sid, letter)] = dst
    accepting = frozenset(
        i
        for i, (l, r) in enumerate(pairs)
        if accept(l in left.accepting, r in right.accepting)
    )
    return Dfa(len(pairs), alphabet, delta, accepting)


def extend_with_self_loops(dfa: Dfa, letters) -> Dfa:
    """Enlarge the alphabet; new letters leave every state unchanged."""
    new = [l for l in letters if l not in set(dfa.alphabet)]
    if not new:
        return dfa
    delta = dict(dfa.delta)
    for s in range(dfa.n_states):
        for letter in new:
            delta[(s, letter)] = s
    return Dfa(dfa.n_states, dfa.alphabet + tuple(new), delta, dfa.accepting, dfa.initial)


def extend_with_sink(dfa: Dfa, letters) -> Dfa:
    """Enlarge the alphabet; new letters fall into a fresh rejecting sink."""
    new = [l for l in letters if l not in set(dfa.alphabet)]
    if not new:
        return dfa
    sink = dfa.n_states
    alphabet = dfa.alphabet + tuple(new)
    delta = dict(dfa.delta)
    for s in range(dfa.n_states):
        for letter in new:
            delta[(s, letter)] = sink
    for letter in alphabet:
        delta[(sink, letter)] = sink
    return Dfa(dfa.n_states + 1, alphabet, delta, dfa.accepting, dfa.initial)


def shortest_accepted(dfa: Dfa) -> Trace | None:
    """Shortest accepted word, lexicographically least among those."""
    if dfa.initial in dfa.accepting:
        return ()
    letters = dfa.alphabet
    parent: dict[int, tuple[int, Label]] = {}
    visited = {dfa.initial}
    queue = deque([dfa.initial])
    while queue:
        state = queue.popleft()
        for letter in letters:
            dst = dfa.step(state, letter)
            if dst in visited:
                continue
            visited.add(dst)
            parent[dst] = (state, letter)
            if dst in dfa.accepting:
                word: list[Label] = []
                cur = dst
                while cur != dfa.initial:
                    prev, lab = parent[cur]
                    word.append(lab)
                    cur = prev
                return tuple(reversed(word))
            queue.append(dst)
    return None


def subset_witness(left: Dfa, right: Dfa) -> Trace | None:
    """None if L(left) is contained in L(right); otherwise the least word
    accepted by left but not right."""
    return shortest_accepted(product(left, right, lambda a, b: a and not b))


def equal_witness(left: Dfa, right: Dfa) -> tuple[Trace, str] | None:
    """None if the languages agree; otherwise (witness, which side owns it)."""
    gap = subset_witness(left, right)
    if gap is not None:
        return gap, "left"
    gap = subset_witness(right, left)
    if gap is not None:
        return gap, "right"
    return None


def is_empty(dfa: Dfa) -> bool:
    return shortest_accepted(dfa) is None


__all__ = [
    "Nfa",
    "Dfa",
    "determinize",
    "complement",
    "product",
    "extend_with_self_loops",
    "extend_with_sink",
    "shortest_accepted",
    "subset_witness",
    "equal_witness",
    "is_empty",
]
