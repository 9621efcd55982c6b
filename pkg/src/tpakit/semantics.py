"""Operational semantics: single steps, canonical forms, transition systems.

The step relation is standard CCS plus a clock action t with maximal
progress.  Action prefixes fire; every prefix except a t-prefix can also
idle, letting one unit of time pass without changing state.  Nil idles.
Choice resolves on actions but is preserved by idling on both sides.
Parallel components synchronise on complementary names (producing tau)
and may let time pass jointly only when no tau is possible, so internal
work is never postponed.  With strict_tau_urgency=True a pending
tau-prefix itself also refuses to idle.

Every state has at most one t-successor; build_lts checks this
invariant on the fly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InternalCheckError, WellformednessError
from .terms import (
    NIL,
    TAU,
    TICK,
    TIME,
    Choice,
    Label,
    Nil,
    Par,
    Prefix,
    Rec,
    Relabel,
    Restrict,
    Term,
    Trace,
    Var,
    free_variables,
    print_term,
    require_wellformed,
    substitute,
    syntactic_names,
)

Step = tuple[Label, Term]


def step(term: Term, strict_tau_urgency: bool = False) -> tuple[Step, ...]:
    """All single-step transitions of a closed term, deterministically ordered."""
    out = _step(term, strict_tau_urgency, ())
    seen = set()
    unique = []
    for pair in out:
        if pair not in seen:
            seen.add(pair)
            unique.append(pair)
    unique.sort(key=lambda s: s[0].sort_key())
    # Successors sharing a label are ordered by their printed form; doing
    # that only for ties keeps printing off the hot path.
    i = 0
    while i < len(unique):
        j = i + 1
        while j < len(unique) and unique[j][0] == unique[i][0]:
            j += 1
        if j - i > 1:
            unique[i:j] = sorted(unique[i:j], key=lambda s: print_term(s[1]))
        i = j
    return tuple(unique)


def _time_successor(steps: list[Step]) -> Term | None:
    succ = None
    for lab, nxt in steps:
        if lab.kind == "time":
            if succ is not None and succ != nxt:
                raise InternalCheckError("two distinct time successors in one state")
            succ = nxt
    return succ


def _step(term: Term, strict: bool, active: tuple) -> list[Step]:
    if isinstance(term, Nil):
        return [(TIME, NIL)]

    if isinstance(term, Prefix):
        out = [(term.label, term.body)]
        if term.label.kind != "time" and not (strict and term.label.kind == "tau"):
            out.append((TIME, term))
        return out

    if isinstance(term, Choice):
        left = _step(term.left, strict, active)
        right = _step(term.right, strict, active)
        out: list[Step] = []
        for lab, nxt in left:
            if lab.kind != "time":
                out.append((lab, nxt))
        for lab, nxt in right:
            if lab.kind != "time":
                out.append((lab, nxt))
        lt, rt = _time_successor(left), _time_successor(right)
        if lt is not None and rt is not None:
            out.append((TIME, Choice(lt, rt)))
        return out

    if isinstance(term, Par):
        left = _step(term.left, strict, active)
        right = _step(term.right, strict, active)
        out = []
        has_tau = False
        for lab, nxt in left:
            if lab.kind != "time":
                out.append((lab, Par(nxt, term.right)))
                has_tau = has_tau or lab.kind == "tau"
        for lab, nxt in right:
            if lab.kind != "time":
                out.append((lab, Par(term.left, nxt)))
                has_tau = has_tau or lab.kind == "tau"
        for lab, nxt in left:
            if not lab.is_visible():
                continue
            wanted = lab.co()
            for lab2, nxt2 in right:
                if lab2 == wanted:
                    out.append((TAU, Par(nxt, nxt2)))
                    has_tau = True
        if not has_tau:
            lt, rt = _time_successor(left), _time_successor(right)
            if lt is not None and rt is not None:
                out.append((TIME, Par(lt, rt)))
        return out

    if isinstance(term, Restrict):
        out = []
        for lab, nxt in _step(term.body, strict, active):
            if lab.is_visible() and lab.action.name in term.names:
                continue
            out.append((lab, Restrict(nxt, term.names)))
        return out

    if isinstance(term, Relabel):
        return [
            (term.apply(lab), Relabel(nxt, term.mapping))
            for lab, nxt in _step(term.body, strict, active)
        ]

    if isinstance(term, Rec):
        if term in active:
            raise WellformednessError(
                f"recursion variable {term.var!r} reached without passing a prefix"
            )
        unfolded = substitute(term.body, term.var, term)
        return _step(unfolded, strict, active + (term,))

    if isinstance(term, Var):
        raise WellformednessError(f"cannot step open term with free variable {term.name!r}")

    raise TypeError(f"not a term: {term!r}")


def enabled(term: Term, strict_tau_urgency: bool = False) -> tuple[Label, ...]:
    """The labels of the outgoing transitions, sorted and deduplicated."""
    labs = {lab for lab, _ in step(term, strict_tau_urgency)}
    return tuple(sorted(labs, key=Label.sort_key))


# ---------------------------------------------------------------------------
# Canonical forms

# Laws used, all sound for strong bisimilarity here: choice is
# associative, commutative and idempotent with Nil as unit (Nil only
# idles, and time passing preserves choice); parallel is associative and
# commutative; restriction of names the body can never use is dropped;
# relabelling pairs that are identities or whose source cannot occur are
# dropped; an unused recursion binder is dropped; a recursion at the
# root is unfolded once.  Par with Nil is NOT pruned: tau.a.0 | 0 has no
# time step while tau.a.0 idles, so the unit law fails under maximal
# progress.


# Terms are immutable and heavily shared between states, so both
# normal forms are memoized; the caps only guard against degenerate
# workloads that stream millions of distinct terms through one process.
_NORMAL_MEMO: dict[Term, Term] = {}
_CANON_MEMO: dict[Term, Term] = {}
_MEMO_CAP = 2_000_000


def _normalize(term: Term) -> Term:
    cached = _NORMAL_MEMO.get(term)
    if cached is not None:
        return cached
    out = _normalize_uncached(term)
    if len(_NORMAL_MEMO) >= _MEMO_CAP:
        _NORMAL_MEMO.clear()
    _NORMAL_MEMO[term] = out
    return out


def _normalize_uncached(term: Term) -> Term:
    if isinstance(term, Prefix):
        labels = []
        node = term
        while isinstance(node, Prefix):
            labels.append(node.label)
            node = node.body
        body = _normalize(node)
        for lab in reversed(labels):
            body = Prefix(lab, body)
        return body

    if isinstance(term, (Nil, Var)):
        return term

    if isinstance(term, Choice):
        parts: list[Term] = []
        seen: set[str] = set()
        stack = [term.right, term.left]
        while stack:
            node = stack.pop()
            if isinstance(node, Choice):
                stack.append(node.right)
                stack.append(node.left)
                continue
            node = _normalize(node)
            if isinstance(node, Choice):
                stack.append(node.right)
                stack.append(node.left)
                continue
            if isinstance(node, Nil):
                continue
            key = print_term(node)
            if key not in seen:
                seen.add(key)
                parts.append(node)
        if not parts:
            return NIL
        parts.sort(key=print_term)
        out = parts[-1]
        for part in reversed(parts[:-1]):
            out = Choice(part, out)
        return out

    if isinstance(term, Par):
        parts = []
        stack = [term.right, term.left]
        while stack:
            node = stack.pop()
            if isinstance(node, Par):
                stack.append(node.right)
                stack.append(node.left)
                continue
            node = _normalize(node)
            if isinstance(node, Par):
                stack.append(node.right)
                stack.append(node.left)
                continue
            parts.append(node)
        parts.sort(key=print_term)
        out = parts[-1]
        for part in reversed(parts[:-1]):
            out = Par(part, out)
        return out

    if isinstance(term, Restrict):
        body = _normalize(term.body)
        names = frozenset(term.names & syntactic_names(body))
        if not names:
            return body
        return Restrict(body, names)

    if isinstance(term, Relabel):
        body = _normalize(term.body)
        used = syntactic_names(body)
        mapping = tuple((old, new) for old, new in term.mapping if old != new and old in used)
        if not mapping:
            return body
        return Relabel(body, mapping)

    if isinstance(term, Rec):
        body = _normalize(term.body)
        if term.var not in free_variables(body):
            return body
        return Rec(term.var, body)

    raise TypeError(f"not a term: {term!r}")


def canonical_state(term: Term) -> Term:
    """Normal form used to identify states: laws above plus root unfolding."""
    cached = _CANON_MEMO.get(term)
    if cached is not None:
        return cached
    start = term
    term = _normalize(term)
    for _ in range(10000):
        if not isinstance(term, Rec):
            if len(_CANON_MEMO) >= _MEMO_CAP:
                _CANON_MEMO.clear()
            _CANON_MEMO[start] = term
            return term
        term = _normalize(substitute(term.body, term.var, term))
    raise InternalCheckError("recursion unfolding did not settle")


def canonical_key(term: Term) -> str:
    return print_term(canonical_state(term))


# ---------------------------------------------------------------------------
# Transition systems


@dataclass(frozen=True)
class Lts:
    """An explicit transition system with canonical-term state names.

    State 0 is initial.  When `complete` is False the construction hit
    the state budget: every listed state was expanded, but states in
    `frontier` had at least one outgoing transition dropped because its
    target did not fit in the budget.
    """

    states: tuple[str, ...]
    terms: tuple[Term, ...] = field(repr=False)
    transitions: tuple[tuple[int, Label, int], ...]
    complete: bool
    frontier: tuple[int, ...] = ()
    initial: int = 0

    @property
    def num_states(self) -> int:
        return len(self.states)

    def successors(self, state: int) -> tuple[tuple[Label, int], ...]:
        return self._succ_map()[state]

    def _succ_map(self):
        cached = getattr(self, "_succ", None)
        if cached is None:
            table: list[list[tuple[Label, int]]] = [[] for _ in self.states]
            for src, lab, dst in self.transitions:
                table[src].append((lab, dst))
            cached = tuple(tuple(row) for row in table)
            object.__setattr__(self, "_succ", cached)
        return cached

    def enabled_labels(self, state: int) -> tuple[Label, ...]:
        return tuple(sorted({lab for lab, _ in self.successors(state)}, key=Label.sort_key))

    def time_successor(self, state: int) -> int | None:
        for lab, dst in self.successors(state):
            if lab.kind == "time":
                return dst
        return None

    def labels(self) -> tuple[Label, ...]:
        return tuple(sorted({lab for _, lab, _ in self.transitions}, key=Label.sort_key))

    def visible_names(self) -> frozenset[str]:
        return frozenset(
            lab.action.name for _, lab, _ in self.transitions if lab.is_visible()
        )

    def tau_closure(self, states: frozenset[int]) -> frozenset[int]:
        out = set(states)
        work = list(states)
        while work:
            s = work.pop()
            for lab, dst in self.successors(s):
                if lab.kind == "tau" and dst not in out:
                    out.add(dst)
                    work.append(dst)
        return frozenset(out)

    def weak_successors(self, state: int, lab: Label) -> frozenset[int]:
        """tau* lab tau* targets; for lab = tau this is just the tau closure."""
        start = self.tau_closure(frozenset({state}))
        if lab.kind == "tau":
            return start
        mid = {dst for s in start for l2, dst in self.successors(s) if l2 == lab}
        return self.tau_closure(frozenset(mid))

    def to_json(self) -> str:
        doc = {
            "states": [{"id": i, "term": s} for i, s in enumerate(self.states)],
            "initial": self.initial,
            "transitions": [[src, lab.pretty(), dst] for src, lab, dst in self.transitions],
            "complete": self.complete,
        }
        return json.dumps(doc, indent=2)

    def to_dot(self) -> str:
        lines = ["digraph lts {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
        lines.append("  __start [shape=point];")
        lines.append(f"  __start -> s{self.initial};")
        for i, text in enumerate(self.states):
            shape = ", peripheries=2" if i in self.frontier else ""
            safe = text.replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  s{i} [label="{i}", tooltip="{safe}"{shape}];')
        for src, lab, dst in self.transitions:
            style = ", style=dashed" if lab.kind == "time" else ""
            lines.append(f'  s{src} -> s{dst} [label="{lab.pretty()}"{style}];')
        lines.append("}")
        return "\n".join(lines)


def build_lts(
    term: Term,
    max_states: int = 100000,
    strict_tau_urgency: bool = False,
) -> Lts:
    """Breadth-first expansion of the reachable canonical state space."""
    require_wellformed(term)
    root = canonical_state(term)
    index: dict[Term, int] = {root: 0}
    keys: list[str] = [print_term(root)]
    terms: list[Term] = [root]
    transitions: list[tuple[int, Label, int]] = []
    frontier: list[int] = []
    complete = True

    queue_pos = 0
    while queue_pos < len(terms):
        sid = queue_pos
        queue_pos += 1
        current = terms[sid]
        edges: list[tuple[Label, int]] = []
        time_targets = set()
        dropped = False
        for lab, succ in step(current, strict_tau_urgency):
            canon = canonical_state(succ)
            dst = index.get(canon)
            if dst is None:
                if len(keys) >= max_states:
                    complete = False
                    dropped = True
                    continue
                dst = len(keys)
                index[canon] = dst
                keys.append(print_term(canon))
                terms.append(canon)
            edges.append((lab, dst))
            if lab.kind == "time":
                time_targets.add(dst)
        if len(time_targets) > 1:
            raise InternalCheckError(
                f"state {keys[sid]!r} has {len(time_targets)} distinct time successors"
            )
        if dropped:
            frontier.append(sid)
        seen_edges = set()
        for lab, dst in edges:
            if (lab, dst) not in seen_edges:
                seen_edges.add((lab, dst))
                transitions.append((sid, lab, dst))

    transitions.sort(key=lambda e: (e[0], e[1].sort_key(), e[2]))
    return Lts(
        states=tuple(keys),
        terms=tuple(terms),
        transitions=tuple(transitions),
        complete=complete,
        frontier=tuple(frontier),
    )


# ---------------------------------------------------------------------------
# Traces


@dataclass(frozen=True)
class TraceSet:
    """Finite set of label sequences; partial means something was cut off."""

    traces: frozenset[Trace]
    partial: bool

    def __contains__(self, item) -> bool:
        return item in self.traces

    def __iter__(self):
        return iter(self.traces)

    def __len__(self) -> int:
        return len(self.traces)


def traces(lts: Lts, depth: int) -> TraceSet:
    """All label sequences of length at most `depth` from the initial state.

    `partial` is set only when a state with dropped transitions was
    reached strictly inside the horizon, i.e. when the budget cut may
    have removed traces this call should have returned.
    """
    out: set[Trace] = set()
    partial = False
    frontier_set = set(lts.frontier)
    stack: list[tuple[int, Trace]] = [(lts.initial, ())]
    seen: set[tuple[int, Trace]] = set()
    while stack:
        state, trace = stack.pop()
        if (state, trace) in seen:
            continue
        seen.add((state, trace))
        out.add(trace)
        if len(trace) == depth:
            continue
        if state in frontier_set:
            partial = True
        for lab, dst in lts.successors(state):
            stack.append((dst, trace + (lab,)))
    return TraceSet(frozenset(out), partial)


__all__ = [
    "step",
    "enabled",
    "canonical_state",
    "canonical_key",
    "Lts",
    "build_lts",
    "TraceSet",
    "traces",
]
