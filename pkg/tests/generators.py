"""Seeded random generators shared by the test suite.

Everything is driven by an explicit random.Random so failures reproduce
from the seed alone.  Generated terms are always closed and guarded
(every recursion body is prefix-rooted); with regular=True no recursion
variable is placed under a parallel, restriction or relabelling, so the
result is finite-state by construction.
"""

from __future__ import annotations

import random

from tpakit.terms import (
    NIL,
    TAU,
    TICK,
    TIME,
    Choice,
    Label,
    Par,
    Prefix,
    Rec,
    Relabel,
    Restrict,
    Term,
    Var,
    act,
)

NAME_POOL = ("a", "b", "c", "d", "h", "l")
_REC_VARS = ("X", "Y", "Z")


def random_label(
    rng: random.Random,
    names=NAME_POOL,
    p_tau: float = 0.1,
    p_time: float = 0.2,
    allow_tick: bool = False,
) -> Label:
    r = rng.random()
    if r < p_tau:
        return TAU
    if r < p_tau + p_time:
        return TIME
    if allow_tick and r < p_tau + p_time + 0.05:
        return TICK
    return act(rng.choice(names), rng.random() < 0.4)


def random_term(
    rng: random.Random,
    max_depth: int = 4,
    names=NAME_POOL,
    regular: bool = True,
    allow_tick: bool = False,
) -> Term:
    return _gen(rng, max_depth, tuple(names), (), regular, allow_tick)


def _gen(rng, depth, names, scope, regular, allow_tick) -> Term:
    ops = ["prefix", "prefix", "leaf"]
    if depth > 0:
        ops += ["choice", "choice", "rec"]
        if not (regular and scope):
            ops += ["par", "restrict", "relabel"]
    op = rng.choice(ops)

    if op == "leaf":
        if scope and rng.random() < 0.7:
            return Var(rng.choice(scope))
        return NIL

    if op == "prefix":
        if depth > 0:
            body = _gen(rng, depth - 1, names, scope, regular, allow_tick)
        elif scope and rng.random() < 0.5:
            body = Var(rng.choice(scope))
        else:
            body = NIL
        for _ in range(rng.randint(1, 3)):
            body = Prefix(random_label(rng, names, allow_tick=allow_tick), body)
        return body

    if op == "choice":
        return Choice(
            _gen(rng, depth - 1, names, scope, regular, allow_tick),
            _gen(rng, depth - 1, names, scope, regular, allow_tick),
        )

    if op == "rec":
        var = rng.choice(_REC_VARS)
        inner = tuple(sorted(set(scope) | {var}))
        # Prefix-rooted body keeps every occurrence of `var` guarded.
        guard = random_label(rng, names, allow_tick=allow_tick)
        return Rec(var, Prefix(guard, _gen(rng, depth - 1, names, inner, regular, allow_tick)))

    if op == "par":
        return Par(
            _gen(rng, depth - 1, names, scope, regular, allow_tick),
            _gen(rng, depth - 1, names, scope, regular, allow_tick),
        )

    if op == "restrict":
        k = rng.randint(1, min(2, len(names)))
        subset = frozenset(rng.sample(list(names), k))
        return Restrict(_gen(rng, depth - 1, names, scope, regular, allow_tick), subset)

    # relabel
    olds = rng.sample(list(names), rng.randint(1, 2))
    mapping = tuple((old, rng.choice(names)) for old in olds)
    return Relabel(_gen(rng, depth - 1, names, scope, regular, allow_tick), mapping)


# ---------------------------------------------------------------------------
# Bisimilarity-preserving rewrites

_CHILD_FIELDS = {
    Prefix: ("body",),
    Choice: ("left", "right"),
    Par: ("left", "right"),
    Restrict: ("body",),
    Relabel: ("body",),
    Rec: ("body",),
}


def _paths(term):
    out = [((), term)]
    stack = [((), term)]
    while stack:
        path, node = stack.pop()
        for fieldname in _CHILD_FIELDS.get(type(node), ()):
            child = getattr(node, fieldname)
            out.append((path + (fieldname,), child))
            stack.append((path + (fieldname,), child))
    return out


def _replace_at(term, path, new):
    if not path:
        return new
    head, rest = path[0], path[1:]
    child = _replace_at(getattr(term, head), rest, new)
    if isinstance(term, Prefix):
        return Prefix(term.label, child)
    if isinstance(term, Choice):
        return Choice(child, term.right) if head == "left" else Choice(term.left, child)
    if isinstance(term, Par):
        return Par(child, term.right) if head == "left" else Par(term.left, child)
    if isinstance(term, Restrict):
        return Restrict(child, term.names)
    if isinstance(term, Relabel):
        return Relabel(child, term.mapping)
    if isinstance(term, Rec):
        return Rec(term.var, child)
    raise TypeError(type(term))


def _used_vars(term) -> set[str]:
    out = set()
    stack = [term]
    while stack:
        node = stack.pop()
        if isinstance(node, Rec):
            out.add(node.var)
        if isinstance(node, Var):
            out.add(node.name)
        for fieldname in _CHILD_FIELDS.get(type(node), ()):
            stack.append(getattr(node, fieldname))
    return out


def mutate_bisimilar(rng: random.Random, term: Term, steps: int = 2) -> Term:
    """Rewrite the term without changing its behaviour.

    Rules: swap the operands of a choice or parallel, unfold one
    recursion, rename a bound recursion variable.  All three preserve
    strong bisimilarity, so the result must stay equivalent.
    """
    from tpakit.terms import free_variables, substitute

    for _ in range(steps):
        candidates = []
        for path, node in _paths(term):
            if isinstance(node, (Choice, Par)):
                candidates.append(("swap", path, node))
            if isinstance(node, Rec):
                if not free_variables(node):
                    candidates.append(("unfold", path, node))
                candidates.append(("alpha", path, node))
        if not candidates:
            break
        kind, path, node = rng.choice(candidates)
        if kind == "swap":
            new = type(node)(node.right, node.left)
        elif kind == "unfold":
            new = substitute(node.body, node.var, node)
        else:
            used = _used_vars(term)
            fresh = next(f"V{i}" for i in range(len(used) + 1) if f"V{i}" not in used)
            new = Rec(fresh, substitute(node.body, node.var, Var(fresh)))
        term = _replace_at(term, path, new)
    return term

# ---------------------------------------------------------------------------
# Observers and predicates

def random_static_observer(rng: random.Random, names=NAME_POOL, name: str = "rnd"):
    """Random total observation map: each letter is erased, renamed or
    left to the default clause; the clock is sometimes hidden too."""
    from tpakit.observation import StaticObserver

    mapping = []
    for n in names:
        for negated in (False, True):
            r = rng.random()
            if r < 0.25:
                mapping.append((act(n, negated), None))
            elif r < 0.45:
                mapping.append((act(n, negated), act(rng.choice(names), rng.random() < 0.5)))
    if rng.random() < 0.25:
        mapping.append((TIME, None))
    default = "id" if rng.random() < 0.8 else "eps"
    return StaticObserver(tuple(mapping), default, name)


def degrade_observer(rng: random.Random, observer, names=NAME_POOL):
    """A strictly-no-sharper observer: composes a random post-map over
    the given observer's images, so anything the result distinguishes
    the original distinguished first."""
    from tpakit.observation import StaticObserver
    from tpakit.terms import Label as _Label

    domain = {act(n, negated) for n in names for negated in (False, True)}
    domain |= {subject for subject, _ in observer.mapping}
    images = sorted(
        {observer.image(x) for x in domain} - {None}, key=_Label.sort_key
    )
    post = {}
    for image in images:
        r = rng.random()
        if r < 0.3:
            post[image] = None
        elif r < 0.5 and len(images) > 1:
            post[image] = rng.choice(images)
        else:
            post[image] = image
    mapping = []
    for x in sorted(domain, key=_Label.sort_key):
        y = observer.image(x)
        mapping.append((x, None if y is None else post[y]))
    return StaticObserver(tuple(mapping), observer.default, observer.name + "-blunted")


def random_predicate(
    rng: random.Random, names=NAME_POOL, max_states: int = 4, allow_empty: bool = False
):
    """Small random deterministic acceptor with per-state defaults.

    Unless allow_empty is set the initial state never accepts, matching
    the convention that a secret cannot hold before anything happened.
    """
    from tpakit.predicates import Predicate

    n = rng.randint(1, max_states)
    letters = [act(nm, neg) for nm in names for neg in (False, True)] + [TIME]
    edges = []
    for src in range(n):
        for letter in rng.sample(letters, rng.randint(0, min(3, len(letters)))):
            edges.append((src, letter, rng.randrange(n)))
    initial = rng.randrange(n)
    accepting = frozenset(
        s for s in range(n) if rng.random() < 0.4 and (allow_empty or s != initial)
    )
    defaults = tuple(rng.randrange(n) for _ in range(n))
    return Predicate(n, initial, accepting, tuple(edges), defaults, "rnd")


def predicate_and(p1, p2, name: str = ""):
    """Reachable product acceptor for the intersection of two predicates."""
    from tpakit.predicates import Predicate

    letters = sorted(set(p1.letters()) | set(p2.letters()), key=Label.sort_key)
    start = (p1.initial, p2.initial)
    index = {start: 0}
    order = [start]
    edges = []
    defaults = []
    queue = [start]
    while queue:
        pair = queue.pop(0)
        src = index[pair]

        def dst_of(target):
            got = index.get(target)
            if got is None:
                got = len(order)
                index[target] = got
                order.append(target)
                queue.append(target)
            return got

        s1, s2 = pair
        for letter in letters:
            target = (p1.step(s1, letter), p2.step(s2, letter))
            edges.append((src, letter, dst_of(target)))
        defaults.append(dst_of((p1.defaults[s1], p2.defaults[s2])))
    accepting = frozenset(
        i for i, (s1, s2) in enumerate(order)
        if s1 in p1.accepting and s2 in p2.accepting
    )
    return Predicate(
        len(order), 0, accepting, tuple(edges), tuple(defaults),
        name or f"({p1.name} and {p2.name})",
    )


def random_monotonicity_instance(rng: random.Random, names=("a", "b", "h")):
    """(plant, phi1, phi2, sharp, blunt) with phi2 inside phi1 and the
    blunt observer a post-composition of the sharp one, so the ordering
    law's side conditions hold by construction."""
    from tpakit.semantics import build_lts

    term = random_term(rng, max_depth=3, names=names)
    plant = build_lts(term, max_states=300)
    phi1 = random_predicate(rng, names)
    phi2 = predicate_and(phi1, random_predicate(rng, names))
    sharp = random_static_observer(rng, names)
    blunt = degrade_observer(rng, sharp, names)
    return plant, phi1, phi2, sharp, blunt
