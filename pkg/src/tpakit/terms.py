"""Process terms for a CCS-style calculus with a discrete time action.

The label alphabet is the set of visible actions (names and co-names),
the internal action tau, the clock action t, and the distinguished
success action tick.  tau, t and tick are not names: they cannot be
restricted or relabelled and tick has no co-action.

All structures here are immutable; they can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import WellformednessError

RESERVED_NAMES = frozenset({"tau", "t", "tick"})

# Identifiers taken by the concrete syntax; using them as names would
# produce terms that print fine but do not parse back.
KEYWORDS = frozenset({"rec", "Nil"})


def _check_name(name: str, what: str) -> None:
    if not name or not (name[0].isalpha() or name[0] == "_"):
        raise ValueError(f"{what} {name!r} is not an identifier")
    if not all(c.isalnum() or c == "_" for c in name):
        raise ValueError(f"{what} {name!r} is not an identifier")
    if name in RESERVED_NAMES or name in KEYWORDS:
        raise ValueError(f"{what} {name!r} is reserved")


@dataclass(frozen=True)
class Action:
    """A visible action: a name plus a polarity (co-names are outputs)."""

    name: str
    output: bool = False

    def __post_init__(self):
        _check_name(self.name, "action name")

    def co(self) -> Action:
        return Action(self.name, not self.output)

    def __str__(self) -> str:
        return ("'" + self.name) if self.output else self.name


# Label kinds.  "act" carries an Action; the other three stand alone.
_KIND_ACT = "act"
_KIND_TAU = "tau"
_KIND_TIME = "time"
_KIND_TICK = "tick"

_KIND_RANK = {_KIND_TAU: 0, _KIND_TIME: 1, _KIND_ACT: 2, _KIND_TICK: 3}


@dataclass(frozen=True)
class Label:
    """A transition label: visible action, tau, the clock action t, or tick."""

    kind: str
    action: Action | None = None

    def is_visible(self) -> bool:
        return self.kind == _KIND_ACT

    def co(self) -> Label:
        if self.kind != _KIND_ACT:
            raise ValueError(f"{self} has no co-label")
        return Label(_KIND_ACT, self.action.co())

    def pretty(self) -> str:
        if self.kind == _KIND_ACT:
            return str(self.action)
        if self.kind == _KIND_TAU:
            return "tau"
        if self.kind == _KIND_TIME:
            return "t"
        return "tick"

    def sort_key(self) -> tuple:
        if self.kind == _KIND_ACT:
            return (_KIND_RANK[self.kind], self.action.name, self.action.output)
        return (_KIND_RANK[self.kind], "", False)

    def __str__(self) -> str:
        return self.pretty()


TAU = Label(_KIND_TAU)
TIME = Label(_KIND_TIME)
TICK = Label(_KIND_TICK)


def act(name: str, output: bool = False) -> Label:
    """Build a visible-action label; `output=True` gives the co-name."""
    return Label(_KIND_ACT, Action(name, output))


def label_from_string(text: str) -> Label:
    """Parse one label written as in the concrete syntax ("a", "'a", "tau", "t", "tick")."""
    if text == "tau":
        return TAU
    if text == "t":
        return TIME
    if text == "tick":
        return TICK
    if text.startswith("'"):
        return act(text[1:], output=True)
    return act(text)


Trace = tuple[Label, ...]


def trace_from_strings(parts) -> Trace:
    return tuple(label_from_string(p) for p in parts)


# ---------------------------------------------------------------------------
# Terms


class Term:
    """Base class for process terms.  Subclasses are frozen dataclasses."""

    __slots__ = ()


def _cached_hash(cls):
    # The generated hash walks the whole subterm; deep chains make that
    # quadratic during state-space construction, so compute it once.
    generated = cls.__hash__

    def __hash__(self, _generated=generated):
        h = self.__dict__.get("_hash")
        if h is None:
            h = _generated(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


@dataclass(frozen=True)
class Nil(Term):
    def __str__(self) -> str:
        return print_term(self)


@dataclass(frozen=True)
class Var(Term):
    name: str

    def __post_init__(self):
        _check_name(self.name, "recursion variable")

    def __str__(self) -> str:
        return print_term(self)


@_cached_hash
@dataclass(frozen=True)
class Prefix(Term):
    label: Label
    body: Term

    def __str__(self) -> str:
        return print_term(self)


@_cached_hash
@dataclass(frozen=True)
class Choice(Term):
    left: Term
    right: Term

    def __str__(self) -> str:
        return print_term(self)


@_cached_hash
@dataclass(frozen=True)
class Par(Term):
    left: Term
    right: Term

    def __str__(self) -> str:
        return print_term(self)


@_cached_hash
@dataclass(frozen=True)
class Restrict(Term):
    body: Term
    names: frozenset[str]

    def __post_init__(self):
        for name in self.names:
            _check_name(name, "restricted name")

    def __str__(self) -> str:
        return print_term(self)


@_cached_hash
@dataclass(frozen=True)
class Relabel(Term):
    body: Term
    # Pairs (old, new): occurrences of `old` become `new`, both polarities.
    mapping: tuple[tuple[str, str], ...]

    def __post_init__(self):
        seen = set()
        for old, new in self.mapping:
            _check_name(old, "relabelling source")
            _check_name(new, "relabelling target")
            if old in seen:
                raise ValueError(f"duplicate relabelling source {old!r}")
            seen.add(old)
        object.__setattr__(self, "mapping", tuple(sorted(self.mapping)))

    def apply(self, lab: Label) -> Label:
        if not lab.is_visible():
            return lab
        for old, new in self.mapping:
            if lab.action.name == old:
                return act(new, lab.action.output)
        return lab

    def __str__(self) -> str:
        return print_term(self)


@_cached_hash
@dataclass(frozen=True)
class Rec(Term):
    var: str
    body: Term

    def __post_init__(self):
        _check_name(self.var, "recursion variable")

    def __str__(self) -> str:
        return print_term(self)


NIL = Nil()


# ---------------------------------------------------------------------------
# Printing

# Precedence levels, loosest first.  The dot of prefixing binds tighter
# than the postfix operators, which bind tighter than | and +.
_CHOICE, _PAR, _POSTFIX, _PREFIX, _ATOM = range(5)


def _level(t: Term) -> int:
    if isinstance(t, Choice):
        return _CHOICE
    if isinstance(t, Par):
        return _PAR
    if isinstance(t, (Restrict, Relabel)):
        return _POSTFIX
    if isinstance(t, (Prefix, Rec)):
        return _PREFIX
    return _ATOM


def print_term(t: Term) -> str:
    """Render a term so that parsing the result rebuilds it exactly."""
    return _print(t, _CHOICE)


def _print(t: Term, required: int) -> str:
    text = _print_node(t)
    if _level(t) < required:
        return "(" + text + ")"
    return text


def _print_node(t: Term) -> str:
    if isinstance(t, Nil):
        return "0"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Prefix):
        # Deep chains are common; collect labels iteratively.
        labels = []
        while isinstance(t, Prefix):
            labels.append(t.label.pretty())
            t = t.body
        labels.append(_print(t, _ATOM) if not isinstance(t, Rec) else _print_node(t))
        return ".".join(labels)
    if isinstance(t, Choice):
        return _print(t.left, _PAR) + " + " + _print(t.right, _CHOICE)
    if isinstance(t, Par):
        return _print(t.left, _POSTFIX) + " | " + _print(t.right, _PAR)
    if isinstance(t, Restrict):
        return _print(t.body, _POSTFIX) + "\\{" + ",".join(sorted(t.names)) + "}"
    if isinstance(t, Relabel):
        inner = ",".join(f"{new}/{old}" for old, new in t.mapping)
        return _print(t.body, _POSTFIX) + "[" + inner + "]"
    if isinstance(t, Rec):
        return f"rec {t.var}. " + _print(t.body, _PREFIX)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Structural helpers


def _children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, Prefix):
        return (t.body,)
    if isinstance(t, (Choice, Par)):
        return (t.left, t.right)
    if isinstance(t, (Restrict, Relabel)):
        return (t.body,)
    if isinstance(t, Rec):
        return (t.body,)
    return ()


def free_variables(t: Term) -> frozenset[str]:
    out: set[str] = set()
    stack: list[tuple[Term, frozenset[str]]] = [(t, frozenset())]
    while stack:
        node, bound = stack.pop()
        while isinstance(node, Prefix):  # avoid recursion down long chains
            node = node.body
        if isinstance(node, Var):
            if node.name not in bound:
                out.add(node.name)
        elif isinstance(node, Rec):
            stack.append((node.body, bound | {node.var}))
        else:
            for c in _children(node):
                stack.append((c, bound))
    return frozenset(out)


def substitute(t: Term, var: str, replacement: Term) -> Term:
    """Substitute `replacement` for free occurrences of Var(var).

    The replacement is assumed closed (it always is when unfolding
    recursion), so no capture can occur.
    """
    if isinstance(t, Prefix):
        # Iterative down the chain, rebuild on the way back.
        labels = []
        node = t
        while isinstance(node, Prefix):
            labels.append(node.label)
            node = node.body
        new_body = substitute(node, var, replacement)
        if new_body is node:
            return t
        for lab in reversed(labels):
            new_body = Prefix(lab, new_body)
        return new_body
    if isinstance(t, Var):
        return replacement if t.name == var else t
    if isinstance(t, Nil):
        return t
    if isinstance(t, Choice):
        l = substitute(t.left, var, replacement)
        r = substitute(t.right, var, replacement)
        return t if l is t.left and r is t.right else Choice(l, r)
    if isinstance(t, Par):
        l = substitute(t.left, var, replacement)
        r = substitute(t.right, var, replacement)
        return t if l is t.left and r is t.right else Par(l, r)
    if isinstance(t, Restrict):
        b = substitute(t.body, var, replacement)
        return t if b is t.body else Restrict(b, t.names)
    if isinstance(t, Relabel):
        b = substitute(t.body, var, replacement)
        return t if b is t.body else Relabel(b, t.mapping)
    if isinstance(t, Rec):
        if t.var == var:
            return t
        b = substitute(t.body, var, replacement)
        return t if b is t.body else Rec(t.var, b)
    raise TypeError(f"not a term: {t!r}")


def syntactic_names(t: Term) -> frozenset[str]:
    """All visible action names occurring anywhere in the term.

    Includes names used in prefixes, restriction sets and relabelling
    pairs; an over-approximation of the reachable sort is fine for the
    uses this has (building restriction sets for test evaluation).
    """
    out: set[str] = set()
    stack = [t]
    while stack:
        node = stack.pop()
        while isinstance(node, Prefix):
            if node.label.is_visible():
                out.add(node.label.action.name)
            node = node.body
        if isinstance(node, Restrict):
            out |= node.names
        elif isinstance(node, Relabel):
            for old, new in node.mapping:
                out.add(old)
                out.add(new)
        stack.extend(_children(node))
    return frozenset(out)


def mentions_tick(t: Term) -> bool:
    stack = [t]
    while stack:
        node = stack.pop()
        while isinstance(node, Prefix):
            if node.label.kind == _KIND_TICK:
                return True
            node = node.body
        stack.extend(_children(node))
    return False


# ---------------------------------------------------------------------------
# Well-formedness and regularity


@dataclass(frozen=True)
class WellformednessReport:
    closed: bool
    guarded: bool
    free_vars: tuple[str, ...] = ()
    unguarded_vars: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.closed and self.guarded

    def problems(self) -> tuple[str, ...]:
        out = []
        for v in self.free_vars:
            out.append(f"free recursion variable {v!r}")
        for v in self.unguarded_vars:
            out.append(f"recursion variable {v!r} is not prefix-guarded")
        return tuple(out)


def _unguarded_vars(t: Term) -> frozenset[str]:
    """Variables of `t` with at least one occurrence not under a prefix."""
    if isinstance(t, Var):
        return frozenset({t.name})
    if isinstance(t, Prefix):
        return frozenset()
    if isinstance(t, (Choice, Par)):
        return _unguarded_vars(t.left) | _unguarded_vars(t.right)
    if isinstance(t, (Restrict, Relabel)):
        return _unguarded_vars(t.body)
    if isinstance(t, Rec):
        return _unguarded_vars(t.body) - {t.var}
    return frozenset()


def check_wellformed(t: Term) -> WellformednessReport:
    """Check closedness and strong guardedness of every recursion."""
    free = sorted(free_variables(t))
    unguarded: set[str] = set()

    stack = [t]
    while stack:
        node = stack.pop()
        while isinstance(node, Prefix):
            node = node.body
        if isinstance(node, Rec):
            if node.var in _unguarded_vars(node.body):
                unguarded.add(node.var)
        stack.extend(_children(node))

    return WellformednessReport(
        closed=not free,
        guarded=not unguarded,
        free_vars=tuple(free),
        unguarded_vars=tuple(sorted(unguarded)),
    )


def require_wellformed(t: Term) -> None:
    report = check_wellformed(t)
    if not report.ok:
        raise WellformednessError("; ".join(report.problems()))


def is_regular(t: Term) -> bool:
    """Whether the term stays finite-state by construction.

    Regularity is syntactic: no recursion variable may occur inside an
    operand of Par, Restrict or Relabel within the body of its binding
    Rec.  Static composition of regular subterms is still regular.
    """

    def walk(node: Term, bound: frozenset[str], banned: frozenset[str]) -> bool:
        # `bound`: rec variables in scope here.  `banned`: those whose
        # binder sits above a Par/Restrict/Relabel we already crossed.
        while isinstance(node, Prefix):
            node = node.body
        if isinstance(node, Var):
            return node.name not in banned
        if isinstance(node, Choice):
            return walk(node.left, bound, banned) and walk(node.right, bound, banned)
        if isinstance(node, (Par, Restrict, Relabel)):
            inner = banned | bound
            return all(walk(c, bound, inner) for c in _children(node))
        if isinstance(node, Rec):
            # A fresh binder shadows any outer variable of the same name.
            return walk(node.body, bound | {node.var}, banned - {node.var})
        return True

    return walk(t, frozenset(), frozenset())


__all__ = [
    "Action",
    "Label",
    "TAU",
    "TIME",
    "TICK",
    "act",
    "label_from_string",
    "Trace",
    "trace_from_strings",
    "Term",
    "Nil",
    "NIL",
    "Var",
    "Prefix",
    "Choice",
    "Par",
    "Restrict",
    "Relabel",
    "Rec",
    "print_term",
    "free_variables",
    "substitute",
    "syntactic_names",
    "mentions_tick",
    "WellformednessReport",
    "check_wellformed",
    "require_wellformed",
    "is_regular",
    "RESERVED_NAMES",
    "KEYWORDS",
]
