"""Observation functions: what an attacker or a supervisor gets to see.

An observer maps each trace to the sequence of per-letter images, where
an image is a single letter or nothing.  Static observers look at one
letter at a time.  Windowed observers (m-orwellian) may condition the
image of a letter on the letters at distance < m around it, so the
static case is exactly window 1.  Plugin observers wrap an arbitrary
function and only take part in evaluation and bounded comparisons,
never in automata-based verification.

Images default as follows: tau is invisible unless a rule explicitly
says otherwise; every other letter follows the observer's declared
default clause.  tick never reaches an observer (tests are composed
away before observation), so it is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import ObserverError
from .terms import TAU, TIME, Label, Trace, act

Observable = tuple[Label, ...]


def _check_letter(letter: Label) -> None:
    if letter.kind == "tick":
        raise ObserverError("tick is a test-harness action and cannot be observed")


@dataclass(frozen=True)
class StaticObserver:
    """Letter-by-letter observation; mapping entries override the default."""

    mapping: tuple[tuple[Label, Label | None], ...] = ()
    default: str = "id"  # "id" keeps the letter, "eps" erases it
    name: str = ""

    def __post_init__(self):
        if self.default not in ("id", "eps"):
            raise ObserverError(f"unknown default {self.default!r}")
        subjects = [subject for subject, _ in self.mapping]
        if len(subjects) != len(set(subjects)):
            raise ObserverError("duplicate letter in observer mapping")
        ordered = tuple(sorted(self.mapping, key=lambda p: p[0].sort_key()))
        object.__setattr__(self, "mapping", ordered)

    def image(self, letter: Label) -> Label | None:
        _check_letter(letter)
        for subject, target in self.mapping:
            if subject == letter:
                return target
        if letter.kind == "tau":
            return None
        return letter if self.default == "id" else None


@dataclass(frozen=True)
class Rule:
    """One windowed clause: subject letter, optional window condition, image."""

    subject: Label
    image: Label | None
    contains: Label | None = None


@dataclass(frozen=True)
class MOrwellianObserver:
    """Observation with context: the image of letter i may depend on the
    letters at positions within m-1 of it, on both sides.

    With time_transparent=True the trace is first stripped of clock
    letters; windows are then computed over the stripped trace and the
    clock contributes nothing (the untimed counterpart of an observer).
    """

    window: int
    rules: tuple[Rule, ...] = ()
    default: str = "id"
    time_transparent: bool = False
    name: str = ""

    def __post_init__(self):
        if self.window < 1:
            raise ObserverError("window must be at least 1")
        if self.default not in ("id", "eps"):
            raise ObserverError(f"unknown default {self.default!r}")

    def image_in_window(self, letter: Label, window_letters) -> Label | None:
        _check_letter(letter)
        for rule in self.rules:
            if rule.subject != letter:
                continue
            if rule.contains is None or rule.contains in window_letters:
                return rule.image
        if letter.kind == "tau":
            return None
        return letter if self.default == "id" else None


@dataclass(frozen=True)
class PluginObserver:
    """Black-box observation function; evaluation and bounded checks only."""

    fn: Callable[[Trace], Observable] = field(compare=False)
    name: str = ""


Observer = StaticObserver | MOrwellianObserver | PluginObserver


def observe(observer: Observer, trace: Trace) -> Observable:
    """The observable image of a trace."""
    if isinstance(observer, StaticObserver):
        out = []
        for letter in trace:
            image = observer.image(letter)
            if image is not None:
                out.append(image)
        return tuple(out)

    if isinstance(observer, MOrwellianObserver):
        base = trace
        if observer.time_transparent:
            base = tuple(l for l in base if l.kind != "time")
        m = observer.window
        out = []
        for i, letter in enumerate(base):
            window_letters = base[max(0, i - m + 1) : i + m]
            image = observer.image_in_window(letter, window_letters)
            if image is not None:
                out.append(image)
        return tuple(out)

    if isinstance(observer, PluginObserver):
        for letter in trace:
            _check_letter(letter)
        out = tuple(observer.fn(trace))
        for letter in out:
            if not isinstance(letter, Label):
                raise ObserverError("plugin observer returned a non-label")
        return out

    raise TypeError(f"not an observer: {observer!r}")


def identity_observer(name: str = "id") -> StaticObserver:
    return StaticObserver((), "id", name)


def hiding_observer(names, name: str = "") -> StaticObserver:
    """Erase both polarities of the given action names, keep the rest."""
    mapping = []
    for n in sorted(names):
        mapping.append((act(n), None))
        mapping.append((act(n, True), None))
    return StaticObserver(tuple(mapping), "id", name)


def static_as_windowed(observer: StaticObserver) -> MOrwellianObserver:
    """The window-1 form of a static observer; they observe identically."""
    rules = tuple(Rule(subject, target) for subject, target in observer.mapping)
    return MOrwellianObserver(1, rules, observer.default, name=observer.name)


def derive_untimed(observer: Observer) -> Observer:
    """The counterpart that observes as if clock letters were deleted first."""
    if isinstance(observer, StaticObserver):
        mapping = tuple((s, t) for s, t in observer.mapping if s.kind != "time")
        return StaticObserver(
            mapping + ((TIME, None),), observer.default, _untimed_name(observer.name)
        )
    if isinstance(observer, MOrwellianObserver):
        rules = tuple(r for r in observer.rules if r.subject.kind != "time")
        return MOrwellianObserver(
            observer.window, rules, observer.default, True, _untimed_name(observer.name)
        )
    if isinstance(observer, PluginObserver):
        fn = observer.fn
        return PluginObserver(
            lambda w: fn(tuple(l for l in w if l.kind != "time")),
            _untimed_name(observer.name),
        )
    raise TypeError(f"not an observer: {observer!r}")


def _untimed_name(name: str) -> str:
    return (name + "_untimed") if name else "untimed"


# ---------------------------------------------------------------------------
# The strength ordering


@dataclass(frozen=True)
class ComparisonResult:
    """Outcome of compare_observers(weaker_candidate, stronger_candidate).

    kind "Stronger" means the second observer's view determines the
    first's (exact for static pairs).  "NotStronger" carries a pair of
    traces the second identifies but the first separates.  Bounded
    checks that find nothing report "UnknownUpTo" with the bound.
    """

    kind: str
    witness: tuple[Trace, Trace] | None = None
    bound: int | None = None

    @property
    def is_stronger(self) -> bool:
        return self.kind == "Stronger"


def _explicit_letters(observer: Observer) -> set[Label]:
    letters: set[Label] = set()
    if isinstance(observer, StaticObserver):
        for subject, target in observer.mapping:
            letters.add(subject)
            if target is not None:
                letters.add(target)
    elif isinstance(observer, MOrwellianObserver):
        for rule in observer.rules:
            letters.add(rule.subject)
            if rule.image is not None:
                letters.add(rule.image)
            if rule.contains is not None:
                letters.add(rule.contains)
    return letters


def _fresh_letters(taken: set[Label], count: int) -> list[Label]:
    names = {l.action.name for l in taken if l.is_visible()}
    out = []
    i = 0
    while len(out) < count:
        candidate = f"fresh{i}"
        if candidate not in names:
            out.append(act(candidate))
        i += 1
    return out


def letter_universe(o1: Observer, o2: Observer) -> tuple[Label, ...]:
    """Explicit letters of both observers, the clock, tau, and two fresh
    letters that exercise the default clauses."""
    letters = _explicit_letters(o1) | _explicit_letters(o2) | {TAU, TIME}
    letters |= set(_fresh_letters(letters, 2))
    return tuple(sorted(letters, key=Label.sort_key))


def _compare_static_exact(o1: StaticObserver, o2: StaticObserver) -> ComparisonResult:
    # letterwise factoring: observation is a homomorphism, so the order
    # reduces to (a) whatever the stronger side erases the weaker side
    # erases, and (b) letters the stronger side identifies, the weaker
    # side identifies.  Two fresh letters stand in for the unboundedly
    # many letters that only the defaults touch.
    letters = letter_universe(o1, o2)
    for x in letters:
        if o2.image(x) is None and o1.image(x) is not None:
            return ComparisonResult("NotStronger", ((x,), ()))
    for i, x in enumerate(letters):
        for y in letters[i + 1 :]:
            if o2.image(x) == o2.image(y) and o1.image(x) != o1.image(y):
                return ComparisonResult("NotStronger", ((x,), (y,)))
    return ComparisonResult("Stronger")


def _all_traces(letters, bound: int):
    frontier: list[Trace] = [()]
    yield ()
    for _ in range(bound):
        nxt = []
        for w in frontier:
            for letter in letters:
                ww = w + (letter,)
                nxt.append(ww)
                yield ww
        frontier = nxt


def compare_observers(o1: Observer, o2: Observer, bound: int = 6) -> ComparisonResult:
    """Decide whether o2 is at least as strong as o1: any two traces o2
    cannot tell apart, o1 cannot either.

    Static pairs are decided exactly.  Every other combination is a
    bounded exhaustive search over trace pairs; silence is reported as
    UnknownUpTo, never as a positive answer.
    """
    if o1 == o2:
        return ComparisonResult("Stronger")
    if isinstance(o1, StaticObserver) and isinstance(o2, StaticObserver):
        return _compare_static_exact(o1, o2)

    letters = letter_universe(o1, o2)
    buckets: dict[Observable, tuple[Trace, Observable]] = {}
    for w in _all_traces(letters, bound):
        key = observe(o2, w)
        mine = observe(o1, w)
        stored = buckets.get(key)
        if stored is None:
            buckets[key] = (w, mine)
        elif stored[1] != mine:
            return ComparisonResult("NotStronger", (stored[0], w))
    return ComparisonResult("UnknownUpTo", bound=bound)


def observers_comparable(o1: Observer, o2: Observer, bound: int = 6) -> bool | None:
    """Mutual strength; None when a bounded check was inconclusive."""
    forward = compare_observers(o1, o2, bound)
    backward = compare_observers(o2, o1, bound)
    if forward.kind == "NotStronger" or backward.kind == "NotStronger":
        return False
    if forward.is_stronger and backward.is_stronger:
        return True
    return None


__all__ = [
    "Observable",
    "Observer",
    "StaticObserver",
    "MOrwellianObserver",
    "PluginObserver",
    "Rule",
    "observe",
    "identity_observer",
    "hiding_observer",
    "static_as_windowed",
    "derive_untimed",
    "compare_observers",
    "observers_comparable",
    "ComparisonResult",
    "letter_universe",
]
