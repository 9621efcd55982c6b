"""Model files: named processes, observers, predicates, and checks.

A model file is a sequence of declarations.  Each declaration starts at
the beginning of a line with one of the keywords `process`, `observer`,
`predicate`, or `check` and runs until the next declaration; `#` starts
a comment.  The forms are:

    process Name = term
    observer Name hides {h, k}
    observer Name { h -> eps; 'k -> x; default -> id }
    observer Name window 2 { l -> L when window has h; default -> id }
    predicate Name = contains {h}
    predicate Name = dfa { states 2; initial 0; accept 1; 0 -h-> 1; default self }
    predicate Name = test ProcessName
    check name opacity Process Observer Predicate
    check name timing Process Observer Predicate
    check name synth Process Attacker SupObserver Predicate controllable {l} max_insert 2

Checks are declared, not run; run_checks executes a selection of them
and folds the verdicts into one report.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
import warnings
from dataclasses import dataclass, field

from .errors import (
    BudgetExceededError,
    IncompleteLtsError,
    ModelError,
    ParseError,
    TpaError,
)
from .observation import MOrwellianObserver, Observer, Rule, StaticObserver, hiding_observer
from .opacity import check_opacity, check_timing_attack
from .parser import parse_term
from .predicates import Predicate, builtin_contains, from_test_process, holds
from .semantics import build_lts
from .supervisor import synthesize
from .terms import Label, Term, label_from_string, require_wellformed

_KEYWORDS = ("process", "observer", "predicate", "check")


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _statements(text: str):
    """Split source into (first line number, joined text) declarations."""
    current: list[str] = []
    start = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        word = line.strip().split(None, 1)[0]
        if word in _KEYWORDS:
            if current:
                yield start, " ".join(current)
            current = [line.strip()]
            start = lineno
        else:
            if not current:
                raise ParseError(
                    f"expected a declaration keyword, got {word!r}", line=lineno
                )
            current.append(line.strip())
    if current:
        yield start, " ".join(current)


def _parse_label(token: str, lineno: int) -> Label:
    try:
        letter = label_from_string(token)
    except TpaError as exc:
        raise ParseError(f"bad label {token!r}: {exc}", line=lineno) from exc
    if letter.kind == "tick":
        raise ParseError("tick cannot appear in a model file", line=lineno)
    return letter


def _parse_name_set(blob: str, lineno: int) -> list[str]:
    inner = blob.strip()
    if not (inner.startswith("{") and inner.endswith("}")):
        raise ParseError(f"expected {{...}}, got {blob!r}", line=lineno)
    names = [n.strip() for n in inner[1:-1].split(",") if n.strip()]
    return names


def _parse_static_body(body: str, name: str, lineno: int) -> StaticObserver:
    mapping: list[tuple[Label, Label | None]] = []
    default = "eps"
    saw_default = False
    for clause in body.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        if "->" not in clause:
            raise ParseError(f"bad observer clause {clause!r}", line=lineno)
        left, right = (part.strip() for part in clause.split("->", 1))
        if left == "default":
            if right not in ("id", "eps"):
                raise ParseError(
                    f"observer default must be id or eps, got {right!r}", line=lineno
                )
            default = right
            saw_default = True
            continue
        subject = _parse_label(left, lineno)
        target = None if right == "eps" else _parse_label(right, lineno)
        mapping.append((subject, target))
    if not saw_default:
        raise ParseError(
            f"observer {name} needs a default clause to be total", line=lineno
        )
    return StaticObserver(tuple(mapping), default, name)


def _parse_windowed_body(
    body: str, name: str, window: int, lineno: int
) -> MOrwellianObserver:
    rules: list[Rule] = []
    default = "eps"
    saw_default = False
    for clause in body.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        if "->" not in clause:
            raise ParseError(f"bad observer clause {clause!r}", line=lineno)
        left, right = (part.strip() for part in clause.split("->", 1))
        if left == "default":
            if right not in ("id", "eps"):
                raise ParseError(
                    f"observer default must be id or eps, got {right!r}", line=lineno
                )
            default = right
            saw_default = True
            continue
        context = None
        if " when window has " in right:
            right, ctx = (part.strip() for part in right.split(" when window has ", 1))
            context = _parse_label(ctx, lineno)
        subject = _parse_label(left, lineno)
        target = None if right == "eps" else _parse_label(right, lineno)
        rules.append(Rule(subject, target, contains=context))
    if not saw_default:
        raise ParseError(
            f"observer {name} needs a default clause to be total", line=lineno
        )
    return MOrwellianObserver(window, tuple(rules), default, name=name)


_DFA_EDGE = re.compile(r"^(\d+)\s*-\s*(\S+?)\s*->\s*(\d+)$")


def _parse_dfa_body(body: str, name: str, lineno: int) -> Predicate:
    n_states = None
    initial = 0
    accepting: set[int] = set()
    edges: list[tuple[int, Label, int]] = []
    default_mode: str | int = "self"
    for clause in body.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        head, _, rest = clause.partition(" ")
        if head == "states":
            n_states = int(rest)
        elif head == "initial":
            initial = int(rest)
        elif head == "accept":
            accepting = {int(tok) for tok in rest.replace(",", " ").split()}
        elif head == "default":
            default_mode = "self" if rest.strip() == "self" else int(rest)
        else:
            hit = _DFA_EDGE.match(clause)
            if hit is None:
                raise ParseError(f"bad dfa clause {clause!r}", line=lineno)
            src, letter, dst = hit.groups()
            edges.append((int(src), _parse_label(letter, lineno), int(dst)))
    if n_states is None:
        raise ParseError(f"dfa predicate {name} needs a states clause", line=lineno)
    if default_mode == "self":
        defaults = tuple(range(n_states))
    else:
        defaults = (default_mode,) * n_states
    try:
        return Predicate(
            n_states, initial, frozenset(accepting), tuple(edges), defaults, name,
            origin="automaton-literal",
        )
    except ModelError as exc:
        raise ParseError(f"bad dfa predicate {name}: {exc}", line=lineno) from exc


@dataclass(frozen=True)
class CheckDecl:
    name: str
    kind: str  # opacity | timing | synth
    process: str
    attacker: str
    predicate: str
    sup_observer: str | None = None
    controllable: tuple[Label, ...] = ()
    max_insert: int | None = None
    line: int = 0


_SYNTH_TAIL = re.compile(
    r"^controllable\s*\{(?P<ctl>[^}]*)\}(?:\s+max_insert\s+(?P<ins>\d+))?$"
)


def _parse_check(rest: str, lineno: int) -> CheckDecl:
    tokens = rest.split()
    if len(tokens) < 2:
        raise ParseError("check needs a name and a kind", line=lineno)
    name, kind = tokens[0], tokens[1]
    args = tokens[2:]
    if kind in ("opacity", "timing"):
        if len(args) != 3:
            raise ParseError(
                f"check {name}: {kind} takes process, observer, predicate",
                line=lineno,
            )
        return CheckDecl(name, kind, args[0], args[1], args[2], line=lineno)
    if kind == "synth":
        if len(args) < 4:
            raise ParseError(
                f"check {name}: synth takes process, attacker, sup observer, "
                "predicate, then controllable {...}",
                line=lineno,
            )
        process, attacker, sup_observer, predicate = args[:4]
        tail = " ".join(args[4:])
        controllable: tuple[Label, ...] = ()
        max_insert = None
        if tail:
            hit = _SYNTH_TAIL.match(tail)
            if hit is None:
                raise ParseError(f"check {name}: bad synth arguments {tail!r}", line=lineno)
            controllable = tuple(
                _parse_label(tok.strip(), lineno)
                for tok in hit.group("ctl").split(",")
                if tok.strip()
            )
            if hit.group("ins") is not None:
                max_insert = int(hit.group("ins"))
        return CheckDecl(
            name, kind, process, attacker, predicate,
            sup_observer=sup_observer, controllable=controllable,
            max_insert=max_insert, line=lineno,
        )
    raise ParseError(f"unknown check kind {kind!r}", line=lineno)


@dataclass(frozen=True)
class ModelFile:
    path: str
    digest: str
    processes: dict[str, Term] = field(default_factory=dict)
    observers: dict[str, Observer] = field(default_factory=dict)
    predicates: dict[str, Predicate] = field(default_factory=dict)
    checks: tuple[CheckDecl, ...] = ()

    def process(self, name: str) -> Term:
        if name not in self.processes:
            raise ModelError(f"unknown process {name!r}")
        return self.processes[name]

    def observer(self, name: str) -> Observer:
        if name not in self.observers:
            raise ModelError(f"unknown observer {name!r}")
        return self.observers[name]

    def predicate(self, name: str) -> Predicate:
        if name not in self.predicates:
            raise ModelError(f"unknown predicate {name!r}")
        return self.predicates[name]


def load_model(path: str) -> ModelFile:
    """Parse and resolve one model file; every name must be declared
    before use and every term must be well formed."""
    with open(path, "rb") as handle:
        raw = handle.read()
    digest = hashlib.sha256(raw).hexdigest()
    text = raw.decode("utf-8")

    processes: dict[str, Term] = {}
    observers: dict[str, Observer] = {}
    predicates: dict[str, Predicate] = {}
    checks: list[CheckDecl] = []

    for lineno, statement in _statements(text):
        keyword, _, rest = statement.partition(" ")
        rest = rest.strip()
        if keyword == "process":
            name, eq, body = rest.partition("=")
            name = name.strip()
            if not eq or not name:
                raise ParseError("process needs `process Name = term`", line=lineno)
            try:
                term = parse_term(body.strip())
                require_wellformed(term)
            except TpaError as exc:
                raise ParseError(
                    f"process {name}: {exc}", line=lineno
                ) from exc
            processes[name] = term
        elif keyword == "observer":
            hit = re.match(
                r"^(?P<name>\S+)\s*(?:"
                r"hides\s*(?P<hides>\{[^}]*\})"
                r"|window\s+(?P<win>\d+)\s*\{(?P<wbody>.*)\}"
                r"|\{(?P<sbody>.*)\}"
                r")$",
                rest,
            )
            if hit is None:
                raise ParseError(f"bad observer declaration {rest!r}", line=lineno)
            name = hit.group("name")
            if hit.group("hides") is not None:
                names = _parse_name_set(hit.group("hides"), lineno)
                observers[name] = hiding_observer(names, name=name)
            elif hit.group("win") is not None:
                observers[name] = _parse_windowed_body(
                    hit.group("wbody"), name, int(hit.group("win")), lineno
                )
            else:
                observers[name] = _parse_static_body(hit.group("sbody"), name, lineno)
        elif keyword == "predicate":
            name, eq, body = rest.partition("=")
            name = name.strip()
            body = body.strip()
            if not eq or not name:
                raise ParseError("predicate needs `predicate Name = form`", line=lineno)
            if body.startswith("contains"):
                names = _parse_name_set(body[len("contains"):], lineno)
                pred = builtin_contains(names)
                pred = Predicate(
                    pred.n_states, pred.initial, pred.accepting, pred.edges,
                    pred.defaults, name, pred.origin,
                )
            elif body.startswith("dfa"):
                blob = body[len("dfa"):].strip()
                if not (blob.startswith("{") and blob.endswith("}")):
                    raise ParseError("dfa predicate needs a {...} body", line=lineno)
                pred = _parse_dfa_body(blob[1:-1], name, lineno)
            elif body.startswith("test"):
                target = body[len("test"):].strip()
                if target not in processes:
                    raise ParseError(
                        f"predicate {name}: unknown process {target!r}", line=lineno
                    )
                try:
                    pred = from_test_process(processes[target])
                except TpaError as exc:
                    raise ParseError(f"predicate {name}: {exc}", line=lineno) from exc
            else:
                raise ParseError(
                    f"predicate {name}: expected contains, dfa, or test", line=lineno
                )
            if holds(pred, ()):
                warnings.warn(
                    f"predicate {name} holds on the empty trace, so no plant "
                    "can keep it from the attacker",
                    UserWarning,
                    stacklevel=2,
                )
            predicates[name] = pred
        else:  # check
            checks.append(_parse_check(rest, lineno))

    model = ModelFile(path, digest, processes, observers, predicates, tuple(checks))
    for check in model.checks:
        for role, name in (("process", check.process), ("predicate", check.predicate)):
            pool = model.processes if role == "process" else model.predicates
            if name not in pool:
                raise ModelError(
                    f"line {check.line}: check {check.name} uses unknown {role} {name!r}"
                )
        used = [check.attacker] + ([check.sup_observer] if check.sup_observer else [])
        for name in used:
            if name not in model.observers:
                raise ModelError(
                    f"line {check.line}: check {check.name} uses unknown observer {name!r}"
                )
    return model


@dataclass(frozen=True)
class CheckResult:
    name: str
    kind: str
    verdict: str
    severity: int  # 0 pass, 1 violation, 2 incomplete, 3 error
    detail: dict
    elapsed_ms: float


@dataclass(frozen=True)
class RunReport:
    path: str
    digest: str
    version: str
    seed: int | None
    results: tuple[CheckResult, ...]

    @property
    def exit_code(self) -> int:
        """Worst outcome wins; a found violation outranks Incomplete."""
        severities = {r.severity for r in self.results}
        if 3 in severities:
            return 3
        if 1 in severities:
            return 1
        if 2 in severities:
            return 2
        return 0

    def to_dict(self) -> dict:
        return {
            "tool": "tpakit",
            "version": self.version,
            "model": self.path,
            "digest": self.digest,
            "seed": self.seed,
            "checks": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "verdict": r.verdict,
                    "detail": r.detail,
                    "elapsed_ms": round(r.elapsed_ms, 3),
                }
                for r in self.results
            ],
            "exit_code": self.exit_code,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _pretty(trace) -> list[str] | None:
    if trace is None:
        return None
    return [letter.pretty() for letter in trace]


def _run_one(
    model: ModelFile, check: CheckDecl, max_states: int, strict_tau_urgency: bool
) -> CheckResult:
    start = time.perf_counter()
    detail: dict = {}
    try:
        term = model.process(check.process)
        attacker = model.observer(check.attacker)
        phi = model.predicate(check.predicate)
        plant = build_lts(term, max_states=max_states, strict_tau_urgency=strict_tau_urgency)
        if check.kind == "opacity":
            verdict = check_opacity(plant, phi, attacker, max_states=max_states)
            outcome = verdict.outcome
            severity = {"Opaque": 0, "NotOpaque": 1, "Incomplete": 2}[outcome]
            detail = {
                "witness": _pretty(verdict.witness),
                "observable": _pretty(verdict.observable),
                "k_states": verdict.k_states,
            }
        elif check.kind == "timing":
            verdict = check_timing_attack(plant, phi, attacker, max_states=max_states)
            outcome = verdict.outcome
            severity = {"NotProne": 0, "Prone": 1, "Incomplete": 2}[outcome]
            detail = {
                "timed": verdict.timed.outcome if verdict.timed else None,
                "untimed": verdict.untimed.outcome if verdict.untimed else None,
                "witness": _pretty(verdict.timed.witness) if verdict.timed else None,
            }
        else:
            sup_observer = model.observer(check.sup_observer)
            result = synthesize(
                plant, phi, attacker, sup_observer,
                set(check.controllable),
                max_insert=4 if check.max_insert is None else check.max_insert,
                max_states=max_states,
            )
            outcome = result.outcome
            severity = {"Supervisor": 0, "TrivialOnly": 0, "NoSupervisor": 1}[outcome]
            detail = {"reason": result.reason or None}
            if result.supervisor is not None:
                detail["supervisor"] = json.loads(result.supervisor.to_json())
    except (BudgetExceededError, IncompleteLtsError) as exc:
        outcome, severity, detail = "Incomplete", 2, {"error": str(exc)}
    except TpaError as exc:
        outcome, severity, detail = "Error", 3, {"error": str(exc)}
    elapsed = (time.perf_counter() - start) * 1000.0
    return CheckResult(check.name, check.kind, outcome, severity, detail, elapsed)


def run_checks(
    model: ModelFile,
    selection=None,
    max_states: int = 100000,
    strict_tau_urgency: bool = False,
    seed: int | None = None,
) -> RunReport:
    """Execute declared checks in declaration order.

    selection limits the run to the named checks; a failing check never
    stops its siblings.
    """
    from . import __version__

    if selection is not None:
        wanted = set(selection)
        known = {check.name for check in model.checks}
        missing = sorted(wanted - known)
        if missing:
            raise ModelError(f"unknown checks: {', '.join(missing)}")
        todo = [check for check in model.checks if check.name in wanted]
    else:
        todo = list(model.checks)
    results = tuple(
        _run_one(model, check, max_states, strict_tau_urgency) for check in todo
    )
    return RunReport(model.path, model.digest, __version__, seed, results)


__all__ = [
    "CheckDecl",
    "CheckResult",
    "ModelFile",
    "RunReport",
    "load_model",
    "run_checks",
]
