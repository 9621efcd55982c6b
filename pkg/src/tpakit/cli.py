"""Command line front end.

Every subcommand takes a model file first, then names things declared
inside it.  Exit codes are shared across subcommands: 0 means the check
passed (or a query succeeded), 1 means a violation was found, 2 means
the analysis came back inconclusive (usually a state budget), 3 means
the input itself was bad.  When a run mixes outcomes, a found violation
outranks an inconclusive check.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from .errors import BudgetExceededError, IncompleteLtsError, ModelError, TpaError
from .equivalence import bisimilar, distinguishing_trace, weak_traces_equal
from .model import ModelFile, load_model, run_checks
from .opacity import check_opacity, check_timing_attack
from .semantics import Lts, build_lts, traces
from .supervisor import (
    SupervisorAutomaton,
    compare_supervisors,
    supervised_product,
    synthesize,
    verify_supervisor,
)
from .terms import Label, label_from_string, print_term

_DEFAULT_MAX_STATES = 100000


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; here 2 means inconclusive."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(3)


def _resolve_max_states(args) -> int:
    value = getattr(args, "max_states", None)
    if value is not None:
        return value
    env = os.environ.get("TPA_MAX_STATES", "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise ModelError(f"TPA_MAX_STATES must be an integer, got {env!r}")
    return _DEFAULT_MAX_STATES


def _plant(model: ModelFile, name: str, args) -> Lts:
    return build_lts(
        model.process(name),
        max_states=_resolve_max_states(args),
        strict_tau_urgency=getattr(args, "strict_tau_urgency", False),
    )


def _word(trace) -> str:
    if trace is None:
        return "-"
    if not trace:
        return "(empty)"
    return " ".join(letter.pretty() for letter in trace)


def _controllable(blob: str) -> set[Label]:
    out = set()
    for token in blob.split(","):
        token = token.strip()
        if token:
            out.add(label_from_string(token))
    return out


def _load_supervisor(path: str) -> SupervisorAutomaton:
    with open(path, "r", encoding="utf-8") as handle:
        return SupervisorAutomaton.from_json(handle.read())


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_parse(args) -> int:
    model = load_model(args.model)
    if args.json:
        doc = {
            "model": model.path,
            "digest": model.digest,
            "processes": {n: print_term(t) for n, t in model.processes.items()},
            "observers": sorted(model.observers),
            "predicates": sorted(model.predicates),
            "checks": [c.name for c in model.checks],
        }
        print(json.dumps(doc, indent=2))
        return 0
    print(f"model {model.path}")
    print(f"  processes:  {len(model.processes)} ({', '.join(model.processes) or '-'})")
    print(f"  observers:  {len(model.observers)} ({', '.join(model.observers) or '-'})")
    print(f"  predicates: {len(model.predicates)} ({', '.join(model.predicates) or '-'})")
    print(f"  checks:     {len(model.checks)} ({', '.join(c.name for c in model.checks) or '-'})")
    return 0


def _cmd_lts(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as handle:
            handle.write(plant.to_dot())
    if args.json:
        print(plant.to_json())
    else:
        status = "complete" if plant.complete else "truncated"
        print(
            f"{args.process}: {plant.num_states} states, "
            f"{len(plant.transitions)} transitions, {status}"
        )
    return 0 if plant.complete else 2


def _cmd_traces(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    found = traces(plant, args.depth)
    words = sorted(found, key=lambda w: (len(w), tuple(l.sort_key() for l in w)))
    if args.json:
        print(json.dumps({
            "process": args.process,
            "depth": args.depth,
            "partial": found.partial,
            "traces": [_word(w) for w in words],
        }, indent=2))
    else:
        for word in words:
            print(_word(word))
        if found.partial:
            print("(partial: the state budget cut this set short)", file=sys.stderr)
    return 2 if found.partial else 0


def _cmd_equiv(args) -> int:
    model = load_model(args.model)
    left = _plant(model, args.left, args)
    right = _plant(model, args.right, args)
    strong = bisimilar(left, right)
    weak = weak_traces_equal(left, right)
    gap = None if weak else distinguishing_trace(left, right)
    if args.json:
        print(json.dumps({
            "left": args.left,
            "right": args.right,
            "bisimilar": strong,
            "weak_traces_equal": weak,
            "distinguishing_trace": None if gap is None else _word(gap),
        }, indent=2))
    else:
        print(f"bisimilar:         {'yes' if strong else 'no'}")
        print(f"weak traces equal: {'yes' if weak else 'no'}")
        if gap is not None:
            print(f"distinguished by:  {_word(gap)}")
    return 0 if strong else 1


def _cmd_check_opacity(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    verdict = check_opacity(
        plant, model.predicate(args.predicate), model.observer(args.attacker),
        max_states=_resolve_max_states(args),
    )
    if args.json:
        print(json.dumps({
            "process": args.process,
            "attacker": args.attacker,
            "predicate": args.predicate,
            "verdict": verdict.outcome,
            "witness": None if verdict.witness is None else _word(verdict.witness),
            "observable": None if verdict.observable is None else _word(verdict.observable),
        }, indent=2))
    else:
        print(verdict.outcome)
        if verdict.witness is not None:
            print(f"  leaking trace: {_word(verdict.witness)}")
            print(f"  attacker sees: {_word(verdict.observable)}")
    return {"Opaque": 0, "NotOpaque": 1, "Incomplete": 2}[verdict.outcome]


def _cmd_check_timing(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    verdict = check_timing_attack(
        plant, model.predicate(args.predicate), model.observer(args.attacker),
        max_states=_resolve_max_states(args),
    )
    if args.json:
        print(json.dumps({
            "process": args.process,
            "attacker": args.attacker,
            "predicate": args.predicate,
            "verdict": verdict.outcome,
            "timed": None if verdict.timed is None else verdict.timed.outcome,
            "untimed": None if verdict.untimed is None else verdict.untimed.outcome,
        }, indent=2))
    else:
        print(verdict.outcome)
        if verdict.outcome == "Prone":
            print(f"  clocked attacker wins with: {_word(verdict.timed.witness)}")
            print("  the clock-blind counterpart sees nothing")
    return {"NotProne": 0, "Prone": 1, "Incomplete": 2}[verdict.outcome]


def _cmd_synth(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    try:
        result = synthesize(
            plant,
            model.predicate(args.predicate),
            model.observer(args.attacker),
            model.observer(args.sup_observer),
            _controllable(args.controllable),
            max_insert=args.max_insert,
            max_states=_resolve_max_states(args),
        )
    except BudgetExceededError as exc:
        print(f"Incomplete: {exc}", file=sys.stderr)
        return 2
    if result.supervisor is not None and args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(result.supervisor.to_json())
    if args.json:
        doc = {
            "process": args.process,
            "verdict": result.outcome,
            "reason": result.reason or None,
            "supervisor": None
            if result.supervisor is None
            else json.loads(result.supervisor.to_json()),
        }
        print(json.dumps(doc, indent=2))
    else:
        print(result.outcome)
        if result.reason:
            print(f"  {result.reason}")
        if result.supervisor is not None:
            print(f"  machine states: {result.supervisor.n_states}")
            if args.out:
                print(f"  written to {args.out}")
    return {"Supervisor": 0, "TrivialOnly": 0, "NoSupervisor": 1}[result.outcome]


def _cmd_verify_sup(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    report = verify_supervisor(
        plant,
        model.predicate(args.predicate),
        model.observer(args.attacker),
        model.observer(args.sup_observer),
        _load_supervisor(args.sup),
        max_states=_resolve_max_states(args),
    )
    if args.json:
        print(json.dumps({
            "verdict": report.outcome,
            "witness": None if report.witness is None else _word(report.witness),
        }, indent=2))
    else:
        print(report.outcome)
        if report.witness is not None:
            print(f"  unsafe supervised trace: {_word(report.witness)}")
    return 0 if report.outcome == "Valid" else 1


def _cmd_compare_sup(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    comparison = compare_supervisors(
        plant,
        model.observer(args.sup_observer),
        _load_supervisor(args.first),
        _load_supervisor(args.second),
        max_states=_resolve_max_states(args),
    )
    if args.json:
        print(json.dumps({
            "verdict": comparison.verdict,
            "only_first": None if comparison.only_first is None else _word(comparison.only_first),
            "only_second": None if comparison.only_second is None else _word(comparison.only_second),
        }, indent=2))
    else:
        print(comparison.verdict)
        if comparison.only_first is not None:
            print(f"  only the first allows:  {_word(comparison.only_first)}")
        if comparison.only_second is not None:
            print(f"  only the second allows: {_word(comparison.only_second)}")
    return 0


def _walk(lts: Lts, steps: int, rng: random.Random) -> list[Label]:
    word = []
    state = lts.initial
    for _ in range(steps):
        moves = sorted(lts.successors(state), key=lambda sl: (sl[0].sort_key(), sl[1]))
        if not moves:
            break
        letter, state = rng.choice(moves)
        word.append(letter)
    return word


def _cmd_simulate(args) -> int:
    model = load_model(args.model)
    plant = _plant(model, args.process, args)
    sup = _load_supervisor(args.sup)
    controlled = supervised_product(plant, model.observer(args.sup_observer), sup)
    rng = random.Random(args.seed)
    rows = []
    for index in range(args.runs):
        rows.append({
            "run": index + 1,
            "plant": _word(_walk(plant, args.steps, rng)),
            "supervised": _word(_walk(controlled, args.steps, rng)),
        })
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for row in rows:
            print(f"run {row['run']}")
            print(f"  plant:      {row['plant']}")
            print(f"  supervised: {row['supervised']}")
    return 0


def _cmd_run(args) -> int:
    model = load_model(args.model)
    report = run_checks(
        model,
        selection=args.check if args.check else None,
        max_states=_resolve_max_states(args),
        strict_tau_urgency=args.strict_tau_urgency,
        seed=args.seed,
    )
    if args.json:
        print(report.to_json())
        return report.exit_code
    for result in report.results:
        line = f"{result.name:24} {result.kind:8} {result.verdict}"
        hint = result.detail.get("witness") or result.detail.get("error") or result.detail.get("reason")
        if hint:
            if isinstance(hint, list):
                hint = " ".join(hint)
            line += f"  [{hint}]"
        print(line)
    counts = {0: 0, 1: 0, 2: 0, 3: 0}
    for result in report.results:
        counts[result.severity] += 1
    print(
        f"{len(report.results)} checks: {counts[0]} passed, {counts[1]} violated, "
        f"{counts[2]} inconclusive, {counts[3]} errored"
    )
    return report.exit_code


# ---------------------------------------------------------------------------
# Wiring


def _add_common(sub, *, max_states=True, urgency=True):
    sub.add_argument("model", help="model file to load")
    if max_states:
        sub.add_argument(
            "--max-states", type=int, default=None,
            help="state budget (default: TPA_MAX_STATES or 100000)",
        )
    if urgency:
        sub.add_argument(
            "--strict-tau-urgency", action="store_true",
            help="pending internal steps refuse to idle, not just to sync",
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="tpakit", description=__doc__)
    parser.add_argument("--version", action="store_true", help="print the version and exit")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub = commands.add_parser("parse", help="load a model and report what it declares")
    _add_common(sub, max_states=False, urgency=False)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_parse)

    sub = commands.add_parser("lts", help="build the transition system of a process")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--json", action="store_true")
    sub.add_argument("--dot", metavar="OUT", default=None, help="write a dot rendering here")
    sub.set_defaults(handler=_cmd_lts)

    sub = commands.add_parser("traces", help="list traces up to a depth")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--depth", type=int, default=5)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_traces)

    sub = commands.add_parser("equiv", help="compare two processes (exit 0 iff bisimilar)")
    _add_common(sub)
    sub.add_argument("left")
    sub.add_argument("right")
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_equiv)

    sub = commands.add_parser("check-opacity", help="can the attacker ever be sure the secret held?")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--attacker", required=True)
    sub.add_argument("--predicate", required=True)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_check_opacity)

    sub = commands.add_parser("check-timing", help="does the secret leak only through timing?")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--attacker", required=True)
    sub.add_argument("--predicate", required=True)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_check_timing)

    sub = commands.add_parser("synth", help="synthesize a supervisor that restores opacity")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--attacker", required=True)
    sub.add_argument("--sup-observer", required=True)
    sub.add_argument("--predicate", required=True)
    sub.add_argument("--controllable", default="", help="comma-separated actions the supervisor may disable")
    sub.add_argument("--max-insert", type=int, default=4, help="ticks the supervisor may insert in a row")
    sub.add_argument("--out", default=None, help="write the supervisor JSON here")
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_synth)

    sub = commands.add_parser("verify-sup", help="check a supervisor file against a plant")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--attacker", required=True)
    sub.add_argument("--sup-observer", required=True)
    sub.add_argument("--predicate", required=True)
    sub.add_argument("--sup", required=True, help="supervisor JSON file")
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_verify_sup)

    sub = commands.add_parser("compare-sup", help="order two supervisors by permissiveness")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--sup-observer", required=True)
    sub.add_argument("first", help="supervisor JSON file")
    sub.add_argument("second", help="supervisor JSON file")
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_compare_sup)

    sub = commands.add_parser("simulate", help="random walks, plant next to supervised plant")
    _add_common(sub)
    sub.add_argument("--process", required=True)
    sub.add_argument("--sup-observer", required=True)
    sub.add_argument("--sup", required=True, help="supervisor JSON file")
    sub.add_argument("--steps", type=int, default=8)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--runs", type=int, default=5)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_simulate)

    sub = commands.add_parser("run", help="run the checks a model declares")
    _add_common(sub)
    sub.add_argument("--check", action="append", default=[], help="run only this declared check (repeatable)")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(handler=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        from . import __version__

        print(f"tpakit {__version__}")
        return 0
    if not getattr(args, "handler", None):
        parser.print_help()
        return 3
    try:
        return args.handler(args)
    except (BudgetExceededError, IncompleteLtsError) as exc:
        print(f"Incomplete: {exc}", file=sys.stderr)
        return 2
    except TpaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
