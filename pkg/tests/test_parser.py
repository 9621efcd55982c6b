"""Concrete syntax: term grammar, model declarations, error positions."""

import random

import pytest

from tpakit.errors import ParseError
from tpakit.parser import parse_model_source, parse_term
from tpakit.terms import (
    NIL,
    TAU,
    TICK,
    TIME,
    Choice,
    Par,
    Prefix,
    Rec,
    Relabel,
    Restrict,
    Var,
    act,
    print_term,
)

from generators import random_term


def test_atoms():
    assert parse_term("0") == NIL
    assert parse_term("Nil") == NIL
    assert parse_term("P1") == Var("P1")
    assert parse_term("(0)") == NIL


def test_prefix_chains():
    assert parse_term("a.0") == Prefix(act("a"), NIL)
    assert parse_term("'a.0") == Prefix(act("a", True), NIL)
    assert parse_term("tau.t.tick.0") == Prefix(TAU, Prefix(TIME, Prefix(TICK, NIL)))
    assert parse_term("a.b.P") == Prefix(act("a"), Prefix(act("b"), Var("P")))


def test_precedence():
    a0, b0, c0 = Prefix(act("a"), NIL), Prefix(act("b"), NIL), Prefix(act("c"), NIL)
    assert parse_term("a.0 | b.0 + c.0") == Choice(Par(a0, b0), c0)
    assert parse_term("(a.0 + b.0) | c.0") == Par(Choice(a0, b0), c0)
    assert parse_term("a.0 + b.0 + c.0") == Choice(a0, Choice(b0, c0))
    assert parse_term("a.0 | b.0 | c.0") == Par(a0, Par(b0, c0))
    assert parse_term("a.(b.0 + c.0)") == Prefix(act("a"), Choice(b0, c0))


def test_postfix_operators():
    assert parse_term("a.0\\{a}") == Restrict(Prefix(act("a"), NIL), frozenset({"a"}))
    assert parse_term("(a.0 | 'a.0)\\{a}") == Restrict(
        Par(Prefix(act("a"), NIL), Prefix(act("a", True), NIL)), frozenset({"a"})
    )
    assert parse_term("P[b/a]") == Relabel(Var("P"), (("a", "b"),))
    assert parse_term("P[b/a,d/c]") == Relabel(Var("P"), (("a", "b"), ("c", "d")))
    # postfix applies to the whole prefix chain, and stacks
    assert parse_term("a.b.0\\{c}[d/a]") == Relabel(
        Restrict(Prefix(act("a"), Prefix(act("b"), NIL)), frozenset({"c"})),
        (("a", "d"),),
    )


def test_rec():
    assert parse_term("rec X. a.X") == Rec("X", Prefix(act("a"), Var("X")))
    assert parse_term("rec X. t.a.X") == Rec("X", Prefix(TIME, Prefix(act("a"), Var("X"))))
    assert parse_term("rec X. (a.X + b.0)") == Rec(
        "X", Choice(Prefix(act("a"), Var("X")), Prefix(act("b"), NIL))
    )
    assert parse_term("a.rec X. b.X") == Prefix(act("a"), Rec("X", Prefix(act("b"), Var("X"))))
    assert parse_term("rec X. a.rec Y. b.Y") == Rec(
        "X", Prefix(act("a"), Rec("Y", Prefix(act("b"), Var("Y"))))
    )


def test_whitespace_and_comments():
    text = """
    # a looping writer
    rec X. (
        a.X   # visible step
        + t.X
    )
    """
    assert parse_term(text) == Rec("X", Choice(Prefix(act("a"), Var("X")), Prefix(TIME, Var("X"))))


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "a.",
        "t",
        "tau",
        "'t.0",
        "'tau.0",
        "a.0 +",
        "(a.0",
        "a.0)",
        "a.0 b.0",
        "rec t. a.t",
        "rec X a.X",
        "P\\{t}",
        "P\\{rec}",
        "P[t/a]",
        "P[b/a,c/a]",
        "rec.0",
        "Nil.0",
        "+ a.0",
    ],
)
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_term(bad)


def test_parse_error_position():
    try:
        parse_term("a.0 +\nb.0 )")
    except ParseError as err:
        assert err.line == 2
        assert err.col >= 4
    else:
        pytest.fail("expected a ParseError")


def test_round_trip_frozen():
    cases = [
        "0",
        "a.0",
        "'a.t.0",
        "a.0 + b.0",
        "a.0 | b.0 + c.0",
        "(a.0 + b.0) | c.0",
        "(a.0 | 'a.0)\\{a}",
        "a.b.0\\{c}[d/a]",
        "rec X. t.a.X",
        "rec X. (a.X + b.0)",
        "a.rec X. b.X",
        "rec X. a.X | rec Y. b.Y",
        "rec X. a.X\\{a}",
        "rec X. (a.X\\{a})",
    ]
    for text in cases:
        term = parse_term(text)
        assert print_term(term) == text
        assert parse_term(print_term(term)) == term
    # parenthesised inputs normalise to the same terms
    assert parse_term("(rec X. a.X) | rec Y. b.Y") == parse_term("rec X. a.X | rec Y. b.Y")
    assert parse_term("(rec X. a.X)\\{a}") == parse_term("rec X. a.X\\{a}")


def test_round_trip_random():
    rng = random.Random(20260816)
    for _ in range(300):
        term = random_term(rng, max_depth=4, regular=False, allow_tick=True)
        assert parse_term(print_term(term)) == term


def test_deep_chain_parses():
    text = "a." * 20000 + "0"
    term = parse_term(text)
    assert print_term(term) == text


def test_model_source():
    text = """
    # two processes and the checks that run on them
    P1 = h.l.0 + l.0
    P2 = (h.l.0 + l.0) | rec X. t.X

    observer Obs { h -> eps; default -> id }
    observer Hide = hides {h}
    observer Win window 2 { l when contains h -> eps; default -> id }

    predicate Secret = contains {h}
    predicate Shape = dfa { states 2; initial 0; accept 1; 0 -h-> 1; default self }

    check C1 = opacity P1 observer Obs predicate Secret
    check C2 = synth P1 attacker Obs sup Obs predicate Secret controllable {l} insert 0
    check C3 = equiv wtrace P1 P2
    """
    model = parse_model_source(text)
    names = [name for name, _ in model.definitions]
    assert names == ["P1", "P2"]
    assert [o.name for o in model.observers] == ["Obs", "Hide", "Win"]
    assert model.observers[1].hides == frozenset({"h"})
    assert model.observers[2].window == 2
    assert model.observers[2].rules[0].contains == act("h")
    assert [p.kind for p in model.predicates] == ["contains", "dfa"]
    dfa = model.predicates[1].dfa
    assert dfa.n_states == 2 and dfa.accepting == frozenset({1}) and dfa.default_self
    assert dfa.edges == ((0, act("h"), 1),)
    assert [c.kind for c in model.checks] == ["opacity", "synth", "equiv"]
    assert model.checks[1].params["controllable"] == ("l",)
    assert model.checks[1].params["max_insert"] == 0
    assert model.checks[2].params == {"kind": "wtrace", "left": "P1", "right": "P2"}


def test_model_newlines_inside_brackets():
    text = "P = (a.0 +\n b.0)\nQ = a.(\n b.0\n)"
    model = parse_model_source(text)
    assert len(model.definitions) == 2


def test_model_requires_newline_between_defs():
    with pytest.raises(ParseError):
        parse_model_source("P = a.0 Q = b.0")


def test_observer_needs_default():
    with pytest.raises(ParseError):
        parse_model_source("observer O { h -> eps }")
