import random

import pytest

from generators import random_term
from oracles import lts_traces, oracle_unsafe_traces
from tpakit.errors import ObserverError
from tpakit.observation import (
    MOrwellianObserver,
    Rule,
    StaticObserver,
    hiding_observer,
    identity_observer,
    static_as_windowed,
)
from tpakit.opacity import (
    check_monotonicity_instance,
    check_opacity,
    check_timing_attack,
    safe_automaton,
)
from tpakit.parser import parse_term
from tpakit.predicates import (
    Predicate,
    always,
    builtin_contains,
    is_time_dependable,
    never,
    secrecy_bundle,
)
from tpakit.semantics import build_lts
from tpakit.terms import TIME, act

PHI, ATT = secrecy_bundle({"h"})
P1 = build_lts(parse_term("h.l.0"))
P2 = build_lts(parse_term("h.l.0 + l.0"))
P3 = build_lts(parse_term("h.l.0 + t.l.0"))


class TestWorkedVerdicts:
    def test_p1_leaks_h_l(self):
        verdict = check_opacity(P1, PHI, ATT)
        assert verdict.outcome == "NotOpaque"
        assert verdict.witness == (act("h"), act("l"))
        assert verdict.observable == (act("l"),)

    def test_p2_is_opaque(self):
        verdict = check_opacity(P2, PHI, ATT)
        assert verdict.outcome == "Opaque"

    def test_p3_leaks_despite_the_padded_branch(self):
        verdict = check_opacity(P3, PHI, ATT)
        assert verdict.outcome == "NotOpaque"
        assert verdict.witness == (act("h"), act("l"))

    def test_false_predicate_is_always_opaque(self):
        for plant in (P1, P2, P3):
            assert check_opacity(plant, never(), ATT).outcome == "Opaque"


class TestSafeLanguage:
    def test_p3_membership(self):
        safety = safe_automaton(P3, PHI, ATT)
        accepts = safety.acceptor.accepts
        assert accepts(()) is True
        assert accepts((TIME, act("l"))) is True
        assert accepts((act("h"), TIME, act("l"))) is True
        assert accepts((act("h"), act("l"))) is False
        # not a trace of the plant at all
        assert accepts((act("l"),)) is False

    def test_leak_acceptor_is_the_complement_within_traces(self):
        safety = safe_automaton(P3, PHI, ATT)
        for w in sorted(lts_traces(P3, 4), key=len):
            assert safety.acceptor.accepts(w) != safety.unsafe.accepts(w)

    def test_safe_language_is_everything_when_nothing_is_secret(self):
        safety = safe_automaton(P3, never(), ATT)
        for w in lts_traces(P3, 4):
            assert safety.acceptor.accepts(w)

    def test_empty_predicate_warning(self):
        with pytest.warns(UserWarning):
            safe_automaton(P2, always(), ATT)


class TestWitnessAgainstOracle:
    def test_worked_examples_reverify(self):
        for plant in (P1, P3):
            verdict = check_opacity(plant, PHI, ATT)
            unsafe = oracle_unsafe_traces(plant, PHI, ATT, depth=4)
            assert unsafe and unsafe[0] == verdict.witness

    def test_random_plants_agree_with_oracle(self):
        rng = random.Random(21)
        checked = 0
        leaks = 0
        while checked < 40:
            term = random_term(rng, max_depth=3)
            lts = build_lts(term, max_states=400)
            if not lts.complete:
                continue
            names = sorted(lts.visible_names())
            if not names:
                continue
            secret = {names[0]}
            phi, attacker = secrecy_bundle(secret)
            verdict = check_opacity(lts, phi, attacker)
            unsafe = oracle_unsafe_traces(lts, phi, attacker, depth=6)
            if verdict.outcome == "NotOpaque" and len(verdict.witness) <= 6:
                assert unsafe and unsafe[0] == verdict.witness
                leaks += 1
            elif verdict.outcome == "Opaque":
                assert unsafe == []
            checked += 1
        assert leaks > 0


class TestIncomplete:
    def test_truncated_plant_reports_incomplete(self):
        big = build_lts(parse_term("a.b.c.d.0"), max_states=2)
        assert not big.complete
        assert check_opacity(big, PHI, ATT).outcome == "Incomplete"

    def test_tiny_budget_reports_incomplete(self):
        assert check_opacity(P3, PHI, ATT, max_states=1).outcome == "Incomplete"


ADJ = MOrwellianObserver(
    2,
    (Rule(act("h"), None), Rule(act("l"), act("L"), contains=act("h"))),
    "id",
    name="adjacency",
)


class TestWindowedAttacker:
    def test_context_reveals_what_hiding_missed(self):
        # the blunt attacker cannot tell h.l from l; the windowed one
        # sees the l next to an h as a different letter
        assert check_opacity(P2, PHI, ATT).outcome == "Opaque"
        verdict = check_opacity(P2, PHI, ADJ)
        assert verdict.outcome == "NotOpaque"
        assert verdict.witness == (act("h"), act("l"))
        assert verdict.observable == (act("L"),)

    def test_windowed_witness_has_no_bounded_counterexample(self):
        verdict = check_opacity(P2, PHI, ADJ)
        w = verdict.witness
        from tpakit.observation import observe
        from tpakit.predicates import holds

        assert holds(PHI, w)
        image = observe(ADJ, w)
        assert image != ()
        for v in lts_traces(P2, len(w) + 3):
            if not holds(PHI, v):
                assert observe(ADJ, v) != image

    def test_window_one_matches_static(self):
        rng = random.Random(22)
        for _ in range(12):
            term = random_term(rng, max_depth=3)
            lts = build_lts(term, max_states=300)
            if not lts.complete or not lts.visible_names():
                continue
            secret = {sorted(lts.visible_names())[0]}
            phi, attacker = secrecy_bundle(secret)
            direct = check_opacity(lts, phi, attacker)
            lifted = check_opacity(lts, phi, static_as_windowed(attacker))
            assert direct.outcome == lifted.outcome
            assert direct.witness == lifted.witness

    def test_plugin_observer_rejected(self):
        from tpakit.observation import PluginObserver

        with pytest.raises(ObserverError):
            check_opacity(P2, PHI, PluginObserver(lambda w: w))


class TestTimingAttack:
    def test_p3_is_prone(self):
        verdict = check_timing_attack(P3, PHI, ATT)
        assert verdict.outcome == "Prone"
        assert verdict.timed.outcome == "NotOpaque"
        assert verdict.untimed.outcome == "Opaque"

    def test_p1_is_not_prone(self):
        # leaks with or without the clock
        verdict = check_timing_attack(P1, PHI, ATT)
        assert verdict.outcome == "NotProne"
        assert verdict.untimed.outcome == "NotOpaque"

    def test_p2_is_not_prone(self):
        verdict = check_timing_attack(P2, PHI, ATT)
        assert verdict.outcome == "NotProne"
        assert verdict.timed.outcome == "Opaque"

    def test_windowed_attacker_rejected(self):
        with pytest.raises(ObserverError):
            check_timing_attack(P3, PHI, ADJ)


class TestMonotonicity:
    def test_identical_setup_holds_trivially(self):
        assert check_monotonicity_instance(P2, PHI, PHI, ATT, ATT) is True

    def test_skips_non_included_predicates(self):
        assert check_monotonicity_instance(P2, PHI, always(), ATT, ATT) is None

    def test_skips_incomparable_observers(self):
        o2 = identity_observer()
        assert check_monotonicity_instance(P2, PHI, PHI, ATT, o2) is None

    def test_smaller_secret_blunter_attacker(self):
        both = Predicate(
            n_states=4,
            initial=0,
            accepting=frozenset({3}),
            edges=(
                (0, act("h"), 1),
                (0, act("l"), 2),
                (1, act("l"), 3),
                (2, act("h"), 3),
            ),
            defaults=(0, 1, 2, 3),
            name="contains_h_and_l",
        )
        o1 = identity_observer()
        o2 = hiding_observer({"h"})
        for plant in (P1, P2, P3):
            held = check_monotonicity_instance(plant, PHI, both, o1, o2)
            assert held is True


class TestTimeDependable:
    def test_p3_unsafe_traces_are_repairable(self):
        assert is_time_dependable(PHI, P3, ATT) is True

    def test_p1_cannot_be_repaired(self):
        assert is_time_dependable(PHI, P1, ATT) is False

    def test_literal_and_repaired_readings_disagree(self):
        # the predicate-only reading is unsatisfiable for monotone
        # predicates, while the plant-based reading succeeds on P3
        assert is_time_dependable(PHI, None, None, literal=True) is False
        assert is_time_dependable(PHI, P3, ATT) is True

    def test_vacuous_without_unsafe_traces(self):
        assert is_time_dependable(never(), P2, ATT) is True
