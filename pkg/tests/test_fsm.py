import pytest

from beepsync.fsm import (
    Case,
    NotConstructible,
    ProtocolAutomaton,
    certify_no_sync,
    classify,
    extract_fast_automaton,
    extract_selfstab_automaton,
    find_beep_cycle,
    find_silence_cycle,
    format_automaton,
    load_automaton,
    parse_automaton,
    runtime_lower_bound_demo,
    save_automaton,
)
from beepsync.topology import generate


def swap_automaton():
    return ProtocolAutomaton(
        beep_next=(1, 0), silence_next=(0, 1), beeps=(True, False)
    )


def conforming_pulser(period):
    # silent nodes walk 0..period-1 cyclically and beep at 0; hearing a beep
    # parks the walker on a non-beeping self-loop
    k = period
    silence_next = tuple((i + 1) % k for i in range(k))
    beep_next = (1,) + tuple(range(1, k))
    beeps = (True,) + (False,) * (k - 1)
    return ProtocolAutomaton(
        beep_next=beep_next,
        silence_next=silence_next,
        beeps=beeps,
        clock_of=tuple(range(k)),
    )


def test_automaton_validation():
    with pytest.raises(ValueError):
        ProtocolAutomaton(beep_next=(), silence_next=(), beeps=())
    with pytest.raises(ValueError):
        ProtocolAutomaton(beep_next=(0,), silence_next=(0, 0), beeps=(False,))
    with pytest.raises(ValueError):
        ProtocolAutomaton(beep_next=(2,), silence_next=(0,), beeps=(False,))
    with pytest.raises(ValueError):
        ProtocolAutomaton(
            beep_next=(0,), silence_next=(0,), beeps=(False,), clock_of=(0, 1)
        )
    with pytest.raises(ValueError):
        ProtocolAutomaton(
            beep_next=(0,), silence_next=(0,), beeps=(False,), labels=("a", "b")
        )


def test_beep_cycle_two_state_swap():
    assert find_beep_cycle(swap_automaton()) == (0, 1, 0)


def test_beep_cycle_self_loop():
    auto = ProtocolAutomaton(beep_next=(0,), silence_next=(0,), beeps=(True,))
    assert find_beep_cycle(auto) == (0, 0)


def test_cycle_steps_follow_transitions():
    for auto in (swap_automaton(), extract_fast_automaton(4), conforming_pulser(6)):
        for heard, cycle in (
            (True, find_beep_cycle(auto)),
            (False, find_silence_cycle(auto)),
        ):
            assert cycle[0] == cycle[-1]
            for i in range(len(cycle) - 1):
                assert auto.transition(cycle[i], heard) == cycle[i + 1]


def test_fast_automaton_has_eight_states_for_period_four():
    auto = extract_fast_automaton(4)
    assert auto.state_count == 8
    cycle = find_beep_cycle(auto)
    assert len(cycle) - 1 == 3
    assert any(auto.beeps[s] for s in cycle[:-1])


def test_fast_automaton_classifies_as_beeping_clique():
    auto = extract_fast_automaton(4)
    report = classify(auto, 4)
    assert report.case is Case.B
    topo, initial = report.counterexample
    assert topo.node_count == 3
    assert len(topo.edges) == 3
    assert initial == (1, 2, 3)
    assert certify_no_sync(auto, report.counterexample, 4)


def test_never_beeping_automaton_is_case_a1():
    auto = ProtocolAutomaton(beep_next=(0,), silence_next=(0,), beeps=(False,))
    report = classify(auto, 4)
    assert report.case is Case.A1
    topo, initial = report.counterexample
    assert topo.node_count == 1
    assert initial == (0,)
    assert certify_no_sync(auto, report.counterexample, 4)


def test_wrong_period_pulser_is_case_a1():
    # pulses every 6 rounds, asked about period 8: lone node is the witness
    report = classify(conforming_pulser(6), 8)
    assert report.case is Case.A1
    assert report.counterexample[0].node_count == 1


def test_conforming_pulser_builds_a_star():
    period = 6
    auto = conforming_pulser(period)
    report = classify(auto, period)
    assert report.case is Case.A2
    topo, initial = report.counterexample
    assert topo.node_count == period + 1
    assert topo.diameter == 2
    assert sorted(initial[1:]) == list(range(period))
    assert certify_no_sync(auto, report.counterexample, period)


def test_beeping_cycle_of_five_builds_a_clique():
    auto = ProtocolAutomaton(
        beep_next=(1, 2, 3, 4, 0),
        silence_next=(1, 2, 3, 4, 0),
        beeps=(True, False, False, False, False),
        clock_of=(0, 1, 2, 3, 4),
    )
    report = classify(auto, 5)
    assert report.case is Case.B
    topo, initial = report.counterexample
    assert topo.node_count == 5
    assert len(topo.edges) == 10
    assert sorted(initial) == [0, 1, 2, 3, 4]
    assert certify_no_sync(auto, report.counterexample, 5)


def test_counterexample_size_within_stated_bound():
    # construction size never exceeds max{1, T+1, beep-cycle length}
    for period in (4, 7, 8):
        auto = extract_fast_automaton(period)
        report = classify(auto, period)
        limit = max(1, period + 1, len(find_beep_cycle(auto)) - 1)
        assert report.counterexample[0].node_count <= limit


def test_classify_respects_node_budget():
    auto = ProtocolAutomaton(
        beep_next=(1, 2, 3, 4, 0),
        silence_next=(1, 2, 3, 4, 0),
        beeps=(True, False, False, False, False),
    )
    with pytest.raises(NotConstructible):
        classify(auto, 5, node_budget=3)
    with pytest.raises(NotConstructible):
        classify(conforming_pulser(6), 6, node_budget=4)


def test_star_case_needs_clock_labels():
    base = conforming_pulser(6)
    unlabeled = ProtocolAutomaton(
        beep_next=base.beep_next, silence_next=base.silence_next, beeps=base.beeps
    )
    with pytest.raises(NotConstructible):
        classify(unlabeled, 6)


def test_classify_rejects_bad_period():
    with pytest.raises(ValueError):
        classify(swap_automaton(), 0)


def test_certify_sees_through_synchronized_start():
    # identical conforming neighbors pulse in unison: not a counterexample
    auto = conforming_pulser(6)
    pair = (generate("clique", 2), (0, 0))
    assert not certify_no_sync(auto, pair, 6)


def test_certify_validates_inputs():
    auto = swap_automaton()
    with pytest.raises(ValueError):
        certify_no_sync(auto, (generate("clique", 3), (0, 1)), 4)
    with pytest.raises(ValueError):
        certify_no_sync(auto, (generate("clique", 2), (0, 5)), 4)
    with pytest.raises(ValueError):
        certify_no_sync(auto, (generate("clique", 5), (0,) * 5), 4, node_budget=3)


def test_lower_bound_demo_needs_a_beeping_silence_cycle():
    silent = ProtocolAutomaton(beep_next=(0,), silence_next=(0,), beeps=(False,))
    with pytest.raises(NotConstructible):
        runtime_lower_bound_demo(silent, 4)


def test_lower_bound_demo_on_toy_pulser():
    # walker at 0 beeps, parks its one-step-behind neighbor on state 1, then
    # steps onto state 1 itself: merged after a single round
    assert runtime_lower_bound_demo(conforming_pulser(6), 6) == 1


def test_selfstab_two_node_demo_beats_the_period():
    pinned = {5: 33, 6: 34, 8: 36}
    for period, expected in pinned.items():
        auto = extract_selfstab_automaton(period, 5, 2)
        got = runtime_lower_bound_demo(auto, period)
        assert got >= period
        # regression pin from this implementation
        assert got == expected


def test_extracted_selfstab_automaton_yields_counterexample():
    # node_bound 2 undercounts the 16-node clique, so the usual convergence
    # guarantee does not apply and the construction genuinely never syncs
    auto = extract_selfstab_automaton(5, 5, 2)
    report = classify(auto, 5)
    assert report.case is Case.B
    assert report.counterexample[0].node_count == 16
    assert certify_no_sync(auto, report.counterexample, 5)


def test_fast_automaton_tracks_clocks():
    auto = extract_fast_automaton(7)
    assert auto.clock_of is not None
    assert auto.labels is not None
    assert auto.clock_of[0] == 0
    assert all(0 <= c < 7 for c in auto.clock_of)
    # state 0 is inactive: silence keeps it put, a beep activates it
    assert auto.silence_next[0] == 0
    assert auto.beep_next[0] != 0


def test_format_parse_round_trip():
    for auto in (extract_fast_automaton(4), conforming_pulser(5), swap_automaton()):
        parsed = parse_automaton(format_automaton(auto))
        assert parsed.beep_next == auto.beep_next
        assert parsed.silence_next == auto.silence_next
        assert parsed.beeps == auto.beeps
        assert parsed.clock_of == auto.clock_of


def test_parse_rejects_malformed():
    with pytest.raises(ValueError):
        parse_automaton("2\n0 1 0 1\n")
    with pytest.raises(ValueError):
        parse_automaton("states 2\n0 1 0\n1 0 0\n")
    with pytest.raises(ValueError):
        parse_automaton("states 2\n0 1 0 1 3\n1 0 0 0\n")
    with pytest.raises(ValueError):
        parse_automaton("states 2\n0 1 0 1\n0 0 0 0\n")


def test_parse_skips_comments_and_blank_lines():
    text = "# two-state swap\nstates 2\n\n0 1 0 1\n1 0 1 0\n"
    parsed = parse_automaton(text)
    assert parsed.beep_next == (1, 0)
    assert parsed.beeps == (True, False)


def test_save_and_load(tmp_path):
    auto = extract_fast_automaton(4)
    path = tmp_path / "auto.txt"
    save_automaton(auto, str(path))
    loaded = load_automaton(str(path))
    assert loaded.beep_next == auto.beep_next
    assert loaded.silence_next == auto.silence_next
    assert loaded.beeps == auto.beeps
    assert loaded.clock_of == auto.clock_of
