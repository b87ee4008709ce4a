import copy
import csv
import json

import pytest

from beepsync.checkpoints import compute_checkpoints, fast_runtime_bound, sync_round_budget
from beepsync.engine import (
    TRACE_FIELDS,
    ActivationSchedule,
    check_closure,
    check_invariants,
    check_stab_invariants,
    has_all_lock_round,
    random_schedule,
    run_fast,
    run_selfstab,
    single_source_schedule,
    super_states_at,
    write_trace_csv,
    write_trace_jsonl,
)
from beepsync.selfstab import (
    StabNodeConfig,
    StabState,
    SuperState,
    consistency_check,
    legitimate_configs,
    random_configs,
)
from beepsync.topology import generate


def test_schedule_validation():
    with pytest.raises(ValueError):
        ActivationSchedule(wake_round={})
    with pytest.raises(ValueError):
        ActivationSchedule(wake_round={0: -1})
    assert ActivationSchedule(wake_round={2: 3, 0: 7}).min_wake() == 3


def test_random_schedule_deterministic_and_in_range():
    for seed in range(20):
        sched = random_schedule(6, seed, max_round=10)
        assert sched == random_schedule(6, seed, max_round=10)
        assert len(sched.wake_round) >= 1
        for node, rnd in sched.wake_round.items():
            assert 0 <= node < 6
            assert 0 <= rnd <= 10
    capped = random_schedule(6, 1, max_round=0, max_sources=2)
    assert len(capped.wake_round) <= 2


def test_tight_line_synchronizes_at_twenty_one():
    topo = generate("line", 4)
    result, trace = run_fast(topo, single_source_schedule(0), 7, horizon=30)
    assert result.sync_round == 21
    assert result.bound == fast_runtime_bound(3, 7, 4) == 21
    assert trace is not None


def test_single_node_synchronizes_immediately():
    result, _ = run_fast(generate("line", 1), single_source_schedule(0), 5)
    assert result.sync_round == 0


def test_line_of_five_multiple_of_four_period():
    result, _ = run_fast(generate("line", 5), single_source_schedule(0), 8)
    assert result.bound == 16
    assert result.sync_round == 16  # reference value pinned from this engine


def test_round_normalization_shift_invariant():
    topo = generate("line", 4)
    base, trace0 = run_fast(topo, single_source_schedule(0, 0), 7, horizon=30)
    late, trace5 = run_fast(topo, single_source_schedule(0, 5), 7, horizon=30)
    assert base.sync_round == late.sync_round == 21
    assert trace0.clocks == trace5.clocks
    assert trace0.beeped == trace5.beeped
    assert trace0.states == trace5.states


def test_runs_are_reproducible():
    topo = generate("random_connected", 7, seed=4)
    sched = random_schedule(7, 9, max_round=12)
    r1, t1 = run_fast(topo, sched, 11)
    r2, t2 = run_fast(topo, sched, 11)
    assert r1.sync_round == r2.sync_round
    assert t1.clocks == t2.clocks
    assert t1.counters == t2.counters


def test_all_clocks_equal_from_sync_round():
    result, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=40)
    s = result.sync_round
    for t in range(s, trace.round_count()):
        assert len(set(trace.clocks[t])) == 1


def test_invariant_checker_clean_on_reference_runs():
    cps7 = compute_checkpoints(7, 4)
    _, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=30)
    assert check_invariants(trace, cps7) == []
    cps8 = compute_checkpoints(8, 4)
    _, trace8 = run_fast(generate("ring", 6), single_source_schedule(2), 8)
    assert check_invariants(trace8, cps8) == []


def test_invariant_checker_flags_counter_jump():
    cps = compute_checkpoints(7, 4)
    _, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=30)
    bad = copy.deepcopy(trace)
    t = bad.activation_round[3] + 2
    bad.counters[t][3] = bad.counters[t - 1][3] + 3
    checks = {v.check for v in check_invariants(bad, cps)}
    assert "C2" in checks


def test_invariant_checker_flags_clock_counter_mismatch():
    cps = compute_checkpoints(7, 4)
    _, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=30)
    bad = copy.deepcopy(trace)
    bad.clocks[25][1] = (bad.clocks[25][1] + 3) % 7
    checks = {v.check for v in check_invariants(bad, cps)}
    assert "C1" in checks


def test_closure_holds_after_sync():
    result, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=60)
    assert check_closure(trace, result.sync_round, 7, window=14)
    assert result.closure_verified


def test_closure_rejects_short_window():
    result, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=60)
    with pytest.raises(ValueError):
        check_closure(trace, result.sync_round, 7, window=13)


def test_closure_fails_on_corruption():
    result, trace = run_fast(generate("line", 4), single_source_schedule(0), 7, horizon=60)
    s = result.sync_round
    drifted = copy.deepcopy(trace)
    drifted.clocks[s + 3][0] = (drifted.clocks[s + 3][0] + 1) % 7
    assert not check_closure(drifted, s, 7, window=14)
    noisy = copy.deepcopy(trace)
    t = s + 10
    assert noisy.clocks[t][2] != 0
    noisy.beeped[t][2] = True
    assert not check_closure(noisy, s, 7, window=14)


def test_selfstab_legitimate_start_stays_legitimate():
    topo = generate("clique", 3)
    result, trace = run_selfstab(
        topo, legitimate_configs(3, 8), 8, spacing=5, stability_window=32
    )
    assert result.legitimate_round == 0
    assert result.closure_verified
    assert not result.pulse_seen
    assert check_stab_invariants(trace, sync_round_budget(3, 8, 5)) == []


def test_all_pulse_clique_locks_then_releases():
    topo = generate("clique", 3)
    initial = [StabNodeConfig(0, StabState.PULSE, False, 0, 0) for _ in range(3)]
    result, trace = run_selfstab(topo, initial, 10, spacing=5, node_bound=3)
    assert super_states_at(trace, 4) == [SuperState.LOCK] * 3
    assert super_states_at(trace, 16) == [SuperState.INACTIVE] * 3
    assert result.all_lock_round == 4
    assert has_all_lock_round(trace) == 4


def test_selfstab_reference_run_converges():
    topo = generate("clique", 8)
    budget = sync_round_budget(8, 10, 5)
    initial = random_configs(8, 10, 8, budget, seed=42)
    result, trace = run_selfstab(topo, initial, 10, spacing=5, node_bound=8)
    assert result.legitimate_round == 74  # reference value pinned from this engine
    assert result.closure_verified
    assert check_stab_invariants(trace, budget) == []


def test_selfstab_rejects_out_of_domain_initial():
    topo = generate("clique", 3)
    bad = [StabNodeConfig(9, StabState.LISTEN, False, 0, 0) for _ in range(3)]
    with pytest.raises(ValueError):
        run_selfstab(topo, bad, 8, spacing=5)


def test_stab_invariants_flag_counter_jump():
    topo = generate("clique", 3)
    budget = sync_round_budget(3, 10, 5)
    initial = random_configs(3, 10, 3, budget, seed=1)
    _, trace = run_selfstab(topo, initial, 10, spacing=5, node_bound=3)
    bad = copy.deepcopy(trace)
    found = None
    for t in range(1, bad.round_count()):
        for v in range(3):
            prev = bad.round_counter[t - 1][v]
            if bad.round_counter[t][v] == prev + 1 and prev >= 2:
                found = (t, v, prev)
                break
        if found:
            break
    t, v, prev = found
    bad.round_counter[t][v] = prev + 3
    checks = {viol.check for viol in check_stab_invariants(bad, budget)}
    assert "stab-r" in checks


def test_stab_invariants_flag_truncated_lock():
    topo = generate("clique", 3)
    initial = [StabNodeConfig(0, StabState.PULSE, False, 0, 0) for _ in range(3)]
    _, trace = run_selfstab(topo, initial, 10, spacing=5, node_bound=3)
    bad = copy.deepcopy(trace)
    bad.states[10][0] = StabState.INACTIVE
    budget = sync_round_budget(3, 10, 5)
    assert check_stab_invariants(bad, budget) != []


def post_repair_states(trace):
    cps = compute_checkpoints(trace.period, trace.spacing)
    rows = []
    for t in range(trace.round_count()):
        rows.append(
            [
                consistency_check(trace.config_at(t, v), cps).state
                for v in range(trace.topology.node_count)
            ]
        )
    return rows


def test_pulse_from_quiet_system_locks_everyone():
    # a pulse raised while every node runs the plain protocol (or sleeps)
    # must drag the whole graph into lock within 4n rounds
    fast_states = (StabState.BEEP, StabState.LISTEN)
    for n in (3, 5):
        for period in (5, 8):
            budget = sync_round_budget(n, period, 5)
            horizon = 50 * max(period, budget, 4 * n)
            for seed in range(100):
                topo = generate("random_connected", n, seed=2 * seed + 1)
                initial = random_configs(n, period, n, budget, seed=seed)
                _, trace = run_selfstab(
                    topo, initial, period, spacing=5, node_bound=n,
                    horizon=horizon, stability_window=4 * period,
                )
                states = post_repair_states(trace)
                for t in range(1, len(states)):
                    prev = states[t - 1]
                    entered = any(
                        states[t][v] is StabState.PULSE and prev[v] is not StabState.PULSE
                        for v in range(n)
                    )
                    if not entered:
                        continue
                    if any(s in (StabState.PULSE, StabState.LOCK) for s in prev):
                        continue
                    window = states[t : t + 4 * n + 1]
                    assert any(
                        all(row[v] is StabState.LOCK for v in range(n)) for row in window
                    ), (n, period, seed, t)


def test_trace_csv_export(tmp_path):
    _, trace = run_fast(generate("line", 3), single_source_schedule(0), 7, horizon=10)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, str(path))
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == TRACE_FIELDS
    assert len(rows) - 1 == trace.round_count() * 3


def test_trace_jsonl_export(tmp_path):
    topo = generate("clique", 3)
    budget = sync_round_budget(3, 10, 5)
    _, trace = run_selfstab(
        topo, random_configs(3, 10, 3, budget, seed=3), 10, spacing=5, node_bound=3
    )
    path = tmp_path / "trace.jsonl"
    write_trace_jsonl(trace, str(path))
    with open(path) as handle:
        records = [json.loads(line) for line in handle]
    assert len(records) == trace.round_count() * 3
    assert records[0]["beep_class"] is None
    assert records[0]["r"] is not None


def test_fast_trace_rows_expose_counters():
    _, trace = run_fast(generate("line", 3), single_source_schedule(0), 7, horizon=10)
    rows = list(trace.rows())
    assert len(rows) == trace.round_count() * 3
    for row in rows:
        assert set(row) == set(TRACE_FIELDS)
        if row["state"] == "beep":
            assert row["beeped"]
