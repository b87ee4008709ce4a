import csv

import pytest

from beepsync.engine import ActivationSchedule, run_fast, single_source_schedule
from beepsync.slots import SLOT_FIELDS, alignment_time, joint_beep_times, run_slots, write_slot_csv
from beepsync.topology import generate

TOL = 1e-9


def staggered_line_run():
    # three-node line, staggered slot grids, ends woken by the adversary
    topo = generate("line", 3)
    schedule = ActivationSchedule(wake_round={0: 0, 2: 0})
    return run_slots(topo, [0.0, 0.5, 0.25], schedule, 12)


def by_node(records, node):
    return sorted((r for r in records if r.node == node), key=lambda r: r.start_time)


def test_staggered_line_aligns_at_nine():
    result, records = staggered_line_run()
    assert result.sync_time == pytest.approx(9.0, abs=TOL)
    assert alignment_time(records, 3) == pytest.approx(9.0, abs=TOL)


def test_inactive_listener_extends_to_the_beeper_boundary():
    _, records = staggered_line_run()
    first = by_node(records, 1)[0]
    assert first.start_time == pytest.approx(0.5, abs=TOL)
    assert first.end_time == pytest.approx(2.0, abs=TOL)
    assert first.heard


def test_pre_checkpoint_listener_extends_and_jumps():
    _, records = staggered_line_run()
    v3 = by_node(records, 2)
    extended = [r for r in v3 if r.start_time == pytest.approx(7.25, abs=TOL)]
    assert len(extended) == 1
    assert extended[0].clock == 7
    assert extended[0].end_time == pytest.approx(9.0, abs=TOL)
    induced = [r for r in v3 if r.start_time == pytest.approx(9.0, abs=TOL)]
    assert induced[0].clock == 9
    assert induced[0].beeped


def test_joint_zero_clock_beep_after_alignment():
    _, records = staggered_line_run()
    for node in range(3):
        zero = [r for r in by_node(records, node) if r.start_time == pytest.approx(12.0, abs=TOL)]
        assert zero[0].beeped
        assert zero[0].clock == 0
    joints = joint_beep_times(records, 3)
    assert any(t == pytest.approx(12.0, abs=TOL) for t in joints)


def test_beeps_after_alignment_only_at_clock_zero():
    _, records = staggered_line_run()
    for r in records:
        if r.beeped and r.start_time >= 10.0 - TOL:
            assert r.clock == 0


def test_slot_span_stays_under_two_slots():
    _, records = staggered_line_run()
    for r in records:
        span = r.end_time - r.start_time
        assert 1.0 - TOL <= span < 2.0 - TOL or span == pytest.approx(1.0, abs=TOL)
        # extension amount is the onset offset, always below one slot
        assert span - 1.0 < 1.0


@pytest.mark.parametrize("offset", [0.1, 0.25, 0.5, 0.9])
def test_two_node_extension_is_exact(offset):
    topo = generate("line", 2)
    _, records = run_slots(topo, [0.0, offset], single_source_schedule(0), 12)
    listener = by_node(records, 1)
    hit = [r for r in listener if r.start_time <= 1.0 < r.end_time]
    assert len(hit) == 1
    # woken by the activation beep onset at t=1.0; boundary lands exactly on
    # the beeper's next boundary
    assert hit[0].end_time == pytest.approx(2.0, abs=TOL)
    assert abs(hit[0].end_time - 2.0) < TOL


def test_single_node_aligns_at_first_active_slot():
    result, _ = run_slots(generate("line", 1), None, single_source_schedule(0), 5)
    assert result.sync_time == pytest.approx(1.0, abs=TOL)


def test_zero_offsets_match_synchronous_engine():
    topo = generate("line", 3)
    schedule = ActivationSchedule(wake_round={0: 0, 2: 0})
    _, records = run_slots(topo, None, schedule, 12)
    _, trace = run_fast(topo, schedule, 12)
    for node in range(3):
        rows = by_node(records, node)
        assert rows[0].clock == 0
        assert not rows[0].beeped
        for r in rows[1:]:
            t = r.slot_index - 1
            if t >= trace.round_count():
                break
            assert r.clock == trace.clocks[t][node]
            assert r.beeped == trace.beeped[t][node]
            assert r.state == trace.states[t][node]
            assert r.start_time == pytest.approx(float(r.slot_index), abs=TOL)


def test_zero_offsets_match_with_delayed_wake():
    topo = generate("line", 3)
    schedule = single_source_schedule(0, 2)
    _, records = run_slots(topo, None, schedule, 7)
    _, trace = run_fast(topo, schedule, 7)
    shift = schedule.min_wake() + 1
    for node in range(3):
        for r in by_node(records, node):
            t = r.slot_index - shift
            if t < 0 or t >= trace.round_count():
                continue
            assert r.clock == trace.clocks[t][node]
            assert r.beeped == trace.beeped[t][node]


def test_input_validation():
    topo = generate("line", 2)
    with pytest.raises(ValueError):
        run_slots(topo, [0.0, 1.0], single_source_schedule(0), 12)
    with pytest.raises(ValueError):
        run_slots(topo, [0.0, -0.1], single_source_schedule(0), 12)
    with pytest.raises(ValueError):
        run_slots(topo, [0.0], single_source_schedule(0), 12)
    with pytest.raises(ValueError):
        run_slots(topo, None, single_source_schedule(5), 12)
    with pytest.raises(ValueError):
        run_slots(topo, None, single_source_schedule(0), 12, slot_duration=0.0)


def test_slot_csv_export(tmp_path):
    _, records = staggered_line_run()
    path = tmp_path / "slots.csv"
    write_slot_csv(records, str(path))
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == SLOT_FIELDS
    assert len(rows) - 1 == len(records)
