"""Continuous-time engine with per-node slot boundaries.

Nodes run the fast protocol, but each round occupies a real-time slot of
fixed duration and the slot grids of different nodes start at arbitrary
offsets. A beeping node beeps for its whole slot and beeps are received
instantly. When a node that is inactive, or listening one tick before a
checkpoint, hears a beep start at offset t inside its current slot, it
extends that slot by t, so the extended slot ends exactly one slot duration
after the onset and the node's grid locks onto the beeper's. Only the
earliest onset in a slot triggers the extension; a beep already sounding
when the slot begins counts as onset offset 0 and extends nothing. The
protocol step runs at the (possibly extended) slot end, so a node woken
mid-slot beeps during its following slot.

All times are floats and boundary alignment is exact when offsets are
binary fractions; the analysis helpers quantize to nanoseconds to stay
robust for other offsets.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass

from .checkpoints import compute_checkpoints, fast_runtime_bound
from .engine import ActivationSchedule, SimResult
from .fast_protocol import INACTIVE_CONFIG, NodeState, RoundInput, step, will_beep
from .topology import Topology

SLOT_FIELDS = ("node", "slot_index", "start_time", "end_time", "beeped", "clock")


@dataclass(frozen=True, slots=True)
class SlotRecord:
    """One completed slot of one node."""

    node: int
    slot_index: int
    start_time: float
    end_time: float
    clock: int
    state: NodeState
    induced: bool
    beeped: bool
    heard: bool


def run_slots(
    topology: Topology,
    offsets: list[float] | None,
    schedule: ActivationSchedule,
    period: int,
    spacing: int = 4,
    slot_duration: float = 1.0,
    time_horizon: float | None = None,
) -> tuple[SimResult, list[SlotRecord]]:
    """Simulates the fast protocol over unsynchronized slot grids.

    Args:
        topology: Connected graph to run on.
        offsets: Start time of each node's slot 0, in [0, slot_duration);
            None means all zero.
        schedule: Adversary wakes, given in per-node slot indices.
        period: Clock cycle length.
        spacing: Checkpoint distance.
        slot_duration: Real-time length of an unextended slot.
        time_horizon: Simulate events up to this time; defaults to enough
            slots for synchronization plus a few periods.

    Returns:
        (result, records); result.sync_time is the earliest boundary from
        which all grids coincide with equal clocks, None if never reached.
    """
    n = topology.node_count
    mu = slot_duration
    if mu <= 0:
        raise ValueError(f"slot duration must be positive, got {mu}")
    if offsets is None:
        offsets = [0.0] * n
    if len(offsets) != n:
        raise ValueError(f"need {n} offsets, got {len(offsets)}")
    for off in offsets:
        if not 0 <= off < mu:
            raise ValueError(f"offset {off} outside [0, {mu})")
    for node in schedule.wake_round:
        if not 0 <= node < n:
            raise ValueError(f"wake node {node} out of range")
    cps = compute_checkpoints(period, spacing)
    if time_horizon is None:
        slots_needed = 2 * fast_runtime_bound(topology.diameter, period, spacing) + 4 * period
        time_horizon = max(offsets) + mu * (slots_needed + schedule.min_wake() + 2)

    neighbors = topology.neighbors
    wake = schedule.wake_round
    configs = [INACTIVE_CONFIG] * n
    slot_start = list(offsets)
    slot_end = [off + mu for off in offsets]
    slot_idx = [0] * n
    heard = [False] * n
    anchored = [False] * n
    records: list[SlotRecord] = []
    heap = [(slot_end[v], v) for v in range(n)]
    heapq.heapify(heap)

    while heap:
        now, v = heapq.heappop(heap)
        if now != slot_end[v]:
            continue
        if now > time_horizon:
            break
        old = configs[v]
        woke = wake.get(v) == slot_idx[v]
        records.append(
            SlotRecord(
                node=v,
                slot_index=slot_idx[v],
                start_time=slot_start[v],
                end_time=now,
                clock=old.clock,
                state=old.state,
                induced=old.induced,
                beeped=will_beep(old),
                heard=heard[v],
            )
        )
        configs[v] = step(old, RoundInput(heard[v], woke), cps)
        slot_idx[v] += 1
        slot_start[v] = now
        slot_end[v] = now + mu
        heard[v] = False
        anchored[v] = False
        heapq.heappush(heap, (slot_end[v], v))

        if will_beep(configs[v]):
            # beep onset at the new slot's start
            for w in neighbors[v]:
                if slot_start[w] <= now < slot_end[w]:
                    heard[w] = True
                    if not anchored[w]:
                        anchored[w] = True
                        cfg = configs[w]
                        eligible = cfg.state is NodeState.INACTIVE or (
                            cfg.state is NodeState.LISTEN
                            and cps.is_pre_checkpoint(cfg.clock)
                        )
                        if eligible and now > slot_start[w]:
                            slot_end[w] = now + mu
                            heapq.heappush(heap, (slot_end[w], w))
        for w in neighbors[v]:
            if will_beep(configs[w]) and slot_start[w] <= now < slot_end[w]:
                # beep already sounding when the slot begins: onset offset 0
                heard[v] = True
                anchored[v] = True
                break

    result = SimResult(
        sync_time=alignment_time(records, n),
        horizon=int(time_horizon // mu),
        rounds_run=max((r.slot_index + 1 for r in records), default=0),
    )
    return result, records


def _quantize(value: float) -> float:
    return round(value, 9)


def alignment_time(records: list[SlotRecord], node_count: int) -> float | None:
    """Earliest slot boundary from which all grids coincide with equal clocks.

    A time x qualifies when every later common boundary (up to the last slot
    completed by all nodes) is a slot start for every node, all nodes are
    active there, and their clocks agree. Returns None when no such boundary
    exists in the recorded window.
    """
    by_node: list[dict[float, SlotRecord]] = [{} for _ in range(node_count)]
    for rec in records:
        by_node[rec.node][_quantize(rec.start_time)] = rec
    if any(not seen for seen in by_node):
        return None
    cap = min(max(seen) for seen in by_node)
    candidates = sorted({start for seen in by_node for start in seen if start <= cap})
    for x in candidates:
        ok = False
        for s in candidates:
            if s < x:
                continue
            ok = True
            group = []
            for seen in by_node:
                rec = seen.get(s)
                if rec is None or rec.state is NodeState.INACTIVE:
                    ok = False
                    break
                group.append(rec)
            if not ok:
                break
            if any(rec.clock != group[0].clock for rec in group):
                ok = False
                break
        if ok:
            return x
    return None


def joint_beep_times(records: list[SlotRecord], node_count: int) -> list[float]:
    """Slot starts at which every node beeps simultaneously."""
    by_start: dict[float, list[SlotRecord]] = {}
    for rec in records:
        by_start.setdefault(_quantize(rec.start_time), []).append(rec)
    out = []
    for start in sorted(by_start):
        group = by_start[start]
        if len(group) == node_count and all(rec.beeped for rec in group):
            out.append(start)
    return out


def write_slot_csv(records: list[SlotRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SLOT_FIELDS)
        for rec in records:
            writer.writerow(
                [rec.node, rec.slot_index, rec.start_time, rec.end_time, rec.beeped, rec.clock]
            )
