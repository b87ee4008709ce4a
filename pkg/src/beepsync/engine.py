"""Round-driven simulation engines and trace checkers.

Round conventions (fast mode): the engine simulates raw rounds starting at the
earliest adversary wake; activation assignments execute during a node's wake
round and the activation beep happens the following raw round. Reported
rounds are normalized so that round 0 is the first round in which any node is
active, which is also the first round containing a beep. The virtual counter
of a node starts at 0 in its activation round and grows by the node's clock
advance (1, or 2 for an induced jump) every later round.

Self-stabilizing mode runs from an arbitrary initial configuration with no
adversary: each round every node first repairs its config
(consistency check), the beep set is taken from the repaired states, then all
nodes transition. A round is legitimate when every node is in a beep/listen
state, all clocks agree, and no induced flag is set; the reported
legitimate_round is the start of the trailing streak of legitimate rounds,
since a lone legitimate-looking round with adversarial counters can still
collapse.

Both engines are deterministic: the beep set is computed before any
transition, and nodes are always processed in id order.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from typing import Iterator

from .checkpoints import CheckpointSet, compute_checkpoints, fast_runtime_bound, sync_round_budget
from .fast_protocol import (
    INACTIVE_CONFIG,
    BeepClass,
    FastNodeConfig,
    NodeState,
    RoundInput,
    classify_beep,
    step,
    will_beep,
)
from .selfstab import (
    StabNodeConfig,
    StabState,
    SuperState,
    consistency_check,
    stab_step,
    super_state,
    validate_config,
    will_beep_stab,
)
from .topology import Topology


@dataclass(frozen=True)
class ActivationSchedule:
    """Adversary wake rounds, in raw (pre-normalization) round indices."""

    wake_round: dict[int, int]

    def __post_init__(self) -> None:
        if not self.wake_round:
            raise ValueError("schedule must wake at least one node")
        for node, rnd in self.wake_round.items():
            if rnd < 0:
                raise ValueError(f"negative wake round {rnd} for node {node}")

    def min_wake(self) -> int:
        return min(self.wake_round.values())


def single_source_schedule(node: int = 0, round_index: int = 0) -> ActivationSchedule:
    return ActivationSchedule({node: round_index})


def random_schedule(
    node_count: int,
    seed: int,
    max_round: int = 0,
    max_sources: int | None = None,
) -> ActivationSchedule:
    """Seeded schedule waking 1..max_sources distinct nodes at rounds in [0, max_round]."""
    rng = random.Random(seed)
    cap = node_count if max_sources is None else min(max_sources, node_count)
    k = rng.randint(1, cap)
    nodes = rng.sample(range(node_count), k)
    return ActivationSchedule({v: rng.randint(0, max_round) for v in nodes})


@dataclass(frozen=True, slots=True)
class Violation:
    check: str
    round_index: int
    node: int | None
    detail: str


@dataclass
class SimResult:
    """Outcome summary of one engine run."""

    sync_round: int | None = None
    legitimate_round: int | None = None
    closure_verified: bool | None = None
    invariant_violations: list[Violation] = field(default_factory=list)
    bound: int | None = None
    horizon: int = 0
    rounds_run: int = 0
    sync_time: float | None = None
    all_lock_round: int | None = None
    entered_pulse: bool = False
    pulse_seen: bool = False
    legit_streak: int = 0


TRACE_FIELDS = (
    "round",
    "node",
    "clock",
    "state",
    "induced",
    "r",
    "b",
    "beeped",
    "beep_class",
    "virtual_counter",
)


@dataclass
class FastTrace:
    """Normalized per-round snapshots of a fast-protocol run.

    Index [t][v] gives node v at the beginning of normalized round t.
    ``induce_event[t][v]`` means v took the induced jump during round t (its
    induced beep happens in round t+1); it has one entry fewer than the
    snapshot arrays.
    """

    topology: Topology
    period: int
    spacing: int
    offset: int
    activation_round: list[int | None]
    clocks: list[list[int]]
    states: list[list[NodeState]]
    induced: list[list[bool]]
    beeped: list[list[bool]]
    counters: list[list[int | None]]
    induce_event: list[list[bool]]

    def round_count(self) -> int:
        return len(self.clocks)

    def config_at(self, t: int, v: int) -> FastNodeConfig:
        return FastNodeConfig(self.clocks[t][v], self.states[t][v], self.induced[t][v])

    def beep_class_at(self, t: int, v: int, checkpoints: CheckpointSet) -> BeepClass | None:
        if not self.beeped[t][v]:
            return None
        return classify_beep(
            self.config_at(t, v), checkpoints, just_activated=self.activation_round[v] == t
        )

    def rows(self) -> Iterator[dict]:
        cps = compute_checkpoints(self.period, self.spacing)
        for t in range(self.round_count()):
            for v in range(self.topology.node_count):
                beep_class = self.beep_class_at(t, v, cps)
                yield {
                    "round": t,
                    "node": v,
                    "clock": self.clocks[t][v],
                    "state": self.states[t][v].value,
                    "induced": self.induced[t][v],
                    "r": None,
                    "b": None,
                    "beeped": self.beeped[t][v],
                    "beep_class": None if beep_class is None else beep_class.value,
                    "virtual_counter": self.counters[t][v],
                }


@dataclass
class StabTrace:
    """Per-round snapshots of a self-stabilizing run (states before repair)."""

    topology: Topology
    period: int
    spacing: int
    node_bound: int
    clocks: list[list[int]]
    states: list[list[StabState]]
    induced: list[list[bool]]
    round_counter: list[list[int]]
    beep_count: list[list[int]]
    beeped: list[list[bool]]

    def round_count(self) -> int:
        return len(self.clocks)

    def config_at(self, t: int, v: int) -> StabNodeConfig:
        return StabNodeConfig(
            self.clocks[t][v],
            self.states[t][v],
            self.induced[t][v],
            self.round_counter[t][v],
            self.beep_count[t][v],
        )

    def rows(self) -> Iterator[dict]:
        for t in range(self.round_count()):
            for v in range(self.topology.node_count):
                yield {
                    "round": t,
                    "node": v,
                    "clock": self.clocks[t][v],
                    "state": self.states[t][v].value,
                    "induced": self.induced[t][v],
                    "r": self.round_counter[t][v],
                    "b": self.beep_count[t][v],
                    "beeped": self.beeped[t][v],
                    "beep_class": None,
                    "virtual_counter": None,
                }


def run_fast(
    topology: Topology,
    schedule: ActivationSchedule,
    period: int,
    spacing: int = 4,
    horizon: int | None = None,
    record_trace: bool = True,
) -> tuple[SimResult, FastTrace | None]:
    """Simulates the fast protocol and reports the synchronization round.

    Args:
        topology: Connected graph to run on.
        schedule: Adversary wake rounds; at least one node must wake.
        period: Clock cycle length.
        spacing: Checkpoint distance.
        horizon: Normalized rounds to simulate; defaults to twice the
            runtime bound plus four periods.
        record_trace: Disable to save memory on large sweeps.

    Returns:
        (result, trace); trace is None when recording is disabled.
    """
    n = topology.node_count
    for node in schedule.wake_round:
        if not 0 <= node < n:
            raise ValueError(f"wake node {node} out of range")
    cps = compute_checkpoints(period, spacing)
    bound = fast_runtime_bound(topology.diameter, period, spacing)
    if horizon is None:
        horizon = 2 * bound + 4 * period
    offset = schedule.min_wake()
    neighbors = topology.neighbors
    wake = schedule.wake_round

    configs: list[FastNodeConfig] = [INACTIVE_CONFIG] * n
    counters: list[int | None] = [None] * n
    activation_round: list[int | None] = [None] * n
    sync_round: int | None = None

    clocks_rows: list[list[int]] = []
    states_rows: list[list[NodeState]] = []
    induced_rows: list[list[bool]] = []
    beeped_rows: list[list[bool]] = []
    counter_rows: list[list[int | None]] = []
    event_rows: list[list[bool]] = []

    for raw in range(offset, offset + horizon + 1):
        beeping = [c.state is NodeState.BEEP for c in configs]
        events = [False] * n
        new_configs: list[FastNodeConfig] = []
        for v in range(n):
            heard = False
            for w in neighbors[v]:
                if beeping[w]:
                    heard = True
                    break
            old = configs[v]
            nxt = step(old, RoundInput(heard, wake.get(v) == raw), cps)
            if old.state is NodeState.INACTIVE:
                if nxt.state is not NodeState.INACTIVE:
                    counters[v] = 0
                    activation_round[v] = raw - offset
            else:
                counters[v] += (nxt.clock - old.clock) % period
                if old.state is NodeState.LISTEN and heard and nxt.state is NodeState.BEEP:
                    events[v] = True
            new_configs.append(nxt)
        configs = new_configs
        t = raw - offset
        if raw > offset and record_trace:
            event_rows.append(events)
        if record_trace:
            clocks_rows.append([c.clock for c in configs])
            states_rows.append([c.state for c in configs])
            induced_rows.append([c.induced for c in configs])
            beeped_rows.append([c.state is NodeState.BEEP for c in configs])
            counter_rows.append(counters.copy())
        if sync_round is None and all(r is not None for r in activation_round):
            first_clock = configs[0].clock
            if all(c.clock == first_clock for c in configs):
                sync_round = t

    trace = None
    if record_trace:
        trace = FastTrace(
            topology=topology,
            period=period,
            spacing=spacing,
            offset=offset,
            activation_round=activation_round,
            clocks=clocks_rows,
            states=states_rows,
            induced=induced_rows,
            beeped=beeped_rows,
            counters=counter_rows,
            induce_event=event_rows,
        )
    result = SimResult(
        sync_round=sync_round, bound=bound, horizon=horizon, rounds_run=horizon
    )
    if trace is not None and sync_round is not None:
        window = min(4 * period, horizon - sync_round)
        if window >= 2 * period:
            result.closure_verified = check_closure(trace, sync_round, period, window)
    return result, trace


def check_closure(trace: FastTrace, sync_round: int, period: int, window: int) -> bool:
    """Verifies post-synchronization discipline over ``window`` rounds.

    Clocks must stay equal on every round of the window. Beeps must occur
    exactly at clock 0 once stale induced flags have flushed; the flush is a
    single simultaneous mature beep at the first checkpoint crossing after the
    sync round, so nonzero-clock beeps are tolerated only up to
    sync_round + period + 1.

    Args:
        trace: A recorded fast-protocol trace.
        sync_round: The round from which clocks are expected equal.
        period: Clock cycle length.
        window: Rounds to verify; must be at least 2*period.

    Returns:
        True when the window shows stable synchronized pulsing.

    Raises:
        ValueError: If the window is shorter than 2*period or the trace does
            not cover it.
    """
    if window < 2 * period:
        raise ValueError(f"window {window} shorter than {2 * period}")
    last = sync_round + window
    if last >= trace.round_count():
        raise ValueError(f"trace has {trace.round_count()} rounds, window needs {last + 1}")
    n = trace.topology.node_count
    act = trace.activation_round
    last_bad = None
    for t in range(sync_round, last + 1):
        clocks = trace.clocks[t]
        first = clocks[0]
        for v in range(n):
            if act[v] is None or act[v] > t or clocks[v] != first:
                return False
        if t > sync_round:
            beeped = trace.beeped[t]
            for v in range(n):
                if beeped[v] != (clocks[v] == 0):
                    last_bad = t
    return last_bad is None or last_bad <= sync_round + period + 1


def check_invariants(trace: FastTrace, checkpoints: CheckpointSet) -> list[Violation]:
    """Runs the seven trace checks for fast-protocol runs.

    C1 clock-counter relation, C2 counter steps in {1, 2}, C3 beeps only on or
    one past checkpoints, C4 no induction between counter-adjacent nodes, C5
    a neighbor-counter gap above 1 closes within one round, C6 a round-0 node
    holding the maximum counter keeps holding it, C7 a node activated one
    round after a neighbor sits at counter distance 1.

    Returns:
        All violations found (empty list for a conforming trace).
    """
    violations: list[Violation] = []
    period = checkpoints.period
    n = trace.topology.node_count
    act = trace.activation_round
    rounds = trace.round_count()
    neighbors = trace.topology.neighbors

    def active(v: int, t: int) -> bool:
        a = act[v]
        return a is not None and a <= t

    for t in range(rounds):
        clocks = trace.clocks[t]
        states = trace.states[t]
        counters = trace.counters[t]
        for v in range(n):
            if not active(v, t):
                continue
            if (1 + counters[v]) % period != clocks[v]:
                violations.append(
                    Violation("C1", t, v, f"clock {clocks[v]} != 1 + counter {counters[v]} mod {period}")
                )
            if states[v] is NodeState.BEEP:
                if not (clocks[v] in checkpoints or checkpoints.is_post_checkpoint(clocks[v])):
                    violations.append(
                        Violation("C3", t, v, f"beep at clock {clocks[v]} off checkpoint structure")
                    )

    for t in range(rounds - 1):
        before = trace.counters[t]
        after = trace.counters[t + 1]
        for v in range(n):
            if active(v, t):
                advance = after[v] - before[v]
                if advance not in (1, 2):
                    violations.append(Violation("C2", t, v, f"counter advanced by {advance}"))

    for t, events in enumerate(trace.induce_event):
        beeped = trace.beeped[t]
        counters = trace.counters[t]
        for v in range(n):
            if not events[v]:
                continue
            for w in neighbors[v]:
                if beeped[w] and active(w, t):
                    if counters[v] in (counters[w], counters[w] + 1):
                        violations.append(
                            Violation(
                                "C4", t, v,
                                f"induced by node {w} at counters {counters[v]}/{counters[w]}",
                            )
                        )

    for u, v in trace.topology.edges:
        armed = False
        for t in range(rounds):
            if not (active(u, t) and active(v, t)):
                armed = False
                continue
            gap = abs(trace.counters[t][u] - trace.counters[t][v])
            if gap <= 1:
                armed = True
            else:
                if armed and t + 1 < rounds:
                    nxt = abs(trace.counters[t + 1][u] - trace.counters[t + 1][v])
                    if nxt > 1:
                        violations.append(
                            Violation("C5", t, u, f"gap {gap} with node {v} not closed next round")
                        )
                armed = False

    initial = [v for v in range(n) if act[v] == 0]
    for t in range(rounds - 1):
        counters = trace.counters[t]
        live = [counters[v] for v in range(n) if active(v, t)]
        if not live:
            continue
        peak = max(live)
        after = trace.counters[t + 1]
        live_after = [after[v] for v in range(n) if active(v, t + 1)]
        peak_after = max(live_after)
        for v in initial:
            if counters[v] == peak and after[v] != peak_after:
                violations.append(
                    Violation("C6", t, v, f"lost maximal counter: {after[v]} < {peak_after}")
                )

    for v in range(n):
        t = act[v]
        if t is None or t < 1:
            continue
        for w in neighbors[v]:
            if act[w] == t - 1 and trace.counters[t][w] != 1:
                violations.append(
                    Violation("C7", t, v, f"neighbor {w} at counter {trace.counters[t][w]}, expected 1")
                )

    return violations


def run_selfstab(
    topology: Topology,
    initial: list[StabNodeConfig],
    period: int,
    spacing: int = 5,
    node_bound: int | None = None,
    horizon: int | None = None,
    stability_window: int | None = None,
    record_trace: bool = True,
) -> tuple[SimResult, StabTrace | None]:
    """Simulates the self-stabilizing protocol from an arbitrary configuration.

    Args:
        topology: Connected graph to run on.
        initial: One config per node; fields must lie in their domains.
        period: Clock cycle length.
        spacing: Checkpoint distance.
        node_bound: Size bound the nodes run with; defaults to the true size.
        horizon: Maximum rounds to simulate; defaults to
            50 * max(period, budget, 4*node_bound).
        stability_window: When set, stop once legitimacy has held this many
            consecutive rounds beyond its start.
        record_trace: Disable to save memory on large sweeps.

    Returns:
        (result, trace); result.legitimate_round is the start of the trailing
        legitimate streak, None if the run never stabilized.
    """
    n = topology.node_count
    if node_bound is None:
        node_bound = n
    if node_bound < n:
        raise ValueError(f"node_bound {node_bound} below node count {n}")
    cps = compute_checkpoints(period, spacing)
    budget = sync_round_budget(node_bound, period, spacing)
    if horizon is None:
        horizon = 50 * max(period, budget, 4 * node_bound)
    if len(initial) != n:
        raise ValueError(f"need {n} initial configs, got {len(initial)}")
    for cfg in initial:
        validate_config(cfg, period, node_bound, budget)

    neighbors = topology.neighbors
    configs = list(initial)
    streak_start: int | None = None
    all_lock_round: int | None = None
    entered_pulse = False
    pulse_seen = False
    last_t = 0

    clocks_rows: list[list[int]] = []
    states_rows: list[list[StabState]] = []
    induced_rows: list[list[bool]] = []
    rc_rows: list[list[int]] = []
    bc_rows: list[list[int]] = []
    beeped_rows: list[list[bool]] = []

    for t in range(horizon + 1):
        last_t = t
        first_clock = configs[0].clock
        legit = True
        saw_pulse = False
        all_lock = True
        for c in configs:
            s = c.state
            if s is StabState.PULSE:
                saw_pulse = True
            if s is not StabState.LOCK:
                all_lock = False
            if (
                (s is not StabState.BEEP and s is not StabState.LISTEN)
                or c.induced
                or c.clock != first_clock
            ):
                legit = False
        if saw_pulse:
            pulse_seen = True
        if all_lock and all_lock_round is None:
            all_lock_round = t
        if legit:
            if streak_start is None:
                streak_start = t
        else:
            streak_start = None

        checked = [consistency_check(c, cps) for c in configs]
        beeping = [will_beep_stab(c) for c in checked]
        if record_trace:
            clocks_rows.append([c.clock for c in configs])
            states_rows.append([c.state for c in configs])
            induced_rows.append([c.induced for c in configs])
            rc_rows.append([c.round_counter for c in configs])
            bc_rows.append([c.beep_count for c in configs])
            beeped_rows.append(beeping)

        if (
            stability_window is not None
            and streak_start is not None
            and t - streak_start >= stability_window
        ):
            break
        if t == horizon:
            break

        new_configs = []
        for v in range(n):
            heard = False
            for w in neighbors[v]:
                if beeping[w]:
                    heard = True
                    break
            nxt = stab_step(checked[v], RoundInput(heard), cps, node_bound, budget)
            if nxt.state is StabState.PULSE and configs[v].state is not StabState.PULSE:
                entered_pulse = True
            new_configs.append(nxt)
        configs = new_configs

    trace = None
    if record_trace:
        trace = StabTrace(
            topology=topology,
            period=period,
            spacing=spacing,
            node_bound=node_bound,
            clocks=clocks_rows,
            states=states_rows,
            induced=induced_rows,
            round_counter=rc_rows,
            beep_count=bc_rows,
            beeped=beeped_rows,
        )
    streak = 0 if streak_start is None else last_t - streak_start
    result = SimResult(
        legitimate_round=streak_start,
        closure_verified=(streak >= 2 * period) if streak_start is not None else None,
        horizon=horizon,
        rounds_run=last_t,
        all_lock_round=all_lock_round,
        entered_pulse=entered_pulse,
        pulse_seen=pulse_seen,
        legit_streak=streak,
    )
    return result, trace


def check_stab_invariants(trace: StabTrace, budget: int) -> list[Violation]:
    """Checks counter semantics and pulse/lock episode lengths on a trace.

    Pulse episodes entered during the run must beep exactly 4 consecutive
    rounds and end in a lock; lock episodes entered during the run must last
    exactly 4*node_bound rounds and end inactive. Episodes are measured on
    repaired states, since a consistency reset turns a listen round into the
    first pulse round before the trace snapshot can show it. The round
    counter may only step up by one until it saturates, reset to 0, or sit at
    1 right after a consistency reset; the beep counter clears on silent
    listen rounds.
    """
    violations: list[Violation] = []
    n = trace.topology.node_count
    rounds = trace.round_count()
    neighbors = trace.topology.neighbors
    saturation = max(4 * trace.node_bound, budget + 1)
    cps = compute_checkpoints(trace.period, trace.spacing)

    post_states = [
        [consistency_check(trace.config_at(t, v), cps).state for v in range(n)]
        for t in range(rounds)
    ]
    heard_rows = []
    for t in range(rounds):
        beeped = trace.beeped[t]
        heard_rows.append([any(beeped[w] for w in neighbors[v]) for v in range(n)])

    for v in range(n):
        pulse_entry: int | None = None
        lock_entry: int | None = None
        for t in range(rounds):
            state = post_states[t][v]
            if t > 0:
                prev = post_states[t - 1][v]
                rc_prev = trace.round_counter[t - 1][v]
                rc = trace.round_counter[t][v]
                if rc not in (min(rc_prev + 1, saturation), 0, 1):
                    violations.append(
                        Violation("stab-r", t, v, f"round counter went {rc_prev} -> {rc}")
                    )
                if prev is StabState.LISTEN and not heard_rows[t - 1][v]:
                    if state not in (StabState.LISTEN, StabState.BEEP):
                        violations.append(
                            Violation("stab-b", t, v, f"silent listen became {state.value}")
                        )
                    elif trace.beep_count[t][v] != 0:
                        violations.append(
                            Violation("stab-b", t, v, "beep count not cleared on silent listen")
                        )
                if prev is StabState.PULSE and state not in (StabState.PULSE, StabState.LOCK):
                    violations.append(Violation("stab-pulse", t, v, f"pulse ended in {state.value}"))
                if prev is StabState.LOCK and state not in (StabState.LOCK, StabState.INACTIVE):
                    violations.append(Violation("stab-lock", t, v, f"lock ended in {state.value}"))

            if state is StabState.PULSE:
                if pulse_entry is None:
                    pulse_entry = t
            else:
                if pulse_entry is not None and pulse_entry > 0:
                    length = t - pulse_entry
                    beeps = sum(1 for u in range(pulse_entry, t) if trace.beeped[u][v])
                    if length != 4 or beeps != 4:
                        violations.append(
                            Violation(
                                "stab-pulse", pulse_entry, v,
                                f"entered pulse lasted {length} rounds with {beeps} beeps",
                            )
                        )
                pulse_entry = None
            if state is StabState.LOCK:
                if lock_entry is None:
                    lock_entry = t
            else:
                if lock_entry is not None and lock_entry > 0:
                    length = t - lock_entry
                    if length != 4 * trace.node_bound:
                        violations.append(
                            Violation(
                                "stab-lock", lock_entry, v,
                                f"entered lock lasted {length} rounds",
                            )
                        )
                lock_entry = None
    return violations


def has_all_lock_round(trace: StabTrace) -> int | None:
    """First round in which every node is locked, None if there is none."""
    for t in range(trace.round_count()):
        if all(s is StabState.LOCK for s in trace.states[t]):
            return t
    return None


def super_states_at(trace: StabTrace, t: int) -> list[SuperState]:
    return [super_state(trace.config_at(t, v)) for v in range(trace.topology.node_count)]


def write_trace_csv(trace: FastTrace | StabTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        for row in trace.rows():
            writer.writerow({k: "" if v is None else v for k, v in row.items()})


def write_trace_jsonl(trace: FastTrace | StabTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in trace.rows():
            fh.write(json.dumps(row) + "\n")
