"""Single-node automaton analysis and counterexample construction.

Any deterministic per-round protocol with two observations (heard a beep /
silence) is a finite automaton; this module finds the cycle a node falls
into when it hears beeps every round (the beep cycle) and when it never
hears one (the silence cycle), and builds a small graph plus initial states
on which the protocol provably never reaches synchronized pulsing:

  * case B: the beep cycle contains a beeping state; a clique holding every
    beep-cycle state keeps itself on that cycle forever.
  * case A1: the beep cycle is beep-free and a lone node does not settle
    into beeping exactly every period; the lone node is the witness.
  * case A2: a lone node does pulse correctly; a star whose leaves carry all
    period phases keeps the center hearing beeps forever without ever
    beeping itself, so the leaves stay staggered.

State 0 is treated as the protocol's start state. Certification replays a
counterexample until the global configuration repeats and checks that no
reachable cycle shows synchronized pulsing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .fast_protocol import INACTIVE_CONFIG, RoundInput, step, will_beep
from .checkpoints import compute_checkpoints, sync_round_budget
from .selfstab import StabNodeConfig, StabState, consistency_check, stab_step, will_beep_stab
from .topology import Topology, generate

DEFAULT_NODE_BUDGET = 64


class NotConstructible(Exception):
    """Raised when a counterexample cannot be built for this automaton."""


class Case(Enum):
    A1 = "A1"
    A2 = "A2"
    B = "B"


@dataclass(frozen=True)
class ProtocolAutomaton:
    """Deterministic single-node protocol over inputs {beep, silence}."""

    beep_next: tuple[int, ...]
    silence_next: tuple[int, ...]
    beeps: tuple[bool, ...]
    clock_of: tuple[int, ...] | None = None
    labels: tuple | None = None

    def __post_init__(self) -> None:
        k = len(self.beeps)
        if k == 0:
            raise ValueError("automaton needs at least one state")
        for name in ("beep_next", "silence_next"):
            targets = getattr(self, name)
            if len(targets) != k:
                raise ValueError(f"{name} has {len(targets)} entries for {k} states")
            for s in targets:
                if not 0 <= s < k:
                    raise ValueError(f"{name} target {s} out of range")
        if self.clock_of is not None and len(self.clock_of) != k:
            raise ValueError("clock_of length mismatch")
        if self.labels is not None and len(self.labels) != k:
            raise ValueError("labels length mismatch")

    @property
    def state_count(self) -> int:
        return len(self.beeps)

    def transition(self, state: int, heard_beep: bool) -> int:
        return self.beep_next[state] if heard_beep else self.silence_next[state]


@dataclass(frozen=True)
class CycleReport:
    beep_cycle: tuple[int, ...]
    silence_cycle: tuple[int, ...]
    case: Case
    counterexample: tuple[Topology, tuple[int, ...]]


def _eventual_cycle(next_state: tuple[int, ...], start: int) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    seq: list[int] = []
    s = start
    while s not in seen:
        seen[s] = len(seq)
        seq.append(s)
        s = next_state[s]
    return tuple(seq[seen[s]:]) + (s,)


def find_beep_cycle(automaton: ProtocolAutomaton, start: int = 0) -> tuple[int, ...]:
    """Eventual cycle under constant beep input, with the first state repeated."""
    return _eventual_cycle(automaton.beep_next, start)


def find_silence_cycle(automaton: ProtocolAutomaton, start: int = 0) -> tuple[int, ...]:
    """Eventual cycle under constant silence, with the first state repeated."""
    return _eventual_cycle(automaton.silence_next, start)


def _pulses_every(automaton: ProtocolAutomaton, cycle: tuple[int, ...], period: int) -> bool:
    """True when beeps around the cycle occur exactly every ``period`` steps."""
    core = cycle[:-1]
    marks = [i for i, s in enumerate(core) if automaton.beeps[s]]
    if not marks or len(core) % period != 0:
        return False
    if len(marks) != len(core) // period:
        return False
    gaps = [marks[j + 1] - marks[j] for j in range(len(marks) - 1)]
    gaps.append(marks[0] + len(core) - marks[-1])
    return all(g == period for g in gaps)


def classify(
    automaton: ProtocolAutomaton, period: int, node_budget: int = DEFAULT_NODE_BUDGET
) -> CycleReport:
    """Builds a non-synchronizing graph and initial states for the automaton.

    Raises:
        NotConstructible: When the construction exceeds the node budget, or
            the star case needs clock information or period phases the
            silence cycle does not provide.
    """
    if period < 1:
        raise ValueError(f"period must be positive, got {period}")
    beep_cycle = find_beep_cycle(automaton, 0)
    silence_cycle = find_silence_cycle(automaton, 0)
    core = beep_cycle[:-1]
    if any(automaton.beeps[s] for s in core):
        if len(core) > node_budget:
            raise NotConstructible(
                f"clique of {len(core)} nodes exceeds budget {node_budget}"
            )
        topo = generate("clique", len(core)) if len(core) > 1 else generate("line", 1)
        return CycleReport(beep_cycle, silence_cycle, Case.B, (topo, core))

    if not _pulses_every(automaton, silence_cycle, period):
        return CycleReport(
            beep_cycle, silence_cycle, Case.A1, (generate("line", 1), (0,))
        )

    if period + 1 > node_budget:
        raise NotConstructible(f"star of {period + 1} nodes exceeds budget {node_budget}")
    if automaton.clock_of is None:
        raise NotConstructible("star construction needs clock values per state")
    silence_core = silence_cycle[:-1]
    if len(silence_core) < period:
        raise NotConstructible(
            f"silence cycle of length {len(silence_core)} cannot cover {period} phases"
        )
    anchor = None
    for i, s in enumerate(silence_core):
        if automaton.beeps[s] and automaton.clock_of[s] == 0:
            anchor = i
            break
    if anchor is None:
        raise NotConstructible("silence cycle has no beeping state at clock 0")
    leaves = tuple(
        silence_core[(anchor + j) % len(silence_core)] for j in range(period)
    )
    topo = generate("star", period + 1)
    initial = (core[0],) + leaves
    return CycleReport(beep_cycle, silence_cycle, Case.A2, (topo, initial))


def _global_run(
    automaton: ProtocolAutomaton, topology: Topology, initial: tuple[int, ...]
) -> tuple[list[tuple[int, ...]], int]:
    """Runs until the global configuration repeats.

    Returns (sequence of configurations, index where the cycle starts); the
    sequence ends just before the first repeated configuration.
    """
    neighbors = topology.neighbors
    n = topology.node_count
    seen: dict[tuple[int, ...], int] = {}
    seq: list[tuple[int, ...]] = []
    config = tuple(initial)
    while config not in seen:
        seen[config] = len(seq)
        seq.append(config)
        beeping = [automaton.beeps[s] for s in config]
        config = tuple(
            automaton.transition(config[v], any(beeping[w] for w in neighbors[v]))
            for v in range(n)
        )
    return seq, seen[config]


def _cycle_synchronized(
    automaton: ProtocolAutomaton, cycle: list[tuple[int, ...]], period: int
) -> bool:
    """True when the global cycle shows equal clocks and joint period-pulsing."""
    beep_marks = []
    for i, config in enumerate(cycle):
        if automaton.clock_of is not None:
            values = [automaton.clock_of[s] for s in config]
        else:
            values = list(config)
        if any(v != values[0] for v in values):
            return False
        row = [automaton.beeps[s] for s in config]
        if any(row) != all(row):
            return False
        if row[0]:
            beep_marks.append(i)
    if not beep_marks or len(cycle) % period != 0:
        return False
    if len(beep_marks) != len(cycle) // period:
        return False
    gaps = [beep_marks[j + 1] - beep_marks[j] for j in range(len(beep_marks) - 1)]
    gaps.append(beep_marks[0] + len(cycle) - beep_marks[-1])
    return all(g == period for g in gaps)


def certify_no_sync(
    automaton: ProtocolAutomaton,
    counterexample: tuple[Topology, tuple[int, ...]],
    period: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> bool:
    """True when the run from the counterexample never reaches synchronized pulsing.

    The run is deterministic over a finite configuration space, so its
    eventual behavior is exactly the detected cycle; synchronized pulsing
    from any round would make that cycle itself synchronized.
    """
    topology, initial = counterexample
    if topology.node_count > node_budget:
        raise ValueError(
            f"{topology.node_count} nodes exceed certification budget {node_budget}"
        )
    if len(initial) != topology.node_count:
        raise ValueError(f"need {topology.node_count} initial states, got {len(initial)}")
    for s in initial:
        if not 0 <= s < automaton.state_count:
            raise ValueError(f"initial state {s} out of range")
    seq, cycle_start = _global_run(automaton, topology, initial)
    return not _cycle_synchronized(automaton, seq[cycle_start:], period)


def runtime_lower_bound_demo(automaton: ProtocolAutomaton, period: int) -> float:
    """First round at which two phase-shifted correct nodes can agree.

    Places two adjacent nodes one silence-cycle step apart, starting at the
    beeping anchor of the silence cycle, and runs them until their states
    merge. Returns the merge round (at least 1), or infinity when the pair
    provably cycles without merging.

    Raises:
        NotConstructible: When the silence cycle never beeps, so the phase
            offset is meaningless.
    """
    silence_core = find_silence_cycle(automaton, 0)[:-1]
    beep_idx = [i for i, s in enumerate(silence_core) if automaton.beeps[s]]
    if not beep_idx:
        raise NotConstructible("silence cycle never beeps")
    anchor = beep_idx[0]
    if automaton.clock_of is not None:
        for i in beep_idx:
            if automaton.clock_of[silence_core[i]] == 0:
                anchor = i
                break
    pair = (
        silence_core[anchor],
        silence_core[(anchor + 1) % len(silence_core)],
    )
    seen = set()
    t = 0
    while pair not in seen:
        seen.add(pair)
        a, b = pair
        pair = (
            automaton.transition(a, automaton.beeps[b]),
            automaton.transition(b, automaton.beeps[a]),
        )
        t += 1
        if pair[0] == pair[1]:
            return t
    return float("inf")


def extract_fast_automaton(
    period: int, spacing: int = 4
) -> ProtocolAutomaton:
    """Enumerates the fast protocol's reachable configs as an automaton.

    State 0 is the inactive config; hearing a beep while inactive activates,
    so the adversary is not needed as a separate input.
    """
    cps = compute_checkpoints(period, spacing)
    index = {INACTIVE_CONFIG: 0}
    order = [INACTIVE_CONFIG]
    frontier = deque([INACTIVE_CONFIG])
    while frontier:
        cfg = frontier.popleft()
        for heard in (False, True):
            nxt = step(cfg, RoundInput(heard, False), cps)
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                frontier.append(nxt)
    return ProtocolAutomaton(
        beep_next=tuple(index[step(cfg, RoundInput(True, False), cps)] for cfg in order),
        silence_next=tuple(index[step(cfg, RoundInput(False, False), cps)] for cfg in order),
        beeps=tuple(will_beep(cfg) for cfg in order),
        clock_of=tuple(cfg.clock for cfg in order),
        labels=tuple(order),
    )


def extract_selfstab_automaton(
    period: int, spacing: int, node_bound: int
) -> ProtocolAutomaton:
    """Enumerates the self-stabilizing protocol's reachable configs.

    The per-round map applies the consistency repair before the transition,
    and a state beeps when its repaired form beeps.
    """
    cps = compute_checkpoints(period, spacing)
    budget = sync_round_budget(node_bound, period, spacing)
    start = StabNodeConfig(0, StabState.INACTIVE, False, 0, 0)

    def advance(cfg: StabNodeConfig, heard: bool) -> StabNodeConfig:
        return stab_step(consistency_check(cfg, cps), RoundInput(heard), cps, node_bound, budget)

    index = {start: 0}
    order = [start]
    frontier = deque([start])
    while frontier:
        cfg = frontier.popleft()
        for heard in (False, True):
            nxt = advance(cfg, heard)
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                frontier.append(nxt)
    return ProtocolAutomaton(
        beep_next=tuple(index[advance(cfg, True)] for cfg in order),
        silence_next=tuple(index[advance(cfg, False)] for cfg in order),
        beeps=tuple(will_beep_stab(consistency_check(cfg, cps)) for cfg in order),
        clock_of=tuple(cfg.clock for cfg in order),
        labels=tuple(order),
    )


def format_automaton(automaton: ProtocolAutomaton) -> str:
    """Serializes to the text form: header, then one line per state."""
    lines = [f"states {automaton.state_count}"]
    for s in range(automaton.state_count):
        parts = [
            str(s),
            str(automaton.beep_next[s]),
            str(automaton.silence_next[s]),
            "1" if automaton.beeps[s] else "0",
        ]
        if automaton.clock_of is not None:
            parts.append(str(automaton.clock_of[s]))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_automaton(text: str) -> ProtocolAutomaton:
    """Parses the text form: "states k", then "state beep_next silence_next beeps [clock]"."""
    lines = [
        ln for ln in (raw.strip() for raw in text.splitlines())
        if ln and not ln.startswith("#")
    ]
    if not lines or not lines[0].startswith("states "):
        raise ValueError("automaton text must start with 'states <count>'")
    k = int(lines[0].split()[1])
    if len(lines) - 1 != k:
        raise ValueError(f"expected {k} state lines, got {len(lines) - 1}")
    beep_next = [0] * k
    silence_next = [0] * k
    beeps = [False] * k
    clocks: list[int | None] = [None] * k
    seen = set()
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) not in (4, 5):
            raise ValueError(f"bad state line: {ln!r}")
        s = int(parts[0])
        if not 0 <= s < k or s in seen:
            raise ValueError(f"bad or repeated state id {s}")
        seen.add(s)
        beep_next[s] = int(parts[1])
        silence_next[s] = int(parts[2])
        if parts[3] not in ("0", "1"):
            raise ValueError(f"beep flag must be 0 or 1: {ln!r}")
        beeps[s] = parts[3] == "1"
        if len(parts) == 5:
            clocks[s] = int(parts[4])
    filled = [c for c in clocks if c is not None]
    if filled and len(filled) != k:
        raise ValueError("clock column must be present on all lines or none")
    return ProtocolAutomaton(
        beep_next=tuple(beep_next),
        silence_next=tuple(silence_next),
        beeps=tuple(beeps),
        clock_of=tuple(filled) if filled else None,
    )


def load_automaton(path: str) -> ProtocolAutomaton:
    with open(path, encoding="utf-8") as fh:
        return parse_automaton(fh.read())


def save_automaton(automaton: ProtocolAutomaton, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_automaton(automaton))
