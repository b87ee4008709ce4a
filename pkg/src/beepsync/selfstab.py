"""Self-stabilizing wrapper around the fast protocol.

Starting from arbitrary per-node states, nodes locally repair impossible
(clock, state) combinations and watch two error signals: hearing beeps in too
many consecutive rounds (beep counter reaching 4) and staying unsynchronized
past the fast protocol's worst-case budget (round counter exceeding it). A
node that detects an error pulses for four rounds, drowning out its
neighborhood and dragging it into the same reset; it then locks long enough
for the whole graph to quiesce, goes inactive, and rejoins via the fast
protocol.

The round counter saturates at max(4*node_bound, budget+1); the beep counter
is clamped to 4. Nodes know ``node_bound`` (an upper bound on the node
count), not the true size.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .checkpoints import CheckpointSet
from .fast_protocol import RoundInput


class StabState(Enum):
    INACTIVE = "inactive"
    BEEP = "beep"
    LISTEN = "listen"
    PULSE = "pulse"
    LOCK = "lock"


class SuperState(Enum):
    FAST = "fast"
    PULSE = "pulse"
    LOCK = "lock"
    INACTIVE = "inactive"


_SUPER = {
    StabState.BEEP: SuperState.FAST,
    StabState.LISTEN: SuperState.FAST,
    StabState.PULSE: SuperState.PULSE,
    StabState.LOCK: SuperState.LOCK,
    StabState.INACTIVE: SuperState.INACTIVE,
}


@dataclass(frozen=True, slots=True)
class StabNodeConfig:
    """One node's state at the beginning of a round.

    Attributes:
        clock: Cyclic clock value, meaningful in beep/listen states.
        state: Current protocol state.
        induced: Whether the last clock jump is still unconfirmed.
        round_counter: Saturating round count since the last reset.
        beep_count: Consecutive rounds spent beeping or hearing beeps.
    """

    clock: int
    state: StabState
    induced: bool
    round_counter: int
    beep_count: int


def super_state(config: StabNodeConfig) -> SuperState:
    return _SUPER[config.state]


def will_beep_stab(config: StabNodeConfig) -> bool:
    """Pulsing nodes beep every round; beep-state nodes beep once."""
    return config.state is StabState.BEEP or config.state is StabState.PULSE


def max_round_counter(node_bound: int, budget: int) -> int:
    """Saturation value of the round counter."""
    return max(4 * node_bound, budget + 1)


def consistency_check(config: StabNodeConfig, checkpoints: CheckpointSet) -> StabNodeConfig:
    """Locally repairs impossible fast-protocol configs.

    A beeping node must sit on or one past a checkpoint; a listening node must
    not sit at clock 0 (it would have beeped). Anything else in a beep/listen
    state resets to a fresh pulse. Other states carry no clock claim and pass
    through unchanged.
    """
    state = config.state
    if state is StabState.BEEP:
        ok = config.clock in checkpoints or checkpoints.is_post_checkpoint(config.clock)
    elif state is StabState.LISTEN:
        ok = config.clock > 0
    else:
        return config
    if ok:
        return config
    return StabNodeConfig(config.clock, StabState.PULSE, config.induced, 0, config.beep_count)


def stab_step(
    config: StabNodeConfig,
    inputs: RoundInput,
    checkpoints: CheckpointSet,
    node_bound: int,
    budget: int,
) -> StabNodeConfig:
    """Computes the config at the beginning of the next round.

    The round counter is incremented first (saturating), then the state
    branch runs:

      inactive: activate on a heard beep or once the counter reaches
          4*node_bound, as (clock 1, beep, induced, counter 0, beeps 1).
      beep: count the own beep; pulse when the count reaches 4, else advance
          the clock and listen.
      listen, heard: count the beep; pulse when the count reaches 4 or the
          round counter exceeds the budget; else run the fast protocol's
          induce-or-advance branch.
      listen, silent: clear the beep count and run the fast protocol's
          advance-and-mature branch.
      pulse: after four rounds, lock.
      lock: after 4*node_bound rounds, go inactive.

    Args:
        config: State at the beginning of the round, already repaired by
            :func:`consistency_check`.
        inputs: Beep perception for this round.
        checkpoints: Checkpoint set for the protocol's period.
        node_bound: The size bound the node was configured with.
        budget: Error-detection threshold in rounds.

    Returns:
        State at the beginning of the next round.
    """
    period = checkpoints.period
    saturation = max(4 * node_bound, budget + 1)
    rounds = config.round_counter
    if rounds < saturation:
        rounds += 1
    state = config.state

    if state is StabState.INACTIVE:
        if inputs.heard_beep or rounds >= 4 * node_bound:
            return StabNodeConfig(1, StabState.BEEP, True, 0, 1)
        return StabNodeConfig(config.clock, state, config.induced, rounds, config.beep_count)

    if state is StabState.BEEP:
        beeps = min(config.beep_count + 1, 4)
        if beeps >= 4:
            return StabNodeConfig(config.clock, StabState.PULSE, config.induced, 0, beeps)
        return StabNodeConfig(
            (config.clock + 1) % period, StabState.LISTEN, config.induced, rounds, beeps
        )

    if state is StabState.LISTEN:
        if inputs.heard_beep:
            beeps = min(config.beep_count + 1, 4)
            if beeps >= 4 or rounds > budget:
                return StabNodeConfig(config.clock, StabState.PULSE, config.induced, 0, beeps)
            if checkpoints.is_pre_checkpoint(config.clock):
                return StabNodeConfig(
                    (config.clock + 2) % period, StabState.BEEP, True, rounds, beeps
                )
            return StabNodeConfig(
                (config.clock + 1) % period, StabState.LISTEN, config.induced, rounds, beeps
            )
        clock = (config.clock + 1) % period
        if (config.induced and clock in checkpoints) or clock == 0:
            return StabNodeConfig(clock, StabState.BEEP, False, rounds, 0)
        return StabNodeConfig(clock, StabState.LISTEN, config.induced, rounds, 0)

    if state is StabState.PULSE:
        if rounds >= 4:
            return StabNodeConfig(config.clock, StabState.LOCK, config.induced, 0, config.beep_count)
        return StabNodeConfig(config.clock, state, config.induced, rounds, config.beep_count)

    # lock
    if rounds >= 4 * node_bound:
        return StabNodeConfig(config.clock, StabState.INACTIVE, config.induced, 0, config.beep_count)
    return StabNodeConfig(config.clock, state, config.induced, rounds, config.beep_count)


def validate_config(
    config: StabNodeConfig, period: int, node_bound: int, budget: int
) -> None:
    """Raises ValueError when any field is outside its domain."""
    if not 0 <= config.clock < period:
        raise ValueError(f"clock {config.clock} out of [0, {period})")
    if not isinstance(config.state, StabState):
        raise ValueError(f"bad state {config.state!r}")
    saturation = max_round_counter(node_bound, budget)
    if not 0 <= config.round_counter <= saturation:
        raise ValueError(f"round_counter {config.round_counter} out of [0, {saturation}]")
    if not 0 <= config.beep_count <= 4:
        raise ValueError(f"beep_count {config.beep_count} out of [0, 4]")


def random_configs(
    node_count: int,
    period: int,
    node_bound: int,
    budget: int,
    seed: int,
) -> list[StabNodeConfig]:
    """Samples a fully arbitrary initial configuration, every field uniform."""
    rng = random.Random(seed)
    states = list(StabState)
    saturation = max_round_counter(node_bound, budget)
    return [
        StabNodeConfig(
            clock=rng.randrange(period),
            state=rng.choice(states),
            induced=rng.random() < 0.5,
            round_counter=rng.randint(0, saturation),
            beep_count=rng.randint(0, 4),
        )
        for _ in range(node_count)
    ]


def legitimate_configs(node_count: int, period: int, clock: int = 1) -> list[StabNodeConfig]:
    """A clean in-sync configuration: everyone listening at the same clock."""
    if not 0 < clock < period:
        raise ValueError(f"clock {clock} out of (0, {period})")
    return [
        StabNodeConfig(clock, StabState.LISTEN, False, 0, 0) for _ in range(node_count)
    ]


def format_configs(configs: list[StabNodeConfig]) -> str:
    """One node per line: clock state induced round_counter beep_count."""
    lines = [
        f"{c.clock} {c.state.value} {int(c.induced)} {c.round_counter} {c.beep_count}"
        for c in configs
    ]
    return "\n".join(lines) + "\n"


def parse_configs(text: str) -> list[StabNodeConfig]:
    configs = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"config line needs 5 fields: {line!r}")
        if parts[2] not in ("0", "1"):
            raise ValueError(f"induced flag must be 0 or 1: {line!r}")
        configs.append(
            StabNodeConfig(
                clock=int(parts[0]),
                state=StabState(parts[1]),
                induced=parts[2] == "1",
                round_counter=int(parts[3]),
                beep_count=int(parts[4]),
            )
        )
    if not configs:
        raise ValueError("config file holds no nodes")
    return configs


def load_configs(path: str) -> list[StabNodeConfig]:
    with open(path, encoding="utf-8") as fh:
        return parse_configs(fh.read())


def save_configs(configs: list[StabNodeConfig], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_configs(configs))
