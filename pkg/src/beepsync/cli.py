"""Command line front end.

Subcommands: run-fast, run-selfstab, run-slots, analyze-fsm, sweep. Every
run prints a JSON summary to stdout (measured values next to the
theoretical bound) and optionally writes the full trace to --out. Any long
flag can be preset through an environment variable named
BEEPSYNC_<FLAG> (uppercased, dashes become underscores); explicit flags win.

Exit codes: 0 success, 2 invalid arguments or unusable input, 3 invariant
violations found in the produced trace, 4 bound breach (no convergence
within the horizon, or convergence later than the theoretical bound).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .checkpoints import compute_checkpoints, fast_runtime_bound, sync_round_budget
from .engine import (
    ActivationSchedule,
    check_invariants,
    check_stab_invariants,
    random_schedule,
    run_fast,
    run_selfstab,
    write_trace_csv,
    write_trace_jsonl,
)
from .fsm import (
    NotConstructible,
    certify_no_sync,
    classify,
    extract_fast_automaton,
    extract_selfstab_automaton,
    format_automaton,
    load_automaton,
)
from .selfstab import load_configs, random_configs
from .slots import run_slots, write_slot_csv
from .topology import KINDS, Topology, format_topology, generate, load_topology

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3
EXIT_BOUND = 4

ENV_PREFIX = "BEEPSYNC_"


@dataclass
class ExperimentSpec:
    """Resolved inputs of one simulation run (fast, selfstab, or slots)."""

    mode: str
    topology: Topology
    period: int
    spacing: int
    node_bound: int | None = None
    schedule: ActivationSchedule | None = None
    initial: list | None = None
    horizon: int | None = None
    offsets: list[float] | None = None
    slot_duration: float = 1.0
    time_horizon: float | None = None
    out: str | None = None
    out_format: str = "csv"


def run(spec: ExperimentSpec) -> tuple[dict, int]:
    """Executes one experiment; returns (summary record, exit code).

    Writes the trace to spec.out when set. The summary always pairs the
    measured value with the theoretical bound it is checked against.
    """
    if spec.mode == "fast":
        return _run_fast_spec(spec)
    if spec.mode == "selfstab":
        return _run_selfstab_spec(spec)
    if spec.mode == "slots":
        return _run_slots_spec(spec)
    raise ValueError(f"unknown mode {spec.mode!r}")


def _run_fast_spec(spec: ExperimentSpec) -> tuple[dict, int]:
    if spec.schedule is None:
        raise ValueError("fast mode needs a schedule")
    result, trace = run_fast(
        spec.topology, spec.schedule, spec.period,
        spacing=spec.spacing, horizon=spec.horizon,
    )
    violations = check_invariants(
        trace, compute_checkpoints(spec.period, spec.spacing)
    )
    if spec.out:
        _write_trace(trace, spec.out, spec.out_format)
    satisfied = result.sync_round is not None and result.sync_round <= result.bound
    summary = {
        "mode": "fast",
        "nodes": spec.topology.node_count,
        "diameter": spec.topology.diameter,
        "T": spec.period,
        "q": spec.spacing,
        "horizon": result.horizon,
        "sync_round": result.sync_round,
        "bound": result.bound,
        "bound_satisfied": satisfied,
        "closure_verified": result.closure_verified,
        "invariant_violations": len(violations),
    }
    if violations:
        return summary, EXIT_INVARIANT
    if not satisfied:
        return summary, EXIT_BOUND
    return summary, EXIT_OK


def _run_selfstab_spec(spec: ExperimentSpec) -> tuple[dict, int]:
    if spec.initial is None:
        raise ValueError("selfstab mode needs initial configs")
    node_bound = (
        spec.node_bound if spec.node_bound is not None else spec.topology.node_count
    )
    budget = sync_round_budget(node_bound, spec.period, spec.spacing)
    result, trace = run_selfstab(
        spec.topology, spec.initial, spec.period, spacing=spec.spacing,
        node_bound=node_bound, horizon=spec.horizon,
    )
    violations = check_stab_invariants(trace, budget)
    if spec.out:
        _write_trace(trace, spec.out, spec.out_format)
    summary = {
        "mode": "selfstab",
        "nodes": spec.topology.node_count,
        "T": spec.period,
        "q": spec.spacing,
        "N": node_bound,
        "budget": budget,
        "horizon": result.horizon,
        "legitimate_round": result.legitimate_round,
        "legit_streak": result.legit_streak,
        "closure_verified": result.closure_verified,
        "all_lock_round": result.all_lock_round,
        "entered_pulse": result.entered_pulse,
        "pulse_seen": result.pulse_seen,
        "invariant_violations": len(violations),
    }
    if violations:
        return summary, EXIT_INVARIANT
    if result.legitimate_round is None:
        return summary, EXIT_BOUND
    return summary, EXIT_OK


def _run_slots_spec(spec: ExperimentSpec) -> tuple[dict, int]:
    if spec.schedule is None:
        raise ValueError("slot mode needs a schedule")
    result, records = run_slots(
        spec.topology, spec.offsets, spec.schedule, spec.period,
        spacing=spec.spacing, slot_duration=spec.slot_duration,
        time_horizon=spec.time_horizon,
    )
    if spec.out:
        write_slot_csv(records, spec.out)
    summary = {
        "mode": "slots",
        "nodes": spec.topology.node_count,
        "T": spec.period,
        "q": spec.spacing,
        "slot_duration": spec.slot_duration,
        "sync_time": result.sync_time,
        "slots_run": result.rounds_run,
        "records": len(records),
    }
    return summary, (EXIT_OK if result.sync_time is not None else EXIT_BOUND)


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    """Presets flag defaults from BEEPSYNC_* variables; explicit flags win."""
    for action in parser._actions:
        longs = [opt for opt in action.option_strings if opt.startswith("--")]
        if not longs:
            continue
        raw = os.environ.get(ENV_PREFIX + longs[0][2:].replace("-", "_").upper())
        if raw is None:
            continue
        if isinstance(action, argparse._AppendAction):
            value = raw.split(",")
        elif isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            value = raw.lower() in ("1", "true", "yes")
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (TypeError, ValueError):
                parser.error(f"bad value {raw!r} in ${ENV_PREFIX}{longs[0][2:].upper()}")
        else:
            value = raw
        action.default = value
        action.required = False


def _parse_wakes(pairs: list[str] | None) -> dict[int, int] | None:
    if not pairs:
        return None
    wakes = {}
    for pair in pairs:
        node_text, sep, round_text = pair.partition("=")
        if not sep:
            raise ValueError(f"--wake expects NODE=ROUND, got {pair!r}")
        wakes[int(node_text)] = int(round_text)
    return wakes


def _resolve_topology(spec: str, size: int | None, seed: int | None) -> Topology:
    if spec.startswith("file:"):
        return load_topology(spec[len("file:"):])
    kind = "random_connected" if spec == "random" else spec
    if kind not in KINDS:
        raise ValueError(f"unknown topology {spec!r}")
    if size is None:
        raise ValueError("--n is required for generated topologies")
    return generate(kind, size, seed=seed)


def _write_trace(trace, path: str, out_format: str) -> None:
    if out_format == "csv":
        write_trace_csv(trace, path)
    else:
        write_trace_jsonl(trace, path)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, indent=2, sort_keys=True))


def _cmd_run_fast(args: argparse.Namespace) -> int:
    topology = _resolve_topology(args.topology, args.n, args.seed)
    wakes = _parse_wakes(args.wake)
    if wakes is not None:
        schedule = ActivationSchedule(wakes)
    elif args.seed is not None:
        schedule = random_schedule(
            topology.node_count, args.seed, max_round=2 * args.T
        )
    else:
        raise ValueError("either --wake or --seed must be given")
    summary, code = run(
        ExperimentSpec(
            mode="fast", topology=topology, period=args.T, spacing=args.q,
            schedule=schedule, horizon=args.horizon,
            out=args.out, out_format=args.format,
        )
    )
    _emit(summary)
    return code


def _cmd_run_selfstab(args: argparse.Namespace) -> int:
    topology = _resolve_topology(args.topology, args.n, args.seed)
    node_bound = args.N if args.N is not None else topology.node_count
    budget = sync_round_budget(node_bound, args.T, args.q)
    if args.init_file:
        initial = load_configs(args.init_file)
    elif args.seed is not None:
        initial = random_configs(
            topology.node_count, args.T, node_bound, budget, args.seed
        )
    else:
        raise ValueError("either --init-file or --seed must be given")
    summary, code = run(
        ExperimentSpec(
            mode="selfstab", topology=topology, period=args.T, spacing=args.q,
            node_bound=node_bound, initial=initial, horizon=args.horizon,
            out=args.out, out_format=args.format,
        )
    )
    _emit(summary)
    return code


def _cmd_run_slots(args: argparse.Namespace) -> int:
    topology = _resolve_topology(args.topology, args.n, args.seed)
    wakes = _parse_wakes(args.wake)
    if wakes is None:
        raise ValueError("--wake NODE=SLOT is required for slot runs")
    offsets = None
    if args.offsets:
        offsets = [float(part) for part in args.offsets.split(",")]
    summary, code = run(
        ExperimentSpec(
            mode="slots", topology=topology, period=args.T, spacing=args.q,
            schedule=ActivationSchedule(wakes), offsets=offsets,
            slot_duration=args.slot_duration, time_horizon=args.time_horizon,
            out=args.out, out_format=args.format,
        )
    )
    _emit(summary)
    return code


def _cmd_analyze_fsm(args: argparse.Namespace) -> int:
    if args.automaton:
        automaton = load_automaton(args.automaton)
    elif args.protocol == "fast":
        automaton = extract_fast_automaton(args.T, args.q)
    elif args.protocol == "selfstab":
        node_bound = args.N if args.N is not None else 2
        automaton = extract_selfstab_automaton(args.T, args.q, node_bound)
    else:
        raise ValueError("give --automaton PATH or --protocol {fast,selfstab}")
    try:
        report = classify(automaton, args.T, node_budget=args.budget)
    except NotConstructible as exc:
        print(f"not constructible: {exc}", file=sys.stderr)
        return EXIT_USAGE
    topology, initial = report.counterexample
    certified = certify_no_sync(
        automaton, report.counterexample, args.T, node_budget=args.budget
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "automaton": format_automaton(automaton),
                    "topology": format_topology(topology),
                    "initial_states": list(initial),
                },
                fh,
                indent=2,
            )
    _emit(
        {
            "mode": "analyze",
            "states": automaton.state_count,
            "T": args.T,
            "case": report.case.value,
            "beep_cycle_length": len(report.beep_cycle) - 1,
            "silence_cycle_length": len(report.silence_cycle) - 1,
            "counterexample_nodes": topology.node_count,
            "initial_states": list(initial),
            "certified_no_sync": certified,
        }
    )
    return EXIT_OK


def _parse_range(text: str) -> range:
    lo_text, sep, hi_text = text.partition(":")
    if not sep:
        value = int(text)
        return range(value, value + 1)
    return range(int(lo_text), int(hi_text) + 1)


def _fast_row(key: tuple) -> dict:
    kind, n, period, spacing, schedule_kind, seed, horizon = key
    row = {
        "mode": "fast",
        "kind": kind,
        "n": n,
        "T": period,
        "q": spacing,
        "schedule": schedule_kind,
        "seed": seed,
    }
    try:
        topology = generate(
            "random_connected" if kind == "random" else kind, n, seed=seed
        )
        if schedule_kind == "single":
            schedule = random_schedule(n, seed, max_round=0, max_sources=1)
        else:
            schedule = random_schedule(n, seed, max_round=2 * period)
        result, _ = run_fast(
            topology, schedule, period, spacing=spacing,
            horizon=horizon, record_trace=False,
        )
        row["sync_round"] = result.sync_round
        row["bound"] = result.bound
        row["ok"] = result.sync_round is not None and result.sync_round <= result.bound
    except Exception as exc:
        row["error"] = str(exc)
        row["ok"] = False
    return row


def _stab_row(key: tuple) -> dict:
    kind, n, period, spacing, seed, horizon = key
    row = {
        "mode": "selfstab",
        "kind": kind,
        "n": n,
        "T": period,
        "q": spacing,
        "seed": seed,
    }
    try:
        topology = generate(
            "random_connected" if kind == "random" else kind, n, seed=seed
        )
        budget = sync_round_budget(n, period, spacing)
        initial = random_configs(n, period, n, budget, seed)
        result, _ = run_selfstab(
            topology, initial, period, spacing=spacing, node_bound=n,
            horizon=horizon, stability_window=4 * period, record_trace=False,
        )
        row["legitimate_round"] = result.legitimate_round
        row["ok"] = result.legitimate_round is not None
    except Exception as exc:
        row["error"] = str(exc)
        row["ok"] = False
    return row


SWEEP_FIELDS = (
    "mode", "kind", "n", "T", "q", "schedule", "seed",
    "sync_round", "legitimate_round", "bound", "ok", "error",
)


def _cmd_sweep(args: argparse.Namespace) -> int:
    kinds = [k for k in args.kinds.split(",") if k]
    sizes = _parse_range(args.n_range)
    periods = _parse_range(args.T_range)
    seeds = range(args.seeds)
    keys = []
    if args.mode == "fast":
        schedule_kinds = (
            ("single", "multi") if args.schedule == "both" else (args.schedule,)
        )
        for kind in kinds:
            for n in sizes:
                for period in periods:
                    for schedule_kind in schedule_kinds:
                        for seed in seeds:
                            keys.append(
                                (kind, n, period, args.q, schedule_kind,
                                 seed, args.horizon)
                            )
        worker = _fast_row
    else:
        for kind in kinds:
            for n in sizes:
                for period in periods:
                    for seed in seeds:
                        keys.append((kind, n, period, args.q, seed, args.horizon))
        worker = _stab_row

    if args.jobs > 1 and keys:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(worker, keys, chunksize=16))
    else:
        rows = [worker(key) for key in keys]

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
            writer.writeheader()
            for row in rows:
                writer.writerow({field: row.get(field, "") for field in SWEEP_FIELDS})

    sync_key = "sync_round" if args.mode == "fast" else "legitimate_round"
    measured = [row[sync_key] for row in rows if row.get(sync_key) is not None]
    errors = sum(1 for row in rows if "error" in row)
    summary = {
        "mode": args.mode,
        "rows": len(rows),
        "converged": len(measured),
        "errors": errors,
        "all_ok": all(row["ok"] for row in rows) if rows else True,
        "max_" + sync_key: max(measured) if measured else None,
        "mean_" + sync_key: (
            round(sum(measured) / len(measured), 6) if measured else None
        ),
    }
    _emit(summary)
    if errors:
        return EXIT_INVARIANT
    if not summary["all_ok"]:
        return EXIT_BOUND
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, *, default_q: int) -> None:
    parser.add_argument("--topology", default="line",
                        help="line|star|clique|ring|random|file:PATH")
    parser.add_argument("--n", type=int, default=None, help="node count")
    parser.add_argument("--T", type=int, required=True, help="clock period")
    parser.add_argument("--q", type=int, default=default_q, help="checkpoint spacing")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="trace output path")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beepsync",
        description="Beeping-model clock synchronization simulators and analyzers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fast = sub.add_parser("run-fast", help="synchronous fast-protocol run")
    _add_common(p_fast, default_q=4)
    p_fast.add_argument("--wake", action="append", default=None, metavar="NODE=ROUND")
    p_fast.add_argument("--horizon", type=int, default=None)
    p_fast.set_defaults(func=_cmd_run_fast)

    p_stab = sub.add_parser("run-selfstab", help="self-stabilizing run")
    _add_common(p_stab, default_q=5)
    p_stab.add_argument("--N", type=int, default=None, help="node bound the protocol uses")
    p_stab.add_argument("--init-file", default=None)
    p_stab.add_argument("--horizon", type=int, default=None)
    p_stab.set_defaults(func=_cmd_run_selfstab)

    p_slots = sub.add_parser("run-slots", help="continuous-time slot run")
    _add_common(p_slots, default_q=4)
    p_slots.add_argument("--wake", action="append", default=None, metavar="NODE=SLOT")
    p_slots.add_argument("--offsets", default=None, help="comma separated slot offsets")
    p_slots.add_argument("--slot-duration", type=float, default=1.0)
    p_slots.add_argument("--time-horizon", type=float, default=None)
    p_slots.set_defaults(func=_cmd_run_slots)

    p_fsm = sub.add_parser("analyze-fsm", help="counterexample construction")
    p_fsm.add_argument("--automaton", default=None, help="automaton text file")
    p_fsm.add_argument("--protocol", choices=("fast", "selfstab"), default=None)
    p_fsm.add_argument("--T", type=int, required=True)
    p_fsm.add_argument("--q", type=int, default=4)
    p_fsm.add_argument("--N", type=int, default=None)
    p_fsm.add_argument("--budget", type=int, default=64, help="node budget")
    p_fsm.add_argument("--out", default=None, help="counterexample output path")
    p_fsm.set_defaults(func=_cmd_analyze_fsm)

    p_sweep = sub.add_parser("sweep", help="grid of seeded runs")
    p_sweep.add_argument("--mode", choices=("fast", "selfstab"), default="fast")
    p_sweep.add_argument("--kinds", default="line,ring,star")
    p_sweep.add_argument("--n-range", default="2:10", help="LO:HI inclusive")
    p_sweep.add_argument("--T-range", default="4:16", help="LO:HI inclusive")
    p_sweep.add_argument("--q", type=int, default=4)
    p_sweep.add_argument("--seeds", type=int, default=20)
    p_sweep.add_argument("--schedule", choices=("single", "multi", "both"), default="both")
    p_sweep.add_argument("--horizon", type=int, default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", default=None, help="row CSV output path")
    p_sweep.set_defaults(func=_cmd_sweep)

    for child in sub.choices.values():
        _apply_env_defaults(child)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
