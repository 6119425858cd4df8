"""Batch command-line front end.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 budget
exhaustion. Errors print one machine-readable JSON line on stderr. All
artifacts are deterministic for fixed (inputs, seed); wall-clock numbers
live in a separate "timing" field so the rest of a result file is
byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from ._util import dump_json
from .attack import AttackBudgets, AttackError, run_attack
from .bench import load_key, parse_bench_file, save_key, write_bench_file
from .constraints import (CountLimitError, count_valid_keys,
                          gen_loop_constraints, gen_timing_constraints)
from .locking import LockConfig, LockError, default_clock, lock, manifest_to_json
from .netlist import COMB_KINDS, NetlistError
from .sim import OracleSession, SimulationError, Trace, random_trace, simulate
from .timing import ClockSpec, DelayModel, TimingError, load_delay_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_BUDGET = 3

# format versions of the JSON/CSV artifacts this build reads or writes
SCHEMAS = {"key": 1, "manifest": 1, "trace": 1, "result": 1,
           "counts": 1, "delays": 1}


def _version_text() -> str:
    lines = [f"latchlock {__version__}"]
    lines += [f"{name}-schema {v}" for name, v in sorted(SCHEMAS.items())]
    return "\n".join(lines)


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _load_delays(path: str | None, n, period: float | None):
    if path is None:
        dm, clk = DelayModel(), None
    else:
        dm, clk = load_delay_spec(Path(path).read_text())
    if period is not None:
        clk = ClockSpec(period)
    return dm, clk or default_clock(n, dm)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# -- subcommands --------------------------------------------------------------


def _cmd_lock(a) -> int:
    n = parse_bench_file(a.infile)
    dm, clk = _load_delays(a.delays, n, a.period)
    cfg = LockConfig(key_bits=a.bits, decoy_ratio=a.ratio, seed=a.seed,
                     retime_moves=a.retime)
    res = lock(n, cfg, dm, clk)
    write_bench_file(res.locked, a.out)
    if a.key:
        save_key(res.locked, res.correct_key, a.key)
    if a.manifest:
        Path(a.manifest).write_text(manifest_to_json(res.latch_manifest))
    print(dump_json({
        "key_bits": res.locked.num_key_bits,
        "latches": len(res.locked.latches),
        "out": a.out,
        "proxy_stats": res.proxy_stats,
        "seed": a.seed,
    }))
    return EXIT_OK


def _cmd_attack(a) -> int:
    locked = parse_bench_file(a.net)
    oracle_net = parse_bench_file(a.oracle_net) if a.oracle_net else locked
    okey = load_key(a.oracle_key, oracle_net)
    dm, clk = _load_delays(a.delays, locked, a.period)
    oracle = OracleSession(oracle_net, okey, state_seed=a.state_seed)
    budgets = AttackBudgets(wall_s=a.budget_s, max_depth=a.max_depth)
    res = run_attack(locked, dm, clk, oracle, budgets)
    doc = {
        "schema": SCHEMAS["result"],
        "status": res.status,
        "key": res.key.to_string() if res.key is not None else None,
        "initial_state": res.initial_state,
        "io_trace": [{"in": bits, "reset": rst} for bits, rst in res.io_trace],
        "oracle_outputs": [{"high": hi, "low": lo}
                           for hi, lo in res.oracle_outputs],
        "statistics": {
            "dis_count": res.stats.get("dis_count", 0),
            "final_depth": res.stats.get("final_depth", 0),
            "cycles_queried": res.stats.get("cycles_queried", 0),
        },
        "timing": {  # nondeterministic; kept apart from the stable fields
            "solver_time_s": res.stats.get("solver_time_s", 0.0),
            "wall_s": res.stats.get("wall_s", 0.0),
        },
    }
    if res.evidence is not None:
        doc["evidence"] = [k.to_string() for k in res.evidence]
    _emit(dump_json(doc), a.out)
    if res.status == "Solved":
        return EXIT_OK
    if res.status == "Timeout":
        return _fail(EXIT_BUDGET, "timeout",
                     f"attack budget exhausted after {doc['statistics']['dis_count']} DIS rounds")
    return _fail(EXIT_VALIDATION, "infeasible",
                 "no key is consistent with the oracle trace")


def _cmd_count_keys(a) -> int:
    n = parse_bench_file(a.net)
    dm, clk = _load_delays(a.delays, n, a.period)
    cset = gen_loop_constraints(n).merge(gen_timing_constraints(n, dm, clk))
    counts = count_valid_keys(n, cset, limit=a.bits_max)
    csv = ("bits,loop_count,timing_count,intersection\n"
           f"{n.num_key_bits},{counts['loop']},{counts['timing']},"
           f"{counts['intersection']}\n")
    _emit(csv, a.out)
    return EXIT_OK


def _cmd_simulate(a) -> int:
    n = parse_bench_file(a.net)
    key = load_key(a.key, n) if a.key else None
    trace = Trace.from_json(Path(a.trace).read_text())
    filled = simulate(n, key, trace)
    _emit(filled.to_json(), a.out)
    return EXIT_OK


def _cmd_verify(a) -> int:
    orig = parse_bench_file(a.orig)
    locked = parse_bench_file(a.locked)
    key = load_key(a.key, locked)
    mismatches = 0
    frames = 0
    for s in range(a.seeds):
        tr = random_trace(orig, a.cycles, seed=a.seed + s, state_seed=a.seed + s)
        ref = simulate(orig, None, tr)
        got = simulate(locked, key, tr)
        mismatches += sum(1 for x, y in zip(ref.steps, got.steps)
                          if x.outputs != y.outputs)
        frames += len(ref.steps)
    print(dump_json({"cycles": a.cycles, "frames_checked": frames,
                     "mismatches": mismatches, "seeds": a.seeds}))
    if mismatches:
        return _fail(EXIT_VALIDATION, "mismatch",
                     f"{mismatches} output mismatches under the given key")
    return EXIT_OK


def _cmd_stats(a) -> int:
    n = parse_bench_file(a.net)
    print(dump_json({
        "name": n.name,
        "inputs": len(n.inputs),
        "outputs": len(n.outputs),
        "cells": len(n.cells),
        "gates": sum(1 for c in n.cells if c.kind in COMB_KINDS),
        "flip_flops": len(n.flip_flops),
        "latches": len(n.latches),
        "key_bits": n.num_key_bits,
        "reset": n.reset_net,
    }))
    return EXIT_OK


# -- argument surface ----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="latchlock",
        description="Latch-based logic locking toolchain.")
    ap.add_argument("--version", action="version", version=_version_text())
    ap.add_argument("--jobs", type=int, default=1, metavar="N",
                    help="worker cap for parallel passes (currently advisory)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("lock", help="insert keyed latches into a netlist")
    p.add_argument("--in", dest="infile", required=True, metavar="BENCH")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--ratio", type=float, default=0.5,
                   help="decoy-to-converted ratio (default 0.5)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--delays", metavar="JSON")
    p.add_argument("--period", type=float, help="override clock period (ps)")
    p.add_argument("--retime", type=int, default=0,
                   help="best-effort retime passes after conversion")
    p.add_argument("--out", required=True, metavar="BENCH")
    p.add_argument("--key", metavar="JSON")
    p.add_argument("--manifest", metavar="JSON")
    p.set_defaults(func=_cmd_lock)

    p = sub.add_parser("attack", help="oracle-guided key recovery")
    p.add_argument("--net", required=True, metavar="BENCH")
    p.add_argument("--oracle-net", metavar="BENCH",
                   help="oracle netlist (defaults to --net)")
    p.add_argument("--oracle-key", required=True, metavar="JSON")
    p.add_argument("--delays", metavar="JSON")
    p.add_argument("--period", type=float)
    p.add_argument("--budget-s", type=float, default=60.0)
    p.add_argument("--max-depth", type=int, default=64,
                   help="unroll bound in half-cycles")
    p.add_argument("--state-seed", type=int, default=0,
                   help="oracle initial-state seed")
    p.add_argument("--out", metavar="JSON")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("count-keys", help="count constraint-satisfying keys")
    p.add_argument("--net", required=True, metavar="BENCH")
    p.add_argument("--delays", metavar="JSON")
    p.add_argument("--period", type=float)
    p.add_argument("--bits-max", type=int, default=24,
                   help="refuse enumeration beyond this key width")
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=_cmd_count_keys)

    p = sub.add_parser("simulate", help="fill a trace's outputs")
    p.add_argument("--net", required=True, metavar="BENCH")
    p.add_argument("--key", metavar="JSON")
    p.add_argument("--trace", required=True, metavar="JSON")
    p.add_argument("--out", metavar="JSON")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="compare original vs locked under a key")
    p.add_argument("--orig", required=True, metavar="BENCH")
    p.add_argument("--locked", required=True, metavar="BENCH")
    p.add_argument("--key", required=True, metavar="JSON")
    p.add_argument("--cycles", type=int, default=1000)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="first stimulus seed")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("stats", help="netlist census")
    p.add_argument("--net", required=True, metavar="BENCH")
    p.set_defaults(func=_cmd_stats)

    return ap


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except AttackError as e:
        code = EXIT_BUDGET if e.stage == "budget" else EXIT_VALIDATION
        return _fail(code, f"attack:{e.stage}", str(e))
    except (LockError, NetlistError, TimingError, SimulationError,
            CountLimitError) as e:
        return _fail(EXIT_VALIDATION, type(e).__name__, str(e))
    except FileNotFoundError as e:
        return _fail(EXIT_VALIDATION, "missing-file", str(e))
    except (ValueError, json.JSONDecodeError) as e:
        return _fail(EXIT_VALIDATION, "bad-input", str(e))


if __name__ == "__main__":
    sys.exit(main())
