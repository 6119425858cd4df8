"""Latch-based logic locking: lock netlists with keyed latches, reason
about the surviving key space, and attack locked designs through a
black-box oracle.

The public surface mirrors the pipeline: parse a `.bench` netlist, `lock`
it, hand the locked design plus delay model to analysis (`constraints`,
`equivalence`) or to the oracle-guided attack (`attack`). The `latchlock`
console script fronts the same operations for batch runs.
"""

__version__ = "0.1.0"

from .netlist import (CellKind, KeyVector, LatchMode, Netlist, NetlistError,
                      validate)
from .bench import (BenchParseError, load_key, parse_bench, parse_bench_file,
                    save_key, write_bench, write_bench_file)
from .timing import (ClockSpec, DelayModel, TimingError, arrival_and_slack,
                     enumerate_latch_paths, load_delay_spec, dump_delay_spec)
from .sim import (OracleSession, SimulationError, Trace, TraceStep,
                  random_trace, simulate)
from .locking import LockConfig, LockError, LockResult, default_clock, lock
from .constraints import (CountLimitError, count_valid_keys,
                          gen_loop_constraints, gen_timing_constraints)
from .equivalence import bounded_distinguishable, build_counters, keys_equivalent
from .attack import (AttackBudgets, AttackError, AttackResult, run_attack,
                     run_combinational_attack, validate_key)

__all__ = [
    "__version__",
    "CellKind", "KeyVector", "LatchMode", "Netlist", "NetlistError", "validate",
    "BenchParseError", "load_key", "parse_bench", "parse_bench_file",
    "save_key", "write_bench", "write_bench_file",
    "ClockSpec", "DelayModel", "TimingError", "arrival_and_slack",
    "enumerate_latch_paths", "load_delay_spec", "dump_delay_spec",
    "OracleSession", "SimulationError", "Trace", "TraceStep",
    "random_trace", "simulate",
    "LockConfig", "LockError", "LockResult", "default_clock", "lock",
    "CountLimitError", "count_valid_keys", "gen_loop_constraints",
    "gen_timing_constraints",
    "bounded_distinguishable", "build_counters", "keys_equivalent",
    "AttackBudgets", "AttackError", "AttackResult", "run_attack",
    "run_combinational_attack", "validate_key",
]
