"""Oracle-guided key recovery against latch-locked netlists.

Two attacks live here. `run_combinational_attack` is the classic DI loop
for stateless circuits: find an input on which two surviving keys disagree,
ask the oracle, pin both key copies to the answer, repeat until the miter
goes Unsat, then read any surviving key off a final model.

`run_attack` generalizes to latched circuits where reset does not determine
the latch state. The session unrolls a two-copy miter over shared inputs,
reset choices and a shared unknown initial state; loop and timing-window
key constraints plus a structural inequivalence circuit are conjoined from
the start, so every model is a pair of distinct constraint-satisfying keys.
Each round finds a distinguishing input sequence (DIS) by deepening the
unroll, extends the *same* oracle session with the new cycles (the physical
device cannot be rewound, so one contiguous IO relationship is formed), and
pins both copies to the observed outputs. When no such pair remains at the
accumulated trace length, a single-copy problem over the same trace yields
the candidate (key, initial state), which is validated against the correct
key on a bounded miter before `Solved` is reported.

All verdicts are bounded: depth grows by one clock cycle (two half-frames)
per failed DIS probe up to `max_depth`, with a geometric conflict budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .cnf import (FALSE, CnfProblem, Miter, SharedStimulus, Unroller,
                  build_miter, encode_frame, key_const_lits, key_var_lits)
from .constraints import (KeyConstraintSet, gen_loop_constraints,
                          gen_timing_constraints)
from .equivalence import (InequivalenceCircuit, build_counters,
                          build_inequivalence_circuit)
from .netlist import KeyVector, Netlist
from .sat import SAT, UNKNOWN, UNSAT
from .sim import (OracleSession, OscillationError, SimulationError, Trace,
                  TraceStep, compiled_sim, simulate)
from .timing import ClockSpec, DelayModel


class AttackError(Exception):
    """Attack failure with the stage that produced it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class AttackBudgets:
    wall_s: float = 60.0
    max_depth: int = 64          # unroll bound, half-cycles
    base_conflicts: int = 200_000
    conflict_growth: float = 1.4  # per clock cycle of unroll depth
    validate_depth: int = 32
    validate_retries: int = 16   # extraction re-draws after a failed validation


@dataclass
class Dis:
    """Distinguishing input sequence: full session stimulus, one
    (input bits, reset) pair per clock cycle, covering `depth` frames."""
    cycles: list[tuple[str, int]]
    depth: int


@dataclass
class TerminationVerdict:
    terminated: bool
    witness: tuple[KeyVector, KeyVector] | None = None
    unknown: bool = False


@dataclass
class ValidationReport:
    passed: bool
    counterexample: Trace | None = None
    unknown: bool = False

    def __bool__(self) -> bool:
        return self.passed


@dataclass
class AttackResult:
    status: str                                  # Solved | Timeout | Infeasible
    key: KeyVector | None = None
    initial_state: dict[str, int] | None = None
    evidence: tuple[KeyVector, KeyVector] | None = None
    io_trace: list[tuple[str, int]] = field(default_factory=list)
    oracle_outputs: list[tuple[str, str]] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


@dataclass
class AttackSession:
    """One incremental attack instance. The problem only ever grows:
    learned IO constraints are plain unit clauses, so everything proved
    in earlier rounds stays proved."""

    n: Netlist
    dm: DelayModel
    clk: ClockSpec
    oracle: OracleSession
    budgets: AttackBudgets
    problem: CnfProblem
    stim: SharedStimulus
    miter: Miter
    key_a: dict[str, int]
    key_b: dict[str, int]
    cset: KeyConstraintSet
    ineq: InequivalenceCircuit
    io_trace: list[tuple[str, int]] = field(default_factory=list)
    oracle_outputs: list[tuple[str, str]] = field(default_factory=list)
    rounds: list[dict] = field(default_factory=list)
    unknown: bool = False
    solver_time_s: float = 0.0
    t0: float = field(default_factory=time.monotonic)

    @property
    def depth(self) -> int:
        return self.miter.depth

    def remaining(self) -> float:
        return self.budgets.wall_s - (time.monotonic() - self.t0)

    def _solve(self, assumptions=(), max_conflicts=None):
        budget = self.remaining()
        if budget <= 0:
            self.unknown = True
            return None
        res = self.problem.solve(assumptions, max_conflicts=max_conflicts,
                                 time_budget=budget)
        self.solver_time_s += res.time_s
        return res

    def _conflict_cap(self, depth: int) -> int:
        b = self.budgets
        return int(b.base_conflicts * b.conflict_growth ** (depth // 2))

    def _model_key(self, key_lits: dict[str, int], raw) -> KeyVector:
        return KeyVector(tuple(
            int(self.problem.eval_lit(key_lits[k], raw))
            for k in self.n.key_inputs))

    def _model_init(self, raw) -> dict[str, int]:
        return {c.name: int(self.problem.eval_lit(self.stim.init_lit(c.name), raw))
                for c in list(self.n.latches) + list(self.n.flip_flops)}

    def stats(self) -> dict:
        return {
            "dis_count": len(self.rounds),
            "final_depth": self.depth,
            "solver_time_s": round(self.solver_time_s, 3),
            "cycles_queried": len(self.io_trace),
            "wall_s": round(time.monotonic() - self.t0, 3),
        }


def new_session(locked: Netlist, dm: DelayModel, clk: ClockSpec,
                oracle: OracleSession,
                budgets: AttackBudgets | None = None) -> AttackSession:
    """Set up the two-copy miter with constraints and the inequivalence
    circuit asserted. The oracle must be fresh: its state becomes part of
    the learned trace, so earlier foreign queries would poison it."""
    if oracle.n.inputs != locked.inputs or oracle.n.outputs != locked.outputs:
        raise AttackError("session", "oracle IO does not match the netlist")
    if len(oracle.n.key_inputs) != len(locked.key_inputs):
        raise AttackError("session", "oracle key width does not match")
    if oracle.cycles_run != 0:
        raise AttackError("session", "oracle session already consumed "
                          f"{oracle.cycles_run} cycles")
    budgets = budgets or AttackBudgets()
    cset = gen_loop_constraints(locked).merge(
        gen_timing_constraints(locked, dm, clk))
    ineq = build_inequivalence_circuit(locked, build_counters(locked, dm))

    p = CnfProblem()
    stim = SharedStimulus(p)
    ka = key_var_lits(p, locked, ":A")
    kb = key_var_lits(p, locked, ":B")
    m = Miter(p,
              Unroller(p, locked, ka, stim, tag="A:"),
              Unroller(p, locked, kb, stim, tag="B:"))
    # Strong loop form on both copies: every model key must be replayable
    # in the simulator, not merely combinational-loop-free.
    cset.emit(p, ka, strong_loops=True)
    cset.emit(p, kb, strong_loops=True)
    p.add_assert(ineq.instantiate(p, ka, kb))
    if locked.reset_net is not None:
        p.add_assert(stim.reset_lit(0))

    return AttackSession(locked, dm, clk, oracle, budgets,
                         p, stim, m, ka, kb, cset, ineq)


def _dis_from_model(s: AttackSession, raw, depth: int) -> Dis:
    p, n = s.problem, s.n
    cycles = []
    for c in range(depth // 2):
        bits = "".join(
            "1" if p.eval_lit(s.stim.input_lit(net, c), raw) else "0"
            for net in n.inputs)
        if n.reset_net is not None:
            rst = int(p.eval_lit(s.stim.reset_lit(c), raw))
        else:
            rst = 1 if c == 0 else 0
        cycles.append((bits, rst))
    return Dis(cycles, depth)


def _self_check_dis(s: AttackSession, dis: Dis, raw) -> None:
    """Replay both model keys on the DIS; they must visibly disagree.
    Catches encoder/simulator divergence before the oracle is spent."""
    ka = s._model_key(s.key_a, raw)
    kb = s._model_key(s.key_b, raw)
    init = s._model_init(raw)
    steps = []
    for bits, rst in dis.cycles:
        steps.append(TraceStep("H", rst, bits))
        steps.append(TraceStep("L", rst, bits))
    trace = Trace(steps, initial_state=init)
    try:
        ta = simulate(s.n, ka, trace)
        tb = simulate(s.n, kb, trace)
    except OscillationError as e:
        raise AttackError("dis", f"model key oscillates in replay: {e}")
    if all(a.outputs == b.outputs
           for a, b in zip(ta.steps[:dis.depth], tb.steps[:dis.depth])):
        raise AttackError("dis", "self-check failed: model keys agree on "
                          "the claimed distinguishing sequence")


def find_dis(s: AttackSession) -> Dis | None:
    """Deepen the miter one clock cycle at a time until some pair of
    surviving keys disagrees on outputs. Frames already pinned to the
    oracle trace cannot differ, so only new frames are probed. Returns
    None when the depth bound is exhausted (s.unknown stays False) or a
    budget ran out (s.unknown set)."""
    target = max(2, 2 * len(s.io_trace) + 2)
    while target <= s.budgets.max_depth:
        act = s.miter.diff_assumption(target)
        res = s._solve([act], max_conflicts=s._conflict_cap(target))
        if res is None or res.status == UNKNOWN:
            s.unknown = True
            return None
        if res.status == SAT:
            dis = _dis_from_model(s, res.raw, target)
            _self_check_dis(s, dis, res.raw)
            return dis
        target += 2
    return None


def add_io_constraint(s: AttackSession, extension: list[tuple[str, int]],
                      oracle_outputs: list[tuple[str, str]]) -> AttackSession:
    """Pin the extension's inputs/resets and both copies' outputs to the
    oracle's answer. Unit clauses only, so the session stays monotone."""
    if len(extension) != len(oracle_outputs):
        raise AttackError("io", "extension and oracle response length differ")
    if not extension:
        return s
    p, n = s.problem, s.n
    start = len(s.io_trace)
    for i, (bits, rst) in enumerate(extension):
        c = start + i
        for net, b in zip(n.inputs, bits):
            lit = s.stim.input_lit(net, c)
            p.add_assert(lit if b == "1" else lit ^ 1)
        if n.reset_net is not None:
            lit = s.stim.reset_lit(c)
            p.add_assert(lit if rst else lit ^ 1)
    s.miter.extend_to(2 * (start + len(extension)))
    for i, (hi, lo) in enumerate(oracle_outputs):
        c = start + i
        for unr in (s.miter.a, s.miter.b):
            for f, bits in ((2 * c, hi), (2 * c + 1, lo)):
                frame = unr.frames[f]
                for net, b in zip(n.outputs, bits):
                    lit = frame[net]
                    p.add_assert(lit if b == "1" else lit ^ 1)
    s.io_trace.extend(extension)
    s.oracle_outputs.extend(oracle_outputs)
    return s


def termination_check(s: AttackSession) -> TerminationVerdict:
    """Bounded to the trace accumulated so far: does any pair of distinct
    constraint-satisfying keys (with some shared initial state) still agree
    with the whole trace? Unsat means the surviving keys form one
    equivalence class at this bound."""
    res = s._solve((), max_conflicts=s._conflict_cap(max(s.depth, 2)))
    if res is None or res.status == UNKNOWN:
        return TerminationVerdict(False, None, unknown=True)
    if res.status == UNSAT:
        return TerminationVerdict(True)
    return TerminationVerdict(
        False, (s._model_key(s.key_a, res.raw), s._model_key(s.key_b, res.raw)))


def _extract_candidate(s: AttackSession, blocked: tuple[KeyVector, ...] = ()):
    """Single-copy problem over the accumulated trace: any model is a
    (key, initial state) pair indistinguishable from the oracle so far.
    Fresh problem because the session permanently asserts inequivalence.
    Keys in `blocked` are excluded (they failed a later validation)."""
    p = CnfProblem()
    stim = SharedStimulus(p)
    k = key_var_lits(p, s.n)
    unr = Unroller(p, s.n, k, stim)
    unr.extend_to(max(2, 2 * len(s.io_trace)))
    for bk in blocked:
        # at least one key bit must differ from the blocked assignment
        p.add_clause([k[name] ^ bk.bits[i]
                      for i, name in enumerate(s.n.key_inputs)])
    if s.n.reset_net is not None:
        p.add_assert(stim.reset_lit(0))
    for c, (bits, rst) in enumerate(s.io_trace):
        for net, b in zip(s.n.inputs, bits):
            lit = stim.input_lit(net, c)
            p.add_assert(lit if b == "1" else lit ^ 1)
        if s.n.reset_net is not None:
            lit = stim.reset_lit(c)
            p.add_assert(lit if rst else lit ^ 1)
    for c, (hi, lo) in enumerate(s.oracle_outputs):
        for f, bits in ((2 * c, hi), (2 * c + 1, lo)):
            frame = unr.frames[f]
            for net, b in zip(s.n.outputs, bits):
                lit = frame[net]
                p.add_assert(lit if b == "1" else lit ^ 1)
    s.cset.emit(p, k, strong_loops=True)
    res = p.solve(time_budget=max(s.remaining(), 5.0))
    s.solver_time_s += res.time_s
    if res.status == UNKNOWN:
        return None
    if res.status == UNSAT:
        return "infeasible"
    key = KeyVector(tuple(int(p.eval_lit(k[name], res.raw))
                          for name in s.n.key_inputs))
    init = {c.name: int(p.eval_lit(stim.init_lit(c.name), res.raw))
            for c in list(s.n.latches) + list(s.n.flip_flops)}
    return key, init


def oracle_key(oracle: OracleSession) -> KeyVector:
    """Key embedded in an oracle handle; used only for final validation
    (the attack loop itself never reads it)."""
    return KeyVector(tuple(int(bool(oracle.key_lanes.get(k, 0)))
                           for k in oracle.n.key_inputs))


def run_attack(locked: Netlist, dm: DelayModel, clk: ClockSpec,
               oracle: OracleSession,
               budgets: AttackBudgets | None = None) -> AttackResult:
    budgets = budgets or AttackBudgets()
    if locked.num_key_bits == 0:
        return AttackResult("Solved", KeyVector(()), {},
                            stats={"dis_count": 0, "final_depth": 0,
                                   "solver_time_s": 0.0, "cycles_queried": 0,
                                   "wall_s": 0.0})
    s = new_session(locked, dm, clk, oracle, budgets)
    verdict: TerminationVerdict | None = None
    while True:
        dis = find_dis(s)
        if dis is None:
            if s.unknown:
                return AttackResult(
                    "Timeout", evidence=verdict.witness if verdict else None,
                    io_trace=list(s.io_trace),
                    oracle_outputs=list(s.oracle_outputs), stats=s.stats())
            break  # no distinguishing pair within the depth bound
        extension = dis.cycles[len(s.io_trace):]
        try:
            outs = s.oracle.query(extension)
        except SimulationError as e:
            raise AttackError("oracle", str(e))
        add_io_constraint(s, extension, outs)
        verdict = termination_check(s)
        s.rounds.append({"round": len(s.rounds), "depth": dis.depth,
                         "cycles": len(s.io_trace),
                         "terminated": verdict.terminated})
        if verdict.terminated:
            break
        if verdict.unknown and s.remaining() <= 0:
            return AttackResult("Timeout", evidence=None,
                                io_trace=list(s.io_trace),
                                oracle_outputs=list(s.oracle_outputs),
                                stats=s.stats())

    # A trace-consistent key can be a relabeled twin of the correct key
    # (retimed phases, or a latch ring carrying its state one slot over)
    # whose agreement only shows up under a matching initial state. The
    # shared-init validation miter rejects those, so failed keys are
    # blocked and extraction is re-drawn; the correct key itself always
    # validates, which bounds the loop.
    blocked: list[KeyVector] = []
    while True:
        cand = _extract_candidate(s, tuple(blocked))
        if cand is None:
            return AttackResult("Timeout", io_trace=list(s.io_trace),
                                oracle_outputs=list(s.oracle_outputs),
                                stats=s.stats())
        if cand == "infeasible":
            if blocked:
                raise AttackError(
                    "validate", f"all {len(blocked)} trace-consistent keys "
                    f"fail bounded equivalence at depth "
                    f"{budgets.validate_depth}")
            return AttackResult("Infeasible", io_trace=list(s.io_trace),
                                oracle_outputs=list(s.oracle_outputs),
                                stats=s.stats())
        key, init = cand
        report = validate_key(locked, oracle_key(s.oracle), key, init,
                              depth=budgets.validate_depth)
        if report.passed:
            break
        blocked.append(key)
        if len(blocked) > budgets.validate_retries:
            raise AttackError(
                "validate", "extracted keys keep failing bounded "
                f"equivalence at depth {budgets.validate_depth} "
                f"({len(blocked)} blocked"
                + ("" if report.counterexample is None else
                   f", last counterexample "
                   f"{len(report.counterexample.steps)} steps") + ")")
    stats = s.stats()
    stats["validate_retries"] = len(blocked)
    return AttackResult("Solved", key, init,
                        io_trace=list(s.io_trace),
                        oracle_outputs=list(s.oracle_outputs),
                        stats=stats)


def validate_key(locked: Netlist, correct_key: KeyVector,
                 candidate: KeyVector, initial_state: dict[str, int],
                 depth: int = 32,
                 time_budget: float | None = None) -> ValidationReport:
    """Bounded miter with one copy fixed to the correct key, one to the
    candidate, shared inputs and the candidate's initial state on both.
    Unsat up to `depth` half-cycles passes; a model is a counterexample."""
    if depth < 2:
        raise ValueError("validation depth must cover at least one cycle")
    p = CnfProblem()
    m = build_miter(p, locked, depth, key_a=correct_key, key_b=candidate)
    for name, bit in (initial_state or {}).items():
        lit = p.names.get(f"init:{name}")
        if lit is None:
            raise AttackError("validate", f"unknown state element {name!r}")
        p.add_assert(lit if bit else lit ^ 1)
    if locked.reset_net is not None:
        p.add_assert(p.names["reset@0"])
    res = p.solve([m.diff_assumption(depth)], time_budget=time_budget)
    if res.status == UNSAT:
        return ValidationReport(True)
    if res.status == UNKNOWN:
        return ValidationReport(False, unknown=True)
    steps = []
    for c in range((depth + 1) // 2):
        bits = "".join(
            "1" if p.eval_lit(p.names[f"in:{net}@{c}"], res.raw) else "0"
            for net in locked.inputs)
        if locked.reset_net is not None:
            rst = int(p.eval_lit(p.names[f"reset@{c}"], res.raw))
        else:
            rst = 1 if c == 0 else 0
        steps.append(TraceStep("H", rst, bits))
        if 2 * c + 1 < depth:
            steps.append(TraceStep("L", rst, bits))
    init = {c.name: int(p.eval_lit(p.names[f"init:{c.name}"], res.raw))
            for c in list(locked.latches) + list(locked.flip_flops)}
    return ValidationReport(False, Trace(steps, initial_state=init))


def key_trace_consistent(locked: Netlist, key: KeyVector,
                         io_trace: list[tuple[str, int]],
                         oracle_outputs: list[tuple[str, str]],
                         time_budget: float | None = None) -> bool:
    """Audit helper: could `key` (under some initial state) have produced
    this trace? Exact over all initial states via one single-copy solve."""
    p = CnfProblem()
    stim = SharedStimulus(p)
    unr = Unroller(p, locked, key_const_lits(locked, key), stim)
    unr.extend_to(2 * len(io_trace))
    for c, (bits, rst) in enumerate(io_trace):
        for net, b in zip(locked.inputs, bits):
            lit = stim.input_lit(net, c)
            p.add_assert(lit if b == "1" else lit ^ 1)
        if locked.reset_net is not None:
            lit = stim.reset_lit(c)
            p.add_assert(lit if rst else lit ^ 1)
    for c, (hi, lo) in enumerate(oracle_outputs):
        for f, bits in ((2 * c, hi), (2 * c + 1, lo)):
            frame = unr.frames[f]
            for net, b in zip(locked.outputs, bits):
                lit = frame[net]
                p.add_assert(lit if b == "1" else lit ^ 1)
    res = p.solve(time_budget=time_budget)
    if res.status == UNKNOWN:
        raise AttackError("audit", "consistency check exceeded its budget")
    return res.status == SAT


# -- combinational baseline ---------------------------------------------------


def comb_oracle(n: Netlist, key: KeyVector):
    """IO oracle for the combinational attack: one High half-cycle,
    reset inactive, zeroed state."""
    cs = compiled_sim(n)
    lanes = {k: key.bits[i] for k, i in n.key_index.items()}
    init = {c.name: 0 for c in list(n.latches) + list(n.flip_flops)}
    pos = {net: i for i, net in enumerate(n.inputs)}

    def query(bits: str) -> str:
        rows = cs.run(lanes, init, 1,
                      lambda net, _c: int(bits[pos[net]]), lambda _c: 0, 1)
        return "".join(str(v & 1) for v in rows[0])

    return query


def run_combinational_attack(locked: Netlist, oracle,
                             budgets: AttackBudgets | None = None) -> KeyVector:
    """Classic DI loop. The netlist is treated as stateless: one High
    frame, reset held low. Latches are tolerated (their held state becomes
    a per-query unknown shared by both copies); flip-flops are not."""
    budgets = budgets or AttackBudgets()
    n = locked
    if n.flip_flops:
        raise AttackError("comb", "circuit holds flip-flops; use run_attack")
    if n.num_key_bits == 0:
        return KeyVector(())
    t0 = time.monotonic()

    def remaining() -> float:
        return budgets.wall_s - (time.monotonic() - t0)

    p = CnfProblem()
    stim = SharedStimulus(p)
    ka = key_var_lits(p, n, ":A")
    kb = key_var_lits(p, n, ":B")
    m = Miter(p,
              Unroller(p, n, ka, stim, tag="A:"),
              Unroller(p, n, kb, stim, tag="B:"))
    m.extend_to(1)
    if n.reset_net is not None:
        p.add_assert(stim.reset_lit(0) ^ 1)

    while True:
        if remaining() <= 0:
            raise AttackError("budget", "wall clock exhausted in DI search")
        res = p.solve([m.diff_assumption(1)],
                      max_conflicts=budgets.base_conflicts,
                      time_budget=remaining())
        if res.status == UNKNOWN:
            raise AttackError("budget", "solver budget exhausted in DI search")
        if res.status == UNSAT:
            break
        bits = "".join(
            "1" if p.eval_lit(stim.input_lit(net, 0), res.raw) else "0"
            for net in n.inputs)
        out = oracle(bits)
        if len(out) != len(n.outputs):
            raise AttackError("oracle", "oracle output width mismatch")
        held = {c.name: p.new_var() for c in n.latches}
        for klits in (ka, kb):
            frame = encode_frame(p, n, True, klits, held, FALSE)
            for net, b in zip(n.inputs, bits):
                lit = frame[net]
                p.add_assert(lit if b == "1" else lit ^ 1)
            for net, b in zip(n.outputs, out):
                lit = frame[net]
                p.add_assert(lit if b == "1" else lit ^ 1)

    final = p.solve(time_budget=max(remaining(), 5.0))
    if final.status != SAT:
        raise AttackError("extract",
                          f"no key survives the accumulated queries "
                          f"({final.status})")
    return KeyVector(tuple(int(p.eval_lit(ka[k], final.raw))
                           for k in n.key_inputs))
