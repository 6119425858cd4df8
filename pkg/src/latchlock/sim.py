"""Two-phase functional simulation.

Each clock cycle is two half-cycle steps: High then Low. Inputs are held
constant across both halves of a cycle; step 0 is High with reset asserted.
DFFs capture their data at the Low-to-High boundary and, on reset-covered
netlists, output 0 while reset is high. Latch semantics per (k0, k1) mode:
00 constant 0, 01 transparent-High, 10 transparent-Low, 11 always
transparent; the held value is whatever the latch output was at the end of
the previous half-cycle.

Two engines share the semantics: a compiled bit-parallel engine (one python
int per net, bit i = lane i) used by `simulate`, lane sweeps, and the oracle;
and a small three-valued interpreter behind `step_half_cycle` used for
validation, where unknown state is X. The compiled engine reports oscillation
only when a transparent loop actually fails to settle; `step_half_cycle` and
`simulate` additionally reject structurally transparent cycles up front.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ._util import rng_stream
from .netlist import (CellKind, KeyVector, LatchMode, LATCH_KINDS, Netlist,
                      topo_order)

X = None  # three-valued unknown for the interpreter


class SimulationError(Exception):
    pass


class OscillationError(SimulationError):
    """Transparent combinational loop; names the latches involved."""

    def __init__(self, frame: int, latches: tuple[str, ...], lanes: int = 0):
        self.frame = frame
        self.latches = latches
        self.lanes = lanes
        where = ", ".join(latches) if latches else "?"
        super().__init__(f"transparent loop through [{where}] at frame {frame}"
                         + (f" (lane mask {lanes:#x})" if lanes else ""))


# -- traces ---------------------------------------------------------------


@dataclass
class TraceStep:
    phase: str               # "H" | "L"
    reset: int
    inputs: str              # bit per netlist input, netlist order
    outputs: str | None = None


@dataclass
class Trace:
    steps: list[TraceStep]
    state_seed: int = 0
    initial_state: dict[str, int] | None = None

    def check(self, n: Netlist) -> None:
        if not self.steps:
            return
        if self.steps[0].phase != "H" or self.steps[0].reset != 1:
            raise SimulationError("step 0 must be phase H with reset=1")
        for i, st in enumerate(self.steps):
            want = "H" if i % 2 == 0 else "L"
            if st.phase != want:
                raise SimulationError(f"step {i}: phase {st.phase}, expected {want}")
            if len(st.inputs) != len(n.inputs):
                raise SimulationError(f"step {i}: {len(st.inputs)} input bits, "
                                      f"netlist has {len(n.inputs)}")
            if i % 2 == 1 and (st.inputs != self.steps[i - 1].inputs
                               or st.reset != self.steps[i - 1].reset):
                raise SimulationError(f"step {i}: inputs/reset may only change "
                                      "on High-phase boundaries")

    def to_json(self) -> str:
        doc = {"steps": [{"phase": s.phase, "reset": s.reset, "in": s.inputs,
                          **({"out": s.outputs} if s.outputs is not None else {})}
                         for s in self.steps],
               "state_seed": self.state_seed}
        if self.initial_state is not None:
            doc["initial_state"] = self.initial_state
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "Trace":
        doc = json.loads(text)
        steps = [TraceStep(s["phase"], int(s["reset"]), s["in"], s.get("out"))
                 for s in doc["steps"]]
        init = doc.get("initial_state")
        if init is not None:
            init = {k: int(v) for k, v in init.items()}
        return Trace(steps, int(doc.get("state_seed", 0)), init)


def random_trace(n: Netlist, cycles: int, seed: int, state_seed: int = 0) -> Trace:
    """Random per-cycle inputs, reset high on cycle 0 only."""
    rng = rng_stream(seed, "stimulus")
    steps = []
    for c in range(cycles):
        bits = "".join(str(rng.getrandbits(1)) for _ in n.inputs)
        rst = 1 if c == 0 else 0
        steps.append(TraceStep("H", rst, bits))
        steps.append(TraceStep("L", rst, bits))
    return Trace(steps, state_seed=state_seed)


# -- compiled bit-parallel engine --------------------------------------------


def _klatch_expr(k0: str, k1: str, d: str, held: str, high: bool) -> str:
    # transparent at High iff k1, at Low iff k0; hold lanes are the 01/10
    # modes parked in the opposite phase; 00 lanes fall through to 0
    if high:
        return f"(({k1}&{d})|({k0}&(mask^{k1})&{held}))"
    return f"(({k0}&{d})|((mask^{k0})&{k1}&{held}))"


class CompiledSim:
    """Per-netlist exec-compiled frame evaluators over int bit lanes.

    Source nets (inputs, key inputs, reset) arrive as a list aligned with
    `src_nets`; latch held values and masked DFF outputs as lists aligned
    with `latch_cells` / `ff_cells`. Frame functions return every net value
    in `all_nets` order plus an unsettled-lane mask for transparent loops.
    """

    def __init__(self, n: Netlist):
        self.n = n
        from .cnf import transparent_cycle_latches
        self.cyclic = sorted(transparent_cycle_latches(n))
        order, cyc = topo_order(n, transparent=frozenset(
            c.name for c in n.latches if c.name not in self.cyclic))
        if order is None:
            raise SimulationError(f"latch-free combinational cycle: {cyc}")
        self.latch_cells = n.latches
        self.ff_cells = n.flip_flops
        self.src_nets = n.source_nets()
        self.all_nets = list(self.src_nets) + [c.output for c in n.cells]
        idx = {net: i for i, net in enumerate(self.all_nets)}
        self.net_index = idx
        self._latch_pos = {c.name: i for i, c in enumerate(self.latch_cells)}
        self._ff_pos = {c.name: i for i, c in enumerate(self.ff_cells)}
        self.out_index = [idx[o] for o in n.outputs]
        self.latch_out_index = [idx[c.output] for c in self.latch_cells]
        self.ff_data_index = [idx[c.inputs[0]] for c in self.ff_cells]
        ns: dict = {}
        exec(self._source(order, True), ns)
        exec(self._source(order, False), ns)
        self.frame_high = ns["frame_high"]
        self.frame_low = ns["frame_low"]

    def _source(self, order, high: bool) -> str:
        n, idx = self.n, self.net_index
        v = lambda net: f"v{idx[net]}"
        by_name = {c.name: c for c in n.cells}
        cyc_cells = [by_name[name] for name in self.cyclic]
        lines = [f"def frame_{'high' if high else 'low'}(src, held, ffq, mask):"]
        for i, net in enumerate(self.src_nets):
            lines.append(f"    {v(net)} = src[{i}]")
        for c in self.ff_cells:
            lines.append(f"    {v(c.output)} = ffq[{self._ff_pos[c.name]}]")
        for c in cyc_cells:
            lines.append(f"    {v(c.output)} = held[{self._latch_pos[c.name]}]")

        body = []
        pad = "        " if cyc_cells else "    "
        for c in order:
            if c.kind is CellKind.DFF or c.name in self.cyclic:
                continue
            ins = [v(i) for i in c.inputs]
            k = c.kind
            if k in LATCH_KINDS:
                held = f"held[{self._latch_pos[c.name]}]"
                if k is CellKind.LATCH_P:
                    e = ins[0] if high else held
                elif k is CellKind.LATCH_N:
                    e = held if high else ins[0]
                else:
                    k0, k1 = (v(c.key_ins[0]), v(c.key_ins[1]))
                    e = _klatch_expr(k0, k1, ins[0], held, high)
            elif k is CellKind.AND:
                e = "&".join(ins)
            elif k is CellKind.NAND:
                e = f"mask^({'&'.join(ins)})"
            elif k is CellKind.OR:
                e = "|".join(ins)
            elif k is CellKind.NOR:
                e = f"mask^({'|'.join(ins)})"
            elif k is CellKind.XOR:
                e = "^".join(ins)
            elif k is CellKind.XNOR:
                e = f"mask^({'^'.join(ins)})"
            elif k is CellKind.NOT:
                e = f"mask^{ins[0]}"
            elif k is CellKind.BUF:
                e = ins[0]
            elif k is CellKind.MUX:
                e = f"((mask^{ins[0]})&{ins[1]})|({ins[0]}&{ins[2]})"
            elif k is CellKind.CONST0:
                e = "0"
            elif k is CellKind.CONST1:
                e = "mask"
            else:
                raise SimulationError(f"unsupported cell kind {k}")
            body.append(f"{pad}{v(c.output)} = {e}")

        if cyc_cells:
            cap = 2 * len(n.cells) + 4
            lines.append(f"    for _it in range({cap}):")
            lines.extend(body)
            chg_terms = []
            for j, c in enumerate(cyc_cells):
                held = f"held[{self._latch_pos[c.name]}]"
                k0, k1 = v(c.key_ins[0]), v(c.key_ins[1])
                e = _klatch_expr(k0, k1, v(c.inputs[0]), held, high) \
                    if c.kind is CellKind.KLATCH else (
                        (v(c.inputs[0]) if high else held)
                        if c.kind is CellKind.LATCH_P
                        else (held if high else v(c.inputs[0])))
                lines.append(f"{pad}_n{j} = {e}")
                lines.append(f"{pad}_c{j} = (_n{j} ^ {v(c.output)}) & mask")
                lines.append(f"{pad}{v(c.output)} = _n{j}")
                chg_terms.append(f"_c{j}")
            lines.append(f"{pad}_chg = {'|'.join(chg_terms)}")
            lines.append(f"{pad}if not _chg:")
            lines.append(f"{pad}    break")
            ret_chg = "_chg"
            ret_list = "[" + ",".join(f"_c{j}" for j in range(len(cyc_cells))) + "]"
        else:
            lines.extend(body)
            ret_chg = "0"
            ret_list = "[]"
        vals = ",".join(v(net) for net in self.all_nets)
        lines.append(f"    return ({vals},), {ret_chg}, {ret_list}")
        return "\n".join(lines) + "\n"

    # -- lane run ----------------------------------------------------------

    def run(self, key_lanes: dict[str, int], init: dict[str, int],
            frames: int, input_fn, reset_fn, mask: int,
            record: list[str] | None = None) -> list[list[int]]:
        """Run `frames` half-cycles; returns per-frame values of `record`
        nets (outputs when None). input_fn(net, cycle) and reset_fn(cycle)
        give lane ints; init maps each state element to its lane int."""
        n = self.n
        rec_idx = self.out_index if record is None else \
            [self.net_index[net] for net in record]
        held = [init.get(c.name, 0) & mask for c in self.latch_cells]
        ff = [init.get(c.name, 0) & mask for c in self.ff_cells]
        captured = ff
        has_rst = n.reset_net is not None
        key_src = [key_lanes.get(k, 0) & mask for k in n.key_inputs]
        out = []
        for f in range(frames):
            high = f % 2 == 0
            cycle = f // 2
            if high and f > 0:
                ff = captured
            rst = reset_fn(cycle) & mask if has_rst else 0
            src = [input_fn(net, cycle) & mask for net in n.inputs] + key_src
            if has_rst:
                src.append(rst)
            ffq = [s & (mask ^ rst) for s in ff] if has_rst else ff
            vals, chg, _ = (self.frame_high if high else self.frame_low)(
                src, held, ffq, mask)
            if chg:
                raise OscillationError(f, tuple(self.cyclic), chg)
            held = [vals[i] for i in self.latch_out_index]
            if not high:
                captured = [vals[i] for i in self.ff_data_index]
            out.append([vals[i] for i in rec_idx])
        return out


def compiled_sim(n: Netlist) -> CompiledSim:
    cs = getattr(n, "_compiled_sim", None)
    if cs is None:
        cs = CompiledSim(n)
        n._compiled_sim = cs
    return cs


# -- structural transparency check -------------------------------------------


def transparent_loop(n: Netlist, modes: dict[str, LatchMode],
                     high: bool) -> list[str] | None:
    """Cycle through latches all transparent in this phase, or None."""
    trans = set()
    for c in n.latches:
        if c.kind is CellKind.LATCH_P:
            if high:
                trans.add(c.name)
        elif c.kind is CellKind.LATCH_N:
            if not high:
                trans.add(c.name)
        else:
            m = modes[c.name]
            if m is LatchMode.CLEAR or \
               (m is LatchMode.POS_PHASE and high) or \
               (m is LatchMode.NEG_PHASE and not high):
                trans.add(c.name)
    order, cyc = topo_order(n, transparent=frozenset(trans))
    if order is not None:
        return None
    names = [c.name for c in cyc if c.name in trans]
    # A cycle with no transparent latch on it is combinational; still unsafe.
    return names or [c.name for c in cyc]


def check_sim_safe(n: Netlist, key: KeyVector) -> None:
    modes = key.decode(n)
    for high in (True, False):
        loop = transparent_loop(n, modes, high)
        if loop:
            raise OscillationError(0 if high else 1, tuple(loop))


# -- state init ----------------------------------------------------------------


def seeded_state(n: Netlist, state_seed: int,
                 given: dict[str, int] | None = None) -> dict[str, int]:
    """Per-element init bits; unspecified elements drawn from the seed."""
    rng = rng_stream(state_seed, "state-init")
    out = {}
    for c in n.cells:
        if c.kind in LATCH_KINDS or c.kind is CellKind.DFF:
            bit = rng.getrandbits(1)
            if given and c.name in given:
                bit = given[c.name] & 1
            out[c.name] = bit
    return out


# -- top-level simulate ---------------------------------------------------------


def simulate(n: Netlist, key: KeyVector | None, trace: Trace) -> Trace:
    """Fill trace outputs. Deterministic given (netlist, key, trace)."""
    trace.check(n)
    if key is None:
        key = KeyVector(())
    if n.latches:
        check_sim_safe(n, key)
    cs = compiled_sim(n)
    init = seeded_state(n, trace.state_seed, trace.initial_state)
    key_lanes = {k: key.bits[i] for k, i in n.key_index.items()}
    in_pos = {net: i for i, net in enumerate(n.inputs)}

    def input_fn(net, cycle):
        return int(trace.steps[2 * cycle].inputs[in_pos[net]])

    def reset_fn(cycle):
        return trace.steps[2 * cycle].reset

    rows = cs.run(key_lanes, init, len(trace.steps), input_fn, reset_fn, 1)
    steps = [TraceStep(s.phase, s.reset, s.inputs,
                       "".join(str(b & 1) for b in row))
             for s, row in zip(trace.steps, rows)]
    return Trace(steps, trace.state_seed, trace.initial_state)


# -- three-valued stepping interpreter ------------------------------------------


def _and3(vals):
    if any(v == 0 for v in vals):
        return 0
    if any(v is X for v in vals):
        return X
    return 1


def _or3(vals):
    if any(v == 1 for v in vals):
        return 1
    if any(v is X for v in vals):
        return X
    return 0


def _xor3(vals):
    acc = 0
    for v in vals:
        if v is X:
            return X
        acc ^= v
    return acc


def _not3(v):
    return X if v is X else 1 - v


@dataclass
class SimState:
    """Interpreter state: per-element bits (or X) plus last-frame net values."""
    ff: dict[str, int | None]
    held: dict[str, int | None]
    nets: dict[str, int | None] = field(default_factory=dict)
    captured: dict[str, int | None] = field(default_factory=dict)


def x_state(n: Netlist, seed: int | None = None) -> SimState:
    if seed is None:
        ff = {c.name: X for c in n.flip_flops}
        held = {c.name: X for c in n.latches}
    else:
        init = seeded_state(n, seed)
        ff = {c.name: init[c.name] for c in n.flip_flops}
        held = {c.name: init[c.name] for c in n.latches}
    return SimState(ff, held)


def step_half_cycle(n: Netlist, key: KeyVector | None, state: SimState,
                    phase_high: bool, inputs: dict[str, int | None],
                    reset: int = 0) -> tuple[SimState, dict[str, int | None]]:
    """One half-cycle in three-valued semantics. DFF capture happens when a
    Low step is followed by a High step; callers alternate phases. Rejects
    structurally transparent loops for the given (key, phase)."""
    if key is None:
        key = KeyVector(())
    modes = key.decode(n) if n.key_inputs else {}
    loop = transparent_loop(n, modes, phase_high)
    if loop:
        raise OscillationError(0 if phase_high else 1, tuple(loop))

    if phase_high and state.captured:
        ff_now = dict(state.captured)
    else:
        ff_now = dict(state.ff)

    vals: dict[str, int | None] = {}
    for net in n.inputs:
        vals[net] = inputs.get(net, X)
    for kname, i in n.key_index.items():
        vals[kname] = key.bits[i]
    if n.reset_net:
        vals[n.reset_net] = reset

    trans = set()
    for c in n.latches:
        m = modes.get(c.name)
        if c.kind is CellKind.LATCH_P:
            t = phase_high
        elif c.kind is CellKind.LATCH_N:
            t = not phase_high
        else:
            t = m is LatchMode.CLEAR or \
                (m is LatchMode.POS_PHASE and phase_high) or \
                (m is LatchMode.NEG_PHASE and not phase_high)
        if t:
            trans.add(c.name)
    order, _ = topo_order(n, transparent=frozenset(trans))

    for c in order:
        k = c.kind
        if k is CellKind.DFF:
            v = ff_now[c.name]
            vals[c.output] = 0 if (n.reset_net and reset == 1) else v
        elif k in LATCH_KINDS:
            m = modes.get(c.name)
            if k is not CellKind.KLATCH:
                vals[c.output] = vals[c.inputs[0]] if c.name in trans \
                    else state.held[c.name]
            elif m is LatchMode.LOGIC_DECOY:
                vals[c.output] = 0
            elif c.name in trans:
                vals[c.output] = vals[c.inputs[0]]
            else:
                vals[c.output] = state.held[c.name]
        elif k is CellKind.AND:
            vals[c.output] = _and3([vals[i] for i in c.inputs])
        elif k is CellKind.NAND:
            vals[c.output] = _not3(_and3([vals[i] for i in c.inputs]))
        elif k is CellKind.OR:
            vals[c.output] = _or3([vals[i] for i in c.inputs])
        elif k is CellKind.NOR:
            vals[c.output] = _not3(_or3([vals[i] for i in c.inputs]))
        elif k is CellKind.XOR:
            vals[c.output] = _xor3([vals[i] for i in c.inputs])
        elif k is CellKind.XNOR:
            vals[c.output] = _not3(_xor3([vals[i] for i in c.inputs]))
        elif k is CellKind.NOT:
            vals[c.output] = _not3(vals[c.inputs[0]])
        elif k is CellKind.BUF:
            vals[c.output] = vals[c.inputs[0]]
        elif k is CellKind.MUX:
            s, a, b = (vals[i] for i in c.inputs)
            if s == 0:
                vals[c.output] = a
            elif s == 1:
                vals[c.output] = b
            else:
                vals[c.output] = a if (a == b and a is not X) else X
        elif k is CellKind.CONST0:
            vals[c.output] = 0
        elif k is CellKind.CONST1:
            vals[c.output] = 1

    new = SimState(ff=dict(ff_now),
                   held={c.name: vals[c.output] for c in n.latches},
                   nets=vals)
    if not phase_high:
        new.captured = {c.name: vals[c.inputs[0]] for c in n.flip_flops}
    else:
        new.captured = {}
    outputs = {o: vals[o] for o in n.outputs}
    return new, outputs


# -- oracle ----------------------------------------------------------------------


class OracleSession:
    """Black-box correctly-keyed instance; one contiguous stimulus stream.

    State persists across queries, paused after the Low phase of the last
    queried cycle so the next extension continues seamlessly. The first
    cycle of the whole session must assert reset.
    """

    def __init__(self, n: Netlist, key: KeyVector, state_seed: int = 0,
                 initial_state: dict[str, int] | None = None):
        if n.latches:
            check_sim_safe(n, key)
        self.n = n
        self.cs = compiled_sim(n)
        self.key_lanes = {k: key.bits[i] for k, i in n.key_index.items()}
        init = seeded_state(n, state_seed, initial_state)
        self._held = [init[c.name] for c in self.cs.latch_cells]
        self._ff = [init[c.name] for c in self.cs.ff_cells]
        self._captured = list(self._ff)
        self.cycles_run = 0
        self.trace_in: list[tuple[str, int]] = []   # (input bits, reset) per cycle
        self.trace_out: list[tuple[str, str]] = []  # (high out, low out) per cycle

    def query(self, cycles: list[tuple[str, int]]) -> list[tuple[str, str]]:
        """Extend the session. Each item is (input bitstring, reset bit);
        returns (High outputs, Low outputs) per extension cycle."""
        n, cs = self.n, self.cs
        key_src = [self.key_lanes.get(k, 0) for k in n.key_inputs]
        has_rst = n.reset_net is not None
        out = []
        for bits, rst in cycles:
            if self.cycles_run == 0 and rst != 1:
                raise SimulationError("first session cycle must assert reset")
            if len(bits) != len(n.inputs):
                raise SimulationError("input width mismatch in oracle query")
            if self.cycles_run > 0:
                self._ff = self._captured
            in_src = [int(b) for b in bits]
            row = []
            for high in (True, False):
                src = in_src + key_src + ([rst] if has_rst else [])
                ffq = [s & (1 ^ rst) for s in self._ff] if has_rst else self._ff
                vals, chg, _ = (cs.frame_high if high else cs.frame_low)(
                    src, self._held, ffq, 1)
                if chg:
                    raise OscillationError(2 * self.cycles_run + (0 if high else 1),
                                           tuple(cs.cyclic), chg)
                self._held = [vals[i] for i in cs.latch_out_index]
                if not high:
                    self._captured = [vals[i] for i in cs.ff_data_index]
                row.append("".join(str(vals[i] & 1) for i in cs.out_index))
            self.cycles_run += 1
            self.trace_in.append((bits, rst))
            self.trace_out.append((row[0], row[1]))
            out.append((row[0], row[1]))
        return out


def oracle_query(session: OracleSession,
                 extension: list[tuple[str, int]]) -> list[tuple[str, str]]:
    return session.query(extension)
