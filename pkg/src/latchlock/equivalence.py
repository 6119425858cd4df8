"""Key-pair equivalence classification.

Two keys are judged equivalent when (a) every anchored path through the
latches sees the same cycle-delay count under both (phase transitions, plus
the capture-edge hop at flip-flop data sinks), or is broken by a
mode-00 latch under both, and (b) the combinational logic fanning into every
live sink (primary output, DFF data pin, latch data pin) computes the same
function once mode-00 latch outputs are folded to constant 0 and Clear
latches are treated as wires. The same two conditions are also emitted as a
key-variable circuit fragment for conjunction into an attack miter.

Equivalence targets positive-phase behavior. A latch's phase only decides
which half-cycle a value rides through the pipeline, so equivalent keys may
expose different values during negative phases and during the startup flush
while agreeing at every anchor observation; on latch cycles they may also
relabel which ring element holds the state.

Propagation-delay differences are deliberately out of scope here; the
constraints module owns those.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .cnf import FALSE, TRUE, CnfProblem, _GATE_EVAL, build_miter, key_const_lits
from .netlist import Cell, CellKind, KeyVector, LATCH_KINDS, LatchMode, Netlist
from .sat import SAT, UNSAT
from .timing import (DelayModel, LatchPath, complete_modes,
                     enumerate_latch_cycle_paths, enumerate_latch_paths,
                     transition_flags)

__all__ = [
    "PathDelayCounter", "CounterInventory", "EquivalenceVerdict",
    "InequivalenceCircuit", "build_counters", "keys_equivalent",
    "build_inequivalence_circuit", "bounded_distinguishable",
    "anchor_warmup_cycles", "counters_to_json", "cone_sinks",
]


# -- path delay counters --------------------------------------------------------


def _fixed_key_lits(kind: CellKind) -> tuple[int, int]:
    # fixed-function latches decode to the matching (k0, k1) constants
    if kind is CellKind.LATCH_P:
        return FALSE, TRUE
    if kind is CellKind.LATCH_N:
        return TRUE, FALSE
    raise ValueError(f"not a fixed latch kind: {kind}")


def _popcount_bits(aig, flags: list[int]) -> list[int]:
    """Little-endian binary population count (exact, constant-folded)."""
    bits: list[int] = []
    for f in flags:
        carry = f
        for i, b in enumerate(bits):
            bits[i] = aig.xor_(b, carry)
            carry = aig.and_(b, carry)
        bits.append(carry)
    return bits


@dataclass
class PathDelayCounter:
    """Cycle-delay counter for one anchored path, in half-cycle hops.

    `elements` are the latch cells along the path; for cyclic paths the
    closing latch appears once, in front. Both path ends anchor at positive
    phase (cyclic paths anchor at themselves). A flip-flop data sink promotes
    at clock edges, so a value arriving during a positive phase waits one
    more full cycle there (`edge_sink` adds that hop); an output is observed
    during the phase itself. `width` is the register width needed to separate
    all reachable counts: counts are always even, so the emitted comparison
    register holds count/2 in ceil(log2(L+1)) bits (edge-sink maxima still
    fit: (L+2)/2 <= 2^ceil(log2(L+1)) - 1).
    """
    path: LatchPath
    elements: tuple[Cell, ...]
    width: int
    edge_sink: bool = False

    @property
    def path_id(self) -> str:
        return self.path.path_id

    def evaluate(self, modes: dict[str, LatchMode]) -> tuple[bool, int | None]:
        """(broken, half-cycle hop count) for fully resolved latch modes."""
        seq = [modes[c.name] for c in self.elements]
        if not self.path.cyclic:
            broken, flags = transition_flags(seq)
            if broken:
                return True, None
            count = sum(flags)
            if self.edge_sink and not flags[-1]:
                count += 2  # positive-parity arrival promoted a cycle later
            return False, count
        if any(m is LatchMode.LOGIC_DECOY for m in seq):
            return True, None
        ph = [1 if m is LatchMode.NEG_PHASE else 0
              for m in seq if m in (LatchMode.POS_PHASE, LatchMode.NEG_PHASE)]
        # wrap-around change count; ph[-1] is the cyclic predecessor of ph[0]
        return False, sum(1 for i in range(len(ph)) if ph[i] != ph[i - 1])

    def _key_pairs(self, key_lits: dict[str, int]) -> list[tuple[int, int]]:
        kk = []
        for c in self.elements:
            if c.kind is CellKind.KLATCH:
                kk.append((key_lits[c.key_ins[0]], key_lits[c.key_ins[1]]))
            else:
                kk.append(_fixed_key_lits(c.kind))
        return kk

    def encode(self, problem: CnfProblem,
               key_lits: dict[str, int]) -> tuple[int, list[int]]:
        """(broken literal, count/2 bits) as AIG literals over the key.

        The halved count always fits `width` bits, so equal bit vectors of
        two unbroken keys means equal transition counts.
        """
        aig = problem.aig
        kk = self._key_pairs(key_lits)
        broken = FALSE
        for k0, k1 in kk:
            broken = aig.or_(broken, aig.and_(k0 ^ 1, k1 ^ 1))
        p = FALSE
        flags: list[int] = []
        passes = 2 if self.path.cyclic else 1
        for _ in range(passes):
            flags = []
            for k0, k1 in kk:
                is_neg = aig.and_(k0, k1 ^ 1)
                is_phase = aig.xor_(k0, k1)
                flags.append(aig.and_(is_phase, aig.xor_(p, is_neg)))
                p = aig.or_(is_neg, aig.and_(p, is_phase ^ 1))
        if not self.path.cyclic:
            flags.append(p)  # hop into the positive sink anchor
            if self.edge_sink:
                # capture-edge quantization: 2 - p extra hops
                flags += [p ^ 1, p ^ 1]
        bits = _popcount_bits(aig, flags)[1:]  # even counts: store count/2
        return broken, (bits + [FALSE] * self.width)[: self.width]


@dataclass
class CounterInventory:
    """Counters plus a coverage report (path enumeration may hit its cap)."""
    counters: list[PathDelayCounter]
    truncated: bool
    explored: int

    def __iter__(self):
        return iter(self.counters)

    def __len__(self) -> int:
        return len(self.counters)

    def __getitem__(self, i):
        return self.counters[i]


def build_counters(n: Netlist, dm: DelayModel | None = None,
                   cap: int = 100_000,
                   cycle_cap: int = 10_000) -> CounterInventory:
    """One counter per anchored path and per latch-to-itself path."""
    dm = dm or DelayModel()
    by_name = {c.name: c for c in n.cells}
    ff_names = {c.name for c in n.flip_flops}
    linear = enumerate_latch_paths(n, dm, cap)
    cyc = enumerate_latch_cycle_paths(n, dm, cycle_cap)
    counters = []
    for p in linear.paths + cyc.paths:
        names = ((p.source,) + p.latches) if p.cyclic else p.latches
        cells = tuple(by_name[x] for x in names)
        width = max(1, math.ceil(math.log2(len(cells) + 1)))
        edge = not p.cyclic and p.sink in ff_names
        counters.append(PathDelayCounter(p, cells, width, edge))
    return CounterInventory(counters, linear.truncated or cyc.truncated,
                            linear.explored + cyc.explored)


def counters_to_json(inv: CounterInventory) -> str:
    return json.dumps({
        "truncated": inv.truncated,
        "explored": inv.explored,
        "counters": [{
            "path": c.path_id,
            "cyclic": c.path.cyclic,
            "latches": [e.name for e in c.elements],
            "width": c.width,
            "delay_ps": c.path.total,
        } for c in inv],
    }, indent=2, sort_keys=True)


# -- fan-in cones ---------------------------------------------------------------


def cone_sinks(n: Netlist) -> list[tuple[str, str, Cell | None]]:
    """(sink id, cone root net, latch cell or None) in deterministic order."""
    sinks: list[tuple[str, str, Cell | None]] = []
    for net in n.outputs:
        sinks.append((f"out:{net}", net, None))
    for c in n.cells:
        if c.kind is CellKind.DFF:
            sinks.append((f"ff:{c.name}", c.inputs[0], None))
        elif c.kind in LATCH_KINDS:
            sinks.append((f"latch:{c.name}", c.inputs[0], c))
    return sinks


class _ConeBuilder:
    """Expands a net into an AIG function of shared leaf variables.

    Latch outputs become leaves unless the key folds them: mode 00 reads as
    constant 0 and Clear reads through to the latch data input. Key literals
    may be constants (concrete key) or variables (symbolic); constant keys
    fold to the plain substituted cone. A latch re-entered while its own wire
    branch is being expanded (transparent cycle) is cut at its leaf variable.
    """

    def __init__(self, problem: CnfProblem, n: Netlist,
                 key_lits: dict[str, int], leaves: dict[str, int]):
        self.p = problem
        self.n = n
        self.key_lits = key_lits
        self.leaves = leaves
        self.memo: dict[tuple[str, frozenset], int] = {}

    def _leaf(self, ident: str) -> int:
        lit = self.leaves.get(ident)
        if lit is None:
            lit = self.leaves[ident] = self.p.new_var(f"cone:{ident}")
        return lit

    def expand(self, net: str, stack: frozenset = frozenset()) -> int:
        key = (net, stack)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        aig = self.p.aig
        cell = self.n.driver.get(net)
        if cell is None:
            out = self._leaf(f"in:{net}")
        elif cell.kind is CellKind.DFF:
            out = self._leaf(f"ff:{cell.name}")
        elif cell.kind in LATCH_KINDS:
            if cell.kind is CellKind.KLATCH:
                k0 = self.key_lits[cell.key_ins[0]]
                k1 = self.key_lits[cell.key_ins[1]]
            else:
                k0, k1 = _fixed_key_lits(cell.kind)
            leaf = self._leaf(f"latch:{cell.name}")
            if cell.name in stack:
                out = leaf
            else:
                is00 = aig.and_(k0 ^ 1, k1 ^ 1)
                is_clear = aig.and_(k0, k1)
                if is00 == TRUE:
                    out = FALSE
                elif is_clear == FALSE:
                    out = aig.mux_(is00, leaf, FALSE)
                else:
                    wire = self.expand(cell.inputs[0], stack | {cell.name})
                    out = aig.mux_(is00, aig.mux_(is_clear, leaf, wire), FALSE)
        else:
            ins = [self.expand(x, stack) for x in cell.inputs]
            out = _GATE_EVAL[cell.kind](aig, ins)
        self.memo[key] = out
        return out


# -- the decision procedure -------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceVerdict:
    equivalent: bool
    witness: tuple[str, str] | None = None  # ("path" | "cone", identifier)

    def __bool__(self) -> bool:
        return self.equivalent


def _skip_sink(cell: Cell | None, ma: dict[str, LatchMode],
               mb: dict[str, LatchMode]) -> bool:
    if cell is None:
        return False
    dead = (LatchMode.LOGIC_DECOY, LatchMode.CLEAR)
    return ma[cell.name] in dead and mb[cell.name] in dead


def keys_equivalent(n: Netlist, counters: CounterInventory,
                    key_a: KeyVector, key_b: KeyVector) -> EquivalenceVerdict:
    """Counter comparison first, then per-cone solver miters."""
    modes_a = complete_modes(n, key_a)
    modes_b = complete_modes(n, key_b)
    for c in counters:
        if c.evaluate(modes_a) != c.evaluate(modes_b):
            return EquivalenceVerdict(False, ("path", c.path_id))
    problem = CnfProblem()
    leaves: dict[str, int] = {}
    ba = _ConeBuilder(problem, n, key_const_lits(n, key_a), leaves)
    bb = _ConeBuilder(problem, n, key_const_lits(n, key_b), leaves)
    for sid, root, cell in cone_sinks(n):
        if _skip_sink(cell, modes_a, modes_b):
            continue
        diff = problem.aig.xor_(ba.expand(root), bb.expand(root))
        if diff == FALSE:
            continue
        if diff == TRUE or problem.solve(assumptions=[diff]).status is SAT:
            return EquivalenceVerdict(False, ("cone", sid))
    return EquivalenceVerdict(True, None)


# -- key-variable fragment for the attack miter -----------------------------------


@dataclass
class InequivalenceCircuit:
    """Reusable encoding of "keys K0 and K1 are inequivalent".

    Instantiating into a problem returns a literal that is satisfiable
    exactly when some counter separates the keys (count mismatch or
    broken-in-one-only) or some live cone differs on a per-cone existential
    input witness.
    """
    n: Netlist
    counters: CounterInventory

    def instantiate(self, problem: CnfProblem, key_a: dict[str, int],
                    key_b: dict[str, int]) -> int:
        aig = problem.aig
        diffs: list[int] = []
        for c in self.counters:
            bra, bits_a = c.encode(problem, key_a)
            brb, bits_b = c.encode(problem, key_b)
            neq = aig.or_many([aig.xor_(x, y) for x, y in zip(bits_a, bits_b)])
            diffs.append(aig.or_(
                aig.xor_(bra, brb),
                aig.and_many([bra ^ 1, brb ^ 1, neq])))
        for sid, root, cell in cone_sinks(self.n):
            leaves: dict[str, int] = {}
            la = _ConeBuilder(problem, self.n, key_a, leaves).expand(root)
            lb = _ConeBuilder(problem, self.n, key_b, leaves).expand(root)
            d = aig.xor_(la, lb)
            if cell is not None and cell.kind is CellKind.KLATCH:
                # latch sits in {00, Clear} under both keys: cone not live
                pa = aig.xor_(key_a[cell.key_ins[0]], key_a[cell.key_ins[1]])
                pb = aig.xor_(key_b[cell.key_ins[0]], key_b[cell.key_ins[1]])
                d = aig.and_(d, aig.or_(pa, pb))
            diffs.append(d)
        return aig.or_many(diffs)


def build_inequivalence_circuit(n: Netlist,
                                counters: CounterInventory) -> InequivalenceCircuit:
    return InequivalenceCircuit(n, counters)


# -- bounded behavioral check -----------------------------------------------------


def anchor_warmup_cycles(n: Netlist) -> int:
    """Cycles until startup latch content can no longer reach an anchor.

    Content held in a latch at time zero survives at most one backward hop
    per half cycle along a chain of opaque latches, so a linear path with L
    latches exposes stale values at positive phases ceil(L/2) - 1 cycles in
    at worst."""
    inv = enumerate_latch_paths(n, DelayModel())
    longest = max((len(p.latches) for p in inv.paths), default=0)
    return (longest + 1) // 2


def bounded_distinguishable(n: Netlist, key_a: KeyVector, key_b: KeyVector,
                            depth: int, max_conflicts: int | None = None,
                            time_budget: float | None = None) -> bool | None:
    """Some input sequence separates the keys at an anchor observation within
    `depth` half-cycles? None when the budget runs out.

    Observation follows the counter model: outputs are compared at positive
    phases only, once startup latch content has flushed; the initial state is
    one shared free vector. Latch phases shift which half-cycle a value rides
    through the pipeline, so negative-phase frames and the warm-up prefix
    carry key-dependent but behaviorally-irrelevant detail. On designs with
    latch cycles a retimed key pair relabels the ring state; this per-state
    check can separate such pairs even though their reachable behaviors
    coincide. Keys leaving a transparent latch cycle admit arbitrary fixpoint
    values in the encoding; restrict callers to loop-safe keys.
    """
    problem = CnfProblem()
    m = build_miter(problem, n, depth, key_a, key_b)
    first = anchor_warmup_cycles(n)
    obs = [m.frame_diff[f] for f in range(depth)
           if f % 2 == 0 and f // 2 >= first]
    if not obs:
        return False
    act = problem.new_var("act:anchored-diff")
    problem.add_clause([act ^ 1] + obs)
    res = problem.solve(assumptions=[act],
                        max_conflicts=max_conflicts, time_budget=time_budget)
    if res.status is SAT:
        return True
    return False if res.status is UNSAT else None
