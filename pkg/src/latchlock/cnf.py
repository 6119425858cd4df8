"""CNF encoding of netlist frames and miters.

Gates are first built into a hash-consed AND-inverter graph (constant folding
plus structural sharing), then Tseitin clauses are emitted lazily for the
cones that constraints actually reference. AIG literals are ints: node << 1
with bit 0 as complement; FALSE = 0, TRUE = 1. Node index doubles as the
solver variable number, so variable numbering is deterministic for a given
netlist and frame count.

Frame semantics: frame f has phase High iff f is even, cycle f // 2; inputs
and reset are per-cycle; DFFs capture at the end of each Low frame; a latch's
held value entering frame f is its output literal of frame f-1 (initial-state
variable before frame 0). Latches on a structural feedthrough cycle get a free
variable constrained by conditional equality (fixpoint semantics inside one
frame); everything else is definitional.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .netlist import Cell, CellKind, KeyVector, LATCH_KINDS, Netlist, topo_order
from .sat import SAT, UNSAT, UNKNOWN, CdclSolver

FALSE = 0
TRUE = 1


class Aig:
    """Two-input AND nodes with complemented edges and structural hashing."""

    def __init__(self) -> None:
        self.nodes: list[tuple[int, int]] = [(-1, -1)]  # node 0 = const false
        self._hash: dict[tuple[int, int], int] = {}

    def var(self) -> int:
        self.nodes.append((-2, -2))
        return (len(self.nodes) - 1) << 1

    def is_var(self, node: int) -> bool:
        return self.nodes[node][0] == -2

    def and_(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a
        if a == FALSE or a == (b ^ 1):
            return FALSE
        if a == TRUE or a == b:
            return b
        idx = self._hash.get((a, b))
        if idx is None:
            self.nodes.append((a, b))
            idx = len(self.nodes) - 1
            self._hash[(a, b)] = idx
        return idx << 1

    def or_(self, a: int, b: int) -> int:
        return self.and_(a ^ 1, b ^ 1) ^ 1

    def xor_(self, a: int, b: int) -> int:
        return self.or_(self.and_(a, b ^ 1), self.and_(a ^ 1, b))

    def mux_(self, s: int, a: int, b: int) -> int:
        """a when s=0, b when s=1."""
        return self.or_(self.and_(s ^ 1, a), self.and_(s, b))

    def and_many(self, lits) -> int:
        out = TRUE
        for l in lits:
            out = self.and_(out, l)
        return out

    def or_many(self, lits) -> int:
        out = FALSE
        for l in lits:
            out = self.or_(out, l)
        return out


@dataclass
class SolveResult:
    status: str
    model: dict[str, bool] | None
    conflicts: int
    decisions: int
    time_s: float
    raw: dict[int, bool] | None = None


class CnfProblem:
    """AIG + incremental solver + named variables."""

    def __init__(self) -> None:
        self.aig = Aig()
        self.solver = CdclSolver()
        self.names: dict[str, int] = {}  # name -> aig literal
        self._emitted: set[int] = set()
        # solver-literal clause mirror; the solver drops satisfied/unit
        # clauses after root-level simplification, the export must not
        self._export: list[list[int]] = []

    # -- variables -------------------------------------------------------

    def new_var(self, name: str | None = None) -> int:
        lit = self.aig.var()
        if name is not None:
            self.name(name, lit)
        return lit

    def name(self, name: str, lit: int) -> None:
        self.names[name] = lit

    def _solver_lit(self, lit: int) -> int:
        v = lit >> 1
        return -v if lit & 1 else v

    # -- clauses -----------------------------------------------------------

    def _emit(self, lit: int) -> None:
        stack = [lit >> 1]
        emitted = self._emitted
        nodes = self.aig.nodes
        while stack:
            i = stack.pop()
            if i in emitted or i == 0:
                continue
            a, b = nodes[i]
            if a == -2:
                emitted.add(i)
                continue
            ca, cb = a >> 1, b >> 1
            if (ca in emitted or nodes[ca][0] == -2 or ca == 0) and \
               (cb in emitted or nodes[cb][0] == -2 or cb == 0):
                emitted.add(i)
                la, lb = self._solver_lit(a), self._solver_lit(b)
                self.solver.add_var_upto(i)
                for cl in ([-i, la], [-i, lb], [i, -la, -lb]):
                    self._export.append(cl)
                    self.solver.add_clause(cl)
            else:
                stack.append(i)
                stack.append(ca)
                stack.append(cb)
        if emitted:
            self.solver.add_var_upto(len(nodes) - 1)

    def add_clause(self, lits) -> None:
        out = []
        for lit in lits:
            if lit == TRUE:
                return
            if lit == FALSE:
                continue
            out.append(lit)
        if not out:
            self.solver.ok = False
            return
        for lit in out:
            self._emit(lit)
        cl = [self._solver_lit(l) for l in out]
        self._export.append(cl)
        self.solver.add_clause(cl)

    def add_assert(self, lit: int) -> None:
        self.add_clause([lit])

    def assert_eq(self, a: int, b: int) -> None:
        self.add_assert(self.aig.xor_(a, b) ^ 1)

    # -- solving ------------------------------------------------------------

    def solve(self, assumptions=(), max_conflicts: int | None = None,
              time_budget: float | None = None) -> SolveResult:
        t0 = time.monotonic()
        for lit in assumptions:
            self._emit(lit)
        self.solver.add_var_upto(len(self.aig.nodes) - 1)
        c0 = self.solver.stats["conflicts"]
        d0 = self.solver.stats["decisions"]
        status = self.solver.solve(
            [self._solver_lit(l) for l in assumptions],
            max_conflicts=max_conflicts, time_budget=time_budget)
        dt = time.monotonic() - t0
        model = None
        raw = None
        if status == SAT:
            raw = self.solver.model()
            if not self.solver.check_model(raw):
                raise RuntimeError("solver returned a model failing its own clauses")
            model = {nm: self.eval_lit(l, raw) for nm, l in self.names.items()}
        return SolveResult(status, model,
                           self.solver.stats["conflicts"] - c0,
                           self.solver.stats["decisions"] - d0, dt, raw)

    def eval_lit(self, lit: int, raw: dict[int, bool]) -> bool:
        """Evaluate an AIG literal under a raw solver model (var nodes only)."""
        nodes = self.aig.nodes
        memo: dict[int, bool] = {0: False}
        stack = [lit >> 1]
        while stack:
            i = stack[-1]
            if i in memo:
                stack.pop()
                continue
            a, b = nodes[i]
            if a == -2:
                memo[i] = raw.get(i, False)
                stack.pop()
                continue
            ca, cb = a >> 1, b >> 1
            ready = True
            for ch in (ca, cb):
                if ch not in memo:
                    stack.append(ch)
                    ready = False
            if ready:
                va = memo[ca] ^ (a & 1)
                vb = memo[cb] ^ (b & 1)
                memo[i] = bool(va and vb)
                stack.pop()
        return bool(memo[lit >> 1] ^ (lit & 1))

    # -- export ----------------------------------------------------------------

    def to_dimacs(self, comments: bool = True) -> str:
        lines = []
        if comments:
            for nm in sorted(self.names):
                lit = self.names[nm]
                if lit >> 1:  # constants have no variable
                    lines.append(f"c name {self._solver_lit(lit)} {nm}")
        body = [" ".join(map(str, cl)) + " 0" for cl in self._export]
        nvars = max([len(self.aig.nodes) - 1, self.solver.nvars])
        head = f"p cnf {nvars} {len(body)}"
        return "\n".join(lines + [head] + body) + "\n"


# -- frame encoding ------------------------------------------------------------


def transparent_cycle_latches(n: Netlist) -> set[str]:
    """Latches lying on a cycle when every latch is treated as feedthrough."""
    import networkx as nx
    g = nx.DiGraph()
    for c in n.cells:
        g.add_node(c.name)
        if c.kind is CellKind.DFF:
            continue
        for i in c.inputs:
            d = n.driver.get(i)
            if d is not None:
                g.add_edge(d.name, c.name)
    latch_names = {c.name for c in n.latches}
    cyclic: set[str] = set()
    for scc in nx.strongly_connected_components(g):
        if len(scc) > 1 or any(g.has_edge(x, x) for x in scc):
            cyclic |= set(scc) & latch_names
    return cyclic


def _latch_out(aig: Aig, cell: Cell, key_lits, d: int, prev: int, high: bool) -> int:
    if cell.kind is CellKind.LATCH_P:
        return d if high else prev
    if cell.kind is CellKind.LATCH_N:
        return prev if high else d
    k0 = key_lits[cell.key_ins[0]]
    k1 = key_lits[cell.key_ins[1]]
    if high:
        return aig.mux_(k0, aig.mux_(k1, FALSE, d), aig.mux_(k1, prev, d))
    return aig.mux_(k0, aig.mux_(k1, FALSE, prev), aig.mux_(k1, d, d))


_GATE_EVAL = {
    CellKind.AND: lambda aig, ins: aig.and_many(ins),
    CellKind.NAND: lambda aig, ins: aig.and_many(ins) ^ 1,
    CellKind.OR: lambda aig, ins: aig.or_many(ins),
    CellKind.NOR: lambda aig, ins: aig.or_many(ins) ^ 1,
    CellKind.XOR: lambda aig, ins: _fold(aig.xor_, ins, FALSE),
    CellKind.XNOR: lambda aig, ins: _fold(aig.xor_, ins, FALSE) ^ 1,
    CellKind.NOT: lambda aig, ins: ins[0] ^ 1,
    CellKind.BUF: lambda aig, ins: ins[0],
    CellKind.MUX: lambda aig, ins: aig.mux_(ins[0], ins[1], ins[2]),
    CellKind.CONST0: lambda aig, ins: FALSE,
    CellKind.CONST1: lambda aig, ins: TRUE,
}


def _fold(f, xs, unit):
    out = unit
    for x in xs:
        out = f(out, x)
    return out


class Unroller:
    """Incremental per-frame encoder for one circuit copy.

    `key_lits` maps key-input names to AIG literals. `init_fn(element_name)`
    supplies the pre-frame-0 literal of each state element; by default a
    shared stimulus variable. Inputs and reset come from `shared` so several
    copies can be driven identically.
    """

    def __init__(self, problem: CnfProblem, n: Netlist, key_lits=None,
                 shared: "SharedStimulus | None" = None, tag: str = "",
                 init_fn=None):
        self.p = problem
        self.n = n
        self.tag = tag
        self.key_lits = dict(key_lits or {})
        self.shared = shared or SharedStimulus(problem)
        self.init_fn = init_fn or self.shared.init_lit
        self.cyclic = transparent_cycle_latches(n)
        order, cycle = topo_order(
            n, transparent=frozenset(c.name for c in n.latches
                                     if c.name not in self.cyclic))
        if order is None:
            raise ValueError("netlist has a latch-free combinational cycle")
        self.order = order
        self.frames: list[dict[str, int]] = []
        self._latch_prev: dict[str, int] = {}
        self._dff_state: dict[str, int] = {}
        self._dff_captured: dict[str, int] = {}
        for c in n.latches:
            self._latch_prev[c.name] = self.init_fn(c.name)
        for c in n.flip_flops:
            self._dff_state[c.name] = self.init_fn(c.name)

    @property
    def depth(self) -> int:
        return len(self.frames)

    def add_frame(self) -> dict[str, int]:
        f = len(self.frames)
        high = f % 2 == 0
        cycle = f // 2
        aig = self.p.aig
        n = self.n

        if high and f > 0:
            self._dff_state = dict(self._dff_captured)

        net_lit: dict[str, int] = {}
        for net in n.inputs:
            net_lit[net] = self.shared.input_lit(net, cycle)
        for net, l in self.key_lits.items():
            net_lit[net] = l
        rst = FALSE
        if n.reset_net:
            rst = self.shared.reset_lit(cycle)
            net_lit[n.reset_net] = rst

        pending: list[Cell] = []
        for c in n.cells:
            if c.name in self.cyclic:
                v = self.p.new_var(f"{self.tag}{c.output}@{f}")
                net_lit[c.output] = v
                pending.append(c)

        for c in self.order:
            if c.name in self.cyclic:
                continue
            if c.kind is CellKind.DFF:
                s = self._dff_state[c.name]
                net_lit[c.output] = aig.and_(s, rst ^ 1) if n.reset_net else s
            elif c.kind in LATCH_KINDS:
                d = net_lit[c.inputs[0]]
                net_lit[c.output] = _latch_out(aig, c, self.key_lits, d,
                                               self._latch_prev[c.name], high)
            else:
                ins = [net_lit[i] for i in c.inputs]
                net_lit[c.output] = _GATE_EVAL[c.kind](aig, ins)

        for c in pending:
            d = net_lit[c.inputs[0]]
            rhs = _latch_out(aig, c, self.key_lits, d,
                             self._latch_prev[c.name], high)
            self.p.assert_eq(net_lit[c.output], rhs)

        for c in n.latches:
            self._latch_prev[c.name] = net_lit[c.output]
        if not high:
            for c in n.flip_flops:
                self._dff_captured[c.name] = net_lit[c.inputs[0]]

        self.frames.append(net_lit)
        return net_lit

    def extend_to(self, depth: int) -> None:
        while len(self.frames) < depth:
            self.add_frame()

    def output_lits(self, frame: int) -> list[int]:
        return [self.frames[frame][o] for o in self.n.outputs]


class SharedStimulus:
    """Input/reset/initial-state variables shared across miter copies."""

    def __init__(self, problem: CnfProblem):
        self.p = problem
        self._inputs: dict[tuple[str, int], int] = {}
        self._resets: dict[int, int] = {}
        self._inits: dict[str, int] = {}

    def input_lit(self, net: str, cycle: int) -> int:
        key = (net, cycle)
        if key not in self._inputs:
            self._inputs[key] = self.p.new_var(f"in:{net}@{cycle}")
        return self._inputs[key]

    def reset_lit(self, cycle: int) -> int:
        if cycle not in self._resets:
            self._resets[cycle] = self.p.new_var(f"reset@{cycle}")
        return self._resets[cycle]

    def init_lit(self, elem: str) -> int:
        if elem not in self._inits:
            self._inits[elem] = self.p.new_var(f"init:{elem}")
        return self._inits[elem]


def key_var_lits(problem: CnfProblem, n: Netlist, tag: str = "") -> dict[str, int]:
    return {k: problem.new_var(f"key{tag}:{k}") for k in n.key_inputs}


def key_const_lits(n: Netlist, key: KeyVector) -> dict[str, int]:
    return {k: (TRUE if key.bits[i] else FALSE) for k, i in n.key_index.items()}


class Miter:
    """Two circuit copies on shared stimulus with per-frame difference flags.

    The copies may be different netlists (equal output name lists required);
    keys may be symbolic, constant, or absent per copy.
    """

    def __init__(self, problem: CnfProblem, a: Unroller, b: Unroller):
        if a.n.outputs != b.n.outputs:
            raise ValueError("miter copies must expose identical output lists")
        if a.n.inputs != b.n.inputs:
            raise ValueError("miter copies must read identical input lists")
        self.p = problem
        self.a = a
        self.b = b
        self.frame_diff: list[int] = []
        self._acts: dict[int, int] = {}

    @property
    def depth(self) -> int:
        return len(self.frame_diff)

    def extend_to(self, depth: int) -> None:
        aig = self.p.aig
        while self.depth < depth:
            f = self.depth
            la = self.a.add_frame() if self.a.depth == f else self.a.frames[f]
            lb = self.b.add_frame() if self.b.depth == f else self.b.frames[f]
            diffs = [aig.xor_(la[o], lb[o]) for o in self.a.n.outputs]
            lit = aig.or_many(diffs)
            self.p.name(f"miter@{f}", lit)
            self.frame_diff.append(lit)

    def diff_assumption(self, depth: int) -> int:
        """Assumption literal forcing some output difference in frames [0, depth)."""
        self.extend_to(depth)
        if depth not in self._acts:
            act = self.p.new_var(f"act:diff<{depth}")
            self.p.add_clause([act ^ 1] + self.frame_diff[:depth])
            self._acts[depth] = act
        return self._acts[depth]


def build_miter(problem: CnfProblem, n: Netlist, depth: int,
                key_a=None, key_b=None) -> Miter:
    """Attack-style miter: same netlist twice, shared inputs/reset/initial
    state, per-copy keys (symbolic when a key argument is None)."""
    shared = SharedStimulus(problem)
    ka = key_var_lits(problem, n, ":A") if key_a is None else key_const_lits(n, key_a)
    kb = key_var_lits(problem, n, ":B") if key_b is None else key_const_lits(n, key_b)
    m = Miter(problem,
              Unroller(problem, n, ka, shared, tag="A:"),
              Unroller(problem, n, kb, shared, tag="B:"))
    m.extend_to(depth)
    return m


def encode_frame(problem: CnfProblem, n: Netlist, high: bool,
                 key_lits: dict[str, int], prev_state: dict[str, int],
                 reset_lit: int = FALSE) -> dict[str, int]:
    """Single free-standing frame with caller-supplied held state.

    `prev_state` maps every DFF and latch name to its entering value literal.
    Inputs become fresh problem variables named `in:<net>`. Returns the
    net -> literal map (state elements included by name).
    """
    aig = problem.aig
    cyclic = transparent_cycle_latches(n)
    order, _ = topo_order(n, transparent=frozenset(
        c.name for c in n.latches if c.name not in cyclic))
    net_lit: dict[str, int] = {}
    for net in n.inputs:
        net_lit[net] = problem.new_var(f"in:{net}")
    net_lit.update(key_lits)
    if n.reset_net:
        net_lit[n.reset_net] = reset_lit
    pending = []
    for c in n.cells:
        if c.name in cyclic:
            net_lit[c.output] = problem.new_var(f"{c.output}@frame")
            pending.append(c)
    for c in order:
        if c.name in cyclic:
            continue
        if c.kind is CellKind.DFF:
            s = prev_state[c.name]
            net_lit[c.output] = aig.and_(s, reset_lit ^ 1) if n.reset_net else s
        elif c.kind in LATCH_KINDS:
            net_lit[c.output] = _latch_out(aig, c, key_lits,
                                           net_lit[c.inputs[0]],
                                           prev_state[c.name], high)
        else:
            net_lit[c.output] = _GATE_EVAL[c.kind](aig, [net_lit[i] for i in c.inputs])
    for c in pending:
        rhs = _latch_out(aig, c, key_lits, net_lit[c.inputs[0]],
                         prev_state[c.name], high)
        problem.assert_eq(net_lit[c.output], rhs)
    return net_lit
