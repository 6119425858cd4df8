"""Attacker-side key-space constraints: loop breaking and timing windows.

Loop rule (public): a structural latch cycle is invalid only when every
latch on it resolves to Clear, i.e. one clause "not all Clear" per cycle.
The stricter rule used inside the attack (a cycle must hold a mode-00 latch
or both phases) is available separately; it exactly matches per-phase
transparent-loop freedom and keeps DIS replays oscillation-free.

Timing rule: per enumerated delay window, at least 1 (length t_period) or 2
(1.5 t_period) phase transitions among the adjacencies overlapping the
window, waived when any latch on the path is in mode 00. Phase chains use
Clear-inheritance from the positive anchor; >=2 counting uses a two-stage
sequential counter. Both rules are evaluated two ways: emitted as CNF over
key bits (plus defined auxiliaries) and checked directly per key, and the
two must agree key-for-key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cnf import CnfProblem, FALSE, TRUE, key_var_lits
from .netlist import CellKind, KeyVector, LatchMode, LATCH_KINDS, Netlist
from .sat import SAT, UNSAT
from .timing import (ClockSpec, DelayModel, LatchPath, LatchPathWindow,
                     complete_modes, enumerate_windows, transition_flags,
                     window_violations)


@dataclass(frozen=True)
class ConstraintRecord:
    kind: str                      # "loop" | "window"
    ident: str
    cycle: tuple[str, ...] = ()
    window: LatchPathWindow | None = None


@dataclass
class KeyConstraintSet:
    netlist: Netlist
    clk: ClockSpec | None = None
    records: list[ConstraintRecord] = field(default_factory=list)
    paths: list[LatchPath] = field(default_factory=list)
    loop_truncated: bool = False
    window_truncated: bool = False

    @property
    def loop_records(self) -> list[ConstraintRecord]:
        return [r for r in self.records if r.kind == "loop"]

    @property
    def window_records(self) -> list[ConstraintRecord]:
        return [r for r in self.records if r.kind == "window"]

    def merge(self, other: "KeyConstraintSet") -> "KeyConstraintSet":
        if other.netlist is not self.netlist:
            raise ValueError("constraint sets must target the same netlist")
        out = KeyConstraintSet(self.netlist, self.clk or other.clk)
        out.records = self.records + other.records
        seen = {p.path_id for p in self.paths}
        out.paths = self.paths + [p for p in other.paths
                                  if p.path_id not in seen]
        out.loop_truncated = self.loop_truncated or other.loop_truncated
        out.window_truncated = self.window_truncated or other.window_truncated
        return out

    # -- CNF emission -----------------------------------------------------

    def emit(self, problem: CnfProblem, key_lits: dict[str, int],
             strong_loops: bool = False,
             which: tuple[str, ...] = ("loop", "window"),
             ) -> list[tuple[str, int, int]]:
        """Assert the constraints over the given key literals. Returns
        per-record (ident, first_clause, end_clause) provenance into the
        problem's exported clause list."""
        n = self.netlist
        prov = []
        for r in self.records:
            if r.kind not in which:
                continue
            start = len(problem._export)
            if r.kind == "loop":
                lit = self._cycle_ok_lit(problem, key_lits, r.cycle,
                                         strong_loops)
                problem.add_assert(lit)
            else:
                problem.add_assert(self._window_ok_lit(problem, key_lits,
                                                       r.window))
            prov.append((r.ident, start, len(problem._export)))
        return prov

    def _latch_mode_lits(self, problem: CnfProblem, key_lits, name: str):
        """(k0, k1) literals; fixed-kind latches become constants."""
        cell = self.netlist.driver[name] if name in self.netlist.driver else None
        if cell is None:
            for c in self.netlist.cells:
                if c.name == name:
                    cell = c
                    break
        if cell.kind is CellKind.LATCH_P:
            return FALSE, TRUE
        if cell.kind is CellKind.LATCH_N:
            return TRUE, FALSE
        return key_lits[cell.key_ins[0]], key_lits[cell.key_ins[1]]

    def _cycle_ok_lit(self, problem, key_lits, cycle, strong: bool) -> int:
        aig = problem.aig
        if not strong:
            # not every latch Clear
            return aig.or_many(
                aig.and_(*self._latch_mode_lits(problem, key_lits, name)) ^ 1
                for name in cycle)
        any00 = FALSE
        any_pos = FALSE
        any_neg = FALSE
        for name in cycle:
            k0, k1 = self._latch_mode_lits(problem, key_lits, name)
            any00 = aig.or_(any00, aig.and_(k0 ^ 1, k1 ^ 1))
            any_pos = aig.or_(any_pos, aig.and_(k0 ^ 1, k1))
            any_neg = aig.or_(any_neg, aig.and_(k0, k1 ^ 1))
        return aig.or_(any00, aig.and_(any_pos, any_neg))

    def _window_ok_lit(self, problem, key_lits, w: LatchPathWindow) -> int:
        aig = problem.aig
        path = w.path
        # phase chain with Clear inheritance from the positive anchor
        phases = [FALSE]
        broken = FALSE
        for name in path.latches:
            k0, k1 = self._latch_mode_lits(problem, key_lits, name)
            clear = aig.and_(k0, k1)
            phases.append(aig.mux_(clear, k0, phases[-1]))
            broken = aig.or_(broken, aig.and_(k0 ^ 1, k1 ^ 1))
        phases.append(FALSE)  # sink anchor
        trans = [aig.xor_(phases[j], phases[j + 1])
                 for j in range(len(phases) - 1)]
        in_win = [trans[j] for j in w.adjacencies]
        if w.required_transitions == 1:
            return aig.or_(broken, aig.or_many(in_win))
        ge1 = FALSE
        ge2 = FALSE
        for t in in_win:
            ge2 = aig.or_(ge2, aig.and_(ge1, t))
            ge1 = aig.or_(ge1, t)
        return aig.or_(broken, ge2)

    # -- direct per-key analysis --------------------------------------------

    def key_ok(self, key: KeyVector, strong_loops: bool = False,
               which: tuple[str, ...] = ("loop", "window")) -> bool:
        modes = complete_modes(self.netlist, key)
        if "loop" in which:
            for r in self.loop_records:
                if not cycle_modes_ok([modes[x] for x in r.cycle],
                                      strong_loops):
                    return False
        if "window" in which and self.window_records:
            if self.clk is None:
                raise ValueError("window check needs a clock spec")
            if window_violations(self.paths, modes, self.clk):
                return False
        return True

    # -- standalone problem -------------------------------------------------

    def to_problem(self, strong_loops: bool = False,
                   which: tuple[str, ...] = ("loop", "window"),
                   ) -> tuple[CnfProblem, dict[str, int], list]:
        p = CnfProblem()
        key_lits = key_var_lits(p, self.netlist)
        prov = self.emit(p, key_lits, strong_loops, which)
        return p, key_lits, prov


def cycle_modes_ok(mode_seq: list[LatchMode], strong: bool = False) -> bool:
    if not strong:
        return any(m is not LatchMode.CLEAR for m in mode_seq)
    if any(m is LatchMode.LOGIC_DECOY for m in mode_seq):
        return True
    return (any(m is LatchMode.POS_PHASE for m in mode_seq)
            and any(m is LatchMode.NEG_PHASE for m in mode_seq))


# -- generation -----------------------------------------------------------------


def latch_adjacency(n: Netlist) -> "object":
    """Digraph over latch names; an edge is a latch-free combinational
    route from one latch's output to another's data input."""
    import networkx as nx
    g = nx.DiGraph()
    for c in n.latches:
        g.add_node(c.name)
    for src in n.latches:
        seen = set()
        stack = [src.output]
        while stack:
            net = stack.pop()
            for cell in n.fanout.get(net, []):
                if cell.kind is CellKind.DFF:
                    continue
                if cell.kind in LATCH_KINDS:
                    g.add_edge(src.name, cell.name)
                    continue
                if cell.output not in seen:
                    seen.add(cell.output)
                    stack.append(cell.output)
    return g


def enumerate_latch_cycles(n: Netlist, cap: int = 10 ** 5,
                           ) -> tuple[list[tuple[str, ...]], bool]:
    """Simple latch cycles, canonically rotated and sorted; (cycles, truncated)."""
    import networkx as nx
    g = latch_adjacency(n)
    cycles = []
    truncated = False
    for cyc in nx.simple_cycles(g):
        rot = min(range(len(cyc)), key=lambda i: cyc[i:] + cyc[:i])
        cycles.append(tuple(cyc[rot:] + cyc[:rot]))
        if len(cycles) >= cap:
            truncated = True
            break
    cycles = sorted(set(cycles), key=lambda c: (len(c), c))
    return cycles, truncated


def gen_loop_constraints(n: Netlist, cap: int = 10 ** 5) -> KeyConstraintSet:
    cs = KeyConstraintSet(n)
    cycles, cs.loop_truncated = enumerate_latch_cycles(n, cap)
    for cyc in cycles:
        cs.records.append(ConstraintRecord(
            "loop", "cyc:" + ">".join(cyc), cycle=cyc))
    return cs


def gen_timing_constraints(n: Netlist, dm: DelayModel, clk: ClockSpec,
                           cap: int = 10 ** 6) -> KeyConstraintSet:
    cs = KeyConstraintSet(n, clk)
    inv = enumerate_windows(n, dm, clk, cap)
    cs.window_truncated = inv.truncated
    cs.paths = inv.paths
    for w in inv.windows:
        ident = (f"win:{w.path.path_id}[{w.start},{w.end})"
                 f"k{w.required_transitions}")
        cs.records.append(ConstraintRecord("window", ident, window=w))
    return cs


# -- counting ----------------------------------------------------------------------


class CountLimitError(Exception):
    pass


def count_valid_keys(n: Netlist, cset: KeyConstraintSet,
                     limit: int = 24) -> dict[str, int]:
    """Exact counts of keys satisfying the loop set, the window set, and
    both. Enumeration is over latch modes with constraint-aware pruning;
    latches untouched by any constraint contribute a free factor of 4."""
    bits = n.num_key_bits
    if bits > limit:
        raise CountLimitError(
            f"{bits} key bits exceeds the counting limit {limit}; raise the "
            "limit explicitly or shrink the lock")
    total = 1 << bits
    out = {"total": total}
    for name, which in (("loop", ("loop",)), ("timing", ("window",)),
                        ("intersection", ("loop", "window"))):
        out[name] = _count_modes(n, cset, which)
    return out


def _count_modes(n: Netlist, cset: KeyConstraintSet,
                 which: tuple[str, ...]) -> int:
    klatches = [c.name for c in n.klatches]
    keyed_set = set(klatches)
    fixed: dict[str, LatchMode] = {}
    for c in n.latches:
        if c.kind is CellKind.LATCH_P:
            fixed[c.name] = LatchMode.POS_PHASE
        elif c.kind is CellKind.LATCH_N:
            fixed[c.name] = LatchMode.NEG_PHASE

    # (keyed support, predicate over the partial mode map)
    preds: list[tuple[list[str], callable]] = []
    if "loop" in which:
        for r in cset.loop_records:
            keyed = [x for x in r.cycle if x in keyed_set]

            def loop_pred(modes, cyc=r.cycle, sup=tuple(keyed),
                          cache={}):
                sig = tuple(modes[x] for x in sup)
                hit = cache.get(sig)
                if hit is None:
                    hit = cache[sig] = cycle_modes_ok(
                        [modes.get(x, fixed.get(x)) for x in cyc])
                return hit
            preds.append((keyed, loop_pred))
    if "window" in which and cset.window_records:
        if cset.clk is None:
            raise ValueError("window counting needs a clock spec")
        by_path: dict[str, LatchPath] = {}
        for r in cset.window_records:
            by_path.setdefault(r.window.path.path_id, r.window.path)
        for path in by_path.values():
            keyed = [x for x in path.latches if x in keyed_set]

            def win_pred(modes, p=path, sup=tuple(keyed), cache={}):
                sig = tuple(modes[x] for x in sup)
                hit = cache.get(sig)
                if hit is None:
                    mm = {x: modes.get(x, fixed.get(x)) for x in p.latches}
                    hit = cache[sig] = not window_violations([p], mm, cset.clk)
                return hit
            preds.append((keyed, win_pred))

    touched: set[str] = set()
    for keyed, pred in preds:
        if not keyed:
            if not pred({}):
                return 0
        touched.update(keyed)
    order = [name for name in klatches if name in touched]
    opos = {name: i for i, name in enumerate(order)}
    depth_checks: dict[int, list] = {}
    for keyed, pred in preds:
        if keyed:
            depth_checks.setdefault(max(opos[x] for x in keyed),
                                    []).append(pred)

    free = len(klatches) - len(order)
    modes: dict[str, LatchMode] = {}
    all_modes = (LatchMode.LOGIC_DECOY, LatchMode.POS_PHASE,
                 LatchMode.NEG_PHASE, LatchMode.CLEAR)

    def rec(depth: int) -> int:
        if depth == len(order):
            return 1
        cnt = 0
        name = order[depth]
        for m in all_modes:
            modes[name] = m
            ok = True
            for pred in depth_checks.get(depth, ()):
                if not pred(modes):
                    ok = False
                    break
            if ok:
                cnt += rec(depth + 1)
        del modes[name]
        return cnt

    return rec(0) * (4 ** free)
