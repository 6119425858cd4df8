"""Static propagation-delay analysis for latch-based netlists.

Time is measured relative to the opening edge of the current transparency
window. Launch points (primary inputs, DFF outputs) start at 0 in positive
phase. Crossing a latch into the opposite phase subtracts half a period and
clamps at the window open (a signal cannot leave a latch before it opens);
same-phase and Clear traversals just add the latch feedthrough delay. The
capture deadline, relative to the last window open, is t_period when the
path ends in positive phase and half that when it ends in negative phase.

Required times run the same recurrence backwards without the window-open
clamp, which makes reported slack conservative. Every delay is an integer
number of picoseconds and t_period must be even so half-periods stay exact.

Paths are enumerated anchor-to-anchor (PI/DFF output to PO/DFF input)
through combinational cells and latches; positions along a path are
cumulative delays at each latch output. Window constraints slide spans of
t_period (>=1 phase transition) and 1.5 t_period (>=2) along that axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .netlist import (Cell, CellKind, COMB_KINDS, KeyVector, LatchMode,
                      LATCH_KINDS, Netlist, topo_order)

DEFAULT_COMB_PS = 10
DEFAULT_LATCH_PS = 20

NEG_INF = float("-inf")
POS_INF = float("inf")


class TimingError(Exception):
    pass


@dataclass
class DelayModel:
    comb_ps: dict[CellKind, int] = field(default_factory=dict)
    d_latch: int = DEFAULT_LATCH_PS
    overrides: dict[str, int] = field(default_factory=dict)

    def delay_of(self, cell: Cell) -> int:
        if cell.name in self.overrides:
            return self.overrides[cell.name]
        if cell.kind in LATCH_KINDS:
            return self.d_latch
        if cell.kind in (CellKind.CONST0, CellKind.CONST1):
            return 0
        return self.comb_ps.get(cell.kind, DEFAULT_COMB_PS)


@dataclass
class ClockSpec:
    t_period: int

    def __post_init__(self):
        if self.t_period <= 0 or self.t_period % 2:
            raise TimingError("t_period must be a positive even picosecond count")


def load_delay_spec(text: str) -> tuple[DelayModel, ClockSpec | None]:
    """JSON: {"period_ps": N, "default": {"AND": d, ..., "LATCH": d},
    "cells": {"<name>": d}}. Unknown kind names are rejected."""
    doc = json.loads(text)
    dm = DelayModel()
    for kname, d in doc.get("default", {}).items():
        if kname == "LATCH":
            dm.d_latch = int(d)
        else:
            try:
                dm.comb_ps[CellKind[kname]] = int(d)
            except KeyError:
                raise TimingError(f"unknown cell kind in delay file: {kname}")
    dm.overrides = {name: int(d) for name, d in doc.get("cells", {}).items()}
    clk = ClockSpec(int(doc["period_ps"])) if "period_ps" in doc else None
    return dm, clk


def dump_delay_spec(dm: DelayModel, clk: ClockSpec | None) -> str:
    doc: dict = {"default": {k.name: v for k, v in sorted(
        dm.comb_ps.items(), key=lambda kv: kv[0].name)}}
    doc["default"]["LATCH"] = dm.d_latch
    if dm.overrides:
        doc["cells"] = dict(sorted(dm.overrides.items()))
    if clk is not None:
        doc["period_ps"] = clk.t_period
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- arrival / slack -------------------------------------------------------


@dataclass
class TimingResult:
    arrival: dict[str, float]   # worst relative arrival per net (-inf: no path)
    slack: dict[str, float]     # min over parities of required - arrival
    arrival_pn: dict[str, list[float]]  # [positive, negative] parity detail


def _mode_of(cell: Cell, modes: dict[str, LatchMode]) -> LatchMode:
    if cell.kind is CellKind.LATCH_P:
        return LatchMode.POS_PHASE
    if cell.kind is CellKind.LATCH_N:
        return LatchMode.NEG_PHASE
    return modes[cell.name]


def _forward_sweeps(n: Netlist, dm: DelayModel, clk: ClockSpec,
                    modes: dict[str, LatchMode],
                    arr: dict[str, list[float]]) -> None:
    """Relax per-parity arrivals to a fixpoint; raises on divergence."""
    half = clk.t_period // 2
    order, cyc = topo_order(n, transparent=frozenset())
    if order is None:
        raise TimingError(f"latch-free combinational cycle: {cyc}")
    cap = 4 * max(1, len(n.latches)) + 8
    for _ in range(cap):
        changed = False
        for c in order:
            if c.kind is CellKind.DFF:
                continue
            if c.kind in (CellKind.CONST0, CellKind.CONST1):
                continue
            d = dm.delay_of(c)
            if c.kind in LATCH_KINDS:
                m = _mode_of(c, modes)
                ap, an = arr[c.inputs[0]]
                if m is LatchMode.LOGIC_DECOY:
                    new = [NEG_INF, NEG_INF]
                elif m is LatchMode.CLEAR:
                    new = [ap + d if ap > NEG_INF else NEG_INF,
                           an + d if an > NEG_INF else NEG_INF]
                elif m is LatchMode.POS_PHASE:
                    best = NEG_INF
                    if ap > NEG_INF:
                        best = ap + d
                    if an > NEG_INF:
                        best = max(best, max(an - half, 0) + d)
                    new = [best, NEG_INF]
                else:
                    best = NEG_INF
                    if an > NEG_INF:
                        best = an + d
                    if ap > NEG_INF:
                        best = max(best, max(ap - half, 0) + d)
                    new = [NEG_INF, best]
            else:
                vp = max((arr[i][0] for i in c.inputs), default=NEG_INF)
                vn = max((arr[i][1] for i in c.inputs), default=NEG_INF)
                new = [vp + d if vp > NEG_INF else NEG_INF,
                       vn + d if vn > NEG_INF else NEG_INF]
            if new[0] > arr[c.output][0] or new[1] > arr[c.output][1]:
                cur = arr[c.output]
                arr[c.output] = [max(cur[0], new[0]), max(cur[1], new[1])]
                changed = True
        if not changed:
            return
    bad = sorted(net for net, v in arr.items()
                 if v[0] > 4 * clk.t_period or v[1] > 4 * clk.t_period)
    raise TimingError("arrival divergence (transparent loop slower than the "
                      f"clock): {bad[:8]}")


def _fresh_arrivals(n: Netlist) -> dict[str, list[float]]:
    arr = {net: [NEG_INF, NEG_INF] for net in n.source_nets()}
    for c in n.cells:
        arr[c.output] = [NEG_INF, NEG_INF]
    for net in n.inputs:
        arr[net] = [0, NEG_INF]
    if n.reset_net:
        arr[n.reset_net] = [0, NEG_INF]
    for c in n.flip_flops:
        arr[c.output] = [0, NEG_INF]
    return arr


def arrival_and_slack(n: Netlist, dm: DelayModel, clk: ClockSpec,
                      key: KeyVector) -> TimingResult:
    modes = key.decode(n)
    _check_transparent_acyclic(n, modes)
    arr = _fresh_arrivals(n)
    _forward_sweeps(n, dm, clk, modes, arr)

    half = clk.t_period // 2
    req: dict[str, list[float]] = {net: [POS_INF, POS_INF] for net in arr}
    for net in n.outputs:
        req[net] = [min(req[net][0], clk.t_period), min(req[net][1], half)]
    for c in n.flip_flops:
        dnet = c.inputs[0]
        req[dnet] = [min(req[dnet][0], clk.t_period), min(req[dnet][1], half)]

    order, _ = topo_order(n, transparent=frozenset())
    cap = 4 * max(1, len(n.latches)) + 8
    for _ in range(cap):
        changed = False
        for c in reversed(order):
            if c.kind is CellKind.DFF or c.kind in (CellKind.CONST0, CellKind.CONST1):
                continue
            d = dm.delay_of(c)
            rp, rn = req[c.output]
            if c.kind in LATCH_KINDS:
                m = _mode_of(c, modes)
                if m is LatchMode.LOGIC_DECOY:
                    continue
                if m is LatchMode.CLEAR:
                    cand = [rp - d, rn - d]
                elif m is LatchMode.POS_PHASE:
                    cand = [rp - d, rp - d + half]
                else:
                    cand = [rn - d + half, rn - d]
                tgt = req[c.inputs[0]]
                new = [min(tgt[0], cand[0]), min(tgt[1], cand[1])]
                if new != tgt:
                    req[c.inputs[0]] = new
                    changed = True
            else:
                for i in c.inputs:
                    tgt = req[i]
                    new = [min(tgt[0], rp - d), min(tgt[1], rn - d)]
                    if new != tgt:
                        req[i] = new
                        changed = True
        if not changed:
            break

    arrival = {}
    slack = {}
    for net, (ap, an) in arr.items():
        arrival[net] = max(ap, an)
        s = POS_INF
        if ap > NEG_INF and req[net][0] < POS_INF:
            s = min(s, req[net][0] - ap)
        if an > NEG_INF and req[net][1] < POS_INF:
            s = min(s, req[net][1] - an)
        slack[net] = s
    return TimingResult(arrival, slack, arr)


def incremental_arrival(n_new: Netlist, dm: DelayModel, clk: ClockSpec,
                        key_new: KeyVector, prev: dict[str, list[float]],
                        ) -> dict[str, list[float]]:
    """Forward-only update after cell insertion (arrivals never decrease:
    insertions only lengthen paths). Seeds from the previous result and
    relaxes to the same fixpoint a scratch run reaches."""
    modes = key_new.decode(n_new)
    arr = _fresh_arrivals(n_new)
    for net, v in prev.items():
        if net in arr:
            arr[net] = [max(arr[net][0], v[0]), max(arr[net][1], v[1])]
    _forward_sweeps(n_new, dm, clk, modes, arr)
    return arr


def _check_transparent_acyclic(n: Netlist, modes: dict[str, LatchMode]) -> None:
    for high in (True, False):
        trans = set()
        for c in n.latches:
            m = _mode_of(c, modes)
            if m is LatchMode.CLEAR or \
               (m is LatchMode.POS_PHASE and high) or \
               (m is LatchMode.NEG_PHASE and not high):
                trans.add(c.name)
        order, cyc = topo_order(n, transparent=frozenset(trans))
        if order is None:
            loop = sorted(c for c in cyc if c in trans)
            raise TimingError(f"transparent cycle in {'High' if high else 'Low'} "
                              f"phase: {loop}")


# -- latch path enumeration ---------------------------------------------------


@dataclass(frozen=True)
class LatchPath:
    """Anchor-to-anchor (or latch-to-itself) path through >=1 latch.

    `positions[i]` is the cumulative delay at latch i's output; `total` the
    delay at the sink anchor input. `boundaries()` adds the two anchors, so
    adjacency j spans (boundaries[j], boundaries[j+1]) for j in 0..len(latches).
    """
    source: str
    sink: str
    latches: tuple[str, ...]
    positions: tuple[int, ...]
    total: int
    cyclic: bool = False

    def boundaries(self) -> list[int]:
        return [0, *self.positions, self.total]

    @property
    def path_id(self) -> str:
        tag = "cyc" if self.cyclic else "lin"
        return f"{tag}:{self.source}>{'>'.join(self.latches)}>{self.sink}@{self.total}"


@dataclass
class PathInventory:
    paths: list[LatchPath]
    truncated: bool
    explored: int
    cap: int


def enumerate_latch_paths(n: Netlist, dm: DelayModel,
                          cap: int = 10 ** 6) -> PathInventory:
    """All simple anchor-to-anchor paths through at least one latch.

    Anchors: primary inputs and DFF outputs (sources); primary outputs and
    DFF data inputs (sinks). Deterministic DFS in netlist order; stops with
    truncated=True once `cap` paths are collected."""
    out_set = set(n.outputs)
    found: set[LatchPath] = set()
    explored = 0
    truncated = False
    sources = [(net, net) for net in n.inputs]
    sources += [(c.output, c.output) for c in n.flip_flops]

    for src_net, src_name in sources:
        if truncated:
            break
        # stack entries: (net, cum_delay, latch names, positions, on_path latches)
        stack = [(src_net, 0, (), (), frozenset())]
        while stack:
            net, cum, lats, poss, seen = stack.pop()
            explored += 1
            if net in out_set and lats:
                found.add(LatchPath(src_name, net, lats, poss, cum))
                if len(found) >= cap:
                    truncated = True
                    break
            for cell in n.fanout.get(net, []):
                if cell.kind is CellKind.DFF:
                    if lats:
                        found.add(LatchPath(src_name, cell.name, lats, poss, cum))
                        if len(found) >= cap:
                            truncated = True
                            break
                elif cell.kind in LATCH_KINDS:
                    if cell.name in seen:
                        continue
                    p = cum + dm.delay_of(cell)
                    stack.append((cell.output, p, lats + (cell.name,),
                                  poss + (p,), seen | {cell.name}))
                else:
                    stack.append((cell.output, cum + dm.delay_of(cell),
                                  lats, poss, seen))
            if truncated:
                break
    paths = sorted(found, key=lambda p: (p.source, p.latches, p.positions,
                                         p.total, p.sink))
    return PathInventory(paths, truncated, explored, cap)


def enumerate_latch_cycle_paths(n: Netlist, dm: DelayModel,
                                cap: int = 10 ** 5) -> PathInventory:
    """Simple latch-to-itself paths (the loop closes at the starting latch).

    Position 0 is the starting latch's output; the closing latch instance is
    not repeated in `latches`."""
    found: set[LatchPath] = set()
    explored = 0
    truncated = False
    for start in n.latches:
        if truncated:
            break
        stack = [(start.output, 0, (), (), frozenset())]
        while stack:
            net, cum, lats, poss, seen = stack.pop()
            explored += 1
            for cell in n.fanout.get(net, []):
                if cell.kind is CellKind.DFF:
                    continue
                if cell.name == start.name:
                    found.add(LatchPath(start.name, start.name, lats, poss,
                                        cum, cyclic=True))
                    if len(found) >= cap:
                        truncated = True
                        break
                    continue
                if cell.kind in LATCH_KINDS:
                    if cell.name in seen:
                        continue
                    p = cum + dm.delay_of(cell)
                    stack.append((cell.output, p, lats + (cell.name,),
                                  poss + (p,), seen | {cell.name}))
                else:
                    stack.append((cell.output, cum + dm.delay_of(cell),
                                  lats, poss, seen))
            if truncated:
                break
    paths = sorted(found, key=lambda p: (p.source, p.latches, p.positions,
                                         p.total, p.sink))
    return PathInventory(paths, truncated, explored, cap)


# -- phase resolution ----------------------------------------------------------


def transition_flags(mode_seq: list[LatchMode],
                     anchor_phase: int = 0) -> tuple[bool, list[int]]:
    """(broken, adjacency transition flags). Flag j covers the hop into
    element j+1 (latches first, then the sink anchor). Clear inherits the
    upstream phase; any mode-00 latch marks the path broken."""
    flags = []
    cur = anchor_phase
    broken = False
    for m in mode_seq:
        if m is LatchMode.LOGIC_DECOY:
            broken = True
            flags.append(0)
        elif m is LatchMode.CLEAR:
            flags.append(0)
        else:
            new = 1 if m is LatchMode.NEG_PHASE else 0
            flags.append(1 if new != cur else 0)
            cur = new
    flags.append(1 if cur != anchor_phase else 0)
    return broken, flags


def transition_count(mode_seq: list[LatchMode],
                     anchor_phase: int = 0) -> int | None:
    """Phase transitions along a both-ends-anchored path; None if broken."""
    broken, flags = transition_flags(mode_seq, anchor_phase)
    return None if broken else sum(flags)


# -- windows ------------------------------------------------------------------


@dataclass(frozen=True)
class LatchPathWindow:
    path: LatchPath
    start: int
    end: int
    required_transitions: int
    adjacencies: tuple[int, ...]  # adjacency indices overlapping the window

    @property
    def window_len(self) -> int:
        return self.end - self.start


@dataclass
class WindowInventory:
    windows: list[LatchPathWindow]
    paths: list[LatchPath]
    truncated: bool
    explored: int
    cap: int


def _extremal_windows(path: LatchPath, w: int, k: int) -> list[LatchPathWindow]:
    d = path.total
    if d < w:
        return []
    bounds = path.boundaries()
    starts = set()
    for b in bounds:
        for s in (b, b - w):
            starts.add(min(max(s, 0), d - w))
    wins: dict[tuple[int, ...], LatchPathWindow] = {}
    for s in sorted(starts):
        ov = tuple(j for j in range(len(bounds) - 1)
                   if bounds[j] < s + w and bounds[j + 1] > s)
        if ov not in wins:
            wins[ov] = LatchPathWindow(path, s, s + w, k, ov)
    # subset windows imply superset windows; keep only the minimal antichain
    keep = [wins[a] for a in wins
            if not any(set(b) < set(a) for b in wins if b != a)]
    keep.sort(key=lambda x: x.start)
    return keep


def enumerate_windows(n: Netlist, dm: DelayModel, clk: ClockSpec,
                      cap: int = 10 ** 6) -> WindowInventory:
    inv = enumerate_latch_paths(n, dm, cap)
    t = clk.t_period
    windows: list[LatchPathWindow] = []
    for p in inv.paths:
        windows.extend(_extremal_windows(p, t, 1))
        windows.extend(_extremal_windows(p, t + t // 2, 2))
    return WindowInventory(windows, inv.paths, inv.truncated, inv.explored, cap)


def complete_modes(n: Netlist, key: KeyVector) -> dict[str, LatchMode]:
    """Resolved mode for every latch: keyed ones from the key, fixed-kind
    ones from their kind."""
    modes = key.decode(n)
    for c in n.latches:
        if c.kind is CellKind.LATCH_P:
            modes[c.name] = LatchMode.POS_PHASE
        elif c.kind is CellKind.LATCH_N:
            modes[c.name] = LatchMode.NEG_PHASE
    return modes


def window_violations(paths: list[LatchPath], modes: dict[str, LatchMode],
                      clk: ClockSpec) -> list[tuple[str, int, int]]:
    """Continuous sliding-window check per key: returns (path_id, window
    length, required count) for every violated rule. Independent of the
    extremal-window enumeration, for cross-checking."""
    out = []
    t = clk.t_period
    for p in paths:
        if p.cyclic:
            continue
        try:
            mode_seq = [modes[name] for name in p.latches]
        except KeyError as e:
            raise TimingError(f"window check is missing a mode for latch {e}")
        broken, flags = transition_flags(mode_seq)
        if broken:
            continue
        bounds = p.boundaries()
        ivals = [(bounds[j], bounds[j + 1])
                 for j, f in enumerate(flags) if f]
        for w, k in ((t, 1), (t + t // 2, 2)):
            if p.total < w:
                continue
            if _window_rule_violated(ivals, p.total, w, k):
                out.append((p.path_id, w, k))
    return out


def _window_rule_violated(ivals: list[tuple[int, int]], total: int,
                          w: int, k: int) -> bool:
    """ivals: disjoint ordered open transition intervals on [0, total]."""
    if k == 1:
        prev = 0
        for a, b in ivals:
            if a - prev >= w:
                return True
            prev = b
        return total - prev >= w
    # k == 2: violated iff some w-window overlaps at most one interval,
    # i.e. fits between the end of interval i-1 and the start of interval
    # i+1 for some i in -1..len-1 (sentinels at the path ends)
    starts = [a for a, _ in ivals]
    ends = [b for _, b in ivals]
    r = len(ivals)
    for i in range(-1, r):
        lo = ends[i - 1] if i >= 1 else 0
        hi = starts[i + 1] if i + 1 < r else total
        if hi - lo >= w:
            return True
    return False
