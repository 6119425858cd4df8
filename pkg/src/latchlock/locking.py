"""Latch-locking pipeline.

A lock run picks a flip-flop group, replaces each member with a
negative-phase master / positive-phase slave keyed-latch pair (optionally
retimed through adjacent single-input cells), then spends the remaining key
bits on delay decoys (Clear mode, inserted in series on slack-rich nets) and
logic decoys (constant-0 mode, XOR-merged random cones). Every insertion is
re-verified for timing and window legality under the correct key and reverted
if it breaks either; the finished lock is validated structurally, checked for
timing/window legality, and spot-checked for sequential equivalence against
the original before the result is returned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import inf

import networkx as nx

from ._util import rng_stream
from .cnf import CnfProblem, SharedStimulus
from .netlist import (Cell, CellKind, COMB_KINDS, GEN_PREFIX, KeyVector,
                      LatchMode, Netlist, fan_cones, validate)
from .sim import Trace, random_trace, seeded_state, simulate
from .timing import (ClockSpec, DelayModel, TimingError, arrival_and_slack,
                     complete_modes, enumerate_latch_paths, window_violations)

__all__ = [
    "LockConfig", "LockResult", "LatchRecord", "LockError",
    "select_ff_group", "convert_to_latches", "insert_delay_decoys",
    "insert_logic_decoys", "lock", "derive_locked_init",
    "manifest_to_json", "manifest_from_json", "constrain_locked_init",
]


class LockError(Exception):
    """Stage-tagged pipeline failure."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class LockConfig:
    key_bits: int
    decoy_ratio: float = 0.5
    seed: int = 0
    group_samples: int = 8
    retime_moves: int = 0          # alternate-phase move passes, 0 = off
    spot_check_cycles: int = 128
    spot_check_seeds: int = 2


# init transfer expressions: ("const", b) | ("ff", name) | ("not", expr)
InitExpr = tuple


@dataclass
class LatchRecord:
    name: str
    mode: LatchMode
    origin: str                    # converted | delay_decoy | logic_decoy
    init_expr: InitExpr = ("const", 0)


@dataclass
class LockResult:
    locked: Netlist
    correct_key: KeyVector
    latch_manifest: list[LatchRecord]
    proxy_stats: dict[str, int]


# -- sizing ---------------------------------------------------------------------


def _plan(cfg: LockConfig, available_ffs: int) -> tuple[int, int]:
    """(flip-flops to convert, decoy latch count) for the key budget."""
    if cfg.key_bits % 2 or cfg.key_bits < 2:
        raise LockError("config", f"key_bits must be even and >= 2, got {cfg.key_bits}")
    if cfg.decoy_ratio < 0:
        raise LockError("config", "decoy_ratio must be >= 0")
    total = cfg.key_bits // 2
    if total < 2:
        raise LockError("config", "a converted pair needs 2 latches = 4 key bits; "
                                  f"key_bits={cfg.key_bits} cannot convert any flip-flop")
    if available_ffs < 1:
        raise LockError("config", "netlist has no flip-flops to convert")
    n_conv = round(total / (2 * (1 + cfg.decoy_ratio)))
    n_conv = max(1, min(n_conv, total // 2, available_ffs))
    return n_conv, total - 2 * n_conv


# -- group selection --------------------------------------------------------------


def _comb_path_count(n: Netlist, src: Cell, dst: Cell, cap: int) -> int:
    """Distinct combinational paths src output -> dst data input, capped."""
    target = dst.inputs[0]
    count = 0
    stack = [src.output]
    while stack and count < cap:
        net = stack.pop()
        for c in n.fanout.get(net, []):
            if target in c.inputs and c is dst:
                count += 1
                if count >= cap:
                    break
            if c.kind in COMB_KINDS:
                stack.append(c.output)
    return min(count, cap)


def _ff_graph(n: Netlist, cap: int = 16) -> "nx.Graph":
    g = nx.Graph()
    ffs = n.flip_flops
    g.add_nodes_from(c.name for c in ffs)
    for a in ffs:
        for b in ffs:
            if a.name >= b.name:
                continue
            w = min(cap, _comb_path_count(n, a, b, cap)
                    + _comb_path_count(n, b, a, cap))
            if w:
                g.add_edge(a.name, b.name, weight=w)
    return g


def _fanin_delay(n: Netlist, dm: DelayModel) -> dict[str, int]:
    """Structural longest-delay cone feeding each flip-flop's data input."""
    depth: dict[str, int] = {}
    order = _comb_topo(n)
    for c in order:
        d = dm.delay_of(c)
        depth[c.output] = d + max((depth.get(i, 0) for i in c.inputs), default=0)
    return {c.name: depth.get(c.inputs[0], 0) for c in n.flip_flops}


def _comb_topo(n: Netlist) -> list[Cell]:
    from .netlist import topo_order
    order, cycle = topo_order(n, transparent=frozenset())
    if order is None:
        raise LockError("config", "netlist has a latch-free combinational cycle")
    return [c for c in order if c.kind in COMB_KINDS]


def _grow(g: "nx.Graph", comm: set[str], size: int,
          fanin: dict[str, int]) -> tuple[str, ...]:
    nodes = sorted(g.nodes)
    if not nodes:
        return ()

    def strength(x, members):
        return sum(g[x][y].get("weight", 1) for y in g.neighbors(x) if y in members)

    start = max(sorted(comm) or nodes,
                key=lambda x: (strength(x, comm or set(nodes)), -fanin[x]))
    chosen = {start}
    while len(chosen) < size:
        rest = [x for x in nodes if x not in chosen]
        if not rest:
            break
        rest.sort(key=lambda x: (-strength(x, chosen), x not in comm, fanin[x], x))
        chosen.add(rest[0])
    return tuple(sorted(chosen))


def select_ff_group(n: Netlist, cfg: LockConfig, dm: DelayModel) -> list[str]:
    """Interconnected flip-flop set sized for the conversion budget.

    Label-propagation communities over the FF adjacency graph (edge weight =
    distinct combinational path count, capped) seed the candidates; the group
    with the lowest cumulative fan-in delay wins across `group_samples` runs.
    """
    size, _ = _plan(cfg, len(n.flip_flops))
    if len(n.flip_flops) < size:
        raise LockError("group", f"need {size} flip-flops, netlist has "
                                 f"{len(n.flip_flops)}")
    g = _ff_graph(n)
    fanin = _fanin_delay(n, dm)
    rng = rng_stream(cfg.seed, "ff-group")
    best: tuple[int, tuple[str, ...]] | None = None
    for _ in range(max(1, cfg.group_samples)):
        sample_seed = rng.getrandbits(32)
        if g.number_of_edges():
            comms = nx.community.asyn_lpa_communities(g, weight="weight",
                                                      seed=sample_seed)
            comms = [set(c) for c in comms]
        else:
            comms = [set(g.nodes)]
        for comm in sorted(comms, key=lambda c: (-len(c), sorted(c))):
            grp = _grow(g, comm, size, fanin)
            if len(grp) != size:
                continue
            score = (sum(fanin[x] for x in grp), grp)
            if best is None or score < best:
                best = score
    if best is None:
        raise LockError("group", "no candidate group of the required size")
    return list(best[1])


# -- conversion -------------------------------------------------------------------


@dataclass
class ConversionResult:
    netlist: Netlist
    latches: list[str]
    init_exprs: dict[str, InitExpr] = field(default_factory=dict)
    moves_done: int = 0            # fresh-net counter across retime passes


def _next_key_nets(n: Netlist) -> tuple[str, str]:
    i = n.num_key_bits
    return f"{GEN_PREFIX}k{i}", f"{GEN_PREFIX}k{i + 1}"


def convert_to_latches(n: Netlist, group: list[str],
                       cfg: LockConfig) -> ConversionResult:
    """Replace each group flip-flop with a NegPhase master feeding a PosPhase
    slave; the original per-cycle reset masking is reproduced by ANDing the
    slave output with the inverted reset."""
    members = set(group)
    by_name = {c.name: c for c in n.cells}
    for x in group:
        if x not in by_name or by_name[x].kind is not CellKind.DFF:
            raise LockError("convert", f"{x} is not a flip-flop in this netlist")

    cells: list[Cell] = []
    key_inputs = list(n.key_inputs)
    latches: list[str] = []
    init_exprs: dict[str, InitExpr] = {}
    need_nrst = n.reset_net is not None and members
    nrst_net = f"{GEN_PREFIX}nrstn"
    for c in n.cells:
        if c.name not in members:
            cells.append(c)
            continue
        m_name, s_name = f"{GEN_PREFIX}m_{c.name}", f"{GEN_PREFIX}s_{c.name}"
        m_q = f"{GEN_PREFIX}mq_{c.name}"
        mk = (f"{GEN_PREFIX}k{len(key_inputs)}", f"{GEN_PREFIX}k{len(key_inputs) + 1}")
        key_inputs += mk
        sk = (f"{GEN_PREFIX}k{len(key_inputs)}", f"{GEN_PREFIX}k{len(key_inputs) + 1}")
        key_inputs += sk
        cells.append(Cell(m_name, CellKind.KLATCH, (c.inputs[0],), m_q, mk))
        if n.reset_net is None:
            cells.append(Cell(s_name, CellKind.KLATCH, (m_q,), c.output, sk))
        else:
            s_q = f"{GEN_PREFIX}sq_{c.name}"
            cells.append(Cell(s_name, CellKind.KLATCH, (m_q,), s_q, sk))
            cells.append(Cell(f"{GEN_PREFIX}rq_{c.name}", CellKind.AND,
                              (s_q, nrst_net), c.output))
        latches += [m_name, s_name]
        init_exprs[m_name] = ("ff", c.name)
        init_exprs[s_name] = ("ff", c.name)
    if need_nrst:
        cells.append(Cell(f"{GEN_PREFIX}nrst", CellKind.NOT,
                          (n.reset_net,), nrst_net))
    out = n.replace_cells(cells, key_inputs=key_inputs)
    res = ConversionResult(out, latches, init_exprs)
    for i in range(cfg.retime_moves):
        _retime_pass(res, forward=(i % 2 == 0))
    return res


def _retime_pass(res: ConversionResult, forward: bool) -> None:
    """Move each latch of one phase one single-input cell along its wire.

    Positive-phase (slave) latches move forward, negative-phase (master)
    latches move backward; either direction needs exclusive fanout of the
    crossed wire so no other path sees the shuffle. Counts per path are
    unchanged because the latch keeps its position in every path's latch
    sequence.
    """
    n = res.netlist
    phase = res.latches[1::2] if forward else res.latches[0::2]
    cells = list(n.cells)
    index = {c.name: i for i, c in enumerate(cells)}
    for lname in phase:
        latch = cells[index[lname]]
        if forward:
            if latch.output in n.outputs:
                continue
            readers = n.fanout.get(latch.output, [])
            if len(readers) != 1:
                continue
            gate = cells[index[readers[0].name]]
            if gate.kind not in (CellKind.NOT, CellKind.BUF):
                continue
            mid = f"{GEN_PREFIX}rt{res.moves_done}"
            cells[index[gate.name]] = Cell(gate.name, gate.kind,
                                           latch.inputs, mid)
            cells[index[lname]] = Cell(lname, latch.kind, (mid,),
                                       gate.output, latch.key_ins)
        else:
            gate = n.driver.get(latch.inputs[0])
            if gate is None or gate.kind not in (CellKind.NOT, CellKind.BUF):
                continue
            if gate.output in n.outputs or len(n.fanout.get(gate.output, [])) != 1:
                continue
            mid = f"{GEN_PREFIX}rt{res.moves_done}"
            cells[index[lname]] = Cell(lname, latch.kind, gate.inputs,
                                       mid, latch.key_ins)
            cells[index[gate.name]] = Cell(gate.name, gate.kind, (mid,),
                                           latch.output)
        if gate.kind is CellKind.NOT:
            res.init_exprs[lname] = ("not", res.init_exprs[lname])
        res.moves_done += 1
        n = n.replace_cells(cells)
        index = {c.name: i for i, c in enumerate(cells)}
    res.netlist = n


# -- legality ---------------------------------------------------------------------


def _partial_key(n: Netlist, modes: dict[str, LatchMode]) -> KeyVector:
    bits: list[int] = [0] * n.num_key_bits
    for c in n.klatches:
        k0, k1 = modes[c.name].bits
        bits[n.key_index[c.key_ins[0]]] = k0
        bits[n.key_index[c.key_ins[1]]] = k1
    return KeyVector(tuple(bits))


def _legal(n: Netlist, dm: DelayModel, clk: ClockSpec,
           modes: dict[str, LatchMode]) -> bool:
    key = _partial_key(n, modes)
    try:
        tr = arrival_and_slack(n, dm, clk, key)
    except TimingError:
        return False
    if min((s for s in tr.slack.values() if s < inf), default=0) < 0:
        return False
    paths = enumerate_latch_paths(n, dm).paths
    return not window_violations(paths, complete_modes(n, key), clk)


# -- delay decoys -----------------------------------------------------------------


def _group_cone_nets(n: Netlist) -> list[str]:
    roots = [c.name for c in n.klatches]
    if not roots:
        return []
    cone = fan_cones(n, roots, "out") | fan_cones(n, roots, "in")
    return sorted(c.output for c in n.cells if c.name in cone)


def insert_delay_decoys(n: Netlist, count: int, dm: DelayModel,
                        clk: ClockSpec, cfg: LockConfig,
                        modes: dict[str, LatchMode] | None = None,
                        ) -> tuple[Netlist, list[str]]:
    """Series Clear-mode latches on slack-rich nets near the locked group.

    Every placement is committed only if timing stays non-negative and no
    delay window rule fires under the correct key; illegal sites revert.
    """
    if count == 0:
        return n, []
    modes = dict(modes or {})
    for c in n.klatches:
        if c.name not in modes:
            raise LockError("delay-decoys", f"mode of existing latch {c.name} unknown")
    rng = rng_stream(cfg.seed, "delay-decoys")
    placed: list[str] = []
    attempts = 0
    while len(placed) < count:
        tr = arrival_and_slack(n, dm, clk, _partial_key(n, modes))
        sites = [net for net in _group_cone_nets(n)
                 if tr.slack.get(net, -1) > dm.d_latch]
        rng.shuffle(sites)
        committed = False
        for net in sites:
            attempts += 1
            name = f"{GEN_PREFIX}dd{len(placed)}"
            knets = _next_key_nets(n)
            trial = _series_insert(n, net, name, knets)
            trial_modes = dict(modes, **{name: LatchMode.CLEAR})
            if _legal(trial, dm, clk, trial_modes):
                n, modes = trial, trial_modes
                placed.append(name)
                committed = True
                break
        if not committed:
            raise LockError(
                "delay-decoys",
                f"only {len(placed)} of {count} delay decoys placeable "
                f"(no remaining legal slack site after {attempts} attempts)")
    return n, placed


def _series_insert(n: Netlist, net: str, name: str,
                   knets: tuple[str, str]) -> Netlist:
    drv = n.driver[net]
    mid = f"{GEN_PREFIX}w_{name}"
    cells = [c if c.name != drv.name else
             Cell(c.name, c.kind, c.inputs, mid, c.key_ins)
             for c in n.cells]
    cells.append(Cell(name, CellKind.KLATCH, (mid,), net, knets))
    return n.replace_cells(cells, key_inputs=n.key_inputs + list(knets))


# -- logic decoys -----------------------------------------------------------------

_CONE_GATES = (CellKind.AND, CellKind.OR, CellKind.XOR, CellKind.NAND)


def insert_logic_decoys(n: Netlist, count: int, cfg: LockConfig,
                        modes: dict[str, LatchMode] | None = None,
                        dm: DelayModel | None = None,
                        clk: ClockSpec | None = None,
                        ) -> tuple[Netlist, list[str]]:
    """Constant-0 latches fed by small random cones over latch outputs, each
    XOR-merged into an existing net (identity under the correct key)."""
    if count == 0:
        return n, []
    modes = dict(modes or {})
    rng = rng_stream(cfg.seed, "logic-decoys")
    placed: list[str] = []
    while len(placed) < count:
        leaves = sorted(c.output for c in n.klatches)
        if len(leaves) < 2:
            raise LockError("logic-decoys", "need at least two latch outputs "
                                            "to drive a decoy cone")
        targets = [t for t in _group_cone_nets(n) if t not in n.key_inputs]
        committed = False
        for _ in range(24):
            idx = len(placed)
            fan = rng.randrange(2, min(4, len(leaves)) + 1)
            picks = rng.sample(leaves, fan)
            target = targets[rng.randrange(len(targets))]
            trial, name = _build_logic_decoy(n, idx, picks, target, rng)
            trial_modes = dict(modes, **{name: LatchMode.LOGIC_DECOY})
            if dm is None or clk is None or _legal(trial, dm, clk, trial_modes):
                n, modes = trial, trial_modes
                placed.append(name)
                committed = True
                break
        if not committed:
            raise LockError("logic-decoys",
                            f"only {len(placed)} of {count} logic decoys "
                            "placeable without breaking timing legality")
    return n, placed


def _build_logic_decoy(n: Netlist, idx: int, picks: list[str], target: str,
                       rng) -> tuple[Netlist, str]:
    cells = list(n.cells)
    nets = list(picks)
    j = 0
    while len(nets) > 1:
        kind = _CONE_GATES[rng.randrange(len(_CONE_GATES))]
        out = f"{GEN_PREFIX}lc{idx}_{j}"
        cells.append(Cell(out, kind, (nets[0], nets[1]), out))
        nets = nets[2:] + [out]
        j += 1
    name = f"{GEN_PREFIX}ld{idx}"
    knets = _next_key_nets(n)
    d_q = f"{GEN_PREFIX}ldq{idx}"
    cells.append(Cell(name, CellKind.KLATCH, (nets[0],), d_q, knets))
    pre = f"{GEN_PREFIX}lp{idx}"
    for i, c in enumerate(cells):
        if c.output == target:
            cells[i] = Cell(c.name, c.kind, c.inputs, pre, c.key_ins)
            break
    cells.append(Cell(f"{GEN_PREFIX}lx{idx}", CellKind.XOR, (pre, d_q), target))
    return n.replace_cells(cells, key_inputs=n.key_inputs + list(knets)), name


# -- pipeline ---------------------------------------------------------------------


def _unit_critical_path(n: Netlist) -> int:
    depth: dict[str, int] = {}
    best = 0
    for c in _comb_topo(n):
        d = 1 + max((depth.get(i, 0) for i in c.inputs), default=0)
        depth[c.output] = d
        best = max(best, d)
    return best


def default_clock(n: Netlist, dm: DelayModel) -> ClockSpec:
    """Generous even period: twice the structural worst path plus latch room."""
    depth: dict[str, int] = {}
    worst = 0
    for c in _comb_topo(n):
        d = dm.delay_of(c) + max((depth.get(i, 0) for i in c.inputs), default=0)
        depth[c.output] = d
        worst = max(worst, d)
    return ClockSpec(2 * (worst + 4 * dm.d_latch))


def lock(n: Netlist, cfg: LockConfig, dm: DelayModel | None = None,
         clk: ClockSpec | None = None) -> LockResult:
    dm = dm or DelayModel()
    clk = clk or default_clock(n, dm)
    diags = validate(n)
    if diags:
        raise LockError("validate", f"input netlist is malformed: {diags[0]}")
    if n.klatches:
        raise LockError("validate", "netlist already contains keyed latches")

    n_conv, n_decoys = _plan(cfg, len(n.flip_flops))
    group = select_ff_group(n, cfg, dm)

    conv = convert_to_latches(n, group, cfg)
    locked = conv.netlist
    manifest: list[LatchRecord] = []
    modes: dict[str, LatchMode] = {}
    for i, lname in enumerate(conv.latches):
        mode = LatchMode.NEG_PHASE if i % 2 == 0 else LatchMode.POS_PHASE
        modes[lname] = mode
        manifest.append(LatchRecord(lname, mode, "converted",
                                    conv.init_exprs[lname]))
    if not _legal(locked, dm, clk, modes):
        raise LockError("convert", "converted netlist violates timing; "
                                   "clock period too tight for this design")

    n_delay = (n_decoys + 1) // 2
    n_logic = n_decoys - n_delay
    try:
        locked, dd = insert_delay_decoys(locked, n_delay, dm, clk, cfg, modes)
    except LockError:
        dd = []
        n_logic = n_decoys  # no slack sites: spend the budget on logic decoys
        if n_delay:
            locked2, dd = _try_partial_delay(locked, n_delay, dm, clk, cfg, modes)
            locked = locked2
            n_logic = n_decoys - len(dd)
    for name in dd:
        modes[name] = LatchMode.CLEAR
        manifest.append(LatchRecord(name, LatchMode.CLEAR, "delay_decoy"))

    locked, ld = insert_logic_decoys(locked, n_logic, cfg, modes, dm, clk)
    for name in ld:
        modes[name] = LatchMode.LOGIC_DECOY
        manifest.append(LatchRecord(name, LatchMode.LOGIC_DECOY, "logic_decoy"))

    diags = validate(locked)
    if diags:
        raise LockError("validate", f"locked netlist is malformed: {diags[0]}")
    key = _partial_key(locked, modes)
    if 2 * len(locked.klatches) != cfg.key_bits:
        raise LockError("keying", f"{len(locked.klatches)} latches cannot "
                                  f"consume {cfg.key_bits} key bits")
    if not _legal(locked, dm, clk, modes):
        raise LockError("timing", "locked netlist violates timing or a delay "
                                  "window under the correct key")
    _spot_check(n, locked, key, manifest, cfg)

    stats = {
        "gate_count_delta": len(locked.cells) - len(n.cells),
        "critical_path_delta": _unit_critical_path(locked) - _unit_critical_path(n),
    }
    return LockResult(locked, key, manifest, stats)


def _try_partial_delay(n, want, dm, clk, cfg, modes):
    for k in range(want - 1, 0, -1):
        try:
            return insert_delay_decoys(n, k, dm, clk, cfg, modes)
        except LockError:
            continue
    return n, []


def _spot_check(orig: Netlist, locked: Netlist, key: KeyVector,
                manifest: list[LatchRecord], cfg: LockConfig) -> None:
    rng = rng_stream(cfg.seed, "spot-check")
    for _ in range(cfg.spot_check_seeds):
        stim_seed = rng.getrandbits(48)
        state_seed = rng.getrandbits(48)
        trace = random_trace(orig, cfg.spot_check_cycles, stim_seed,
                             state_seed=state_seed)
        ref = simulate(orig, None, trace)
        init = derive_locked_init(manifest, seeded_state(orig, state_seed))
        got = simulate(locked, key, Trace(list(trace.steps),
                                          trace.state_seed, init))
        for i, (a, b) in enumerate(zip(ref.steps, got.steps)):
            if a.outputs != b.outputs:
                raise LockError("equivalence",
                                f"correct-key mismatch at half-cycle {i}: "
                                f"{a.outputs} vs {b.outputs}")


# -- init transfer ----------------------------------------------------------------


def _eval_init(expr: InitExpr, orig_init: dict[str, int]) -> int:
    op = expr[0]
    if op == "const":
        return int(expr[1])
    if op == "ff":
        return int(orig_init[expr[1]])
    if op == "not":
        return 1 - _eval_init(expr[1], orig_init)
    raise ValueError(f"unknown init expression {expr!r}")


def derive_locked_init(manifest: list[LatchRecord],
                       orig_init: dict[str, int]) -> dict[str, int]:
    """Initial state for the locked netlist matching an original-design
    initial state; unconverted elements keep their own entries."""
    out = dict(orig_init)
    replaced: set[str] = set()
    for rec in manifest:
        out[rec.name] = _eval_init(rec.init_expr, orig_init)
        e = rec.init_expr
        while e[0] == "not":
            e = e[1]
        if rec.origin == "converted" and e[0] == "ff":
            replaced.add(e[1])
    for ff in replaced:
        out.pop(ff, None)
    return out


def _expr_lit(problem: CnfProblem, stim: SharedStimulus, expr: InitExpr) -> int:
    op = expr[0]
    if op == "const":
        return 1 if expr[1] else 0
    if op == "ff":
        return stim.init_lit(expr[1])
    if op == "not":
        return _expr_lit(problem, stim, expr[1]) ^ 1
    raise ValueError(f"unknown init expression {expr!r}")


def constrain_locked_init(problem: CnfProblem, stim: SharedStimulus,
                          manifest: list[LatchRecord]) -> None:
    """Tie locked-copy initial-state variables to the original copy's so a
    miter quantifies over shared starting states. Decoy inits stay free."""
    for rec in manifest:
        if rec.origin != "converted":
            continue
        problem.assert_eq(stim.init_lit(rec.name),
                          _expr_lit(problem, stim, rec.init_expr))


# -- manifest serialization ---------------------------------------------------------


def _expr_doc(expr: InitExpr):
    return list(expr[:1]) + [(_expr_doc(e) if isinstance(e, tuple) else e)
                             for e in expr[1:]]


def _expr_parse(doc) -> InitExpr:
    return tuple(_expr_parse(e) if isinstance(e, list) else e for e in doc)


def manifest_to_json(manifest: list[LatchRecord]) -> str:
    return json.dumps({"latches": [{
        "name": r.name,
        "mode": r.mode.name,
        "origin": r.origin,
        "init": _expr_doc(r.init_expr),
    } for r in manifest]}, indent=2, sort_keys=True) + "\n"


def manifest_from_json(text: str) -> list[LatchRecord]:
    doc = json.loads(text)
    return [LatchRecord(e["name"], LatchMode[e["mode"]], e["origin"],
                        _expr_parse(e["init"]))
            for e in doc["latches"]]
