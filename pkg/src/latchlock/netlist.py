"""Gate-level netlist model: cells, key vectors, validation, ordering, cones.

A netlist is a set of single-driver nets. Sequential cells are DFF (positive
edge, reset to 0 while the declared reset net is high), the keyed latch KLATCH
(two key bits select constant-0 / clock-high transparent / clock-low
transparent / always transparent), and the fixed-phase latches LATCH_P and
LATCH_N. Everything else is combinational. Combinational cycles are permitted
only when they pass through a latch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum


class NetlistError(Exception):
    pass


class CellKind(str, Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"
    MUX = "MUX"
    CONST0 = "CONST0"
    CONST1 = "CONST1"
    DFF = "DFF"
    KLATCH = "KLATCH"
    LATCH_P = "LATCH_P"
    LATCH_N = "LATCH_N"


COMB_KINDS = {
    CellKind.AND, CellKind.NAND, CellKind.OR, CellKind.NOR,
    CellKind.XOR, CellKind.XNOR, CellKind.NOT, CellKind.BUF,
    CellKind.MUX, CellKind.CONST0, CellKind.CONST1,
}
LATCH_KINDS = {CellKind.KLATCH, CellKind.LATCH_P, CellKind.LATCH_N}
SEQ_KINDS = LATCH_KINDS | {CellKind.DFF}

# min/max data inputs per kind (None = unbounded)
_ARITY = {
    CellKind.AND: (2, None), CellKind.NAND: (2, None),
    CellKind.OR: (2, None), CellKind.NOR: (2, None),
    CellKind.XOR: (2, None), CellKind.XNOR: (2, None),
    CellKind.NOT: (1, 1), CellKind.BUF: (1, 1),
    CellKind.MUX: (3, 3),
    CellKind.CONST0: (0, 0), CellKind.CONST1: (0, 0),
    CellKind.DFF: (1, 1),
    CellKind.KLATCH: (1, 1),
    CellKind.LATCH_P: (1, 1), CellKind.LATCH_N: (1, 1),
}

GEN_PREFIX = "__ll_"

_KEEP = object()  # sentinel: replace_cells keeps the current reset net


class LatchMode(IntEnum):
    """Keyed latch operating mode, selected by the (k0, k1) bit pair."""

    LOGIC_DECOY = 0  # k0=0 k1=0: held in reset, output constant 0
    POS_PHASE = 1    # k0=0 k1=1: transparent while the clock is high
    NEG_PHASE = 2    # k0=1 k1=0: transparent while the clock is low
    CLEAR = 3        # k0=1 k1=1: always transparent

    @property
    def bits(self) -> tuple[int, int]:
        return (self.value >> 1) & 1, self.value & 1

    @staticmethod
    def from_bits(k0: int, k1: int) -> "LatchMode":
        return LatchMode((k0 << 1) | k1)


@dataclass(frozen=True)
class Cell:
    """One driver. `output` is the net it drives; `inputs` are data nets.

    KLATCH cells additionally carry the two key-input names in `key_ins`
    (k0 first). Key nets never appear in `inputs`.
    """

    name: str
    kind: CellKind
    inputs: tuple[str, ...]
    output: str
    key_ins: tuple[str, str] | None = None


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    where: tuple[str, ...] = ()

    def __str__(self) -> str:
        loc = f" [{', '.join(self.where)}]" if self.where else ""
        return f"{self.code}: {self.message}{loc}"


class Netlist:
    """Immutable-by-convention container; passes build new instances."""

    def __init__(self, name: str, inputs: list[str], outputs: list[str],
                 key_inputs: list[str], cells: list[Cell],
                 reset_net: str | None = None):
        self.name = name
        self.inputs = list(inputs)
        self.outputs = list(outputs)
        self.key_inputs = list(key_inputs)
        self.cells = list(cells)
        self.reset_net = reset_net
        self.driver: dict[str, Cell] = {}
        for c in self.cells:
            self.driver[c.output] = c
        self.key_index = {k: i for i, k in enumerate(self.key_inputs)}
        self._fanout: dict[str, list[Cell]] | None = None

    # -- derived views -------------------------------------------------

    @property
    def fanout(self) -> dict[str, list[Cell]]:
        if self._fanout is None:
            fo: dict[str, list[Cell]] = {}
            for c in self.cells:
                for i in c.inputs:
                    fo.setdefault(i, []).append(c)
            self._fanout = fo
        return self._fanout

    def cells_of_kind(self, *kinds: CellKind) -> list[Cell]:
        want = set(kinds)
        return [c for c in self.cells if c.kind in want]

    @property
    def latches(self) -> list[Cell]:
        return self.cells_of_kind(*LATCH_KINDS)

    @property
    def klatches(self) -> list[Cell]:
        return self.cells_of_kind(CellKind.KLATCH)

    @property
    def flip_flops(self) -> list[Cell]:
        return self.cells_of_kind(CellKind.DFF)

    @property
    def num_key_bits(self) -> int:
        return len(self.key_inputs)

    def source_nets(self) -> list[str]:
        nets = list(self.inputs) + list(self.key_inputs)
        if self.reset_net:
            nets.append(self.reset_net)
        return nets

    def replace_cells(self, cells: list[Cell], *, inputs=None, outputs=None,
                      key_inputs=None, reset_net=_KEEP) -> "Netlist":
        return Netlist(
            self.name,
            self.inputs if inputs is None else inputs,
            self.outputs if outputs is None else outputs,
            self.key_inputs if key_inputs is None else key_inputs,
            cells,
            self.reset_net if reset_net is _KEEP else reset_net,
        )

    def __repr__(self) -> str:
        return (f"Netlist({self.name!r}, in={len(self.inputs)}, out={len(self.outputs)}, "
                f"key={len(self.key_inputs)}, cells={len(self.cells)})")


@dataclass(frozen=True)
class KeyVector:
    """Ordered key bits; index 0 is the leftmost character of the bitstring."""

    bits: tuple[int, ...]

    @staticmethod
    def from_string(s: str) -> "KeyVector":
        if not all(ch in "01" for ch in s):
            raise ValueError(f"key bitstring must be over 0/1, got {s!r}")
        return KeyVector(tuple(int(ch) for ch in s))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def decode(self, n: Netlist) -> dict[str, LatchMode]:
        """Map each KLATCH name to its mode under this key."""
        if len(self.bits) != n.num_key_bits:
            raise ValueError(
                f"key has {len(self.bits)} bits, netlist declares {n.num_key_bits}")
        modes = {}
        for c in n.klatches:
            k0 = self.bits[n.key_index[c.key_ins[0]]]
            k1 = self.bits[n.key_index[c.key_ins[1]]]
            modes[c.name] = LatchMode.from_bits(k0, k1)
        return modes


def validate(n: Netlist) -> list[Diagnostic]:
    """Structural checks; empty list means the netlist is well formed."""
    diags: list[Diagnostic] = []
    declared: dict[str, str] = {}
    for net in n.inputs:
        _declare(declared, diags, net, "input")
    for net in n.key_inputs:
        _declare(declared, diags, net, "key input")
    if n.reset_net:
        _declare(declared, diags, n.reset_net, "reset")
    for c in n.cells:
        _declare(declared, diags, c.output, f"cell {c.name}")

    seen_names = set()
    for c in n.cells:
        if c.name in seen_names:
            diags.append(Diagnostic("duplicate-cell", f"cell name {c.name} reused",
                                    (c.name,)))
        seen_names.add(c.name)
        lo, hi = _ARITY[c.kind]
        if len(c.inputs) < lo or (hi is not None and len(c.inputs) > hi):
            diags.append(Diagnostic(
                "arity", f"{c.kind.value} takes "
                f"{lo if hi == lo else f'{lo}..{hi or chr(8734)}'} inputs, "
                f"got {len(c.inputs)}", (c.name,)))
        if c.kind is CellKind.KLATCH:
            if c.key_ins is None or len(c.key_ins) != 2:
                diags.append(Diagnostic("key-bits", "KLATCH needs two key bits",
                                        (c.name,)))
            else:
                for k in c.key_ins:
                    if k not in n.key_index:
                        diags.append(Diagnostic(
                            "key-bits", f"{k} is not a declared KEYINPUT", (c.name,)))
        for net in c.inputs:
            if net not in declared:
                diags.append(Diagnostic("undriven", f"net {net} is never driven",
                                        (c.name, net)))
    for net in n.outputs:
        if net not in declared:
            diags.append(Diagnostic("undriven", f"output {net} is never driven",
                                    (net,)))

    order, cycle = topo_order(n, transparent=frozenset())
    if cycle is not None:
        diags.append(Diagnostic(
            "comb-cycle",
            "combinational cycle with no latch on it: "
            + " -> ".join(c.name for c in cycle), tuple(c.name for c in cycle)))
    return diags


def _declare(declared, diags, net, role):
    if net in declared:
        diags.append(Diagnostic(
            "multiple-driver", f"net {net} driven by {declared[net]} and {role}", (net,)))
    declared[net] = role


def topo_order(n: Netlist, transparent: frozenset[str] = frozenset()
               ) -> tuple[list[Cell] | None, list[Cell] | None]:
    """Order cells for in-frame evaluation.

    Latches named in `transparent` are treated as combinational feedthroughs;
    all other sequential cells break dependencies. Returns (order, None) or
    (None, cycle) where cycle is one offending cell loop.
    """
    passthrough = set(transparent)
    deps: dict[str, list[str]] = {}
    for c in n.cells:
        if c.kind is CellKind.DFF:
            deps[c.name] = []
        elif c.kind in LATCH_KINDS and c.name not in passthrough:
            deps[c.name] = []
        else:
            deps[c.name] = [n.driver[i].name for i in c.inputs if i in n.driver]

    order: list[Cell] = []
    state: dict[str, int] = {}  # 0 in progress, 1 done
    by_name = {c.name: c for c in n.cells}
    stack_path: list[str] = []

    for root in by_name:
        if root in state:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        while stack:
            node, idx = stack.pop()
            if idx == 0:
                if node in state:
                    continue
                state[node] = 0
                stack_path.append(node)
            children = deps[node]
            advanced = False
            while idx < len(children):
                ch = children[idx]
                idx += 1
                if ch not in state:
                    stack.append((node, idx))
                    stack.append((ch, 0))
                    advanced = True
                    break
                if state[ch] == 0:
                    # unwound a back edge: report the cycle
                    ci = stack_path.index(ch)
                    return None, [by_name[x] for x in stack_path[ci:]]
            if advanced:
                continue
            state[node] = 1
            stack_path.pop()
            order.append(by_name[node])
    return order, None


def fan_cones(n: Netlist, roots: list[str], direction: str = "out") -> set[str]:
    """Cell names reachable from root cells through combinational logic.

    Traversal stops at sequential cells but includes them in the result, so a
    cone's frontier is visible to callers. `direction` is "out" or "in".
    Transparent-phase behavior is irrelevant here: every latch is a boundary.
    """
    if direction not in ("out", "in"):
        raise ValueError("direction must be 'out' or 'in'")
    by_name = {c.name: c for c in n.cells}
    for r in roots:
        if r not in by_name:
            raise NetlistError(f"unknown root cell {r}")
    seen: set[str] = set()
    work = list(roots)
    while work:
        name = work.pop()
        if name in seen:
            continue
        seen.add(name)
        cell = by_name[name]
        if cell.kind in SEQ_KINDS and name not in roots:
            continue  # frontier: keep but do not cross
        if direction == "out":
            nxt = [c.name for c in n.fanout.get(cell.output, [])]
        else:
            nxt = [n.driver[i].name for i in cell.inputs if i in n.driver]
        work.extend(x for x in nxt if x not in seen)
    return seen


def apply_key(n: Netlist, key: KeyVector) -> Netlist:
    """Specialize a keyed netlist: KLATCHes become CONST0/BUF/LATCH_P/LATCH_N
    and key inputs feeding ordinary gates become constant cells."""
    modes = key.decode(n)
    cells: list[Cell] = []
    bit_by_name = {k: key.bits[i] for k, i in n.key_index.items()}
    const_needed: dict[str, int] = {}

    for c in n.cells:
        if c.kind is CellKind.KLATCH:
            m = modes[c.name]
            if m is LatchMode.LOGIC_DECOY:
                cells.append(Cell(c.name, CellKind.CONST0, (), c.output))
            elif m is LatchMode.CLEAR:
                cells.append(Cell(c.name, CellKind.BUF, c.inputs, c.output))
            elif m is LatchMode.POS_PHASE:
                cells.append(Cell(c.name, CellKind.LATCH_P, c.inputs, c.output))
            else:
                cells.append(Cell(c.name, CellKind.LATCH_N, c.inputs, c.output))
        else:
            if any(i in bit_by_name for i in c.inputs):
                for i in c.inputs:
                    if i in bit_by_name:
                        const_needed[i] = bit_by_name[i]
            cells.append(c)

    for knet, val in sorted(const_needed.items()):
        kind = CellKind.CONST1 if val else CellKind.CONST0
        cells.insert(0, Cell(f"{GEN_PREFIX}key_{knet}", kind, (), knet))
    return Netlist(n.name, n.inputs, n.outputs, [], cells, n.reset_net)
