"""Shared circuit corpus for the test suite.

Everything here is deterministic: the synthetic sequential circuits are
generated from named RNG streams at fixed seeds, the rest are hand-written
bench texts. Builders return fresh Netlist objects so tests can mutate
derived structures freely.
"""

from latchlock._util import rng_stream
from latchlock.bench import parse_bench
from latchlock.netlist import Cell, CellKind, Netlist

# s27 (ISCAS89) with a reset line added so locked/original comparisons are
# initial-state independent from cycle 0.
S27_BENCH = """
INPUT(G0)
INPUT(G1)
INPUT(G2)
INPUT(G3)
OUTPUT(G17)
RESET(rst)
G5 = DFF(G10)
G6 = DFF(G11)
G7 = DFF(G13)
G14 = NOT(G0)
G17 = NOT(G11)
G8 = AND(G14, G6)
G15 = OR(G12, G8)
G16 = OR(G3, G8)
G9 = NAND(G16, G15)
G10 = NOR(G14, G11)
G11 = NOR(G5, G9)
G12 = NOR(G1, G7)
G13 = NOR(G2, G12)
"""


def s27c() -> Netlist:
    return parse_bench(S27_BENCH, "s27c")


_GATES2 = [CellKind.AND, CellKind.OR, CellKind.NAND, CellKind.NOR,
           CellKind.XOR, CellKind.XNOR]


def synth_seq(name: str, n_in: int, n_out: int, n_ff: int, n_gates: int,
              seed: int) -> Netlist:
    """Random sequential DAG with DFF feedback and a reset. Gates only read
    earlier nets, so the combinational part is acyclic by construction."""
    rng = rng_stream(seed, f"corpus-{name}")
    inputs = [f"I{i}" for i in range(n_in)]
    ffq = [f"F{i}" for i in range(n_ff)]
    pool = inputs + ffq
    cells = []
    for g in range(n_gates):
        out = f"g{g}"
        if rng.random() < 0.10:
            cells.append(Cell(out, CellKind.NOT, (rng.choice(pool),), out))
        else:
            kind = rng.choice(_GATES2)
            a, b = rng.sample(pool, 2)
            cells.append(Cell(out, kind, (a, b), out))
        pool.append(out)
    gate_nets = pool[len(inputs) + n_ff:]
    # FF data comes from the deeper half so state actually cycles
    half = gate_nets[len(gate_nets) // 2:]
    for i in range(n_ff):
        cells.append(Cell(ffq[i], CellKind.DFF, (rng.choice(half),), ffq[i]))
    outputs = rng.sample(gate_nets, n_out)
    return Netlist(name, inputs, outputs, [], cells, "rst")


def s298c() -> Netlist:
    return synth_seq("s298c", 3, 6, 14, 110, seed=298)


def s344c() -> Netlist:
    return synth_seq("s344c", 9, 11, 15, 150, seed=344)


def s1196c() -> Netlist:
    return synth_seq("s1196c", 14, 14, 18, 480, seed=1196)


def toy_pipe() -> Netlist:
    """Three-FF shift pipeline with a little logic; smallest lockable unit."""
    return parse_bench("""
INPUT(a)
INPUT(b)
OUTPUT(o)
RESET(rst)
x0 = DFF(d0)
x1 = DFF(d1)
x2 = DFF(d2)
d0 = XOR(a, x2)
d1 = AND(x0, b)
d2 = OR(x1, a)
o = XOR(x2, x0)
""", "toy_pipe")


def toy_fsm() -> Netlist:
    """Two-bit state machine: output depends on state and input."""
    return parse_bench("""
INPUT(a)
OUTPUT(o)
OUTPUT(p)
RESET(rst)
s0 = DFF(n0)
s1 = DFF(n1)
n0 = XOR(a, s1)
n1 = NOR(s0, a)
o = AND(s0, s1)
p = XOR(s0, a)
""", "toy_fsm")


def toy_comb_xor(k: int) -> Netlist:
    """k-input, k-key-bit XOR-locked combinational circuit. Each output is
    in XOR key, then mixed with a neighbor so DIs carry information."""
    lines = []
    for i in range(k):
        lines.append(f"INPUT(a{i})")
    for i in range(k):
        lines.append(f"OUTPUT(o{i})")
    for i in range(k):
        lines.append(f"KEYINPUT(k{i})")
    for i in range(k):
        lines.append(f"x{i} = XOR(a{i}, k{i})")
    for i in range(k):
        if k == 1:
            lines.append("o0 = BUF(x0)")
        else:
            lines.append(f"o{i} = AND(x{i}, a{(i + 1) % k})")
    return parse_bench("\n".join(lines), f"xor{k}")


def toy_single_klatch(with_reset: bool = True) -> Netlist:
    text = """
INPUT(d)
OUTPUT(q)
KEYINPUT(k0)
KEYINPUT(k1)
q = KLATCH(d, k0, k1)
"""
    if with_reset:
        text = "RESET(rst)\n" + text
    return parse_bench(text, "single_klatch")


def toy_self_loop() -> Netlist:
    """One keyed latch in its own fanin cone: only mode 00 breaks the loop,
    so the weak loop rule leaves 3 of 4 keys."""
    return parse_bench("""
INPUT(a)
OUTPUT(q)
KEYINPUT(k0)
KEYINPUT(k1)
d = OR(q, a)
q = KLATCH(d, k0, k1)
""", "self_loop")


def toy_two_latch_cycle() -> Netlist:
    """Two keyed latches in one structural cycle plus an escape output."""
    return parse_bench("""
INPUT(a)
OUTPUT(o)
KEYINPUT(k0)
KEYINPUT(k1)
KEYINPUT(k2)
KEYINPUT(k3)
d0 = XOR(q1, a)
q0 = KLATCH(d0, k0, k1)
q1 = KLATCH(q0, k2, k3)
o = AND(q1, a)
""", "two_latch_cycle")


def toy_master_slave() -> Netlist:
    """(master, slave) latch pair over one data input; under key 1001 the
    pair behaves as a positive-edge DFF."""
    return parse_bench("""
INPUT(d)
OUTPUT(q)
KEYINPUT(k0)
KEYINPUT(k1)
KEYINPUT(k2)
KEYINPUT(k3)
m = KLATCH(d, k0, k1)
q = KLATCH(m, k2, k3)
""", "master_slave")


def toy_latch_chain(n_latches: int, prefix: str = "c") -> Netlist:
    """Acyclic latch chain FF -> L1 -> ... -> Ln -> output; used by the
    classifier and counter tests (2 key bits per latch)."""
    lines = ["INPUT(a)", "OUTPUT(o)", "RESET(rst)", "x = DFF(dx)"]
    keys = []
    prev = "x"
    for i in range(n_latches):
        k0, k1 = f"{prefix}k{2 * i}", f"{prefix}k{2 * i + 1}"
        keys += [k0, k1]
        lines.append(f"q{i} = KLATCH({prev}, {k0}, {k1})")
        prev = f"q{i}"
    lines += [f"dx = XOR(a, {prev})", f"o = XOR({prev}, a)"]
    lines[3:3] = [f"KEYINPUT({k})" for k in keys]
    return parse_bench("\n".join(lines), f"chain{n_latches}")


def toy_reset_free() -> Netlist:
    """One reset-free state element: the keyed latch rides over the FF and
    keeps its held value across reset pulses. Under the correct key (Neg,
    bits 10) the output's High half-cycle exposes the previous cycle's FF
    value, so a query's first frame depends on state the reset did not
    clear."""
    return parse_bench("""
INPUT(a)
OUTPUT(o)
RESET(rst)
KEYINPUT(k0)
KEYINPUT(k1)
x = DFF(dx)
dx = XOR(a, lq)
lq = KLATCH(x, k0, k1)
o = XOR(lq, a)
""", "reset_free")


def locked_pair_2bit():
    """Hand-locked 2-bit instance: original is a plain wire pipeline, the
    locked form routes it through one keyed latch whose correct mode is
    Clear (bits 11)."""
    orig = parse_bench("""
INPUT(d)
OUTPUT(o)
RESET(rst)
x = DFF(d)
o = XOR(x, d)
""", "wire2_orig")
    locked = parse_bench("""
INPUT(d)
OUTPUT(o)
RESET(rst)
KEYINPUT(k0)
KEYINPUT(k1)
x = DFF(d)
w = KLATCH(x, k0, k1)
o = XOR(w, d)
""", "wire2_locked")
    return orig, locked


CIRCUITS = {
    "s27c": s27c,
    "s298c": s298c,
    "s344c": s344c,
    "s1196c": s1196c,
    "toy_pipe": toy_pipe,
    "toy_fsm": toy_fsm,
}
