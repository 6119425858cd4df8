"""Extended BENCH reader/writer plus the key-file JSON format.

Line forms:

    # comment
    INPUT(a)        OUTPUT(y)       KEYINPUT(k0)        RESET(rst)
    y = NAND(a, b)
    q = DFF(d)
    q = KLATCH(d, k0, k1)           # data net, then two key-input names

MUX(s, a, b) selects a when s=0 and b when s=1. CONST0()/CONST1() take no
inputs. The reset net is declared only via RESET and is driven externally,
like an input, but carried separately in traces.
"""

from __future__ import annotations

import json
import re

from .netlist import (Cell, CellKind, KeyVector, Netlist, NetlistError,
                      validate)


class BenchParseError(NetlistError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{message}{where}")


_DECL_RE = re.compile(r"^(INPUT|OUTPUT|KEYINPUT|RESET)\s*\(\s*([A-Za-z_][\w.\[\]]*)\s*\)$")
_CELL_RE = re.compile(r"^([A-Za-z_][\w.\[\]]*)\s*=\s*([A-Za-z_][A-Za-z_0-9]*)\s*\((.*)\)$")


def parse_bench(text: str, name: str = "netlist") -> Netlist:
    """Parse and validate; raises BenchParseError with a line number."""
    inputs: list[str] = []
    outputs: list[str] = []
    key_inputs: list[str] = []
    reset_net: str | None = None
    cells: list[Cell] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _DECL_RE.match(line)
        if m:
            kind, net = m.group(1), m.group(2)
            if kind == "INPUT":
                inputs.append(net)
            elif kind == "OUTPUT":
                outputs.append(net)
            elif kind == "KEYINPUT":
                key_inputs.append(net)
            else:
                if reset_net is not None:
                    raise BenchParseError("multiple RESET declarations", line_no)
                reset_net = net
            continue
        m = _CELL_RE.match(line)
        if m:
            out, kind_s, args_s = m.group(1), m.group(2), m.group(3)
            try:
                kind = CellKind(kind_s.upper())
            except ValueError:
                raise BenchParseError(f"unknown cell kind {kind_s!r}", line_no) from None
            args = [a.strip() for a in args_s.split(",")] if args_s.strip() else []
            if any(not a for a in args):
                raise BenchParseError("empty argument", line_no)
            if kind is CellKind.KLATCH:
                if len(args) != 3:
                    raise BenchParseError(
                        "KLATCH takes (data, key0, key1)", line_no)
                cells.append(Cell(out, kind, (args[0],), out,
                                  key_ins=(args[1], args[2])))
            else:
                cells.append(Cell(out, kind, tuple(args), out))
            continue
        raise BenchParseError(f"cannot parse {line!r}", line_no)

    n = Netlist(name, inputs, outputs, key_inputs, cells, reset_net)
    diags = validate(n)
    if diags:
        raise BenchParseError("; ".join(str(d) for d in diags))
    return n


def parse_bench_file(path: str) -> Netlist:
    with open(path) as fh:
        text = fh.read()
    stem = re.sub(r"\.bench$", "", path.replace("\\", "/").rsplit("/", 1)[-1])
    return parse_bench(text, name=stem)


def write_bench(n: Netlist) -> str:
    """Serialize; parse(write(n)) reproduces the same netlist and
    write(parse(text)) is byte-stable."""
    lines = [f"# {n.name}"]
    lines += [f"INPUT({x})" for x in n.inputs]
    lines += [f"KEYINPUT({x})" for x in n.key_inputs]
    if n.reset_net:
        lines.append(f"RESET({n.reset_net})")
    lines += [f"OUTPUT({x})" for x in n.outputs]
    for c in n.cells:
        if c.kind is CellKind.KLATCH:
            args = f"{c.inputs[0]}, {c.key_ins[0]}, {c.key_ins[1]}"
        else:
            args = ", ".join(c.inputs)
        lines.append(f"{c.output} = {c.kind.value}({args})")
    return "\n".join(lines) + "\n"


def write_bench_file(n: Netlist, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(write_bench(n))


# -- key files ----------------------------------------------------------


def save_key(n: Netlist, key: KeyVector, path: str | None = None) -> str:
    doc = {
        "key": key.to_string(),
        # keyed by the driven net: cell names of generated latches do not
        # survive a bench-file round trip, driver nets do
        "latches": {c.output: [n.key_index[c.key_ins[0]], n.key_index[c.key_ins[1]]]
                    for c in n.klatches},
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_key(path: str, n: Netlist | None = None) -> KeyVector:
    with open(path) as fh:
        doc = json.load(fh)
    key = KeyVector.from_string(doc["key"])
    if n is not None:
        if len(key) != n.num_key_bits:
            raise NetlistError(
                f"key file has {len(key)} bits, netlist declares {n.num_key_bits}")
        for latch, (i0, i1) in doc.get("latches", {}).items():
            c = n.driver.get(latch)
            if c is None or c.kind is not CellKind.KLATCH:
                raise NetlistError(f"key file names unknown latch {latch}")
            want = (n.key_index[c.key_ins[0]], n.key_index[c.key_ins[1]])
            if (i0, i1) != want:
                raise NetlistError(
                    f"key file maps {latch} to bits {(i0, i1)}, netlist says {want}")
    return key
