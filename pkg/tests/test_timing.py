"""Delay model, arrival/slack recurrence, path and window enumeration.

Frozen numbers are hand-derived from the recurrence: launch at 0, +delay per
cell, opposite-phase latch crossings subtract a half period and clamp at the
window open. Window-rule tests use an integer sliding-window oracle.
"""

import random

import pytest
from hypothesis import given, strategies as st

from corpus import (toy_latch_chain, toy_master_slave, toy_self_loop,
                    toy_two_latch_cycle, s27c)
from latchlock.bench import parse_bench
from latchlock.netlist import CellKind, KeyVector, LatchMode, apply_key
from latchlock.timing import (ClockSpec, DelayModel, LatchPath, TimingError,
                              arrival_and_slack, complete_modes, dump_delay_spec,
                              enumerate_latch_cycle_paths, enumerate_latch_paths,
                              enumerate_windows, incremental_arrival,
                              load_delay_spec, transition_count,
                              transition_flags, window_violations,
                              _window_rule_violated, _extremal_windows,
                              NEG_INF, POS_INF)

CLK = ClockSpec(1000)
P = LatchMode.POS_PHASE
N = LatchMode.NEG_PHASE
C = LatchMode.CLEAR
D = LatchMode.LOGIC_DECOY


def _ff_pair() -> "Netlist":
    # FF -> NOT -> FF, one comb output so the netlist has a PO
    return parse_bench("""
INPUT(a)
OUTPUT(o)
x = DFF(a)
n1 = NOT(x)
y = DFF(n1)
o = OR(y, x)
""", "t1")


def _ff_pair_latched() -> "Netlist":
    # same, with a keyed latch spliced between the NOT and the capture FF
    return parse_bench("""
INPUT(a)
OUTPUT(o)
KEYINPUT(k0)
KEYINPUT(k1)
x = DFF(a)
n1 = NOT(x)
w = KLATCH(n1, k0, k1)
y = DFF(w)
o = OR(y, x)
""", "t2")


def test_clock_spec_validation():
    assert ClockSpec(1000).t_period == 1000
    for bad in (0, -2, 999):
        with pytest.raises(TimingError):
            ClockSpec(bad)


def test_delay_model_precedence():
    dm = DelayModel(comb_ps={CellKind.AND: 12}, d_latch=25,
                    overrides={"g1": 7})
    mk = lambda name, kind: parse_bench(
        "INPUT(a)\nOUTPUT(o)\no = NOT(a)", "x").cells[0]
    n = parse_bench("""
INPUT(a)
KEYINPUT(k0)
KEYINPUT(k1)
OUTPUT(o)
g1 = AND(a, a)
g2 = AND(a, g1)
g3 = XOR(a, g2)
w = KLATCH(g3, k0, k1)
c0 = CONST0()
o = OR(w, c0)
""", "prec")
    by = {c.name: c for c in n.cells}
    assert dm.delay_of(by["g1"]) == 7       # name override wins
    assert dm.delay_of(by["g2"]) == 12      # kind entry
    assert dm.delay_of(by["g3"]) == 10      # fallback default
    assert dm.delay_of(by["w"]) == 25       # latch feedthrough
    assert dm.delay_of(by["c0"]) == 0       # constants are free


def test_delay_spec_round_trip():
    dm = DelayModel(comb_ps={CellKind.AND: 12, CellKind.XOR: 14},
                    d_latch=25, overrides={"g1": 7, "g2": 3})
    text = dump_delay_spec(dm, ClockSpec(2000))
    dm2, clk2 = load_delay_spec(text)
    assert dm2 == dm
    assert clk2.t_period == 2000
    dm3, clk3 = load_delay_spec('{"default": {"LATCH": 30}}')
    assert clk3 is None
    assert dm3.d_latch == 30


def test_delay_spec_rejects_unknown_kind():
    with pytest.raises(TimingError):
        load_delay_spec('{"default": {"FOO": 4}}')


def test_arrival_slack_ff_to_ff():
    # launch 0, NOT +10; capture deadline t_period in positive phase
    res = arrival_and_slack(_ff_pair(), DelayModel(), CLK, KeyVector.from_string(""))
    assert res.arrival["n1"] == 10
    assert res.slack["n1"] == 990
    assert res.arrival["o"] == 10
    assert res.arrival_pn["n1"] == [10, NEG_INF]


@pytest.mark.parametrize("key,arr_pn,slack", [
    ("11", [30, NEG_INF], 970),        # Clear: +20 feedthrough, same parity
    ("01", [30, NEG_INF], 970),        # Pos from pos parity: plain +20
    ("10", [NEG_INF, 20], 480),        # Neg crossing: clamp max(10-500,0)+20
    ("00", [NEG_INF, NEG_INF], POS_INF),  # decoy kills the path
])
def test_arrival_slack_keyed_latch(key, arr_pn, slack):
    res = arrival_and_slack(_ff_pair_latched(), DelayModel(), CLK,
                            KeyVector.from_string(key))
    assert res.arrival_pn["w"] == arr_pn
    assert res.slack["w"] == slack


def test_arrival_neg_pos_chain_clamps():
    n = parse_bench("""
INPUT(a)
OUTPUT(q2)
KEYINPUT(k0)
KEYINPUT(k1)
KEYINPUT(k2)
KEYINPUT(k3)
x = DFF(a)
n1 = NOT(x)
q1 = KLATCH(n1, k0, k1)
q2 = KLATCH(q1, k2, k3)
""", "t3")
    # Neg then Pos: both crossings clamp at the window open, so the chain
    # arrives at 20 regardless of how early the data was ready.
    res = arrival_and_slack(n, DelayModel(), CLK, KeyVector.from_string("1001"))
    assert res.arrival_pn["q1"] == [NEG_INF, 20]
    assert res.arrival_pn["q2"] == [20, NEG_INF]
    assert res.slack["q2"] == 980


def test_negative_slack_reported():
    dm = DelayModel(overrides={"n1": 2000})
    res = arrival_and_slack(_ff_pair_latched(), dm, CLK,
                            KeyVector.from_string("01"))
    assert res.slack["w"] == -1020


def test_two_latch_cycle_fixpoint():
    # Pos/Neg ring converges: loop delay 50 well under the period
    n = toy_two_latch_cycle()
    res = arrival_and_slack(n, DelayModel(), CLK, KeyVector.from_string("0110"))
    assert res.arrival_pn["q0"] == [30, NEG_INF]
    assert res.arrival_pn["q1"] == [NEG_INF, 20]
    assert res.arrival_pn["d0"] == [10, 30]
    assert res.arrival["o"] == 30
    assert res.slack["o"] == 470


def test_divergence_detected():
    # loop delay 2040 > period: per-lap gain never settles
    n = toy_two_latch_cycle()
    dm = DelayModel(overrides={"d0": 2000})
    with pytest.raises(TimingError, match="divergence"):
        arrival_and_slack(n, dm, CLK, KeyVector.from_string("0110"))


@pytest.mark.parametrize("build,key", [
    (toy_self_loop, "11"),
    (toy_two_latch_cycle, "0101"),
])
def test_transparent_cycle_rejected(build, key):
    with pytest.raises(TimingError, match="transparent cycle"):
        arrival_and_slack(build(), DelayModel(), CLK, KeyVector.from_string(key))


def test_apply_key_arrival_agreement():
    """Key specialization preserves timing when BUF matches the latch delay."""
    n = toy_master_slave()
    dm = DelayModel(comb_ps={CellKind.BUF: DelayModel().d_latch})
    empty = KeyVector.from_string("")
    for i in range(16):
        key = KeyVector.from_string(format(i, "04b"))
        ref = arrival_and_slack(n, dm, CLK, key)
        spec = arrival_and_slack(apply_key(n, key), dm, CLK, empty)
        # specialization drops key nets whose only fanout was a latch pin
        assert set(ref.arrival) - set(spec.arrival) <= set(n.key_inputs)
        for net in spec.arrival:
            assert spec.arrival[net] == ref.arrival[net], (key.to_string(), net)
            assert spec.slack[net] == ref.slack[net], (key.to_string(), net)


def test_incremental_matches_scratch():
    before = _ff_pair()
    after = _ff_pair_latched()
    dm = DelayModel()
    prev = arrival_and_slack(before, dm, CLK, KeyVector.from_string("")).arrival_pn
    for ks in ("00", "01", "10", "11"):
        key = KeyVector.from_string(ks)
        inc = incremental_arrival(after, dm, CLK, key, prev)
        scratch = arrival_and_slack(after, dm, CLK, key).arrival_pn
        assert inc == scratch, ks


# -- path enumeration -----------------------------------------------------


def _oracle_paths(n, dm):
    """Recursive re-enumeration: anchor to anchor, >=1 latch, latches simple."""
    out_set = set(n.outputs)
    found = set()

    def walk(src, net, cum, lats, poss, seen):
        if net in out_set and lats:
            found.add((src, net, lats, poss, cum))
        for cell in n.fanout.get(net, []):
            if cell.kind is CellKind.DFF:
                if lats:
                    found.add((src, cell.name, lats, poss, cum))
            elif cell.kind in (CellKind.KLATCH, CellKind.LATCH_P,
                               CellKind.LATCH_N):
                if cell.name not in seen:
                    p = cum + dm.delay_of(cell)
                    walk(src, cell.output, p, lats + (cell.name,),
                         poss + (p,), seen | {cell.name})
            else:
                walk(src, cell.output, cum + dm.delay_of(cell), lats, poss, seen)

    for net in n.inputs:
        walk(net, net, 0, (), (), frozenset())
    for c in n.flip_flops:
        walk(c.output, c.output, 0, (), (), frozenset())
    return found


@pytest.mark.parametrize("build", [
    toy_master_slave,
    toy_two_latch_cycle,
    lambda: toy_latch_chain(3),
])
def test_path_enumeration_matches_oracle(build):
    n = build()
    dm = DelayModel()
    inv = enumerate_latch_paths(n, dm)
    assert not inv.truncated
    got = {(p.source, p.sink, p.latches, p.positions, p.total)
           for p in inv.paths}
    assert got == _oracle_paths(n, dm)
    assert len(got) == len(inv.paths)  # no duplicates in the listing


def test_latch_free_netlist_has_no_paths():
    inv = enumerate_latch_paths(s27c(), DelayModel())
    assert inv.paths == []


def test_chain_paths_frozen():
    inv = enumerate_latch_paths(toy_latch_chain(3), DelayModel())
    assert [(p.source, p.sink, p.latches, p.positions, p.total)
            for p in inv.paths] == [
        ("x", "o", ("q0", "q1", "q2"), (20, 40, 60), 70),
        ("x", "x", ("q0", "q1", "q2"), (20, 40, 60), 70),
    ]
    assert inv.paths[0].boundaries() == [0, 20, 40, 60, 70]


def test_cycle_paths_two_latch():
    inv = enumerate_latch_cycle_paths(toy_two_latch_cycle(), DelayModel())
    got = {(p.source, p.sink, p.latches, p.positions, p.total, p.cyclic)
           for p in inv.paths}
    assert got == {
        ("q0", "q0", ("q1",), (20,), 30, True),
        ("q1", "q1", ("q0",), (30,), 30, True),
    }


def test_truncation_flag():
    inv = enumerate_latch_paths(toy_latch_chain(3), DelayModel(), cap=1)
    assert inv.truncated
    assert len(inv.paths) == 1
    assert inv.explored > 0


# -- phase transitions ------------------------------------------------------


def test_transition_flags_frozen():
    assert transition_flags([]) == (False, [0])
    assert transition_flags([P]) == (False, [0, 0])
    assert transition_flags([N]) == (False, [1, 1])
    assert transition_flags([N, P]) == (False, [1, 1, 0])
    assert transition_flags([N, C, P]) == (False, [1, 0, 1, 0])
    assert transition_flags([C, N, C]) == (False, [0, 1, 0, 1])
    assert transition_flags([P], anchor_phase=1) == (False, [1, 1])
    broken, _ = transition_flags([P, D, N])
    assert broken
    assert transition_count([N, P]) == 2
    assert transition_count([P, D]) is None


@given(st.lists(st.sampled_from([P, N, C]), max_size=8),
       st.integers(0, 1))
def test_transition_count_is_even(seq, anchor):
    # both ends anchored at the same phase: transitions pair up
    cnt = transition_count(seq, anchor)
    assert cnt is not None and cnt % 2 == 0


# -- window rules -----------------------------------------------------------


def _slide_violated(bounds, flagged, w, k, total):
    """Integer slide over every window position; bounds are integers so the
    overlap predicate only changes at integer offsets."""
    ivals = [(bounds[j], bounds[j + 1]) for j in sorted(flagged)]
    for s in range(0, total - w + 1):
        cnt = sum(1 for a, b in ivals if a < s + w and b > s)
        if cnt < k:
            return True
    return False


def test_window_rule_matches_slide_oracle():
    rng = random.Random(7)
    for trial in range(200):
        nlat = rng.randint(1, 4)
        incs = [rng.randint(0, 6) for _ in range(nlat)]
        positions = []
        cum = 0
        for inc in incs:
            cum += inc
            positions.append(cum)
        total = cum + (0 if rng.random() < 0.3 else rng.randint(1, 6))
        if total == 0:
            total = 1
        path = LatchPath("s", "t", tuple(f"l{i}" for i in range(nlat)),
                         tuple(positions), total)
        bounds = path.boundaries()
        for w, k in ((rng.randint(1, total + 2), 1),
                     (rng.randint(1, total + 2), 2)):
            wins = _extremal_windows(path, w, k)
            for mask in range(1 << len(bounds) - 1):
                flagged = {j for j in range(len(bounds) - 1) if mask >> j & 1}
                ivals = [(bounds[j], bounds[j + 1]) for j in sorted(flagged)]
                want = _slide_violated(bounds, flagged, w, k, total)
                assert _window_rule_violated(ivals, total, w, k) == want, \
                    (trial, positions, total, w, k, flagged)
                ext = any(sum(1 for j in win.adjacencies if j in flagged) < k
                          for win in wins)
                assert ext == want, (trial, positions, total, w, k, flagged)


def test_window_violations_chain():
    n = toy_latch_chain(3)
    dm = DelayModel()
    clk = ClockSpec(40)
    inv = enumerate_latch_paths(n, dm)

    # all-Clear: no transitions anywhere, both rules fire on both paths
    viol = window_violations(inv.paths, complete_modes(n, KeyVector.from_string("111111")), clk)
    assert sorted(v[1:] for v in viol) == [(40, 1), (40, 1), (60, 2), (60, 2)]

    # Pos,Neg,Pos: transitions at (20,40) and (40,60) satisfy both rules
    viol = window_violations(inv.paths, complete_modes(n, KeyVector.from_string("011001")), clk)
    assert viol == []

    # Clear,Neg,Clear: transitions at (20,40) and (60,70); a 60 ps window
    # starting at 0 sees only one of them
    viol = window_violations(inv.paths, complete_modes(n, KeyVector.from_string("111011")), clk)
    assert len(viol) == 2
    assert all(v[1:] == (60, 2) for v in viol)

    # decoy on the path: no anchored transit, window rules vacuous
    viol = window_violations(inv.paths, complete_modes(n, KeyVector.from_string("001001")), clk)
    assert viol == []


def test_enumerate_windows_shapes():
    n = toy_latch_chain(3)
    wi = enumerate_windows(n, DelayModel(), ClockSpec(40))
    assert wi.windows, "70 ps paths fit both 40 and 60 ps spans"
    for win in wi.windows:
        assert (win.window_len, win.required_transitions) in ((40, 1), (60, 2))
        assert win.adjacencies
        assert 0 <= win.start < win.end <= win.path.total
