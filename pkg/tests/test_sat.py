"""CDCL solver vs exhaustive enumeration on small formulas."""

import itertools
import random

from latchlock.sat import SAT, UNKNOWN, UNSAT, CdclSolver


def brute_force(nvars: int, clauses, fixed=()) -> bool:
    """Exhaustive satisfiability over nvars, honoring fixed literals."""
    need = {abs(l): l > 0 for l in fixed}
    for bits in itertools.product((False, True), repeat=nvars):
        if any(bits[v - 1] != want for v, want in need.items()):
            continue
        if all(any((l > 0) == bits[abs(l) - 1] for l in cl) for cl in clauses):
            return True
    return False


def random_instance(rng, nvars, nclauses):
    cls = []
    for _ in range(nclauses):
        width = rng.choice((1, 2, 3, 3))
        lits = rng.sample(range(1, nvars + 1), min(width, nvars))
        cls.append([v if rng.random() < 0.5 else -v for v in lits])
    return cls


def test_matches_bruteforce_on_random_instances():
    rng = random.Random(1234)
    for trial in range(80):
        nvars = rng.randrange(3, 9)
        clauses = random_instance(rng, nvars, rng.randrange(nvars, 4 * nvars))
        s = CdclSolver()
        s.add_var_upto(nvars)
        for cl in clauses:
            s.add_clause(cl)
        got = s.solve()
        want = brute_force(nvars, clauses)
        assert got == (SAT if want else UNSAT), (trial, clauses)
        if got == SAT:
            m = s.model()
            assert s.check_model(m)
            assert all(any((l > 0) == m[abs(l)] for l in cl) for cl in clauses)


def test_assumptions_equal_added_units():
    rng = random.Random(99)
    for trial in range(60):
        nvars = rng.randrange(3, 8)
        clauses = random_instance(rng, nvars, rng.randrange(2, 3 * nvars))
        picks = rng.sample(range(1, nvars + 1), rng.randrange(1, nvars))
        assumed = [v if rng.random() < 0.5 else -v for v in picks]
        s = CdclSolver()
        s.add_var_upto(nvars)
        for cl in clauses:
            s.add_clause(cl)
        got = s.solve(assumed)
        want = brute_force(nvars, clauses, fixed=assumed)
        assert got == (SAT if want else UNSAT), (trial, clauses, assumed)
        if got == SAT:
            m = s.model()
            assert all(m[abs(l)] == (l > 0) for l in assumed)


def test_incremental_reuse_across_calls():
    """Same solver object answers correctly as clauses accumulate."""
    rng = random.Random(7)
    s = CdclSolver()
    s.add_var_upto(6)
    clauses = []
    for step in range(30):
        cl = random_instance(rng, 6, 1)[0]
        clauses.append(cl)
        s.add_clause(cl)
        got = s.solve()
        want = brute_force(6, clauses)
        assert got == (SAT if want else UNSAT), (step, clauses)
        if got == UNSAT:
            break


def test_unsat_core_free_assumption_reuse():
    # solving under contradictory assumptions must not poison later solves
    s = CdclSolver()
    s.add_var_upto(3)
    s.add_clause([1, 2])
    s.add_clause([-1, 3])
    assert s.solve([-2, 1, -3]) == UNSAT
    assert s.solve([1]) == SAT
    assert s.solve() == SAT


def test_empty_and_trivial_formulas():
    s = CdclSolver()
    assert s.solve() == SAT
    s.add_var_upto(2)
    s.add_clause([1, -1])       # tautology: ignored
    assert s.solve() == SAT
    s.add_clause([2])
    s.add_clause([-2])
    assert s.solve() == UNSAT
    assert not s.ok


def _pigeonhole(holes: int):
    """PHP(holes+1, holes): unsat, exponential for resolution."""
    p = holes + 1
    var = lambda i, j: i * holes + j + 1
    clauses = [[var(i, j) for j in range(holes)] for i in range(p)]
    for j in range(holes):
        for i1 in range(p):
            for i2 in range(i1 + 1, p):
                clauses.append([-var(i1, j), -var(i2, j)])
    return p * holes, clauses


def test_conflict_budget_yields_unknown():
    nvars, clauses = _pigeonhole(7)
    s = CdclSolver()
    s.add_var_upto(nvars)
    for cl in clauses:
        s.add_clause(cl)
    assert s.solve(max_conflicts=5) == UNKNOWN
    # and with room it still finishes correctly
    assert s.solve(max_conflicts=200_000) == UNSAT


def test_time_budget_yields_unknown():
    nvars, clauses = _pigeonhole(8)
    s = CdclSolver()
    s.add_var_upto(nvars)
    for cl in clauses:
        s.add_clause(cl)
    assert s.solve(time_budget=0.0) == UNKNOWN


def test_stats_accumulate():
    nvars, clauses = _pigeonhole(4)
    s = CdclSolver()
    s.add_var_upto(nvars)
    for cl in clauses:
        s.add_clause(cl)
    assert s.solve() == UNSAT
    assert s.stats["conflicts"] > 0
    assert s.stats["decisions"] > 0
