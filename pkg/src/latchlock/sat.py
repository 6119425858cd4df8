"""Conflict-driven clause-learning SAT solver with assumptions.

Literals are nonzero ints (+v / -v, vars numbered from 1). The solver is
incremental: clauses may be added between solve() calls and learned clauses
carry over. solve() accepts assumption literals and conflict/time budgets;
budget exhaustion yields "UNKNOWN" rather than an answer.
"""

from __future__ import annotations

import time
from heapq import heappush, heappop

SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"


def _luby(i: int) -> int:
    # Luby restart sequence 1,1,2,1,1,2,4,...
    k = 1
    while (1 << (k + 1)) <= i + 1:
        k += 1
    while (1 << k) - 1 != i + 1:
        i = i - (1 << k) + 1
        k = 1
        while (1 << (k + 1)) <= i + 1:
            k += 1
    return 1 << k


class CdclSolver:
    def __init__(self) -> None:
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.learned: list[list[int]] = []
        self._lbd: dict[int, int] = {}
        self.watches: dict[int, list[list[int]]] = {}
        self.assign: dict[int, bool] = {}
        self.level: dict[int, int] = {}
        self.reason: dict[int, list[int] | None] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.activity: dict[int, float] = {}
        self.polarity: dict[int, bool] = {}
        self._heap: list[tuple[float, int]] = []
        self.var_inc = 1.0
        self.qhead = 0
        self.ok = True
        self.max_learnts = 3000.0
        self.stats = {"conflicts": 0, "decisions": 0, "propagations": 0,
                      "restarts": 0, "learned": 0}

    # -- construction ---------------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.activity[v] = 0.0
        self.polarity[v] = False
        heappush(self._heap, (0.0, v))
        return v

    def add_var_upto(self, v: int) -> None:
        while self.nvars < v:
            self.new_var()

    def add_clause(self, lits) -> bool:
        """Add a problem clause. Returns False if the formula became unsat."""
        if not self.ok:
            return False
        if self.trail_lim:
            self._backtrack(0)
        seen = set()
        cl = []
        for lit in lits:
            if -lit in seen:
                return True  # tautology
            if lit in seen:
                continue
            val = self.assign.get(lit)
            if val is True and self.level[abs(lit)] == 0:
                return True
            if val is False and self.level[abs(lit)] == 0:
                continue
            seen.add(lit)
            cl.append(lit)
            self.add_var_upto(abs(lit))
        if not cl:
            self.ok = False
            return False
        if len(cl) == 1:
            if not self._enqueue(cl[0], None):
                self.ok = False
                return False
            self.ok = self._propagate() is None
            return self.ok
        self.clauses.append(cl)
        self._watch(cl)
        return True

    def _watch(self, cl: list[int]) -> None:
        self.watches.setdefault(-cl[0], []).append(cl)
        self.watches.setdefault(-cl[1], []).append(cl)

    # -- trail ------------------------------------------------------------

    def _enqueue(self, lit: int, reason) -> bool:
        val = self.assign.get(lit)
        if val is not None:
            return val
        self.assign[lit] = True
        self.assign[-lit] = False
        v = abs(lit)
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.polarity[v] = lit > 0
        self.trail.append(lit)
        return True

    def _backtrack(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        bound = self.trail_lim[lvl]
        for i in range(len(self.trail) - 1, bound - 1, -1):
            lit = self.trail[i]
            v = abs(lit)
            del self.assign[lit]
            del self.assign[-lit]
            del self.level[v]
            self.reason.pop(v, None)
            heappush(self._heap, (-self.activity[v], v))
        del self.trail[bound:]
        del self.trail_lim[lvl:]
        self.qhead = min(self.qhead, len(self.trail))

    # -- propagation -------------------------------------------------------

    def _propagate(self):
        assign = self.assign
        watches = self.watches
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            self.stats["propagations"] += 1
            ws = watches.get(p)
            if not ws:
                continue
            keep: list[list[int]] = []
            j = 0
            nws = len(ws)
            while j < nws:
                cl = ws[j]
                j += 1
                neg = -p
                if cl[0] == neg:
                    cl[0] = cl[1]
                    cl[1] = neg
                first = cl[0]
                if assign.get(first) is True:
                    keep.append(cl)
                    continue
                moved = False
                for k in range(2, len(cl)):
                    lk = cl[k]
                    if assign.get(lk) is not False:
                        cl[1] = lk
                        cl[k] = neg
                        watches.setdefault(-lk, []).append(cl)
                        moved = True
                        break
                if moved:
                    continue
                keep.append(cl)
                if assign.get(first) is False:
                    keep.extend(ws[j:])
                    watches[p] = keep
                    return cl
                self._enqueue(first, cl)
            watches[p] = keep
        return None

    # -- conflict analysis ---------------------------------------------------

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for x in self.activity:
                self.activity[x] *= 1e-100
            self.var_inc *= 1e-100
        heappush(self._heap, (-self.activity[v], v))

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int, int]:
        learned = [0]
        seen: set[int] = set()
        counter = 0
        p = 0
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        cl = conflict
        while True:
            start = 1 if p else 0
            for lit in cl[start:] if p else cl:
                v = abs(lit)
                if v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                self._bump(v)
                if self.level[v] >= cur_level:
                    counter += 1
                else:
                    learned.append(lit)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            v = abs(p)
            seen.discard(v)
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            cl = self.reason[v]
            cl = [p] + [l for l in cl if l != p]  # normalize asserting position
        learned[0] = -p

        # cheap self-subsumption: drop literals whose whole reason is seen
        seen.add(abs(learned[0]))
        out = [learned[0]]
        for lit in learned[1:]:
            r = self.reason.get(abs(lit))
            if r is None or any(abs(x) not in seen and self.level[abs(x)] > 0
                                for x in r if x != -lit):
                out.append(lit)
                seen.add(abs(lit))
        learned = out

        if len(learned) == 1:
            bt = 0
        else:
            # second highest level
            lv = [self.level[abs(l)] for l in learned[1:]]
            bt = max(lv)
            mi = lv.index(bt) + 1
            learned[1], learned[mi] = learned[mi], learned[1]
        lbd = len({self.level[abs(l)] for l in learned})
        return learned, bt, lbd

    def _record(self, learned: list[int], lbd: int) -> None:
        self.stats["learned"] += 1
        if len(learned) == 1:
            self._enqueue(learned[0], None)
            return
        self.learned.append(learned)
        self._lbd[id(learned)] = lbd
        self._watch(learned)
        self._enqueue(learned[0], learned)

    def _reduce_db(self) -> None:
        # done at level 0 so a full watch rebuild plus re-propagation is sound
        self._backtrack(0)
        in_use = {id(r) for r in self.reason.values() if r is not None}
        ranked = sorted(self.learned,
                        key=lambda c: (self._lbd.get(id(c), 9), len(c)))
        keep_n = len(ranked) // 2
        kept, dropped = [], []
        for i, cl in enumerate(ranked):
            if i < keep_n or id(cl) in in_use or self._lbd.get(id(cl), 9) <= 2:
                kept.append(cl)
            else:
                dropped.append(cl)
        for cl in dropped:
            self._lbd.pop(id(cl), None)
        self.learned = kept
        self.watches = {}
        for cl in self.clauses:
            self._watch(cl)
        for cl in self.learned:
            self._watch(cl)
        self.qhead = 0

    # -- search ----------------------------------------------------------------

    def _pick(self) -> int:
        heap = self._heap
        while heap:
            negact, v = heappop(heap)
            if v not in self.level and -negact == self.activity[v]:
                return v
            if v not in self.level:
                heappush(heap, (-self.activity[v], v))
                if heap[0][1] == v:
                    heappop(heap)
                    return v
        for v in range(1, self.nvars + 1):
            if v not in self.level:
                return v
        return 0

    def solve(self, assumptions=(), max_conflicts: int | None = None,
              time_budget: float | None = None) -> str:
        if not self.ok:
            return UNSAT
        self._backtrack(0)
        if self._propagate() is not None:
            self.ok = False
            return UNSAT
        assumptions = list(assumptions)
        deadline = None if time_budget is None else time.monotonic() + time_budget
        if deadline is not None and time.monotonic() >= deadline:
            return UNKNOWN
        conflict_cap = None if max_conflicts is None \
            else self.stats["conflicts"] + max_conflicts
        restart_unit = 64
        since_restart = 0
        restart_lim = _luby(self.stats["restarts"]) * restart_unit

        while True:
            confl = self._propagate()
            if confl is not None:
                self.stats["conflicts"] += 1
                since_restart += 1
                if not self.trail_lim:
                    self.ok = False
                    return UNSAT
                if len(self.trail_lim) <= len(assumptions):
                    # conflict inside the assumption prefix
                    self._backtrack(0)
                    return UNSAT
                learned, bt, lbd = self._analyze(confl)
                self._backtrack(bt)
                self._record(learned, lbd)
                self.var_inc /= 0.95
                if conflict_cap is not None \
                        and self.stats["conflicts"] >= conflict_cap:
                    self._backtrack(0)
                    return UNKNOWN
                if deadline is not None and self.stats["conflicts"] % 256 == 0 \
                        and time.monotonic() > deadline:
                    self._backtrack(0)
                    return UNKNOWN
                if len(self.learned) > self.max_learnts:
                    self._reduce_db()
                    self.max_learnts *= 1.15
                continue

            if since_restart >= restart_lim and len(self.trail_lim) > len(assumptions):
                self.stats["restarts"] += 1
                since_restart = 0
                restart_lim = _luby(self.stats["restarts"]) * restart_unit
                self._backtrack(len(assumptions))
                continue

            if len(self.trail_lim) < len(assumptions):
                p = assumptions[len(self.trail_lim)]
                self.add_var_upto(abs(p))
                val = self.assign.get(p)
                if val is False:
                    self._backtrack(0)
                    return UNSAT
                self.trail_lim.append(len(self.trail))
                if val is None:
                    self._enqueue(p, None)
                continue

            v = self._pick()
            if v == 0:
                return SAT
            self.stats["decisions"] += 1
            self.trail_lim.append(len(self.trail))
            lit = v if self.polarity[v] else -v
            self._enqueue(lit, None)

    # -- results ------------------------------------------------------------

    def model(self) -> dict[int, bool]:
        """Assignment after SAT; unassigned vars default to saved phase."""
        out = {}
        for v in range(1, self.nvars + 1):
            val = self.assign.get(v)
            out[v] = self.polarity[v] if val is None else val
        return out

    def check_model(self, model: dict[int, bool]) -> bool:
        for cl in self.clauses:
            if not any(model[abs(l)] == (l > 0) for l in cl):
                return False
        return True
