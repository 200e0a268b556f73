"""A small CDCL solver that emits clausal (RUP-checkable) derivations.

Instances here are tiny (tens of variables), so propagation scans the
clause list directly instead of using watched literals.  On UNSAT the
solver returns its learned clauses in chronological order ending with the
empty clause; each is derivable by unit propagation from the clauses
before it, which is exactly what the kernel re-checks.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple


class SatResult:
    __slots__ = ("status", "model", "derivation")

    def __init__(self, status: str, model=None, derivation=None):
        self.status = status  # SAT | UNSAT | UNKNOWN
        self.model = model or {}
        self.derivation = derivation or []


def solve(clauses: List[List[int]], nvars: int, max_conflicts: int = 100_000) -> SatResult:
    db = [list(c) for c in clauses]
    assign: Dict[int, bool] = {}
    level: Dict[int, int] = {}
    reason: Dict[int, Optional[int]] = {}
    trail: List[int] = []
    dl = 0
    derivation: List[List[int]] = []
    conflicts = 0

    def value(lit: int):
        v = assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def enqueue(lit: int, why: Optional[int]):
        assign[abs(lit)] = lit > 0
        level[abs(lit)] = dl
        reason[abs(lit)] = why
        trail.append(lit)

    def propagate() -> Optional[int]:
        # returns the index of a conflicting clause, or None
        changed = True
        while changed:
            changed = False
            for ci, cl in enumerate(db):
                sat = False
                unassigned = []
                for lit in cl:
                    v = value(lit)
                    if v is True:
                        sat = True
                        break
                    if v is None:
                        unassigned.append(lit)
                        if len(unassigned) > 1:
                            break
                if sat:
                    continue
                if not unassigned:
                    return ci
                if len(unassigned) == 1:
                    enqueue(unassigned[0], ci)
                    changed = True
        return None

    def analyze(conflict_ci: int) -> Tuple[List[int], int]:
        # first-UIP learning
        learned: List[int] = []
        seen = set()
        counter = 0
        cl = list(db[conflict_ci])
        idx = len(trail) - 1
        p: Optional[int] = None
        while True:
            for lit in cl:
                v = abs(lit)
                if v in seen:
                    continue
                if p is not None and v == abs(p):
                    continue
                seen.add(v)
                if level.get(v, 0) == dl:
                    counter += 1
                else:
                    if level.get(v, 0) > 0:
                        learned.append(-v if assign[v] else v)
            # walk the trail backwards to the next marked literal at dl
            while idx >= 0 and abs(trail[idx]) not in seen:
                idx -= 1
            if idx < 0:
                break
            p = trail[idx]
            v = abs(p)
            seen.discard(v)
            idx -= 1
            counter -= 1
            if counter == 0:
                learned.append(-v if assign[v] else v)
                break
            cl = db[reason[v]] if reason[v] is not None else []
        # backjump level: second highest level in learned
        if len(learned) <= 1:
            bj = 0
        else:
            levels = sorted((level.get(abs(l), 0) for l in learned), reverse=True)
            bj = levels[1]
        return learned, bj

    def backjump(to_level: int):
        nonlocal dl
        while trail and level[abs(trail[-1])] > to_level:
            lit = trail.pop()
            v = abs(lit)
            del assign[v]
            del level[v]
            del reason[v]
        dl = to_level

    while True:
        ci = propagate()
        if ci is not None:
            conflicts += 1
            if conflicts > max_conflicts:
                return SatResult("UNKNOWN")
            if dl == 0:
                derivation.append([])
                return SatResult("UNSAT", derivation=derivation)
            learned, bj = analyze(ci)
            derivation.append(list(learned))
            backjump(bj)
            db.append(learned)
            continue
        # decide the lowest-index unassigned variable
        pick = None
        for v in range(1, nvars + 1):
            if v not in assign:
                pick = v
                break
        if pick is None:
            model = dict(assign)
            return SatResult("SAT", model=model)
        dl += 1
        enqueue(-pick, None)


def rup_check(initial: List[List[int]], derivation: List[List[int]]) -> bool:
    """Verify a clausal derivation by reverse unit propagation.

    Each derived clause, with its literals negated as assumptions, must
    propagate to a conflict against the clauses seen so far; the last
    derived clause must be empty.
    """
    if not derivation or derivation[-1] != []:
        return False
    db = [list(c) for c in initial]
    for derived in derivation:
        if not _propagates_to_conflict(db, derived):
            return False
        db.append(list(derived))
    return True


def _propagates_to_conflict(db: List[List[int]], assumed_clause: List[int]) -> bool:
    assign: Dict[int, bool] = {}
    for lit in assumed_clause:
        v = abs(lit)
        want = lit < 0  # negate the literal
        if v in assign and assign[v] != want:
            return True  # the clause is a tautology: negation already conflicts
        assign[v] = want

    def value(lit: int):
        v = assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    changed = True
    while changed:
        changed = False
        for cl in db:
            sat = False
            unassigned = []
            for lit in cl:
                v = value(lit)
                if v is True:
                    sat = True
                    break
                if v is None:
                    unassigned.append(lit)
                    if len(unassigned) > 1:
                        break
            if sat:
                continue
            if not unassigned:
                return True
            if len(unassigned) == 1:
                lit = unassigned[0]
                assign[abs(lit)] = lit > 0
                changed = True
    return False
