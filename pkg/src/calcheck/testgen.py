"""Random counterexample generation with typed value generators.

Values are biased toward small numerators, denominators and list lengths so
that boundary cases (zero denominators, empty lists) show up within a few
hundred trials.  Everything is driven by an explicit seed: identical spec
and seed give identical reports, byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from . import evaluator
from .evaluator import BudgetExceeded, EvalError, GuardViolation
from .terms import (
    NIL,
    Pair,
    Rat,
    Str,
    Subst,
    Sym,
    Term,
    Value,
    Const,
    apply_subst,
    conj,
    flatten_conj,
    free_vars,
    render_value,
    truthy,
)


@dataclass(frozen=True)
class TestSpec:
    vars: tuple  # ((name, recognizer-name), ...)
    constraints: tuple = ()
    trials: int = 1000
    seed: int = 0


@dataclass
class TestReport:
    falsified: list  # list of assignments, each [(name, Value), ...]
    satisfying_trials: int = 0
    guard_rejections: int = 0
    trials_run: int = 0

    @property
    def witness_sought(self) -> bool:
        return self.satisfying_trials > 0


_SYMBOL_POOL = ["a", "b", "c", "x", "y", "foo", "bar", "baz"]
_SMALL_NUMERATORS = list(range(-12, 13))


def _gen_rational(rng: random.Random) -> Value:
    num = rng.choice(_SMALL_NUMERATORS)
    den = rng.choice([1, 1, 1, 2, 3, 4, 5, 7, 8, 12])
    return Rat(Fraction(num, den))


def _gen_int(rng) -> Value:
    return Rat(Fraction(rng.choice(_SMALL_NUMERATORS)))


def _gen_nat(rng) -> Value:
    n = 0
    while rng.random() < 0.55 and n < 30:
        n += 1
    return Rat(Fraction(n))


def _gen_pos(rng) -> Value:
    n = 1
    while rng.random() < 0.55 and n < 30:
        n += 1
    return Rat(Fraction(n))


def _gen_bool(rng) -> Value:
    return evaluator.TRUE if rng.random() < 0.5 else NIL


def _gen_symbol(rng) -> Value:
    return Sym(rng.choice(_SYMBOL_POOL))


def _gen_small(rng) -> Value:
    r = rng.random()
    if r < 0.6:
        return _gen_int(rng)
    if r < 0.75:
        return _gen_symbol(rng)
    if r < 0.85:
        return _gen_bool(rng)
    return _gen_rational(rng)


def _gen_tl(rng) -> Value:
    out: Value = NIL
    n = 0
    while rng.random() < 0.6 and n < 8:
        n += 1
    for _ in range(n):
        out = Pair(_gen_small(rng), out)
    return out


def _gen_cons(rng) -> Value:
    if rng.random() < 0.7:
        v = _gen_tl(rng)
        return v if isinstance(v, Pair) else Pair(_gen_small(rng), NIL)
    return Pair(_gen_small(rng), _gen_small(rng))


def _gen_all(rng) -> Value:
    r = rng.random()
    if r < 0.35:
        return _gen_rational(rng)
    if r < 0.55:
        return _gen_tl(rng)
    if r < 0.7:
        return _gen_int(rng)
    if r < 0.8:
        return _gen_symbol(rng)
    if r < 0.9:
        return _gen_bool(rng)
    if r < 0.97:
        return _gen_cons(rng)
    return Str(rng.choice(["", "s", "list"]))


GENERATORS = {
    "allp": _gen_all,
    "boolp": _gen_bool,
    "natp": _gen_nat,
    "posp": _gen_pos,
    "intp": _gen_int,
    "rationalp": _gen_rational,
    "tlp": _gen_tl,
    "consp": _gen_cons,
    "symbolp": _gen_symbol,
}


def generate_value(recognizer: str, rng: random.Random) -> Value:
    gen = GENERATORS.get(recognizer)
    if gen is None:
        gen = _gen_all
    v = gen(rng)
    assert evaluator.check_recognizer(recognizer, v) if recognizer in GENERATORS else True
    return v


def _eval_under(t: Term, assignment, env, budget=60_000) -> Optional[Value]:
    sub = Subst(tuple((n, Const(v)) for n, v in assignment))
    return evaluator.eval_ground(apply_subst(sub, t), env, budget=budget)


def run_tests(target: Term, spec: TestSpec, env, max_found: int = 3) -> TestReport:
    """Search for assignments that satisfy the constraints and falsify the
    target.  Every reported assignment has been re-checked by evaluation."""
    rng = random.Random(spec.seed)
    report = TestReport(falsified=[])
    for _ in range(spec.trials):
        report.trials_run += 1
        assignment = [(name, generate_value(recog, rng)) for name, recog in spec.vars]
        try:
            ok = True
            for c in spec.constraints:
                if not truthy(_eval_under(c, assignment, env)):
                    ok = False
                    break
            if not ok:
                continue
            report.satisfying_trials += 1
            v = _eval_under(target, assignment, env)
        except GuardViolation:
            report.guard_rejections += 1
            continue
        except (BudgetExceeded, EvalError):
            continue
        if not truthy(v):
            # self-check before emission: constraints true, target false
            try:
                recheck = all(
                    truthy(_eval_under(c, assignment, env)) for c in spec.constraints
                ) and not truthy(_eval_under(target, assignment, env))
            except EvalError:
                recheck = False
            if recheck:
                report.falsified.append(assignment)
                if len(report.falsified) >= max_found:
                    break
    return report


def find_counterexamples(target: Term, spec: TestSpec, env) -> list:
    return run_tests(target, spec, env).falsified


def find_satisfying(target: Term, env, seed: int = 0, trials: int = 300, var_recogs=None):
    """A typed assignment making target evaluate true, or None."""
    names = free_vars(target)
    if not names:
        try:
            return [] if truthy(evaluator.eval_ground(target, env, budget=60_000)) else None
        except EvalError:
            return None
    recogs = dict(var_recogs or {})
    for c in flatten_conj(target):
        from .guards import is_type_predicate
        from .terms import App, Var

        if is_type_predicate(c, env) and isinstance(c.args[0], Var):
            recogs.setdefault(c.args[0].name, c.fn)
    rng = random.Random(seed ^ 0x5EED)
    for _ in range(trials):
        assignment = [(n, generate_value(recogs.get(n, "allp"), rng)) for n in names]
        try:
            if truthy(_eval_under(target, assignment, env)):
                return assignment
        except EvalError:
            continue
    return None


def render_assignment(assignment) -> str:
    return "(" + " ".join(f"({n} {render_value(v)})" for n, v in assignment) + ")"


def render_assignments(assignments) -> str:
    return "(" + "\n ".join(render_assignment(a) for a in assignments) + ")"
