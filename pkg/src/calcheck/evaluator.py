"""Call-by-value evaluation of ground terms.

Guard checking is always on: a call whose guard conjunct evaluates false
raises GuardViolation.  This evaluator is the executable oracle behind the
random tester and the rewrite soundness checks, so it must be deterministic
and total up to its step budget.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional

from .terms import (
    NIL,
    TRUE,
    App,
    Const,
    Pair,
    Rat,
    Str,
    Sym,
    Term,
    Value,
    from_bool,
    is_true_list,
    render,
    truthy,
    value_less,
)


class EvalError(Exception):
    pass


class GuardViolation(EvalError):
    def __init__(self, guard: str, call: str):
        super().__init__(f"guard {guard} violated by {call}")
        self.guard = guard
        self.call = call


class BudgetExceeded(EvalError):
    def __init__(self, what: str = "evaluation step budget exhausted"):
        super().__init__(what)


class UnknownFunction(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unknown function {name}")
        self.name = name


class Steps:
    """Mutable step counter shared across one evaluation."""

    __slots__ = ("left", "depth")

    def __init__(self, budget: int):
        self.left = budget
        self.depth = 0

    def tick(self, n: int = 1):
        self.left -= n
        if self.left < 0:
            raise BudgetExceeded()


MAX_DEPTH = 400


# ---------------------------------------------------------------------------
# Value-level recognizers and helpers


def is_rat(v: Value) -> bool:
    return isinstance(v, Rat)


def is_int(v: Value) -> bool:
    return isinstance(v, Rat) and v.value.denominator == 1


def is_nat(v: Value) -> bool:
    return is_int(v) and v.value >= 0


def is_pos(v: Value) -> bool:
    return is_int(v) and v.value > 0


def is_bool(v: Value) -> bool:
    return v is TRUE or v is NIL


def is_symbol(v: Value) -> bool:
    # t and nil are symbols, as usual in this universe.
    return isinstance(v, Sym) or v is TRUE or v is NIL


RECOGNIZERS: dict = {
    "allp": lambda v: True,
    "boolp": is_bool,
    "natp": is_nat,
    "posp": is_pos,
    "intp": is_int,
    "rationalp": is_rat,
    "tlp": is_true_list,
    "consp": lambda v: isinstance(v, Pair),
    "symbolp": is_symbol,
}


def check_recognizer(name: str, v: Value) -> bool:
    fn = RECOGNIZERS.get(name)
    if fn is None:
        raise UnknownFunction(name)
    return fn(v)


def _need_rat(v: Value, call: str) -> Fraction:
    if not isinstance(v, Rat):
        raise GuardViolation("(rationalp _)", call)
    return v.value


def _need_cons(v: Value, call: str) -> Pair:
    if not isinstance(v, Pair):
        raise GuardViolation("(consp _)", call)
    return v


# ---------------------------------------------------------------------------
# Builtin applications (strict arguments)


def _bi_first(args, call):
    return _need_cons(args[0], call).head


def _bi_rest(args, call):
    return _need_cons(args[0], call).tail


def _bi_endp(args, call):
    v = args[0]
    if not (v is NIL or isinstance(v, Pair)):
        raise GuardViolation("(v (== _ nil) (consp _))", call)
    return from_bool(v is NIL)


def _bi_plus(args, call):
    total = Fraction(0)
    for a in args:
        total += _need_rat(a, call)
    return Rat(total)


def _bi_times(args, call):
    total = Fraction(1)
    for a in args:
        total *= _need_rat(a, call)
    return Rat(total)


def _bi_minus(args, call):
    if len(args) == 1:
        return Rat(-_need_rat(args[0], call))
    acc = _need_rat(args[0], call)
    for a in args[1:]:
        acc -= _need_rat(a, call)
    return Rat(acc)


def _bi_div(args, call):
    num = _need_rat(args[0], call)
    den = _need_rat(args[1], call)
    if den == 0:
        raise GuardViolation("(! (== _ 0))", call)
    return Rat(num / den)


def _bi_less(args, call):
    return from_bool(_need_rat(args[0], call) < _need_rat(args[1], call))


def _bi_leq(args, call):
    return from_bool(_need_rat(args[0], call) <= _need_rat(args[1], call))


def _bi_order(args, call):
    return from_bool(value_less(args[0], args[1]))


def _bi_order_eq(args, call):
    return from_bool(args[0] == args[1] or value_less(args[0], args[1]))


def _bi_bin_app(args, call):
    x, y = args
    if not is_true_list(x):
        raise GuardViolation("(tlp _)", call)
    items = []
    v = x
    while isinstance(v, Pair):
        items.append(v.head)
        v = v.tail
    out = y
    for h in reversed(items):
        out = Pair(h, out)
    return out


def _bi_len(args, call):
    n = 0
    v = args[0]
    while isinstance(v, Pair):
        n += 1
        v = v.tail
    return Rat(Fraction(n))


BUILTIN_APPLY: dict = {
    "cons": (2, lambda a, c: Pair(a[0], a[1])),
    "first": (1, _bi_first),
    "rest": (1, _bi_rest),
    "consp": (1, lambda a, c: from_bool(isinstance(a[0], Pair))),
    "endp": (1, _bi_endp),
    "bin-app": (2, _bi_bin_app),
    "len": (1, _bi_len),
    "!": (1, lambda a, c: from_bool(not truthy(a[0]))),
    "==": (2, lambda a, c: from_bool(a[0] == a[1])),
    "<": (2, _bi_less),
    "<=": (2, _bi_leq),
    "+": (None, _bi_plus),
    "*": (None, _bi_times),
    "-": (None, _bi_minus),
    "/": (2, _bi_div),
    "<<": (2, _bi_order),
    "<<=": (2, _bi_order_eq),
}

for _name in RECOGNIZERS:
    BUILTIN_APPLY[_name] = (
        1,
        (lambda nm: lambda a, c: from_bool(check_recognizer(nm, a[0])))(_name),
    )

SHORT_CIRCUIT = {"if", "^", "v", "=>", "<=>"}

BUILTIN_NAMES = set(BUILTIN_APPLY) | SHORT_CIRCUIT


def eval_ground(t: Term, env, budget: int = 100_000) -> Value:
    """Evaluate a variable-free term.

    env supplies defined functions via env.lookup_function(name); pass
    env=None to evaluate over builtins only.  Raises GuardViolation,
    BudgetExceeded or UnknownFunction.
    """
    steps = Steps(budget)
    return _eval(t, env, steps)


def _eval(t: Term, env, steps: Steps) -> Value:
    steps.tick()
    if isinstance(t, Const):
        return t.value
    if not isinstance(t, App):
        raise EvalError(f"cannot evaluate non-ground term {render(t)}")
    fn = t.fn

    if fn == "if":
        c = _eval(t.args[0], env, steps)
        return _eval(t.args[1] if truthy(c) else t.args[2], env, steps)
    if fn == "^":
        v: Value = TRUE
        for a in t.args:
            v = _eval(a, env, steps)
            if not truthy(v):
                return NIL
        return v
    if fn == "v":
        for a in t.args:
            v = _eval(a, env, steps)
            if truthy(v):
                return v
        return NIL
    if fn == "=>":
        if not truthy(_eval(t.args[0], env, steps)):
            return TRUE
        return from_bool(truthy(_eval(t.args[1], env, steps)))
    if fn == "<=>":
        a = truthy(_eval(t.args[0], env, steps))
        b = truthy(_eval(t.args[1], env, steps))
        return from_bool(a == b)

    entry = BUILTIN_APPLY.get(fn)
    if entry is not None:
        arity, impl = entry
        if arity is not None and len(t.args) != arity:
            raise EvalError(f"{fn} expects {arity} arguments in {render(t)}")
        args = [_eval(a, env, steps) for a in t.args]
        return impl(args, render(t))

    fdef = env.lookup_function(fn) if env is not None else None
    if fdef is None:
        raise UnknownFunction(fn)
    args = [_eval(a, env, steps) for a in t.args]
    if len(args) != len(fdef.params):
        raise EvalError(f"{fn} expects {len(fdef.params)} arguments")
    for (pname, recog), v in zip(fdef.params, args):
        if not check_recognizer(recog, v):
            raise GuardViolation(f"({recog} {pname})", render(t))
    steps.depth += 1
    if steps.depth > MAX_DEPTH:
        raise BudgetExceeded("evaluation recursion too deep")
    try:
        frame = dict(zip((p for p, _ in fdef.params), args))
        return _eval_body(fdef.body, frame, env, steps)
    finally:
        steps.depth -= 1


def _eval_body(t: Term, frame: dict, env, steps: Steps) -> Value:
    # Substitute lazily through an environment frame instead of rebuilding
    # the term; bodies only reference their own parameters.
    from .terms import Var

    steps.tick()
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        try:
            return frame[t.name]
        except KeyError:
            raise EvalError(f"unbound variable {t.name}")
    fn = t.fn
    if fn == "if":
        c = _eval_body(t.args[0], frame, env, steps)
        return _eval_body(t.args[1] if truthy(c) else t.args[2], frame, env, steps)
    if fn == "^":
        v: Value = TRUE
        for a in t.args:
            v = _eval_body(a, frame, env, steps)
            if not truthy(v):
                return NIL
        return v
    if fn == "v":
        for a in t.args:
            v = _eval_body(a, frame, env, steps)
            if truthy(v):
                return v
        return NIL
    if fn == "=>":
        if not truthy(_eval_body(t.args[0], frame, env, steps)):
            return TRUE
        return from_bool(truthy(_eval_body(t.args[1], frame, env, steps)))
    if fn == "<=>":
        a = truthy(_eval_body(t.args[0], frame, env, steps))
        b = truthy(_eval_body(t.args[1], frame, env, steps))
        return from_bool(a == b)

    entry = BUILTIN_APPLY.get(fn)
    if entry is not None:
        arity, impl = entry
        if arity is not None and len(t.args) != arity:
            raise EvalError(f"{fn} expects {arity} arguments")
        args = [_eval_body(a, frame, env, steps) for a in t.args]
        rendered = "(" + fn + " " + " ".join(render_value_safe(a) for a in args) + ")"
        return impl(args, rendered)

    fdef = env.lookup_function(fn) if env is not None else None
    if fdef is None:
        raise UnknownFunction(fn)
    args = [_eval_body(a, frame, env, steps) for a in t.args]
    for (pname, recog), v in zip(fdef.params, args):
        if not check_recognizer(recog, v):
            raise GuardViolation(f"({recog} {pname})", fn)
    steps.depth += 1
    if steps.depth > MAX_DEPTH:
        raise BudgetExceeded("evaluation recursion too deep")
    try:
        new_frame = dict(zip((p for p, _ in fdef.params), args))
        return _eval_body(fdef.body, new_frame, env, steps)
    finally:
        steps.depth -= 1


def render_value_safe(v: Value) -> str:
    from .terms import render_value

    try:
        return render_value(v)
    except Exception:
        return "<value>"
