"""Definitions, rule sets and theory resolution.

An Environment is an immutable snapshot of everything a proof may rely on:
function definitions (each contributing a definitional equation and a
contract rule), abbreviations, admitted lemmas and the built-in rule groups.
Admitting an item returns a new environment; old snapshots stay valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import evaluator
from .terms import (
    App,
    Const,
    NIL,
    Subst,
    T_NIL,
    T_TRUE,
    Term,
    Var,
    app,
    apply_subst,
    conj,
    disj,
    equal,
    free_vars,
    implies,
    neg,
    render,
)


class EnvironmentError_(Exception):
    pass


class DefinitionError(EnvironmentError_):
    pass


class GuardError(EnvironmentError_):
    pass


class TerminationError(EnvironmentError_):
    pass


class UnknownTheory(EnvironmentError_):
    pass


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple  # ((name, recognizer), ...)
    ret: str  # return recognizer name
    body: Term
    recursive: bool = False
    assume_terminating: bool = False


@dataclass(frozen=True)
class Abbrev:
    name: str
    params: tuple
    body: Term


@dataclass(frozen=True)
class Lemma:
    name: str
    statement: Term
    status: str  # assumed | proved | conditionally-proved


@dataclass(frozen=True)
class Rule:
    """A conditional rewrite equation, oriented left to right."""

    rule_id: str
    conds: tuple
    lhs: Term
    rhs: Term
    kind: str  # simplify | tau | cons | tp | contract | definition
    recursive: bool = False  # recursive definition: unfolding is progress-gated


@dataclass(frozen=True)
class RuleSet:
    name: str
    rule_ids: frozenset

    def __contains__(self, rid: str) -> bool:
        return rid in self.rule_ids

    def union(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(f"(union {self.name} {other.name})", self.rule_ids | other.rule_ids)


# Permission pseudo-rules.  @ground-eval lets the rewriter evaluate ground
# builtin applications, @executable extends that to defined functions,
# @arith enables the linear-arithmetic procedure and @recognizer-bounds
# feeds posp/natp facts to it.
P_GROUND = "@ground-eval"
P_EXEC = "@executable"
P_ARITH = "@arith"
P_BOUNDS = "@recognizer-bounds"


def _v(n: str) -> Var:
    return Var(n)


def _rule(rid, conds, lhs, rhs, kind, recursive=False) -> Rule:
    return Rule(rid, tuple(conds), lhs, rhs, kind, recursive)


def _builtin_rules() -> list:
    x, y, c, a, b = _v("x"), _v("y"), _v("c"), _v("a"), _v("b")
    rules = [
        # min simplification
        _rule("if-true", [c], app("if", c, a, b), a, "simplify"),
        _rule("if-false", [neg(c)], app("if", c, a, b), b, "simplify"),
        _rule("if-same", [], app("if", c, a, a), a, "simplify"),
        _rule("equal-same", [], equal(x, x), T_TRUE, "simplify"),
        _rule("endp-definition", [], app("endp", x), neg(app("consp", x)), "simplify"),
        _rule("allp-true", [], app("allp", x), T_TRUE, "simplify"),
        # recognizer propagation (the type reasoning folded into min)
        _rule("tau-tlp-nil", [app("tlp", x)], equal(x, T_NIL), neg(app("consp", x)), "tau"),
        _rule("tau-tlp-nil-flip", [app("tlp", x)], equal(T_NIL, x), neg(app("consp", x)), "tau"),
        _rule("tau-consp-nil", [app("consp", x)], equal(x, T_NIL), T_NIL, "tau"),
        _rule("tau-consp-nil-flip", [app("consp", x)], equal(T_NIL, x), T_NIL, "tau"),
        _rule("tau-posp-zero", [app("posp", x)], equal(x, Const(_zero())), T_NIL, "tau"),
        _rule("tau-posp-zero-flip", [app("posp", x)], equal(Const(_zero()), x), T_NIL, "tau"),
        _rule("tau-natp-posp", [app("posp", x)], app("natp", x), T_TRUE, "tau"),
        _rule("tau-intp-posp", [app("posp", x)], app("intp", x), T_TRUE, "tau"),
        _rule("tau-intp-natp", [app("natp", x)], app("intp", x), T_TRUE, "tau"),
        _rule("tau-rationalp-posp", [app("posp", x)], app("rationalp", x), T_TRUE, "tau"),
        _rule("tau-rationalp-natp", [app("natp", x)], app("rationalp", x), T_TRUE, "tau"),
        _rule("tau-rationalp-intp", [app("intp", x)], app("rationalp", x), T_TRUE, "tau"),
        # cons axioms (hint-gated group)
        _rule("first-cons", [], app("first", app("cons", a, b)), a, "cons"),
        _rule("rest-cons", [], app("rest", app("cons", a, b)), b, "cons"),
        _rule("consp-cons", [], app("consp", app("cons", a, b)), T_TRUE, "cons"),
        # type prescriptions of the builtins
        _rule("tlp-rest-tp", [app("tlp", x)], app("tlp", app("rest", x)), T_TRUE, "tp"),
        _rule("tlp-cons-tp", [], app("tlp", app("cons", a, b)), app("tlp", b), "tp"),
        _rule("tlp-bin-app-tp", [app("tlp", x), app("tlp", y)], app("tlp", app("bin-app", x, y)), T_TRUE, "tp"),
        _rule("natp-len-tp", [], app("natp", app("len", x)), T_TRUE, "tp"),
    ]
    closures = [
        ("posp", "+", ["posp", "posp"]),
        ("posp", "*", ["posp", "posp"]),
        ("natp", "+", ["natp", "natp"]),
        ("natp", "*", ["natp", "natp"]),
        ("intp", "+", ["intp", "intp"]),
        ("intp", "*", ["intp", "intp"]),
        ("intp", "-", ["intp", "intp"]),
        ("rationalp", "+", ["rationalp", "rationalp"]),
        ("rationalp", "*", ["rationalp", "rationalp"]),
        ("rationalp", "-", ["rationalp", "rationalp"]),
    ]
    for recog, op, arg_recogs in closures:
        conds = [app(r, v) for r, v in zip(arg_recogs, (x, y))]
        rules.append(
            _rule(f"{recog}{op}-tp", conds, app(recog, app(op, x, y)), T_TRUE, "tp")
        )
    rules.append(_rule("intp-neg-tp", [app("intp", x)], app("intp", App("-", (x,))), T_TRUE, "tp"))
    rules.append(
        _rule("rationalp-neg-tp", [app("rationalp", x)], app("rationalp", App("-", (x,))), T_TRUE, "tp")
    )
    rules.append(
        _rule(
            "rationalp/-tp",
            [app("rationalp", x), app("rationalp", y), neg(equal(y, Const(_zero())))],
            app("rationalp", app("/", x, y)),
            T_TRUE,
            "tp",
        )
    )
    # builtin definitional equations
    rules.append(
        _rule(
            "bin-app-definition",
            [],
            app("bin-app", x, y),
            app("if", app("endp", x), y, app("cons", app("first", x), app("bin-app", app("rest", x), y))),
            "definition",
            recursive=True,
        )
    )
    rules.append(
        _rule(
            "len-definition",
            [],
            app("len", x),
            app("if", app("consp", x), app("+", Const(_one()), app("len", app("rest", x))), Const(_zero())),
            "definition",
            recursive=True,
        )
    )
    return rules


def _zero():
    from .terms import rat

    return rat(0)


def _one():
    from .terms import rat

    return rat(1)


BOOL_HEADS = frozenset(
    ["!", "^", "v", "=>", "<=>", "==", "<", "<=", "<<", "<<=", "endp", "consp"]
) | frozenset(evaluator.RECOGNIZERS)

_BUILTIN_GUARDS: dict = {
    "first": lambda a: [app("consp", a[0])],
    "rest": lambda a: [app("consp", a[0])],
    "endp": lambda a: [disj([equal(a[0], T_NIL), app("consp", a[0])])],
    "/": lambda a: [
        app("rationalp", a[0]),
        app("rationalp", a[1]),
        neg(equal(a[1], Const(_zero()))),
    ],
    "<": lambda a: [app("rationalp", a[0]), app("rationalp", a[1])],
    "<=": lambda a: [app("rationalp", a[0]), app("rationalp", a[1])],
    "+": lambda a: [app("rationalp", x) for x in a],
    "*": lambda a: [app("rationalp", x) for x in a],
    "-": lambda a: [app("rationalp", x) for x in a],
    "bin-app": lambda a: [app("tlp", a[0])],
}

DEF_ALIASES = {"app": "bin-app", "append": "bin-app"}


class Environment:
    """Immutable registry of definitions, abbreviations, lemmas and rules."""

    def __init__(self, functions=None, abbrevs=None, lemmas=None, rules=None, order=None):
        self._functions: dict = functions or {}
        self._abbrevs: dict = abbrevs or {}
        self._lemmas: dict = lemmas or {}
        self._rules: dict = rules if rules is not None else {r.rule_id: r for r in _builtin_rules()}
        self._order: tuple = order or tuple(self._rules)
        self._rule_index: Optional[dict] = None
        self._snapshot: Optional[str] = None

    # -- functional update ---------------------------------------------------

    def _copy(self, **kw) -> "Environment":
        return Environment(
            functions=kw.get("functions", self._functions),
            abbrevs=kw.get("abbrevs", self._abbrevs),
            lemmas=kw.get("lemmas", self._lemmas),
            rules=kw.get("rules", self._rules),
            order=kw.get("order", self._order),
        )

    # -- lookups ---------------------------------------------------------------

    def lookup_function(self, name: str) -> Optional[FunctionDef]:
        return self._functions.get(name)

    def functions(self):
        return self._functions.values()

    def lookup_abbrev(self, name: str) -> Optional[Abbrev]:
        return self._abbrevs.get(name)

    def lookup_lemma(self, name: str) -> Optional[Lemma]:
        return self._lemmas.get(name)

    def lemmas(self):
        return self._lemmas.values()

    def rule(self, rid: str) -> Optional[Rule]:
        return self._rules.get(rid)

    def rules_for_head(self, head: str) -> list:
        if self._rule_index is None:
            index: dict = {}
            for rid in self._order:
                r = self._rules[rid]
                if isinstance(r.lhs, App):
                    index.setdefault(r.lhs.fn, []).append(r)
            # type prescriptions and contracts fire before the recognizer
            # lattice so compound arguments are handled without search
            prio = {"simplify": 0, "cons": 1, "tp": 2, "contract": 3, "tau": 4, "definition": 5}
            for head_rules in index.values():
                head_rules.sort(key=lambda r: prio.get(r.kind, 9))
            self._rule_index = index
        return self._rule_index.get(head, [])

    def is_known_head(self, name: str) -> bool:
        return (
            name in evaluator.BUILTIN_NAMES
            or name in self._functions
            or name in self._abbrevs
            or name in ("app", "append", "list")
        )

    def arity_of(self, name: str) -> Optional[int]:
        if name in self._functions:
            return len(self._functions[name].params)
        entry = evaluator.BUILTIN_APPLY.get(name)
        if entry is not None:
            return entry[0]
        return None

    def boolean_valued(self, t: Term) -> bool:
        if isinstance(t, Const):
            return t.value in (evaluator.TRUE, evaluator.NIL)
        if isinstance(t, Var):
            return False
        assert isinstance(t, App)
        if t.fn == "if":
            return len(t.args) == 3 and self.boolean_valued(t.args[1]) and self.boolean_valued(t.args[2])
        if t.fn in BOOL_HEADS:
            return True
        fdef = self._functions.get(t.fn)
        return fdef is not None and fdef.ret == "boolp"

    def is_recognizer_name(self, name: str) -> bool:
        if name in evaluator.RECOGNIZERS:
            return True
        fdef = self._functions.get(name)
        return fdef is not None and fdef.ret == "boolp" and len(fdef.params) == 1

    def guard_obligations_of_call(self, t: App) -> list:
        fdef = self._functions.get(t.fn)
        if fdef is not None:
            return [
                app(recog, arg)
                for (pname, recog), arg in zip(fdef.params, t.args)
                if recog != "allp"
            ]
        mk = _BUILTIN_GUARDS.get(t.fn)
        if mk is not None:
            return mk(list(t.args))
        return []

    # -- macro and abbreviation expansion ---------------------------------------

    def expand(self, t: Term) -> Term:
        """Expand abbreviations and the app/append/list macros everywhere."""
        for _ in range(200):
            t2 = self._expand_once(t)
            if t2 == t:
                return t
            t = t2
        raise DefinitionError("abbreviation expansion did not reach a fixed point")

    def _expand_once(self, t: Term) -> Term:
        if not isinstance(t, App):
            return t
        args = tuple(self._expand_once(a) for a in t.args)
        fn = t.fn
        if fn in ("app", "append"):
            if not args:
                return T_NIL
            out = args[-1]
            for a in reversed(args[:-1]):
                out = app("bin-app", a, out)
            return out
        if fn == "list":
            out: Term = T_NIL
            for a in reversed(args):
                out = app("cons", a, out)
            return out
        ab = self._abbrevs.get(fn)
        if ab is not None:
            if len(args) != len(ab.params):
                raise DefinitionError(
                    f"abbreviation {fn} expects {len(ab.params)} arguments, got {len(args)}"
                )
            return apply_subst(Subst(tuple(zip(ab.params, args))), ab.body)
        return App(fn, args)

    # -- admission ----------------------------------------------------------------

    def _check_name_free(self, name: str):
        if (
            name in self._functions
            or name in self._abbrevs
            or name in evaluator.BUILTIN_NAMES
            or name in ("app", "append", "list", "if", "match")
        ):
            raise DefinitionError(f"name {name} is already in use")

    def _check_calls(self, t: Term, extra: Optional[dict] = None):
        if not isinstance(t, App):
            return
        fn = t.fn
        arity = self.arity_of(fn)
        if arity is None and extra and fn in extra:
            arity = extra[fn]
        if arity is None and fn not in evaluator.BUILTIN_NAMES:
            raise DefinitionError(f"unknown function {fn} in {render(t)}")
        if arity is not None and len(t.args) != arity:
            raise DefinitionError(f"{fn} applied to {len(t.args)} arguments in {render(t)}")
        for a in t.args:
            self._check_calls(a, extra)

    def define_abbrev(self, ab: Abbrev) -> "Environment":
        self._check_name_free(ab.name)
        if len(set(ab.params)) != len(ab.params):
            raise DefinitionError(f"duplicate parameter in abbreviation {ab.name}")
        body = self.expand(ab.body)
        for v in free_vars(body):
            if v not in ab.params:
                raise DefinitionError(f"abbreviation {ab.name} body mentions free {v}")
        if _mentions_head(body, ab.name):
            raise DefinitionError(f"abbreviation {ab.name} is cyclic")
        abbrevs = dict(self._abbrevs)
        abbrevs[ab.name] = Abbrev(ab.name, tuple(ab.params), body)
        return self._copy(abbrevs=abbrevs)

    def define_function(self, fdef: FunctionDef, prover: Optional[Callable] = None):
        """Admit a definition.  Returns (env, warnings).

        prover, when given, is called as prover(hyps, concl, env) -> bool to
        discharge the body's guard obligations; omitted in low-level tests.
        """
        self._check_name_free(fdef.name)
        names = [p for p, _ in fdef.params]
        if len(set(names)) != len(names):
            raise DefinitionError(f"duplicate parameter in {fdef.name}")
        for _, recog in list(fdef.params) + [("", fdef.ret)]:
            if recog not in evaluator.RECOGNIZERS and recog != "boolp":
                raise DefinitionError(f"unknown type recognizer {recog}")
        body = self.expand(fdef.body)
        for v in free_vars(body):
            if v not in names:
                raise DefinitionError(f"body of {fdef.name} mentions free {v}")
        recursive = _mentions_head(body, fdef.name)
        fd = FunctionDef(fdef.name, tuple(fdef.params), fdef.ret, body, recursive, fdef.assume_terminating)
        self._check_calls(body, extra={fdef.name: len(names)})

        warnings = []
        if recursive:
            ok = _structural_decrease(fd)
            if not ok:
                if fd.assume_terminating:
                    warnings.append(
                        f"termination of {fd.name} assumed, structural decrease not established"
                    )
                else:
                    raise TerminationError(
                        f"no argument of {fd.name} structurally decreases on every recursive call"
                    )

        functions = dict(self._functions)
        functions[fd.name] = fd
        rules = dict(self._rules)
        order = list(self._order)
        params = tuple(Var(p) for p, _ in fd.params)
        drule = Rule(
            f"{fd.name}-definition", (), App(fd.name, params), body, "definition", recursive
        )
        rules[drule.rule_id] = drule
        order.append(drule.rule_id)
        if fd.ret != "allp":
            conds = tuple(app(r, Var(p)) for p, r in fd.params if r != "allp")
            crule = Rule(
                f"{fd.name}-CONTRACT", conds, app(fd.ret, App(fd.name, params)), T_TRUE, "contract"
            )
            rules[crule.rule_id] = crule
            order.append(crule.rule_id)
        env2 = self._copy(functions=functions, rules=rules, order=tuple(order))

        if prover is not None:
            from .guards import guard_obligations

            hyps = [app(r, Var(p)) for p, r in fd.params if r != "allp"]
            obligation = guard_obligations(body, env2)
            if obligation != T_TRUE and not prover(hyps, obligation, env2):
                raise GuardError(
                    f"guards of the body of {fd.name} do not follow from its parameter types: "
                    f"{render(obligation)}"
                )
        return env2, warnings

    def add_lemma(self, lemma: Lemma) -> "Environment":
        if lemma.name in self._lemmas:
            raise DefinitionError(f"lemma name {lemma.name} is already in use")
        lemmas = dict(self._lemmas)
        lemmas[lemma.name] = lemma
        return self._copy(lemmas=lemmas)

    # -- theories ----------------------------------------------------------------

    def _group(self, name: str) -> frozenset:
        kinds = {
            "min": ("simplify", "tau"),
            "cons-axioms": ("cons",),
            "type-prescription": ("tp", "contract"),
        }
        if name in kinds:
            ids = frozenset(
                rid for rid, r in self._rules.items() if r.kind in kinds[name]
            )
            if name == "min":
                ids |= frozenset([P_GROUND])
            return ids
        if name == "contract":
            return (
                self._group("min")
                | self._group("type-prescription")
                | frozenset(
                    rid for rid in self._rules if rid.upper().endswith("CONTRACT")
                )
            )
        if name == "executable":
            return frozenset([P_EXEC])
        if name == "min-executable":
            return self._group("min") | self._group("executable")
        if name == "arith":
            return frozenset([P_ARITH, P_BOUNDS])
        if name == "full":
            ids = frozenset(self._rules) | frozenset([P_GROUND, P_EXEC, P_ARITH, P_BOUNDS])
            return ids
        raise UnknownTheory(f"unknown theory {name}")

    def resolve_theory(self, expr) -> RuleSet:
        """expr is a theory name, a rule id, or ("union", x, y)."""
        if isinstance(expr, RuleSet):
            return expr
        if isinstance(expr, tuple) and expr and expr[0] == "union":
            out = self.resolve_theory(expr[1])
            for sub in expr[2:]:
                out = out.union(self.resolve_theory(sub))
            return out
        if isinstance(expr, str):
            try:
                return RuleSet(expr, self._group(expr))
            except UnknownTheory:
                if expr in self._rules:
                    return RuleSet(expr, frozenset([expr]))
                raise
        raise UnknownTheory(f"malformed theory expression {expr!r}")

    # -- kernel snapshot ----------------------------------------------------------

    def snapshot_text(self) -> str:
        """Self-contained text form of the definitions and rules, consumed by
        the replay kernel through its own parser."""
        if self._snapshot is not None:
            return self._snapshot
        lines = ["ENV-BEGIN"]
        for name in sorted(self._functions):
            fd = self._functions[name]
            params = " ".join(f"({p} {r})" for p, r in fd.params)
            lines.append(f"FUNCTION {name} RET {fd.ret} PARAMS ({params}) BODY {render(fd.body)}")
        for rid in self._order:
            r = self._rules[rid]
            conds = " ".join(render(c) for c in r.conds)
            lines.append(f"RULE {rid} CONDS ({conds}) LHS {render(r.lhs)} RHS {render(r.rhs)}")
        lines.append("ENV-END")
        self._snapshot = "\n".join(lines) + "\n"
        return self._snapshot


def _mentions_head(t: Term, name: str) -> bool:
    if not isinstance(t, App):
        return False
    if t.fn == name:
        return True
    return any(_mentions_head(a, name) for a in t.args)


def _destructor_chain_of(t: Term, formal: str) -> int:
    """Depth of a first/rest chain over Var(formal); -1 if t is not one."""
    depth = 0
    while isinstance(t, App) and t.fn in ("first", "rest") and len(t.args) == 1:
        depth += 1
        t = t.args[0]
    if isinstance(t, Var) and t.name == formal and depth > 0:
        return depth
    return -1


def _collect_calls(t: Term, name: str, acc: list):
    if isinstance(t, App):
        if t.fn == name:
            acc.append(t)
        for a in t.args:
            _collect_calls(a, name, acc)


def _structural_decrease(fd: FunctionDef) -> bool:
    calls: list = []
    _collect_calls(fd.body, fd.name, calls)
    calls = [c for c in calls if len(c.args) == len(fd.params)]
    if not calls:
        return True
    for i, (pname, _) in enumerate(fd.params):
        if all(_destructor_chain_of(c.args[i], pname) > 0 for c in calls):
            return True
    return False


def base_environment() -> Environment:
    return Environment()
