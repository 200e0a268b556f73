"""Induction schemes from recursive definitions, and case matching.

The scheme of f(x1..xn) on a statement S: flatten f's body into branches
governed by if tests; each branch without recursive calls yields a base
obligation, each branch with them an induction obligation whose hypotheses
are copies of S instantiated at the recursive arguments; one contract
obligation covers arguments outside f's domain.  User cases are matched
against the generated obligations by searching for a bijection up to
provable equivalence in the minimal theory; generated obligations that are
provable outright (a vacuous contract case, an impossible branch) may be
auto-discharged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

from .guards import export
from .terms import (
    App,
    Subst,
    Term,
    Var,
    app,
    apply_subst,
    conj,
    implies,
    neg,
    render,
)


class SchemeError(Exception):
    pass


class NotRecursive(SchemeError):
    pass


class NotVariableArgs(SchemeError):
    pass


@dataclass
class Obligation:
    kind: str  # Contract | Base | Induction
    tests: tuple
    ihs: tuple
    statement: Term
    formula: Term


def _branches(t: Term, tests: list, out: list):
    if isinstance(t, App) and t.fn == "if" and len(t.args) == 3:
        c, a, b = t.args
        _branches(a, tests + [c], out)
        _branches(b, tests + [neg(c)], out)
        return
    out.append((tests, t))


def _collect_calls(t: Term, name: str, arity: int, acc: list):
    if isinstance(t, App):
        if t.fn == name and len(t.args) == arity:
            acc.append(t)
        for a in t.args:
            _collect_calls(a, name, arity, acc)


def generate_scheme(induct_term: Term, statement: Term, env) -> List[Obligation]:
    if not isinstance(induct_term, App):
        raise NotRecursive(f"{render(induct_term)} is not a recursive function application")
    fdef = env.lookup_function(induct_term.fn)
    if fdef is None or not fdef.recursive:
        raise NotRecursive(f"{induct_term.fn} is not a recursive defined function")
    args = induct_term.args
    if len(args) != len(fdef.params):
        raise NotVariableArgs(f"{induct_term.fn} expects {len(fdef.params)} arguments")
    names = []
    for a in args:
        if not isinstance(a, Var):
            raise NotVariableArgs(
                f"induction term arguments must be distinct variables, got {render(a)}"
            )
        names.append(a.name)
    if len(set(names)) != len(names):
        raise NotVariableArgs("induction term arguments must be distinct variables")

    rename = Subst(tuple((p, a) for (p, _), a in zip(fdef.params, args)))
    body = apply_subst(rename, fdef.body)
    recogs = [app(r, a) for (_, r), a in zip(fdef.params, args) if r != "allp"]

    obligations: List[Obligation] = []
    contract_formula = export(implies(neg(conj(recogs)), statement)) if recogs else None
    if contract_formula is not None:
        obligations.append(Obligation("Contract", (), (), statement, contract_formula))

    branch_list: list = []
    _branches(body, [], branch_list)
    for tests, leaf in branch_list:
        calls: list = []
        _collect_calls(leaf, induct_term.fn, len(args), calls)
        seen = set()
        ihs = []
        for call in calls:
            key = render(call)
            if key in seen:
                continue
            seen.add(key)
            sub = Subst(tuple(zip(names, call.args)))
            ihs.append(apply_subst(sub, statement))
        hyps = recogs + tests + ihs
        formula = export(implies(conj(hyps), statement)) if hyps else statement
        kind = "Induction" if ihs else "Base"
        obligations.append(Obligation(kind, tuple(tests), tuple(ihs), statement, formula))
    return obligations


@dataclass
class MatchError(Exception):
    unmatched_user: list
    unmatched_generated: list

    def __str__(self):
        parts = []
        if self.unmatched_user:
            parts.append(
                "cases with no matching obligation: "
                + ", ".join(label for label, _ in self.unmatched_user)
            )
        if self.unmatched_generated:
            parts.append(
                "obligations with no matching case: "
                + ", ".join(ob.kind for ob in self.unmatched_generated)
            )
        return "; ".join(parts)


def match_cases(
    user_cases: List[Tuple[str, str, Term]],
    obligations: List[Obligation],
    env,
    prove_equiv: Callable[[Term, Term], bool],
    prove_valid: Callable[[Term], bool],
):
    """user_cases: (kind, label, formula).  Returns (pairing, discharged)
    where pairing maps user index -> obligation index; raises MatchError."""
    n_user, n_gen = len(user_cases), len(obligations)
    candidates: List[List[int]] = []
    for kind, _label, formula in user_cases:
        row = [
            g
            for g, ob in enumerate(obligations)
            if ob.kind == kind and prove_equiv(formula, ob.formula)
        ]
        candidates.append(row)

    assigned: dict = {}
    used: set = set()

    def backtrack(u: int) -> bool:
        if u == n_user:
            return True
        for g in candidates[u]:
            if g not in used:
                assigned[u] = g
                used.add(g)
                if backtrack(u + 1):
                    return True
                used.discard(g)
                del assigned[u]
        return False

    ok = backtrack(0)
    if not ok:
        unmatched_user = [
            (label, formula)
            for u, (kind, label, formula) in enumerate(user_cases)
            if not candidates[u]
        ]
        leftover = [ob for g, ob in enumerate(obligations) if g not in used]
        raise MatchError(unmatched_user or [(lbl, f) for (k, lbl, f) in user_cases], leftover)

    discharged = []
    leftover = [(g, ob) for g, ob in enumerate(obligations) if g not in used]
    undischarged = []
    for g, ob in leftover:
        if prove_valid(ob.formula):
            discharged.append(ob)
        else:
            undischarged.append(ob)
    if undischarged:
        raise MatchError([], undischarged)
    return assigned, discharged
