"""Exportation, guard obligations and contract completion.

Guard obligations are contextualized: inside (if c a b) the obligations of
a are conditional on c and those of b on (! c), and the short-circuit
connectives contribute the analogous contexts.  A statement is contract
completed when every obligation of its body follows from its hypotheses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from .terms import (
    App,
    Const,
    T_TRUE,
    Term,
    Var,
    app,
    conj,
    flatten_conj,
    implies,
    neg,
    render,
)


def split_implication(t: Term) -> Tuple[list, Term]:
    """Hypotheses and conclusion of an exported implication.

    A non-implication splits as ([], itself)."""
    if isinstance(t, App) and t.fn == "=>" and len(t.args) == 2:
        return flatten_conj(t.args[0]), t.args[1]
    return [], t


def export(t: Term) -> Term:
    """Rewrite a => (b => c) into (a ^ b) => c at the top of the formula,
    flattening and deduplicating hypothesis conjunctions.  Idempotent."""
    if not (isinstance(t, App) and t.fn == "=>" and len(t.args) == 2):
        return t
    hyps: List[Term] = []
    concl = t
    while isinstance(concl, App) and concl.fn == "=>" and len(concl.args) == 2:
        hyps.extend(flatten_conj(concl.args[0]))
        concl = concl.args[1]
    seen = set()
    uniq = []
    for h in hyps:
        key = render(h)
        if key not in seen:
            seen.add(key)
            uniq.append(h)
    if not uniq:
        return concl
    return implies(conj(uniq), concl)


def is_type_predicate(t: Term, env) -> bool:
    """True iff t applies a recognizer (builtin, or a defined one-argument
    boolean function) to a single argument."""
    return isinstance(t, App) and len(t.args) == 1 and env.is_recognizer_name(t.fn)


def guard_obligations(t: Term, env) -> Term:
    """Conjunction of contextualized guard obligations of every call in t."""
    acc: List[Term] = []
    seen = set()

    def emit(ctx: list, ob: Term):
        formula = implies(conj(ctx), ob) if ctx else ob
        key = render(formula)
        if key not in seen:
            seen.add(key)
            acc.append(formula)

    def walk(u: Term, ctx: list):
        if not isinstance(u, App):
            return
        fn = u.fn
        if fn == "if" and len(u.args) == 3:
            c, a, b = u.args
            walk(c, ctx)
            walk(a, ctx + [c])
            walk(b, ctx + [neg(c)])
            return
        if fn == "^":
            for i, a in enumerate(u.args):
                walk(a, ctx + list(u.args[:i]))
            return
        if fn == "v":
            for i, a in enumerate(u.args):
                walk(a, ctx + [neg(x) for x in u.args[:i]])
            return
        if fn == "=>" and len(u.args) == 2:
            walk(u.args[0], ctx)
            walk(u.args[1], ctx + [u.args[0]])
            return
        for a in u.args:
            walk(a, ctx)
        for ob in env.guard_obligations_of_call(u):
            emit(ctx, ob)

    walk(t, [])
    return conj(acc)


@dataclass
class CompletionCheck:
    name: str
    ok: bool
    message: str = ""
    obligations: list = field(default_factory=list)


@dataclass
class CompletionVerdict:
    ok: bool
    trivial: bool
    exported: Term
    completed: Term
    checks: list
    failed_obligations: list


def check_contract_completion(
    statement: Term,
    exportation: Optional[Term],
    completion: Optional[Term],
    env,
    prove_equiv: Callable[[Term, Term], bool],
    prove_obligation: Callable[[list, Term], bool],
) -> CompletionVerdict:
    """Validate the exportation and contract-completion blocks of a proof.

    prove_equiv(a, b) decides boolean equivalence in the minimal theory;
    prove_obligation(hyps, ob) discharges one guard obligation under the
    contract-checking theory.
    """
    checks: List[CompletionCheck] = []

    def chk(name, ok, message="", obligations=()):
        checks.append(CompletionCheck(name, ok, message, list(obligations)))
        return ok

    e = exportation if exportation is not None else statement
    if exportation is not None:
        chk(
            "exportation-equivalent",
            prove_equiv(exportation, statement),
            "the exportation is not equivalent to the statement",
        )
    chk(
        "fully-exported",
        export(e) == e,
        f"the statement is not fully exported; expected {render(export(e))}",
    )

    completed = completion if completion is not None else e
    if completion is not None:
        hyps_e, concl_e = split_implication(e)
        hyps_c, concl_c = split_implication(completion)
        chk(
            "completion-conclusion-unchanged",
            concl_c == concl_e,
            "the contract completion changes the conclusion",
        )
        kept = {render(h) for h in hyps_c}
        dropped = [h for h in hyps_e if render(h) not in kept]
        chk(
            "completion-keeps-hypotheses",
            not dropped,
            "the contract completion drops hypotheses: "
            + ", ".join(render(h) for h in dropped),
        )
        gob = guard_obligations(e, env)
        chk(
            "completion-hypotheses-equivalent",
            prove_equiv(conj(hyps_c), conj(hyps_e + flatten_conj(gob))),
            "the completion hypotheses are not equivalent to the exported "
            "hypotheses plus the guard obligations",
        )

    hyps_c, _ = split_implication(completed)
    gob_c = guard_obligations(completed, env)
    failed = []
    for ob in flatten_conj(gob_c):
        if not prove_obligation(hyps_c, ob):
            failed.append(ob)
    chk(
        "contract-completed",
        not failed,
        "guard obligations not discharged: " + "; ".join(render(o) for o in failed),
        failed,
    )

    trivial = completed == e
    ok = all(c.ok for c in checks)
    return CompletionVerdict(ok, trivial, e, completed, checks, failed)
