"""The proving backend: decides sequents and emits kernel traces.

A sequent asks whether the hypotheses entail a conclusion under a rule set.
The pipeline: hypotheses become facts; facts and goal are normalized by
conditional rewriting (with contextual governors and recursive condition
discharge); the residue goes to a propositional core (Tseitin + CDCL with
RUP certificates) refined by theory facts from congruence closure, ground
evaluation and linear arithmetic (Farkas certificates).  Every inference is
recorded as a trace step the replay kernel checks independently; Proved is
returned only once the full trace has been assembled.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple, Union

from . import evaluator, linarith, sat
from .environment import Environment, P_ARITH, P_BOUNDS, P_EXEC, P_GROUND, Rule, RuleSet
from .evaluator import BudgetExceeded, EvalError, GuardViolation
from .skeleton import Encoder
from .terms import (
    App,
    Const,
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
    flatten_conj,
    implies,
    match,
    neg,
    render,
    render_subst,
    replace_at,
    subterm_at,
    truthy,
)

# Tests may install a callable here to observe applied rewrites:
# observer(rule_id, subst, term_before, term_after)
REWRITE_OBSERVER = None


@dataclass
class Budget:
    rewrite_steps: int = 10_000
    sat_conflicts: int = 100_000
    arith_vars: int = 30
    wall_ms: int = 5_000


@dataclass(frozen=True)
class Sequent:
    hyps: tuple
    concl: Term
    ruleset: RuleSet
    budget: Budget = field(default_factory=Budget)

    def formula(self) -> Term:
        if self.hyps:
            return implies(conj(list(self.hyps)), self.concl)
        return self.concl


@dataclass
class Proved:
    trace: str


@dataclass
class Disproved:
    witness: list  # [(var, Value), ...]


@dataclass
class Unproved:
    reason: str  # budget | incomplete
    summary: str = ""


class _Stop(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def env_hash(env: Environment) -> str:
    return hashlib.sha256(env.snapshot_text().encode("utf-8")).hexdigest()


def _path_str(path) -> str:
    return ".".join(str(i) for i in path) if path else "-"


class TraceBuilder:
    """Builds the line-oriented trace while mirroring the kernel's state
    machine, so every emitted step is locally valid by construction."""

    def __init__(self, label: str, statement: Term, envhash: str):
        self.label = label
        self.statement = statement
        self.goal = statement
        self.facts: List[Term] = []
        self._ids: dict = {}
        self.lines: List[str] = []
        self.generation = 0

    def fact_id(self, t: Term) -> Optional[int]:
        return self._ids.get(render(t))

    def _add(self, t: Term) -> int:
        fid = len(self.facts)
        self.facts.append(t)
        self._ids.setdefault(render(t), fid)
        self.generation += 1
        return fid

    def checkpoint(self):
        return (len(self.lines), len(self.facts), self.goal, self.generation)

    def rollback(self, cp):
        nlines, nfacts, goal, gen = cp
        del self.lines[nlines:]
        for t in self.facts[nfacts:]:
            key = render(t)
            if key in self._ids and self._ids[key] >= nfacts:
                del self._ids[key]
        del self.facts[nfacts:]
        self.goal = goal
        self.generation = gen

    def current(self, target) -> Term:
        return self.goal if target == "G" else self.facts[target]

    def intro(self):
        assert isinstance(self.goal, App) and self.goal.fn == "=>"
        hyp, concl = self.goal.args
        self.lines.append("INTRO")
        for h in flatten_conj(hyp):
            self._add(h)
        self.goal = concl

    def rewrite(self, target, path, rule: Rule, sub: Subst, cond_refs):
        term = self.current(target)
        lhs = apply_subst(sub, rule.lhs)
        assert subterm_at(term, path) == lhs, f"rewrite mismatch for {rule.rule_id}"
        new = replace_at(term, path, apply_subst(sub, rule.rhs))
        refs = " ".join(cond_refs)
        self.lines.append(
            f"REWRITE {target} {_path_str(path)} {rule.rule_id} SUBST {render_subst(sub)}"
            + (f" CONDS {refs}" if cond_refs else "")
        )
        if REWRITE_OBSERVER is not None:
            REWRITE_OBSERVER(rule, sub, term, new)
        if target == "G":
            self.goal = new
            return "G"
        return self._add(new)

    def eval_at(self, target, path, value_term: Const):
        term = self.current(target)
        new = replace_at(term, path, value_term)
        self.lines.append(f"EVAL {target} {_path_str(path)}")
        if target == "G":
            self.goal = new
            return "G"
        return self._add(new)

    def eval_new(self, t: Term) -> int:
        self.lines.append(f"EVALNEW {render(t)}")
        return self._add(t)

    def cc(self, premises: List[Term], concl: Term) -> int:
        fact = concl if not premises else implies(conj(premises), concl)
        terms = " ".join(render(p) for p in premises)
        self.lines.append(
            f"CC {len(premises)}" + (f" {terms}" if premises else "") + f" CONCL {render(concl)}"
        )
        return self._add(fact)

    def farkas(self, cert, clause) -> int:
        parts = [f"FARKAS {len(cert)}"]
        for e, coeff in cert:
            if e.kind == "INEQ":
                parts.append(f"INEQ {'T' if e.sign else 'F'} {coeff} {render(e.atom)}")
            elif e.kind == "REC":
                parts.append(f"REC {coeff} {render(e.atom)}")
            elif e.kind == "SQ":
                parts.append(f"SQ {coeff} {render(e.sq)}")
            elif e.kind == "PROD":
                parts.append(
                    f"PROD {coeff} {'T' if e.sign else 'F'} {render(e.atom)} "
                    f"{'T' if e.sign2 else 'F'} {render(e.atom2)}"
                )
            elif e.kind == "EQM":
                # the coefficient is folded into the multiplier polynomial
                if e.mult is None:
                    mult: Term = Const(_frac_value(coeff))
                elif coeff == 1:
                    mult = e.mult
                else:
                    mult = App("*", (Const(_frac_value(coeff)), e.mult))
                parts.append(f"EQM {render(mult)} {render(e.atom)}")
            elif e.kind == "DISEQ":
                parts.append(f"DISEQ {render(e.atom)}")
        fact = disj([neg(a) if sign else a for a, sign in clause])
        self.lines.append(" ".join(parts))
        return self._add(fact)

    def prop(self, premise_ids: List[int], target: Term, derivation) -> int:
        ints = []
        for cl in derivation:
            ints.extend(str(x) for x in cl)
            ints.append("0")
        ids = " ".join(str(i) for i in premise_ids)
        self.lines.append(
            f"PROP {len(premise_ids)}" + (f" {ids}" if premise_ids else "")
            + f" TARGET {render(target)} CLAUSES {len(derivation)} " + " ".join(ints)
        )
        return self._add(target)

    def qed(self):
        ok = (
            (isinstance(self.goal, Const) and truthy(self.goal.value))
            or self.fact_id(self.goal) is not None
            or self.fact_id(T_NIL) is not None
        )
        assert ok, "QED emitted with an unestablished goal"
        self.lines.append("QED")

    def serialize(self, envhash: str) -> str:
        out = [f"TRACE {self.label}", f"ENVHASH {envhash}", f"STMT {render(self.statement)}"]
        out.extend(self.lines)
        out.append("END")
        return "\n".join(out) + "\n"


def _frac_value(f: Fraction):
    from .terms import Rat

    return Rat(f)


# ---------------------------------------------------------------------------
# Congruence closure


class CongruenceClosure:
    def __init__(self):
        self.terms: List[Term] = []
        self.index: dict = {}
        self.parent: List[int] = []

    def add(self, t: Term) -> int:
        key = render(t)
        i = self.index.get(key)
        if i is not None:
            return i
        if isinstance(t, App):
            for a in t.args:
                self.add(a)
        i = len(self.terms)
        self.index[key] = i
        self.terms.append(t)
        self.parent.append(i)
        return i

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb

    def merge_terms(self, a: Term, b: Term):
        self.union(self.add(a), self.add(b))

    def close(self):
        changed = True
        while changed:
            changed = False
            sig: dict = {}
            for i, t in enumerate(self.terms):
                if isinstance(t, App):
                    key = (t.fn, tuple(self.find(self.index[render(a)]) for a in t.args))
                    j = sig.get(key)
                    if j is None:
                        sig[key] = i
                    elif self.find(i) != self.find(j):
                        self.union(i, j)
                        changed = True

    def same(self, a: Term, b: Term) -> bool:
        ia, ib = self.add(a), self.add(b)
        self.close()
        return self.find(ia) == self.find(ib)


# ---------------------------------------------------------------------------
# The prover


_CHILD_GOV = {
    "^": lambda t, i: [a for j, a in enumerate(t.args) if j != i],
    "v": lambda t, i: [neg(a) for j, a in enumerate(t.args) if j != i],
    "=>": lambda t, i: [t.args[0]] if i == 1 else [],
    "if": lambda t, i: [t.args[0]] if i == 1 else ([neg(t.args[0])] if i == 2 else []),
}


def child_governors(t: App, i: int) -> list:
    mk = _CHILD_GOV.get(t.fn)
    return mk(t, i) if mk else []


def _is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, App):
        return all(_is_ground(a) for a in t.args)
    return True


def _heads_builtin(t: Term) -> bool:
    if isinstance(t, App):
        if t.fn not in evaluator.BUILTIN_NAMES:
            return False
        return all(_heads_builtin(a) for a in t.args)
    return True


@dataclass
class _Rewrite:
    path: tuple
    rule: Rule
    sub: Subst
    refs: tuple


@dataclass
class _Eval:
    path: tuple
    value: Const


class Prover:
    """Single-use prover for one sequent; holds no shared mutable state."""

    def __init__(self, env: Environment, seed: int = 0, disprove_trials: int = 200):
        self.env = env
        self.seed = seed
        self.disprove_trials = disprove_trials

    def prove(self, sequent: Sequent, label: str = "sequent", try_disprove: bool = True):
        session = _Session(self.env, sequent, label, self.seed, self.disprove_trials)
        return session.run(try_disprove)


class _Session:
    def __init__(self, env, sequent: Sequent, label: str, seed: int, disprove_trials: int):
        self.env = env
        self.seq = sequent
        self.rs = sequent.ruleset
        self.tb = TraceBuilder(label, sequent.formula(), "")
        self.rewrites_left = sequent.budget.rewrite_steps
        self.deadline = time.monotonic() + sequent.budget.wall_ms / 1000.0
        self.depth = 0
        self.estab_fail: dict = {}
        self.eval_memo: dict = {}
        self.budget_hit = False
        self.seed = seed
        self.disprove_trials = disprove_trials

    # -- plumbing ----------------------------------------------------------

    def _tick(self, n: int = 1):
        self.rewrites_left -= n
        if self.rewrites_left < 0 or time.monotonic() > self.deadline:
            raise _Stop("budget")

    def _enabled(self, rid: str) -> bool:
        return rid in self.rs.rule_ids

    def _try_eval(self, t: Term):
        """Evaluate a ground term if the rule set permits; None on failure."""
        key = render(t)
        if key in self.eval_memo:
            return self.eval_memo[key]
        out = None
        if _is_ground(t) and self._enabled(P_GROUND):
            if self._enabled(P_EXEC) or _heads_builtin(t):
                try:
                    out = evaluator.eval_ground(t, self.env, budget=20_000)
                except EvalError:
                    out = None
        self.eval_memo[key] = out
        return out

    # -- rewriting ------------------------------------------------------------

    def normalize(self, target, prefix=()):
        while True:
            term = self.tb.current(target)
            act = self._search(subterm_at(term, prefix), list(prefix), [], target)
            if act is None:
                return target
            self._tick()
            if isinstance(act, _Eval):
                target = self.tb.eval_at(target, act.path, act.value)
            else:
                target = self.tb.rewrite(target, act.path, act.rule, act.sub, list(act.refs))

    def _search(self, t: Term, path: list, governors: list, target):
        if not isinstance(t, App):
            return None
        for i, a in enumerate(t.args):
            act = self._search(a, path + [i], governors + child_governors(t, i), target)
            if act is not None:
                return act
        return self._try_node(t, path, governors)

    def _try_node(self, t: App, path: list, governors: list):
        v = self._try_eval(t)
        if v is not None and Const(v) != t:
            return _Eval(tuple(path), Const(v))
        gov_keys = {render(g) for g in governors}
        for rule in self.env.rules_for_head(t.fn):
            if not self._enabled(rule.rule_id):
                continue
            sub = match(rule.lhs, t)
            if sub is None:
                continue
            cp = self.tb.checkpoint()
            if rule.kind == "definition" and rule.recursive:
                if not self._unfold_progress(apply_subst(sub, rule.rhs), gov_keys):
                    self.tb.rollback(cp)
                    continue
            refs = []
            ok = True
            for cond in rule.conds:
                ref = self._discharge(apply_subst(sub, cond), gov_keys)
                if ref is None:
                    ok = False
                    break
                refs.append(ref)
            if ok:
                return _Rewrite(tuple(path), rule, sub, tuple(refs))
            self.tb.rollback(cp)
        return None

    def _discharge(self, cond: Term, gov_keys: set) -> Optional[str]:
        fid = self.tb.fact_id(cond)
        if fid is not None:
            return f"F{fid}"
        if render(cond) in gov_keys:
            return "GOV"
        v = self._try_eval(cond)
        if v is not None:
            return "EV" if truthy(v) else None
        fid = self.establish(cond)
        if fid is not None:
            return f"F{fid}"
        return None

    def _unfold_progress(self, body: Term, gov_keys: set) -> bool:
        """A recursive definition unfolds only when the top-level tests of
        its body can be resolved; otherwise the unfolding is withheld."""
        seen = 0
        while isinstance(body, App) and body.fn == "if" and len(body.args) == 3:
            c, a, b = body.args
            if self._discharge(c, gov_keys) is not None:
                body = a
            elif self._discharge(neg(c), gov_keys) is not None:
                body = b
            else:
                return False
            seen += 1
            if seen > 50:
                return False
        return True

    # -- establishing facts -----------------------------------------------------

    def establish(self, term: Term, allow_smt: bool = True) -> Optional[int]:
        fid = self.tb.fact_id(term)
        if fid is not None:
            return fid
        if self.depth >= 3:
            return None
        key = render(term)
        if self.estab_fail.get(key) == self.tb.generation:
            return None
        self.depth += 1
        cp = self.tb.checkpoint()
        try:
            v = self._try_eval(term)
            if v is not None:
                if truthy(v):
                    return self.tb.eval_new(term)
                self.estab_fail[key] = self.tb.generation
                return None
            refl = self.tb.cc([], equal(term, term))
            nid = self.normalize(refl, prefix=(0,))
            changed = self.tb.facts[nid].args[0] != term
            if not changed and isinstance(term, App) and self.env.is_recognizer_name(term.fn):
                # an untouched recognizer application will not become
                # propositionally entailed; fail fast
                self.tb.rollback(cp)
                self.estab_fail[key] = self.tb.generation
                return None
            if allow_smt and self._smt_entail(list(range(len(self.tb.facts))), term):
                return self.tb.fact_id(term)
            self.tb.rollback(cp)
            self.estab_fail[key] = self.tb.generation
            return None
        finally:
            self.depth -= 1

    # -- the SMT loop --------------------------------------------------------------

    def _smt_entail(self, premise_ids: List[int], target: Term) -> bool:
        premise_ids = list(premise_ids)
        for _round in range(40):
            self._tick(0)
            enc = Encoder(self.env)
            clauses, atom_terms, nvars = enc.encode_query(
                [self.tb.facts[i] for i in premise_ids], target
            )
            res = sat.solve(clauses, nvars, self.seq.budget.sat_conflicts)
            if res.status == "UNSAT":
                self.tb.prop(premise_ids, target, res.derivation)
                return True
            if res.status == "UNKNOWN":
                self.budget_hit = True
                return False
            atoms = [
                (t, bool(res.model.get(i + 1, False))) for i, t in enumerate(atom_terms)
            ]
            new_ids = self._theory_round(atoms)
            if not new_ids:
                return False
            premise_ids.extend(new_ids)
        self.budget_hit = True
        return False

    def _theory_round(self, atoms) -> List[int]:
        new_ids: List[int] = []

        def add_fact(emit):
            fid = emit()
            if fid is not None:
                new_ids.append(fid)

        # ground atoms whose evaluation disagrees with the model
        for t, val in atoms:
            v = self._try_eval(t)
            if v is not None and truthy(v) != val:
                fact = t if truthy(v) else neg(t)
                if self.tb.fact_id(fact) is None:
                    self._tick()
                    add_fact(lambda f=fact: self.tb.eval_new(f))

        # congruence closure over the asserted equalities
        cc = CongruenceClosure()
        eqs = [t for t, val in atoms if val and isinstance(t, App) and t.fn == "=="]
        for e in eqs:
            cc.merge_terms(e.args[0], e.args[1])
        for t, _ in atoms:
            cc.add(t)
        cc.close()
        for t, val in atoms:
            if not val and isinstance(t, App) and t.fn == "==" and cc.same(t.args[0], t.args[1]):
                fact = t if not eqs else implies(conj(eqs), t)
                if self.tb.fact_id(fact) is None:
                    self._tick()
                    add_fact(lambda c=t: self.tb.cc(list(eqs), c))
        by_val = {True: [], False: []}
        for t, val in atoms:
            by_val[val].append(t)
        for a in by_val[True]:
            for b in by_val[False]:
                if cc.same(a, b):
                    concl = App("<=>", (a, b))
                    fact = concl if not eqs else implies(conj(eqs), concl)
                    if self.tb.fact_id(fact) is None:
                        self._tick()
                        add_fact(lambda c=concl: self.tb.cc(list(eqs), c))

        # linear arithmetic
        if self._enabled(P_ARITH):
            out = linarith.refute(
                atoms, max_vars=self.seq.budget.arith_vars, use_bounds=self._enabled(P_BOUNDS)
            )
            if out == "budget":
                self.budget_hit = True
            elif out is not None:
                cert, clause = out
                if linarith.validate_certificate(cert):
                    fact = disj([neg(a) if sign else a for a, sign in clause])
                    if self.tb.fact_id(fact) is None:
                        self._tick()
                        add_fact(lambda: self.tb.farkas(cert, clause))
        return new_ids

    # -- entry point ------------------------------------------------------------------

    def run(self, try_disprove: bool):
        try:
            if self.seq.hyps:
                self.tb.intro()
            for fid in range(len(self.tb.facts)):
                self.normalize(fid)
            self.normalize("G")
            goal = self.tb.goal
            if (
                (isinstance(goal, Const) and truthy(goal.value))
                or self.tb.fact_id(goal) is not None
            ):
                self.tb.qed()
                return Proved(self.tb.serialize(env_hash(self.env)))
            if self._smt_entail(list(range(len(self.tb.facts))), goal):
                self.tb.qed()
                return Proved(self.tb.serialize(env_hash(self.env)))
        except _Stop:
            return Unproved("budget", "proof search budget exhausted")
        if try_disprove:
            witness = self._search_witness()
            if witness is not None:
                return Disproved(witness)
        if self.budget_hit:
            return Unproved("budget", "proof search budget exhausted")
        return Unproved(
            "incomplete",
            f"no proof found; residual goal {render(self.tb.goal)}",
        )

    def _search_witness(self):
        from . import testgen
        from .guards import is_type_predicate

        formula = self.seq.formula()
        from .terms import free_vars

        names = free_vars(formula)
        if not names:
            return None
        recogs = {}
        for h in self.seq.hyps:
            if is_type_predicate(h, self.env) and isinstance(h.args[0], Var):
                recogs.setdefault(h.args[0].name, h.fn)
        spec = testgen.TestSpec(
            vars=tuple((n, recogs.get(n, "allp")) for n in names),
            constraints=(),
            trials=self.disprove_trials,
            seed=self.seed,
        )
        found = testgen.find_counterexamples(formula, spec, self.env)
        if found:
            return found[0]
        return None


# ---------------------------------------------------------------------------
# Satisfiability of a hypothesis set


def sat_check(hyps: List[Term], env: Environment, budget: Budget = None, seed: int = 0, trials: int = 300):
    """Returns ("SAT", witness) / ("UNSAT", None) / ("UNKNOWN", None)."""
    from . import testgen

    budget = budget or Budget()
    if not hyps:
        return ("SAT", [])
    target = conj(list(hyps))
    witness = testgen.find_satisfying(target, env, seed=seed, trials=trials)
    if witness is not None:
        return ("SAT", witness)
    seq = Sequent(tuple(hyps), T_NIL, env.resolve_theory("full"), budget)
    out = Prover(env, seed=seed).prove(seq, label="sat-check", try_disprove=False)
    if isinstance(out, Proved):
        return ("UNSAT", None)
    return ("UNKNOWN", None)
