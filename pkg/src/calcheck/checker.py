"""Semantic checking of proof documents.

Items are processed in order under a threaded environment: definitions are
admitted (guard-verified, termination-checked), properties are random-tested
and then assumed, and each proof runs the full battery of checks: exportation
and contract completion, goal/context reconstruction, derived-context items,
chain steps with hint elaboration, the final entailment of the goal, and a
satisfiability probe of the context.  Every sequent proved along the way
contributes a trace; a proof is only marked valid once the whole bundle
replays in the kernel.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from . import kernel, testgen
from .environment import (
    DEF_ALIASES,
    DefinitionError,
    Environment,
    EnvironmentError_,
    FunctionDef,
    GuardError,
    Lemma,
    TerminationError,
    UnknownTheory,
)
from .guards import (
    check_contract_completion,
    export,
    guard_obligations,
    is_type_predicate,
    split_implication,
)
from .induction import MatchError, NotRecursive, NotVariableArgs, generate_scheme, match_cases
from .parser import (
    AbbrevItem,
    AssumeItem,
    Case,
    DefItem,
    Hint,
    InductiveBody,
    PropertyItem,
    ProofDocument,
    ProofItem,
    SimpleBody,
    Span,
)
from .prover import Budget, Disproved, Proved, Prover, Sequent, Unproved, env_hash, sat_check
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
    flatten_conj,
    free_vars,
    implies,
    render,
)


@dataclass
class Check:
    name: str
    status: str  # pass | fail | warn | info | skipped
    message: str = ""
    span: Optional[Span] = None
    counterexamples: list = field(default_factory=list)  # rendered strings


@dataclass
class ItemReport:
    kind: str  # definition | abbreviation | property | assumption | proof
    name: str
    status: str  # valid | assumed | accepted | failed
    checks: List[Check]
    span: Optional[Span] = None
    trace_text: str = ""
    env_text: str = ""
    trace_file: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "failed"


@dataclass
class DocumentReport:
    items: List[ItemReport]

    @property
    def all_valid(self) -> bool:
        return all(not item.failed for item in self.items)


@dataclass
class CheckerConfig:
    seed: int = 0
    max_tests: int = 1000
    budget: Budget = field(default_factory=Budget)
    jobs: int = 1
    replay: bool = True


def _subseed(seed: int, label: str) -> int:
    return (seed * 1000003 + zlib.crc32(label.encode("utf-8"))) & 0x7FFFFFFF


class HintError(Exception):
    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(message)
        self.span = span


@dataclass
class HintEffect:
    hyps: list
    rules: list  # theory names / rule ids
    instances: list  # (lemma name, Subst)


class _ProofChecker:
    """Checks one proof item; accumulates named checks and kernel traces."""

    def __init__(self, env: Environment, cfg: CheckerConfig, proof_name: str):
        self.env = env
        self.cfg = cfg
        self.name = proof_name
        self.checks: List[Check] = []
        self.traces: List[str] = []
        self.min = env.resolve_theory("min")
        self.contract_plus = env.resolve_theory(("union", "contract", "arith", "executable"))
        self.step_base = env.resolve_theory(("union", "min", "contract"))
        self.full = env.resolve_theory("full")

    # -- proving helpers ------------------------------------------------------

    def _prove(self, hyps, concl, ruleset, label, collect=True, try_disprove=False):
        seq = Sequent(tuple(hyps), concl, ruleset, self.cfg.budget)
        prover = Prover(self.env, seed=_subseed(self.cfg.seed, label))
        out = prover.prove(seq, label=f"{self.name}/{label}", try_disprove=try_disprove)
        if isinstance(out, Proved) and collect:
            self.traces.append(out.trace)
        return out

    def prove_equiv_min(self, a: Term, b: Term, label: str, collect=True) -> bool:
        if a == b:
            return True
        out = self._prove([], App("<=>", (a, b)), self.min, label, collect=collect)
        return isinstance(out, Proved)

    def prove_valid_min(self, f: Term, label: str, collect=True) -> bool:
        out = self._prove([], f, self.min, label, collect=collect)
        return isinstance(out, Proved)

    def _counterexamples(self, target: Term, label: str, var_recogs=None) -> list:
        names = free_vars(target)
        recogs = dict(var_recogs or {})
        spec = testgen.TestSpec(
            vars=tuple((n, recogs.get(n, "allp")) for n in names),
            constraints=(),
            trials=self.cfg.max_tests,
            seed=_subseed(self.cfg.seed, label),
        )
        found = testgen.find_counterexamples(target, spec, self.env)
        return [testgen.render_assignment(a) for a in found]

    def check(self, name, ok, message="", span=None, counterexamples=None, warn=False):
        status = "pass" if ok else ("warn" if warn else "fail")
        self.checks.append(Check(name, status, "" if ok else message, span, counterexamples or []))
        return ok

    def info(self, name, message, span=None):
        self.checks.append(Check(name, "info", message, span))

    # -- hints -------------------------------------------------------------------

    def hint_effect(self, hints: List[Hint], ctx_map: dict, derived_map: dict) -> HintEffect:
        hyps: list = []
        rules: list = []
        instances: list = []

        def add_hyp(t):
            if all(render(t) != render(h) for h in hyps):
                hyps.append(t)

        for h in hints:
            if h.kind == "ctx":
                if h.label not in ctx_map:
                    raise HintError(f"unknown context item C{h.label}", h.span)
                add_hyp(ctx_map[h.label])
            elif h.kind == "derived":
                if h.label not in derived_map:
                    raise HintError(f"unknown derived context item D{h.label}", h.span)
                add_hyp(derived_map[h.label])
            elif h.kind == "def":
                fname = DEF_ALIASES.get(h.name, h.name)
                rid = f"{fname}-definition"
                if self.env.rule(rid) is None:
                    raise HintError(f"no definition for {h.name}", h.span)
                rules.append(rid)
            elif h.kind == "axiom":
                rules.append("cons-axioms")
            elif h.kind == "arith":
                rules.append("arith")
            elif h.kind == "eval":
                rules.append("executable")
            elif h.kind == "lemma":
                lemma = self.env.lookup_lemma(h.name)
                if lemma is None:
                    raise HintError(f"unknown lemma {h.name}", h.span)
                sub = h.subst or Subst(())
                lemma_vars = set(free_vars(lemma.statement))
                for vname, image in sub.bindings:
                    if vname not in lemma_vars:
                        raise HintError(
                            f"substitution binds {vname}, which is not a variable "
                            f"of {h.name}",
                            h.span,
                        )
                instances.append((h.name, Subst(tuple((k, self.env.expand(v)) for k, v in sub.bindings))))
            elif h.kind in ("obvious", "pl", "mp"):
                pass
            else:
                raise HintError(f"unhandled hint {h.kind}", h.span)
        return HintEffect(hyps, rules, instances)

    def _ruleset_for(self, rules: list):
        expr: object = ("union", "min", "contract")
        for r in rules:
            expr = ("union", expr, r)
        return self.env.resolve_theory(expr)

    # -- a single step -------------------------------------------------------------

    def check_proof_step(
        self,
        ctx: list,
        hints: List[Hint],
        ctx_map: dict,
        derived_map: dict,
        lhs: Term,
        rhs: Term,
        relation: str,
        label: str,
        span: Optional[Span],
    ) -> Tuple[List[Check], List[str]]:
        """Returns checks and traces rather than mutating, so steps can be
        checked concurrently and merged in source order."""
        saved_checks, saved_traces = self.checks, self.traces
        self.checks, self.traces = [], []
        try:
            self._check_proof_step(ctx, hints, ctx_map, derived_map, lhs, rhs, relation, label, span)
            return self.checks, self.traces
        finally:
            self.checks, self.traces = saved_checks, saved_traces

    def _check_proof_step(self, ctx, hints, ctx_map, derived_map, lhs, rhs, relation, label, span):
        try:
            eff = self.hint_effect(hints, ctx_map, derived_map)
        except HintError as e:
            self.check(label, False, str(e), e.span or span)
            return
        if relation in ("==", "<=>"):
            concl = App("==", (lhs, rhs))
        elif relation == "=>":
            concl = App("=>", (lhs, rhs))
        elif relation == "<=":
            concl = App("=>", (rhs, lhs))
        else:
            self.check(label, False, f"unsupported step relation {relation}", span)
            return
        recogs = [c for c in ctx if is_type_predicate(c, self.env)]
        instance_terms = []
        for lname, sub in eff.instances:
            lemma = self.env.lookup_lemma(lname)
            instance_terms.append(apply_subst(sub, lemma.statement))
        base = eff.hyps + recogs
        step_formula = implies(conj(base), concl) if base else concl
        gob = guard_obligations(step_formula, self.env)
        hyps = ([gob] if gob != T_TRUE else []) + eff.hyps + recogs + instance_terms
        try:
            ruleset = self._ruleset_for(eff.rules)
        except UnknownTheory as e:
            self.check(label, False, str(e), span)
            return
        out = self._prove(hyps, concl, ruleset, label)
        if isinstance(out, Proved):
            self.check(label, True, span=span)
        else:
            target = implies(conj(hyps), concl) if hyps else concl
            recog_map = {}
            for c in ctx:
                if is_type_predicate(c, self.env) and isinstance(c.args[0], Var):
                    recog_map.setdefault(c.args[0].name, c.fn)
            cex = self._counterexamples(target, label, recog_map)
            reason = out.summary if isinstance(out, Unproved) else "falsified by testing"
            msg = f"the step does not follow from the given justification ({reason})"
            if not cex:
                msg += "; no counterexample found within the trial budget"
            self.check(label, False, msg, span, counterexamples=cex)
        if gob != T_TRUE:
            gout = self._prove(list(ctx), gob, self.full, f"{label}-guards")
            if not isinstance(gout, Proved):
                self.check(
                    f"{label}-guards",
                    False,
                    "the guard obligations of the step are not implied by the context: "
                    + render(gob),
                    span,
                )
            else:
                self.check(f"{label}-guards", True, span=span)

    # -- simple proofs -----------------------------------------------------------------

    def check_simple_proof(
        self,
        body: SimpleBody,
        completed: Term,
        label_prefix: str = "",
    ):
        env = self.env
        exp = env.expand
        p = label_prefix

        ctx_map: dict = {}
        ctx_list: list = []
        for item in body.context:
            t = exp(item.term)
            ctx_map[item.label] = t
            ctx_list.append(t)
            if isinstance(t, (App, Const)) and not env.boolean_valued(t):
                self.check(
                    f"{p}context-boolean-C{item.label}",
                    False,
                    f"context item C{item.label} is not a boolean expression",
                    item.span,
                    warn=True,
                )

        hyps_c, concl_c = split_implication(completed)
        goal = exp(body.goal) if body.goal is not None else None
        if goal is not None:
            self.check(
                f"{p}goal-matches-conclusion",
                self.prove_equiv_min(concl_c, goal, f"{p}goal-matches-conclusion"),
                "the goal is not equivalent to the conclusion of the statement",
                body.goal_span,
            )
        target_goal = goal if goal is not None else concl_c
        recon = implies(conj(ctx_list), target_goal) if ctx_list else target_goal
        self.check(
            f"{p}context-reconstruction",
            self.prove_equiv_min(recon, completed, f"{p}context-reconstruction"),
            "the context items and goal do not reconstruct the statement",
            body.span,
        )

        derived_map: dict = {}
        early_exit = False
        for item in body.derived:
            t = exp(item.term)
            label = f"{p}derived-D{item.label}"
            checks, traces = self.check_proof_step(
                ctx_list, item.hints, ctx_map, derived_map, t, T_TRUE, "==", label, item.span
            )
            self.checks.extend(checks)
            self.traces.extend(traces)
            derived_map[item.label] = t
            ctx_list.append(t)
            if t == T_NIL or (goal is not None and t == goal):
                early_exit = True
                self.info(
                    f"{p}early-exit",
                    f"D{item.label} derives "
                    + ("a contradiction" if t == T_NIL else "the goal")
                    + "; remaining obligations are discharged",
                    item.span,
                )
                break

        if not early_exit:
            if goal is None:
                self.check(
                    f"{p}goal-present",
                    False,
                    "a goal is required unless the derived context closes the proof",
                    body.span,
                )
                return
            chain = body.chain
            first = exp(chain.first)
            step_jobs = []
            prev = first
            for i, link in enumerate(chain.links, start=1):
                nxt = exp(link.term)
                step_jobs.append((i, ctx_list[:], link, prev, nxt))
                prev = nxt

            def run(job):
                i, ctx_snapshot, link, lhs, rhs = job
                return self.check_proof_step(
                    ctx_snapshot,
                    link.hints,
                    ctx_map,
                    derived_map,
                    lhs,
                    rhs,
                    link.relation,
                    f"{p}step-{i}",
                    link.hint_span,
                )

            if self.cfg.jobs > 1 and len(step_jobs) > 1:
                with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
                    results = list(pool.map(run, step_jobs))
            else:
                results = [run(j) for j in step_jobs]
            for checks, traces in results:
                self.checks.extend(checks)
                self.traces.extend(traces)

            facts = []
            prev = first
            for link in chain.links:
                nxt = exp(link.term)
                if link.relation in ("==", "<=>"):
                    facts.append(App("==", (prev, nxt)))
                elif link.relation == "=>":
                    facts.append(App("=>", (prev, nxt)))
                else:
                    facts.append(App("=>", (nxt, prev)))
                prev = nxt
            out = self._prove(facts, goal, self.min, f"{p}chain-establishes-goal")
            self.check(
                f"{p}chain-establishes-goal",
                isinstance(out, Proved),
                "the chain steps do not establish the goal",
                chain.first_span,
            )

        if not early_exit and ctx_list:
            status, _ = sat_check(
                ctx_list,
                env,
                self.cfg.budget,
                seed=_subseed(self.cfg.seed, f"{p}context-sat"),
                trials=min(self.cfg.max_tests, 300),
            )
            if status == "UNSAT":
                self.check(
                    f"{p}context-satisfiable",
                    False,
                    "the context is unsatisfiable but the proof does not use the "
                    "contradiction; this likely indicates a mistake",
                    body.span,
                    warn=True,
                )

        used = set()
        for item in body.derived:
            for h in item.hints:
                if h.kind == "ctx":
                    used.add(("C", h.label))
                elif h.kind == "derived":
                    used.add(("D", h.label))
        if body.chain:
            for link in body.chain.links:
                for h in link.hints:
                    if h.kind == "ctx":
                        used.add(("C", h.label))
                    elif h.kind == "derived":
                        used.add(("D", h.label))
        for item in body.context:
            t = ctx_map[item.label]
            if ("C", item.label) not in used and not is_type_predicate(t, self.env):
                self.check(
                    f"{p}unused-context-C{item.label}",
                    False,
                    f"context item C{item.label} is never used",
                    item.span,
                    warn=True,
                )

    # -- inductive proofs ----------------------------------------------------------------

    def check_inductive_proof(self, body: InductiveBody, completed: Term):
        induct = self.env.expand(body.induct_term)
        try:
            obligations = generate_scheme(induct, completed, self.env)
        except (NotRecursive, NotVariableArgs) as e:
            self.check("induction-scheme", False, str(e), body.induct_span)
            return
        self.info(
            "induction-scheme",
            f"{len(obligations)} proof obligations generated from {render(induct)}",
            body.induct_span,
        )

        user_cases = []
        for case in body.cases:
            label = f"{case.kind.lower()}-case-{case.index}"
            ctx_terms = [self.env.expand(c.term) for c in case.body.context]
            if case.body.goal is None:
                self.check(
                    f"{label}/goal-present", False, "induction cases need a goal", case.span
                )
                return
            goal = self.env.expand(case.body.goal)
            formula = implies(conj(ctx_terms), goal) if ctx_terms else goal
            user_cases.append((case.kind, label, formula))

        def equiv(a, b):
            return self.prove_equiv_min(a, b, "case-bijection", collect=False)

        def valid(f):
            return self.prove_valid_min(f, "case-discharge", collect=False)

        try:
            pairing, discharged = match_cases(user_cases, obligations, self.env, equiv, valid)
        except MatchError as e:
            self.check("case-bijection", False, str(e), body.induct_span)
            return
        self.check("case-bijection", True, span=body.induct_span)
        for ob in discharged:
            self.info(
                "case-discharge",
                f"the {ob.kind.lower()} obligation {render(ob.formula)} is provable "
                "outright and was discharged automatically",
                body.induct_span,
            )
        # re-prove the matching equivalences and discharges for the trace bundle
        for u, g in sorted(pairing.items()):
            _, label, formula = user_cases[u]
            self.prove_equiv_min(formula, obligations[g].formula, f"{label}/matches-obligation")
        for ob in discharged:
            self.prove_valid_min(ob.formula, "case-discharge")

        for u, g in sorted(pairing.items()):
            case = body.cases[u]
            label = f"{case.kind.lower()}-case-{case.index}"
            self.check_simple_proof(case.body, obligations[g].formula, label_prefix=label + "/")


def check_document(doc: ProofDocument, env: Environment, cfg: Optional[CheckerConfig] = None):
    """Check every item; returns (DocumentReport, final environment)."""
    cfg = cfg or CheckerConfig()
    reports: List[ItemReport] = []
    names_in_use: set = set()

    def guard_prover(hyps, obligation, env2):
        seq = Sequent(tuple(hyps), obligation, env2.resolve_theory("full"), cfg.budget)
        return isinstance(Prover(env2).prove(seq, label="admission", try_disprove=False), Proved)

    for item in doc.items:
        if isinstance(item, DefItem):
            checks: List[Check] = []
            try:
                fdef = FunctionDef(
                    item.name, item.params, item.ret, item.body,
                    assume_terminating=item.assume_terminating,
                )
                env2, warns = env.define_function(fdef, prover=guard_prover)
                env = env2
                checks.append(Check("admission", "pass", span=item.span))
                for w in warns:
                    checks.append(Check("termination", "warn", w, item.span))
                reports.append(ItemReport("definition", item.name, "accepted", checks, item.span))
            except TerminationError as e:
                checks.append(Check("termination", "fail", str(e), item.span))
                reports.append(ItemReport("definition", item.name, "failed", checks, item.span))
            except GuardError as e:
                checks.append(Check("body-guards", "fail", str(e), item.span))
                reports.append(ItemReport("definition", item.name, "failed", checks, item.span))
            except (DefinitionError, EnvironmentError_) as e:
                checks.append(Check("admission", "fail", str(e), item.span))
                reports.append(ItemReport("definition", item.name, "failed", checks, item.span))
        elif isinstance(item, AbbrevItem):
            try:
                from .environment import Abbrev

                env = env.define_abbrev(Abbrev(item.name, item.params, item.body))
                reports.append(
                    ItemReport("abbreviation", item.name, "accepted",
                               [Check("admission", "pass", span=item.span)], item.span)
                )
            except EnvironmentError_ as e:
                reports.append(
                    ItemReport("abbreviation", item.name, "failed",
                               [Check("admission", "fail", str(e), item.span)], item.span)
                )
        elif isinstance(item, PropertyItem):
            reports.append(_check_property(item, env, cfg))
            if reports[-1].status == "assumed":
                recogs = [app(r, Var(n)) for n, r in item.params if r != "allp"]
                statement = env.expand(
                    implies(conj(recogs), item.body) if recogs else item.body
                )
                env = env.add_lemma(Lemma(item.name, statement, "assumed"))
        elif isinstance(item, AssumeItem):
            try:
                statement = env.expand(item.statement)
                env = env.add_lemma(Lemma(item.name, statement, "assumed"))
                reports.append(
                    ItemReport("assumption", item.name, "assumed",
                               [Check("assumed", "info",
                                      "admitted without proof", item.span)], item.span)
                )
            except EnvironmentError_ as e:
                reports.append(
                    ItemReport("assumption", item.name, "failed",
                               [Check("admission", "fail", str(e), item.span)], item.span)
                )
        elif isinstance(item, ProofItem):
            report, lemma = _check_proof(item, env, cfg, names_in_use)
            reports.append(report)
            names_in_use.add(item.name)
            if lemma is not None:
                try:
                    env = env.add_lemma(lemma)
                except EnvironmentError_:
                    pass
        else:
            raise AssertionError(f"unknown item {item!r}")
    return DocumentReport(reports), env


def _check_property(item: PropertyItem, env: Environment, cfg: CheckerConfig) -> ItemReport:
    checks: List[Check] = []
    try:
        body = env.expand(item.body)
    except EnvironmentError_ as e:
        return ItemReport("property", item.name, "failed",
                          [Check("elaboration", "fail", str(e), item.span)], item.span)
    spec = testgen.TestSpec(
        vars=tuple(item.params),
        constraints=(),
        trials=cfg.max_tests,
        seed=_subseed(cfg.seed, f"property/{item.name}"),
    )
    report = testgen.run_tests(body, spec, env)
    if report.falsified:
        checks.append(
            Check(
                "random-testing",
                "fail",
                f"falsified after {report.trials_run} trials",
                item.span,
                [testgen.render_assignment(a) for a in report.falsified],
            )
        )
        return ItemReport("property", item.name, "failed", checks, item.span)
    checks.append(
        Check(
            "random-testing",
            "pass",
            "",
            item.span,
        )
    )
    checks.append(
        Check(
            "assumed",
            "info",
            f"admitted as an assumed lemma after {report.satisfying_trials} "
            f"passing trials (of {report.trials_run})",
            item.span,
        )
    )
    return ItemReport("property", item.name, "assumed", checks, item.span)


def _check_proof(item: ProofItem, env: Environment, cfg: CheckerConfig, names_in_use: set):
    pc = _ProofChecker(env, cfg, item.name)
    pc.check(
        "fresh-name",
        item.name not in names_in_use and env.lookup_lemma(item.name) is None,
        f"the name {item.name} is already in use",
        item.name_span,
    )
    try:
        statement = env.expand(item.statement)
        exportation = env.expand(item.exportation) if item.exportation is not None else None
        completion = env.expand(item.completion) if item.completion is not None else None
    except EnvironmentError_ as e:
        pc.check("elaboration", False, str(e), item.span)
        return _finish(item, pc, env, cfg, None, False), None

    verdict = check_contract_completion(
        statement,
        exportation,
        completion,
        env,
        lambda a, b: pc.prove_equiv_min(a, b, "contract-completion"),
        lambda hyps, ob: isinstance(
            pc._prove(list(hyps), ob, pc.contract_plus, "contract-completion"), Proved
        ),
    )
    for c in verdict.checks:
        if c.name == "contract-completed" and not c.ok:
            hyps_c, _ = split_implication(verdict.completed)
            recog_map = {}
            for h in hyps_c:
                if is_type_predicate(h, env) and isinstance(h.args[0], Var):
                    recog_map.setdefault(h.args[0].name, h.fn)
            cex: list = []
            for ob in c.obligations[:3]:
                from .terms import disj, neg

                target = disj([neg(conj(hyps_c)), ob]) if hyps_c else ob
                cex.extend(pc._counterexamples(target, f"guard/{render(ob)}", recog_map))
            pc.check(
                "contract-completion",
                False,
                c.message,
                item.completion_span or item.span,
                counterexamples=cex[:3],
            )
        else:
            pc.check(
                "contract-completion" if not c.ok else c.name,
                c.ok,
                c.message,
                item.completion_span or item.exportation_span or item.span,
            )
    nontrivial = not verdict.trivial
    if nontrivial and verdict.ok:
        pc.check(
            "nontrivial-completion",
            False,
            "the contract completion is not syntactically the exported statement; "
            "replace the statement with the completed form",
            item.completion_span or item.span,
            warn=True,
        )

    completed = verdict.completed
    if verdict.ok:
        if isinstance(item.body, InductiveBody):
            pc.check_inductive_proof(item.body, completed)
        else:
            pc.check_simple_proof(item.body, completed)

    lemma = None
    hard_fail = any(c.status == "fail" for c in pc.checks)
    if not hard_fail:
        if nontrivial:
            lemma = Lemma(item.name, completed, "conditionally-proved")
        else:
            lemma = Lemma(item.name, completed, "proved")
    report = _finish(item, pc, env, cfg, completed, nontrivial)
    if report.status == "failed":
        lemma = None
    return report, lemma


def _finish(item: ProofItem, pc: _ProofChecker, env: Environment, cfg: CheckerConfig,
            completed, nontrivial: bool) -> ItemReport:
    env_text = env.snapshot_text()
    trace_text = "".join(pc.traces)
    hard_fail = any(c.status == "fail" for c in pc.checks)
    if not hard_fail and cfg.replay and trace_text:
        results = kernel.replay_all(trace_text, env_text)
        bad = [r for r in results if not r.accepted]
        pc.check(
            "kernel-replay",
            not bad,
            "; ".join(f"{r.label}: {r.reason}" for r in bad[:3]),
        )
        hard_fail = bool(bad)
    if hard_fail:
        status = "failed"
    elif nontrivial:
        status = "assumed"
    else:
        status = "valid"
    return ItemReport("proof", item.name, status, pc.checks, item.span, trace_text, env_text)
