"""Propositional skeletons and a deterministic Tseitin encoding.

A fact or goal is abstracted to its boolean structure: connectives are
unfolded, everything else becomes an opaque atom keyed by its canonical
rendering.  The encoding below is a fixed specification shared with the
replay kernel, which re-implements it independently; the two must agree
bit-for-bit on variable numbering, so every choice here (atom order, fresh
variable allocation, constant folding) is deliberate:

  * atoms are numbered 1..m in first-occurrence order across the formula
    list (facts first, then the negated target), DFS pre-order within each;
  * each connective node gets a fresh variable allocated in DFS post-order,
    continuing after the atom variables; negation reuses the child variable
    with flipped sign;
  * constants are folded away before any variable is allocated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .terms import App, Const, Term, Var, render, truthy


@dataclass
class Sk:
    kind: str  # atom | const | not | and | or | implies | iff | ite
    term: Optional[Term] = None
    value: bool = False
    kids: tuple = ()


def _atom(t: Term) -> Sk:
    return Sk("atom", term=t)


def _const(b: bool) -> Sk:
    return Sk("const", value=b)


def skeletonize(t: Term, env) -> Sk:
    if isinstance(t, Const):
        return _const(truthy(t.value))
    if isinstance(t, Var):
        return _atom(t)
    assert isinstance(t, App)
    fn = t.fn
    if fn == "!" and len(t.args) == 1:
        return Sk("not", kids=(skeletonize(t.args[0], env),))
    if fn == "^":
        return Sk("and", kids=tuple(skeletonize(a, env) for a in t.args))
    if fn == "v":
        return Sk("or", kids=tuple(skeletonize(a, env) for a in t.args))
    if fn == "=>" and len(t.args) == 2:
        return Sk("implies", kids=tuple(skeletonize(a, env) for a in t.args))
    if fn == "<=>" and len(t.args) == 2:
        return Sk("iff", kids=tuple(skeletonize(a, env) for a in t.args))
    if fn == "==" and len(t.args) == 2 and env.boolean_valued(t.args[0]) and env.boolean_valued(t.args[1]):
        return Sk("iff", kids=tuple(skeletonize(a, env) for a in t.args))
    if (
        fn == "if"
        and len(t.args) == 3
        and env.boolean_valued(t.args[0])
        and env.boolean_valued(t.args[1])
        and env.boolean_valued(t.args[2])
    ):
        return Sk("ite", kids=tuple(skeletonize(a, env) for a in t.args))
    return _atom(t)


def fold(n: Sk) -> Sk:
    if n.kind in ("atom", "const"):
        return n
    kids = tuple(fold(k) for k in n.kids)
    if n.kind == "not":
        (a,) = kids
        if a.kind == "const":
            return _const(not a.value)
        return Sk("not", kids=(a,))
    if n.kind == "and":
        out = []
        for k in kids:
            if k.kind == "const":
                if not k.value:
                    return _const(False)
            else:
                out.append(k)
        if not out:
            return _const(True)
        if len(out) == 1:
            return out[0]
        return Sk("and", kids=tuple(out))
    if n.kind == "or":
        out = []
        for k in kids:
            if k.kind == "const":
                if k.value:
                    return _const(True)
            else:
                out.append(k)
        if not out:
            return _const(False)
        if len(out) == 1:
            return out[0]
        return Sk("or", kids=tuple(out))
    if n.kind == "implies":
        a, b = kids
        if a.kind == "const":
            return b if a.value else _const(True)
        if b.kind == "const":
            return _const(True) if b.value else fold(Sk("not", kids=(a,)))
        return Sk("implies", kids=(a, b))
    if n.kind == "iff":
        a, b = kids
        if a.kind == "const":
            return b if a.value else fold(Sk("not", kids=(b,)))
        if b.kind == "const":
            return a if b.value else fold(Sk("not", kids=(a,)))
        return Sk("iff", kids=(a, b))
    if n.kind == "ite":
        c, a, b = kids
        if c.kind == "const":
            return a if c.value else b
        if a.kind == "const" and b.kind == "const":
            if a.value and b.value:
                return _const(True)
            if not a.value and not b.value:
                return _const(False)
            if a.value:
                return c
            return fold(Sk("not", kids=(c,)))
        if a.kind == "const":
            if a.value:
                return fold(Sk("or", kids=(c, b)))
            return fold(Sk("and", kids=(Sk("not", kids=(c,)), b)))
        if b.kind == "const":
            if b.value:
                return fold(Sk("implies", kids=(c, a)))
            return fold(Sk("and", kids=(c, a)))
        return Sk("ite", kids=(c, a, b))
    raise AssertionError(n.kind)


class Encoder:
    """Tseitin encoding of a list of asserted formulas plus a negated target."""

    def __init__(self, env):
        self.env = env
        self.atom_var: dict = {}
        self.atom_terms: list = []
        self.clauses: list = []
        self.next_var = 1

    def _collect_atoms(self, n: Sk):
        if n.kind == "atom":
            key = render(n.term)
            if key not in self.atom_var:
                self.atom_var[key] = self.next_var
                self.atom_terms.append(n.term)
                self.next_var += 1
            return
        for k in n.kids:
            self._collect_atoms(k)

    def _fresh(self) -> int:
        v = self.next_var
        self.next_var += 1
        return v

    def _encode(self, n: Sk) -> int:
        if n.kind == "atom":
            return self.atom_var[render(n.term)]
        if n.kind == "not":
            return -self._encode(n.kids[0])
        lits = [self._encode(k) for k in n.kids]
        v = self._fresh()
        add = self.clauses.append
        if n.kind == "and":
            for l in lits:
                add([-v, l])
            add([v] + [-l for l in lits])
        elif n.kind == "or":
            for l in lits:
                add([v, -l])
            add([-v] + lits)
        elif n.kind == "implies":
            a, b = lits
            add([-v, -a, b])
            add([v, a])
            add([v, -b])
        elif n.kind == "iff":
            a, b = lits
            add([-v, -a, b])
            add([-v, a, -b])
            add([v, a, b])
            add([v, -a, -b])
        elif n.kind == "ite":
            c, a, b = lits
            add([-v, -c, a])
            add([-v, c, b])
            add([v, -c, -a])
            add([v, c, -b])
        else:
            raise AssertionError(n.kind)
        return v

    def encode_query(self, facts: List[Term], target: Optional[Term]):
        """Assert the facts and the negation of the target.

        Returns (clauses, atom_terms, nvars).  UNSAT of the clause set means
        the facts propositionally entail the target.
        """
        nodes = [fold(skeletonize(f, self.env)) for f in facts]
        if target is not None:
            nodes.append(fold(Sk("not", kids=(skeletonize(target, self.env),))))
        for n in nodes:
            self._collect_atoms(n)
        for n in nodes:
            if n.kind == "const":
                if not n.value:
                    self.clauses.append([])
                continue
            root = self._encode(n)
            self.clauses.append([root])
        return self.clauses, self.atom_terms, self.next_var - 1
