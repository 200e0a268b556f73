"""Linear arithmetic over exact rationals with Farkas certificates.

Terms are normalized to polynomials over "monomials": products of opaque
base terms (variables, quotients with non-constant divisors, anything
non-arithmetic).  Nonlinear monomials are treated as fresh linear unknowns.
Entailment over <, <=, = is decided by Fourier-Motzkin elimination; every
refutation carries provenance so a nonnegative-combination certificate can
be emitted and re-checked exactly.

Three sound extensions cover what the proof corpus needs beyond pure
linearity: perfect-square monomials are known nonnegative, products of two
hypothesis inequalities may be taken, and an equality may be multiplied by
an arbitrary monomial.  Certificate entries name which extension produced
each constraint so the kernel can rebuild it.

In the completed semantics used here every value is coerced to a rational
(non-rationals count as 0), which makes the abstraction uniform and the
certificates sound for arbitrary ground values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .terms import App, Const, Rat, Term, Var, app, render

Poly = Dict[tuple, Fraction]  # monomial (sorted tuple of base keys) -> coeff


def padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        nc = out.get(m, Fraction(0)) + c
        if nc:
            out[m] = nc
        else:
            out.pop(m, None)
    return out


def pscale(a: Poly, k: Fraction) -> Poly:
    if not k:
        return {}
    return {m: c * k for m, c in a.items()}


def psub(a: Poly, b: Poly) -> Poly:
    return padd(a, pscale(b, Fraction(-1)))


def pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = tuple(sorted(m1 + m2))
            nc = out.get(m, Fraction(0)) + c1 * c2
            if nc:
                out[m] = nc
            else:
                out.pop(m, None)
    return out


def pconst(a: Poly) -> Optional[Fraction]:
    if not a:
        return Fraction(0)
    if len(a) == 1 and () in a:
        return a[()]
    return None


def poly_of_term(t: Term, reg: Optional[dict] = None) -> Poly:
    """Normalize t to a polynomial; reg collects base key -> Term."""
    if isinstance(t, Const):
        if isinstance(t.value, Rat):
            return {(): t.value.value} if t.value.value else {}
        return {}  # non-rationals coerce to 0 in arithmetic positions
    if isinstance(t, App):
        if t.fn == "+":
            out: Poly = {}
            for a in t.args:
                out = padd(out, poly_of_term(a, reg))
            return out
        if t.fn == "*":
            out = {(): Fraction(1)}
            for a in t.args:
                out = pmul(out, poly_of_term(a, reg))
            return out
        if t.fn == "-":
            if len(t.args) == 1:
                return pscale(poly_of_term(t.args[0], reg), Fraction(-1))
            out = poly_of_term(t.args[0], reg)
            for a in t.args[1:]:
                out = psub(out, poly_of_term(a, reg))
            return out
        if t.fn == "/" and len(t.args) == 2:
            den = poly_of_term(t.args[1], reg)
            c = pconst(den)
            if c is not None:
                if c == 0:
                    return {}  # division by zero completes to 0
                return pscale(poly_of_term(t.args[0], reg), Fraction(1) / c)
            return _base(t, reg)
    return _base(t, reg)


def _base(t: Term, reg: Optional[dict]) -> Poly:
    key = render(t)
    if reg is not None:
        reg[key] = t
    return {(key,): Fraction(1)}


# ---------------------------------------------------------------------------
# Constraints and certificate entries


@dataclass(frozen=True)
class Entry:
    kind: str  # INEQ | REC | SQ | PROD | EQM | DISEQ
    sign: bool = True
    atom: Optional[Term] = None
    kind2: str = ""
    sign2: bool = True
    atom2: Optional[Term] = None
    mult: Optional[Term] = None
    sq: Optional[Term] = None


@dataclass
class Lin:
    poly: Poly
    kind: str  # gt | ge | eq
    prov: tuple  # ((entry_index, Fraction), ...)


def atom_constraint(atom: Term, sign: bool, reg=None) -> Optional[Tuple[str, Poly]]:
    """Linear reading of a comparison or equality atom with a truth value."""
    if not isinstance(atom, App) or len(atom.args) != 2:
        return None
    a, b = atom.args
    if atom.fn == "<":
        return ("gt", psub(poly_of_term(b, reg), poly_of_term(a, reg))) if sign else (
            "ge",
            psub(poly_of_term(a, reg), poly_of_term(b, reg)),
        )
    if atom.fn == "<=":
        return ("ge", psub(poly_of_term(b, reg), poly_of_term(a, reg))) if sign else (
            "gt",
            psub(poly_of_term(a, reg), poly_of_term(b, reg)),
        )
    if atom.fn == "==":
        if sign:
            return ("eq", psub(poly_of_term(a, reg), poly_of_term(b, reg)))
        return ("diseq", psub(poly_of_term(a, reg), poly_of_term(b, reg)))
    return None


def recognizer_bound(atom: Term, reg=None) -> Optional[Tuple[str, Poly]]:
    if not isinstance(atom, App) or len(atom.args) != 1:
        return None
    p = poly_of_term(atom.args[0], reg)
    if atom.fn == "posp":
        return ("ge", padd(p, {(): Fraction(-1)}))
    if atom.fn == "natp":
        return ("ge", p)
    return None


def _violated_constant(kind: str, c: Fraction) -> bool:
    if kind == "gt":
        return c <= 0
    if kind == "ge":
        return c < 0
    return c != 0  # eq


def _mono_is_square(m: tuple) -> bool:
    if len(m) < 2:
        return False
    counts: Dict[str, int] = {}
    for b in m:
        counts[b] = counts.get(b, 0) + 1
    return all(n % 2 == 0 for n in counts.values())


def _mono_term(m: tuple, reg: dict) -> Term:
    parts = [reg[k] for k in m]
    if len(parts) == 1:
        return parts[0]
    return App("*", tuple(parts))


MAX_CONSTRAINTS = 4000


def refute(model_atoms: List[Tuple[Term, bool]], max_vars: int = 30, use_bounds: bool = True):
    """Search for a contradiction among the asserted atoms.

    Returns (cert, clause) where cert is [(Entry, coeff)] and clause is the
    conflict literals [(atom, assumed_sign)], or None if no refutation was
    found within the caps.  Returns the string "budget" on cap overflow.
    """
    reg: dict = {}
    entries: List[Entry] = []
    cons: List[Lin] = []

    def add(kind: str, poly: Poly, entry: Entry):
        idx = len(entries)
        entries.append(entry)
        c = pconst(poly)
        if c is not None:
            if _violated_constant(kind, c):
                raise _Found(((idx, Fraction(1)),))
            return
        cons.append(Lin(poly, kind, ((idx, Fraction(1)),)))

    class _Found(Exception):
        def __init__(self, prov):
            self.prov = prov

    try:
        for atom, sign in model_atoms:
            ac = atom_constraint(atom, sign, reg)
            if ac is not None:
                kind, poly = ac
                if kind == "diseq":
                    if not poly:
                        cert = [(Entry("DISEQ", sign=False, atom=atom), Fraction(1))]
                        return cert, [(atom, False)]
                    continue  # nontrivial disequalities are not used
                add(kind, poly, Entry("INEQ", sign=sign, atom=atom))
                continue
            if use_bounds and sign:
                rb = recognizer_bound(atom, reg)
                if rb is not None:
                    add(rb[0], rb[1], Entry("REC", sign=True, atom=atom))

        base_ineqs = [c for c in cons if c.kind in ("gt", "ge")]
        eqs = [c for c in cons if c.kind == "eq"]

        # Extension products are only kept when every monomial they mention
        # is already in play (or is the square of a base in play); this keeps
        # the Fourier-Motzkin variable count at corpus scale.
        bases = sorted({b for c in cons for m in c.poly for b in m})
        allowed = {m for c in cons for m in c.poly}
        allowed |= {(b, b) for b in bases}
        allowed.add(())

        def in_play(poly: Poly) -> bool:
            return all(m in allowed for m in poly)

        # equality times a single monomial base
        for e in list(eqs):
            src = entries[e.prov[0][0]]
            for bkey in bases:
                poly = pmul(e.poly, {(bkey,): Fraction(1)})
                if not in_play(poly):
                    continue
                add(
                    "eq",
                    poly,
                    Entry("EQM", sign=True, atom=src.atom, mult=reg[bkey]),
                )

        # pairwise products of inequalities
        if len(base_ineqs) <= 14:
            for i in range(len(base_ineqs)):
                for j in range(i, len(base_ineqs)):
                    a, b = base_ineqs[i], base_ineqs[j]
                    poly = pmul(a.poly, b.poly)
                    if not in_play(poly):
                        continue
                    ea, eb = entries[a.prov[0][0]], entries[b.prov[0][0]]
                    kind = "gt" if (a.kind == "gt" and b.kind == "gt") else "ge"
                    add(
                        kind,
                        poly,
                        Entry(
                            "PROD",
                            sign=ea.sign,
                            atom=ea.atom,
                            sign2=eb.sign,
                            atom2=eb.atom,
                        ),
                    )

        # perfect squares of present monomials
        seen_sq = set()
        for c in list(cons):
            for m in c.poly:
                if m and _mono_is_square(m) and m not in seen_sq:
                    seen_sq.add(m)
                    add("ge", {m: Fraction(1)}, Entry("SQ", sq=_mono_term(m, reg)))

        prov = _eliminate(cons, max_vars)
        if prov == "budget":
            return "budget"
        if prov is None:
            return None
    except _Found as f:
        prov = f.prov

    # assemble the certificate
    merged: Dict[int, Fraction] = {}
    for idx, coeff in prov:
        merged[idx] = merged.get(idx, Fraction(0)) + coeff
    cert = []
    clause: List[Tuple[Term, bool]] = []
    seen_lits = set()

    def lit(atom: Term, sign: bool):
        key = (render(atom), sign)
        if key not in seen_lits:
            seen_lits.add(key)
            clause.append((atom, sign))

    for idx in sorted(merged):
        coeff = merged[idx]
        if not coeff:
            continue
        e = entries[idx]
        if e.kind in ("INEQ", "REC", "SQ", "PROD") and coeff < 0:
            return None  # should not happen; refuse to emit a bad certificate
        cert.append((e, coeff))
        if e.kind == "INEQ":
            lit(e.atom, e.sign)
        elif e.kind == "REC":
            lit(e.atom, True)
        elif e.kind == "PROD":
            lit(e.atom, e.sign)
            lit(e.atom2, e.sign2)
        elif e.kind == "EQM":
            lit(e.atom, True)
    if not cert:
        return None
    return cert, clause


def _eliminate(cons: List[Lin], max_vars: int):
    """Fourier-Motzkin with provenance; returns provenance of a
    contradiction, None, or "budget"."""
    work = [Lin(dict(c.poly), c.kind, c.prov) for c in cons]

    def check(c: Lin):
        k = pconst(c.poly)
        if k is not None and _violated_constant(c.kind, k):
            raise _Hit(c.prov)

    class _Hit(Exception):
        def __init__(self, prov):
            self.prov = prov

    def combine(a: Lin, ca: Fraction, b: Lin, cb: Fraction, kind: str) -> Lin:
        poly = padd(pscale(a.poly, ca), pscale(b.poly, cb))
        prov: Dict[int, Fraction] = {}
        for idx, k in a.prov:
            prov[idx] = prov.get(idx, Fraction(0)) + k * ca
        for idx, k in b.prov:
            prov[idx] = prov.get(idx, Fraction(0)) + k * cb
        return Lin(poly, kind, tuple(sorted(prov.items())))

    try:
        for c in work:
            check(c)
        variables = sorted({m for c in work for m in c.poly if m})
        if len(variables) > max_vars:
            return "budget"

        # use equalities as pivots first
        eqs = [c for c in work if c.kind == "eq"]
        rest = [c for c in work if c.kind != "eq"]
        while eqs:
            e = eqs.pop(0)
            pivot = None
            for m in sorted(e.poly):
                if m:
                    pivot = m
                    break
            if pivot is None:
                check(e)
                continue
            pc = e.poly[pivot]
            new_rest = []
            for c in rest + eqs:
                if pivot in c.poly:
                    lam = -c.poly[pivot] / pc
                    c2 = combine(c, Fraction(1), e, lam, c.kind)
                    check(c2)
                    new_rest.append(c2)
                else:
                    new_rest.append(c)
            eqs = [c for c in new_rest if c.kind == "eq"]
            rest = [c for c in new_rest if c.kind != "eq"]

        work = [c for c in rest if pconst(c.poly) is None]
        variables = sorted({m for c in work for m in c.poly if m})
        while variables:
            # pick the variable minimizing the pos*neg blowup
            best = min(
                variables,
                key=lambda v: (
                    sum(1 for c in work if c.poly.get(v, 0) > 0)
                    * sum(1 for c in work if c.poly.get(v, 0) < 0),
                    v,
                ),
            )
            pos = [c for c in work if c.poly.get(best, 0) > 0]
            negs = [c for c in work if c.poly.get(best, 0) < 0]
            keep = [c for c in work if not c.poly.get(best, 0)]
            out = list(keep)
            seen = set()
            for p in pos:
                for n in negs:
                    a = -n.poly[best]
                    b = p.poly[best]
                    kind = "gt" if (p.kind == "gt" or n.kind == "gt") else "ge"
                    c2 = combine(p, a, n, b, kind)
                    k = pconst(c2.poly)
                    if k is not None:
                        check(c2)
                        continue
                    sig = (tuple(sorted(c2.poly.items())), c2.kind)
                    if sig in seen:
                        continue
                    seen.add(sig)
                    out.append(c2)
            if len(out) > MAX_CONSTRAINTS:
                return "budget"
            work = out
            variables = sorted({m for c in work for m in c.poly if m})
        return None
    except _Hit as h:
        return h.prov


# ---------------------------------------------------------------------------
# Certificate validation (the prover self-checks before emitting; the kernel
# has its own independent copy of this logic)


def factor_constraint(kind: str, sign: bool, atom: Term) -> Optional[Tuple[str, Poly]]:
    if kind == "REC":
        return recognizer_bound(atom)
    return atom_constraint(atom, sign)


def validate_certificate(cert) -> bool:
    """Recompute the nonnegative combination exactly; True iff it yields a
    contradiction of the required form."""
    total: Poly = {}
    strictness = "ge"
    any_ineq = False
    for e, coeff in cert:
        if e.kind == "DISEQ":
            ac = atom_constraint(e.atom, False)
            return ac is not None and ac[0] == "diseq" and not ac[1]
        if e.kind == "INEQ":
            ac = atom_constraint(e.atom, e.sign)
            if ac is None or ac[0] == "diseq":
                return False
            kind, poly = ac
        elif e.kind == "REC":
            rb = recognizer_bound(e.atom)
            if rb is None:
                return False
            kind, poly = rb
        elif e.kind == "SQ":
            poly = poly_of_term(e.sq)
            if len(poly) != 1 or not all(_mono_is_square(m) for m in poly):
                return False
            kind = "ge"
        elif e.kind == "PROD":
            f1 = factor_constraint("REC" if _is_rec(e.atom) else "INEQ", e.sign, e.atom)
            f2 = factor_constraint("REC" if _is_rec(e.atom2) else "INEQ", e.sign2, e.atom2)
            if f1 is None or f2 is None or f1[0] not in ("gt", "ge") or f2[0] not in ("gt", "ge"):
                return False
            kind = "gt" if (f1[0] == "gt" and f2[0] == "gt") else "ge"
            poly = pmul(f1[1], f2[1])
        elif e.kind == "EQM":
            ac = atom_constraint(e.atom, True)
            if ac is None or ac[0] != "eq":
                return False
            kind = "eq"
            poly = pmul(ac[1], poly_of_term(e.mult)) if e.mult is not None else ac[1]
        else:
            return False
        if kind in ("gt", "ge"):
            if coeff <= 0:
                return False
            any_ineq = True
            if kind == "gt":
                strictness = "gt"
        total = padd(total, pscale(poly, coeff))
    c = pconst(total)
    if c is None:
        return False
    if any_ineq:
        return _violated_constant(strictness, c)
    return c != 0


def _is_rec(atom: Term) -> bool:
    return isinstance(atom, App) and atom.fn in ("posp", "natp") and len(atom.args) == 1
