"""Syntax for proof documents.

A document interleaves s-expression declarations (definec, defabbrev,
property, assume) with named proofs written in the calculational format:

    Conjecture name: <statement>
    [Exportation: <term>]
    [Contract Completion: <term>]
    [Context:  C1. <term> ...]
    [Derived Context:  D1. <term> { hints } ...]
    [Goal: <term>]
    Proof:
    <term> == { hints } <term> ...
    QED

or, for inductive proofs, "Proof by: <term>" followed by Contract/Base/
Induction cases whose bodies are simple proofs.  Keywords and hint words are
case-insensitive; identifiers are not.  Comments run from ";" to end of line.

Parsing never raises on user input: it returns either a ProofDocument or a
list of SyntaxDiagnostic, recovering at the next top-level item so several
errors can be reported per run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple, Union

from .terms import (
    App,
    Const,
    NIL,
    Pair,
    Rat,
    Str,
    Subst,
    Sym,
    T_NIL,
    T_TRUE,
    Term,
    Value,
    Var,
    app,
    conj,
    equal,
    neg,
)


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int
    col: int
    byte_start: int = 0
    byte_end: int = 0

    def merge(self, other: "Span") -> "Span":
        lo = self if self.start <= other.start else other
        hi = self if self.end >= other.end else other
        return Span(lo.start, hi.end, lo.line, lo.col, lo.byte_start, hi.byte_end)


DUMMY_SPAN = Span(0, 0, 1, 1)


@dataclass
class SyntaxDiagnostic:
    message: str
    span: Span
    expected: tuple = ()


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: tuple = ()):
        super().__init__(message)
        self.diagnostic = SyntaxDiagnostic(message, span, expected)


# ---------------------------------------------------------------------------
# Document AST


@dataclass
class DefItem:
    name: str
    params: tuple  # ((name, recognizer-name), ...)
    ret: str
    body: Term
    assume_terminating: bool
    span: Span
    name_span: Span


@dataclass
class AbbrevItem:
    name: str
    params: tuple
    body: Term
    span: Span
    name_span: Span


@dataclass
class PropertyItem:
    name: str
    params: tuple  # ((name, recognizer-name), ...)
    body: Term
    span: Span
    name_span: Span


@dataclass
class AssumeItem:
    name: str
    statement: Term
    span: Span
    name_span: Span


@dataclass
class Hint:
    kind: str  # ctx | derived | def | lemma | axiom | arith | eval | obvious | pl | mp
    span: Span
    label: int = 0
    name: str = ""
    lemma_kind: str = ""
    subst: Optional[Subst] = None


@dataclass
class ChainLink:
    relation: str  # == | <=> | => | <=
    hints: list
    hint_span: Span
    term: Term
    term_span: Span


@dataclass
class ProofChain:
    first: Term
    first_span: Span
    links: list


@dataclass
class CtxItem:
    label: int
    term: Term
    span: Span


@dataclass
class DerivedItem:
    label: int
    term: Term
    hints: list
    span: Span


@dataclass
class SimpleBody:
    context: list
    derived: list
    goal: Optional[Term]
    goal_span: Optional[Span]
    chain: Optional[ProofChain]
    span: Span


@dataclass
class Case:
    kind: str  # Contract | Base | Induction
    index: int
    body: SimpleBody
    span: Span


@dataclass
class InductiveBody:
    induct_term: Term
    induct_span: Span
    cases: list
    span: Span


@dataclass
class ProofItem:
    kind: str  # Conjecture | Property | Lemma | Theorem | Problem
    name: str
    statement: Term
    exportation: Optional[Term]
    exportation_span: Optional[Span]
    completion: Optional[Term]
    completion_span: Optional[Span]
    body: Union[SimpleBody, InductiveBody]
    span: Span
    name_span: Span


DocumentItem = Union[DefItem, AbbrevItem, PropertyItem, AssumeItem, ProofItem]


@dataclass
class ProofDocument:
    items: list
    text: str = ""


# ---------------------------------------------------------------------------
# Tokenizer

_NUMBER_RE = re.compile(r"^-?[0-9]+(/[0-9]+)?$")

_DELIMS = set(" \t\r\n(){};'\",")


@dataclass(frozen=True)
class Token:
    kind: str  # LP RP LB RB QUOTE COMMA STR SYM EOF
    text: str
    span: Span


def _tokenize(text: str) -> Tuple[list, Optional[SyntaxDiagnostic]]:
    toks: list = []
    i, n = 0, len(text)
    line, line_start = 1, 0
    byte_of = _byte_offsets(text)

    def mk(kind, s, e):
        return Token(
            kind, text[s:e], Span(s, e, line, s - line_start + 1, byte_of[s], byte_of[e])
        )

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if ch in " \t\r":
            i += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "(":
            toks.append(mk("LP", i, i + 1))
            i += 1
            continue
        if ch == ")":
            toks.append(mk("RP", i, i + 1))
            i += 1
            continue
        if ch == "{":
            toks.append(mk("LB", i, i + 1))
            i += 1
            continue
        if ch == "}":
            toks.append(mk("RB", i, i + 1))
            i += 1
            continue
        if ch == "'":
            toks.append(mk("QUOTE", i, i + 1))
            i += 1
            continue
        if ch == ",":
            toks.append(mk("COMMA", i, i + 1))
            i += 1
            continue
        if ch == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                return toks, SyntaxDiagnostic(
                    "unterminated string literal",
                    Span(i, n, line, i - line_start + 1, byte_of[i], byte_of[n]),
                )
            tok = Token(
                "STR",
                "".join(out),
                Span(i, j + 1, line, i - line_start + 1, byte_of[i], byte_of[j + 1]),
            )
            toks.append(tok)
            i = j + 1
            continue
        j = i
        while j < n and text[j] not in _DELIMS:
            j += 1
        toks.append(mk("SYM", i, j))
        i = j
    toks.append(Token("EOF", "", Span(n, n, line, n - line_start + 1, byte_of[n], byte_of[n])))
    return toks, None


def _byte_offsets(text: str) -> list:
    # byte offset of each character position (UTF-8), plus the end sentinel
    offs = [0] * (len(text) + 1)
    total = 0
    for i, ch in enumerate(text):
        offs[i] = total
        total += len(ch.encode("utf-8"))
    offs[len(text)] = total
    return offs


# ---------------------------------------------------------------------------
# S-expression reader


@dataclass
class SAtom:
    text: str
    span: Span
    kind: str = "sym"  # sym | str


@dataclass
class SList:
    items: list
    tail: Optional[object]
    span: Span


@dataclass
class SQuote:
    inner: object
    span: Span


class _Reader:
    def __init__(self, toks: list, pos: int = 0):
        self.toks = toks
        self.pos = pos

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def read_sexp(self):
        t = self.next()
        if t.kind == "SYM":
            return SAtom(t.text, t.span)
        if t.kind == "STR":
            return SAtom(t.text, t.span, kind="str")
        if t.kind == "QUOTE":
            inner = self.read_sexp()
            return SQuote(inner, t.span.merge(_sexp_span(inner)))
        if t.kind == "LP":
            items: list = []
            tail = None
            while True:
                p = self.peek()
                if p.kind == "RP":
                    close = self.next()
                    return SList(items, tail, t.span.merge(close.span))
                if p.kind == "EOF":
                    raise ParseError("unclosed parenthesis", t.span, expected=(")",))
                if p.kind == "SYM" and p.text == "." and items and tail is None:
                    self.next()
                    tail = self.read_sexp()
                    continue
                if tail is not None:
                    raise ParseError("only one element may follow '.'", p.span)
                items.append(self.read_sexp())
        raise ParseError(f"unexpected token {t.text or t.kind!r}", t.span)


def _sexp_span(s) -> Span:
    return s.span


# ---------------------------------------------------------------------------
# Terms from s-expressions

RESERVED_ATOMS = {"t", "nil"}

_ALIASES = {
    "and": "^",
    "or": "v",
    "not": "!",
    "implies": "=>",
    "iff": "<=>",
    "equal": "==",
    "eq": "==",
}

_BINARY_ONLY = {"==", "=>", "<=>", "<", "<=", "/", "<<", "<<=", "!="}


def sexp_to_value(s) -> Value:
    if isinstance(s, SAtom):
        if s.kind == "str":
            return Str(s.text)
        if _NUMBER_RE.match(s.text):
            return Rat(Fraction(s.text))
        if s.text == "t":
            return T_TRUE.value
        if s.text == "nil":
            return T_NIL.value
        return Sym(s.text)
    if isinstance(s, SQuote):
        raise ParseError("nested quote is not supported", s.span)
    assert isinstance(s, SList)
    tail: Value = NIL if s.tail is None else sexp_to_value(s.tail)
    out = tail
    for item in reversed(s.items):
        out = Pair(sexp_to_value(item), out)
    return out


def sexp_to_term(s) -> Term:
    if isinstance(s, SAtom):
        if s.kind == "str":
            return Const(Str(s.text))
        if _NUMBER_RE.match(s.text):
            return Const(Rat(Fraction(s.text)))
        low = s.text.lower()
        if low == "t":
            return T_TRUE
        if low == "nil":
            return T_NIL
        if not s.text or s.text[0] == ":":
            raise ParseError(f"{s.text!r} cannot appear here", s.span)
        return Var(s.text)
    if isinstance(s, SQuote):
        return Const(sexp_to_value(s.inner))
    assert isinstance(s, SList)
    if s.tail is not None:
        raise ParseError("dotted list is only allowed under quote", s.span)
    if not s.items:
        return T_NIL
    head = s.items[0]
    if not isinstance(head, SAtom) or head.kind == "str":
        raise ParseError("function position must be a name", _sexp_span(head))
    fn = head.text
    fn = _ALIASES.get(fn.lower(), fn)
    if fn.lower() == "match":
        return _lower_match(s)
    args = tuple(sexp_to_term(x) for x in s.items[1:])
    if fn == "!=":
        _need_arity(s, args, 2)
        return neg(equal(args[0], args[1]))
    if fn == ">":
        _need_arity(s, args, 2)
        return App("<", (args[1], args[0]))
    if fn == ">=":
        _need_arity(s, args, 2)
        return App("<=", (args[1], args[0]))
    if fn == "if":
        _need_arity(s, args, 3)
    if fn == "!":
        _need_arity(s, args, 1)
    if fn in _BINARY_ONLY:
        _need_arity(s, args, 2)
    if fn in ("^", "v") and not args:
        raise ParseError(f"{fn} needs at least one argument", s.span)
    return App(fn, args)


def _need_arity(s: SList, args: tuple, n: int):
    if len(args) != n:
        raise ParseError(f"{s.items[0].text} expects {n} arguments, got {len(args)}", s.span)


def _lower_match(s: SList) -> Term:
    if len(s.items) < 2:
        raise ParseError("match needs a subject and at least one arm", s.span)
    subject = sexp_to_term(s.items[1])
    arms = s.items[2:]
    return _compile_arms(subject, arms, s.span)


def _compile_arms(subject: Term, arms: list, span: Span) -> Term:
    if not arms:
        return T_NIL
    arm = arms[0]
    if not isinstance(arm, SList) or len(arm.items) != 2 or arm.tail is not None:
        raise ParseError("a match arm is (pattern body)", _sexp_span(arm))
    pat, body_s = arm.items
    tests, bindings = _compile_pattern(pat, subject)
    names = [n for n, _ in bindings]
    if len(names) != len(set(names)):
        raise ParseError("pattern binds a variable twice", _sexp_span(pat))
    body = sexp_to_term(body_s)
    from .terms import apply_subst

    body = apply_subst(Subst(tuple(bindings)), body)
    rest = _compile_arms(subject, arms[1:], span)
    if not tests:
        return body
    return app("if", conj(tests), body, rest)


def _compile_pattern(pat, subject: Term):
    """Returns (tests, bindings) for matching subject against pat."""
    if isinstance(pat, SQuote):
        return [equal(subject, Const(sexp_to_value(pat.inner)))], []
    if isinstance(pat, SAtom):
        if pat.kind == "str" or _NUMBER_RE.match(pat.text) or pat.text.lower() in RESERVED_ATOMS:
            return [equal(subject, sexp_to_term(pat))], []
        return [], [(pat.text, subject)]
    assert isinstance(pat, SList)
    if not pat.items and pat.tail is None:
        return [equal(subject, T_NIL)], []
    tests = [app("consp", subject)]
    bindings: list = []
    head_tests, head_binds = _compile_pattern(pat.items[0], app("first", subject))
    tests.extend(head_tests)
    bindings.extend(head_binds)
    if len(pat.items) == 1:
        tail_pat = pat.tail if pat.tail is not None else SList([], None, pat.span)
    else:
        tail_pat = SList(pat.items[1:], pat.tail, pat.span)
    tail_tests, tail_binds = _compile_pattern(tail_pat, app("rest", subject))
    tests.extend(tail_tests)
    bindings.extend(tail_binds)
    return tests, bindings


# ---------------------------------------------------------------------------
# Document grammar

PROOF_KINDS = {
    "conjecture": "Conjecture",
    "property": "Property",
    "prop": "Property",
    "lemma": "Lemma",
    "theorem": "Theorem",
    "problem": "Problem",
}

RELATIONS = {"==", "<=>", "=>", "<="}

_CTX_LABEL_RE = re.compile(r"^[Cc]([0-9]+)\.?$")
_DTX_LABEL_RE = re.compile(r"^[Dd]([0-9]+)\.?$")


class _DocParser:
    def __init__(self, toks: list):
        self.r = _Reader(toks)
        self.diagnostics: list = []

    # token helpers ---------------------------------------------------------

    def _peek_word(self) -> str:
        t = self.r.peek()
        return t.text.lower() if t.kind == "SYM" else ""

    def _take_keyword(self, *words: str) -> bool:
        """Consume the given words (the last one must carry the colon)."""
        save = self.r.pos
        for k, w in enumerate(words):
            t = self.r.peek()
            want_colon = k == len(words) - 1
            if t.kind != "SYM":
                self.r.pos = save
                return False
            low = t.text.lower()
            if want_colon:
                if low == w + ":":
                    self.r.next()
                    continue
                if low == w:
                    self.r.next()
                    if self.r.peek().kind == "SYM" and self.r.peek().text == ":":
                        self.r.next()
                        continue
                    self.r.pos = save
                    return False
                self.r.pos = save
                return False
            if low != w:
                self.r.pos = save
                return False
            self.r.next()
        return True

    def _peek_keyword(self, *words: str) -> bool:
        save = self.r.pos
        ok = self._take_keyword(*words)
        self.r.pos = save
        return ok

    def _expect_sym(self, what: str) -> Token:
        t = self.r.next()
        if t.kind != "SYM":
            raise ParseError(f"expected {what}", t.span, expected=(what,))
        return t

    def _term(self) -> Tuple[Term, Span]:
        s = self.r.read_sexp()
        return sexp_to_term(s), _sexp_span(s)

    # items -------------------------------------------------------------------

    def parse_document(self) -> Tuple[list, list]:
        items: list = []
        while True:
            t = self.r.peek()
            if t.kind == "EOF":
                break
            start = self.r.pos
            try:
                if t.kind == "LP":
                    items.append(self._sexp_item())
                elif t.kind == "SYM" and t.text.lower() in PROOF_KINDS:
                    items.append(self._proof_item())
                else:
                    raise ParseError(
                        f"expected a declaration or a proof, found {t.text or t.kind!r}",
                        t.span,
                        expected=("definec", "defabbrev", "property", "assume", "Conjecture"),
                    )
            except ParseError as e:
                self.diagnostics.append(e.diagnostic)
                self.r.pos = max(start, self.r.pos)
                self._recover()
                if len(self.diagnostics) > 50:
                    break
        return items, self.diagnostics

    def _recover(self):
        """Skip to the start of the next plausible top-level item."""
        depth = 0
        if self.r.peek().kind == "LP":
            self.r.next()
            depth = 1
        while True:
            t = self.r.peek()
            if t.kind == "EOF":
                return
            if depth == 0:
                if t.kind == "LP" or (t.kind == "SYM" and t.text.lower() in PROOF_KINDS):
                    return
            if t.kind == "LP":
                depth += 1
            elif t.kind == "RP":
                depth = max(0, depth - 1)
            self.r.next()

    def _sexp_item(self):
        s = self.r.read_sexp()
        assert isinstance(s, SList)
        if not s.items or not isinstance(s.items[0], SAtom):
            raise ParseError("expected a declaration form", s.span)
        head = s.items[0].text.lower()
        if head == "definec":
            return self._definec(s)
        if head == "defabbrev":
            return self._defabbrev(s)
        if head == "property":
            return self._property(s)
        if head == "assume":
            return self._assume(s)
        raise ParseError(
            f"unknown declaration {s.items[0].text!r}",
            s.items[0].span,
            expected=("definec", "defabbrev", "property", "assume"),
        )

    def _name_of(self, s: SList, idx: int, what: str) -> Tuple[str, Span]:
        if len(s.items) <= idx or not isinstance(s.items[idx], SAtom):
            raise ParseError(f"{what} needs a name", s.span)
        return s.items[idx].text, s.items[idx].span

    def _typed_params(self, s, what: str) -> tuple:
        if not isinstance(s, SList) or s.tail is not None:
            raise ParseError(f"{what} needs a parenthesized parameter list", _sexp_span(s))
        out = []
        items = list(s.items)
        if len(items) % 2 != 0:
            raise ParseError("parameters come in name :type pairs", s.span)
        for i in range(0, len(items), 2):
            nm, ty = items[i], items[i + 1]
            if not isinstance(nm, SAtom) or not isinstance(ty, SAtom) or not ty.text.startswith(":"):
                raise ParseError("parameters come in name :type pairs", _sexp_span(nm))
            out.append((nm.text, _recognizer_of_type(ty.text, ty.span)))
        return tuple(out)

    def _definec(self, s: SList) -> DefItem:
        name, name_span = self._name_of(s, 1, "definec")
        if len(s.items) < 5:
            raise ParseError("definec needs (definec name (params) :type body)", s.span)
        params = self._typed_params(s.items[2], "definec")
        ret_atom = s.items[3]
        if not isinstance(ret_atom, SAtom) or not ret_atom.text.startswith(":"):
            raise ParseError("definec needs a return :type", _sexp_span(ret_atom))
        ret = _recognizer_of_type(ret_atom.text, ret_atom.span)
        rest = s.items[4:]
        assume_term = False
        if (
            isinstance(rest[0], SAtom)
            and rest[0].text.lower() == ":assume-terminating"
        ):
            assume_term = True
            rest = rest[1:]
        if len(rest) != 1:
            raise ParseError("definec takes exactly one body", s.span)
        body = sexp_to_term(rest[0])
        return DefItem(name, params, ret, body, assume_term, s.span, name_span)

    def _defabbrev(self, s: SList) -> AbbrevItem:
        name, name_span = self._name_of(s, 1, "defabbrev")
        if len(s.items) != 4:
            raise ParseError("defabbrev needs (defabbrev name (params) body)", s.span)
        pl = s.items[2]
        if not isinstance(pl, SList) or pl.tail is not None or not all(
            isinstance(x, SAtom) for x in pl.items
        ):
            raise ParseError("defabbrev needs a flat parameter list", _sexp_span(pl))
        params = tuple(x.text for x in pl.items)
        body = sexp_to_term(s.items[3])
        return AbbrevItem(name, params, body, s.span, name_span)

    def _property(self, s: SList) -> PropertyItem:
        name, name_span = self._name_of(s, 1, "property")
        if len(s.items) != 4:
            raise ParseError("property needs (property name (typed-params) body)", s.span)
        params = self._typed_params(s.items[2], "property")
        body = sexp_to_term(s.items[3])
        return PropertyItem(name, params, body, s.span, name_span)

    def _assume(self, s: SList) -> AssumeItem:
        name, name_span = self._name_of(s, 1, "assume")
        if len(s.items) != 3:
            raise ParseError("assume needs (assume name statement)", s.span)
        return AssumeItem(name, sexp_to_term(s.items[2]), s.span, name_span)

    # proofs --------------------------------------------------------------------

    def _proof_item(self) -> ProofItem:
        kind_tok = self.r.next()
        kind = PROOF_KINDS[kind_tok.text.lower()]
        name_tok = self._expect_sym("a proof name")
        name = name_tok.text
        if name.endswith(":"):
            name = name[:-1]
        else:
            colon = self.r.peek()
            if colon.kind == "SYM" and colon.text == ":":
                self.r.next()
            else:
                raise ParseError("expected ':' after the proof name", colon.span, expected=(":",))
        if not name:
            raise ParseError("empty proof name", name_tok.span)
        statement, _ = self._term()
        exportation = exportation_span = None
        completion = completion_span = None
        if self._take_keyword("exportation"):
            exportation, exportation_span = self._term()
        if self._take_keyword("contract", "completion"):
            completion, completion_span = self._term()
        if self._peek_keyword("proof", "by"):
            body: Union[SimpleBody, InductiveBody] = self._inductive_body()
        else:
            body = self._simple_body(top_level=True)
        end = self.r.toks[self.r.pos - 1].span if self.r.pos else kind_tok.span
        return ProofItem(
            kind,
            name,
            statement,
            exportation,
            exportation_span,
            completion,
            completion_span,
            body,
            kind_tok.span.merge(end),
            name_tok.span,
        )

    def _expect_qed(self):
        t = self.r.peek()
        if t.kind == "SYM" and t.text.lower() == "qed":
            self.r.next()
            return
        raise ParseError("expected QED", t.span, expected=("QED",))

    def _inductive_body(self) -> InductiveBody:
        start = self.r.peek().span
        assert self._take_keyword("proof", "by")
        induct_term, induct_span = self._term()
        cases: list = []
        while True:
            w = self._peek_word()
            if w in ("contract", "base", "induction"):
                tok = self.r.next()
                kind = {"contract": "Contract", "base": "Base", "induction": "Induction"}[w]
                case_word = self.r.next()
                if case_word.kind != "SYM" or case_word.text.lower() != "case":
                    raise ParseError("expected 'Case'", case_word.span, expected=("Case",))
                idx_tok = self._expect_sym("a case number")
                idx_text = idx_tok.text[:-1] if idx_tok.text.endswith(":") else idx_tok.text
                if not idx_tok.text.endswith(":"):
                    colon = self.r.peek()
                    if colon.kind == "SYM" and colon.text == ":":
                        self.r.next()
                    else:
                        raise ParseError("expected ':' after the case number", colon.span)
                if not idx_text.isdigit():
                    raise ParseError("case index must be a natural number", idx_tok.span)
                body = self._simple_body(top_level=False)
                self._expect_qed()
                end = self.r.toks[self.r.pos - 1].span
                cases.append(Case(kind, int(idx_text), body, tok.span.merge(end)))
                continue
            break
        self._expect_qed()
        if not any(c.kind == "Base" for c in cases):
            raise ParseError("an inductive proof needs at least one Base Case", start)
        end = self.r.toks[self.r.pos - 1].span
        return InductiveBody(induct_term, induct_span, cases, start.merge(end))

    def _simple_body(self, top_level: bool) -> SimpleBody:
        start = self.r.peek().span
        context: list = []
        derived: list = []
        goal = goal_span = None
        if self._take_keyword("context"):
            context = self._labelled_items(_CTX_LABEL_RE, "C", with_hints=False)
        if self._take_keyword("derived", "context"):
            derived = self._labelled_items(_DTX_LABEL_RE, "D", with_hints=True)
        if self._take_keyword("goal"):
            goal, goal_span = self._term()
        if not self._take_keyword("proof"):
            t = self.r.peek()
            raise ParseError("expected 'Proof:'", t.span, expected=("Proof:",))
        chain = self._chain()
        if top_level:
            self._expect_qed()
        end = self.r.toks[self.r.pos - 1].span
        return SimpleBody(context, derived, goal, goal_span, chain, start.merge(end))

    def _labelled_items(self, label_re, letter: str, with_hints: bool) -> list:
        out: list = []
        expected = 1
        while True:
            t = self.r.peek()
            if t.kind != "SYM" or not label_re.match(t.text):
                break
            self.r.next()
            m = label_re.match(t.text)
            label = int(m.group(1))
            if not t.text.endswith("."):
                dot = self.r.peek()
                if dot.kind == "SYM" and dot.text == ".":
                    self.r.next()
                else:
                    raise ParseError(f"expected '.' after {letter}{label}", dot.span)
            if label != expected:
                raise ParseError(
                    f"{letter}{label} out of order, expected {letter}{expected}", t.span
                )
            expected += 1
            term, tspan = self._term()
            if with_hints:
                hints, hspan = self._hint_block()
                out.append(DerivedItem(label, term, hints, t.span.merge(tspan).merge(hspan)))
            else:
                out.append(CtxItem(label, term, t.span.merge(tspan)))
        if not out:
            t = self.r.peek()
            raise ParseError(f"expected at least one {letter} item", t.span)
        return out

    def _chain(self) -> ProofChain:
        first, first_span = self._term()
        links: list = []
        while True:
            t = self.r.peek()
            if t.kind == "SYM" and t.text in RELATIONS:
                self.r.next()
                hints, hspan = self._hint_block()
                term, tspan = self._term()
                links.append(ChainLink(t.text, hints, hspan, term, tspan))
                continue
            break
        return ProofChain(first, first_span, links)

    def _hint_block(self) -> Tuple[list, Span]:
        lb = self.r.next()
        if lb.kind != "LB":
            raise ParseError("expected '{' before the hints", lb.span, expected=("{",))
        hints: list = []
        while True:
            t = self.r.peek()
            if t.kind == "RB":
                close = self.r.next()
                if not hints:
                    raise ParseError(
                        "a hint block needs at least one hint", lb.span.merge(close.span)
                    )
                return hints, lb.span.merge(close.span)
            if t.kind == "EOF":
                raise ParseError("unclosed hint block", lb.span, expected=("}",))
            hints.append(self._hint())
            t = self.r.peek()
            if t.kind == "COMMA":
                self.r.next()
            elif t.kind != "RB":
                raise ParseError("expected ',' or '}' after a hint", t.span, expected=(",", "}"))

    def _hint(self) -> Hint:
        t = self.r.next()
        if t.kind != "SYM":
            raise ParseError("expected a hint", t.span)
        low = t.text.lower()
        m = _CTX_LABEL_RE.match(t.text)
        if m and not t.text.endswith("."):
            return Hint("ctx", t.span, label=int(m.group(1)))
        m = _DTX_LABEL_RE.match(t.text)
        if m and not t.text.endswith("."):
            return Hint("derived", t.span, label=int(m.group(1)))
        if low == "def":
            nm = self._expect_sym("a function name")
            return Hint("def", t.span.merge(nm.span), name=nm.text)
        if low in PROOF_KINDS:
            nm = self._expect_sym("a lemma name")
            subst = None
            span = t.span.merge(nm.span)
            if self.r.peek().kind == "LP":
                s = self.r.read_sexp()
                subst = _parse_subst(s)
                span = span.merge(s.span)
            return Hint("lemma", span, name=nm.text, lemma_kind=PROOF_KINDS[low], subst=subst)
        if low == "cons":
            nxt = self.r.peek()
            if nxt.kind == "SYM" and nxt.text.lower() == "axioms":
                self.r.next()
                return Hint("axiom", t.span.merge(nxt.span), name="cons-axioms")
            raise ParseError("did you mean 'cons axioms'?", t.span)
        if low in ("algebra", "arith", "arithmetic"):
            return Hint("arith", t.span)
        if low in ("evaluation", "eval"):
            return Hint("eval", t.span)
        if low == "obvious":
            return Hint("obvious", t.span)
        if low == "pl":
            return Hint("pl", t.span)
        if low == "mp":
            return Hint("mp", t.span)
        raise ParseError(f"unknown hint {t.text!r}", t.span)


_TYPE_RECOGNIZERS = {
    ":all": "allp",
    ":bool": "boolp",
    ":nat": "natp",
    ":pos": "posp",
    ":int": "intp",
    ":rational": "rationalp",
    ":tl": "tlp",
    ":cons": "consp",
    ":symbol": "symbolp",
}


def _recognizer_of_type(text: str, span: Span) -> str:
    r = _TYPE_RECOGNIZERS.get(text.lower())
    if r is None:
        raise ParseError(f"unknown type {text}", span)
    return r


def _parse_subst(s) -> Subst:
    if not isinstance(s, SList) or s.tail is not None:
        raise ParseError("a substitution is ((var term) ...)", _sexp_span(s))
    pairs = []
    for entry in s.items:
        if (
            not isinstance(entry, SList)
            or entry.tail is not None
            or len(entry.items) != 2
            or not isinstance(entry.items[0], SAtom)
        ):
            raise ParseError("a substitution binding is (var term)", _sexp_span(entry))
        pairs.append((entry.items[0].text, sexp_to_term(entry.items[1])))
    try:
        return Subst(tuple(pairs))
    except ValueError as e:
        raise ParseError(str(e), s.span)


# ---------------------------------------------------------------------------
# Entry points


def parse_document(text: Union[str, bytes]):
    """Parse a whole document.

    Returns (ProofDocument, []) on success or (None, [SyntaxDiagnostic...])
    on failure; never both a document and errors.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            return None, [SyntaxDiagnostic(f"input is not valid UTF-8: {e}", DUMMY_SPAN)]
    text = text.replace("\r\n", "\n")
    toks, tok_diag = _tokenize(text)
    parser = _DocParser(toks)
    items, diags = parser.parse_document()
    if tok_diag is not None:
        diags = diags + [tok_diag]
    if diags:
        return None, diags
    return ProofDocument(items, text), []


def parse_term(text: Union[str, bytes]) -> Term:
    """Parse a single term; raises ParseError on bad input."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    toks, tok_diag = _tokenize(text)
    if tok_diag is not None:
        raise ParseError(tok_diag.message, tok_diag.span)
    r = _Reader(toks)
    s = r.read_sexp()
    t = r.peek()
    if t.kind != "EOF":
        raise ParseError("trailing input after the term", t.span)
    return sexp_to_term(s)
