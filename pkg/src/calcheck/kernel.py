"""The trusted replay kernel.

Accepting a proof means: every inference the backend recorded replays here.
This module is deliberately self-contained: it parses trace files and the
environment snapshot with its own reader, keeps its own term representation,
and re-implements substitution, evaluation, congruence closure, unit
propagation and exact rational recombination from scratch.  It imports
nothing from the rest of the package, so a bug in the main engine cannot
validate itself.

A trace is line-oriented, one inference per line:

    TRACE <label>
    ENVHASH <sha256 of the environment snapshot>
    STMT <term>
    INTRO                          peel hypotheses of an implication goal
    REWRITE <tgt> <path> <rule> SUBST <alist> [CONDS <F<i>|GOV|EV ...>]
    EVAL <tgt> <path>              evaluate a ground subterm
    EVALNEW <term>                 a ground term that evaluates true
    CC <n> <eq>* CONCL <eq>        congruence-closure consequence
    FARKAS <n> <entry>*            linear-arithmetic conflict clause
    PROP <n> <id>* TARGET <term> CLAUSES <k> <ints 0-terminated>
    QED
    END

The replay succeeds when the goal is literally true, is among the facts, or
nil has been derived.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

# ---------------------------------------------------------------------------
# Terms: ("var", name) | ("const", value) | ("app", fn, (args...))
# Values: ("rat", Fraction) | ("sym", s) | ("str", s) | ("nil",) | ("true",)
#         | ("pair", head, tail)

VNIL = ("nil",)
VTRUE = ("true",)
T_TRUE = ("const", VTRUE)
T_NIL = ("const", VNIL)

_NUMBER_RE = re.compile(r"^-?[0-9]+(/[0-9]+)?$")


class ReplayError(Exception):
    pass


def _truthy(v) -> bool:
    return v != VNIL


# -- reading ------------------------------------------------------------------


class Cursor:
    def __init__(self, text: str, pos: int = 0):
        self.text = text
        self.pos = pos

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in " \t()'\"":
            self.pos += 1
        if start == self.pos:
            raise ReplayError(f"expected a word at column {self.pos}: {self.text!r}")
        return self.text[start : self.pos]

    def term(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            raise ReplayError("expected a term")
        ch = self.text[self.pos]
        if ch == "(":
            self.pos += 1
            args = []
            self.skip_ws()
            if self.pos < len(self.text) and self.text[self.pos] == ")":
                self.pos += 1
                return T_NIL
            fn = self.word()
            while True:
                self.skip_ws()
                if self.pos >= len(self.text):
                    raise ReplayError("unclosed term")
                if self.text[self.pos] == ")":
                    self.pos += 1
                    return ("app", fn, tuple(args))
                args.append(self.term())
        if ch == "'":
            self.pos += 1
            return ("const", self.quoted_value())
        if ch == '"':
            return ("const", ("str", self.string()))
        w = self.word()
        if _NUMBER_RE.match(w):
            return ("const", ("rat", Fraction(w)))
        if w == "t":
            return T_TRUE
        if w == "nil":
            return T_NIL
        return ("var", w)

    def string(self) -> str:
        assert self.text[self.pos] == '"'
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\" and self.pos + 1 < len(self.text):
                out.append(self.text[self.pos + 1])
                self.pos += 2
                continue
            if ch == '"':
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1
        raise ReplayError("unterminated string")

    def quoted_value(self):
        self.skip_ws()
        ch = self.text[self.pos]
        if ch == "(":
            self.pos += 1
            items = []
            tail = VNIL
            while True:
                self.skip_ws()
                if self.pos >= len(self.text):
                    raise ReplayError("unclosed quoted list")
                if self.text[self.pos] == ")":
                    self.pos += 1
                    break
                if self.text[self.pos] == ".":
                    self.pos += 1
                    tail = self.quoted_value()
                    self.skip_ws()
                    if self.pos >= len(self.text) or self.text[self.pos] != ")":
                        raise ReplayError("malformed dotted list")
                    self.pos += 1
                    break
                items.append(self.quoted_value())
            out = tail
            for v in reversed(items):
                out = ("pair", v, out)
            return out
        if ch == '"':
            return ("str", self.string())
        w = self.word()
        if _NUMBER_RE.match(w):
            return ("rat", Fraction(w))
        if w == "t":
            return VTRUE
        if w == "nil":
            return VNIL
        return ("sym", w)

    def subst(self) -> tuple:
        self.skip_ws()
        if self.text[self.pos] != "(":
            raise ReplayError("expected a substitution alist")
        self.pos += 1
        pairs = []
        while True:
            self.skip_ws()
            if self.pos >= len(self.text):
                raise ReplayError("unclosed substitution")
            if self.text[self.pos] == ")":
                self.pos += 1
                return tuple(pairs)
            if self.text[self.pos] != "(":
                raise ReplayError("malformed substitution binding")
            self.pos += 1
            name = self.word()
            image = self.term()
            self.skip_ws()
            if self.pos >= len(self.text) or self.text[self.pos] != ")":
                raise ReplayError("malformed substitution binding")
            self.pos += 1
            pairs.append((name, image))


def render(t) -> str:
    kind = t[0]
    if kind == "var":
        return t[1]
    if kind == "const":
        return render_value(t[1])
    args = t[2]
    if not args:
        return "(" + t[1] + ")"
    return "(" + t[1] + " " + " ".join(render(a) for a in args) + ")"


def render_value(v) -> str:
    k = v[0]
    if k == "true":
        return "t"
    if k == "nil":
        return "nil"
    if k == "rat":
        return str(v[1])
    if k == "sym":
        return "'" + v[1]
    if k == "str":
        return '"' + v[1].replace("\\", "\\\\").replace('"', '\\"') + '"'
    return "'" + _render_quoted(v)


def _render_quoted(v) -> str:
    k = v[0]
    if k == "nil":
        return "()"
    if k == "true":
        return "t"
    if k == "rat":
        return str(v[1])
    if k == "sym":
        return v[1]
    if k == "str":
        return '"' + v[1].replace("\\", "\\\\").replace('"', '\\"') + '"'
    parts = []
    while v[0] == "pair":
        parts.append(_render_quoted(v[1]))
        v = v[2]
    if v == VNIL:
        return "(" + " ".join(parts) + ")"
    return "(" + " ".join(parts) + " . " + _render_quoted(v) + ")"


def apply_subst(pairs: tuple, t):
    table = dict(pairs)

    def go(u):
        if u[0] == "var":
            return table.get(u[1], u)
        if u[0] == "app":
            return ("app", u[1], tuple(go(a) for a in u[2]))
        return u

    return go(t)


def subterm_at(t, path):
    for i in path:
        if t[0] != "app" or i >= len(t[2]):
            raise ReplayError(f"bad position {path} in {render(t)}")
        t = t[2][i]
    return t


def replace_at(t, path, new):
    if not path:
        return new
    if t[0] != "app" or path[0] >= len(t[2]):
        raise ReplayError(f"bad position {path} in {render(t)}")
    args = list(t[2])
    args[path[0]] = replace_at(args[path[0]], path[1:], new)
    return ("app", t[1], tuple(args))


def flatten_conj(t) -> list:
    if t[0] == "app" and t[1] == "^":
        out = []
        for a in t[2]:
            out.extend(flatten_conj(a))
        return out
    if t == T_TRUE:
        return []
    return [t]


def conj(ts: list):
    if not ts:
        return T_TRUE
    if len(ts) == 1:
        return ts[0]
    return ("app", "^", tuple(ts))


def disj(ts: list):
    if not ts:
        return T_NIL
    if len(ts) == 1:
        return ts[0]
    return ("app", "v", tuple(ts))


def neg(t):
    return ("app", "!", (t,))


def is_ground(t) -> bool:
    if t[0] == "var":
        return False
    if t[0] == "app":
        return all(is_ground(a) for a in t[2])
    return True


# ---------------------------------------------------------------------------
# Environment snapshot


@dataclass
class KFunction:
    name: str
    params: tuple  # ((name, recognizer), ...)
    ret: str
    body: tuple


@dataclass
class KRule:
    rule_id: str
    conds: tuple
    lhs: tuple
    rhs: tuple


class KEnv:
    def __init__(self, functions: dict, rules: dict):
        self.functions = functions
        self.rules = rules


def parse_env(text: str) -> KEnv:
    functions: dict = {}
    rules: dict = {}
    lines = text.splitlines()
    if not lines or lines[0] != "ENV-BEGIN":
        raise ReplayError("malformed environment snapshot")
    for line in lines[1:]:
        if line == "ENV-END":
            break
        cur = Cursor(line)
        kind = cur.word()
        if kind == "FUNCTION":
            name = cur.word()
            if cur.word() != "RET":
                raise ReplayError("malformed FUNCTION line")
            ret = cur.word()
            if cur.word() != "PARAMS":
                raise ReplayError("malformed FUNCTION line")
            cur.skip_ws()
            if cur.text[cur.pos] != "(":
                raise ReplayError("malformed FUNCTION params")
            cur.pos += 1
            params = []
            while True:
                cur.skip_ws()
                if cur.text[cur.pos] == ")":
                    cur.pos += 1
                    break
                if cur.text[cur.pos] != "(":
                    raise ReplayError("malformed FUNCTION params")
                cur.pos += 1
                p = cur.word()
                r = cur.word()
                cur.skip_ws()
                if cur.text[cur.pos] != ")":
                    raise ReplayError("malformed FUNCTION params")
                cur.pos += 1
                params.append((p, r))
            if cur.word() != "BODY":
                raise ReplayError("malformed FUNCTION line")
            body = cur.term()
            functions[name] = KFunction(name, tuple(params), ret, body)
        elif kind == "RULE":
            rid = cur.word()
            if cur.word() != "CONDS":
                raise ReplayError("malformed RULE line")
            cur.skip_ws()
            if cur.text[cur.pos] != "(":
                raise ReplayError("malformed RULE conds")
            cur.pos += 1
            conds = []
            while True:
                cur.skip_ws()
                if cur.text[cur.pos] == ")":
                    cur.pos += 1
                    break
                conds.append(cur.term())
            if cur.word() != "LHS":
                raise ReplayError("malformed RULE line")
            lhs = cur.term()
            if cur.word() != "RHS":
                raise ReplayError("malformed RULE line")
            rhs = cur.term()
            rules[rid] = KRule(rid, tuple(conds), lhs, rhs)
        else:
            raise ReplayError(f"unknown snapshot line {kind}")
    return KEnv(functions, rules)


# ---------------------------------------------------------------------------
# Ground evaluation (guarded)


class KGuard(Exception):
    pass


class KBudget(Exception):
    pass


def _is_tl(v) -> bool:
    while v[0] == "pair":
        v = v[2]
    return v == VNIL


def _is_int(v) -> bool:
    return v[0] == "rat" and v[1].denominator == 1


_RECOGNIZERS = {
    "allp": lambda v: True,
    "boolp": lambda v: v in (VTRUE, VNIL),
    "natp": lambda v: _is_int(v) and v[1] >= 0,
    "posp": lambda v: _is_int(v) and v[1] > 0,
    "intp": _is_int,
    "rationalp": lambda v: v[0] == "rat",
    "tlp": _is_tl,
    "consp": lambda v: v[0] == "pair",
    "symbolp": lambda v: v[0] == "sym" or v in (VTRUE, VNIL),
}


def _vless(u, v) -> bool:
    def view(x):
        if x == VTRUE:
            return ("sym", "t")
        if x == VNIL:
            return ("sym", "nil")
        return x

    u, v = view(u), view(v)
    rank = {"rat": 0, "sym": 1, "str": 2, "pair": 3}
    ru, rv = rank[u[0]], rank[v[0]]
    if ru != rv:
        return ru < rv
    if u[0] in ("rat", "sym", "str"):
        return u[1] < v[1]
    if u[1] != v[1]:
        return _vless(u[1], v[1])
    return _vless(u[2], v[2])


class KEval:
    def __init__(self, env: KEnv, budget: int = 1_000_000):
        self.env = env
        self.left = budget
        self.depth = 0

    def _tick(self):
        self.left -= 1
        if self.left < 0:
            raise KBudget()

    def _rat(self, v, what):
        if v[0] != "rat":
            raise KGuard(what)
        return v[1]

    def eval(self, t, frame=None):
        self._tick()
        kind = t[0]
        if kind == "const":
            return t[1]
        if kind == "var":
            if frame is None or t[1] not in frame:
                raise ReplayError(f"unbound variable {t[1]}")
            return frame[t[1]]
        fn, args = t[1], t[2]
        if fn == "if":
            c = self.eval(args[0], frame)
            return self.eval(args[1] if _truthy(c) else args[2], frame)
        if fn == "^":
            v = VTRUE
            for a in args:
                v = self.eval(a, frame)
                if not _truthy(v):
                    return VNIL
            return v
        if fn == "v":
            for a in args:
                v = self.eval(a, frame)
                if _truthy(v):
                    return v
            return VNIL
        if fn == "=>":
            if not _truthy(self.eval(args[0], frame)):
                return VTRUE
            return VTRUE if _truthy(self.eval(args[1], frame)) else VNIL
        if fn == "<=>":
            a = _truthy(self.eval(args[0], frame))
            b = _truthy(self.eval(args[1], frame))
            return VTRUE if a == b else VNIL
        vals = [self.eval(a, frame) for a in args]
        return self.apply(fn, vals)

    def apply(self, fn, vals):
        self._tick()
        if fn in _RECOGNIZERS:
            if len(vals) != 1:
                raise ReplayError(f"{fn} expects one argument")
            return VTRUE if _RECOGNIZERS[fn](vals[0]) else VNIL
        if fn == "cons":
            return ("pair", vals[0], vals[1])
        if fn == "first":
            if vals[0][0] != "pair":
                raise KGuard("first")
            return vals[0][1]
        if fn == "rest":
            if vals[0][0] != "pair":
                raise KGuard("rest")
            return vals[0][2]
        if fn == "endp":
            if not (vals[0] == VNIL or vals[0][0] == "pair"):
                raise KGuard("endp")
            return VTRUE if vals[0] == VNIL else VNIL
        if fn == "!":
            return VNIL if _truthy(vals[0]) else VTRUE
        if fn == "==":
            return VTRUE if vals[0] == vals[1] else VNIL
        if fn == "<":
            return VTRUE if self._rat(vals[0], "<") < self._rat(vals[1], "<") else VNIL
        if fn == "<=":
            return VTRUE if self._rat(vals[0], "<=") <= self._rat(vals[1], "<=") else VNIL
        if fn == "+":
            total = Fraction(0)
            for v in vals:
                total += self._rat(v, "+")
            return ("rat", total)
        if fn == "*":
            total = Fraction(1)
            for v in vals:
                total *= self._rat(v, "*")
            return ("rat", total)
        if fn == "-":
            if len(vals) == 1:
                return ("rat", -self._rat(vals[0], "-"))
            acc = self._rat(vals[0], "-")
            for v in vals[1:]:
                acc -= self._rat(v, "-")
            return ("rat", acc)
        if fn == "/":
            num = self._rat(vals[0], "/")
            den = self._rat(vals[1], "/")
            if den == 0:
                raise KGuard("/")
            return ("rat", num / den)
        if fn == "<<":
            return VTRUE if _vless(vals[0], vals[1]) else VNIL
        if fn == "<<=":
            return VTRUE if vals[0] == vals[1] or _vless(vals[0], vals[1]) else VNIL
        if fn == "bin-app":
            if not _is_tl(vals[0]):
                raise KGuard("bin-app")
            items = []
            v = vals[0]
            while v[0] == "pair":
                items.append(v[1])
                v = v[2]
            out = vals[1]
            for h in reversed(items):
                out = ("pair", h, out)
            return out
        if fn == "len":
            n = 0
            v = vals[0]
            while v[0] == "pair":
                n += 1
                v = v[2]
            return ("rat", Fraction(n))
        fdef = self.env.functions.get(fn)
        if fdef is None:
            raise ReplayError(f"unknown function {fn}")
        if len(vals) != len(fdef.params):
            raise ReplayError(f"{fn} arity mismatch")
        for (p, r), v in zip(fdef.params, vals):
            if not _RECOGNIZERS[r](v):
                raise KGuard(f"({r} {p})")
        self.depth += 1
        if self.depth > 400:
            raise KBudget()
        try:
            return self.eval(fdef.body, dict(zip((p for p, _ in fdef.params), vals)))
        finally:
            self.depth -= 1


# ---------------------------------------------------------------------------
# Boolean structure (must mirror the encoder specification exactly)

_BOOL_HEADS = frozenset(
    ["!", "^", "v", "=>", "<=>", "==", "<", "<=", "<<", "<<=", "endp", "consp"]
) | frozenset(_RECOGNIZERS)


def boolean_valued(t, env: KEnv) -> bool:
    if t[0] == "const":
        return t[1] in (VTRUE, VNIL)
    if t[0] == "var":
        return False
    fn, args = t[1], t[2]
    if fn == "if":
        return len(args) == 3 and boolean_valued(args[1], env) and boolean_valued(args[2], env)
    if fn in _BOOL_HEADS:
        return True
    fdef = env.functions.get(fn)
    return fdef is not None and fdef.ret == "boolp"


def _skel(t, env):
    # nodes: ("atom", term) ("const", bool) ("not", k) ("and", ks) ("or", ks)
    #        ("implies", a, b) ("iff", a, b) ("ite", c, a, b)
    if t[0] == "const":
        return ("const", _truthy(t[1]))
    if t[0] == "var":
        return ("atom", t)
    fn, args = t[1], t[2]
    if fn == "!" and len(args) == 1:
        return ("not", _skel(args[0], env))
    if fn == "^":
        return ("and", tuple(_skel(a, env) for a in args))
    if fn == "v":
        return ("or", tuple(_skel(a, env) for a in args))
    if fn == "=>" and len(args) == 2:
        return ("implies", _skel(args[0], env), _skel(args[1], env))
    if fn == "<=>" and len(args) == 2:
        return ("iff", _skel(args[0], env), _skel(args[1], env))
    if fn == "==" and len(args) == 2 and boolean_valued(args[0], env) and boolean_valued(args[1], env):
        return ("iff", _skel(args[0], env), _skel(args[1], env))
    if (
        fn == "if"
        and len(args) == 3
        and boolean_valued(args[0], env)
        and boolean_valued(args[1], env)
        and boolean_valued(args[2], env)
    ):
        return ("ite", _skel(args[0], env), _skel(args[1], env), _skel(args[2], env))
    return ("atom", t)


def _fold(n):
    kind = n[0]
    if kind in ("atom", "const"):
        return n
    if kind == "not":
        a = _fold(n[1])
        if a[0] == "const":
            return ("const", not a[1])
        return ("not", a)
    if kind in ("and", "or"):
        keep = []
        for k in n[1]:
            f = _fold(k)
            if f[0] == "const":
                if kind == "and" and not f[1]:
                    return ("const", False)
                if kind == "or" and f[1]:
                    return ("const", True)
                continue
            keep.append(f)
        if not keep:
            return ("const", kind == "and")
        if len(keep) == 1:
            return keep[0]
        return (kind, tuple(keep))
    if kind == "implies":
        a, b = _fold(n[1]), _fold(n[2])
        if a[0] == "const":
            return b if a[1] else ("const", True)
        if b[0] == "const":
            return ("const", True) if b[1] else _fold(("not", a))
        return ("implies", a, b)
    if kind == "iff":
        a, b = _fold(n[1]), _fold(n[2])
        if a[0] == "const":
            return b if a[1] else _fold(("not", b))
        if b[0] == "const":
            return a if b[1] else _fold(("not", a))
        return ("iff", a, b)
    if kind == "ite":
        c, a, b = _fold(n[1]), _fold(n[2]), _fold(n[3])
        if c[0] == "const":
            return a if c[1] else b
        if a[0] == "const" and b[0] == "const":
            if a[1] and b[1]:
                return ("const", True)
            if not a[1] and not b[1]:
                return ("const", False)
            return c if a[1] else _fold(("not", c))
        if a[0] == "const":
            if a[1]:
                return _fold(("or", (c, b)))
            return _fold(("and", (("not", c), b)))
        if b[0] == "const":
            if b[1]:
                return _fold(("implies", c, a))
            return _fold(("and", (c, a)))
        return ("ite", c, a, b)
    raise ReplayError(f"bad skeleton node {kind}")


class KEncoder:
    def __init__(self, env: KEnv):
        self.env = env
        self.atom_var: dict = {}
        self.clauses: List[List[int]] = []
        self.next_var = 1

    def _collect(self, n):
        if n[0] == "atom":
            key = render(n[1])
            if key not in self.atom_var:
                self.atom_var[key] = self.next_var
                self.next_var += 1
            return
        if n[0] == "const":
            return
        for k in n[1:] if n[0] not in ("and", "or") else n[1]:
            self._collect(k)

    def _encode(self, n) -> int:
        kind = n[0]
        if kind == "atom":
            return self.atom_var[render(n[1])]
        if kind == "not":
            return -self._encode(n[1])
        kids = n[1] if kind in ("and", "or") else n[1:]
        lits = [self._encode(k) for k in kids]
        v = self.next_var
        self.next_var += 1
        add = self.clauses.append
        if kind == "and":
            for l in lits:
                add([-v, l])
            add([v] + [-l for l in lits])
        elif kind == "or":
            for l in lits:
                add([v, -l])
            add([-v] + lits)
        elif kind == "implies":
            a, b = lits
            add([-v, -a, b])
            add([v, a])
            add([v, -b])
        elif kind == "iff":
            a, b = lits
            add([-v, -a, b])
            add([-v, a, -b])
            add([v, a, b])
            add([v, -a, -b])
        elif kind == "ite":
            c, a, b = lits
            add([-v, -c, a])
            add([-v, c, b])
            add([v, -c, -a])
            add([v, c, -b])
        else:
            raise ReplayError(f"bad node {kind}")
        return v

    def encode_query(self, facts, target):
        nodes = [_fold(_skel(f, self.env)) for f in facts]
        if target is not None:
            nodes.append(_fold(("not", _skel(target, self.env))))
        for n in nodes:
            self._collect(n)
        for n in nodes:
            if n[0] == "const":
                if not n[1]:
                    self.clauses.append([])
                continue
            root = self._encode(n)
            self.clauses.append([root])
        return self.clauses


def rup_check(initial: List[List[int]], derivation: List[List[int]]) -> bool:
    if not derivation or derivation[-1] != []:
        return False
    db = [list(c) for c in initial]
    for derived in derivation:
        if not _rup_one(db, derived):
            return False
        db.append(list(derived))
    return True


def _rup_one(db, assumed_clause) -> bool:
    assign: Dict[int, bool] = {}
    for lit in assumed_clause:
        v = abs(lit)
        want = lit < 0
        if v in assign and assign[v] != want:
            return True
        assign[v] = want

    def value(lit):
        v = assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    changed = True
    while changed:
        changed = False
        for cl in db:
            sat = False
            unassigned = []
            for lit in cl:
                v = value(lit)
                if v is True:
                    sat = True
                    break
                if v is None:
                    unassigned.append(lit)
                    if len(unassigned) > 1:
                        break
            if sat:
                continue
            if not unassigned:
                return True
            if len(unassigned) == 1:
                lit = unassigned[0]
                assign[abs(lit)] = lit > 0
                changed = True
    return False


# ---------------------------------------------------------------------------
# Congruence closure


class KCC:
    def __init__(self):
        self.terms: list = []
        self.index: dict = {}
        self.parent: list = []

    def add(self, t) -> int:
        key = render(t)
        i = self.index.get(key)
        if i is not None:
            return i
        if t[0] == "app":
            for a in t[2]:
                self.add(a)
        i = len(self.terms)
        self.index[key] = i
        self.terms.append(t)
        self.parent.append(i)
        return i

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb

    def close(self):
        changed = True
        while changed:
            changed = False
            sig = {}
            for i, t in enumerate(self.terms):
                if t[0] == "app":
                    key = (t[1], tuple(self.find(self.index[render(a)]) for a in t[2]))
                    j = sig.get(key)
                    if j is None:
                        sig[key] = i
                    elif self.find(i) != self.find(j):
                        self.union(i, j)
                        changed = True

    def same(self, a, b) -> bool:
        ia, ib = self.add(a), self.add(b)
        self.close()
        return self.find(ia) == self.find(ib)


# ---------------------------------------------------------------------------
# Linear arithmetic recombination


def _padd(a, b):
    out = dict(a)
    for m, c in b.items():
        nc = out.get(m, Fraction(0)) + c
        if nc:
            out[m] = nc
        else:
            out.pop(m, None)
    return out


def _pscale(a, k):
    if not k:
        return {}
    return {m: c * k for m, c in a.items()}


def _pmul(a, b):
    out: dict = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = tuple(sorted(m1 + m2))
            nc = out.get(m, Fraction(0)) + c1 * c2
            if nc:
                out[m] = nc
            else:
                out.pop(m, None)
    return out


def _pconst(a):
    if not a:
        return Fraction(0)
    if len(a) == 1 and () in a:
        return a[()]
    return None


def poly_of_term(t):
    if t[0] == "const":
        if t[1][0] == "rat":
            return {(): t[1][1]} if t[1][1] else {}
        return {}
    if t[0] == "app":
        fn, args = t[1], t[2]
        if fn == "+":
            out = {}
            for a in args:
                out = _padd(out, poly_of_term(a))
            return out
        if fn == "*":
            out = {(): Fraction(1)}
            for a in args:
                out = _pmul(out, poly_of_term(a))
            return out
        if fn == "-":
            if len(args) == 1:
                return _pscale(poly_of_term(args[0]), Fraction(-1))
            out = poly_of_term(args[0])
            for a in args[1:]:
                out = _padd(out, _pscale(poly_of_term(a), Fraction(-1)))
            return out
        if fn == "/" and len(args) == 2:
            den = poly_of_term(args[1])
            c = _pconst(den)
            if c is not None:
                if c == 0:
                    return {}
                return _pscale(poly_of_term(args[0]), Fraction(1) / c)
            return {(render(t),): Fraction(1)}
    return {(render(t),): Fraction(1)}


def _atom_constraint(atom, sign: bool):
    if atom[0] != "app" or len(atom[2]) != 2:
        return None
    a, b = atom[2]
    if atom[1] == "<":
        if sign:
            return ("gt", _padd(poly_of_term(b), _pscale(poly_of_term(a), Fraction(-1))))
        return ("ge", _padd(poly_of_term(a), _pscale(poly_of_term(b), Fraction(-1))))
    if atom[1] == "<=":
        if sign:
            return ("ge", _padd(poly_of_term(b), _pscale(poly_of_term(a), Fraction(-1))))
        return ("gt", _padd(poly_of_term(a), _pscale(poly_of_term(b), Fraction(-1))))
    if atom[1] == "==":
        diff = _padd(poly_of_term(a), _pscale(poly_of_term(b), Fraction(-1)))
        return ("eq", diff) if sign else ("diseq", diff)
    return None


def _rec_bound(atom):
    if atom[0] != "app" or len(atom[2]) != 1:
        return None
    p = poly_of_term(atom[2][0])
    if atom[1] == "posp":
        return ("ge", _padd(p, {(): Fraction(-1)}))
    if atom[1] == "natp":
        return ("ge", p)
    return None


def _mono_square(m) -> bool:
    if len(m) < 2:
        return False
    counts: dict = {}
    for b in m:
        counts[b] = counts.get(b, 0) + 1
    return all(n % 2 == 0 for n in counts.values())


def check_farkas(entries) -> Optional[list]:
    """Validate the entries; return the conflict-clause literals
    [(atom, assumed_sign)] on success, None on failure."""
    total: dict = {}
    strict = False
    any_ineq = False
    lits: list = []
    seen = set()

    def lit(atom, sign):
        key = (render(atom), sign)
        if key not in seen:
            seen.add(key)
            lits.append((atom, sign))

    for e in entries:
        kind = e[0]
        if kind == "DISEQ":
            atom = e[1]
            ac = _atom_constraint(atom, False)
            if ac is None or ac[0] != "diseq" or ac[1]:
                return None
            lit(atom, False)
            return lits
        if kind == "INEQ":
            sign, coeff, atom = e[1], e[2], e[3]
            ac = _atom_constraint(atom, sign)
            if ac is None or ac[0] not in ("gt", "ge") or coeff <= 0:
                return None
            ckind, poly = ac
            lit(atom, sign)
        elif kind == "REC":
            coeff, atom = e[1], e[2]
            rb = _rec_bound(atom)
            if rb is None or coeff <= 0:
                return None
            ckind, poly = rb
            lit(atom, True)
        elif kind == "SQ":
            coeff, term = e[1], e[2]
            poly = poly_of_term(term)
            if coeff <= 0 or len(poly) != 1 or not all(_mono_square(m) for m in poly):
                return None
            ckind = "ge"
        elif kind == "PROD":
            coeff, s1, a1, s2, a2 = e[1], e[2], e[3], e[4], e[5]
            f1 = _rec_bound(a1) if _is_rec_atom(a1) else _atom_constraint(a1, s1)
            f2 = _rec_bound(a2) if _is_rec_atom(a2) else _atom_constraint(a2, s2)
            if (
                coeff <= 0
                or f1 is None
                or f2 is None
                or f1[0] not in ("gt", "ge")
                or f2[0] not in ("gt", "ge")
            ):
                return None
            ckind = "gt" if (f1[0] == "gt" and f2[0] == "gt") else "ge"
            poly = _pmul(f1[1], f2[1])
            lit(a1, s1)
            lit(a2, s2)
        elif kind == "EQM":
            mult, atom = e[1], e[2]
            ac = _atom_constraint(atom, True)
            if ac is None or ac[0] != "eq":
                return None
            ckind = "eq"
            poly = _pmul(ac[1], poly_of_term(mult))
            coeff = Fraction(1)
            lit(atom, True)
        else:
            return None
        if ckind in ("gt", "ge"):
            any_ineq = True
            if ckind == "gt":
                strict = True
        total = _padd(total, _pscale(poly, coeff))
    c = _pconst(total)
    if c is None:
        return None
    if any_ineq:
        ok = (c <= 0) if strict else (c < 0)
    else:
        ok = c != 0
    return lits if ok else None


def _is_rec_atom(atom) -> bool:
    return atom[0] == "app" and atom[1] in ("posp", "natp") and len(atom[2]) == 1


# ---------------------------------------------------------------------------
# Governors (positions whose truth may be assumed when rewriting below them)


def governors_at(t, path) -> set:
    out: set = set()
    for i in path:
        if t[0] != "app":
            raise ReplayError("bad governor path")
        fn, args = t[1], t[2]
        if fn == "^":
            for j, a in enumerate(args):
                if j != i:
                    out.add(render(a))
        elif fn == "v":
            for j, a in enumerate(args):
                if j != i:
                    out.add(render(neg(a)))
        elif fn == "=>" and i == 1:
            out.add(render(args[0]))
        elif fn == "if":
            if i == 1:
                out.add(render(args[0]))
            elif i == 2:
                out.add(render(neg(args[0])))
        t = args[i]
    return out


# ---------------------------------------------------------------------------
# Replay


@dataclass
class ReplayResult:
    accepted: bool
    label: str = ""
    step_index: int = -1
    reason: str = ""

    def __bool__(self):
        return self.accepted


def _parse_path(s: str):
    if s == "-":
        return ()
    return tuple(int(x) for x in s.split("."))


class _Replay:
    def __init__(self, env: KEnv):
        self.env = env
        self.facts: list = []
        self.fact_keys: dict = {}
        self.goal = None

    def add_fact(self, t):
        self.fact_keys.setdefault(render(t), len(self.facts))
        self.facts.append(t)

    def has_fact(self, t) -> bool:
        return render(t) in self.fact_keys

    def current(self, tgt):
        if tgt == "G":
            return self.goal
        i = int(tgt)
        if i < 0 or i >= len(self.facts):
            raise ReplayError(f"no fact {i}")
        return self.facts[i]

    def update(self, tgt, new):
        if tgt == "G":
            self.goal = new
        else:
            self.add_fact(new)

    def eval_ground(self, t):
        if not is_ground(t):
            raise ReplayError(f"term is not ground: {render(t)}")
        return KEval(self.env).eval(t)

    def step(self, line: str):
        cur = Cursor(line)
        op = cur.word()
        if op == "INTRO":
            if self.goal[0] != "app" or self.goal[1] != "=>":
                raise ReplayError("INTRO on a non-implication goal")
            hyp, concl = self.goal[2]
            for h in flatten_conj(hyp):
                self.add_fact(h)
            self.goal = concl
            return
        if op == "REWRITE":
            tgt = cur.word()
            path = _parse_path(cur.word())
            rid = cur.word()
            rule = self.env.rules.get(rid)
            if rule is None:
                raise ReplayError(f"unknown rule {rid}")
            if cur.word() != "SUBST":
                raise ReplayError("malformed REWRITE")
            sub = cur.subst()
            refs = []
            if not cur.at_end():
                if cur.word() != "CONDS":
                    raise ReplayError("malformed REWRITE")
                while not cur.at_end():
                    refs.append(cur.word())
            if len(refs) != len(rule.conds):
                raise ReplayError(f"rule {rid} needs {len(rule.conds)} condition proofs")
            term = self.current(tgt)
            lhs = apply_subst(sub, rule.lhs)
            if subterm_at(term, path) != lhs:
                raise ReplayError(
                    f"rule {rid} does not apply at {'.'.join(map(str, path)) or 'root'}"
                )
            governors = governors_at(term, path)
            for cond, ref in zip(rule.conds, refs):
                ci = apply_subst(sub, cond)
                if ref.startswith("F"):
                    k = int(ref[1:])
                    if k < 0 or k >= len(self.facts) or self.facts[k] != ci:
                        raise ReplayError(f"condition {render(ci)} is not fact {k}")
                elif ref == "GOV":
                    if render(ci) not in governors:
                        raise ReplayError(f"condition {render(ci)} does not govern the position")
                elif ref == "EV":
                    try:
                        v = self.eval_ground(ci)
                    except (KGuard, KBudget) as e:
                        raise ReplayError(f"condition evaluation failed: {e}")
                    if not _truthy(v):
                        raise ReplayError(f"condition {render(ci)} evaluates false")
                else:
                    raise ReplayError(f"bad condition reference {ref}")
            new = replace_at(term, path, apply_subst(sub, rule.rhs))
            self.update(tgt, new)
            return
        if op == "EVAL":
            tgt = cur.word()
            path = _parse_path(cur.word())
            term = self.current(tgt)
            sub = subterm_at(term, path)
            try:
                v = self.eval_ground(sub)
            except (KGuard, KBudget) as e:
                raise ReplayError(f"evaluation failed: {e}")
            self.update(tgt, replace_at(term, path, ("const", v)))
            return
        if op == "EVALNEW":
            t = cur.term()
            try:
                v = self.eval_ground(t)
            except (KGuard, KBudget) as e:
                raise ReplayError(f"evaluation failed: {e}")
            if not _truthy(v):
                raise ReplayError(f"{render(t)} does not evaluate true")
            self.add_fact(t)
            return
        if op == "CC":
            n = int(cur.word())
            prems = [cur.term() for _ in range(n)]
            if cur.word() != "CONCL":
                raise ReplayError("malformed CC")
            concl = cur.term()
            cc = KCC()
            for p in prems:
                if p[0] != "app" or p[1] != "==" or len(p[2]) != 2:
                    raise ReplayError("CC premises must be equalities")
                cc.union(cc.add(p[2][0]), cc.add(p[2][1]))
            if concl[0] != "app" or concl[1] not in ("==", "<=>") or len(concl[2]) != 2:
                raise ReplayError("CC conclusion must be an equality")
            if not cc.same(concl[2][0], concl[2][1]):
                raise ReplayError("congruence closure does not justify the conclusion")
            fact = concl if not prems else ("app", "=>", (conj(prems), concl))
            self.add_fact(fact)
            return
        if op == "FARKAS":
            n = int(cur.word())
            entries = []
            for _ in range(n):
                kind = cur.word()
                if kind == "INEQ":
                    sign = cur.word() == "T"
                    coeff = Fraction(cur.word())
                    entries.append(("INEQ", sign, coeff, cur.term()))
                elif kind == "REC":
                    coeff = Fraction(cur.word())
                    entries.append(("REC", coeff, cur.term()))
                elif kind == "SQ":
                    coeff = Fraction(cur.word())
                    entries.append(("SQ", coeff, cur.term()))
                elif kind == "PROD":
                    coeff = Fraction(cur.word())
                    s1 = cur.word() == "T"
                    a1 = cur.term()
                    s2 = cur.word() == "T"
                    a2 = cur.term()
                    entries.append(("PROD", coeff, s1, a1, s2, a2))
                elif kind == "EQM":
                    mult = cur.term()
                    entries.append(("EQM", mult, cur.term()))
                elif kind == "DISEQ":
                    entries.append(("DISEQ", cur.term()))
                else:
                    raise ReplayError(f"bad FARKAS entry {kind}")
            lits = check_farkas(entries)
            if lits is None:
                raise ReplayError("Farkas certificate does not recombine to a contradiction")
            fact = disj([neg(a) if sign else a for a, sign in lits])
            self.add_fact(fact)
            return
        if op == "PROP":
            n = int(cur.word())
            ids = [int(cur.word()) for _ in range(n)]
            for i in ids:
                if i < 0 or i >= len(self.facts):
                    raise ReplayError(f"no fact {i}")
            if cur.word() != "TARGET":
                raise ReplayError("malformed PROP")
            target = cur.term()
            if cur.word() != "CLAUSES":
                raise ReplayError("malformed PROP")
            k = int(cur.word())
            clauses: List[List[int]] = []
            current: List[int] = []
            while not cur.at_end():
                x = int(cur.word())
                if x == 0:
                    clauses.append(current)
                    current = []
                else:
                    current.append(x)
            if current or len(clauses) != k:
                raise ReplayError("malformed PROP clause list")
            enc = KEncoder(self.env)
            initial = enc.encode_query([self.facts[i] for i in ids], target)
            if not rup_check(initial, clauses):
                raise ReplayError("RUP check failed")
            self.add_fact(target)
            return
        if op == "QED":
            self.check_done()
            return
        raise ReplayError(f"unknown step {op}")

    def check_done(self):
        goal = self.goal
        if goal[0] == "const" and _truthy(goal[1]):
            return
        if self.has_fact(goal):
            return
        if self.has_fact(T_NIL):
            return
        raise ReplayError("goal is not established")


def replay(trace_text: str, env_text: str) -> ReplayResult:
    """Replay a single TRACE section against an environment snapshot."""
    env = parse_env(env_text)
    lines = [l for l in trace_text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("TRACE "):
        return ReplayResult(False, reason="missing TRACE header")
    label = lines[0][6:]
    idx = 1
    if idx < len(lines) and lines[idx].startswith("ENVHASH "):
        want = lines[idx][8:].strip()
        have = hashlib.sha256(env_text.encode("utf-8")).hexdigest()
        if want != have:
            return ReplayResult(False, label, 0, "environment hash mismatch")
        idx += 1
    if idx >= len(lines) or not lines[idx].startswith("STMT "):
        return ReplayResult(False, label, idx, "missing STMT")
    try:
        stmt = Cursor(lines[idx][5:]).term()
    except ReplayError as e:
        return ReplayResult(False, label, idx, str(e))
    idx += 1
    r = _Replay(env)
    r.goal = stmt
    saw_qed = False
    for step_index, line in enumerate(lines[idx:]):
        if line == "END":
            break
        try:
            r.step(line)
            if line == "QED":
                saw_qed = True
        except (ReplayError, KGuard, KBudget, ValueError, IndexError) as e:
            return ReplayResult(False, label, step_index, f"{line.split(' ', 1)[0]}: {e}")
    if not saw_qed:
        try:
            r.check_done()
        except ReplayError as e:
            return ReplayResult(False, label, len(lines) - idx, str(e))
    return ReplayResult(True, label)


def split_traces(text: str) -> List[str]:
    """Split a trace file into its TRACE sections."""
    sections: List[str] = []
    current: List[str] = []
    for line in text.splitlines():
        if line.startswith("TRACE "):
            if current:
                sections.append("\n".join(current) + "\n")
            current = [line]
        elif current:
            current.append(line)
    if current:
        sections.append("\n".join(current) + "\n")
    return sections


def replay_all(text: str, env_text: str) -> List[ReplayResult]:
    return [replay(section, env_text) for section in split_traces(text)]
