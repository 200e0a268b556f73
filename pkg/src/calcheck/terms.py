"""First-order terms and ground values.

Terms are immutable trees of variables, literal constants and function
applications.  Values live in a small universe: exact rationals, symbols,
strings, the boolean constant t, nil (which doubles as the empty list and
falsehood) and cons pairs.  Everything in the checker, from proof statements
to rewrite rules to counterexamples, is made of these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Union


# ---------------------------------------------------------------------------
# Values


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class Rat(Value):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Sym(Value):
    name: str


@dataclass(frozen=True)
class Str(Value):
    text: str


@dataclass(frozen=True)
class _Nil(Value):
    pass


@dataclass(frozen=True)
class _True(Value):
    pass


NIL = _Nil()
TRUE = _True()


@dataclass(frozen=True)
class Pair(Value):
    head: Value
    tail: Value


def from_bool(b: bool) -> Value:
    return TRUE if b else NIL


def truthy(v: Value) -> bool:
    """nil is the only false value; everything else counts as true."""
    return v is not NIL


def rat(n, d=1) -> Rat:
    return Rat(Fraction(n, d))


def list_value(items) -> Value:
    out: Value = NIL
    for x in reversed(list(items)):
        out = Pair(x, out)
    return out


def iter_list(v: Value) -> Iterator[Value]:
    while isinstance(v, Pair):
        yield v.head
        v = v.tail


def is_true_list(v: Value) -> bool:
    while isinstance(v, Pair):
        v = v.tail
    return v is NIL


_RANK = {Rat: 0, Sym: 1, Str: 2, Pair: 3}


def _order_view(v: Value):
    # t and nil order as the symbols they print as.
    if v is TRUE:
        return Sym("t")
    if v is NIL:
        return Sym("nil")
    return v


def value_less(u: Value, v: Value) -> bool:
    """The built-in total order: rationals < symbols < strings < conses."""
    u, v = _order_view(u), _order_view(v)
    ru, rv = _RANK[type(u)], _RANK[type(v)]
    if ru != rv:
        return ru < rv
    if isinstance(u, Rat):
        return u.value < v.value
    if isinstance(u, Sym):
        return u.name < v.name
    if isinstance(u, Str):
        return u.text < v.text
    if u.head != v.head:
        return value_less(u.head, v.head)
    return value_less(u.tail, v.tail)


# ---------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()


@dataclass(frozen=True, eq=False)
class Var(Term):
    name: str

    def __eq__(self, other):
        return type(other) is Var and other.name == self.name

    def __hash__(self):
        return hash(("v", self.name))

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, eq=False)
class Const(Term):
    value: Value

    def __eq__(self, other):
        return type(other) is Const and other.value == self.value

    def __hash__(self):
        return hash(("c", self.value))

    def __repr__(self):
        return f"Const({render(self)})"


@dataclass(frozen=True, eq=False)
class App(Term):
    fn: str
    args: tuple
    _hash: int = field(default=0, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_hash", hash(("a", self.fn, self.args)))

    def __eq__(self, other):
        return (
            type(other) is App
            and other._hash == self._hash
            and other.fn == self.fn
            and other.args == self.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"App({render(self)})"


T_TRUE = Const(TRUE)
T_NIL = Const(NIL)


def app(fn: str, *args: Term) -> App:
    return App(fn, tuple(args))


def conj(terms) -> Term:
    terms = list(terms)
    if not terms:
        return T_TRUE
    if len(terms) == 1:
        return terms[0]
    return App("^", tuple(terms))


def disj(terms) -> Term:
    terms = list(terms)
    if not terms:
        return T_NIL
    if len(terms) == 1:
        return terms[0]
    return App("v", tuple(terms))


def neg(t: Term) -> Term:
    return App("!", (t,))


def implies(h: Term, c: Term) -> Term:
    return App("=>", (h, c))


def equal(a: Term, b: Term) -> Term:
    return App("==", (a, b))


def flatten_conj(t: Term) -> list:
    """Top-level conjuncts of t, flattening nested ^ nodes."""
    if isinstance(t, App) and t.fn == "^":
        out = []
        for a in t.args:
            out.extend(flatten_conj(a))
        return out
    if t == T_TRUE:
        return []
    return [t]


def free_vars(t: Term, acc: Optional[list] = None) -> list:
    """Free variable names in first-occurrence order."""
    if acc is None:
        acc = []
    if isinstance(t, Var):
        if t.name not in acc:
            acc.append(t.name)
    elif isinstance(t, App):
        for a in t.args:
            free_vars(a, acc)
    return acc


def subterm_at(t: Term, path) -> Term:
    for i in path:
        if not isinstance(t, App) or i >= len(t.args):
            raise IndexError(f"bad path {list(path)} in {render(t)}")
        t = t.args[i]
    return t


def replace_at(t: Term, path, new: Term) -> Term:
    if not path:
        return new
    if not isinstance(t, App) or path[0] >= len(t.args):
        raise IndexError(f"bad path {list(path)} in {render(t)}")
    i = path[0]
    args = list(t.args)
    args[i] = replace_at(args[i], path[1:], new)
    return App(t.fn, tuple(args))


def term_size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def is_proper_subterm(small: Term, big: Term) -> bool:
    if small == big:
        return False
    stack = [big]
    while stack:
        cur = stack.pop()
        if cur == small:
            return True
        if isinstance(cur, App):
            stack.extend(cur.args)
    return False


# ---------------------------------------------------------------------------
# Substitution


@dataclass(frozen=True)
class Subst:
    """A simultaneous substitution from variable names to terms."""

    bindings: tuple

    def __init__(self, bindings: Union[Mapping, dict, tuple] = ()):
        if isinstance(bindings, Mapping):
            items = tuple(bindings.items())
        else:
            items = tuple(bindings)
        names = [k for k, _ in items]
        if len(names) != len(set(names)):
            raise ValueError("duplicate variable in substitution")
        object.__setattr__(self, "bindings", items)

    def as_dict(self) -> dict:
        return dict(self.bindings)

    def lookup(self, name: str) -> Optional[Term]:
        for k, v in self.bindings:
            if k == name:
                return v
        return None

    def __bool__(self):
        return bool(self.bindings)


EMPTY_SUBST = Subst(())


def apply_subst(s: Subst, t: Term) -> Term:
    """Replace every bound variable by its image, simultaneously."""
    if not s.bindings:
        return t
    table = s.as_dict()

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            return table.get(u.name, u)
        if isinstance(u, App):
            return App(u.fn, tuple(go(a) for a in u.args))
        return u

    return go(t)


def match(pattern: Term, target: Term) -> Optional[Subst]:
    """Most general substitution s with apply_subst(s, pattern) == target."""
    out: dict = {}

    def go(p: Term, t: Term) -> bool:
        if isinstance(p, Var):
            seen = out.get(p.name)
            if seen is None:
                out[p.name] = t
                return True
            return seen == t
        if isinstance(p, Const):
            return p == t
        if not isinstance(t, App) or t.fn != p.fn or len(t.args) != len(p.args):
            return False
        return all(go(pa, ta) for pa, ta in zip(p.args, t.args))

    if go(pattern, target):
        return Subst(tuple(out.items()))
    return None


# ---------------------------------------------------------------------------
# Rendering (canonical, byte-stable, reparsable)


def render_value(v: Value) -> str:
    if v is TRUE:
        return "t"
    if v is NIL:
        return "nil"
    if isinstance(v, Rat):
        return str(v.value)
    if isinstance(v, Sym):
        return "'" + v.name
    if isinstance(v, Str):
        return '"' + v.text.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return "'" + _render_quoted(v)


def _render_quoted(v: Value) -> str:
    if v is NIL:
        return "()"
    if v is TRUE:
        return "t"
    if isinstance(v, Rat):
        return str(v.value)
    if isinstance(v, Sym):
        return v.name
    if isinstance(v, Str):
        return '"' + v.text.replace("\\", "\\\\").replace('"', '\\"') + '"'
    parts = []
    while isinstance(v, Pair):
        parts.append(_render_quoted(v.head))
        v = v.tail
    if v is NIL:
        return "(" + " ".join(parts) + ")"
    return "(" + " ".join(parts) + " . " + _render_quoted(v) + ")"


def render(t: Term) -> str:
    """Canonical parenthesized prefix rendering; reparses to an equal term."""
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return render_value(t.value)
    if not t.args:
        return "(" + t.fn + ")"
    return "(" + t.fn + " " + " ".join(render(a) for a in t.args) + ")"


def render_subst(s: Subst) -> str:
    return "(" + " ".join(f"({k} {render(v)})" for k, v in s.bindings) + ")"
