"""Moded terms over the hash signature {., eps, f, g, h}.

Terms are immutable.  Concatenation is kept in a canonical associative
form: ``cat`` flattens nested concatenations and drops ``EPS``, so two
terms are equal modulo associativity/unit exactly when their canonical
forms are structurally equal.  Raw (non canonical) ``Concat`` nodes can
still be built directly; ``normalize`` in :mod:`hashintruder.theories`
canonicalizes them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterator, Mapping, Union

C_MIN_NAME = "c_min"


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str
    part: int = 0  # 0 -> X_0, 1 -> X_1

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, slots=True)
class Const(Term):
    name: str

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, slots=True)
class Eps(Term):
    def __str__(self) -> str:
        return "eps"


@dataclass(frozen=True, slots=True)
class Concat(Term):
    items: tuple
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("Concat", self.items)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, slots=True)
class Hash(Term):
    arg: Term
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("Hash", self.arg)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True, slots=True)
class App(Term):
    """Application of a free symbol; ``f`` and ``g`` have arity 4 in F_h."""

    sym: str
    args: tuple
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.sym, self.args)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return format_term(self)


EPS = Eps()
C_MIN = Const(C_MIN_NAME)

Subst = Mapping[Var, Term]


# -- constructors -----------------------------------------------------------


def cat(*terms: Term) -> Term:
    """Canonical concatenation: flat, eps-free, a single item is returned as is."""
    out: list[Term] = []
    for t in terms:
        if isinstance(t, Eps):
            continue
        if isinstance(t, Concat):
            for u in t.items:
                if isinstance(u, Concat):
                    out.extend(letters(cat(u)))
                elif not isinstance(u, Eps):
                    out.append(u)
        else:
            out.append(t)
    if not out:
        return EPS
    if len(out) == 1:
        return out[0]
    return Concat(tuple(out))


def word(items) -> Term:
    return cat(*items)


def f(*args: Term) -> App:
    if len(args) != 4:
        raise ValueError("f has arity 4")
    return App("f", tuple(args))


def g(*args: Term) -> App:
    if len(args) != 4:
        raise ValueError("g has arity 4")
    return App("g", tuple(args))


def h(arg: Term) -> Hash:
    return Hash(arg)


def letters(t: Term) -> tuple:
    """The word view of a canonical term: its sequence of top-level letters."""
    if isinstance(t, Eps):
        return ()
    if isinstance(t, Concat):
        return t.items
    return (t,)


def children(t: Term) -> tuple:
    if isinstance(t, Concat):
        return t.items
    if isinstance(t, Hash):
        return (t.arg,)
    if isinstance(t, App):
        return t.args
    return ()


def rebuild(t: Term, kids) -> Term:
    if isinstance(t, Concat):
        return cat(*kids)
    if isinstance(t, Hash):
        return Hash(kids[0])
    if isinstance(t, App):
        return App(t.sym, tuple(kids))
    return t


def is_atom(t: Term) -> bool:
    return isinstance(t, (Var, Const, Eps))


def top_symbol(t: Term) -> str:
    if isinstance(t, Concat):
        return "."
    if isinstance(t, Hash):
        return "h"
    if isinstance(t, App):
        return t.sym
    if isinstance(t, Eps):
        return "eps"
    if isinstance(t, Const):
        return t.name
    return "?" + t.name


# -- traversal ----------------------------------------------------------------


def positions(t: Term, prefix: tuple = ()) -> Iterator[tuple[tuple, Term]]:
    """All (position, subterm) pairs; positions are 1-based index tuples."""
    yield prefix, t
    for i, c in enumerate(children(t), start=1):
        yield from positions(c, prefix + (i,))


def subterm_at(t: Term, pos) -> Term:
    for i in pos:
        kids = children(t)
        if not 1 <= i <= len(kids):
            raise IndexError(f"no position {tuple(pos)} in {format_term(t)}")
        t = kids[i - 1]
    return t


def syntactic_subterms(t: Term) -> set:
    out = {t}
    for c in children(t):
        out |= syntactic_subterms(c)
    return out


def variables(t: Term) -> set:
    if isinstance(t, Var):
        return {t}
    out: set = set()
    for c in children(t):
        out |= variables(c)
    return out


def constants(t: Term) -> set:
    """Free constants occurring anywhere in ``t`` (eps is not included)."""
    if isinstance(t, Const):
        return {t}
    out: set = set()
    for c in children(t):
        out |= constants(c)
    return out


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground(c) for c in children(t))


def contains_symbol(t: Term, sym: str) -> bool:
    if top_symbol(t) == sym:
        return True
    return any(contains_symbol(c, sym) for c in children(t))


def size(t: Term) -> int:
    return 1 + sum(size(c) for c in children(t))


def is_word(t: Term) -> bool:
    """True for h/f/g-free terms (words over variables and constants)."""
    if isinstance(t, (Hash, App)):
        return False
    return all(is_word(c) for c in children(t))


# -- substitutions --------------------------------------------------------------


def apply_subst(s: Subst, t: Term) -> Term:
    """Replace every variable in its domain and return the canonical result."""
    if isinstance(t, Var):
        return s.get(t, t)
    kids = children(t)
    if not kids:
        return t
    return rebuild(t, [apply_subst(s, c) for c in kids])


def compose(s1: Subst, s2: Subst) -> dict:
    """The substitution t -> (t s1) s2."""
    out = {x: apply_subst(s2, v) for x, v in s1.items()}
    for x, v in s2.items():
        out.setdefault(x, v)
    return {x: v for x, v in out.items() if v != x}


def support(s: Subst) -> set:
    return {x for x, v in s.items() if v != x}


# -- modes and signatures ---------------------------------------------------------


@dataclass(frozen=True)
class ModeTable:
    """Signature function sig(.) and mode function mode(.,.) of a moded theory.

    ``sig`` maps function symbols ('.', 'eps', 'f', 'g', 'h', ...) to 0 or 1;
    free constants always have signature 2 and variables the index of their
    partition.  ``mode`` maps (symbol, argument index) to 0 or 1.
    """

    sig: Mapping[str, int]
    mode: Mapping[tuple, int]
    c_min: Const = C_MIN
    special: frozenset = field(default_factory=lambda: frozenset({C_MIN, EPS}))

    def __post_init__(self):
        for (sym, i), m in self.mode.items():
            if m not in (0, 1):
                raise ValueError(f"mode({sym},{i}) must be 0 or 1")
            if m > self.sig.get(sym, 0):
                raise ValueError(f"mode({sym},{i})={m} exceeds sig({sym})")

    def sig_of(self, t: Term) -> int:
        if isinstance(t, Var):
            return t.part
        if isinstance(t, Const):
            return self.sig.get(t.name, 2)
        return self.sig[top_symbol(t)]

    def mode_of(self, parent: Term, i: int) -> int:
        sym = top_symbol(parent)
        if isinstance(parent, Concat):
            # a flat list is read as the right comb a1.(a2.(...an)).
            idx = 2 if i == len(parent.items) else 1
            return self.mode[(".", idx)]
        return self.mode[(sym, i)]


def _hash_modes():
    m = {(".", 1): 0, (".", 2): 0, ("h", 1): 0}
    for s in ("f", "g"):
        for i in range(1, 5):
            m[(s, i)] = 0
    return m


HASH_TABLE = ModeTable(
    sig={".": 0, "eps": 0, "f": 0, "g": 0, "h": 1},
    mode=_hash_modes(),
)


def sig_of(t: Term, m: ModeTable = HASH_TABLE) -> int:
    return m.sig_of(t)


def ill_moded_positions(t: Term, m: ModeTable = HASH_TABLE) -> list[tuple]:
    """Non-root positions whose subterm does not have the expected mode."""
    bad = []

    def walk(u: Term, pos: tuple):
        for i, c in enumerate(children(u), start=1):
            if m.sig_of(c) != m.mode_of(u, i):
                bad.append(pos + (i,))
            walk(c, pos + (i,))

    walk(t, ())
    return bad


def is_well_moded(t: Term, m: ModeTable = HASH_TABLE) -> bool:
    return not ill_moded_positions(t, m)


def subterm_values(t: Term, m: ModeTable = HASH_TABLE) -> set:
    """Syntactic subterms that are atomic or sit at an ill-moded position."""
    out = {t}

    def walk(u: Term):
        for i, c in enumerate(children(u), start=1):
            if is_atom(c) or m.sig_of(c) != m.mode_of(u, i):
                out.add(c)
            walk(c)

    walk(t)
    return out


def factors(t: Term, m: ModeTable = HASH_TABLE) -> set:
    strict = subterm_values(t, m) - {t}
    return {
        u
        for u in strict
        if not any(u != v and u in syntactic_subterms(v) for v in strict)
    }


def subterm_values_of_set(ts, m: ModeTable = HASH_TABLE) -> set:
    out: set = set()
    for t in ts:
        out |= subterm_values(t, m)
    return out


# -- simplification ordering ---------------------------------------------------------


class Order(Enum):
    LT = -1
    EQ = 0
    GT = 1


_SYMBOL_RANK = {".": 3, "f": 4, "g": 5, "h": 6}


def _prec(node) -> tuple:
    sym = node[0]
    if sym == C_MIN_NAME:
        return (0, "")
    if sym == "eps":
        return (1, "")
    if sym in _SYMBOL_RANK:
        return (_SYMBOL_RANK[sym], "")
    return (2, sym)


def _tree(t: Term):
    """Binary tree view used by the path ordering; concat lists become right combs."""
    if isinstance(t, Var):
        raise ValueError(f"compare_simp needs ground terms, got {format_term(t)}")
    if isinstance(t, Const):
        return (t.name, ())
    if isinstance(t, Eps):
        return ("eps", ())
    if isinstance(t, Hash):
        return ("h", (_tree(t.arg),))
    if isinstance(t, App):
        return (t.sym, tuple(_tree(a) for a in t.args))
    items = [_tree(u) for u in t.items]
    node = items[-1]
    for left in reversed(items[:-1]):
        node = (".", (left, node))
    return node


@lru_cache(maxsize=200_000)
def _lpo_gt(s, t) -> bool:
    if s == t:
        return False
    if any(si == t or _lpo_gt(si, t) for si in s[1]):
        return True
    ps, pt = _prec(s), _prec(t)
    if ps > pt:
        return all(_lpo_gt(s, ti) for ti in t[1])
    if ps == pt:
        if not all(_lpo_gt(s, ti) for ti in t[1]):
            return False
        for si, ti in zip(s[1], t[1]):
            if si != ti:
                return _lpo_gt(si, ti)
        return len(s[1]) > len(t[1])
    return False


def compare_simp(t1: Term, t2: Term) -> Order:
    """Lexicographic path ordering, precedence h > g > f > . > constants > eps > c_min."""
    a, b = _tree(apply_subst({}, t1)), _tree(apply_subst({}, t2))
    if a == b:
        return Order.EQ
    return Order.GT if _lpo_gt(a, b) else Order.LT


def sort_key(t: Term) -> tuple:
    """A cheap deterministic total order used for canonical output."""
    if isinstance(t, Eps):
        return (0,)
    if isinstance(t, Const):
        return (1, t.name)
    if isinstance(t, Var):
        return (2, t.part, t.name)
    if isinstance(t, Concat):
        return (3, tuple(sort_key(u) for u in t.items))
    if isinstance(t, Hash):
        return (4, sort_key(t.arg))
    return (5, t.sym, tuple(sort_key(u) for u in t.args))


# -- text syntax -------------------------------------------------------------------


def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return ("!" if t.part else "?") + t.name
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Eps):
        return "eps"
    if isinstance(t, Concat):
        return " . ".join(
            f"({format_term(u)})" if isinstance(u, Concat) else format_term(u)
            for u in t.items
        )
    if isinstance(t, Hash):
        return f"h({format_term(t.arg)})"
    return f"{t.sym}({', '.join(format_term(a) for a in t.args)})"


class TermSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"\s*(?:(?P<var>[?!][A-Za-z0-9_]+)|(?P<ident>[a-z][a-z0-9_]*)|(?P<punct>[().,]))"
)
ARITY = {"f": 4, "g": 4, "h": 1}
RESERVED = {"f", "g", "h", "eps"}


class _Parser:
    def __init__(self, text: str, line: int = 1):
        self.text = text
        self.pos = 0
        self.line = line
        self.tok = None
        self._advance()

    def _where(self, pos: int) -> tuple[int, int]:
        before = self.text[:pos]
        line = self.line + before.count("\n")
        col = pos - (before.rfind("\n") + 1) + 1
        return line, col

    def error(self, msg: str, pos: int | None = None):
        line, col = self._where(self.pos if pos is None else pos)
        raise TermSyntaxError(msg, line, col)

    def _advance(self):
        rest = self.text[self.pos :]
        if not rest.strip():
            self.tok = None
            self.tok_pos = len(self.text)
            self.pos = len(self.text)
            return
        m = _TOKEN.match(self.text, self.pos)
        if not m or m.end() == self.pos:
            skipped = len(rest) - len(rest.lstrip())
            self.error(f"unexpected character {rest.lstrip()[0]!r}", self.pos + skipped)
        kind = m.lastgroup
        self.tok = (kind, m.group(kind))
        self.tok_pos = m.start(kind)
        self.pos = m.end()

    def expect(self, punct: str):
        if self.tok != ("punct", punct):
            got = "end of input" if self.tok is None else repr(self.tok[1])
            self.error(f"expected {punct!r}, got {got}", self.tok_pos)
        self._advance()

    def term(self) -> Term:
        parts = [self.primary()]
        while self.tok == ("punct", "."):
            self._advance()
            parts.append(self.primary())
        return cat(*parts)

    def primary(self) -> Term:
        if self.tok is None:
            self.error("unexpected end of input", self.tok_pos)
        kind, val = self.tok
        start = self.tok_pos
        if kind == "var":
            self._advance()
            return Var(val[1:], 1 if val[0] == "!" else 0)
        if kind == "punct" and val == "(":
            self._advance()
            t = self.term()
            self.expect(")")
            return t
        if kind == "ident":
            self._advance()
            if val == "eps":
                return EPS
            if val in ARITY:
                if self.tok != ("punct", "("):
                    self.error(f"symbol {val!r} needs arguments", start)
                self._advance()
                args = [self.term()]
                while self.tok == ("punct", ","):
                    self._advance()
                    args.append(self.term())
                self.expect(")")
                if len(args) != ARITY[val]:
                    self.error(
                        f"{val} expects {ARITY[val]} argument(s), got {len(args)}", start
                    )
                return Hash(args[0]) if val == "h" else App(val, tuple(args))
            return Const(val)
        self.error(f"unexpected {val!r}", start)


def parse_term(text: str, line: int = 1) -> Term:
    """Parse the surface syntax into a canonical term."""
    p = _Parser(text, line)
    if p.tok is None:
        # the empty concatenation
        return EPS
    t = p.term()
    if p.tok is not None:
        p.error(f"trailing input {p.tok[1]!r}", p.tok_pos)
    return t


TermLike = Union[Term, str]


def as_term(x: TermLike) -> Term:
    return parse_term(x) if isinstance(x, str) else x
