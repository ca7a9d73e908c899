"""Unification systems with linear constant restrictions.

Words are solved by a bounded Nielsen (Levi lemma) search: the leading items
of an equation are compared and a leading variable is either erased or split
off against the other side's head.  Free f/g blocks may appear as letters;
two blocks with the same head decompose into their argument equations.

The search is bounded by a per-variable length budget and a node budget.
Running out of either turns an otherwise failed search into UNKNOWN.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .terms import (
    EPS,
    App,
    Const,
    Hash,
    Term,
    Var,
    apply_subst,
    cat,
    children,
    constants,
    format_term,
    is_word,
    letters,
    sort_key,
    variables,
)
from .theories import normalize


class UnifyInputError(ValueError):
    pass


@dataclass(frozen=True)
class UnificationSystem:
    equations: tuple = ()

    @classmethod
    def of(cls, pairs: Iterable) -> "UnificationSystem":
        return cls(tuple((normalize(l), normalize(r)) for l, r in pairs))

    def variables(self) -> set:
        out: set = set()
        for l, r in self.equations:
            out |= variables(l) | variables(r)
        return out

    def __iter__(self):
        return iter(self.equations)

    def __len__(self):
        return len(self.equations)


@dataclass(frozen=True)
class OrderingConstraint:
    """Strict order on variables and constants; (x, c) reads x precedes c."""

    pairs: frozenset = frozenset()

    @classmethod
    def of(cls, pairs: Iterable) -> "OrderingConstraint":
        return cls(frozenset(pairs))

    def union(self, other: "OrderingConstraint") -> "OrderingConstraint":
        return OrderingConstraint(self.pairs | other.pairs)

    def closure(self) -> set:
        succ: dict = {}
        for a, b in self.pairs:
            succ.setdefault(a, set()).add(b)
        out = set()
        for a in succ:
            seen, todo = set(), list(succ[a])
            while todo:
                b = todo.pop()
                if b in seen:
                    continue
                seen.add(b)
                todo.extend(succ.get(b, ()))
            out |= {(a, b) for b in seen}
        return out

    def is_acyclic(self) -> bool:
        return all(a != b for a, b in self.closure())

    def forbidden(self) -> dict:
        """Map each variable to the constants it must not contain."""
        if not self.is_acyclic():
            raise UnifyInputError("ordering constraint has a cycle")
        out: dict = {}
        for a, b in self.closure():
            if isinstance(a, Var) and isinstance(b, Const):
                out.setdefault(a, set()).add(b)
        return {k: frozenset(v) for k, v in out.items()}


@dataclass(frozen=True)
class Verdict:
    status: str  # "SAT" | "UNSAT" | "UNKNOWN"
    witness: dict | None = None
    bound: int | None = None
    extra: object = field(default=None, compare=False)

    @property
    def sat(self) -> bool:
        return self.status == "SAT"

    @property
    def unsat(self) -> bool:
        return self.status == "UNSAT"

    @property
    def unknown(self) -> bool:
        return self.status == "UNKNOWN"

    def to_json(self) -> dict:
        out: dict = {"verdict": self.status}
        if self.witness is not None:
            out["witness"] = {
                format_term(x): format_term(v)
                for x, v in sorted(self.witness.items(), key=lambda kv: sort_key(kv[0]))
            }
        if self.bound is not None:
            out["bound"] = self.bound
        return out


SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"


def satisfies(s: UnificationSystem, ord: OrderingConstraint, sigma: dict, eq=None) -> bool:
    """Re-check a witness: equations modulo AU (or ``eq``) and restrictions."""
    eq = eq or (lambda a, b: normalize(a) == normalize(b))
    for l, r in s:
        if not eq(apply_subst(sigma, l), apply_subst(sigma, r)):
            return False
    for x, cs in ord.forbidden().items():
        if constants(apply_subst(sigma, x)) & cs:
            return False
    return True


# -- Nielsen search ------------------------------------------------------------------


@dataclass
class _State:
    eqs: tuple  # canonical (lhs, rhs) pairs
    sigma: dict  # bindings made so far, fully applied
    forbid: dict  # Var -> frozenset of Const
    budget: dict  # Var -> remaining splits
    extra: object = None  # payload of subclasses


class NielsenSearch:
    """Depth-first Nielsen search; subclasses may extend ``finish``."""

    def __init__(self, bound: int = 6, max_nodes: int = 20000):
        self.bound = bound
        self.max_nodes = max_nodes
        self.counter = itertools.count(1)
        self.hit_bound = False
        self.nodes = 0
        self.seen: set = set()
        self.used: set = set()

    # hooks
    def finish(self, st: _State):
        """Called when no equation is left: return a witness, None, or child states."""
        return st.sigma

    def extra_key(self, st: _State, ren):
        return None

    def substitute_extra(self, extra, binding: dict):
        return extra

    # engine
    def run(self, st: _State) -> Verdict:
        for l, r in st.eqs:
            self.used |= variables(l) | variables(r)
        self.used |= _extra_vars(st.extra)
        stack = [st]
        while stack:
            cur = stack.pop()
            self.nodes += 1
            if self.nodes > self.max_nodes:
                self.hit_bound = True
                break
            cur = self._simplify(cur)
            if cur is None:
                continue
            key = self._key(cur)
            if key in self.seen:
                continue
            self.seen.add(key)
            if not cur.eqs:
                res = self.finish(cur)
                if isinstance(res, list):
                    stack.extend(reversed(res))
                elif res is not None:
                    return Verdict(SAT, res)
                continue
            stack.extend(reversed(self._branch(cur)))
        if self.hit_bound:
            return Verdict(UNKNOWN, bound=self.bound)
        return Verdict(UNSAT)

    def fresh(self, x: Var) -> Var:
        base = x.name.split("#")[0]
        while True:
            v = Var(f"{base}#{next(self.counter)}", x.part)
            if v not in self.used:
                self.used.add(v)
                return v

    def bind(self, st: _State, x: Var, value: Term, budget_updates=None, forbid_updates=None):
        """Child state with x := value applied everywhere, or None if forbidden."""
        value = normalize(value)
        fb = dict(st.forbid)
        cs = fb.pop(x, frozenset())
        if constants(value) & cs:
            return None
        for y in variables(value):
            if cs:
                fb[y] = fb.get(y, frozenset()) | cs
        if forbid_updates:
            for y, extra in forbid_updates.items():
                fb[y] = fb.get(y, frozenset()) | extra
        binding = {x: value}
        eqs = tuple(
            (apply_subst(binding, l), apply_subst(binding, r)) for l, r in st.eqs
        )
        sigma = {k: apply_subst(binding, v) for k, v in st.sigma.items()}
        sigma[x] = value
        budget = dict(st.budget)
        budget.pop(x, None)
        if budget_updates:
            budget.update(budget_updates)
        return _State(eqs, sigma, fb, budget, self.substitute_extra(st.extra, binding))

    def _simplify(self, st: _State):
        out = []
        pending = list(st.eqs)
        while pending:
            l, r = pending.pop(0)
            ls, rs = list(letters(l)), list(letters(r))
            while ls and rs and ls[0] == rs[0]:
                ls.pop(0)
                rs.pop(0)
            while ls and rs and ls[-1] == rs[-1]:
                ls.pop()
                rs.pop()
            if not ls and not rs:
                continue
            if ls and rs and _is_rigid(ls[0]) and _is_rigid(rs[0]):
                a, b = ls[0], rs[0]
                if isinstance(a, App) and isinstance(b, App) and a.sym == b.sym:
                    pending = list(zip(a.args, b.args)) + [(cat(*ls[1:]), cat(*rs[1:]))] + pending
                    continue
                return None
            if ls and rs and _is_rigid(ls[-1]) and _is_rigid(rs[-1]):
                a, b = ls[-1], rs[-1]
                if isinstance(a, App) and isinstance(b, App) and a.sym == b.sym:
                    pending = list(zip(a.args, b.args)) + [(cat(*ls[:-1]), cat(*rs[:-1]))] + pending
                    continue
                return None
            if not _length_ok(ls, rs) or not _length_ok(rs, ls):
                return None
            out.append((cat(*ls), cat(*rs)))
        out.sort(key=lambda e: (len(letters(e[0])) + len(letters(e[1])), format_term(e[0]), format_term(e[1])))
        return _State(tuple(out), st.sigma, st.forbid, st.budget, st.extra)

    def _key(self, st: _State):
        rename: dict = {}

        def ren(t):
            for v in _vars_in_order(t):
                if v not in rename:
                    rename[v] = Var(f"v{len(rename)}")
            return format_term(apply_subst(rename, t))

        eqs = tuple((ren(l), ren(r)) for l, r in st.eqs)
        extra = self.extra_key(st, ren)
        fb = tuple(
            sorted(
                (rename[v].name, tuple(sorted(c.name for c in cs)))
                for v, cs in st.forbid.items()
                if v in rename and cs
            )
        )
        return eqs, fb, extra

    def _branch(self, st: _State) -> list:
        l, r = st.eqs[0]
        ls, rs = letters(l), letters(r)
        if not ls or not rs:
            # every remaining item is a variable that must be erased
            cur = st
            for v in sorted(variables(cat(*(ls or rs))), key=sort_key):
                cur = self.bind(cur, v, EPS)
                if cur is None:
                    return []
            return [cur]
        a, b = ls[0], rs[0]
        if not isinstance(a, Var):
            a, b = b, a
        children_: list = []
        children_.append(self.bind(st, a, EPS))
        if isinstance(b, Var):
            children_.append(self.bind(st, b, EPS))
            children_.append(self._split(st, a, b))
            children_.append(self._split(st, b, a))
        else:
            children_.append(self._split(st, a, b))
        return [c for c in children_ if c is not None]

    def _split(self, st: _State, x: Var, head: Term):
        """x := head . x' with a fresh x'."""
        if x in variables(head):
            return None
        left = st.budget.get(x, self.bound)
        if left <= 0:
            self.hit_bound = True
            return None
        x2 = self.fresh(x)
        return self.bind(st, x, cat(head, x2), budget_updates={x2: left - 1},
                         forbid_updates={x2: st.forbid.get(x, frozenset())})


def _extra_vars(extra) -> set:
    if isinstance(extra, Term):
        return variables(extra)
    if isinstance(extra, (tuple, list)):
        out: set = set()
        for e in extra:
            out |= _extra_vars(e)
        return out
    return set()


def _vars_in_order(t: Term):
    if isinstance(t, Var):
        yield t
    for c in children(t):
        yield from _vars_in_order(c)


def _is_rigid(t: Term) -> bool:
    return not isinstance(t, Var)


def _length_ok(ls, rs) -> bool:
    """A var-free side bounds the number of rigid items on the other side."""
    if any(isinstance(u, Var) for u in rs):
        return True
    return sum(1 for u in ls if not isinstance(u, Var)) <= len(rs)


def _ground_rest(sigma: dict, vars_: Iterable[Var], filler: Term = EPS) -> dict:
    out = dict(sigma)
    rest = {}
    for x in vars_:
        for v in variables(out.get(x, x)):
            rest[v] = filler
    out = {k: apply_subst(rest, v) for k, v in out.items()}
    for v, val in rest.items():
        out.setdefault(v, val)
    return out


def solve_words(s: UnificationSystem, ord: OrderingConstraint, bound: int = 6,
                max_nodes: int = 20000) -> Verdict:
    """Nielsen search over words that may contain free f/g blocks."""
    forbid = ord.forbidden()
    vars_ = s.variables()
    search = NielsenSearch(bound, max_nodes)
    st = _State(tuple(s.equations), {}, dict(forbid), {})
    v = search.run(st)
    if not v.sat:
        return v
    sigma = _ground_rest(v.witness, vars_)
    sigma = {x: sigma.get(x, EPS) for x in vars_}
    return Verdict(SAT, sigma)


def solve_au_lcr(s: UnificationSystem, ord: OrderingConstraint, bound: int = 6,
                 max_nodes: int = 20000) -> Verdict:
    if bound < 1:
        raise UnifyInputError("bound must be positive")
    for l, r in s:
        if not (is_word(l) and is_word(r)):
            raise UnifyInputError(f"not a word equation: {format_term(l)} = {format_term(r)}")
    v = solve_words(s, ord, bound, max_nodes)
    if v.sat:
        assert satisfies(s, ord, v.witness), "witness failed re-check"
    return v


# -- syntactic unification -----------------------------------------------------------


def mgu(pairs: Iterable) -> dict | None:
    """Robinson unification for terms over f, g, h, constants and variables."""
    sigma: dict = {}
    todo = [(normalize(l), normalize(r)) for l, r in pairs]
    while todo:
        a, b = todo.pop()
        a, b = apply_subst(sigma, a), apply_subst(sigma, b)
        if a == b:
            continue
        if isinstance(b, Var) and not isinstance(a, Var):
            a, b = b, a
        if isinstance(a, Var):
            if a in variables(b):
                return None
            sigma = {k: apply_subst({a: b}, v) for k, v in sigma.items()}
            sigma[a] = b
            continue
        if isinstance(a, App) and isinstance(b, App) and a.sym == b.sym:
            todo.extend(zip(a.args, b.args))
            continue
        if isinstance(a, Hash) and isinstance(b, Hash):
            todo.append((a.arg, b.arg))
            continue
        return None
    return sigma


def solve_syntactic_lcr(s: UnificationSystem, ord: OrderingConstraint) -> Verdict:
    for l, r in s:
        for t in (l, r):
            if _has_concat(t):
                raise UnifyInputError(f"syntactic unification got a word: {format_term(t)}")
    sigma = mgu(s.equations)
    if sigma is None:
        return Verdict(UNSAT)
    # every instance of the mgu keeps the constants already in its range
    for x, cs in ord.forbidden().items():
        if constants(apply_subst(sigma, x)) & cs:
            return Verdict(UNSAT)
    return Verdict(SAT, sigma)


def _has_concat(t: Term) -> bool:
    from .terms import Concat

    if isinstance(t, Concat):
        return True
    return any(_has_concat(c) for c in children(t))


# -- brute force oracle --------------------------------------------------------------


def brute_force_unify(s: UnificationSystem, ord: OrderingConstraint, alphabet, maxlen: int) -> Verdict:
    """Try every assignment of words of length <= maxlen over ``alphabet``."""
    vars_ = sorted(s.variables(), key=sort_key)
    alphabet = [a if isinstance(a, Term) else Const(a) for a in alphabet]
    words = [cat(*w) for n in range(maxlen + 1) for w in itertools.product(alphabet, repeat=n)]
    for vals in itertools.product(words, repeat=len(vars_)):
        sigma = dict(zip(vars_, vals))
        if satisfies(s, ord, sigma):
            return Verdict(SAT, sigma)
    return Verdict(UNSAT, bound=maxlen)
