"""Ground intruder deduction for the five intruder systems.

Words are read as sequences of letters (atoms and f/g/h-rooted blocks).
Prefix/suffix extraction plus concatenation make every contiguous run of
letters of a known word available, so a goal is derivable when it can be
cut into such runs and blocks that the system can build on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Iterable

from .terms import (
    EPS,
    App,
    Hash,
    Term,
    cat,
    children,
    contains_symbol,
    format_term,
    is_ground,
    is_word,
    letters,
    size,
    sort_key,
)
from .theories import collision_partner, eq_modulo_au, eq_modulo_h, h_canon, normalize


class System(Enum):
    AU = "au"
    F = "f"
    G = "g"
    FREE = "free"
    H = "h"

    @property
    def has_words(self) -> bool:
        return self in (System.AU, System.FREE, System.H)

    @property
    def symbols(self) -> tuple:
        return {
            System.AU: (),
            System.F: ("f",),
            System.G: ("g",),
            System.FREE: ("f", "g"),
            System.H: ("f", "g"),
        }[self]


@dataclass(frozen=True)
class Step:
    rule: str
    premises: tuple
    derived: Term
    modulo: str | None = None

    def to_json(self) -> dict:
        out = {
            "rule": self.rule,
            "premises": [format_term(p) for p in self.premises],
            "derived": format_term(self.derived),
        }
        if self.modulo:
            out["modulo"] = self.modulo
        return out


@dataclass
class Derivation:
    system: System
    initial: tuple
    goal: Term
    steps: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "goal": format_term(self.goal),
            "steps": [s.to_json() for s in self.steps],
        }

    def uses_collision(self) -> bool:
        return any(s.modulo == "HC" for s in self.steps)

    def replay(self) -> bool:
        """Re-check every step as a rule instance over the available terms."""
        eq = eq_modulo_h if self.system is System.H else eq_modulo_au
        have = [normalize(t) for t in self.initial]

        def available(t):
            return any(eq(t, u) for u in have)

        for st in self.steps:
            if not all(available(p) for p in st.premises):
                return False
            if not _valid_step(st, self.system, eq):
                return False
            have.append(normalize(st.derived))
        return available(self.goal)


def _valid_step(st: Step, system: System, eq) -> bool:
    d, ps = st.derived, st.premises
    if st.rule == "eps":
        return system.has_words and not ps and d == EPS
    if st.rule == "concat":
        return system.has_words and len(ps) == 2 and eq(d, cat(*ps))
    if st.rule in ("prefix", "suffix"):
        if not system.has_words or len(ps) != 1:
            return False
        ls = letters(normalize(ps[0]))
        cuts = range(len(ls) + 1)
        if st.rule == "prefix":
            return any(eq(d, cat(*ls[:k])) for k in cuts)
        return any(eq(d, cat(*ls[k:])) for k in cuts)
    if st.rule in ("f", "g"):
        return (
            st.rule in system.symbols
            and len(ps) == 4
            and eq(d, App(st.rule, tuple(ps)))
        )
    if st.rule == "h":
        return system is System.H and len(ps) == 1 and eq(d, Hash(ps[0]))
    return False


class _Deriver:
    def __init__(self, E: Iterable[Term], system: System):
        self.system = system
        self.E = sorted({normalize(t) for t in E}, key=sort_key)
        for t in self.E:
            if not is_ground(t):
                raise ValueError(f"knowledge must be ground: {format_term(t)}")
        self.key = h_canon if system is System.H else (lambda t: t)
        self.words = [(t, letters(t), tuple(self.key(u) for u in letters(t))) for t in self.E]
        self.whole = {self.key(t) for t in self.E}
        self.letter_keys = {k for _, _, ks in self.words for k in ks}
        self.memo: dict = {}
        self.busy: set = set()
        self.steps: list = []
        self.have: set = set(self.whole)

    # -- feasibility -------------------------------------------------------

    def can(self, t: Term) -> bool:
        k = self.key(t)
        if k in self.memo:
            return self.memo[k]
        if k in self.busy:
            return False
        self.busy.add(k)
        if self.system.has_words:
            res = all(self._letter_ok(u) for u in letters(t))
        else:
            res = k in self.whole or self._composable(t)
        self.busy.discard(k)
        self.memo[k] = res
        return res

    def _letter_ok(self, u: Term) -> bool:
        return self.key(u) in self.letter_keys or self._composable(u)

    def _composable(self, u: Term) -> bool:
        if isinstance(u, App):
            return u.sym in self.system.symbols and all(self.can(a) for a in u.args)
        if isinstance(u, Hash) and self.system is System.H:
            return any(self.can(m) for m in self._hash_sources(u))
        return False

    def _hash_sources(self, u: Hash):
        yield u.arg
        other = collision_partner(h_canon(u.arg))
        if other is not None:
            yield other

    # -- trace emission ------------------------------------------------------

    def _add(self, rule, premises, derived, modulo=None):
        k = self.key(derived)
        if k in self.have:
            return
        self.have.add(k)
        self.steps.append(Step(rule, tuple(premises), derived, modulo))

    def _mod(self, a: Term, b: Term):
        return None if normalize(a) == normalize(b) else "HC"

    def emit(self, t: Term) -> None:
        if self.key(t) in self.have:
            return
        if not self.system.has_words:
            self._emit_block(t)
            return
        ts = letters(t)
        if not ts:
            self._add("eps", (), EPS)
            return
        segs = self._plan(ts)
        pieces = []
        for seg in segs:
            pieces.append(self._emit_segment(ts, seg))
        acc = pieces[0]
        for p in pieces[1:]:
            nxt = cat(acc, p)
            self._add("concat", (acc, p), nxt)
            acc = nxt

    def _plan(self, ts):
        """Fewest segments covering ts; longest, then leftmost, segment first."""
        ks = [self.key(u) for u in ts]
        n = len(ts)
        best: list = [None] * (n + 1)
        best[n] = (0, None)
        for i in range(n - 1, -1, -1):
            cands = []
            for e_idx, (_, ws, wk) in enumerate(self.words):
                for s in range(len(wk)):
                    length = 0
                    while i + length < n and s + length < len(wk) and wk[s + length] == ks[i + length]:
                        length += 1
                    if length:
                        cands.append((length, e_idx, s))
            choice = None
            for length, e_idx, s in sorted(cands, key=lambda c: (-c[0], c[1], c[2])):
                for L in range(length, 0, -1):
                    if best[i + L] is not None:
                        cost = best[i + L][0] + 1
                        if choice is None or cost < choice[0]:
                            choice = (cost, ("seg", e_idx, s, L))
            if self._composable(ts[i]) and best[i + 1] is not None:
                cost = best[i + 1][0] + 1
                if choice is None or cost < choice[0]:
                    choice = (cost, ("block", i))
            best[i] = choice
        out, i = [], 0
        while i < n:
            step = best[i][1]
            out.append((i,) + step)
            i += step[3] if step[0] == "seg" else 1
        return out

    def _emit_segment(self, ts, seg) -> Term:
        i, kind = seg[0], seg[1]
        if kind == "block":
            self._emit_block(ts[i])
            return ts[i]
        _, _, e_idx, s, L = seg
        elem, ws, _ = self.words[e_idx]
        target = cat(*ts[i : i + L])
        mod = self._mod(cat(*ws[s : s + L]), target)
        if s == 0 and L == len(ws) and mod is None:
            return elem
        cur = elem
        if s > 0:
            suf = cat(*ws[s:])
            if s + L == len(ws):
                self._add("suffix", (elem,), target, mod)
                return target
            self._add("suffix", (elem,), suf)
            cur = suf
        self._add("prefix", (cur,), target, mod)
        return target

    def _emit_block(self, u: Term) -> None:
        if self.key(u) in self.have:
            return
        if self.key(u) in self.letter_keys and self.system.has_words:
            self.emit(u)
            return
        if isinstance(u, App):
            for a in u.args:
                self.emit(a)
            self._add(u.sym, u.args, u)
            return
        for m in self._hash_sources(u):
            if self.can(m):
                self.emit(m)
                self._add("h", (m,), u, self._mod(Hash(m), u))
                return
        raise AssertionError(f"cannot emit {format_term(u)}")


def _derive(E, t: Term, system: System) -> Derivation | None:
    if not is_ground(t):
        raise ValueError(f"goal must be ground: {format_term(t)}")
    t = normalize(t)
    d = _Deriver(E, system)
    if not d.can(t):
        return None
    d.emit(t)
    return Derivation(system, tuple(d.E), t, d.steps)


def _check_words(ts):
    for t in ts:
        if not is_word(t):
            raise ValueError(f"I_AU works on h/f/g-free words, got {format_term(t)}")


def derivable_au(E: Iterable[Term], t: Term) -> Derivation | None:
    E = list(E)
    _check_words(E + [t])
    return _derive(E, t, System.AU)


def derivable_compose(E: Iterable[Term], t: Term, sym: str) -> Derivation | None:
    if sym not in ("f", "g"):
        raise ValueError("sym must be 'f' or 'g'")
    return _derive(E, t, System.F if sym == "f" else System.G)


def derivable_free(E: Iterable[Term], t: Term) -> Derivation | None:
    E = list(E)
    for u in E + [t]:
        if contains_symbol(u, "h"):
            raise ValueError(f"I_free terms are h-free, got {format_term(u)}")
    return _derive(E, t, System.FREE)


def derivable_h(E: Iterable[Term], t: Term) -> Derivation | None:
    return _derive(E, t, System.H)


def derivable(E: Iterable[Term], t: Term, system: System) -> Derivation | None:
    if system is System.AU:
        return derivable_au(E, t)
    if system in (System.F, System.G):
        return derivable_compose(E, t, system.value)
    if system is System.FREE:
        return derivable_free(E, t)
    return derivable_h(E, t)


# -- bounded closure oracle --------------------------------------------------------


def _subwords(t: Term):
    ls = letters(t)
    for i in range(len(ls) + 1):
        for j in range(i, len(ls) + 1):
            yield cat(*ls[i:j])


def relevant_universe(E: Iterable[Term], goal: Term, system: System) -> set:
    """Terms a shortest derivation of ``goal`` can mention.

    Contiguous subwords of every syntactic subterm of E and the goal, closed
    (for I_h) under collision partners of hashed words.
    """
    key = h_canon if system is System.H else normalize
    todo = [normalize(t) for t in list(E) + [goal]]
    seen: set = set()
    out: set = set()
    while todo:
        t = todo.pop()
        if t in seen:
            continue
        seen.add(t)
        for w in _subwords(t) if system.has_words else [t]:
            out.add(key(w))
        for c in children(t):
            todo.append(c)
        if isinstance(t, Hash) and system is System.H:
            other = collision_partner(h_canon(t.arg))
            if other is not None:
                todo.append(other)
    return out


def closure_bfs(
    E: Iterable[Term],
    depth: int | None,
    system: System = System.AU,
    universe: set | None = None,
    size_cap: int | None = None,
) -> set:
    """Everything derivable from E within ``depth`` rounds of rule application.

    Each round applies every rule to every combination of known terms.  Either
    a finite ``universe`` (conclusions outside it are discarded) or a
    ``size_cap`` keeps the rounds finite; ``depth=None`` iterates to a fixpoint.
    For I_h the returned terms are E_h-canonical representatives.
    """
    if universe is None and size_cap is None:
        raise ValueError("closure_bfs needs a universe or a size cap")
    key = h_canon if system is System.H else normalize
    known = {key(t) for t in E}

    def keep(t):
        if size_cap is not None and size(t) > size_cap:
            return False
        return universe is None or t in universe

    rounds = 0
    while depth is None or rounds < depth:
        rounds += 1
        new = set()
        if system.has_words:
            new.add(EPS)
            for w in known:
                ls = letters(w)
                for k in range(len(ls) + 1):
                    new.add(cat(*ls[:k]))
                    new.add(cat(*ls[k:]))
            if universe is None:
                for x, y in product(known, repeat=2):
                    new.add(cat(x, y))
            else:
                for u in universe:
                    ls = letters(u)
                    if any(
                        cat(*ls[:k]) in known and cat(*ls[k:]) in known
                        for k in range(1, len(ls))
                    ):
                        new.add(u)
        for sym in system.symbols:
            if universe is None:
                for args in product(sorted(known, key=sort_key), repeat=4):
                    new.add(App(sym, args))
            else:
                for u in universe:
                    if isinstance(u, App) and u.sym == sym and all(a in known for a in u.args):
                        new.add(u)
        if system is System.H:
            for x in known:
                new.add(Hash(x))
        new = {key(t) for t in new}
        new = {t for t in new if keep(t)} - known
        if not new:
            break
        known |= new
    return known
