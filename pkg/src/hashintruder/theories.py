"""Equality modulo AU and modulo E_h = AU + (HC); well-modedness of presentations.

(HC) is never oriented.  Under ``h`` a single collision step relates

    x1 . f(x1, x2, y1, y2) . x2   and   y1 . g(x1, x2, y1, y2) . y2

and nothing else, so every E_h class of an ``h``-term has at most two
AU-distinct arguments.  Equality is decided by matching that pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .terms import (
    EPS,
    App,
    Concat,
    Hash,
    HASH_TABLE,
    ModeTable,
    Term,
    Var,
    apply_subst,
    cat,
    children,
    constants,
    format_term,
    ill_moded_positions,
    is_ground,
    letters,
    rebuild,
    sort_key,
    variables,
)


@lru_cache(maxsize=1 << 16)
def normalize(t: Term) -> Term:
    """Canonical AU form (flat, eps-free concatenations); idempotent."""
    return apply_subst({}, t)


def eq_modulo_au(t1: Term, t2: Term) -> bool:
    return normalize(t1) == normalize(t2)


def _split_at_block(m: Term, sym: str):
    """Yield (prefix, block, suffix) for every top-level ``sym`` block of word m."""
    items = letters(m)
    for i, u in enumerate(items):
        if isinstance(u, App) and u.sym == sym and len(u.args) == 4:
            yield cat(*items[:i]), u, cat(*items[i + 1 :])


def collision_partner(m: Term) -> Term | None:
    """The other argument of the (HC) class of h(m), for canonical ground m.

    Returns None when m does not have a collision shape.  At most one block of
    a word can match the shape (a second match would make the block a strict
    subterm of itself), so the answer is unique.
    """
    for pre, blk, suf in _split_at_block(m, "f"):
        x1, x2, y1, y2 = blk.args
        if pre == x1 and suf == x2:
            return cat(y1, App("g", blk.args), y2)
    for pre, blk, suf in _split_at_block(m, "g"):
        x1, x2, y1, y2 = blk.args
        if pre == y1 and suf == y2:
            return cat(x1, App("f", blk.args), x2)
    return None


def h_canon(t: Term) -> Term:
    """Canonical representative of the E_h class of t (ground or not).

    Children are canonicalized first; an h-argument is then replaced by the
    smaller of itself and its collision partner.
    """
    kids = children(t)
    if not kids:
        return t
    t = rebuild(t, [h_canon(c) for c in kids])
    if isinstance(t, Hash):
        other = collision_partner(t.arg)
        if other is not None:
            other = h_canon(other)
            if sort_key(other) < sort_key(t.arg):
                return Hash(other)
    return t


def _collides(m: Term, m2: Term, eq) -> bool:
    for pre, blk, suf in _split_at_block(m, "f"):
        x1, x2, y1, y2 = blk.args
        if not (eq(pre, x1) and eq(suf, x2)):
            continue
        for pre2, blk2, suf2 in _split_at_block(m2, "g"):
            if all(eq(a, b) for a, b in zip(blk.args, blk2.args)) and eq(
                pre2, y1
            ) and eq(suf2, y2):
                return True
    return False


def eq_modulo_h(t1: Term, t2: Term) -> bool:
    """Decide t1 =_{E_h} t2 for ground terms."""
    for t in (t1, t2):
        if not is_ground(t):
            raise ValueError(f"eq_modulo_h expects ground terms: {format_term(t)}")
    return _eq_h(normalize(t1), normalize(t2))


def _eq_h(a: Term, b: Term) -> bool:
    if a == b:
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, Concat):
        return len(a.items) == len(b.items) and all(
            _eq_h(x, y) for x, y in zip(a.items, b.items)
        )
    if isinstance(a, App):
        return a.sym == b.sym and len(a.args) == len(b.args) and all(
            _eq_h(x, y) for x, y in zip(a.args, b.args)
        )
    if isinstance(a, Hash):
        return (
            _eq_h(a.arg, b.arg)
            or _collides(a.arg, b.arg, _eq_h)
            or _collides(b.arg, a.arg, _eq_h)
        )
    return False


# -- presentations ----------------------------------------------------------------


@dataclass(frozen=True)
class EquationalPresentation:
    name: str
    equations: tuple

    def __post_init__(self):
        for lhs, rhs in self.equations:
            if constants(lhs) or constants(rhs):
                raise ValueError(f"{self.name}: axioms may not contain free constants")
            if variables(lhs) != variables(rhs):
                raise ValueError(
                    f"{self.name}: irregular axiom {format_term(lhs)} = {format_term(rhs)}"
                )

    def __iter__(self):
        return iter(self.equations)


_x, _y, _z = Var("x"), Var("y"), Var("z")
_x1, _x2, _y1, _y2 = Var("x1"), Var("x2"), Var("y1"), Var("y2")

E_AU = EquationalPresentation(
    "AU",
    (
        (Concat((_x, Concat((_y, _z)))), Concat((Concat((_x, _y)), _z))),
        (Concat((_x, EPS)), _x),
        (Concat((EPS, _x)), _x),
    ),
)

HC = (
    Hash(Concat((_x1, App("f", (_x1, _x2, _y1, _y2)), _x2))),
    Hash(Concat((_y1, App("g", (_x1, _x2, _y1, _y2)), _y2))),
)

E_H = EquationalPresentation("E_h", E_AU.equations + (HC,))


def check_well_moded(p, m: ModeTable = HASH_TABLE) -> tuple[bool, list]:
    """Check every axiom side is well-moded and both sides share a signature.

    Returns (ok, violations); a violation is (equation index, side, position)
    with side in {"lhs", "rhs", "sig"}.
    """
    violations = []
    for k, (lhs, rhs) in enumerate(p):
        for side, t in (("lhs", lhs), ("rhs", rhs)):
            for pos in ill_moded_positions(t, m):
                violations.append((k, side, pos))
        if m.sig_of(lhs) != m.sig_of(rhs):
            violations.append((k, "sig", ()))
    return not violations, violations


def is_regular(p) -> bool:
    return all(variables(l) == variables(r) for l, r in p)
