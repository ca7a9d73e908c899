"""Reduction of hash-colliding constraint solving to the free intruder.

Every h-rooted subterm of the input is put in a class; a class stands for
one hash value and is abstracted by a fresh constant ``#hj``.  Inside a
class the hashed arguments are either all equal or split in two groups
related by a single collision step.  A class the intruder computes himself
is hashed just before some deduction constraint: its argument ``c@j`` is
deduced there and ``#hj`` joins the knowledge from then on.

Each such choice gives an h-free system for :func:`solve_free`.  A free
solution is mapped back by reading ``#hj`` as ``h(c@j)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator

from .csolve import (
    ConstraintInputError,
    ConstraintSystem,
    _require_deterministic,
    solution_derivations,
    solve_free,
    verify_solution,
)
from .deduce import System
from .terms import (
    App,
    Const,
    Hash,
    Term,
    Var,
    apply_subst,
    cat,
    children,
    format_term,
    is_ground,
    rebuild,
    size,
    sort_key,
    subterm_values_of_set,
    syntactic_subterms,
)
from .theories import eq_modulo_h, normalize
from .wordunify import SAT, UNKNOWN, UNSAT, Verdict


@dataclass(frozen=True)
class Limits:
    max_k: int | None = None
    max_branches: int = 100_000
    bound: int = 6
    max_nodes: int = 20_000
    collisions: bool = True
    free_classes: int = 0


@dataclass
class ReductionBranch:
    index: int
    k: int
    classes: tuple  # tuple of tuples of h-rooted terms (empty for a free class)
    hashed: tuple  # ((class, slot), ...) in insertion order
    sides: tuple  # per class: (P args, Q args, orientation, c side)
    cases: tuple  # ((h(m), h(m'), case), ...)
    system: ConstraintSystem  # the h-free system
    input_terms: tuple = ()
    input_vars: int = 0

    @property
    def fingerprint(self) -> str:
        return json.dumps(self.system.to_json(), sort_keys=True)

    def class_const(self, j: int) -> Const:
        return Const(f"#h{j}")

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "k": self.k,
            "classes": [[format_term(t) for t in cl] for cl in self.classes],
            "hashed": [
                {"class": j + 1, "before_constraint": slot} for j, slot in self.hashed
            ],
            "cases": [
                {"lhs": format_term(a), "rhs": format_term(b), "case": c}
                for a, b, c in self.cases
            ],
            "system": self.system.to_json(),
        }


class PreconditionError(ConstraintInputError):
    pass


def hash_subterms(c: ConstraintSystem) -> list:
    out: set = set()
    for t in c.terms():
        out |= {u for u in syntactic_subterms(normalize(t)) if isinstance(u, Hash)}
    return sorted(out, key=lambda t: (size(t), sort_key(t)))


def check_precondition(c: ConstraintSystem) -> None:
    _require_deterministic(c)
    for t in c.terms():
        for u in syntactic_subterms(t):
            if isinstance(u, App):
                raise PreconditionError(
                    f"f/g-rooted term not allowed in the input: {format_term(u)}"
                )


def proposition_shadok_filter(branch: ReductionBranch) -> bool:
    """Keep a branch only if its classes fit the available hash-value slots."""
    slots = len(branch.input_terms) + branch.input_vars
    return branch.k <= slots


# -- enumeration helpers ------------------------------------------------------------


def _partitions(n: int, forbidden_pairs: set, forced: list) -> Iterator[tuple]:
    """Restricted growth strings honouring forced merges and forbidden pairs."""
    rgs = [0] * n

    def ok(i):
        for j in range(i):
            if rgs[j] == rgs[i] and ((j, i) in forbidden_pairs):
                return False
            if rgs[j] != rgs[i] and (j, i) in forced:
                return False
        return True

    def rec(i, m):
        if i == n:
            yield tuple(rgs)
            return
        for b in range(m + 1):
            rgs[i] = b
            if ok(i):
                yield from rec(i + 1, max(m, b + 1))

    if n == 0:
        yield ()
        return
    yield from rec(0, 0)


def _side_options(args: list, hashed: bool, collisions: bool) -> list:
    """Ways the arguments of one class can be E_h-equal."""
    opts = [(tuple(args), (), None, "P")]
    if not collisions:
        return opts
    if len(args) == 1 and hashed:
        opts.append((tuple(args), (), "fg", "Q"))
        opts.append((tuple(args), (), "gf", "Q"))
        return opts
    first, rest = args[0], args[1:]
    for mask in range(2 ** len(rest)):
        P = [first] + [a for i, a in enumerate(rest) if not mask >> i & 1]
        Q = [a for i, a in enumerate(rest) if mask >> i & 1]
        if not Q:
            continue
        for orient in ("fg", "gf"):
            for cside in ("P", "Q") if hashed else ("P",):
                opts.append((tuple(P), tuple(Q), orient, cside))
    return opts


def _abstract(t: Term, amap: dict) -> Term:
    if t in amap:
        return amap[t]
    kids = children(t)
    if not kids:
        return t
    return rebuild(t, [_abstract(k, amap) for k in kids])


def _slot_orders(hashed: dict, n: int) -> Iterator[tuple]:
    """All insertion sequences: classes by slot, every order within a slot."""
    by_slot = [sorted(j for j, s in hashed.items() if s == p) for p in range(1, n + 1)]
    for perms in itertools.product(*(itertools.permutations(g) for g in by_slot)):
        seq = []
        for p, perm in enumerate(perms, start=1):
            seq.extend((j, p) for j in perm)
        yield tuple(seq)


# -- Algorithm ----------------------------------------------------------------------


def _prepare(c: ConstraintSystem, classes: list):
    """Abstraction of the input for one class partition (shared by its branches)."""
    amap = {t: Const(f"#h{j}") for j, cl in enumerate(classes, 1) for t in cl}
    eqs = [(_abstract(l, amap), _abstract(r, amap)) for l, r in c.S]
    Eas = [[_abstract(t, amap) for t in E] for E, _ in c.constraints]
    return amap, eqs, Eas


def _build(c: ConstraintSystem, prep, classes: list, seq: tuple, sides: list):
    amap, eqs, Eas = prep
    eqs = list(eqs)
    cases = []
    for j, (cl, (P, Q, orient, cside)) in enumerate(zip(classes, sides), start=1):
        cj = Var(f"c@{j}")
        Pa = [_abstract(a, amap) for a in P]
        Qa = [_abstract(a, amap) for a in Q]
        for grp in (Pa, Qa):
            for a in grp[1:]:
                eqs.append((grp[0], a))
        rep_q = Qa[0] if Qa else None
        if orient:
            X = tuple(Var(f"{n}@{j}") for n in ("x1", "x2", "y1", "y2"))
            fword = cat(X[0], App("f", X), X[1])
            gword = cat(X[2], App("g", X), X[3])
            fw, gw = (fword, gword) if orient == "fg" else (gword, fword)
            eqs.append((Pa[0], fw))
            if rep_q is not None:
                eqs.append((rep_q, gw))
            else:
                rep_q = gw
        eqs.append((cj, Pa[0] if cside == "P" else rep_q))
        # Step-6 label of every pair of h-terms in the class
        owner = {}
        for t in cl:
            owner[t] = "P" if t.arg in P else "Q"
        for a, b in itertools.combinations(cl, 2):
            if owner[a] == owner[b]:
                case = "same"
            elif (owner[a] == "P") == (orient == "fg"):
                case = "collision"
            else:
                case = "collision-sym"
            cases.append((a, b, case))
    constraints = []
    added: list = []
    pos = 0
    for i, ((_, v), Ea) in enumerate(zip(c.constraints, Eas), start=1):
        while pos < len(seq) and seq[pos][1] == i:
            j = seq[pos][0] + 1
            constraints.append((Ea + added, Var(f"c@{j}")))
            added = added + [Const(f"#h{j}")]
            pos += 1
        constraints.append((Ea + added, v))
    eqs = [(normalize(l), normalize(r)) for l, r in eqs if normalize(l) != normalize(r)]
    order = [(a, b) for a, b in c.order.pairs]
    free = ConstraintSystem.build(constraints, eqs, order)
    return free, tuple(cases)


def enumerate_reductions(c: ConstraintSystem, limits: Limits = Limits()) -> Iterator[ReductionBranch]:
    """All branches in a fixed order: k, classes, hashed classes, sides.

    Raises :class:`PreconditionError` for f/g-rooted input terms.  Stops after
    ``limits.max_branches`` distinct branches.
    """
    check_precondition(c)
    T = hash_subterms(c)
    n = len(c.constraints)
    nvars = len(c.variables())
    max_k = limits.max_k
    if max_k is None:
        max_k = len(subterm_values_of_set(c.terms()))
    index = 0
    seen: set = set()

    forbidden = set()
    for i, j in itertools.combinations(range(len(T)), 2):
        a, b = T[i], T[j]
        if a in syntactic_subterms(b) or b in syntactic_subterms(a):
            forbidden.add((i, j))
        elif is_ground(a) and is_ground(b) and not eq_modulo_h(a, b):
            forbidden.add((i, j))
    root = list(range(len(T)))

    def find(i):
        while root[i] != i:
            i = root[i]
        return i

    for l, r in c.S:
        if isinstance(l, Hash) and isinstance(r, Hash):
            root[find(T.index(l))] = find(T.index(r))
    forced = {
        (i, j) for i, j in itertools.combinations(range(len(T)), 2) if find(i) == find(j)
    }

    parts = sorted(_partitions(len(T), forbidden, forced), key=lambda r: (max(r, default=-1) + 1, r))
    for rgs in parts:
        kmem = max(rgs, default=-1) + 1
        for extra in range(limits.free_classes + 1):
            k = kmem + extra
            if k > max_k:
                continue
            classes = [tuple(T[i] for i in range(len(T)) if rgs[i] == b) for b in range(kmem)]
            classes += [()] * extra
            prep = _prepare(c, classes)
            # free classes only matter when the intruder hashes them
            hash_opts = [[None] + list(range(1, n + 1)) if cl else list(range(1, n + 1)) for cl in classes]
            for choice in itertools.product(*hash_opts):
                hashed = {j: s for j, s in enumerate(choice) if s is not None}
                for seq in _slot_orders(hashed, n):
                    per_class = []
                    for j, cl in enumerate(classes):
                        args = sorted({t.arg for t in cl}, key=sort_key)
                        if not cl:
                            per_class.append([((), (), None, "P")])
                        else:
                            per_class.append(_side_options(args, j in hashed, limits.collisions))
                    for sides in itertools.product(*per_class):
                        sides = [_free_class_side(s, j) for j, s in enumerate(sides)]
                        free, cases = _build(c, prep, classes, seq, sides)
                        br = ReductionBranch(
                            index, k, tuple(classes), seq, tuple(sides), cases, free,
                            tuple(T), nvars,
                        )
                        if not proposition_shadok_filter(br):
                            continue
                        fp = br.fingerprint
                        if fp in seen:
                            continue
                        seen.add(fp)
                        if index >= limits.max_branches:
                            raise BranchLimitExceeded(limits.max_branches)
                        yield br
                        index += 1


def _free_class_side(side, j):
    P, Q, orient, cside = side
    if not P:
        # a class with no member: its argument is an unconstrained word
        return ((Var(f"w@{j + 1}"),), (), None, "P")
    return side


class BranchLimitExceeded(Exception):
    pass


@dataclass
class AttackTrace:
    branch: ReductionBranch
    sigma: dict
    derivations: list

    def uses_collision(self) -> bool:
        return any(d.uses_collision() for d in self.derivations)

    def to_json(self) -> dict:
        return {
            "branch": self.branch.index,
            "cases": [
                {"lhs": format_term(a), "rhs": format_term(b), "case": cs}
                for a, b, cs in self.branch.cases
            ],
            "substitution": {
                format_term(x): format_term(v)
                for x, v in sorted(self.sigma.items(), key=lambda kv: sort_key(kv[0]))
            },
            "derivations": [d.to_json() for d in self.derivations],
        }


def concretize(sigma_free: dict, k: int) -> dict:
    """Read every ``#hj`` of a free solution back as ``h(c@j sigma)``."""
    memo: dict = {}

    def value(j, stack=()):
        if j in memo:
            return memo[j]
        if j in stack:
            raise ValueError("cyclic hash classes")
        arg = sigma_free.get(Var(f"c@{j}"))
        if arg is None:
            raise ValueError(f"class {j} has no argument")
        memo[j] = Hash(conc(arg, stack + (j,)))
        return memo[j]

    def conc(t, stack=()):
        if isinstance(t, Const) and t.name.startswith("#h"):
            return value(int(t.name[2:]), stack)
        kids = children(t)
        if not kids:
            return t
        return rebuild(t, [conc(u, stack) for u in kids])

    return {x: normalize(conc(v)) for x, v in sigma_free.items()}


def solve_h(c: ConstraintSystem, limits: Limits = Limits()) -> Verdict:
    """Search the reduction branches in order; the first verified solution wins."""
    memo: dict = {}
    unknown = False
    try:
        for br in enumerate_reductions(c, limits):
            fp = br.fingerprint
            if fp not in memo:
                memo[fp] = solve_free(br.system, limits.bound, limits.max_nodes)
            v = memo[fp]
            if v.unknown:
                unknown = True
            if not v.sat:
                continue
            try:
                full = concretize(v.witness, br.k)
            except ValueError:
                continue
            sigma = {x: full.get(x, apply_subst(full, x)) for x in c.variables()}
            if not verify_solution(c, sigma, System.H):
                continue
            derivs = solution_derivations(c, sigma, System.H)
            trace = AttackTrace(br, sigma, derivs)
            return Verdict(SAT, dict(sorted(sigma.items(), key=lambda kv: sort_key(kv[0]))), extra=trace)
    except BranchLimitExceeded:
        return Verdict(UNKNOWN, bound=limits.max_branches)
    if unknown:
        return Verdict(UNKNOWN, bound=limits.bound)
    return Verdict(UNSAT)
