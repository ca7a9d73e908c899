"""Randomized property checks shared by the lemma tests and the acceptance run.

Each check returns ``(instances, problems)``; an empty problem list means the
property held on every generated instance.
"""

from __future__ import annotations

from hashintruder.csolve import parse_constraints
from hashintruder.deduce import System, closure_bfs, derivable, relevant_universe
from hashintruder.reduction import Limits, enumerate_reductions
from hashintruder.terms import (
    C_MIN,
    EPS,
    App,
    Concat,
    Hash,
    Var,
    cat,
    contains_symbol,
    letters,
    sig_of,
    subterm_values,
    syntactic_subterms,
)
from hashintruder.theories import collision_partner, eq_modulo_h, h_canon, normalize
from hashintruder.wordunify import (
    OrderingConstraint,
    UnificationSystem,
    brute_force_unify,
    satisfies,
    solve_au_lcr,
)

from oracles import A, B, C, rand_collision, rand_raw, rand_word, reduce_case, rng_for

CONSTS = [A, B, C]


# -- derivability versus the closure oracle ----------------------------------------


def _blockish(rng, sym=None):
    return App(sym or rng.choice("fg"), tuple(rand_word(rng, CONSTS, 1) for _ in range(4)))


def derivability_instance(rng, system: System):
    """<= 3 words over <= 3 letters, length <= 4."""
    alpha = list(CONSTS)
    if system is not System.AU:
        alpha.append(_blockish(rng))
    if system is System.H:
        alpha.append(Hash(rand_word(rng, CONSTS, 2)))
    E = [rand_word(rng, alpha, 4, 1) for _ in range(rng.randint(1, 3))]
    goal = rand_word(rng, alpha, 4)
    r = rng.random()
    if system is System.FREE and r < 0.3:
        goal = cat(rand_word(rng, CONSTS, 1), App(rng.choice("fg"), tuple(rng.choice(alpha + [EPS]) for _ in range(4))))
    if system is System.H:
        if r < 0.35:
            # a word with a collision shape, and a goal hashing its partner
            m, m2 = rand_collision(rng, CONSTS)
            E[rng.randrange(len(E))] = Hash(m) if rng.random() < 0.5 else m
            goal = cat(rand_word(rng, CONSTS, 1), Hash(m2))
        elif r < 0.55:
            goal = Hash(goal)
    return E, goal


def check_derivability(n_per_system: int, seed: int = 0):
    count, problems = 0, []
    for system in (System.AU, System.FREE, System.H):
        rng = rng_for(f"crit3-{system.value}", seed)
        key = h_canon if system is System.H else normalize
        for _ in range(n_per_system):
            E, goal = derivability_instance(rng, system)
            clos = closure_bfs(E, None, system, universe=relevant_universe(E, goal, system))
            d = derivable(E, goal, system)
            count += 1
            if (d is not None) != (key(goal) in clos):
                problems.append((system.value, E, goal))
            elif d is not None and not d.replay():
                problems.append(("replay", E, goal))
    return count, problems


# -- word unification versus brute force ---------------------------------------------


def unify_instance(rng):
    vars_ = [Var("x"), Var("y"), Var("z")][: rng.randint(1, 3)]
    alpha = CONSTS[: rng.randint(1, 3)]
    eqs = [
        (rand_word(rng, vars_ + alpha, 3, 1), rand_word(rng, vars_ + alpha, 3))
        for _ in range(rng.randint(1, 2))
    ]
    order = [(rng.choice(vars_), rng.choice(alpha))] if rng.random() < 0.5 else []
    return UnificationSystem.of(eqs), OrderingConstraint.of(order), alpha


def check_unify(n: int, seed: int = 0):
    """Returns (instances, contradictions, unknown count)."""
    rng = rng_for("crit4", seed)
    problems, unknown = [], 0
    for _ in range(n):
        s, o, alpha = unify_instance(rng)
        v = solve_au_lcr(s, o)
        ref = brute_force_unify(s, o, alpha, 3)
        if v.sat and not satisfies(s, o, v.witness):
            problems.append(("bad witness", s, o))
        if v.unsat and ref.sat:
            problems.append(("UNSAT but oracle found", s, o, ref.witness))
        unknown += v.unknown
    return n, problems, unknown


# -- lemma properties -----------------------------------------------------------------


def lemma_normal(n: int, seed: int = 0):
    """A signature-1 term keeps signature 1 in AU and E_h normal form."""
    rng = rng_for("lemma-normal", seed)
    problems = []
    for _ in range(n):
        t = Hash(rand_raw(rng, CONSTS, 4))
        assert sig_of(t) == 1
        for nf in (normalize(t), h_canon(normalize(t))):
            if sig_of(nf) != 1:
                problems.append(t)
    return n, problems


def lemma_preservation(n: int, seed: int = 0):
    """With normalized factors, Sub(t) minus {eps, t} survives normalization."""
    rng = rng_for("lemma-preservation", seed)
    problems = []
    for _ in range(n):
        pieces = [normalize(rand_raw(rng, CONSTS, 3)) for _ in range(rng.randint(2, 4))]
        # a raw bracketing of normalized factors, possibly under h
        t = pieces[0]
        for p in pieces[1:]:
            t = Concat((t, p)) if rng.random() < 0.5 else Concat((p, t))
        if rng.random() < 0.5:
            t = Hash(t)
        before = subterm_values(t) - {EPS, t}
        after = subterm_values(normalize(t))
        if not before <= after:
            problems.append((t, before - after))
    return n, problems


def lemma_reduce(n: int, seed: int = 0):
    """h(m) = h(m') iff m = m' or exactly one collision case matches."""
    rng = rng_for("lemma-reduce", seed)
    problems = []
    for i in range(n):
        m, m2 = rand_collision(rng, CONSTS, maxlen=2)
        if i % 3 == 1:
            m2 = cat(m2, rng.choice(CONSTS))  # near miss
        elif i % 3 == 2:
            m2 = m
        hits = reduce_case(m, m2)
        eq = eq_modulo_h(Hash(m), Hash(m2))
        if eq != bool(hits):
            problems.append((m, m2, hits))
        elif eq and len(hits) != 1:
            problems.append((m, m2, hits))
    return n, problems


def lemma_fcons(n: int, seed: int = 0):
    """A derivable f/g-term that is no subterm of E has derivable arguments."""
    rng = rng_for("lemma-fcons", seed)
    problems, relevant = [], 0
    for _ in range(n):
        alpha = CONSTS + [_blockish(rng)]
        E = [rand_word(rng, alpha, 3, 1) for _ in range(rng.randint(1, 3))]
        args = tuple(rng.choice(alpha + [EPS, cat(A, B)]) for _ in range(4))
        t = App(rng.choice("fg"), args)
        universe = relevant_universe(E, t, System.FREE)
        clos = closure_bfs(E, None, System.FREE, universe=universe)
        subs = set().union(*(syntactic_subterms(e) for e in E))
        if t in clos and t not in subs:
            relevant += 1
            if not all(normalize(a) in clos for a in args):
                problems.append((E, t))
    if relevant < n // 10:
        problems.append(("too few relevant instances", relevant))
    return n, problems


def lemma_hash1(n: int, seed: int = 0):
    """With f/g-free knowledge, m1 and its collision partner m2 are equally derivable."""
    rng = rng_for("lemma-hash1", seed)
    problems, both = [], 0
    for _ in range(n):
        E = [rand_word(rng, CONSTS[:2], 3, 1) for _ in range(rng.randint(1, 2))]
        m1, m2 = rand_collision(rng, CONSTS, maxlen=2)
        if not eq_modulo_h(Hash(m1), Hash(m2)):
            problems.append(("generator", m1, m2))
            continue
        d1 = m1 in closure_bfs(E, None, System.FREE, universe=relevant_universe(E, m1, System.FREE))
        d2 = m2 in closure_bfs(E, None, System.FREE, universe=relevant_universe(E, m2, System.FREE))
        both += d1 and d2
        if d1 != d2:
            problems.append((E, m1, m2))
    if both < n // 20:
        problems.append(("too few derivable pairs", both))
    return n, problems


def _one_free_step(rng, E):
    """A random conclusion of one I_free rule applied to E."""
    k = rng.random()
    if k < 0.3:
        return cat(rng.choice(E), rng.choice(E))
    if k < 0.6:
        ls = letters(rng.choice(E))
        cut = rng.randint(0, len(ls))
        return cat(*ls[:cut]) if rng.random() < 0.5 else cat(*ls[cut:])
    return App(rng.choice("fg"), tuple(rng.choice(E + [EPS]) for _ in range(4)))


def lemma_hyp1(n: int, seed: int = 0):
    """E -S0-> E,r -S1-> E,r,t with r outside Sub(E,t) and the special constants
    implies t follows from E by S0 steps and then one S1 step."""
    rng = rng_for("lemma-hyp1", seed)
    problems, relevant = [], 0
    for _ in range(n):
        E = [rand_word(rng, CONSTS + [_blockish(rng)], 3, 1) for _ in range(rng.randint(1, 2))]
        r = _one_free_step(rng, E)
        src = rng.choice(E + [r])
        t = Hash(src)
        if rng.random() < 0.5:
            other = collision_partner(normalize(src))
            if other is not None:
                t = Hash(other)
        subs = set().union(*(subterm_values(u) for u in E + [t]))
        if normalize(r) in subs or normalize(r) in (EPS, C_MIN):
            continue
        relevant += 1
        # S0 closure of E, then a single h step (modulo E_h)
        sources = [t.arg]
        partner = collision_partner(h_canon(t.arg))
        if partner is not None:
            sources.append(partner)
        ok = any(derivable(E, m, System.FREE) is not None for m in sources if not contains_symbol(m, "h"))
        if not ok:
            problems.append((E, r, t))
    if relevant < n // 5:
        problems.append(("too few relevant instances", relevant))
    return n, problems


LEMMAS = {
    "normal": lemma_normal,
    "preservation": lemma_preservation,
    "reduce": lemma_reduce,
    "fcons": lemma_fcons,
    "hash1": lemma_hash1,
    "hyp1": lemma_hyp1,
}


# -- structural checks over the regression corpus -------------------------------------


def corpus_structure(path, limits: Limits):
    """Problems found in the reduction branches of one constraint file."""
    c = parse_constraints(path.read_text())
    problems = []
    has_h = any(contains_symbol(t, "h") for t in c.terms())
    hash_eqs = [
        (l, r) for l, r in c.S if isinstance(l, Hash) and isinstance(r, Hash)
    ]
    labels = {eq: set() for eq in hash_eqs}
    count = 0
    for br in enumerate_reductions(c, limits):
        count += 1
        if any(contains_symbol(t, "h") for t in br.system.terms()):
            problems.append(f"branch {br.index} keeps an h symbol")
        if br.k == 0 and br.system != c:
            problems.append("k=0 branch differs from the input")
        for a, b, case in br.cases:
            for eq in hash_eqs:
                if {a, b} == set(eq):
                    labels[eq].add(case)
    if not has_h and count != 1:
        problems.append(f"h-free input gave {count} branches")
    want = {"same", "collision", "collision-sym"} if limits.collisions else {"same"}
    for eq, seen in labels.items():
        if seen != want:
            problems.append(f"case labels {sorted(seen)} for {eq}")
    return count, problems
