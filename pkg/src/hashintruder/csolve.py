"""Deterministic constraint systems and their ordered satisfiability."""

from __future__ import annotations

from dataclasses import dataclass, field

from .deduce import System, derivable
from .terms import (
    C_MIN,
    EPS,
    App,
    Const,
    TermSyntaxError,
    Var,
    apply_subst,
    constants,
    contains_symbol,
    format_term,
    is_ground,
    is_word,
    letters,
    parse_term,
    sort_key,
    variables,
)
from .theories import eq_modulo_h, normalize
from .wordunify import (
    SAT,
    UNKNOWN,
    UNSAT,
    NielsenSearch,
    OrderingConstraint,
    UnificationSystem,
    Verdict,
    _ground_rest,
    _State,
    mgu,
    solve_au_lcr,
)


class ConstraintInputError(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintSystem:
    """E_1 |> v_1, ..., E_n |> v_n together with equations S and an order."""

    constraints: tuple = ()  # ((E_i as a tuple of terms), v_i)
    S: UnificationSystem = field(default_factory=UnificationSystem)
    order: OrderingConstraint = field(default_factory=OrderingConstraint)

    @classmethod
    def build(cls, constraints, eqs=(), order=()) -> "ConstraintSystem":
        cs = tuple(
            (tuple(sorted({normalize(t) for t in E}, key=sort_key)), v) for E, v in constraints
        )
        return cls(cs, UnificationSystem.of(eqs), OrderingConstraint.of(order))

    @property
    def targets(self) -> tuple:
        return tuple(v for _, v in self.constraints)

    def terms(self) -> list:
        out = []
        for E, v in self.constraints:
            out.extend(E)
            out.append(v)
        for l, r in self.S:
            out += [l, r]
        return out

    def variables(self) -> set:
        out: set = set()
        for t in self.terms():
            out |= variables(t)
        return out

    def constants(self) -> set:
        out: set = set()
        for t in self.terms():
            out |= constants(t)
        for a, b in self.order.pairs:
            out |= {x for x in (a, b) if isinstance(x, Const)}
        return out

    def to_text(self) -> str:
        lines, known = [], ()
        for E, v in self.constraints:
            new = [t for t in E if t not in known]
            if new:
                lines.append("knows: " + ", ".join(format_term(t) for t in new))
            known = E
            lines.append(f"deduce: {format_term(v)}")
        for l, r in self.S:
            lines.append(f"eq: {format_term(l)} = {format_term(r)}")
        for a, b in sorted(self.order.pairs, key=lambda p: (sort_key(p[0]), sort_key(p[1]))):
            lines.append(f"order: {format_term(a)} < {format_term(b)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "constraints": [
                {"knows": [format_term(t) for t in E], "deduce": format_term(v)}
                for E, v in self.constraints
            ],
            "equations": [[format_term(l), format_term(r)] for l, r in self.S],
            "order": sorted(
                [format_term(a), format_term(b)] for a, b in self.order.pairs
            ),
        }


@dataclass
class Solution:
    sigma: dict
    derivations: list


def check_deterministic(c: ConstraintSystem) -> tuple[bool, list]:
    problems = []
    earlier: set = set()
    prev: tuple = ()
    for i, (E, v) in enumerate(c.constraints, start=1):
        if not isinstance(v, Var):
            problems.append(f"constraint {i}: target {format_term(v)} is not a variable")
        if not set(prev) <= set(E):
            problems.append(f"constraint {i}: knowledge shrinks")
        for t in E:
            bad = variables(t) - earlier
            if bad:
                names = ", ".join(sorted(format_term(x) for x in bad))
                problems.append(f"constraint {i}: {names} not an earlier target")
        earlier.add(v)
        prev = E
    return not problems, problems


def _require_deterministic(c: ConstraintSystem):
    ok, problems = check_deterministic(c)
    if not ok:
        raise ConstraintInputError("non-deterministic system: " + "; ".join(problems))


# -- verification -----------------------------------------------------------------

_TAGS = {"au": System.AU, "f": System.F, "g": System.G, "free": System.FREE, "h": System.H}


def as_system(tag) -> System:
    if isinstance(tag, System):
        return tag
    try:
        return _TAGS[str(tag).lower()]
    except KeyError:
        raise ConstraintInputError(f"unknown theory {tag!r}") from None


def solution_derivations(c: ConstraintSystem, sigma: dict, tag) -> list | None:
    """Derivations of every v_i sigma from E_i sigma, or None if one fails."""
    system = as_system(tag)
    out = []
    for E, v in c.constraints:
        Es = [apply_subst(sigma, t) for t in E]
        goal = apply_subst(sigma, v)
        if not is_ground(goal) or not all(is_ground(t) for t in Es):
            return None
        try:
            d = derivable(Es, goal, system)
        except ValueError:
            return None
        if d is None or not d.replay():
            return None
        out.append(d)
    return out


def verify_solution(c: ConstraintSystem, sigma: dict, tag) -> bool:
    system = as_system(tag)
    for x in c.variables():
        if not is_ground(apply_subst(sigma, x)):
            return False
    if solution_derivations(c, sigma, system) is None:
        return False
    for l, r in c.S:
        a, b = apply_subst(sigma, l), apply_subst(sigma, r)
        ok = eq_modulo_h(a, b) if system is System.H else normalize(a) == normalize(b)
        if not ok:
            return False
    for x, cs in c.order.forbidden().items():
        if constants(apply_subst(sigma, x)) & cs:
            return False
    return True


def _finish(c: ConstraintSystem, sigma: dict, tag) -> Verdict:
    sigma = {x: normalize(apply_subst(sigma, x)) for x in sorted(c.variables(), key=sort_key)}
    derivs = solution_derivations(c, sigma, tag)
    if derivs is None or not verify_solution(c, sigma, tag):
        raise AssertionError("solver produced a witness that does not verify")
    return Verdict(SAT, sigma, extra=derivs)


# -- I_AU ---------------------------------------------------------------------------


def deduction_order(c: ConstraintSystem) -> OrderingConstraint:
    """v_i < c for every constant c of the system that does not occur in E_i."""
    allc = c.constants()
    pairs = set()
    for E, v in c.constraints:
        known: set = set()
        for t in E:
            known |= constants(t)
        pairs |= {(v, k) for k in allc - known}
    return OrderingConstraint.of(pairs)


def solve_au(c: ConstraintSystem, bound: int = 6, max_nodes: int = 20000) -> Verdict:
    _require_deterministic(c)
    for t in c.terms():
        if not is_word(t):
            raise ConstraintInputError(f"I_AU systems contain words only: {format_term(t)}")
    order = c.order.union(deduction_order(c))
    if not order.is_acyclic():
        return Verdict(UNSAT)
    v = solve_au_lcr(c.S, order, bound, max_nodes)
    if not v.sat:
        return v
    # targets outside S are unconstrained; eps is always derivable
    sigma = {x: v.witness.get(x, EPS) for x in c.variables()}
    return _finish(c, sigma, System.AU)


# -- I_f / I_g ----------------------------------------------------------------------


def solve_compose(c: ConstraintSystem, sym: str, max_steps: int = 100000) -> Verdict:
    """Constraint reduction for a composition-only intruder.

    A non-variable goal is either unified with a known term or, when rooted
    by ``sym``, replaced by its four arguments.  Targets left as variables are
    finally instantiated, in constraint order, by a known ground term.
    """
    _require_deterministic(c)
    if sym not in ("f", "g"):
        raise ConstraintInputError("sym must be f or g")
    for t in c.terms():
        if contains_symbol(t, ".") or contains_symbol(t, "h") or t == EPS:
            raise ConstraintInputError(f"only {sym}-terms allowed: {format_term(t)}")
    system = System.F if sym == "f" else System.G
    base = mgu(c.S.equations)
    if base is None:
        return Verdict(UNSAT)
    goals = [(E, v, i) for i, (E, v) in enumerate(c.constraints)]
    steps = [0]
    forbid = c.order.forbidden()

    def consistent(sigma):
        return all(not (constants(apply_subst(sigma, x)) & cs) for x, cs in forbid.items())

    def search(sigma, todo):
        steps[0] += 1
        if steps[0] > max_steps:
            raise _Exhausted
        if not consistent(sigma):
            return None
        for idx, (E, t, i) in enumerate(todo):
            Es = [apply_subst(sigma, e) for e in E]
            t = apply_subst(sigma, t)
            if isinstance(t, Var) or t in Es:
                continue
            rest = todo[:idx] + todo[idx + 1 :]
            for e in Es:
                if isinstance(e, Var):
                    continue
                m = mgu([(t, e)])
                if m is None:
                    continue
                s2 = _compose(sigma, m)
                if s2 is None:
                    continue
                r = search(s2, rest)
                if r is not None:
                    return r
            if isinstance(t, App) and t.sym == sym:
                r = search(sigma, rest + [(E, a, i) for a in t.args])
                if r is not None:
                    return r
            return None
        return ground(sigma)

    def ground(sigma):
        # targets in constraint order; E_i sigma is ground by then
        for E, v in c.constraints:
            x = apply_subst(sigma, v)
            if not isinstance(x, Var):
                continue
            Es = [apply_subst(sigma, e) for e in E]
            for e in sorted({e for e in Es if is_ground(e)}, key=sort_key):
                s2 = _compose(sigma, {x: e})
                if s2 is None or not consistent(s2):
                    continue
                r = search(s2, goals)
                if r is not None:
                    return r
            return None
        rest = {x: C_MIN for x in c.variables() if isinstance(apply_subst(sigma, x), Var)}
        full = _compose(sigma, rest)
        if full is not None and verify_solution(c, full, system):
            return full
        return None

    try:
        sigma = search(base, goals)
    except _Exhausted:
        return Verdict(UNKNOWN, bound=max_steps)
    if sigma is None:
        return Verdict(UNSAT)
    return _finish(c, sigma, system)


class _Exhausted(Exception):
    pass


def _compose(sigma: dict, m: dict) -> dict | None:
    out = {x: apply_subst(m, v) for x, v in sigma.items()}
    for x, v in m.items():
        if x in out and out[x] != v:
            return None
        out[x] = v
    for x, v in out.items():
        if x in variables(v):
            return None
    return out


# -- I_free -------------------------------------------------------------------------


class _FreeSearch(NielsenSearch):
    """Nielsen search whose leaves reduce the deduction constraints further."""

    def substitute_extra(self, extra, binding):
        return tuple(
            (tuple(apply_subst(binding, e) for e in E), apply_subst(binding, t))
            for E, t in extra
        )

    def extra_key(self, st, ren):
        return tuple(
            (tuple(sorted(ren(e) for e in E)), ren(t)) for E, t in st.extra
        )

    def finish(self, st):
        todo = list(st.extra)
        done = []
        while todo:
            E, t = todo.pop(0)
            items = letters(t)
            if len(items) != 1:
                todo = [(E, u) for u in items] + todo
                continue
            u = items[0]
            if isinstance(u, Var):
                done.append((E, u))
                continue
            known = {w for e in E for w in letters(e) if not isinstance(w, Var)}
            if u in known:
                continue
            if isinstance(u, Const):
                return None
            if isinstance(u, App):
                kids = []
                rest = tuple(done + todo)
                for w in sorted(known, key=sort_key):
                    if isinstance(w, App) and w.sym == u.sym:
                        kids.append(_State(((u, w),), st.sigma, st.forbid, st.budget, rest + ((E, u),)))
                kids.append(
                    _State((), st.sigma, st.forbid, st.budget, rest + tuple((E, a) for a in u.args))
                )
                return kids
            return None
        return st.sigma


def _free_forbid(c: ConstraintSystem) -> OrderingConstraint:
    """Sound pruning: a target can only contain constants its knowledge contains."""
    return deduction_order(c)


def solve_free(c: ConstraintSystem, bound: int = 6, max_nodes: int = 20000) -> Verdict:
    _require_deterministic(c)
    for t in c.terms():
        if contains_symbol(t, "h"):
            raise ConstraintInputError(f"I_free systems are h-free: {format_term(t)}")
    order = c.order.union(_free_forbid(c))
    if not order.is_acyclic():
        return Verdict(UNSAT)
    search = _FreeSearch(bound, max_nodes)
    extra = tuple((E, v) for E, v in c.constraints)
    st = _State(tuple(c.S.equations), {}, dict(order.forbidden()), {}, extra)
    v = search.run(st)
    if not v.sat:
        return v
    sigma = _ground_rest(v.witness, c.variables())
    sigma = {x: sigma.get(x, EPS) for x in c.variables()}
    return _finish(c, sigma, System.FREE)


def solve(c: ConstraintSystem, theory, bound: int = 6, max_nodes: int = 20000) -> Verdict:
    system = as_system(theory)
    if system is System.AU:
        return solve_au(c, bound, max_nodes)
    if system in (System.F, System.G):
        return solve_compose(c, system.value)
    if system is System.FREE:
        return solve_free(c, bound, max_nodes)
    from .reduction import Limits, solve_h

    return solve_h(c, Limits(bound=bound, max_nodes=max_nodes))


# -- text format --------------------------------------------------------------------


def split_top(text: str, sep: str) -> list:
    """Split at ``sep`` outside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


def parse_constraints(text: str) -> ConstraintSystem:
    known: list = []
    constraints, eqs, order = [], [], []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, body = line.partition(":")
        if not sep:
            raise ConstraintInputError(f"line {n}: expected 'keyword: ...'")
        key = key.strip()
        try:
            if key == "knows":
                for part in split_top(body, ","):
                    if part.strip():
                        known.append(parse_term(part, n))
            elif key == "deduce":
                v = parse_term(body, n)
                if not isinstance(v, Var):
                    raise ConstraintInputError(f"line {n}: deduce needs a variable")
                constraints.append((tuple(known), v))
            elif key == "eq":
                lhs, eqsep, rhs = body.partition("=")
                if not eqsep:
                    raise ConstraintInputError(f"line {n}: eq needs '='")
                eqs.append((parse_term(lhs, n), parse_term(rhs, n)))
            elif key == "order":
                a, ltsep, b = body.partition("<")
                if not ltsep:
                    raise ConstraintInputError(f"line {n}: order needs '<'")
                order.append((parse_term(a, n), parse_term(b, n)))
            else:
                raise ConstraintInputError(f"line {n}: unknown keyword {key!r}")
        except TermSyntaxError as e:
            raise ConstraintInputError(f"line {n}: {e}") from None
    return ConstraintSystem.build(constraints, eqs, order)
