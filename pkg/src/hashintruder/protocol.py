"""Protocol narrations and their bounded-session constraint systems.

File format, one directive per line (``;`` also separates directives)::

    role A
    init a, b                     # initial intruder knowledge
    msg I -> A : ?r               # I is the intruder
    msg A -> B : a . ?r . h(?r)
    goal secret t                 # the intruder must produce t
    goal forge lhs = rhs          # ... produce lhs such that lhs = rhs

Variables are local to a session.  A variable is bound when an honest role
first receives it from the intruder; it has to occur there as a top-level
letter of the pattern, so deriving the pattern amounts to deriving each new
variable plus the rest of the pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .csolve import ConstraintInputError, ConstraintSystem, check_deterministic, split_top
from .terms import (
    Term,
    TermSyntaxError,
    Var,
    apply_subst,
    format_term,
    letters,
    parse_term,
    variables,
)

INTRUDER = "I"


class ProtocolError(ConstraintInputError):
    pass


@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    term: Term
    line: int = 0


@dataclass
class ProtocolSpec:
    roles: list = field(default_factory=list)
    init: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    goal_kind: str | None = None  # "secret" | "forge"
    goal: tuple = ()  # (t,) or (lhs, rhs)


def _term(text: str, n: int) -> Term:
    try:
        return parse_term(text, n)
    except TermSyntaxError as e:
        raise ProtocolError(f"line {n}: {e}") from None


def parse_protocol(text: str) -> ProtocolSpec:
    p = ProtocolSpec()
    for n, raw in enumerate(text.splitlines(), start=1):
        for part in raw.split("#", 1)[0].split(";"):
            line = part.strip()
            if not line:
                continue
            word, _, rest = line.partition(" ")
            rest = rest.strip()
            if word == "role":
                if not rest.isidentifier() or rest == INTRUDER:
                    raise ProtocolError(f"line {n}: bad role name {rest!r}")
                p.roles.append(rest)
            elif word == "init":
                p.init += [_term(t, n) for t in split_top(rest, ",") if t.strip()]
            elif word == "msg":
                head, colon, body = rest.partition(":")
                ends = [x.strip() for x in head.split("->")]
                if not colon or len(ends) != 2:
                    raise ProtocolError(f"line {n}: expected 'msg X -> Y : term'")
                for who in ends:
                    if who != INTRUDER and who not in p.roles:
                        raise ProtocolError(f"line {n}: unknown role {who!r}")
                p.messages.append(Message(ends[0], ends[1], _term(body, n), n))
            elif word == "goal":
                kind, _, body = rest.partition(" ")
                if p.goal_kind is not None:
                    raise ProtocolError(f"line {n}: only one goal allowed")
                if kind == "secret":
                    p.goal_kind, p.goal = "secret", (_term(body, n),)
                elif kind == "forge":
                    lhs, eq, rhs = body.partition("=")
                    if not eq:
                        raise ProtocolError(f"line {n}: forge goal needs '='")
                    p.goal_kind, p.goal = "forge", (_term(lhs, n), _term(rhs, n))
                else:
                    raise ProtocolError(f"line {n}: unknown goal kind {kind!r}")
            else:
                raise ProtocolError(f"line {n}: unknown directive {word!r}")
    if p.goal_kind is None:
        raise ProtocolError("no goal given")
    return p


def protocol_to_constraints(p: ProtocolSpec, sessions: int = 1) -> ConstraintSystem:
    if sessions < 1:
        raise ProtocolError("sessions must be at least 1")
    taken = set()
    for m in p.messages:
        taken |= {v.name for v in variables(m.term)}
    for t in p.goal:
        taken |= {v.name for v in variables(t)}

    def fresh(base):
        name = base
        while name in taken:
            name += "_"
        taken.add(name)
        return Var(name)

    knowledge = list(p.init)
    constraints, eqs = [], []
    for s in range(1, sessions + 1):
        ren = {}
        if s > 1:
            for m in p.messages:
                for v in variables(m.term):
                    ren.setdefault(v, fresh(f"{v.name}_s{s}"))
        bound: set = set()
        for m in p.messages:
            t = apply_subst(ren, m.term)
            new = variables(t) - bound
            if m.sender == INTRUDER:
                if new:
                    tops = set(letters(t))
                    for v in sorted(new, key=lambda v: v.name):
                        if v not in tops:
                            raise ProtocolError(
                                f"line {m.line}: {format_term(v)} must be a top-level letter "
                                "where it is first received"
                            )
                        constraints.append((tuple(knowledge), v))
                    if not isinstance(t, Var):
                        v = fresh(f"m{len(constraints) + 1}")
                        constraints.append((tuple(knowledge), v))
                        eqs.append((v, t))
                    bound |= new
            else:
                if new:
                    names = ", ".join(sorted(format_term(v) for v in new))
                    raise ProtocolError(f"line {m.line}: {names} sent before being received")
                knowledge.append(t)
    goal = fresh("goal")
    constraints.append((tuple(knowledge), goal))
    eqs.append((goal, p.goal[0]))
    if p.goal_kind == "forge":
        eqs.append((p.goal[0], p.goal[1]))
    c = ConstraintSystem.build(constraints, eqs)
    ok, problems = check_deterministic(c)
    if not ok:
        raise ProtocolError("encoding is not deterministic: " + "; ".join(problems))
    return c
