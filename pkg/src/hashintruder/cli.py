"""Command line front end.

Exit codes: 0 no attack / not derivable / UNSAT, 1 attack / derivable / SAT,
2 UNKNOWN within the limits, 3 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

from .csolve import (
    ConstraintInputError,
    as_system,
    parse_constraints,
    solve,
    split_top,
    verify_solution,
)
from .deduce import System, derivable
from .protocol import parse_protocol, protocol_to_constraints
from .reduction import (
    BranchLimitExceeded,
    Limits,
    enumerate_reductions,
    solve_h,
)
from .terms import TermSyntaxError, contains_symbol, format_term, parse_term
from .wordunify import (
    OrderingConstraint,
    UnificationSystem,
    UnifyInputError,
    Verdict,
    solve_au_lcr,
    solve_syntactic_lcr,
)

EXIT_NO, EXIT_YES, EXIT_UNKNOWN, EXIT_INPUT = 0, 1, 2, 3

DEFAULTS = {
    "format": "text",
    "max_word_len": 6,
    "max_branches": 100_000,
    "max_k": None,
    "max_nodes": 20_000,
    "sessions": 1,
    "seed": 0,
    "no_collisions": False,
}


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    out = {}
    for n, raw in enumerate(_read(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not eq or key not in DEFAULTS:
            raise InputError(f"{path}:{n}: unknown setting {line!r}")
        val = val.strip()
        if key == "format":
            out[key] = val
        elif key == "no_collisions":
            out[key] = val.lower() in ("1", "true", "yes")
        else:
            try:
                out[key] = int(val)
            except ValueError:
                raise InputError(f"{path}:{n}: {key} needs an integer") from None
    return out


def _settings(args) -> dict:
    s = dict(DEFAULTS)
    s.update(load_config(args.config))
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            s[k] = v
    return s


def _limits(s: dict) -> Limits:
    return Limits(
        max_k=s["max_k"],
        max_branches=s["max_branches"],
        bound=s["max_word_len"],
        max_nodes=s["max_nodes"],
        collisions=not s["no_collisions"],
    )


def _limits_json(s: dict) -> dict:
    return {
        "max_word_len": s["max_word_len"],
        "max_branches": s["max_branches"],
        "max_k": s["max_k"],
        "max_nodes": s["max_nodes"],
        "collisions": not s["no_collisions"],
        "sessions": s["sessions"],
        "seed": s["seed"],
    }


def _code(v: Verdict) -> int:
    return {"SAT": EXIT_YES, "UNSAT": EXIT_NO, "UNKNOWN": EXIT_UNKNOWN}[v.status]


def _emit(obj: dict, s: dict, text_lines) -> None:
    if s["format"] == "json":
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


# -- subcommands --------------------------------------------------------------------


def cmd_analyze(args) -> int:
    s = _settings(args)
    spec = parse_protocol(_read(args.file))
    c = protocol_to_constraints(spec, s["sessions"])
    start = time.perf_counter()
    uses_h = any(contains_symbol(t, "h") for t in c.terms())
    if uses_h or not any(contains_symbol(t, sym) for t in c.terms() for sym in ("f", "g")):
        v = solve_h(c, _limits(s))
        tag = System.H
    else:
        v = solve(c, "free", s["max_word_len"], s["max_nodes"])
        tag = System.FREE
    elapsed = time.perf_counter() - start
    report = {"verdict": v.status, "limits": _limits_json(s),
              "system": c.to_json()}
    lines = [f"verdict: {v.status}"]
    if v.sat:
        if not verify_solution(c, v.witness, tag):
            raise AssertionError("attack does not re-verify")
        report["substitution"] = Verdict("SAT", v.witness).to_json()["witness"]
        trace = v.extra
        if tag is System.H:
            report["branch"] = hashlib.sha256(trace.branch.fingerprint.encode()).hexdigest()[:16]
            report["trace"] = trace.to_json()
            report["uses_collision"] = trace.uses_collision()
            derivs = trace.derivations
        else:
            derivs = v.extra
            report["trace"] = {"derivations": [d.to_json() for d in derivs]}
            report["uses_collision"] = False
        lines.append("attack found")
        for x, val in report["substitution"].items():
            lines.append(f"  {x} = {val}")
        for i, d in enumerate(derivs, start=1):
            lines.append(f"constraint {i}: {format_term(d.goal)}")
            for st in d.steps:
                mod = "  [modulo HC]" if st.modulo else ""
                prem = ", ".join(format_term(p) for p in st.premises)
                lines.append(f"    {st.rule}({prem}) -> {format_term(st.derived)}{mod}")
    elif v.unknown:
        report["bound"] = v.bound
        lines.append(f"search bound {v.bound} exhausted")
    else:
        lines.append("no attack within the limits")
    if args.timing:
        report["wall_time"] = round(elapsed, 3)
        lines.append(f"time: {elapsed:.2f}s")
    _emit(report, s, lines)
    return _code(v)


def cmd_solve(args) -> int:
    s = _settings(args)
    c = parse_constraints(_read(args.file))
    system = as_system(args.theory)
    if system is System.H:
        v = solve_h(c, _limits(s))
    else:
        v = solve(c, system, s["max_word_len"], s["max_nodes"])
    out = v.to_json()
    out["theory"] = system.value
    lines = [f"verdict: {v.status}"]
    if v.sat:
        lines += [f"  {x} = {val}" for x, val in out["witness"].items()]
    _emit(out, s, lines)
    return _code(v)


def _parse_derive(text: str):
    known, goal = [], None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, body = line.partition(":")
        key = key.strip()
        if key == "knows" and sep:
            known += [parse_term(t, n) for t in split_top(body, ",") if t.strip()]
        elif key == "goal" and sep:
            goal = parse_term(body, n)
        else:
            raise InputError(f"line {n}: expected 'knows:' or 'goal:'")
    if goal is None:
        raise InputError("no goal given")
    return known, goal


def cmd_derive(args) -> int:
    s = _settings(args)
    known, goal = _parse_derive(_read(args.file))
    system = as_system(args.theory)
    d = derivable(known, goal, system)
    if d is None:
        _emit({"derivable": False, "goal": format_term(goal)}, s, ["not derivable"])
        return EXIT_NO
    if not d.replay():
        raise AssertionError("derivation does not replay")
    out = d.to_json()
    out["derivable"] = True
    lines = ["derivable"] + [
        f"  {st.rule}({', '.join(format_term(p) for p in st.premises)}) -> {format_term(st.derived)}"
        for st in d.steps
    ]
    _emit(out, s, lines)
    return EXIT_YES


def _parse_unify(text: str):
    eqs, order = [], []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("restrict "):
            a, lt, b = line[len("restrict "):].partition("<")
            if not lt:
                raise InputError(f"line {n}: expected 'restrict ?x < c'")
            order.append((parse_term(a, n), parse_term(b, n)))
            continue
        lhs, eq, rhs = line.partition("=")
        if not eq:
            raise InputError(f"line {n}: expected 'lhs = rhs'")
        eqs.append((parse_term(lhs, n), parse_term(rhs, n)))
    return UnificationSystem.of(eqs), OrderingConstraint.of(order)


def cmd_unify(args) -> int:
    s = _settings(args)
    sys_, order = _parse_unify(_read(args.file))
    if args.theory == "syntactic":
        v = solve_syntactic_lcr(sys_, order)
    else:
        v = solve_au_lcr(sys_, order, s["max_word_len"], s["max_nodes"])
    out = v.to_json()
    lines = [f"verdict: {v.status}"]
    if v.sat:
        lines += [f"  {x} = {val}" for x, val in out["witness"].items()]
    _emit(out, s, lines)
    return _code(v)


def cmd_reduce(args) -> int:
    s = _settings(args)
    c = parse_constraints(_read(args.file))
    branches, truncated = [], False
    try:
        for br in enumerate_reductions(c, _limits(s)):
            branches.append(br.to_json())
    except BranchLimitExceeded:
        truncated = True
    out = {"branches": branches, "count": len(branches), "truncated": truncated}
    lines = [f"{len(branches)} branches" + (" (truncated)" if truncated else "")]
    for b in branches:
        lines.append(f"  #{b['index']} k={b['k']} cases={[c['case'] for c in b['cases']]}")
    _emit(out, s, lines)
    return EXIT_UNKNOWN if truncated else EXIT_NO


# -- argument parsing ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "json"])
    common.add_argument("--max-word-len", type=int, dest="max_word_len")
    common.add_argument("--max-branches", type=int, dest="max_branches")
    common.add_argument("--max-k", type=int, dest="max_k")
    common.add_argument("--max-nodes", type=int, dest="max_nodes")
    common.add_argument("--no-collisions", action="store_true", dest="no_collisions")
    common.add_argument("--sessions", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="key=value settings file; flags override it")

    p = argparse.ArgumentParser(prog="hashintruder", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    a = sub.add_parser("analyze", parents=[common], help="search a protocol for an attack")
    a.add_argument("file")
    a.add_argument("--timing", action="store_true", help="include wall time in JSON output")
    a.set_defaults(func=cmd_analyze)
    so = sub.add_parser("solve", parents=[common], help="solve a constraint file")
    so.add_argument("file")
    so.add_argument("--theory", default="h", choices=["au", "f", "g", "free", "h"])
    so.set_defaults(func=cmd_solve)
    d = sub.add_parser("derive", parents=[common], help="ground derivability")
    d.add_argument("file")
    d.add_argument("--theory", default="h", choices=["au", "f", "g", "free", "h"])
    d.set_defaults(func=cmd_derive)
    u = sub.add_parser("unify", parents=[common], help="ordered unification")
    u.add_argument("file")
    u.add_argument("--theory", default="au", choices=["au", "syntactic"])
    u.set_defaults(func=cmd_unify)
    r = sub.add_parser("reduce", parents=[common], help="list the reduction branches")
    r.add_argument("file")
    r.set_defaults(func=cmd_reduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else 0
    try:
        return args.func(args)
    except (InputError, ConstraintInputError, UnifyInputError, TermSyntaxError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
