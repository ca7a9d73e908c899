import pytest

from hashintruder.csolve import ConstraintSystem, parse_constraints, solve_free, verify_solution
from hashintruder.deduce import System
from hashintruder.reduction import (
    BranchLimitExceeded,
    Limits,
    PreconditionError,
    ReductionBranch,
    concretize,
    enumerate_reductions,
    hash_subterms,
    proposition_shadok_filter,
    solve_h,
)
from hashintruder.terms import Const, Hash, Var, contains_symbol, parse_term, syntactic_subterms
from hashintruder.theories import h_canon

P = parse_term
V = Var("v")


def sys_(text):
    return parse_constraints(text)


def branches(c, **kw):
    return list(enumerate_reductions(c, Limits(**kw)))


def test_hash_free_has_single_k0_branch():
    c = sys_("knows: a . b\ndeduce: ?v\neq: ?v = b . a\n")
    (br,) = branches(c)
    assert br.k == 0 and br.system == c


def test_hash_of_known_branch():
    c = sys_("knows: a\ndeduce: ?v\neq: ?v = h(a)\n")
    want = ConstraintSystem.build(
        [([P("a")], Var("c@1")), ([P("a"), Const("#h1")], V)],
        [(V, Const("#h1")), (Var("c@1"), P("a"))],
    )
    found = [br for br in branches(c) if br.system == want]
    assert len(found) == 1
    assert found[0].hashed == ((0, 1),)
    assert found[0].classes == ((P("h(a)"),),)


def test_case_pair_for_hash_equation():
    c = sys_("knows: a, b\ndeduce: ?x\ndeduce: ?y\neq: h(a . ?x) = h(b . ?y)\n")
    pair = (P("h(a . ?x)"), P("h(b . ?y)"))
    labels = {case for br in branches(c) for a, b, case in br.cases if {a, b} == set(pair)}
    assert labels == {"same", "collision", "collision-sym"}
    labels = {case for br in branches(c, collisions=False) for a, b, case in br.cases}
    assert labels == {"same"}


def test_hash_equation_forces_one_class():
    c = sys_("knows: a, b\ndeduce: ?x\ndeduce: ?y\neq: h(a . ?x) = h(b . ?y)\n")
    for br in branches(c):
        assert any({P("h(a . ?x)"), P("h(b . ?y)")} <= set(cl) for cl in br.classes)


def test_every_branch_is_hash_free_and_deterministic():
    c = sys_("knows: a, k\ndeduce: ?v\neq: ?v = h(h(a) . k)\n")
    bs = branches(c)
    assert bs and [b.index for b in bs] == list(range(len(bs)))
    for br in bs:
        assert not any(contains_symbol(t, "h") for t in br.system.terms())
        # nested hashes never share a class
        for cl in br.classes:
            for s in cl:
                for t in cl:
                    assert s == t or s not in syntactic_subterms(t)


def test_fingerprints_unique_and_stable():
    c = sys_("knows: a, b\ndeduce: ?x\neq: h(?x) = h(a . b)\n")
    fps = [br.fingerprint for br in branches(c)]
    assert len(fps) == len(set(fps))
    assert fps == [br.fingerprint for br in branches(c)]


def test_precondition():
    with pytest.raises(PreconditionError):
        branches(sys_("knows: a\ndeduce: ?v\neq: ?v = f(a,a,a,a)\n"))


def test_branch_limit():
    c = sys_("knows: a, b\ndeduce: ?x\ndeduce: ?y\neq: h(a . ?x) = h(b . ?y)\n")
    with pytest.raises(BranchLimitExceeded):
        branches(c, max_branches=2)
    assert solve_h(c, Limits(max_branches=0)).unknown


def _fake(k, T, nvars):
    return ReductionBranch(0, k, (), (), (), (), ConstraintSystem(), tuple(T), nvars)


def test_shadok_filter_examples():
    # hash-free system knows: a, deduce ?v, ?v = a has two subterm values
    assert not proposition_shadok_filter(_fake(2, [], 1))
    assert proposition_shadok_filter(_fake(1, [P("h(a)")], 0))
    assert proposition_shadok_filter(_fake(2, [P("h(a)")], 1))
    assert not proposition_shadok_filter(_fake(3, [P("h(a)")], 1))


def test_solve_h_examples():
    v = solve_h(sys_("knows: a\ndeduce: ?v\neq: ?v = h(a)\n"))
    assert v.sat and v.witness == {V: P("h(a)")}
    assert v.extra.derivations[-1].steps[-1].rule == "h"
    assert solve_h(sys_("knows: h(a)\ndeduce: ?v\neq: ?v = a\n")).unsat


def test_collision_witness():
    c = sys_("knows: a, b\ndeduce: ?x\ndeduce: ?y\neq: h(a . ?x) = h(b . ?y)\n")
    v = solve_h(c)
    assert v.sat and verify_solution(c, v.witness, System.H)
    assert any(case != "same" for _, _, case in v.extra.branch.cases)
    assert solve_h(c, Limits(collisions=False)).unsat


def test_concretize_nested():
    sigma = {Var("c@1"): P("a"), Var("c@2"): Const("#h1"), V: Const("#h2")}
    out = concretize(sigma, 2)
    assert out[V] == P("h(h(a))")
    with pytest.raises(ValueError):
        concretize({Var("c@1"): Const("#h1"), V: Const("#h1")}, 1)


CORPUS = [
    "knows: a, b\ndeduce: ?x\ndeduce: ?y\neq: h(a . ?x) = h(b . ?y)\n",
    "knows: a, k\ndeduce: ?v\neq: ?v = h(h(a) . k)\n",
    "knows: a, b\ndeduce: ?x\neq: h(?x) = h(a . b)\n",
    "knows: h(a), b\ndeduce: ?v\nknows: ?v\ndeduce: ?w\neq: ?w = h(?v . b)\n",
]


@pytest.mark.parametrize("text", CORPUS)
def test_branch_soundness(text):
    """Any free solution of any branch maps back to a solution of the input."""
    c = sys_(text)
    sat = 0
    for br in branches(c):
        v = solve_free(br.system)
        if not v.sat:
            continue
        try:
            full = concretize(v.witness, br.k)
        except ValueError:
            continue
        sigma = {x: full[x] for x in c.variables()}
        assert verify_solution(c, sigma, System.H), br.index
        sat += 1
        # hash values in the witness come from the classes
        hs = {h_canon(u) for t in sigma.values() for u in syntactic_subterms(t) if isinstance(u, Hash)}
        assert len(hs) <= br.k
    assert sat


def test_hash_subterms_sorted_by_size():
    c = sys_("knows: a\ndeduce: ?v\neq: ?v = h(h(a) . h(a))\n")
    assert hash_subterms(c) == [P("h(a)"), P("h(h(a) . h(a))")]
