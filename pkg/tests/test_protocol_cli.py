import json
from pathlib import Path

import pytest

from hashintruder.cli import main
from hashintruder.csolve import check_deterministic
from hashintruder.protocol import ProtocolError, parse_protocol, protocol_to_constraints
from hashintruder.terms import Var, format_term, parse_term

ROOT = Path(__file__).resolve().parent.parent
INTRO = ROOT / "protocols" / "intro.proto"
P = parse_term


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- protocol encoding -------------------------------------------------------------


def test_one_message_protocol():
    c = protocol_to_constraints(parse_protocol("role A\nrole B\nmsg A -> B : a\ngoal secret a\n"))
    assert c.to_json() == {
        "constraints": [{"knows": ["a"], "deduce": "?goal"}],
        "equations": [["?goal", "a"]],
        "order": [],
    }


def test_empty_protocol_goal_eps():
    c = protocol_to_constraints(parse_protocol("goal secret eps"))
    assert c.constraints == (((), Var("goal")),)


def test_intro_encoding():
    c = protocol_to_constraints(parse_protocol(INTRO.read_text()))
    assert check_deterministic(c)[0]
    assert [v.name for v in c.targets] == ["r", "goal"]
    assert set(c.constraints[1][0]) == {P("evil"), P("good"), P("good . ?r . h(h(good . ?r) . ka)")}
    assert [format_term(l) for l, _ in c.S] == ["?goal"]


def test_sessions_rename():
    text = "role A\nmsg I -> A : ?x\nmsg A -> I : h(?x)\ngoal secret a\n"
    c = protocol_to_constraints(parse_protocol(text), sessions=2)
    assert [v.name for v in c.targets] == ["x", "x_s2", "goal"]
    assert P("h(?x_s2)") in c.constraints[2][0]


def test_forge_goal_adds_equation():
    c = protocol_to_constraints(parse_protocol("init a\ngoal forge h(?m) = h(a)\n"))
    assert (P("h(?m)"), P("h(a)")) in c.S.equations


@pytest.mark.parametrize(
    "text",
    [
        "",
        "role A\nmsg A -> B : a\ngoal secret a",
        "role A\nmsg A -> I : ?x\ngoal secret a",
        "role A\nmsg I -> A : h(?x)\ngoal secret a",
        "goal maybe a",
        "goal secret a\ngoal secret b",
        "role I\ngoal secret a",
        "frob\ngoal secret a",
        "goal secret (a",
        "goal forge a",
    ],
)
def test_protocol_errors(text):
    with pytest.raises(ProtocolError):
        protocol_to_constraints(parse_protocol(text))


def test_semicolons_and_comments():
    a = parse_protocol("role A; init a  # start\nmsg A -> I : a; goal secret a")
    assert a.roles == ["A"] and a.init == [P("a")] and len(a.messages) == 1


# -- CLI ---------------------------------------------------------------------------


def test_analyze_intro(capsys):
    code, out, _ = run(capsys, "analyze", INTRO, "--format", "json")
    assert code == 1
    rep = json.loads(out)
    assert rep["verdict"] == "SAT" and rep["uses_collision"] is True
    assert any(st.get("modulo") == "HC" for d in rep["trace"]["derivations"] for st in d["steps"])
    assert "wall_time" not in rep


def test_analyze_intro_no_collisions(capsys):
    code, out, _ = run(capsys, "analyze", INTRO, "--no-collisions")
    assert code == 0 and out.startswith("verdict: UNSAT")


def test_analyze_text_and_timing(capsys):
    code, out, _ = run(capsys, "analyze", INTRO, "--timing")
    assert code == 1 and "[modulo HC]" in out and "time:" in out


def test_garbage_exit_3(capsys, tmp_path):
    p = write(tmp_path, "g.proto", "%%% not a protocol\n")
    code, _, err = run(capsys, "analyze", p)
    assert code == 3 and err.startswith("error:")
    assert run(capsys, "analyze", tmp_path / "missing.proto")[0] == 3
    assert run(capsys, "frobnicate")[0] == 3
    assert run(capsys, "solve", write(tmp_path, "x.cons", "deduce: a\n"))[0] == 3


def test_derive(capsys, tmp_path):
    p = write(tmp_path, "d.txt", "knows: a . b\ngoal: b\n")
    code, out, _ = run(capsys, "derive", p, "--format", "json")
    assert code == 1
    assert json.loads(out) == {
        "derivable": True,
        "goal": "b",
        "steps": [{"rule": "suffix", "premises": ["a . b"], "derived": "b"}],
    }
    p = write(tmp_path, "n.txt", "knows: h(a)\ngoal: a\n")
    assert run(capsys, "derive", p)[0] == 0
    assert run(capsys, "derive", write(tmp_path, "bad.txt", "knows: a\n"))[0] == 3


def test_unify(capsys, tmp_path):
    p = write(tmp_path, "u.txt", "a = b\n")
    code, out, _ = run(capsys, "unify", p, "--format", "json")
    assert code == 0 and json.loads(out) == {"verdict": "UNSAT"}
    p = write(tmp_path, "u2.txt", "?x . ?y = a . b\nrestrict ?x < b\n")
    code, out, _ = run(capsys, "unify", p, "--format", "json")
    assert code == 1 and "b" not in json.loads(out)["witness"]["?x"]
    p = write(tmp_path, "u3.txt", "f(?x,a,a,a) = f(b,a,a,a)\n")
    code, out, _ = run(capsys, "unify", p, "--theory", "syntactic", "--format", "json")
    assert code == 1 and json.loads(out)["witness"] == {"?x": "b"}


def test_unify_unknown_exit_2(capsys, tmp_path):
    p = write(tmp_path, "u.txt", "?x . ?x . b = a . ?y . ?y\n")
    code, out, _ = run(capsys, "unify", p, "--max-word-len", "2", "--format", "json")
    assert code == 2 and json.loads(out) == {"verdict": "UNKNOWN", "bound": 2}


@pytest.mark.parametrize(
    "text, status",
    [
        ("knows: a . b\ndeduce: ?v\neq: ?v = b . a\n", "SAT"),
        ("knows: a\ndeduce: ?v\neq: ?v = c\n", "UNSAT"),
        ("deduce: ?v\neq: ?v = eps\n", "SAT"),
    ],
)
def test_solve_au_delegation(capsys, tmp_path, text, status):
    p = write(tmp_path, "c.cons", text)
    code, out, _ = run(capsys, "solve", p, "--theory", "au", "--format", "json")
    rep = json.loads(out)
    assert rep["verdict"] == status and rep["theory"] == "au"
    assert code == (1 if status == "SAT" else 0)


def test_reduce_and_limits(capsys, tmp_path):
    p = write(tmp_path, "r.cons", "knows: a\ndeduce: ?v\neq: ?v = h(a)\n")
    code, out, _ = run(capsys, "reduce", p, "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["count"] == len(rep["branches"]) > 0 and not rep["truncated"]
    code, out, _ = run(capsys, "reduce", p, "--max-branches", "1", "--format", "json")
    assert code == 2 and json.loads(out)["truncated"]


def test_config_file_and_override(capsys, tmp_path):
    cfg = write(tmp_path, "c.cfg", "# settings\nmax-branches = 1\nformat = json\n")
    p = write(tmp_path, "r.cons", "knows: a\ndeduce: ?v\neq: ?v = h(a)\n")
    code, out, _ = run(capsys, "reduce", p, "--config", cfg)
    assert code == 2 and json.loads(out)["truncated"]
    code, out, _ = run(capsys, "reduce", p, "--config", cfg, "--max-branches", "1000")
    assert code == 0
    assert run(capsys, "reduce", p, "--config", write(tmp_path, "b.cfg", "speed = 3\n"))[0] == 3


def test_limits_echoed(capsys):
    code, out, _ = run(capsys, "analyze", INTRO, "--format", "json", "--seed", "7", "--max-k", "4")
    rep = json.loads(out)
    assert rep["limits"]["seed"] == 7 and rep["limits"]["max_k"] == 4
