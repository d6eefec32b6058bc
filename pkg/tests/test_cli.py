import json
import shutil
import subprocess
import sys


from liereduce import cli
from liereduce.golden import fixture_dir

FIX = fixture_dir()


def run(*args, cwd=None):
    p = subprocess.run([sys.executable, "-m", "liereduce", *map(str, args)],
                       capture_output=True, text=True, cwd=cwd)
    return p.returncode, p.stdout, p.stderr


def structured(*args):
    code, out, err = run(*args, "--format", "structured")
    return code, json.loads(out) if out else None


def test_check_bundled_problem():
    code, rep = structured("check", FIX / "coupled.problem")
    assert code == 0
    assert rep["schema"] == cli.SCHEMA and rep["seed"] == 0
    assert [c["passed"] for c in rep["checks"]] == [True] * 3
    assert rep["result"]["generators"]["Z3"]["lambda"] == "0"


def test_check_corrupted_generator(tmp_path):
    text = (FIX / "coupled.problem").read_text().replace("x*ln(x)*d/dx", "x^2*d/dx")
    p = tmp_path / "bad.problem"
    p.write_text(text)
    code, rep = structured("check", p)
    assert code == 1
    failed = [c for c in rep["checks"] if not c["passed"]]
    assert len(failed) == 1 and "Z3" in failed[0]["name"]
    assert failed[0]["witness"] and failed[0]["probabilistic"]


def test_check_without_generators(tmp_path):
    p = tmp_path / "e.problem"
    p.write_text("independent t\ndependent x order 2\nequation x'' = 0\n")
    code, rep = structured("check", p)
    assert code == 0 and rep["checks"] == []


def test_parse_error_exit_code(tmp_path):
    p = tmp_path / "e.problem"
    p.write_text("independent t\ndependent x order 2\nequation x'' = (x\n")
    code, out, err = run("check", p)
    assert code == 2
    assert "line 3" in err


def test_usage_errors():
    assert run("check", "/no/such/file")[0] == 2
    assert run("frobnicate")[0] == 2
    assert run("check", FIX / "coupled.problem", "--trials", "2")[0] == 2
    assert run("step", FIX / "coupled.problem")[0] == 2


def test_internal_error_exit_code(monkeypatch, capsys):
    def boom(args, rep):
        raise RuntimeError("boom")
    monkeypatch.setitem(cli.COMMANDS, "check", boom)
    assert cli.main(["check", str(FIX / "coupled.problem")]) == 3


def test_algebra_command():
    code, rep = structured("algebra", FIX / "coupled.problem")
    assert code == 0
    res = rep["result"]
    assert res["level"] == 2 and res["chain"] == [["Z1", "Z2"], ["Z3"]]
    assert res["constants"]["brackets"] == {"[Z1,Z3]": "Z1", "[Z2,Z3]": "Z2"}
    code, rep = structured("algebra", FIX / "so21.problem")
    assert code == 0
    assert rep["result"]["level"] is None
    assert rep["result"]["max_solvable"]["dim"] == 2
    assert rep["result"]["radical_dim"] == 0
    code, rep = structured("algebra", FIX / "abelian.problem")
    assert rep["result"]["level"] == 1 and rep["result"]["chain"] == [["T1", "T2"]]


def test_algebra_not_closed(tmp_path):
    p = tmp_path / "nc.problem"
    p.write_text("independent t\ndependent x order 2\nequation x'' = 0\n"
                 "generator T = d/dx\ngenerator K = x^2*d/dx\n")
    code, rep = structured("algebra", p)
    assert code == 1
    assert set(rep["result"]["not_closed"]) == {"T", "K"}


def test_plan_command():
    code, rep = structured("plan", FIX / "coupled.problem")
    assert code == 0
    assert (rep["result"]["N"], rep["result"]["r"], rep["result"]["predicted"]) == (5, 3, 2)
    code, rep = structured("plan", FIX / "intransitive.problem")
    assert code == 1
    assert rep["result"]["steps"][0]["transitive"] is False
    code, rep = structured("plan", FIX / "so21.problem")
    assert code == 1


def test_plan_single_generator(tmp_path):
    p = tmp_path / "one.problem"
    p.write_text("independent t\ndependent x order 2\nequation x'' = x_1\ngenerator X = d/dx\n")
    code, rep = structured("plan", p)
    assert code == 0 and len(rep["result"]["steps"]) == 1


def test_step_with_session(tmp_path):
    sess = tmp_path / "s.json"
    code, rep = structured("step", FIX / "coupled.problem", "--session", sess, "--chart", FIX / "step1.chart")
    assert code == 0 and sess.exists()
    saved = sess.read_text()
    # wrong chart: fails and the session file is untouched
    code, rep = structured("step", "--session", sess, "--chart", FIX / "step1.chart")
    assert code == 1
    assert sess.read_text() == saved
    code, rep = structured("step", FIX / "coupled.problem", "--session", sess,
                           "--chart", FIX / "branch_b.chart")
    assert code == 0
    assert json.loads(sess.read_text())["step"] == 2


def test_chain_branches():
    for branch, count in (("branch_a.chart", 1), ("branch_b.chart", 2)):
        code, rep = structured("chain", FIX / "coupled.problem", "--chart", FIX / "step1.chart",
                               "--chart", FIX / branch)
        assert code == 0
        res = rep["result"]
        assert res["residual_dimension"] == res["predicted_dimension"] == 2
        assert len(res["final_system"]["dependents"]) == count
        assert res["certificate"]["solvable"]


def test_chain_swapped_order_aborts():
    code, rep = structured("chain", FIX / "coupled.problem", "--chart", FIX / "branch_a.chart",
                           "--chart", FIX / "step1.chart")
    assert code == 1
    assert "step 1" in rep["checks"][-1]["name"]


def test_verify_paper_example_default_and_loose_tolerance():
    code, out, _ = run("verify-paper-example")
    assert code == 0 and out.strip().endswith("result: pass")
    code, rep = structured("verify-paper-example", "--rel-tol", "0.1")
    assert code == 0 and rep["passed"]


def test_verify_paper_example_altered_omega(tmp_path):
    d = tmp_path / "fx"
    shutil.copytree(FIX, d)
    p = d / "coupled.problem"
    p.write_text(p.read_text().replace("-y + exp(-t)*x'/x", "-y + exp(-t)*x'/x + y'"))
    code, rep = structured("verify-paper-example", "--fixture-dir", d)
    assert code == 1
    assert rep["result"]["first_failure"].startswith("check:")


def test_timing_is_opt_in():
    _, rep = structured("check", FIX / "coupled.problem")
    assert "elapsed_seconds" not in rep
    _, rep = structured("check", FIX / "coupled.problem", "--timing")
    assert rep["elapsed_seconds"] >= 0


def test_output_file(tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run("check", FIX / "coupled.problem", "--format", "structured", "--output", out)
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["command"] == "check"
