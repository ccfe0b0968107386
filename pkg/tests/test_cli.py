import json

import pytest

from tmml import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_json_roundtrip(capsys, tmp_path):
    out = tmp_path / "fit.json"
    code, text, _ = run(capsys, "fit", "--columns", "rm,lstat,ptratio", "--nu", "5", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["predictors"] == ["rm", "ptratio", "lstat"]
    assert cli.render(doc) + "\n" == text
    assert doc["codelength"]["total"] == pytest.approx(doc["objective"])


def test_select_roundtrip(capsys, tmp_path):
    out = tmp_path / "sel.json"
    code, text, _ = run(capsys, "select", "--scheme", "nested", "--top", "3", "--out", str(out), "--workers", "1")
    assert code == 0
    doc = json.loads(out.read_text())
    assert len(doc["ranked"]) == 3
    assert cli.render(doc) + "\n" == text


def test_select_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "select", "--scheme", "nested", "--criterion", "bic", "--out", str(a), "--workers", "1")
    run(capsys, "select", "--scheme", "nested", "--criterion", "bic", "--out", str(b), "--workers", "2")
    assert a.read_text() == b.read_text()


def test_simulate_and_cv_roundtrip(capsys, tmp_path):
    out = tmp_path / "sim.json"
    code, text, _ = run(capsys, "simulate", "--replications", "3", "--true-nu", "inf", "--sparsity", "sparse",
                        "--signal", "weak", "--out", str(out), "--workers", "1", "--seed", "4")
    assert code == 0
    doc = json.loads(out.read_text())
    assert cli.render(doc) + "\n" == text
    out2 = tmp_path / "cv.json"
    code, text, _ = run(capsys, "boston-cv", "--splits", "1", "--scheme", "nested", "--criteria", "mml",
                        "--out", str(out2), "--workers", "1")
    assert code == 0
    assert cli.render(json.loads(out2.read_text())) + "\n" == text


def test_posterior_command(capsys, tmp_path):
    csv = tmp_path / "d.csv"
    rows = ["a,b,c,y"] + [f"{i % 3},{(i * 7) % 5},{(i * i) % 11},{i * 0.5 + (i % 4)}" for i in range(30)]
    csv.write_text("\n".join(rows))
    out = tmp_path / "post.json"
    code, text, _ = run(capsys, "posterior", "--data", str(csv), "--target", "y", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert sum(doc["posteriors"]) == pytest.approx(1.0)
    assert len(doc["marginal_inclusion"]) == 3
    assert cli.render(doc) + "\n" == text


@pytest.mark.parametrize("argv", [
    ("fit", "--columns", "nope"),
    ("fit", "--data", "/missing.csv", "--target", "y"),
    ("fit", "--data", "/missing.csv"),
    ("select", "--dof-grid", "1"),
    ("fit", "--nu", "-3"),
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert json.loads(err)["error"] == "usage"


def test_bad_flag_exit_code(capsys):
    assert cli.main(["fit", "--criterion", "xyz"]) == 2


def test_numerical_failure(capsys, tmp_path):
    csv = tmp_path / "exact.csv"
    csv.write_text("x,y\n" + "\n".join(f"{i},{2 * i + 1}" for i in range(10)))
    code, _, err = run(capsys, "fit", "--data", str(csv), "--target", "y", "--nu", "5")
    assert code == 3
    assert json.loads(err)["error"] == "numerical"
