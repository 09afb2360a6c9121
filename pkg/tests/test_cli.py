import json

import pytest

from jointsurv import cli
from jointsurv.numerics import ConvergenceError

REPORT_KEYS = {
    "version", "command", "inputs", "method", "horizon_years", "p0", "p1_over_p0",
    "joint", "duration", "default_correlations", "stderr", "warnings",
}


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_survival_table(capsys, industrials_csv, tmp_path):
    js = tmp_path / "s.json"
    code, out, _ = run(capsys, "survival", "--firms", industrials_csv, "--json", js)
    assert code == 0
    rows = {line.split()[0]: line.split() for line in out.splitlines()[1:]}
    assert float(rows["AA"][2]) == pytest.approx(0.047, abs=0.001)
    assert float(rows["DD"][2]) == pytest.approx(0.0002, abs=0.0001)
    rep = json.loads(js.read_text())
    assert REPORT_KEYS <= rep.keys()
    assert rep["horizon_years"] == 5.0 and rep["method"] == "closed_form"
    assert [f["ticker"] for f in rep["firms"]] == ["AA", "DD", "DOW", "IP", "WY"]


def test_empty_firm_list(capsys, tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("ticker,d_over_v0,sigma,q,lambda_mode,mu_mode\n")
    code, _, err = run(capsys, "survival", "--firms", p)
    assert code == 2 and "no firms" in err


@pytest.mark.parametrize(
    "body",
    ["ticker,d_over_v0,sigma,q,lambda_mode,mu_mode\nX,1.5,0.3,0,r,r\n", "nonsense\n"],
)
def test_bad_firm_file(capsys, tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    code, _, err = run(capsys, "survival", "--firms", p)
    assert code == 2 and "line" in err


def test_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "survival", "--firms", tmp_path / "nope.csv")
    assert code == 2


def test_usage_errors(capsys, industrials_csv):
    with pytest.raises(SystemExit) as e:
        cli.main(["joint", "--firms", str(industrials_csv)])  # neither --xi nor --corr-file
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["joint", "--firms", str(industrials_csv), "--xi", "0.1", "--method", "exact"])
    assert e.value.code == 2
    capsys.readouterr()


def test_joint_perturbation(capsys, industrials_csv, tmp_path):
    js = tmp_path / "j.json"
    code, out, _ = run(capsys, "joint", "--firms", industrials_csv, "--xi", 0.0, "--json", js)
    assert code == 0
    rep = json.loads(js.read_text())
    assert REPORT_KEYS <= rep.keys()
    assert rep["method"] == "perturbation"
    assert rep["joint"] == pytest.approx(rep["p0"], abs=1e-15)
    assert rep["p0"] == pytest.approx(0.82, abs=0.005)
    assert len(rep["default_correlations"]) == 10
    assert rep["default_correlations"][0]["pair"] == ["AA", "DD"]
    assert rep["inputs"]["quadrature"]["rel_tol"] == 1e-7
    assert rep["stderr"] is None


def test_joint_methods_agree_at_zero(capsys, industrials_csv, tmp_path):
    reps = {}
    for method in ("perturbation", "copula", "mc"):
        js = tmp_path / f"{method}.json"
        extra = ["--paths", 10000, "--steps-per-year", 12] if method == "mc" else []
        assert run(capsys, "joint", "--firms", industrials_csv, "--xi", 0, "--method", method, "--json", js, *extra)[0] == 0
        reps[method] = json.loads(js.read_text())
    assert reps["copula"]["joint"] == pytest.approx(reps["perturbation"]["joint"], abs=1e-12)
    assert set(reps["copula"]) == set(reps["perturbation"]) == set(reps["mc"])
    assert reps["perturbation"]["chi"] is None and reps["copula"]["numerical_error"] is None


def test_joint_mc(capsys, industrials_csv, tmp_path):
    js = tmp_path / "mc.json"
    code, out, _ = run(
        capsys, "joint", "--firms", industrials_csv, "--xi", 0.1, "--method", "mc",
        "--paths", 20000, "--steps-per-year", 52, "--seed", 3, "--json", js,
    )
    assert code == 0 and "+/-" in out
    rep = json.loads(js.read_text())
    assert rep["stderr"] > 0
    assert rep["inputs"]["simulation"]["seed"] == 3
    assert rep["inputs"]["simulation"]["paths"] == 20000


def test_corr_file(capsys, industrials_csv, tmp_path):
    c = tmp_path / "c.csv"
    tick = ["WY", "IP", "DOW", "DD", "AA"]
    rows = [",".join(tick)] + [",".join("1" if i == j else "0.2" for j in range(5)) for i in range(5)]
    c.write_text("\n".join(rows) + "\n")
    js1, js2 = tmp_path / "m.json", tmp_path / "e.json"
    assert run(capsys, "joint", "--firms", industrials_csv, "--corr-file", c, "--json", js1)[0] == 0
    assert run(capsys, "joint", "--firms", industrials_csv, "--xi", 0.2, "--json", js2)[0] == 0
    a, b = json.loads(js1.read_text()), json.loads(js2.read_text())
    assert a["joint"] == pytest.approx(b["joint"], abs=1e-12)
    assert a["inputs"]["correlation"]["kind"] == "matrix"


def test_bad_corr(capsys, industrials_csv, tmp_path):
    assert run(capsys, "joint", "--firms", industrials_csv, "--xi", -0.5)[0] == 2
    c = tmp_path / "c.csv"
    c.write_text("AA,DD\n1,0.1\n0.1,1\n")
    assert run(capsys, "joint", "--firms", industrials_csv, "--corr-file", c)[0] == 2


def test_nonconvergence_exit_code(capsys, industrials_csv, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("no luck")

    monkeypatch.setattr(cli, "joint_survival", boom)
    code, _, err = run(capsys, "joint", "--firms", industrials_csv, "--xi", 0.1)
    assert code == 3 and "no luck" in err


def test_table2(capsys, tmp_path):
    js = tmp_path / "t2.json"
    code, out, _ = run(capsys, "table2", "--json", js)
    assert code == 0
    rows = json.loads(js.read_text())["rows"]
    assert len(rows) == 6
    assert all(r["chi"] < 0 for r in rows)
    assert rows[0]["a_fp_over_sigma2"] == pytest.approx(0.0697, abs=0.0010)
    assert rows[0]["a_c_over_sigma2"] == pytest.approx(0.0717, abs=0.0005)
    assert rows[-1]["a_fp_over_sigma2"] == pytest.approx(2.71, abs=0.04)
    assert rows[-1]["a_c_over_sigma2"] == pytest.approx(2.87, abs=0.04)
    assert not any(r["flags"] for r in rows)
    assert out.count("ok") == 6


@pytest.mark.parametrize(
    "chi, expected",
    [(-1.8102, [0.842, 0.849, 0.858, 0.867, 0.877]), (-1.1383, [0.534, 0.563, 0.591, 0.619, 0.648])],
)
def test_sweep(capsys, tmp_path, chi, expected):
    js = tmp_path / "sw.json"
    code, _, _ = run(capsys, "sweep", "--chi", chi, "--n", 5, "--xi-grid", "0.1,0.2,0.3,0.4,0.5", "--json", js)
    assert code == 0
    got = [r["exact"] for r in json.loads(js.read_text())["rows"]]
    assert got == pytest.approx(expected, abs=0.001)


def test_sweep_zero_only(capsys, tmp_path):
    js = tmp_path / "sw.json"
    assert run(capsys, "sweep", "--chi", -1.8102, "--n", 5, "--xi-grid", "0", "--json", js)[0] == 0
    rep = json.loads(js.read_text())
    assert len(rep["rows"]) == 1 and rep["rows"][0]["exact"] == pytest.approx(rep["p0"])


def test_sweep_bad_grid(capsys):
    assert run(capsys, "sweep", "--chi", -1.0, "--n", 5, "--xi-grid", "a,b")[0] == 2
    assert run(capsys, "sweep", "--chi", -1.0, "--n", 0, "--xi-grid", "0.1")[0] == 2
