"""Command-line interface: artifacts, formats, config merging, exit codes."""

import json
import subprocess
import sys

import pytest

from andloc import anderson, cli, critical, saw
from andloc.rng import site_uniform


def run_main(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(args, capsys):
    code, out, err = run_main(args, capsys)
    assert code == 0, err
    return json.loads(out)


def test_console_script_installed():
    proc = subprocess.run(["andloc", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    import andloc
    assert proc.stdout.strip() == andloc.__version__


def test_saw_csv_header_exact(capsys):
    code, out, _ = run_main(["saw", "--dim", "2", "--nmax", "5",
                             "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "n,c_n"
    assert lines[1] == "0,1"
    assert lines[-1] == "5,284"


def test_saw_artifact_envelope(capsys):
    doc = run_json(["saw", "--dim", "2", "--nmax", "4"], capsys)
    assert set(doc) >= {"command", "config", "versions", "seed", "result",
                        "wallclock"}
    assert doc["command"] == "saw"
    assert doc["config"]["dim"] == 2
    assert doc["config"]["nmax"] == 4
    assert doc["result"]["series"]["totals"] == ["1", "4", "12", "36", "100"]
    assert doc["result"]["trivial_upper_bound"] == 3.0
    assert "lambda" in doc["config"] and "lambda_" not in doc["config"]


def test_artifact_rerun_identical_minus_wallclock(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        code = cli.main(["moment", "--dim", "2", "--L", "3", "--samples", "6",
                         "--distances", "1,2", "--nmax", "6",
                         "--out", str(p)])
        assert code == 0
    docs = [json.loads(p.read_text()) for p in paths]
    for doc in docs:
        doc.pop("wallclock")
        doc["config"].pop("out")
    assert json.dumps(docs[0], sort_keys=True) == json.dumps(docs[1], sort_keys=True)


def test_critical_default_full_table_csv(capsys):
    code, out, _ = run_main(["critical", "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "quantity,2,3,4,5,6"
    rows = {ln.split(",")[0]: ln.split(",")[1:] for ln in lines[1:]}
    assert [float(v) for v in rows["lambda_and"]] == [22.8, 50.3, 81.5, 114.1, 148.0]
    assert [float(v) for v in rows["lambda_ag"]] == [100.2, 167.0, 238.1, 312.3, 389.1]


def test_critical_single_dim(capsys):
    doc = run_json(["critical", "--dim", "4"], capsys)
    reports = doc["result"]["reports"]
    assert len(reports) == 1
    assert reports[0]["dimension"] == 4
    assert reports[0]["lambda_and_rounded"] == 81.5


def test_critical_custom_mu(capsys):
    doc = run_json(["critical", "--dim", "3", "--mu", "4.7114"], capsys)
    rep = doc["result"]["reports"][0]
    assert rep["mu_upper"] == 4.7114
    assert rep["lambda_and"] == pytest.approx(50.13563175903109, rel=1e-12)


def test_critical_unknown_dim_exits_2(capsys):
    code, _, err = run_main(["critical", "--dims", "7..9"], capsys)
    assert code == 2
    assert "connective" in err


def test_green_matches_library(capsys):
    doc = run_json(["green", "--dim", "2", "--L", "3", "--seed", "5",
                    "--x", "2,0", "--y", "0,0", "--deleted", "1,1"], capsys)
    region = anderson.make_region(2, 3, [(1, 1)])
    sample = anderson.sample_disorder(region, 5)
    ev = anderson.green(region, 30.0, sample, 0.01j, (2, 0), (0, 0))
    got = doc["result"]["evaluation"]["value"]
    assert complex(got["re"], got["im"]) == ev.value
    assert doc["result"]["evaluation"]["residual"] < 1e-10
    assert doc["result"]["sample"]["deleted"] == [[1, 1]]
    assert doc["result"]["sample"]["seed"] == 5


def test_green_singular_exits_4(capsys):
    z = 30.0 * site_uniform(0, (0,))
    code, _, err = run_main(["green", "--dim", "1", "--L", "0", "--x", "0",
                             "--y", "0", "--z-real", repr(z),
                             "--z-imag", "0"], capsys)
    assert code == 4
    assert "singular" in err.lower()


def test_moment_csv_and_ceiling(capsys):
    code, out, _ = run_main(["moment", "--dim", "2", "--L", "4", "--samples",
                             "12", "--distances", "1..3", "--nmax", "8",
                             "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "distance,mean,stderr,ceiling"
    assert len(lines) == 4
    # ceilings attach at the default s = s_crit(lambda)
    assert all(ln.split(",")[3] not in ("", "None") for ln in lines[1:])


def test_moment_custom_s_has_no_ceiling(capsys):
    doc = run_json(["moment", "--dim", "2", "--L", "3", "--samples", "6",
                    "--s", "0.5", "--distances", "1,2", "--nmax", "6"], capsys)
    ests = doc["result"]["estimates"]
    assert all(e["ceiling"] is None for e in ests)
    assert "s_crit" in doc["result"]["note"]
    assert doc["formulas"] == {
        k: v for k, v in cli.moments.CEILING_FORMULAS.items()}


def test_verify_identity_checks_pass(capsys):
    doc = run_json(["verify", "--only", "depleted,resolvent,schur",
                    "--trials", "6"], capsys)
    checks = {c["name"]: c for c in doc["result"]["checks"]}
    assert set(checks) == {"depleted", "resolvent", "schur"}
    assert all(c["status"] == "pass" for c in checks.values())
    assert checks["depleted"]["detail"]["max_discrepancy"] < 1e-9
    assert doc["result"]["all_passed"]


def test_verify_identity_checks_pass_at_weak_coupling(capsys):
    doc = run_json(["verify", "--only", "depleted,schur", "--trials", "5",
                    "--lambda", "5"], capsys)
    assert doc["result"]["all_passed"]


def test_verify_apriori_and_drb(capsys):
    doc = run_json(["verify", "--only", "apriori,drb", "--trials", "10",
                    "--n-env", "2", "--n-omega", "48"], capsys)
    checks = {c["name"]: c for c in doc["result"]["checks"]}
    assert checks["apriori"]["status"] == "pass"
    assert checks["apriori"]["detail"]["max_ratio"] <= 1.0 + 1e-8
    assert checks["drb"]["status"] == "pass"


def test_verify_ceiling_skipped_when_criterion_not_met(capsys):
    code, out, _ = run_main(["verify", "--only", "ceiling", "--lambda", "5",
                             "--samples", "8", "--L", "4", "--nmax", "8"],
                            capsys)
    assert code == 0  # skipped checks do not fail the run
    doc = json.loads(out)
    (check,) = doc["result"]["checks"]
    assert check["status"] == "skipped"
    assert "criterion not met" in check["detail"]["reason"]


def test_verify_ceiling_and_decay_pass(capsys):
    doc = run_json(["verify", "--only", "ceiling,decay", "--samples", "40",
                    "--L", "6", "--nmax", "12"], capsys)
    checks = {c["name"]: c for c in doc["result"]["checks"]}
    assert checks["ceiling"]["status"] == "pass"
    assert checks["decay"]["status"] == "pass"
    assert checks["decay"]["detail"]["dominates_reference"]


def test_verify_decay_fails_against_bogus_reference(capsys):
    # mu far below any walk bound makes the reference rate unbeatable,
    # exercising the bound-failure exit path
    code, out, _ = run_main(["verify", "--only", "decay", "--mu", "0.3",
                             "--samples", "40", "--L", "6", "--nmax", "10"],
                            capsys)
    assert code == 1
    doc = json.loads(out)
    (check,) = doc["result"]["checks"]
    assert check["status"] == "fail"
    assert not doc["result"]["all_passed"]


def test_verify_unknown_check_exits_2(capsys):
    code, _, err = run_main(["verify", "--only", "nonsense"], capsys)
    assert code == 2
    assert "unknown checks" in err


def test_verify_csv_rejected(capsys):
    code, _, err = run_main(["verify", "--format", "csv", "--only", "apriori",
                             "--trials", "2"], capsys)
    assert code == 2


def test_saw_budget_exits_3(capsys):
    code, _, err = run_main(["saw", "--dim", "3", "--nmax", "10",
                             "--memory-budget", "1000"], capsys)
    assert code == 3
    assert "budget" in err


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dim": 2, "nmax": 6, "lambda": 12.5}))
    doc = run_json(["saw", "--config", str(cfg), "--nmax", "4"], capsys)
    assert doc["config"]["nmax"] == 4      # flag wins
    assert doc["config"]["dim"] == 2       # from file
    assert doc["config"]["lambda"] == 12.5


def test_config_file_unknown_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run_main(["saw", "--config", str(cfg)], capsys)
    assert code == 2
    assert "unknown config key" in err


def test_missing_config_file_exits_2(capsys):
    code, _, err = run_main(["saw", "--config", "/nonexistent.json"], capsys)
    assert code == 2


def test_threads_env_caps_workers(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ANDERSON_THREADS", "2")
    doc = run_json(["saw", "--dim", "2", "--nmax", "4", "--workers", "9"],
                   capsys)
    assert doc["config"]["workers"] == 2


def test_bad_threads_env_exits_2(capsys, monkeypatch):
    monkeypatch.setenv("ANDERSON_THREADS", "zero")
    code, _, err = run_main(["saw", "--dim", "2", "--nmax", "3"], capsys)
    assert code == 2
    assert "ANDERSON_THREADS" in err


def test_version_flag():
    proc = subprocess.run([sys.executable, "-m", "andloc.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
