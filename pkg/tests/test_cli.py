import json
import subprocess
import sys

import pytest

from lincvx.cli import PIPELINES, Scenario, UsageError, main, parse_point, run, sweep


def read_report(out, sid):
    return json.loads((out / f"{sid}.report.json").read_text())


def test_tau_example(tmp_path, capsys):
    code = main(["--domain", "EGG24", "--pipeline", "tau", "--param", "zeta=1,0", "--param", "v=0,1",
                 "--param", "eps=1e-4", "--param", "expect=0.1", "--out", str(tmp_path)])
    assert code == 0
    d = read_report(tmp_path, "EGG24-tau")
    assert d["constants"]["tau"] == pytest.approx(0.1, rel=1e-4)
    assert d["passed"] is True
    assert (tmp_path / "EGG24-tau.series.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_threshold_failure_exit_1(tmp_path):
    code = main(["--domain", "EGG24", "--pipeline", "tau", "--param", "zeta=1,0", "--param", "v=0,1",
                 "--param", "eps=1e-4", "--param", "expect=0.2", "--out", str(tmp_path)])
    assert code == 1
    assert read_report(tmp_path, "EGG24-tau")["passed"] is False


def test_unknown_domain(tmp_path):
    assert main(["--domain", "NOPE", "--pipeline", "tau", "--out", str(tmp_path)]) == 2
    assert not list(tmp_path.glob("*.json"))


def test_unknown_pipeline(tmp_path):
    assert main(["--domain", "BALL2", "--pipeline", "nope", "--out", str(tmp_path)]) == 2
    with pytest.raises(UsageError):
        run(Scenario("x", "BALL2", "nope"))


def test_missing_flags_and_bad_param(tmp_path):
    assert main(["--pipeline", "tau", "--out", str(tmp_path)]) == 2
    assert main(["--domain", "BALL2", "--pipeline", "tau", "--param", "oops", "--out", str(tmp_path)]) == 2


def test_empty_sweep_rejected(tmp_path):
    assert main(["--domain", "BALL2", "--pipeline", "hefer", "--sweep", "M=", "--out", str(tmp_path)]) == 2
    with pytest.raises(UsageError):
        sweep(Scenario("x", "BALL2", "hefer"), "M", [])


def strip(d):
    d = dict(d)
    d.pop("runtimes")
    d.pop("scenario")
    d["thresholds"] = {k: v for k, v in d["thresholds"].items()}
    return d


def test_single_value_sweep_matches_run(tmp_path):
    base = Scenario("h", "BALL2", "hefer", {"count": 200})
    r1 = run(Scenario("h", "BALL2", "hefer", {"count": 200, "M": 2}))
    (r2,) = sweep(base, "M", [2], tmp_path)
    a, b = strip(r1.to_dict()), strip(r2.to_dict())
    a["notes"] = b["notes"] = None
    assert a == b
    assert (tmp_path / "h-sweep-M.series.csv").exists()


def test_deterministic_reports(tmp_path):
    args = ["--domain", "EGG24", "--pipeline", "hefer", "--param", "count=300", "--seed", "7"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    a = read_report(tmp_path / "a", "EGG24-hefer")
    b = read_report(tmp_path / "b", "EGG24-hefer")
    assert strip(a) == strip(b)
    for key in ("scenario", "pipeline", "domain", "passed", "constants", "residuals", "deltas",
                "grid_levels", "runtimes", "thresholds", "notes"):
        assert key in a


def test_scenario_file(tmp_path):
    f = tmp_path / "sc.json"
    f.write_text(json.dumps({"id": "s1", "domain": "EGG24", "pipeline": "tau",
                             "params": {"zeta": "1,0", "v": "0,1", "eps": 1e-4}}))
    assert main(["--scenario", str(f), "--out", str(tmp_path)]) == 0
    assert read_report(tmp_path, "s1")["constants"]["tau"] == pytest.approx(0.1, rel=1e-4)


def test_parse_point():
    assert list(parse_point("0.6,0.8j")) == [0.6, 0.8j]
    assert list(parse_point([1, 0])) == [1, 0]


def test_pipeline_names():
    assert len(PIPELINES) == len(set(PIPELINES)) == 17


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "lincvx.cli", "--domain", "BALL2", "--pipeline", "tau",
                        "--param", "zeta=1,0", "--param", "v=0,1", "--param", "eps=1e-2",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0
    assert read_report(tmp_path, "BALL2-tau")["constants"]["tau"] == pytest.approx(0.1, rel=1e-4)
