import os
import subprocess
import sys


from adaptrhc import cli, estimator


def run_cli(*argv):
    return cli.main(list(argv))


def short_args(tmp_path, name="out", days="0.3"):
    return ["--set", f"run.duration={days}", "--out-csv", str(tmp_path / f"{name}.csv"),
            "--out-svg", str(tmp_path / f"{name}.svg")]


def test_list_presets(capsys):
    assert run_cli("list-presets") == 0
    out = capsys.readouterr().out
    assert "case1" in out and "case2" in out


def test_run_writes_outputs(tmp_path):
    assert run_cli("run", "case1", *short_args(tmp_path)) == 0
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert len(lines) == 1 + 31
    assert lines[0].startswith("t,x1,x2,x3,y1,y2,y3,e_norm,u1,u2,u3,theta_hat_1")
    for kind in ("states", "controls", "estimates"):
        assert (tmp_path / f"out_{kind}.svg").is_file()


def test_noop_override_is_bitwise_identical(tmp_path):
    assert run_cli("run", "case1", *short_args(tmp_path, "a")) == 0
    assert run_cli("run", "case1", *short_args(tmp_path, "b"), "--set", "nrhc.t_s=0.01") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_missing_config(tmp_path, capsys):
    path = tmp_path / "missing.toml"
    assert run_cli("run", str(path)) == 2
    assert str(path) in capsys.readouterr().err


def test_bad_override_exit_code(tmp_path, capsys):
    assert run_cli("run", "case1", "--set", "nrhc.alpha=-1", *short_args(tmp_path)) == 2
    assert "nrhc.alpha" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path, capsys):
    code = run_cli("run", "case1", "--set", "nrhc.divergence_threshold=1.0", *short_args(tmp_path, days="1.0"))
    assert code == 3
    assert "divergence" in capsys.readouterr().err
    assert (tmp_path / "out.csv").is_file()


def test_verify_unknown_preset():
    assert run_cli("verify", "case9") == 2


def test_usage_error():
    assert run_cli("frobnicate") == 2


def test_run_case1_full_length(tmp_path):
    # samples at t = 0, 0.01, ..., 100 below the header
    code = run_cli("run", "case1", "--out-csv", str(tmp_path / "c1.csv"), "--out-svg", str(tmp_path / "c1.svg"))
    rows = len((tmp_path / "c1.csv").read_text().splitlines()) - 1
    assert (code, rows) == (0, 10001)


def test_verify_case1_passes(capsys):
    code = run_cli("verify", "case1")
    out = capsys.readouterr().out
    assert code == 0, out


def test_verify_catches_sign_flip(monkeypatch, capsys):
    original = estimator.estimator_rhs
    monkeypatch.setattr(estimator, "estimator_rhs", lambda D, e, gain=1.0: -original(D, e, gain))
    assert run_cli("verify", "case1") != 0
    row = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("estimator cancellation"))
    assert "FAIL" in row


def test_log_level_env(tmp_path):
    env = dict(os.environ, RHC_LOG="info")
    proc = subprocess.run([sys.executable, "-m", "adaptrhc", "run", "case1", *short_args(tmp_path, days="0.05")],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 0
    assert "INFO" in proc.stderr and proc.stdout == ""
    env["RHC_LOG"] = "error"
    proc = subprocess.run([sys.executable, "-m", "adaptrhc", "run", "case1", *short_args(tmp_path, days="0.05")],
                          env=env, capture_output=True, text=True)
    assert proc.stderr == ""
