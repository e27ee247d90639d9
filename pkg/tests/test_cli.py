import json
import subprocess
import sys

import pytest

from kthboot import cli, harness

FAST = ["--d", "5", "--n", "30", "--k", "2", "--b1", "29", "--reps", "6", "--methods", "GB,MB"]


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert cli.main(["run", *FAST, "--rho", "0.2", "0.8", "--out", str(out)]) == 0
    tab = harness.table_from_csv(out.read_text())
    assert len(tab) == 4 and tab.methods == ["GB", "MB"]


def test_run_markdown_to_stdout(capsys):
    assert cli.main(["run", *FAST, "--case", "symmetric", "--format", "markdown"]) == 0
    assert "Panel B: Symmetric" in capsys.readouterr().out


def test_no_timing_is_byte_stable(tmp_path):
    paths = [tmp_path / f"{i}.csv" for i in range(2)]
    for p, th in zip(paths, ("1", "2")):
        assert cli.main(["run", *FAST, "--threads", th, "--no-timing", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"design": ["I", "II"], "rho": 0.5, "n": 30, "d": 4, "B1": 19, "reps": 3, "methods": ["RB"]}))
    out = tmp_path / "t.csv"
    assert cli.main(["run", "--config", str(cfg), "--design", "II", "--out", str(out)]) == 0
    rows = list(harness.table_from_csv(out.read_text()))
    assert [(r.design, r.rho, r.method) for r in rows] == [("II", 0.5, "RB")]


def test_db_note_on_stderr(capsys):
    assert cli.main(["run", *FAST, "--methods", "DB", "--b2", "5", "--reps", "2"]) == 0
    assert "beta(0.1)" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--alpha", "2"],
        ["run", "--methods", "XB"],
        ["run", "--config", "/nonexistent.json"],
        ["diagnostics", "--k", "9", "--d", "3"],
    ],
)
def test_config_error_exit_code(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_argparse_error_exit_code():
    with pytest.raises(SystemExit) as ei:
        cli.main(["run", "--design", "IV"])
    assert ei.value.code == 2


def test_runtime_failure_exit_code(tmp_path, capsys):
    assert cli.main(["run", *FAST, "--out", str(tmp_path / "missing" / "t.csv")]) == cli.EXIT_RUNTIME
    assert "runtime failure" in capsys.readouterr().err


def test_checkpoint_dir_resume(tmp_path):
    ck = tmp_path / "ck"
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["run", *FAST, "--no-timing", "--checkpoint-dir", str(ck), "--out", str(a)]) == 0
    assert cli.main(["run", *FAST, "--no-timing", "--checkpoint-dir", str(ck), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_diagnostics_command(tmp_path):
    out = tmp_path / "d.csv"
    argv = ["diagnostics", "--d", "40", "--n", "60", "--k0", "3", "--rho", "0", "--out", str(out)]
    assert cli.main(argv) == 0
    text = out.read_text()
    for name in ("poisson_gap", "cornish_fisher", "remainder_rd", "block_exceedance"):
        assert name in text


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "kthboot.cli", "run", "--alpha", "0"], capture_output=True, text=True)
    assert res.returncode == 2
    res = subprocess.run([sys.executable, "-m", "kthboot.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "diagnostics" in res.stdout
