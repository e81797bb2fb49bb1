import json
import subprocess
import sys

import pytest

from hcbcache.cli import (EXIT_COVERAGE, EXIT_DECODE, EXIT_PARSE, EXIT_SINGULAR,
                          VIOLATION_EXIT, ConfigParseError, main, parse_config, parse_grid)
from hcbcache.placement import Violation

EX3 = """
[network]
K_T = 4
K_R = 4
M_T = 2
M_R = 2
N = 4

[channel]
seed = 1
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_analyze_example_three(tmp_path, capsys):
    cfg = write(tmp_path, EX3)
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "F_HCB=16 F_NMA=72 G=2/9 DoF=4" in out
    rec = json.loads((tmp_path / "o" / "analyze.json").read_text())
    assert rec["mode"] == "direct" and rec["analysis"]["steps"] == 8
    assert (tmp_path / "o" / "analyze.csv").read_text().startswith("K_T,K_R,")


def test_analyze_routes_fractional_t(tmp_path, capsys):
    cfg = write(tmp_path, EX3.replace("K_T = 4", "K_T = 3"))
    assert main(["analyze", "--config", cfg]) == 0
    assert "memory-sharing plan" in capsys.readouterr().out


def test_analyze_routes_fractional_delta(tmp_path, capsys):
    text = EX3.replace("K_T = 4", "K_T = 10").replace("K_R = 4", "K_R = 8").replace(
        "M_R = 2", "M_R = 1")
    assert main(["analyze", "--config", write(tmp_path, text)]) == 0
    assert "(case-2): p=1/2 DoF=7" in capsys.readouterr().out


def test_analyze_caps_excess_memory(tmp_path, capsys):
    cfg = write(tmp_path, EX3.replace("M_T = 2", "M_T = 4"))
    assert main(["analyze", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "capped to M_T=2 M_R=2" in out and "DoF=4" in out


def test_analyze_rejects_with_class_status(tmp_path, capsys):
    cfg = write(tmp_path, EX3.replace("M_T = 2", "M_T = 0"))
    assert main(["analyze", "--config", cfg]) == VIOLATION_EXIT[Violation.NON_POSITIVE]
    cfg = write(tmp_path, EX3.replace("K_T = 4", "K_T = 1"))
    assert main(["analyze", "--config", cfg]) == VIOLATION_EXIT[Violation.LIBRARY_NOT_COVERED]
    # t values integral but D_T = 3/2
    text = "[network]\nK_T = 3\nK_R = 3\nM_T = 2\nM_R = 1\nN = 3\n"
    assert main(["analyze", "--config", write(tmp_path, text)]) == \
        VIOLATION_EXIT[Violation.NON_INTEGER_D_T]
    assert "NON_INTEGER_D_T" in capsys.readouterr().err
    assert len(set(VIOLATION_EXIT.values())) == len(Violation)


def test_missing_field_is_parse_error(tmp_path, capsys):
    cfg = write(tmp_path, EX3.replace("M_R = 2\n", ""))
    assert main(["analyze", "--config", cfg]) == EXIT_PARSE
    assert "missing M_R" in capsys.readouterr().err
    assert main(["analyze", "--config", str(tmp_path / "none.toml")]) == EXIT_PARSE
    assert main(["analyze", "--config", write(tmp_path, "[network")]) == EXIT_PARSE


def test_schedule_example_three(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["schedule", "--config", write(tmp_path, EX3), "--out", str(out)]) == 0
    assert "steps=8 packets=32 DoF=4 coverage=pass" in capsys.readouterr().out
    assert len((out / "schedule.jsonl").read_text().splitlines()) == 8
    assert json.loads((out / "coverage.json").read_text())["ok"] is True


def test_schedule_demands(tmp_path, capsys):
    for demand in ('"distinct"', "[0, 0, 0, 0]", '"uniform-random(3)"'):
        cfg = write(tmp_path, f"demand = {demand}\n" + EX3)
        assert main(["schedule", "--config", cfg]) == 0
        assert "steps=8" in capsys.readouterr().out
    text = "[network]\nK_T = 2\nK_R = 4\nM_T = 2\nM_R = 1\nN = 4\n"
    assert main(["schedule", "--config", write(tmp_path, text)]) == 0
    assert "steps=12" in capsys.readouterr().out


def test_schedule_coverage_failure(tmp_path, monkeypatch, capsys):
    from hcbcache import scheduler
    real = scheduler.build_schedule
    monkeypatch.setattr(scheduler, "build_schedule",
                        lambda d, p: real(d, p).select(list(range(1, 8))))
    out = tmp_path / "o"
    assert main(["schedule", "--config", write(tmp_path, EX3), "--out", str(out)]) == EXIT_COVERAGE
    assert str(out / "coverage.json") in capsys.readouterr().err


@pytest.mark.parametrize("bad", ["[0, 1]", "[0, 1, 2, 9]", '"every"', '"uniform-random(x)"'])
def test_bad_demands(tmp_path, bad):
    assert main(["schedule", "--config", write(tmp_path, f"demand = {bad}\n" + EX3)]) == EXIT_PARSE


def test_simulate_example_three(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--config", write(tmp_path, EX3), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "steps_passed=8/8" in text and "all steps pass" in text
    summary = json.loads((out / "simulate.json").read_text())
    assert summary["noiseless"]["max_residual"] < 1e-9
    assert len((out / "steps.csv").read_text().splitlines()) == 9


def test_simulate_tiny_tolerance_fails(tmp_path):
    assert main(["simulate", "--config", write(tmp_path, EX3), "--tol", "1e-18"]) == EXIT_DECODE


def test_simulate_noise(tmp_path, capsys):
    assert main(["simulate", "--config", write(tmp_path, EX3), "--noise", "1e-4"]) == 0
    assert "noisy (variance 0.0001)" in capsys.readouterr().out


def test_simulate_degenerate_channel(tmp_path, capsys):
    text = EX3 + 'model = "rank-one"\nretries = 0\n'
    assert main(["simulate", "--config", write(tmp_path, text)]) == EXIT_SINGULAR
    assert "no well-conditioned channel after 1 draw" in capsys.readouterr().err
    text = EX3 + 'model = "rank-one"\nretries = 2\n'
    assert main(["simulate", "--config", write(tmp_path, text)]) == EXIT_SINGULAR
    assert "after 3 draw" in capsys.readouterr().err


def test_outputs_are_deterministic(tmp_path):
    cfg = write(tmp_path, EX3)
    for name in ("a", "b"):
        for cmd in ("analyze", "schedule", "simulate"):
            assert main([cmd, "--config", cfg, "--out", str(tmp_path / name)]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "--grid", "d=3,4;t=1-6;delta=1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 13
    assert main(["sweep", "--grid", ""]) == 0
    assert capsys.readouterr().out.strip().endswith("bound_stepwise")
    assert main(["sweep", "--grid", "d=2;t=1;delta=5"]) == 0
    assert main(["sweep", "--grid", "x=1"]) == EXIT_PARSE


def test_sweep_from_config(tmp_path, capsys):
    cfg = write(tmp_path, EX3 + '\n[sweep]\ngrid = "d=3;t=1-2;delta=1"\n')
    assert main(["sweep", "--config", cfg]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
    assert main(["sweep", "--config", write(tmp_path, EX3, "plain.toml")]) == EXIT_PARSE


def test_grid_parser():
    assert parse_grid("d=3,4;t=1-3;delta=2") == {"d": [3, 4], "t": [1, 2, 3], "delta": [2]}
    assert parse_grid("") == {"d": [], "t": [], "delta": []}
    with pytest.raises(ConfigParseError):
        parse_grid("d=a")


def test_fractional_memory_strings():
    rc = parse_config('[network]\nK_T = 4\nK_R = 4\nM_T = "3/2"\nM_R = 2\nN = 4\n')
    assert str(rc.network.M_T) == "3/2"
    with pytest.raises(ConfigParseError):
        parse_config("[network]\nK_T = 4\nK_R = 4\nM_T = 1.5\nM_R = 2\nN = 4\n")


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, EX3)
    res = subprocess.run([sys.executable, "-m", "hcbcache", "analyze", "--config", cfg],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "G=2/9" in res.stdout
    res = subprocess.run([sys.executable, "-m", "hcbcache", "bogus"], capture_output=True)
    assert res.returncode == 2
