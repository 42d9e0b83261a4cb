import csv
import json

import pytest

from bubblestrip import cli, reduction


def _run(tmp_path, cmd, text=None, extra=()):
    argv = [cmd, "--out", str(tmp_path)]
    if text is not None:
        cfg = tmp_path / "run.cfg"
        cfg.write_text(text)
        argv += ["--config", str(cfg)]
    return cli.main(argv + list(extra))


def _rows(tmp_path, cmd):
    with open(tmp_path / f"{cmd}.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_constants_report(tmp_path):
    assert _run(tmp_path, "constants", "quadrature.mc_samples = 50000") == 0
    rows = {r["name"]: r for r in _rows(tmp_path, "constants")}
    assert float(rows["kappa"]["value"]) == 1.0
    assert float(rows["kappa"]["residual"]) == 0.0
    for name, r in rows.items():
        if name.startswith("identity:"):
            assert float(r["residual"]) < 1e-6
        if name.startswith("mc:"):
            assert abs(float(r["residual"])) < 4
            assert "seed=20241016" in r["provenance"]
    meta = json.loads((tmp_path / "constants.json").read_text())
    assert meta["command"] == "constants"
    assert meta["config"]["quadrature.mc_samples"] == 50000


def test_malformed_config_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "constants", "dimension.N = 5\ndimension.k = 3") == 2
    assert "2k < N-2" in capsys.readouterr().err


def test_reduce_symmetric_default(tmp_path):
    assert _run(tmp_path, "reduce") == 0
    rows = {r["quantity"]: r for r in _rows(tmp_path, "reduce")}
    assert all(float(rows[f"x{h}"]["value"]) == 0.0 for h in range(1, 6))
    assert float(rows["mu"]["value"]) == pytest.approx(0.7093055281649766, rel=1e-14)


def test_sweep_slope(tmp_path):
    assert _run(tmp_path, "sweep", extra=["--threads", "2"]) == 0
    fit = [r for r in _rows(tmp_path, "sweep") if r["row"] == "fit"][0]
    assert float(fit["slope"]) == pytest.approx(6.0, rel=1e-10)
    assert float(fit["target"]) == 6.0


def test_residual_slope(tmp_path):
    text = "residual.mu_count = 3\ncloud.shells = 8\ncloud.sobol = 12\ncloud.refine = False"
    assert _run(tmp_path, "residual", text) == 0
    fit = [r for r in _rows(tmp_path, "residual") if r["row"] == "fit"][0]
    assert -2.3 <= float(fit["slope"]) <= -1.7
    assert fit["refined_slope"] == ""


def test_project_report(tmp_path):
    text = "project.mu = 20.0\ncloud.shells = 6\ncloud.sobol = 8"
    assert _run(tmp_path, "project", text) == 0
    rows = _rows(tmp_path, "project")
    summary = rows[-1]
    assert summary["point"] == "max"
    assert 0 < float(summary["domination_ratio"]) <= 1.0
    inside = [r for r in rows[:-1] if r["expansion_dev"] != ""]
    assert inside and all(float(r["expansion_dev"]) > 0 for r in inside)


def test_green_report(tmp_path):
    assert _run(tmp_path, "green", "green.pairs = 5", ["--seed", "3", "--tol", "1e-9"]) == 0
    rows = _rows(tmp_path, "green")
    assert len(rows) == 5
    for r in rows:
        assert float(r["tail"]) <= 1e-9
        assert float(r["symmetry_residual"]) < 2 and float(r["periodicity_residual"]) < 2


def test_identical_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    text = "quadrature.mc_samples = 20000\ngreen.pairs = 4"
    for d in (a, b):
        d.mkdir()
        for cmd in ("constants", "green", "sweep"):
            assert _run(d, cmd, text, ["--seed", "99"]) == 0
    for cmd in ("constants", "green", "sweep"):
        assert (a / f"{cmd}.csv").read_bytes() == (b / f"{cmd}.csv").read_bytes()
        assert (a / f"{cmd}.json").read_bytes().replace(b"/a/", b"/b/") == \
            (b / f"{cmd}.json").read_bytes()


def test_seed_changes_monte_carlo_rows(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d, seed in ((a, "1"), (b, "2")):
        d.mkdir()
        assert _run(d, "constants", "quadrature.mc_samples = 20000", ["--seed", seed]) == 0
    assert (a / "constants.csv").read_bytes() != (b / "constants.csv").read_bytes()


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(reduction, "BRACKET", (10.0, 100.0))
    assert _run(tmp_path, "reduce") == 3


def test_truncation_exit_code(tmp_path):
    assert _run(tmp_path, "green", "green.pairs = 1", ["--tol", "1e-30"]) == 4


def test_internal_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg, threads):
        raise RuntimeError("boom")
    monkeypatch.setitem(cli.COMMANDS, "reduce", boom)
    assert _run(tmp_path, "reduce") == 5


def test_bad_flags(tmp_path):
    assert _run(tmp_path, "reduce", extra=["--threads", "0"]) == 2
    assert _run(tmp_path, "reduce", extra=["--seed", "-1"]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["nonsense"])
    assert info.value.code == 2
