"""Command line entry point: exit codes and output artifacts."""

import numpy as np
import pytest

from igabem import cli


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    assert "--preset" in capsys.readouterr().out


def test_unknown_preset_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--preset", "torus"])
    assert exc.value.code == 2


def test_bad_configuration_returns_two(tmp_path, capsys):
    code = cli.main(
        ["--preset", "hyper-pacman", "--theta", "1.7", "--out", str(tmp_path)]
    )
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_small_run_writes_artifacts(tmp_path, capsys):
    code = cli.main(
        [
            "--preset", "hyper-pacman",
            "--max-dof", "8",
            "--out", str(tmp_path),
            "--dump-indicators",
        ]
    )
    assert code == 0
    rows = (tmp_path / "run.csv").read_text().strip().splitlines()
    assert rows[0].startswith("ell,knots,dim,eta")
    nrec = len(rows) - 1
    assert nrec >= 2
    assert len(list(tmp_path.glob("step-*.knots"))) == nrec
    assert len(list(tmp_path.glob("indicators-*.csv"))) == nrec
    head = (tmp_path / "indicators-0.csv").read_text().splitlines()[0]
    assert head == "node,res,osc,eta,mu"
    rate = float((tmp_path / "rates.txt").read_text())
    assert np.isfinite(rate) or np.isnan(rate)
    assert "dim" in capsys.readouterr().out


def test_uniform_flag_runs(tmp_path):
    code = cli.main(
        [
            "--preset", "weak-pacman",
            "--uniform",
            "--max-dof", "8",
            "--out", str(tmp_path),
        ]
    )
    assert code == 0
    rows = (tmp_path / "run.csv").read_text().strip().splitlines()[1:]
    dims = [int(r.split(",")[2]) for r in rows]
    assert dims[-1] > 8
    # uniform bisection adds one multiplicity-one node per element
    knots = [int(r.split(",")[1]) for r in rows]
    assert all(b == 2 * a - 2 for a, b in zip(knots, knots[1:]))
