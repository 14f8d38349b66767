#!/usr/bin/env python3
"""
End-to-end tests of the command-line front end.
"""
import sys
from pathlib import Path

import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from cli import main, EXIT_OK, EXIT_SPEC
from lds import load_point_set


@pytest.fixture
def cli(tmp_path):
    """Invoke main() with a config path that does not exist, so built-in defaults apply"""
    config = str(tmp_path / "no_config.json")

    def invoke(*args):
        return main([*args, "--config", config])
    return invoke


def _data_lines(path):
    return [line for line in Path(path).read_text().splitlines() if line and not line.startswith('#')]


def test_gen_points_sobol_rounds_up(cli, tmp_path):
    out = tmp_path / "sobol.txt"
    assert cli("gen-points", "--kind", "sobol", "--n", "100", "--dim", "3", "--out", str(out)) == EXIT_OK
    assert len(_data_lines(out)) == 128
    assert Path(out).read_text().startswith("# dim=3 n=128 generator=sobol")


def test_gen_points_uniform_reproducible(cli, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        assert cli("gen-points", "--kind", "uniform", "--n", "20", "--dim", "2", "--seed", "5",
                   "--out", str(out)) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_gen_points_unknown_kind(cli, tmp_path):
    assert cli("gen-points", "--kind", "lattice", "--n", "8", "--dim", "2") == EXIT_SPEC


def test_discrepancy_of_point_file(cli, tmp_path, capsys):
    path = tmp_path / "mid.txt"
    path.write_text("0.5\n")
    assert cli("discrepancy", "--path", str(path), "--linf") == EXIT_OK
    out = capsys.readouterr().out
    assert "0.288675134595" in out
    assert "LINF_EXACT" in out


def test_discrepancy_bad_file_exit_code(cli, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0.5 0.5\n1.5 0.2\n")
    assert cli("discrepancy", "--path", str(path)) == EXIT_SPEC


def test_discrepancy_needs_input(cli):
    assert cli("discrepancy") == EXIT_SPEC


def test_discrepancy_csv_output(cli, tmp_path):
    out = tmp_path / "report.csv"
    assert cli("discrepancy", "--kind", "halton", "--n", "32", "--dim", "2", "--mc-check",
               "--out", str(out)) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "set_id,dim,n,method,l2_star,mc_std_error"
    assert [line.split(",")[3] for line in lines[1:]] == ["WARNOCK", "MONTECARLO"]


def test_optimize_subset(cli, tmp_path):
    out = tmp_path / "d2_n8.txt"
    assert cli("optimize-subset", "--k", "8", "--dim", "2", "--ta-iters", "300", "--out", str(out)) == EXIT_OK
    ps = load_point_set(out)
    assert ps.n == 8 and ps.dim == 2


def test_run_then_analyze(cli, tmp_path):
    records = tmp_path / "records"
    for sampler in ("sobol-inf", "uniform-inf", "sobol-16"):
        assert cli("run", "--fid", "1", "--dim", "2", "--sampler", sampler, "--budget", "200",
                   "--out", str(records)) == EXIT_OK
    assert len(list(records.glob("*.json"))) == 3
    assert cli("analyze", str(records)) == EXIT_OK
    assert (tmp_path / "auc.csv").exists()
    assert (tmp_path / "eaf_curve.csv").exists()


def test_run_rejects_endless_optimized(cli, tmp_path):
    assert cli("run", "--fid", "1", "--dim", "2", "--sampler", "optimized-inf",
               "--out", str(tmp_path)) == EXIT_SPEC


def test_experiment_bad_spec(cli, tmp_path):
    spec = tmp_path / "bad.spec"
    spec.write_text("dims = 2\nsamplers = sobol\ncolour = blue\n")
    assert cli("experiment", str(spec)) == EXIT_SPEC


def test_experiment_from_spec(cli, tmp_path):
    spec = tmp_path / "tiny.spec"
    spec.write_text(
        "dims = 2\nfids = 1\niids = 1\nsamplers = sobol\ncache_sizes = inf\nbudget_multiplier = 100\n"
    )
    out = tmp_path / "tiny"
    assert cli("experiment", str(spec), "--out", str(out), "--seed", "3") == EXIT_OK
    assert len(list((out / "records").glob("*.json"))) == 1
    assert (out / "auc.csv").exists()
