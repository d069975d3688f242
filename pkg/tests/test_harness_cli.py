import io

import numpy as np
import pytest
from scipy.integrate import quad

from absde.cli import cli_main
from absde.config import ExperimentConfig, parse_config_text
from absde.errors import ConfigError, UnknownFixture
from absde.harness import convergence_csv, run_comparison, run_convergence_study, run_equality_check
from conftest import CONFIGS


def cfg_of(name, **kw):
    return ExperimentConfig.from_file(CONFIGS / name).override(**kw)


def run_cli(*argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = cli_main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


# ---- configuration ----------------------------------------------------------

def test_config_round_trip():
    text = "T = 1\ndelta = 0.1 + t/2\ngenerator1 = EY - 5\nmc.paths = 100\n"
    cfg = ExperimentConfig.from_text(text)
    assert cfg.to_text() == text
    assert ExperimentConfig.from_text(cfg.to_text()).values == cfg.values
    assert cfg.paths == 100 and cfg.T == 1.0


@pytest.mark.parametrize("text", ["bogus = 1", "T = 1\nT = 2", "T =", "just text"])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_config_default_horizon_K():
    cfg = ExperimentConfig.from_text("delta = 0.1 + t/2")
    d = cfg.delays()
    assert d.kind == "general" and d.horizon_K == pytest.approx(0.6)
    assert ExperimentConfig.from_text("delta = 0.3").delays().kind == "constant"


# ---- comparison harness -----------------------------------------------------

def test_first_example_ordered():
    report = run_comparison(cfg_of("example31.cfg"))
    assert report.min_diff >= -1e-8
    assert not report.violated and report.exit_code == 0
    assert report.y0_pair[0] >= report.y0_pair[1]


def test_identical_problems_zero_diff():
    cfg = cfg_of("example31.cfg", generator2="example31_f1", xi2="1")
    report = run_comparison(cfg)
    assert report.min_diff == 0.0
    assert report.violation_nodes == []


def test_constant_gap_matches_quadrature():
    report = run_comparison(cfg_of("constant_gap.cfg"))
    gap, _ = quad(lambda s: -10.0, 0.0, 1.0)
    assert report.min_diff == pytest.approx(gap, rel=1e-9)
    assert report.conditions[0].refuted
    assert report.exit_code == 1
    # the gap at each node is -10 (T - t)
    r = report.rows
    np.testing.assert_allclose(r.y1 - r.y2, -10 * (1.0 - r.time), atol=1e-9)


def test_swapped_pair_violates():
    report = run_comparison(cfg_of("example31_swapped.cfg"))
    assert report.violated and report.min_diff < 0
    assert report.conditions[0].refuted


def test_comparison_csv_reproducible():
    a = run_comparison(cfg_of("example31.cfg", n_steps=8)).csv_text()
    b = run_comparison(cfg_of("example31.cfg", n_steps=8)).csv_text()
    assert a == b
    assert a.splitlines()[0] == "step_index,time,node,state,Y1,Y2,diff"


def test_mc_comparison_runs_on_shared_paths():
    report = run_comparison(cfg_of("constant_gap.cfg", engine="mc", mc__paths=2000, n_steps=16))
    assert report.engine == "mc"
    assert report.min_diff == pytest.approx(-10.0, rel=0.05)


# ---- equality check -----------------------------------------------------------

def test_equality_identical_problems():
    rep = run_equality_check(cfg_of("example31.cfg", generator2="example31_f1", xi2="1"))
    assert rep.left_holds and rep.right_holds and rep.co_occur


def test_equality_first_example_equal_terminals():
    rep = run_equality_check(cfg_of("example31.cfg", xi2="1"))
    # drift gap is at least 2 at matched arguments, so Y0 differs by at least about 2T
    assert rep.y0_pair[0] - rep.y0_pair[1] >= 2.0 - 1e-6
    assert not rep.left_holds and not rep.right_holds and rep.co_occur


def test_equality_terminal_perturbation():
    rep = run_equality_check(cfg_of("example31.cfg", generator2="example31_f1", xi2="1",
                                    xi1_bump="32, 0.1"))
    assert not rep.terminal_equal
    assert not rep.left_holds and not rep.right_holds and rep.co_occur


def test_equality_requires_lattice():
    with pytest.raises(ConfigError):
        run_equality_check(cfg_of("example31.cfg", engine="mc"))


# ---- convergence study ----------------------------------------------------------

def test_convergence_linear_fixture():
    rows = run_convergence_study("linear_anticipated", [16, 32, 64, 128])
    errors = [r[2] for r in rows]
    assert all(a > b for a, b in zip(errors, errors[1:]))
    assert rows[-1][3] >= 0.8
    assert convergence_csv(rows).splitlines()[0] == "n,Y0,abs_error,order"


@pytest.mark.parametrize("name", ["martingale", "constant_drift"])
def test_convergence_exact_fixtures(name):
    for n, y0, err, _ in run_convergence_study(name, [8, 16, 32]):
        assert err <= 1e-12


def test_unknown_fixture():
    with pytest.raises(UnknownFixture):
        run_convergence_study("nope", [8])


# ---- command line --------------------------------------------------------------

def test_cli_partition():
    code, out, err = run_cli("partition", "--config", str(CONFIGS / "example31.cfg"))
    assert code == 0
    assert out.strip() == "1,0.7,0.4,0.1,0"
    assert "reach bound" in err


def test_cli_partition_writes_knots_csv(tmp_path):
    target = tmp_path / "knots.csv"
    code, _, _ = run_cli("partition", "--config", str(CONFIGS / "example31.cfg"), "--out", str(target))
    assert code == 0
    assert target.read_text().splitlines()[0] == "index,knot"


def test_cli_compare_exit_codes():
    assert run_cli("compare", "--config", str(CONFIGS / "example31.cfg"), "--steps", "64")[0] == 0
    assert run_cli("compare", "--config", str(CONFIGS / "example31_swapped.cfg"))[0] == 1
    assert run_cli("compare", "--config", str(CONFIGS / "constant_gap.cfg"))[0] == 1


def test_cli_compare_csv_byte_identical(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert run_cli("compare", "--config", str(CONFIGS / "example31.cfg"), "--steps", "16",
                       "--out", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_cli_solve_and_converge(tmp_path):
    code, out, err = run_cli("solve", "--config", str(CONFIGS / "linear_anticipated.cfg"),
                             "--steps", "16")
    assert code == 0 and out.startswith("step_index,time,up_count,state,Y,Z")
    assert "2.140625" in err
    code, out, _ = run_cli("converge", "--config", str(CONFIGS / "linear_anticipated.cfg"))
    assert code == 0 and out.splitlines()[0] == "n,Y0,abs_error,order"
    code, out, _ = run_cli("solve", "--config", str(CONFIGS / "linear_anticipated.cfg"),
                           "--engine", "mc", "--paths", "500", "--steps", "16",
                           "--out", str(tmp_path / "mc.csv"))
    assert code == 0 and (tmp_path / "mc.csv").read_text().startswith("step_index,time,path_id")


def test_cli_check_conditions():
    assert run_cli("check-conditions", "--config", str(CONFIGS / "example31.cfg"))[0] == 0
    assert run_cli("check-conditions", "--config", str(CONFIGS / "example32.cfg"))[0] == 0
    assert run_cli("check-conditions", "--config", str(CONFIGS / "general_delay.cfg"))[0] == 0
    code, out, _ = run_cli("check-conditions", "--config", str(CONFIGS / "example31_swapped.cfg"))
    assert code == 1 and "refuted" in out


def test_cli_equality():
    code, out, _ = run_cli("equality", "--config", str(CONFIGS / "example31.cfg"))
    assert code == 0 and "co-occurrence: True" in out


def test_cli_errors(tmp_path, monkeypatch):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    code, _, err = run_cli("partition", "--config", str(bad))
    assert code == 2 and "unknown key" in err
    assert run_cli("frobnicate")[0] == 2
    assert run_cli("partition", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    assert run_cli("compare", "--config", str(CONFIGS / "example31.cfg"), "--engine", "gpu")[0] == 2
    monkeypatch.setenv("ABSDE_THREADS", "-3")
    assert run_cli("partition", "--config", str(CONFIGS / "example31.cfg"))[0] == 2
    monkeypatch.setenv("ABSDE_THREADS", "4")
    assert run_cli("partition", "--config", str(CONFIGS / "example31.cfg"))[0] == 0
