from pathlib import Path

import pytest
from click.testing import CliRunner

from gemsim.cli import main
from gemsim.core import load_config, read_pgm

DEFAULT_INI = Path(__file__).parents[1] / "src" / "gemsim" / "data" / "default.ini"
SMALL = ["--set", "mtf.n_frames=4", "--set", "mtf.line_widths_um=375, 240"]


@pytest.fixture
def runner():
    return CliRunner()


def test_unknown_scenario_is_usage_error(runner, tmp_path):
    r = runner.invoke(main, ["run", "nope", "--out", str(tmp_path)])
    assert r.exit_code == 2


def test_invalid_config_lists_keys(runner, tmp_path):
    r = runner.invoke(main, ["run", "mtf_study", "--out", str(tmp_path / "o"),
                             "--set", "memory.absorption=2", "--set", "mtf.bogus=1"])
    assert r.exit_code == 1
    assert "memory.absorption" in r.output and "mtf.bogus" in r.output
    assert not (tmp_path / "o").exists()


def test_dry_run_writes_nothing(runner, tmp_path):
    out = tmp_path / "o"
    r = runner.invoke(main, ["run", "two_image_movie", "--dry-run", "--out", str(out)])
    assert r.exit_code == 0
    assert "[memory]" in r.output and "expansion_ratio = 1.4" in r.output
    assert not out.exists()


def test_run_writes_results(runner, tmp_path):
    out = tmp_path / "o"
    r = runner.invoke(main, ["run", "mtf_study", "--out", str(out), *SMALL])
    assert r.exit_code == 0, r.output
    for f in ("config.ini", "contrast.csv", "mtf.csv", "contrast.svg", "mtf.svg", "input_a375um.pgm"):
        assert (out / f).exists(), f
    # manifest echo reproduces the settings used
    echoed = load_config(out / "config.ini")
    assert echoed.get("mtf.n_frames") == 4
    assert read_pgm(out / "input_a375um.pgm").pitch == pytest.approx(5e-6)
    assert (out / "mtf.svg").read_text().lstrip().startswith("<?xml")


def test_dated_directory_under_env_root(runner, tmp_path):
    r = runner.invoke(main, ["run", "mtf_study", "--no-images", "--no-plots", *SMALL],
                      env={"GEMSIM_OUT": str(tmp_path)})
    assert r.exit_code == 0, r.output
    dirs = list(tmp_path.iterdir())
    assert len(dirs) == 1 and dirs[0].name.endswith("_mtf_study")


def test_golden_flags(runner, tmp_path):
    gold = tmp_path / "gold"
    args = ["run", "mtf_study", "--no-images", "--no-plots", "--golden", str(gold), *SMALL]
    r = runner.invoke(main, args + ["--out", str(tmp_path / "a"), "--regen-golden"])
    assert r.exit_code == 0 and (gold / "mtf_study" / "mtf.csv").exists()
    r = runner.invoke(main, args + ["--out", str(tmp_path / "b")])
    assert r.exit_code == 0 and "golden: match" in r.output
    r = runner.invoke(main, args + ["--out", str(tmp_path / "c"), "--set", "memory.diffusion_cm2_per_s=100"])
    assert r.exit_code == 1 and "golden mismatch" in r.output


def test_regen_needs_target(runner, tmp_path):
    r = runner.invoke(main, ["run", "mtf_study", "--regen-golden", "--out", str(tmp_path)], env={"GEMSIM_GOLDEN": None})
    assert r.exit_code == 2


def test_plot_kinds(runner, tmp_path):
    csv = tmp_path / "s.csv"
    csv.write_text("frame_index,t,S_N,S_T,D\n1,1e-7,0.3,0.9,0.6\n2,2e-7,0.6,0.62,0.02\n3,3e-7,0.8,0.4,0.4\n")
    r = runner.invoke(main, ["plot", str(csv), "similarity"])
    assert r.exit_code == 0 and (tmp_path / "s.svg").exists()
    r = runner.invoke(main, ["plot", str(csv), "mtf"])
    assert r.exit_code == 1 and "missing column" in r.output


def test_plot_empty_csv(runner, tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("a,t,C,C_pred\n")
    r = runner.invoke(main, ["plot", str(empty), "contrast"])
    assert r.exit_code == 1 and "no data" in r.output
    blank = tmp_path / "b.csv"
    blank.write_text("")
    r = runner.invoke(main, ["plot", str(blank), "contrast"])
    assert r.exit_code == 1 and "no data" in r.output


def test_validate_default_config_passes(runner):
    r = runner.invoke(main, ["validate", str(DEFAULT_INI)])
    assert r.exit_code == 0
    assert "FAIL" not in r.output and r.output.count("PASS") > 10


def test_validate_reports_bound_and_resolution(runner, tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[solver]\ndt_ns = 20\n[mtf]\nline_widths_um = 375, 15\n")
    r = runner.invoke(main, ["validate", str(ini)])
    assert r.exit_code == 1
    assert "FAIL  solver.phase_step" in r.output and "bound dt < 7.581 ns" in r.output
    assert "FAIL  mtf_study.resolution" in r.output


def test_validate_unreadable(runner, tmp_path):
    r = runner.invoke(main, ["validate", str(tmp_path / "missing.ini")])
    assert r.exit_code == 1 and "unreadable" in r.output
