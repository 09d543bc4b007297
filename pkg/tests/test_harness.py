import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from cavitycontrol import cli
from cavitycontrol.config import DEFAULTS, load_config, parse_config
from cavitycontrol.errors import ConfigurationError, UsageError, ValidationError
from cavitycontrol.pipeline import emit_plot_data, load_manifest, run_scenario

from conftest import demo_raw, small_raw

NUMERIC = ("field.csv", "spectrum.csv", "ascent.csv", "optimized_field.csv", "drive.csv",
           "ka.csv", "kinetics.csv", "summary.json")


def write_yaml(path: Path, raw: dict) -> Path:
    path.write_text(yaml.safe_dump(raw))
    return path


# ---------------------------------------------------------------- config loading

def test_minimal_config_gets_defaults():
    raw = demo_raw()
    for key in ("seed", "output_dir", "beam_radius_m", "ascent", "spectroscopy", "enrichment",
                "kinetics"):
        raw.pop(key, None)
    raw["grids"].pop("x_nodes", None)
    cfg = parse_config(raw)
    assert cfg.seed == DEFAULTS["seed"]
    assert cfg.beam_radius == DEFAULTS["beam_radius_m"]
    assert cfg.ascent.max_iterations == DEFAULTS["ascent"]["max_iterations"]
    assert cfg.ascent_mode == DEFAULTS["ascent"]["mode"]
    assert cfg.grids.x_nodes is None
    assert str(cfg.output_dir) == DEFAULTS["output_dir"]


def test_bundled_demo_loads():
    cfg = load_config(Path(__file__).parents[1] / "src/cavitycontrol/data/demo.yaml")
    assert cfg.mixture is not None and len(cfg.species) == 2
    assert cfg.hash == load_config(cfg.source).hash


def test_reflectivity_above_one_names_field():
    raw = demo_raw()
    raw["cavity"]["retro_reflectivity_power"] = 1.3
    with pytest.raises(ValidationError) as err:
        parse_config(raw)
    assert "retro_reflectivity" in str(err.value)


def test_every_problem_is_reported():
    raw = demo_raw()
    raw["cavity"]["retro_reflectivity_power"] = 1.3
    raw["conditions"]["temperature_k"] = -5.0
    raw["rates"]["e_star"] = 2.0
    raw["bogus_section"] = {}
    with pytest.raises(ValidationError) as err:
        parse_config(raw)
    text = "\n".join(err.value.problems)
    for needle in ("retro_reflectivity", "temperature", "e_star", "bogus_section"):
        assert needle in text
    assert len(err.value.problems) >= 4


def test_mismatched_grids_cite_the_guard():
    raw = demo_raw()
    raw["grids"]["wavenumber_min_cm"] = 0.340
    with pytest.raises(ValidationError, match="cavity-field guard"):
        parse_config(raw)
    raw = demo_raw()
    raw["grids"]["omega_points"] = 5
    with pytest.raises(ValidationError, match="cavity-field guard"):
        parse_config(raw)


def test_unresolved_target_is_reported():
    raw = demo_raw()
    raw["mixture"]["target"] = "C"
    with pytest.raises(ValidationError, match="target"):
        parse_config(raw)


def test_yaml_parse_error_has_position(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("grids:\n  time_step_s: [1, 2\ncavity: {}\n")
    with pytest.raises(ConfigurationError, match="line"):
        load_config(bad)
    with pytest.raises(ConfigurationError, match="does not exist"):
        load_config(tmp_path / "missing.yaml")


def test_seed_override_changes_hash_only_through_seed():
    cfg = parse_config(demo_raw())
    other = cfg.with_seed(cfg.seed + 1)
    assert other.seed == cfg.seed + 1 and other.hash != cfg.hash
    assert other.with_seed(cfg.seed).hash == cfg.hash


# ---------------------------------------------------------------- stages

@pytest.fixture(scope="module")
def small_config():
    return parse_config(small_raw())


def test_spectrum_stage_runs_alone(small_config, tmp_path):
    m = run_scenario(small_config, "spectrum", tmp_path)
    assert "spectrum" in m.outputs and "ascent" not in m.outputs
    data = np.loadtxt(m.path("spectrum"), delimiter=",", skiprows=1)
    assert np.all(data[:, 1] >= 0)
    assert data.shape[0] == small_config.grids.wavenumbers.size


def test_stage_reuse_through_stage_input(small_config, tmp_path):
    first = run_scenario(small_config, "optimize", tmp_path / "opt")
    second = run_scenario(small_config, "kinetics", tmp_path / "kin", stage_input=tmp_path / "opt")
    summary = json.loads(second.path("summary").read_text())
    assert summary["kinetics"]["drive_source"] == "upstream"
    fresh = run_scenario(small_config, "kinetics", tmp_path / "kin_fresh")
    assert json.loads(fresh.path("summary").read_text())["kinetics"]["drive_source"] == "config"
    assert first.path("drive").exists()


def test_stale_outputs_are_not_reused(small_config, tmp_path):
    run_scenario(small_config, "optimize", tmp_path)
    again = run_scenario(small_config, "kinetics", tmp_path)
    assert json.loads(again.path("summary").read_text())["kinetics"]["drive_source"] == "config"


def test_full_stage_writes_everything(small_config, tmp_path):
    m = run_scenario(small_config, "full", tmp_path)
    for name in ("field", "spectrum", "ascent", "ka", "kinetics", "summary"):
        assert m.path(name).exists()
    summary = json.loads(m.path("summary").read_text())
    assert summary["beta"] > 0 and "final_objective" in summary
    kin = np.loadtxt(m.path("kinetics"), delimiter=",", skiprows=1)
    assert np.all(np.abs(kin[:, 1:5].sum(axis=1) - 1) < 1e-8)
    assert load_manifest(tmp_path).config_hash == small_config.hash


def test_errors_carry_stage_and_hash(small_config, tmp_path):
    with pytest.raises(UsageError, match="unknown stage"):
        run_scenario(small_config, "plot", tmp_path)
    raw = small_raw()
    raw["kinetics"]["dt_s"] = 1e-8
    cfg = parse_config(raw)
    with pytest.raises(ConfigurationError) as err:
        run_scenario(cfg, "kinetics", tmp_path)
    assert "'kinetics'" in str(err.value) and cfg.hash[:12] in str(err.value)


def test_small_rerun_is_byte_identical(small_config, tmp_path):
    a = run_scenario(small_config, "full", tmp_path / "a")
    b = run_scenario(small_config, "full", tmp_path / "b")
    for name in a.outputs.values():
        assert (Path(a.output_dir) / name).read_bytes() == (Path(b.output_dir) / name).read_bytes()


# ---------------------------------------------------------------- plot data

def test_plot_data_projections(small_config, tmp_path):
    m = run_scenario(small_config, "full", tmp_path)
    rows = emit_plot_data(m, "kinetics")
    assert {r[0] for r in rows} == {"f_m", "f_star", "f_epi", "f_d"}
    obj = emit_plot_data(m, "objective")
    assert [r[1] for r in obj] == list(range(len(obj)))
    field = np.loadtxt(m.path("field"), delimiter=",", skiprows=1)
    assert [(r[1], r[2]) for r in emit_plot_data(m, "intensity")] == \
        [(float(t), float(i)) for t, i in zip(field[:, 0], field[:, 2])]
    with pytest.raises(UsageError):
        emit_plot_data(m, "phase")


def test_plot_data_missing_stage_is_usage_error(small_config, tmp_path):
    m = run_scenario(small_config, "spectrum", tmp_path)
    with pytest.raises(UsageError, match="missing"):
        emit_plot_data(m, "objective")


# ---------------------------------------------------------------- command line

def test_cli_exit_codes(tmp_path, capsys):
    good = write_yaml(tmp_path / "good.yaml", small_raw())
    assert cli.main(["validate", "--config", str(good)]) == 0
    assert "ok:" in capsys.readouterr().out
    raw = small_raw()
    raw["cavity"]["retro_reflectivity_power"] = 2.0
    bad = write_yaml(tmp_path / "bad.yaml", raw)
    assert cli.main(["validate", "--config", str(bad)]) == ValidationError.exit_code
    assert "ValidationError" in capsys.readouterr().err
    broken = tmp_path / "broken.yaml"
    broken.write_text("cavity: [\n")
    assert cli.main(["validate", "--config", str(broken)]) == ConfigurationError.exit_code
    assert cli.main(["plot-data", str(tmp_path), "kinetics"]) == UsageError.exit_code
    assert cli.main(["kinetics", "--config", str(good), "--stage-input",
                     str(tmp_path / "nowhere")]) == UsageError.exit_code


def test_cli_runs_stage_and_plot_data(tmp_path, capsys):
    good = write_yaml(tmp_path / "good.yaml", small_raw())
    out = tmp_path / "run"
    assert cli.main(["spectrum", "--config", str(good), "--out", str(out), "--seed", "3"]) == 0
    assert load_manifest(out).seed == 3
    capsys.readouterr()
    assert cli.main(["plot-data", str(out), "spectrum"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "series,x,y" and lines[1].startswith("sigma_a,")


def test_console_entry_point():
    done = subprocess.run([sys.executable, "-m", "cavitycontrol.cli", "--version"],
                          capture_output=True, text=True)
    assert done.returncode == 0 and "cavitycontrol" in done.stdout


# ---------------------------------------------------------------- bundled demo

@pytest.mark.slow
def test_demo_full_is_deterministic(demo_runs):
    (a, b), _ = demo_runs
    for name in NUMERIC:
        assert (Path(a.output_dir) / name).read_bytes() == (Path(b.output_dir) / name).read_bytes()
    summary = json.loads(a.path("summary").read_text())
    assert summary["final_objective"] > summary["optimize"]["initial_objective"]
