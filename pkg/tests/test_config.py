"""Experiment configuration parsing and validation."""
from __future__ import annotations

import pytest
import yaml

from chartrecon.config import ConfigError, ExperimentConfig, dump_config, load_config
from chartrecon.manifolds import BallFamily, IntervalFamily

FULL = {
    "command": "reconstruct",
    "family": {"tag": "ball", "n": 2, "A": 1.0, "rho": 0.5, "R": 1.5, "p": 2.0},
    "operator": "identity",
    "N": 6,
    "seed": 12345678901234567890,
    "workers": 2,
    "pairs": 500,
    "alpha": 0.5,
    "N_grid": [4, 8],
    "deficit_count": 100,
    "delta": 0.01,
    "truth": [0.1, 0.2, 0.9],
    "measurement_file": None,
    "noise_sigma": 0.0,
    "constants": {"C": 3.0, "L_FK": 2.0, "rho_basin": 0.1, "mu_step": None, "delta_KM": None, "safety": 2.0,
                  "estimation_pairs": 1000, "basin_radii": [0.01, 0.02], "basin_trials": 3},
    "lattice": {"max_points": 1000, "select_mode": "argmin", "table_file": None},
    "stop": {"tolerance": 1e-8, "max_iters": 50, "divergence_factor": 100.0},
    "output": {"dir": "results", "format": "csv", "trajectory_csv": False},
}


def test_defaults():
    cfg = ExperimentConfig.from_dict(None)
    assert cfg.command == "reconstruct" and cfg.N == 16 and cfg.constants.safety == 2.0
    assert isinstance(cfg.family.build(), IntervalFamily)


def test_full_round_trip():
    cfg = ExperimentConfig.from_dict(FULL)
    assert cfg.to_dict() == FULL
    again = ExperimentConfig.from_dict(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert isinstance(cfg.family.build(), BallFamily)


def test_load_from_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(ExperimentConfig.from_dict(FULL)))
    assert load_config(path).to_dict() == FULL


def test_integer_is_accepted_as_float():
    cfg = ExperimentConfig.from_dict({"constants": {"C": 2}})
    assert cfg.constants.C == 2.0 and isinstance(cfg.constants.C, float)


@pytest.mark.parametrize(
    "data",
    [
        {"N_bandwidth": 4},
        {"constants": {"c": 1.0}},
        {"stop": {"tol": 1e-9}},
        {"family": {"tag": "interval", "radius": 1.0}},
    ],
)
def test_unknown_keys_rejected(data):
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_dict(data)


@pytest.mark.parametrize(
    "data",
    [
        {"N": "sixteen"},
        {"N": True},
        {"N": 2.5},
        {"constants": {"C": "big"}},
        {"output": {"trajectory_csv": "yes"}},
        {"N_grid": 4},
        {"family": "interval"},
    ],
)
def test_type_errors(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


@pytest.mark.parametrize(
    "data",
    [
        {"command": "solve"},
        {"operator": "laplace"},
        {"N": -1},
        {"seed": -1},
        {"seed": 2 ** 64},
        {"workers": 0},
        {"pairs": 10},
        {"noise_sigma": -0.1},
        {"lattice": {"select_mode": "best"}},
        {"output": {"format": "xml"}},
        {"constants": {"C": 0.0}},
        {"constants": {"safety": 0.5}},
        {"family": {"tag": "torus"}},
        {"family": {"tag": "interval", "n": 2}},
        {"family": {"tag": "interval", "eps": 0.6}},
    ],
)
def test_invalid_values(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("family: [unclosed\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(bad)
    top = tmp_path / "list.yaml"
    top.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(top)
