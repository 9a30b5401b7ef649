"""Sweep configuration, deterministic execution, failure isolation, and
output files."""

from __future__ import annotations

import json

import numpy as np
import pytest

from monopref import read_trajectories
from monopref.experiment import (
    ExperimentConfig,
    Scenario,
    dataset_seed,
    export_datasets,
    benchmark_scenarios,
    run_experiment,
    write_experiment_outputs,
)

SMALL_SCENARIO = Scenario(
    config_id="1",
    preference={"kind": "quadratic"},
    length={"kind": "constant", "t": 20},
    intensity={"kind": "degenerate"},
)


def small_config(**overrides) -> ExperimentConfig:
    base = dict(scenarios=(SMALL_SCENARIO,), users=(40,), replications=3, seed=0)
    base.update(overrides)
    return ExperimentConfig(**base)


def test_benchmark_scenarios_cardinality():
    scenarios = benchmark_scenarios()
    assert [s.config_id for s in scenarios] == ["1", "2", "3", "4", "5", "6"]
    lengths = [s.length["kind"] for s in scenarios]
    assert lengths == ["constant"] * 3 + ["truncated_poisson"] * 3
    intensities = [s.intensity["kind"] for s in scenarios]
    assert intensities == ["degenerate", "uniform", "persistent"] * 2


def test_default_config_matches_sweep_shape():
    config = ExperimentConfig()
    assert config.users == (300, 600, 900, 1200, 1500)
    assert config.replications == 100
    assert config.r0 == pytest.approx(1.0 / 3.0)
    assert config.level == 0.95
    assert config.ece_binning == "covariate"


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(replications=0)
    with pytest.raises(ValueError):
        ExperimentConfig(users=(0,))
    with pytest.raises(ValueError):
        ExperimentConfig(r0=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(scenarios=(SMALL_SCENARIO, SMALL_SCENARIO))
    with pytest.raises(ValueError):
        ExperimentConfig(train_window=(1, 10))
    with pytest.raises(ValueError):
        ExperimentConfig(ece_binning="histogram")


def test_config_from_file_round_trip(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "configurations": [
                    {
                        "id": "2",
                        "length": {"kind": "constant", "t": 20},
                        "intensity": {"kind": "uniform"},
                    }
                ],
                "users": [50, 100],
                "replications": 4,
                "seed": 9,
                "ece_binning": "prediction",
                "train_window": [1, 10],
                "test_window": [11, 20],
            }
        )
    )
    config = ExperimentConfig.from_file(path)
    assert [s.config_id for s in config.scenarios] == ["2"]
    assert config.users == (50, 100)
    assert config.replications == 4
    assert config.seed == 9
    assert config.ece_binning == "prediction"
    assert config.train_window == (1, 10)
    assert config.test_window == (11, 20)


def test_config_from_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"replications": 5, "replicas": 5}))
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_file(path)
    path.write_text(json.dumps({"configurations": [{"length": {"kind": "constant", "t": 4}}]}))
    with pytest.raises(ValueError, match="needs an 'id'"):
        ExperimentConfig.from_file(path)


def test_config_echo_lines():
    lines = small_config().echo_lines()
    assert "replications=3" in lines
    assert "users=40" in lines
    assert any(line.startswith("r0=") for line in lines)


def test_dataset_seed_sensitivity():
    base = dataset_seed(0, 0, 300, 0)
    assert dataset_seed(0, 0, 300, 0) == base
    others = {
        dataset_seed(1, 0, 300, 0),
        dataset_seed(0, 1, 300, 0),
        dataset_seed(0, 0, 600, 0),
        dataset_seed(0, 0, 300, 1),
    }
    assert base not in others
    assert len(others) == 4


def test_run_experiment_thread_invariance():
    config = small_config()
    serial = run_experiment(config, threads=1)
    parallel = run_experiment(config, threads=2)
    assert serial.records == parallel.records
    assert not serial.failures and not parallel.failures
    assert len(serial.records) == 3
    assert len(serial.summaries) == 1
    assert serial.summaries[0].replications == 3
    assert len(serial.plot_data) == 1  # first replication of the cell


def test_run_experiment_records_failures_and_continues():
    # T = 1 gives an empty train half, so every replication of the broken
    # scenario fails while the healthy scenario still summarizes
    broken = Scenario(
        config_id="bad",
        preference={"kind": "quadratic"},
        length={"kind": "constant", "t": 1},
        intensity={"kind": "degenerate"},
    )
    config = small_config(scenarios=(SMALL_SCENARIO, broken), replications=2)
    result = run_experiment(config)
    assert len(result.failures) == 2
    assert {f.config_id for f in result.failures} == {"bad"}
    assert all(f.error for f in result.failures)
    assert {s.config_id for s in result.summaries} == {"1"}
    assert {r.config_id for r in result.records} == {"1"}


def test_write_experiment_outputs(tmp_path):
    result = run_experiment(small_config())
    written = write_experiment_outputs(result, tmp_path, figures=False)
    names = {p.relative_to(tmp_path).as_posix() for p in written}
    assert "table1.csv" in names
    assert "table2.csv" in names
    assert "replications.csv" in names
    assert "plotdata/curves_config1_N40.csv" in names
    assert "plotdata/reliability_config1_N40.csv" in names
    assert not any(name.startswith("figures/") for name in names)

    table1 = (tmp_path / "table1.csv").read_text().splitlines()
    echo = [line for line in table1 if line.startswith("# ")]
    assert any(line.startswith("# seed=") for line in echo)
    header = next(line for line in table1 if not line.startswith("# "))
    assert header == "config,n_users,replications,test_error_mean,test_error_sd,ece_mean,ece_sd"
    rows = [line for line in table1 if not line.startswith("# ")][1:]
    assert len(rows) == 1 and rows[0].startswith("1,40,3,")

    reps = [
        line
        for line in (tmp_path / "replications.csv").read_text().splitlines()
        if not line.startswith("# ")
    ]
    assert reps[0] == "config,n_users,rep,test_error,ece,ci_lower,ci_upper,ci_length,covered"
    assert len(reps) == 1 + 3

    curves = np.loadtxt(
        tmp_path / "plotdata/curves_config1_N40.csv", delimiter=",", skiprows=len(echo) + 1
    )
    assert curves.shape == (100, 4)


def test_write_experiment_outputs_figures(tmp_path):
    result = run_experiment(small_config(replications=2))
    written = write_experiment_outputs(result, tmp_path, figures=True)
    names = {p.relative_to(tmp_path).as_posix() for p in written}
    assert "figures/curves_config1_N40.png" in names
    assert "figures/reliability_config1_N40.png" in names
    assert "figures/test_error_by_size.png" in names
    assert "figures/ci_length_by_size.png" in names
    for name in names:
        assert (tmp_path / name).stat().st_size > 0


def test_export_datasets(tmp_path):
    config = small_config(replications=2)
    written = export_datasets(config, tmp_path)
    assert [p.name for p in written] == ["config1_N40_rep0.csv", "config1_N40_rep1.csv"]
    trajectories = read_trajectories(written[0])
    assert len(trajectories) == 40
    assert all(t.choices.size == 21 for t in trajectories)
    # same config exports identical bytes
    again = export_datasets(config, tmp_path / "again")
    assert written[0].read_bytes() == again[0].read_bytes()


def test_failures_csv_written_when_present(tmp_path):
    broken = Scenario(
        config_id="bad",
        preference={"kind": "quadratic"},
        length={"kind": "constant", "t": 1},
        intensity={"kind": "degenerate"},
    )
    config = small_config(scenarios=(SMALL_SCENARIO, broken), replications=1)
    result = run_experiment(config)
    written = write_experiment_outputs(result, tmp_path, figures=False)
    failures = tmp_path / "failures.csv"
    assert failures in written
    lines = [l for l in failures.read_text().splitlines() if not l.startswith("# ")]
    assert lines[0] == "config,n_users,rep,error"
    assert len(lines) == 2
