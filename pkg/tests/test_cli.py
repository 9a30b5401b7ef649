"""End-to-end tests of the command-line interface.

Every test drives main() in process with an argv list and checks exit
codes, written files, and captured output. One subprocess test covers
the module entry point itself.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from monopref import (
    ConstantLength,
    DegenerateIntensity,
    DQuantileTable,
    PreferenceSpec,
    SimConfig,
    UniformIntensity,
    default_quantiles,
    generate_dataset,
    read_trajectories,
    write_trajectories,
)
from monopref.cli import _resolve_threads, main

DATA_DIR = Path(__file__).parent / "data"

# Two users, both with R_1 = 1.0, whose second choices are 1 and 0: the
# pooled sample is a single knot with mean 1/2.
TOY_FILE = """user_id,event_index,choice,intensity
a,1,1,1.0
a,2,1,1.0
b,1,1,1.0
b,2,0,1.0
"""


def write_config(path, **overrides):
    config = {
        "configurations": [{"id": "1"}],
        "users": [40],
        "replications": 2,
        "seed": 0,
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return path


def run_ci(tmp_path, capsys, argv):
    code = main(argv)
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    fields = dict(line.split("=", 1) for line in lines)
    assert set(fields) == {"lower", "upper", "contiguous", "h_hat"}
    assert fields["contiguous"] in ("true", "false")
    return float(fields["lower"]), float(fields["upper"]), float(fields["h_hat"])


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "monopref" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "monopref.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("monopref")


def test_fit_toy_dataset(tmp_path, capsys):
    inp = tmp_path / "toy.csv"
    inp.write_text(TOY_FILE)
    out = tmp_path / "fit.csv"
    assert main(["fit", str(inp), "--out", str(out)]) == 0
    assert out.read_text() == "knot,value\n1.0,0.5\n"
    assert f"wrote 1 knots to {out}" in capsys.readouterr().out


def test_fit_output_is_monotone(tmp_path):
    config = SimConfig(
        users=80,
        preference=PreferenceSpec.quadratic(),
        length=ConstantLength(12),
        intensity=UniformIntensity(),
        seed=3,
    )
    inp = tmp_path / "sample.csv"
    write_trajectories(generate_dataset(config), inp)
    out = tmp_path / "fit.csv"
    assert main(["fit", str(inp), "--out", str(out)]) == 0
    table = np.loadtxt(out, delimiter=",", skiprows=1, ndmin=2)
    knots, values = table[:, 0], table[:, 1]
    assert np.all(np.diff(knots) > 0)
    assert np.all(np.diff(values) >= 0)
    assert values[0] >= 0.0 and values[-1] <= 1.0


def test_fit_renders_figure(tmp_path):
    inp = tmp_path / "toy.csv"
    inp.write_text(TOY_FILE)
    out = tmp_path / "fit.csv"
    figure = tmp_path / "curve.png"
    assert main(["fit", str(inp), "--out", str(out), "--figure", str(figure)]) == 0
    assert figure.stat().st_size > 0


def test_fit_malformed_input(tmp_path, capsys):
    inp = tmp_path / "bad.csv"
    inp.write_text("user_id,event_index,choice\n")
    out = tmp_path / "fit.csv"
    assert main(["fit", str(inp), "--out", str(out)]) == 2
    assert capsys.readouterr().err.startswith("error:")
    assert not out.exists()


def test_fit_missing_input(tmp_path, capsys):
    out = tmp_path / "fit.csv"
    assert main(["fit", str(tmp_path / "nope.csv"), "--out", str(out)]) == 2
    assert capsys.readouterr().err.startswith("error:")


@pytest.fixture(scope="module")
def ci_input(tmp_path_factory):
    config = SimConfig(
        users=150,
        preference=PreferenceSpec.quadratic(),
        length=ConstantLength(20),
        intensity=DegenerateIntensity(),
        seed=0,
    )
    path = tmp_path_factory.mktemp("ci") / "sample.csv"
    write_trajectories(generate_dataset(config), path)
    return path


def test_ci_reports_interval_around_estimate(ci_input, tmp_path, capsys):
    lower, upper, h_hat = run_ci(
        tmp_path, capsys, ["ci", str(ci_input), "--r0", "0.333"]
    )
    assert 0.0 <= lower <= h_hat <= upper <= 1.0


def test_ci_levels_nest(ci_input, tmp_path, capsys):
    narrow = run_ci(
        tmp_path, capsys, ["ci", str(ci_input), "--r0", "0.333", "--level", "0.95"]
    )
    wide = run_ci(
        tmp_path, capsys, ["ci", str(ci_input), "--r0", "0.333", "--level", "0.99"]
    )
    assert wide[0] <= narrow[0]
    assert narrow[1] <= wide[1]


def test_ci_accepts_quantile_table_file(ci_input, tmp_path, capsys):
    table_path = tmp_path / "quantiles.csv"
    default_quantiles().save(table_path)
    from_default = run_ci(tmp_path, capsys, ["ci", str(ci_input), "--r0", "0.333"])
    from_file = run_ci(
        tmp_path,
        capsys,
        ["ci", str(ci_input), "--r0", "0.333", "--quantiles", str(table_path)],
    )
    assert from_file == from_default


def test_ci_rejects_out_of_range_r0(tmp_path, capsys):
    inp = tmp_path / "toy.csv"
    inp.write_text(TOY_FILE)
    assert main(["ci", str(inp), "--r0", "1.5"]) == 2
    assert "error: r0 must lie in (0, 1)" in capsys.readouterr().err


def test_simulate_writes_reproducible_datasets(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json")
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main(["simulate", str(cfg), "--out", str(first)]) == 0
    assert f"wrote 2 trajectory files to {first}" in capsys.readouterr().out
    assert main(["simulate", str(cfg), "--out", str(second)]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == ["config1_N40_rep0.csv", "config1_N40_rep1.csv"]
    for name in names:
        text = (first / name).read_text()
        # header plus 40 users with 21 events each
        assert len(text.splitlines()) == 1 + 40 * 21
        assert text == (second / name).read_text()


def test_simulate_truncated_poisson_lengths(tmp_path):
    cfg = write_config(
        tmp_path / "config.json",
        configurations=[{"id": "1", "length": {"kind": "truncated_poisson"}}],
        users=[30],
        replications=1,
    )
    out = tmp_path / "data"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 0
    trajectories = read_trajectories(out / "config1_N30_rep0.csv")
    assert len(trajectories) == 30
    lengths = {len(t.choices) for t in trajectories}
    assert min(lengths) >= 5 and max(lengths) <= 21
    assert len(lengths) > 1


def test_simulate_rejects_unknown_config_key(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json", replicas=3)
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "data")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "replicas" in err


def test_experiment_smoke(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json")
    out = tmp_path / "report"
    code = main(["experiment", str(cfg), "--out", str(out), "--no-figures"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.err == ""
    names = {p.name for p in out.iterdir()}
    assert {"table1.csv", "table2.csv", "replications.csv"} <= names
    assert not any(name.endswith(".png") for name in names)
    table1 = (out / "table1.csv").read_text().splitlines()
    assert "config,n_users,replications,test_error_mean,test_error_sd,ece_mean,ece_sd" in table1
    assert any(line.startswith("1,40,2,") for line in table1)
    assert f"files to {out}" in captured.out


def test_experiment_renders_figures(tmp_path):
    cfg = write_config(tmp_path / "config.json", replications=1)
    out = tmp_path / "report"
    assert main(["experiment", str(cfg), "--out", str(out), "--threads", "1"]) == 0
    pngs = {p.name for p in (out / "figures").iterdir() if p.suffix == ".png"}
    assert {"curves_config1_N40.png", "reliability_config1_N40.png"} <= pngs
    assert all((out / "figures" / name).stat().st_size > 0 for name in pngs)


def test_experiment_reports_failures(tmp_path, capsys):
    # one pair per user leaves the train half empty, so every rep fails
    cfg = write_config(
        tmp_path / "config.json",
        configurations=[{"id": "1", "length": {"kind": "constant", "t": 1}}],
        replications=2,
    )
    out = tmp_path / "report"
    code = main(["experiment", str(cfg), "--out", str(out), "--no-figures"])
    assert code == 1
    err = capsys.readouterr().err
    assert "warning: config 1 N=40 rep 0 failed:" in err
    failures = [
        line
        for line in (out / "failures.csv").read_text().splitlines()
        if not line.startswith("#")
    ]
    assert failures[0] == "config,n_users,rep,error"
    assert len(failures) == 3


def test_experiment_missing_config(tmp_path, capsys):
    out = tmp_path / "report"
    assert main(["experiment", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_resolve_threads_precedence(monkeypatch):
    monkeypatch.setenv("MONOPREF_THREADS", "5")
    assert _resolve_threads(3) == 3
    assert _resolve_threads(None) == 5
    monkeypatch.setenv("MONOPREF_THREADS", "")
    assert _resolve_threads(None) == 1
    monkeypatch.delenv("MONOPREF_THREADS")
    assert _resolve_threads(None) == 1
    with pytest.raises(ValueError):
        _resolve_threads(0)
    monkeypatch.setenv("MONOPREF_THREADS", "zero")
    with pytest.raises(ValueError):
        _resolve_threads(None)
    monkeypatch.setenv("MONOPREF_THREADS", "0")
    with pytest.raises(ValueError):
        _resolve_threads(None)


def test_ingest_fixture_end_to_end(tmp_path, capsys):
    out = tmp_path / "pairs.csv"
    code = main(
        [
            "ingest",
            str(DATA_DIR / "ratings_fixture.csv"),
            str(DATA_DIR / "categories_fixture.csv"),
            "--group1",
            "Comedy",
            "--group0",
            "Romance",
            "--out",
            str(out),
            "--min-choices",
            "3",
            "--intensity",
            "rating",
        ]
    )
    captured = capsys.readouterr()
    assert code == 0
    assert captured.err == ""
    assert out.read_bytes() == (DATA_DIR / "expected_rating.csv").read_bytes()
    summary = (tmp_path / "pairs.csv.summary.txt").read_text()
    assert "users_valid=2" in summary
    assert "events_written=6" in summary
    assert "event_parse_errors=0" in summary
    assert "category_parse_errors=0" in summary
    assert f"wrote 2 users (6 events) to {out}" in captured.out


def test_ingest_bad_rows_warn_and_exit_one(tmp_path, capsys):
    events = tmp_path / "events.csv"
    events.write_text(
        (DATA_DIR / "ratings_fixture.csv").read_text() + "dave,A,notanumber,100\n"
    )
    out = tmp_path / "pairs.csv"
    code = main(
        [
            "ingest",
            str(events),
            str(DATA_DIR / "categories_fixture.csv"),
            "--group1",
            "Comedy",
            "--group0",
            "Romance",
            "--out",
            str(out),
            "--min-choices",
            "3",
            "--intensity",
            "rating",
        ]
    )
    err = capsys.readouterr().err
    assert code == 1
    assert "line 14" in err
    assert out.read_bytes() == (DATA_DIR / "expected_rating.csv").read_bytes()
    assert "event_parse_errors=1" in (tmp_path / "pairs.csv.summary.txt").read_text()


def test_ingest_disjoint_groups_exit_two(tmp_path, capsys):
    code = main(
        [
            "ingest",
            str(DATA_DIR / "ratings_fixture.csv"),
            str(DATA_DIR / "categories_fixture.csv"),
            "--group1",
            "Documentary",
            "--group0",
            "Western",
            "--out",
            str(tmp_path / "pairs.csv"),
            "--min-choices",
            "3",
        ]
    )
    err = capsys.readouterr().err
    assert code == 2
    assert err.splitlines()[-1].startswith("error: no valid users after filtering")


def test_ingest_custom_columns(tmp_path):
    events = tmp_path / "events.tsv"
    rows = (DATA_DIR / "ratings_fixture.csv").read_text().splitlines()
    rows[0] = "member,film,stars,when"
    events.write_text("".join(r.replace(",", "\t") + "\n" for r in rows))
    categories = tmp_path / "categories.tsv"
    cat_rows = (DATA_DIR / "categories_fixture.csv").read_text().splitlines()
    cat_rows[0] = "film\tgenres"
    categories.write_text(
        cat_rows[0] + "\n" + "".join(r.replace(",", "\t") + "\n" for r in cat_rows[1:])
    )
    out = tmp_path / "pairs.csv"
    code = main(
        [
            "ingest",
            str(events),
            str(categories),
            "--group1",
            "Comedy",
            "--group0",
            "Romance",
            "--out",
            str(out),
            "--min-choices",
            "3",
            "--delimiter",
            "\t",
            "--user-col",
            "member",
            "--item-col",
            "film",
            "--rating-col",
            "stars",
            "--timestamp-col",
            "when",
            "--cat-item-col",
            "film",
            "--cat-tags-col",
            "genres",
        ]
    )
    assert code == 0
    assert out.read_bytes() == (DATA_DIR / "expected_constant.csv").read_bytes()


def test_dquantile_writes_loadable_table(tmp_path, capsys):
    out = tmp_path / "quantiles.csv"
    code = main(
        [
            "dquantile",
            "--out",
            str(out),
            "--replications",
            "1000",
            "--range",
            "5.0",
            "--seed",
            "7",
        ]
    )
    assert code == 0
    assert "wrote quantiles for levels 0.8, 0.9, 0.95, 0.99" in capsys.readouterr().out
    table = DQuantileTable.load(out)
    assert list(table.levels) == [0.8, 0.9, 0.95, 0.99]
    values = [table.quantile(level) for level in table.levels]
    assert values[0] > 0.0
    assert values == sorted(values)


def test_dquantile_env_threads_match_flag(tmp_path, monkeypatch):
    flag_out = tmp_path / "flag.csv"
    env_out = tmp_path / "env.csv"
    args = ["--replications", "1000", "--range", "5.0", "--seed", "7"]
    assert main(["dquantile", "--out", str(flag_out), "--threads", "1"] + args) == 0
    monkeypatch.setenv("MONOPREF_THREADS", "2")
    assert main(["dquantile", "--out", str(env_out)] + args) == 0
    assert env_out.read_bytes() == flag_out.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["dquantile", "--replications", "500"],
        ["dquantile", "--range", "4.0"],
        ["dquantile", "--grid-step", "0.02"],
        ["dquantile", "--threads", "0"],
    ],
)
def test_dquantile_invalid_arguments(tmp_path, capsys, argv):
    out = tmp_path / "quantiles.csv"
    assert main(argv + ["--out", str(out)]) == 2
    assert capsys.readouterr().err.startswith("error:")
    assert not out.exists()


def test_invalid_threads_env_is_reported(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MONOPREF_THREADS", "many")
    out = tmp_path / "quantiles.csv"
    assert main(["dquantile", "--out", str(out), "--replications", "1000"]) == 2
    assert "MONOPREF_THREADS" in capsys.readouterr().err
