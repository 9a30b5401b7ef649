"""Simulation-study driver.

Sweeps scenarios x sample sizes x replications. Each replication generates
a dataset, fits the monotone estimator on the training steps, scores it
against the smoothed oracle on the held-out steps, and inverts the
likelihood-ratio test into a confidence interval at a reference point.

Seeding: each dataset gets its own seed derived from
SeedSequence([master, scenario_index, n_users, rep]), and every user inside
a dataset draws from default_rng([dataset_seed, user_index]). Replications
are therefore independent tasks, and results do not depend on how many
worker processes execute them.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .inference import DEFAULT_CI_GRID_STEP, confidence_set, fit_npmle
from .metrics import (
    EVAL_GRID,
    PerReplication,
    ReplicationSummary,
    ece,
    oracle_curve,
    reliability_bins,
    summarize_replications,
    test_error,
)
from .model import eval_step, pool_pairs, write_trajectories
from .simulate import (
    SimConfig,
    generate_dataset,
    intensity_from_dict,
    length_from_dict,
    preference_from_dict,
    split_train_test,
)

__all__ = [
    "Scenario",
    "ExperimentConfig",
    "ReplicationFailure",
    "CellPlotData",
    "ExperimentResult",
    "benchmark_scenarios",
    "dataset_seed",
    "build_sim_config",
    "run_experiment",
    "write_experiment_outputs",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """One data-generating mechanism, held in config-file form (plain dicts)
    so tasks pickle cheaply across worker processes."""

    config_id: str
    preference: dict
    length: dict
    intensity: dict

    def __post_init__(self) -> None:
        if not self.config_id:
            raise ValueError("config_id must be non-empty")
        # materialize once so config mistakes surface before the sweep
        preference_from_dict(self.preference)
        length_from_dict(self.length)
        intensity_from_dict(self.intensity)


def benchmark_scenarios() -> tuple[Scenario, ...]:
    """The six benchmark scenarios: {constant, truncated-Poisson} episode
    lengths crossed with {degenerate, uniform, persistent} intensities."""
    constant = {"kind": "constant", "t": 20}
    truncated = {"kind": "truncated_poisson", "mean": 20.0, "floor": 4, "ceiling": 20}
    intensities = (
        {"kind": "degenerate", "value": 1.0},
        {"kind": "uniform"},
        {"kind": "persistent", "keep_prob": 0.2},
    )
    scenarios = []
    for length in (constant, truncated):
        for intensity in intensities:
            scenarios.append(
                Scenario(
                    config_id=str(len(scenarios) + 1),
                    preference={"kind": "quadratic"},
                    length=length,
                    intensity=intensity,
                )
            )
    return tuple(scenarios)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; JSON-loadable via `from_file`."""

    scenarios: tuple[Scenario, ...] = field(default_factory=benchmark_scenarios)
    users: tuple[int, ...] = (300, 600, 900, 1200, 1500)
    replications: int = 100
    seed: int = 0
    q: float = 0.5
    r0: float = 1.0 / 3.0
    level: float = 0.95
    zeta: float = 0.01
    ece_bins: int = 50
    ece_binning: str = "covariate"
    ci_grid_step: float = DEFAULT_CI_GRID_STEP
    train_window: tuple[int, int] | None = None
    test_window: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        scenarios = tuple(self.scenarios)
        if not scenarios:
            raise ValueError("at least one scenario is required")
        ids = [s.config_id for s in scenarios]
        if len(set(ids)) != len(ids):
            raise ValueError("scenario config_ids must be distinct")
        users = tuple(int(n) for n in self.users)
        if not users or any(n < 1 for n in users):
            raise ValueError("users must be positive sample sizes")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if not 0.0 < self.r0 < 1.0:
            raise ValueError("r0 must lie in (0, 1)")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if not self.zeta > 0.0:
            raise ValueError("zeta must be positive")
        if self.ece_bins < 1:
            raise ValueError("ece_bins must be at least 1")
        if self.ece_binning not in ("covariate", "prediction"):
            raise ValueError("ece_binning must be 'covariate' or 'prediction'")
        if not 0.0 < self.ci_grid_step <= 0.01:
            raise ValueError("ci_grid_step must lie in (0, 0.01]")
        if (self.train_window is None) != (self.test_window is None):
            raise ValueError("give both windows or neither")
        train = self.train_window
        test = self.test_window
        if train is not None:
            train = (int(train[0]), int(train[1]))
            test = (int(test[0]), int(test[1]))
        object.__setattr__(self, "scenarios", scenarios)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "train_window", train)
        object.__setattr__(self, "test_window", test)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Load a JSON config. Every key is optional; unknown keys are
        rejected to catch typos."""
        with Path(path).open() as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        known = {
            "configurations",
            "users",
            "replications",
            "seed",
            "q",
            "r0",
            "level",
            "zeta",
            "ece_bins",
            "ece_binning",
            "ci_grid_step",
            "train_window",
            "test_window",
        }
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        kwargs: dict = {}
        if "configurations" in raw:
            scenarios = []
            for entry in raw["configurations"]:
                if "id" not in entry:
                    raise ValueError("each configuration needs an 'id'")
                scenarios.append(
                    Scenario(
                        config_id=str(entry["id"]),
                        preference=entry.get("preference", {"kind": "quadratic"}),
                        length=entry.get("length", {"kind": "constant", "t": 20}),
                        intensity=entry.get("intensity", {"kind": "degenerate"}),
                    )
                )
            kwargs["scenarios"] = tuple(scenarios)
        if "users" in raw:
            kwargs["users"] = tuple(int(n) for n in raw["users"])
        for key in ("replications", "seed", "ece_bins"):
            if key in raw:
                kwargs[key] = int(raw[key])
        for key in ("q", "r0", "level", "zeta", "ci_grid_step"):
            if key in raw:
                kwargs[key] = float(raw[key])
        if "ece_binning" in raw:
            kwargs["ece_binning"] = str(raw["ece_binning"])
        for key in ("train_window", "test_window"):
            if key in raw and raw[key] is not None:
                lo, hi = raw[key]
                kwargs[key] = (int(lo), int(hi))
        return cls(**kwargs)

    def echo_lines(self) -> list[str]:
        """key=value lines echoed into output headers so every table is
        self-describing."""
        window = (
            "half"
            if self.train_window is None
            else f"{self.train_window[0]}:{self.train_window[1]}"
            + f"/{self.test_window[0]}:{self.test_window[1]}"
        )
        return [
            f"seed={self.seed}",
            f"replications={self.replications}",
            "users=" + ",".join(str(n) for n in self.users),
            f"q={_fmt(self.q)}",
            f"r0={_fmt(self.r0)}",
            f"level={_fmt(self.level)}",
            f"zeta={_fmt(self.zeta)}",
            f"ece_bins={self.ece_bins}",
            f"ece_binning={self.ece_binning}",
            f"ci_grid_step={_fmt(self.ci_grid_step)}",
            f"windows={window}",
            "configurations=" + ",".join(s.config_id for s in self.scenarios),
        ]


def dataset_seed(master_seed: int, scenario_index: int, n_users: int, rep: int) -> int:
    """Seed of one replication's dataset."""
    ss = np.random.SeedSequence([master_seed, scenario_index, n_users, rep])
    return int(ss.generate_state(1, np.uint64)[0])


def build_sim_config(
    config: ExperimentConfig, scenario_index: int, n_users: int, rep: int
) -> SimConfig:
    """The exact generator settings of one replication; shared by the sweep
    and by dataset export so both produce identical data."""
    scenario = config.scenarios[scenario_index]
    return SimConfig(
        users=n_users,
        preference=preference_from_dict(scenario.preference),
        length=length_from_dict(scenario.length),
        intensity=intensity_from_dict(scenario.intensity),
        q=config.q,
        seed=dataset_seed(config.seed, scenario_index, n_users, rep),
    )


@dataclass(frozen=True)
class ReplicationFailure:
    config_id: str
    n_users: int
    rep: int
    error: str


@dataclass(frozen=True)
class CellPlotData:
    """Plot-data payload of one cell's first replication."""

    config_id: str
    n_users: int
    grid: np.ndarray
    fitted: np.ndarray
    oracle: np.ndarray
    true_h: np.ndarray
    bin_index: np.ndarray
    bin_confidence: np.ndarray
    bin_accuracy: np.ndarray
    bin_count: np.ndarray


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[PerReplication]
    summaries: list[ReplicationSummary]
    plot_data: list[CellPlotData]
    failures: list[ReplicationFailure]


def _replication_task(task: dict) -> dict:
    """Run one replication. Takes and returns plain picklable values."""
    preference = preference_from_dict(task["preference"])
    sim = SimConfig(
        users=task["n_users"],
        preference=preference,
        length=length_from_dict(task["length"]),
        intensity=intensity_from_dict(task["intensity"]),
        q=task["q"],
        seed=task["seed"],
    )
    trajectories = generate_dataset(sim)
    train, test = split_train_test(
        trajectories, task["train_window"], task["test_window"]
    )
    sample = pool_pairs(train)
    fitted = fit_npmle(sample)
    err = test_error(fitted, test, zeta=task["zeta"])
    calib = ece(fitted, test, bins=task["ece_bins"], binning=task["ece_binning"])
    ci = confidence_set(
        sample, task["r0"], task["level"], grid_step=task["ci_grid_step"]
    )
    true_h0 = preference(task["r0"])
    out = {
        "config_id": task["config_id"],
        "n_users": task["n_users"],
        "rep": task["rep"],
        "test_error": float(err),
        "ece": float(calib),
        "ci_lower": ci.lower,
        "ci_upper": ci.upper,
        "covered": bool(ci.lower <= true_h0 <= ci.upper),
    }
    if task["plot_payload"]:
        bins = reliability_bins(
            fitted, test, bins=task["ece_bins"], binning=task["ece_binning"]
        )
        filled = np.flatnonzero(bins.counts > 0)
        out["plot"] = {
            "grid": EVAL_GRID,
            "fitted": eval_step(fitted, EVAL_GRID),
            "oracle": oracle_curve(test, task["zeta"], EVAL_GRID),
            "true_h": preference(EVAL_GRID),
            "bin_index": filled,
            "bin_confidence": bins.confidence[filled],
            "bin_accuracy": bins.accuracy[filled],
            "bin_count": bins.counts[filled],
        }
    return out


def _make_tasks(config: ExperimentConfig) -> list[dict]:
    tasks = []
    for idx, scenario in enumerate(config.scenarios):
        for n_users in config.users:
            for rep in range(config.replications):
                tasks.append(
                    {
                        "config_id": scenario.config_id,
                        "preference": scenario.preference,
                        "length": scenario.length,
                        "intensity": scenario.intensity,
                        "n_users": n_users,
                        "rep": rep,
                        "seed": dataset_seed(config.seed, idx, n_users, rep),
                        "q": config.q,
                        "r0": config.r0,
                        "level": config.level,
                        "zeta": config.zeta,
                        "ece_bins": config.ece_bins,
                        "ece_binning": config.ece_binning,
                        "ci_grid_step": config.ci_grid_step,
                        "train_window": config.train_window,
                        "test_window": config.test_window,
                        "plot_payload": rep == 0,
                    }
                )
    return tasks


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run the sweep. Results are identical for every thread count: tasks
    are seeded independently and collected in a fixed order. A failing
    replication is recorded and excluded rather than aborting the sweep."""
    if threads < 1:
        raise ValueError("threads must be at least 1")
    tasks = _make_tasks(config)
    outcomes: list[dict | Exception] = []
    if threads == 1:
        for task in tasks:
            try:
                outcomes.append(_replication_task(task))
            except Exception as exc:  # noqa: BLE001 - recorded per task
                outcomes.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool_:
            futures = [pool_.submit(_replication_task, task) for task in tasks]
            for future in futures:
                try:
                    outcomes.append(future.result())
                except Exception as exc:  # noqa: BLE001
                    outcomes.append(exc)

    records: list[PerReplication] = []
    summaries: list[ReplicationSummary] = []
    plot_data: list[CellPlotData] = []
    failures: list[ReplicationFailure] = []
    pos = 0
    for scenario in config.scenarios:
        for n_users in config.users:
            cell: list[PerReplication] = []
            for rep in range(config.replications):
                result = outcomes[pos]
                pos += 1
                if isinstance(result, Exception):
                    failures.append(
                        ReplicationFailure(
                            config_id=scenario.config_id,
                            n_users=n_users,
                            rep=rep,
                            error=f"{type(result).__name__}: {result}",
                        )
                    )
                    continue
                cell.append(
                    PerReplication(
                        config_id=result["config_id"],
                        n_users=result["n_users"],
                        rep=result["rep"],
                        test_error=result["test_error"],
                        ece=result["ece"],
                        ci_lower=result["ci_lower"],
                        ci_upper=result["ci_upper"],
                        covered=result["covered"],
                    )
                )
                if "plot" in result:
                    p = result["plot"]
                    plot_data.append(
                        CellPlotData(
                            config_id=scenario.config_id,
                            n_users=n_users,
                            grid=np.asarray(p["grid"]),
                            fitted=np.asarray(p["fitted"]),
                            oracle=np.asarray(p["oracle"]),
                            true_h=np.asarray(p["true_h"]),
                            bin_index=np.asarray(p["bin_index"]),
                            bin_confidence=np.asarray(p["bin_confidence"]),
                            bin_accuracy=np.asarray(p["bin_accuracy"]),
                            bin_count=np.asarray(p["bin_count"]),
                        )
                    )
            records.extend(cell)
            if cell:
                summaries.append(summarize_replications(cell))
            log.info(
                "config %s N=%d: %d/%d replications ok",
                scenario.config_id,
                n_users,
                len(cell),
                config.replications,
            )
    return ExperimentResult(
        config=config,
        records=records,
        summaries=summaries,
        plot_data=plot_data,
        failures=failures,
    )


def export_datasets(config: ExperimentConfig, out_dir) -> list[Path]:
    """Write every replication's trajectory file; the exact datasets the
    sweep fits. Files are named config{id}_N{n}_rep{r}.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for idx, scenario in enumerate(config.scenarios):
        for n_users in config.users:
            for rep in range(config.replications):
                sim = build_sim_config(config, idx, n_users, rep)
                path = out_dir / f"config{scenario.config_id}_N{n_users}_rep{rep}.csv"
                write_trajectories(generate_dataset(sim), path)
                written.append(path)
    return written


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, echo: list[str], header: str, rows: list[str]) -> None:
    with path.open("w", newline="") as fh:
        for line in echo:
            fh.write(f"# {line}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def write_experiment_outputs(
    result: ExperimentResult, out_dir, figures: bool = True
) -> list[Path]:
    """Write table1.csv, table2.csv, replications.csv, plot-data files and
    (optionally) rendered figures. Returns the written paths."""
    from . import plots

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = result.config.echo_lines()
    written: list[Path] = []

    rows = [
        ",".join(
            [
                s.config_id,
                str(s.n_users),
                str(s.replications),
                _fmt(s.test_error_mean),
                "" if s.test_error_sd is None else _fmt(s.test_error_sd),
                _fmt(s.ece_mean),
                "" if s.ece_sd is None else _fmt(s.ece_sd),
            ]
        )
        for s in result.summaries
    ]
    path = out_dir / "table1.csv"
    _write_csv(
        path,
        echo,
        "config,n_users,replications,test_error_mean,test_error_sd,ece_mean,ece_sd",
        rows,
    )
    written.append(path)

    rows = [
        ",".join(
            [
                s.config_id,
                str(s.n_users),
                str(s.replications),
                _fmt(s.ci_length_mean),
                "" if s.ci_length_sd is None else _fmt(s.ci_length_sd),
                _fmt(s.coverage),
            ]
        )
        for s in result.summaries
    ]
    path = out_dir / "table2.csv"
    _write_csv(
        path,
        echo,
        "config,n_users,replications,ci_length_mean,ci_length_sd,coverage",
        rows,
    )
    written.append(path)

    rows = [
        ",".join(
            [
                rec.config_id,
                str(rec.n_users),
                str(rec.rep),
                _fmt(rec.test_error),
                _fmt(rec.ece),
                _fmt(rec.ci_lower),
                _fmt(rec.ci_upper),
                _fmt(rec.ci_length),
                "1" if rec.covered else "0",
            ]
        )
        for rec in result.records
    ]
    path = out_dir / "replications.csv"
    _write_csv(
        path,
        echo,
        "config,n_users,rep,test_error,ece,ci_lower,ci_upper,ci_length,covered",
        rows,
    )
    written.append(path)

    if result.failures:
        rows = [
            ",".join([f.config_id, str(f.n_users), str(f.rep), f.error.replace(",", ";")])
            for f in result.failures
        ]
        path = out_dir / "failures.csv"
        _write_csv(path, echo, "config,n_users,rep,error", rows)
        written.append(path)

    plot_dir = out_dir / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    fig_dir = out_dir / "figures"
    if figures:
        fig_dir.mkdir(exist_ok=True)
    for cell in result.plot_data:
        stem = f"config{cell.config_id}_N{cell.n_users}"
        path = plot_dir / f"curves_{stem}.csv"
        rows = [
            ",".join([_fmt(r), _fmt(f), _fmt(o), _fmt(t)])
            for r, f, o, t in zip(cell.grid, cell.fitted, cell.oracle, cell.true_h)
        ]
        _write_csv(path, echo, "r,fitted,oracle,true_h", rows)
        written.append(path)
        path = plot_dir / f"reliability_{stem}.csv"
        rows = [
            ",".join([str(int(b)), _fmt(c), _fmt(a), str(int(n))])
            for b, c, a, n in zip(
                cell.bin_index, cell.bin_confidence, cell.bin_accuracy, cell.bin_count
            )
        ]
        _write_csv(path, echo, "bin,confidence,accuracy,count", rows)
        written.append(path)
        if figures:
            fig = plots.curve_figure(
                cell.grid,
                cell.fitted,
                cell.oracle,
                cell.true_h,
                title=f"config {cell.config_id}, N={cell.n_users}",
            )
            path = fig_dir / f"curves_{stem}.png"
            plots.save_figure(fig, path)
            written.append(path)
            fig = plots.reliability_figure(
                cell.bin_confidence,
                cell.bin_accuracy,
                cell.bin_count,
                title=f"config {cell.config_id}, N={cell.n_users}",
            )
            path = fig_dir / f"reliability_{stem}.png"
            plots.save_figure(fig, path)
            written.append(path)

    if figures and result.summaries:
        by_config: dict[str, tuple[list[int], list[float]]] = {}
        for s in result.summaries:
            ns, vals = by_config.setdefault(s.config_id, ([], []))
            ns.append(s.n_users)
            vals.append(s.test_error_mean)
        fig = plots.metric_by_size_figure(
            by_config, ylabel="mean test error", title="test error by sample size"
        )
        path = fig_dir / "test_error_by_size.png"
        plots.save_figure(fig, path)
        written.append(path)
        by_config = {}
        for s in result.summaries:
            ns, vals = by_config.setdefault(s.config_id, ([], []))
            ns.append(s.n_users)
            vals.append(s.ci_length_mean)
        fig = plots.metric_by_size_figure(
            by_config,
            ylabel="mean interval length",
            title="interval length by sample size",
        )
        path = fig_dir / "ci_length_by_size.png"
        plots.save_figure(fig, path)
        written.append(path)
    return written
