"""Command-line entry point.

Subcommands: simulate, fit, ci, experiment, ingest, dquantile. Exit codes:
0 success, 1 completed with warnings (failed replications, skipped rows),
2 invalid input or environment. The report paths (fit --figure, experiment)
render figures next to the delimited output.

Worker count: --threads wins, then the MONOPREF_THREADS environment
variable, then 1. Outputs are identical for every thread count.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .experiment import (
    ExperimentConfig,
    export_datasets,
    run_experiment,
    write_experiment_outputs,
)
from .inference import (
    DEFAULT_CI_GRID_STEP,
    DQuantileTable,
    confidence_set,
    fit_npmle,
    simulate_d_quantiles,
)
from .ingest import (
    CategoryColumns,
    EventColumns,
    GroupSpec,
    IngestRules,
    extract_pairwise,
    load_categories,
    load_events,
)
from .model import eval_step, pool, read_trajectories, write_trajectories

_MAX_WARNING_LINES = 20


def _fmt(x: float) -> str:
    return repr(float(x))


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise ValueError("threads must be at least 1")
        return value
    env = os.environ.get("MONOPREF_THREADS")
    if env:
        try:
            parsed = int(env)
        except ValueError:
            raise ValueError(
                f"MONOPREF_THREADS must be an integer, got {env!r}"
            ) from None
        if parsed < 1:
            raise ValueError("MONOPREF_THREADS must be at least 1")
        return parsed
    return 1


def cmd_simulate(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_file(args.config)
    written = export_datasets(config, args.out)
    print(f"wrote {len(written)} trajectory files to {args.out}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    trajectories = read_trajectories(args.input)
    fitted = fit_npmle(pool(trajectories))
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        fh.write("knot,value\n")
        for knot, value in zip(fitted.knots, fitted.values):
            fh.write(f"{_fmt(knot)},{_fmt(value)}\n")
    if args.figure is not None:
        from . import plots
        from .metrics import EVAL_GRID

        fig = plots.curve_figure(
            EVAL_GRID, eval_step(fitted, EVAL_GRID), title="fitted preference"
        )
        plots.save_figure(fig, args.figure)
    print(f"wrote {len(fitted)} knots to {out}")
    return 0


def cmd_ci(args: argparse.Namespace) -> int:
    if not 0.0 < args.r0 < 1.0:
        raise ValueError("r0 must lie in (0, 1)")
    trajectories = read_trajectories(args.input)
    sample = pool(trajectories)
    quantiles = (
        DQuantileTable.load(args.quantiles) if args.quantiles is not None else None
    )
    interval = confidence_set(
        sample, args.r0, args.level, quantiles=quantiles, grid_step=args.grid_step
    )
    estimate = eval_step(fit_npmle(sample), args.r0)
    print(f"lower={_fmt(interval.lower)}")
    print(f"upper={_fmt(interval.upper)}")
    print(f"contiguous={'true' if interval.contiguous else 'false'}")
    print(f"h_hat={_fmt(estimate)}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_file(args.config)
    threads = _resolve_threads(args.threads)
    result = run_experiment(config, threads=threads)
    written = write_experiment_outputs(result, args.out, figures=not args.no_figures)
    print(f"wrote {len(written)} files to {args.out}")
    if result.failures:
        shown = result.failures[:_MAX_WARNING_LINES]
        for failure in shown:
            print(
                f"warning: config {failure.config_id} N={failure.n_users} "
                f"rep {failure.rep} failed: {failure.error}",
                file=sys.stderr,
            )
        extra = len(result.failures) - len(shown)
        if extra:
            print(f"warning: ... and {extra} more failures", file=sys.stderr)
        return 1
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    event_columns = EventColumns(
        user=args.user_col,
        item=args.item_col,
        rating=args.rating_col,
        timestamp=args.timestamp_col,
        delimiter=args.delimiter,
    )
    category_columns = CategoryColumns(
        item=args.cat_item_col, tags=args.cat_tags_col, delimiter=args.delimiter
    )
    events = load_events(args.events, event_columns)
    categories = load_categories(args.categories, category_columns)
    for note in events.warnings + categories.warnings:
        print(f"warning: {note}", file=sys.stderr)
    groups = GroupSpec(
        group1=frozenset(args.group1),
        group0=frozenset(args.group0),
        categories=categories.categories,
    )
    rules = IngestRules(min_choices=args.min_choices, intensity=args.intensity)
    trajectories, summary = extract_pairwise(events.events, groups, rules)
    write_trajectories(trajectories, args.out)
    summary_path = Path(str(args.out) + ".summary.txt")
    with summary_path.open("w") as fh:
        for line in summary.lines():
            fh.write(line + "\n")
        fh.write(f"event_parse_errors={len(events.errors)}\n")
        fh.write(f"category_parse_errors={len(categories.errors)}\n")
    bad_rows = [(args.events, e) for e in events.errors]
    bad_rows += [(args.categories, e) for e in categories.errors]
    for path, err in bad_rows[:_MAX_WARNING_LINES]:
        print(f"warning: {path}: {err}", file=sys.stderr)
    extra = len(bad_rows) - _MAX_WARNING_LINES
    if extra > 0:
        print(f"warning: ... and {extra} more bad rows", file=sys.stderr)
    print(
        f"wrote {summary.users_valid} users ({summary.events_written} events) "
        f"to {args.out}; summary in {summary_path}"
    )
    return 1 if bad_rows else 0


def cmd_dquantile(args: argparse.Namespace) -> int:
    threads = _resolve_threads(args.threads)
    table = simulate_d_quantiles(
        args.replications,
        grid_step=args.grid_step,
        span=args.span,
        seed=args.seed,
        threads=threads,
    )
    table.save(args.out)
    levels = ", ".join(_fmt(level) for level in table.levels)
    print(f"wrote quantiles for levels {levels} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monopref",
        description="Monotone preference estimation from sequential binary choices.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "simulate", help="write every replication's trajectory file from a config"
    )
    p.add_argument("config", help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the monotone estimator to a trajectory file")
    p.add_argument("input", help="trajectory file")
    p.add_argument("--out", required=True, help="output CSV of (knot, value) rows")
    p.add_argument("--figure", help="also render the fitted curve to this image file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser(
        "ci", help="confidence interval for h(r0) by likelihood-ratio inversion"
    )
    p.add_argument("input", help="trajectory file")
    p.add_argument("--r0", type=float, required=True, help="reference point in (0, 1)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument(
        "--quantiles", help="quantile table file (default: packaged table)"
    )
    p.add_argument(
        "--grid-step",
        dest="grid_step",
        type=float,
        default=DEFAULT_CI_GRID_STEP,
        help="spacing of the h0 grid to invert over",
    )
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("experiment", help="run a full sweep and write its report")
    p.add_argument("config", help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--threads", type=int, help="worker processes (default: MONOPREF_THREADS or 1)"
    )
    p.add_argument(
        "--no-figures",
        action="store_true",
        help="write delimited output only, skip rendered figures",
    )
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser(
        "ingest", help="extract pairwise-choice trajectories from a rating log"
    )
    p.add_argument("events", help="rating events file")
    p.add_argument("categories", help="item categories file")
    p.add_argument(
        "--group1", nargs="+", required=True, help="tags of the option-one group"
    )
    p.add_argument(
        "--group0", nargs="+", required=True, help="tags of the option-zero group"
    )
    p.add_argument("--out", required=True, help="output trajectory file")
    p.add_argument(
        "--min-choices",
        dest="min_choices",
        type=int,
        default=20,
        help="minimum usable choices per user",
    )
    p.add_argument(
        "--intensity",
        choices=("constant", "rating"),
        default="constant",
        help="intensity of each event: constant 1 or the rating value",
    )
    p.add_argument("--user-col", default="user_id", help="events: user column")
    p.add_argument("--item-col", default="item_id", help="events: item column")
    p.add_argument("--rating-col", default="rating", help="events: rating column")
    p.add_argument(
        "--timestamp-col", default="timestamp", help="events: timestamp column"
    )
    p.add_argument("--delimiter", default=",", help="field delimiter of both files")
    p.add_argument(
        "--cat-item-col", default="item_id", help="categories: item column"
    )
    p.add_argument(
        "--cat-tags-col", default="tags", help="categories: pipe-separated tags column"
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser(
        "dquantile", help="simulate quantiles of the limiting statistic"
    )
    p.add_argument("--out", required=True, help="output quantile table file")
    p.add_argument(
        "--replications", type=int, default=20000, help="Monte-Carlo sample size"
    )
    p.add_argument(
        "--grid-step",
        dest="grid_step",
        type=float,
        default=0.01,
        help="discretization step of the process",
    )
    p.add_argument(
        "--range",
        dest="span",
        type=float,
        default=6.0,
        help="half-width of the simulated time window",
    )
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument(
        "--threads", type=int, help="worker processes (default: MONOPREF_THREADS or 1)"
    )
    p.set_defaults(func=cmd_dquantile)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
