"""Monotone NPMLE, point-null constrained fits, likelihood-ratio inversion.

The unconstrained estimator is the weighted isotonic regression of the pooled
successor means. Pinning the function to a value h0 at a point r0 splits the
knots at r0; each side is fitted separately and clipped against h0 (capped on
the left, floored on the right). Twice the log-likelihood gap between the two
fits is the test statistic; inverting the test over a grid of h0 values gives
a confidence set, with critical values taken from Monte-Carlo quantiles of
the limiting distribution (an integral of the squared-slope gap between the
convex-minorant slope processes of a Brownian motion plus parabola and its
zero-clipped one-sided restriction).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .isotonic import WeightedSeries, constrained_fit, pava
from .model import MonotoneStepFn, PooledSample, loglik

__all__ = [
    "LrProfile",
    "ConfidenceInterval",
    "DQuantileTable",
    "fit_npmle",
    "fit_constrained",
    "lr_statistic",
    "lr_profile",
    "confidence_set",
    "simulate_d_quantiles",
    "default_quantiles",
]

DEFAULT_CI_GRID_STEP = 0.001
QUANTILE_LEVELS = (0.80, 0.90, 0.95, 0.99)


def _split_index(knots: np.ndarray, r0: float) -> int:
    """Number of knots on the left side of the pin: largest s0 with
    knots[s0 - 1] <= r0 (a knot exactly at r0 goes left)."""
    return int(np.searchsorted(knots, r0, side="right"))


def fit_npmle(sample: PooledSample) -> MonotoneStepFn:
    """Maximum-likelihood non-decreasing step function with jumps at the
    sample knots: the isotonic regression of the pooled means."""
    fitted, _ = pava(sample.means, sample.weights)
    return MonotoneStepFn(knots=sample.knots, values=fitted)


def fit_constrained(sample: PooledSample, r0: float, h0: float) -> MonotoneStepFn:
    """Maximum-likelihood fit under the pin h(r0) = h0.

    The returned function carries the sample knots only; values at knots
    <= r0 are capped at h0 and values at knots > r0 are floored at h0, so
    inserting a jump of value h0 at r0 keeps it non-decreasing.
    """
    if not 0.0 < r0 < 1.0:
        raise ValueError("r0 must lie strictly inside (0, 1)")
    series = WeightedSeries(weights=sample.weights.astype(float), values=sample.means)
    split = _split_index(sample.knots, r0)
    fit = constrained_fit(series, split, h0)
    return MonotoneStepFn(knots=sample.knots, values=fit.fitted)


def lr_statistic(sample: PooledSample, r0: float, h0: float) -> float:
    """Twice the log-likelihood gap between the unconstrained fit and the
    fit pinned to h(r0) = h0. Non-negative up to rounding."""
    free = loglik(sample, fit_npmle(sample).values)
    pinned = loglik(sample, fit_constrained(sample, r0, h0).values)
    return 2.0 * (free - pinned)


@dataclass(frozen=True)
class LrProfile:
    """The statistic 2 log lambda(h0) over an increasing grid of h0 values."""

    r0: float
    grid: np.ndarray
    statistics: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=float)
        s = np.asarray(self.statistics, dtype=float)
        if g.ndim != 1 or g.shape != s.shape or g.size == 0:
            raise ValueError("grid and statistics must be non-empty, 1-d, equal length")
        if np.any(np.diff(g) <= 0.0) or g[0] <= 0.0 or g[-1] >= 1.0:
            raise ValueError("grid must increase strictly inside (0, 1)")
        if np.any(s < -1e-9):
            raise ValueError("statistics must be non-negative up to rounding")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "statistics", s)


def _knot_terms(weights, means, values) -> np.ndarray:
    """Per-knot log-likelihood contributions with the 0*log 0 convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(means > 0.0, means * np.log(values), 0.0)
        down = np.where(means < 1.0, (1.0 - means) * np.log1p(-values), 0.0)
    return weights * (up + down)


def lr_profile(sample: PooledSample, r0: float, grid) -> LrProfile:
    """Evaluate the statistic over a whole h0 grid in one pass.

    The two one-sided sub-fits do not depend on h0; varying h0 only moves the
    boundary of the region where the fit is clipped to h0. Prefix sums over
    the sorted sub-fit values therefore give every grid point in
    O(log S) after an O(S) setup, instead of one isotonic fit per h0.
    """
    if not 0.0 < r0 < 1.0:
        raise ValueError("r0 must lie strictly inside (0, 1)")
    h_grid = np.asarray(grid, dtype=float)
    if h_grid.size == 0:
        raise ValueError("empty h0 grid")
    if h_grid[0] <= 0.0 or h_grid[-1] >= 1.0 or np.any(np.diff(h_grid) <= 0.0):
        raise ValueError("grid must increase strictly inside (0, 1)")

    F = sample.weights.astype(float)
    m = sample.means
    split = _split_index(sample.knots, r0)

    full_fit, _ = pava(m, F)
    ll_free = float(np.sum(_knot_terms(F, m, full_fit)))

    log_h = np.log(h_grid)
    log_1mh = np.log1p(-h_grid)

    # left of the pin: fit capped at h0; the cap binds on a suffix because the
    # sub-fit is non-decreasing
    if split > 0:
        fit_left, _ = pava(m[:split], F[:split])
        terms = _knot_terms(F[:split], m[:split], fit_left)
        pref_ll = np.concatenate(([0.0], np.cumsum(terms)))
        a = F[:split] * m[:split]
        b = F[:split] * (1.0 - m[:split])
        pref_a = np.concatenate(([0.0], np.cumsum(a)))
        pref_b = np.concatenate(([0.0], np.cumsum(b)))
        cut = np.searchsorted(fit_left, h_grid, side="left")
        ll_left = (
            pref_ll[cut]
            + (pref_a[-1] - pref_a[cut]) * log_h
            + (pref_b[-1] - pref_b[cut]) * log_1mh
        )
    else:
        ll_left = np.zeros_like(h_grid)

    # right of the pin: fit floored at h0; the floor binds on a prefix
    if split < len(sample):
        fit_right, _ = pava(m[split:], F[split:])
        terms = _knot_terms(F[split:], m[split:], fit_right)
        pref_ll = np.concatenate(([0.0], np.cumsum(terms)))
        a = F[split:] * m[split:]
        b = F[split:] * (1.0 - m[split:])
        pref_a = np.concatenate(([0.0], np.cumsum(a)))
        pref_b = np.concatenate(([0.0], np.cumsum(b)))
        cut = np.searchsorted(fit_right, h_grid, side="right")
        ll_right = (
            pref_a[cut] * log_h + pref_b[cut] * log_1mh + (pref_ll[-1] - pref_ll[cut])
        )
    else:
        ll_right = np.zeros_like(h_grid)

    stats = 2.0 * (ll_free - ll_left - ll_right)
    return LrProfile(r0=float(r0), grid=h_grid, statistics=stats)


@dataclass(frozen=True)
class ConfidenceInterval:
    """Hull of the accepted h0 grid; `contiguous` records whether every
    interior grid point was also accepted."""

    level: float
    lower: float
    upper: float
    contiguous: bool

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.lower > self.upper:
            raise ValueError("lower must not exceed upper")

    @property
    def length(self) -> float:
        return self.upper - self.lower


def confidence_set(
    sample: PooledSample,
    r0: float,
    level: float,
    quantiles: "DQuantileTable | None" = None,
    grid_step: float = DEFAULT_CI_GRID_STEP,
) -> ConfidenceInterval:
    """Invert the likelihood-ratio test over the h0 grid
    {grid_step, 2 grid_step, ..., 1 - grid_step}."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if not 0.0 < grid_step <= 0.01:
        raise ValueError("grid_step must lie in (0, 0.01]")
    if quantiles is None:
        quantiles = default_quantiles()
    critical = quantiles.quantile(level)
    n = round(1.0 / grid_step)
    grid = np.arange(1, n) * grid_step
    profile = lr_profile(sample, r0, grid)
    accepted = np.flatnonzero(profile.statistics <= critical)
    if accepted.size == 0:
        raise RuntimeError(
            "no h0 on the grid was accepted; the grid is too coarse for this sample"
        )
    first, last = accepted[0], accepted[-1]
    contiguous = accepted.size == last - first + 1
    return ConfidenceInterval(
        level=float(level),
        lower=float(grid[first]),
        upper=float(grid[last]),
        contiguous=bool(contiguous),
    )


@dataclass(frozen=True)
class DQuantileTable:
    """Monte-Carlo quantiles of the limiting statistic, keyed by confidence
    level, plus the provenance needed to regenerate them."""

    levels: dict[float, float]
    replications: int
    grid_step: float
    span: float
    seed: int

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("quantile table must not be empty")
        pairs = sorted(self.levels.items())
        qs = [q for _, q in pairs]
        if any(q <= 0.0 for q in qs):
            raise ValueError("quantiles must be positive")
        if any(b < a for a, b in zip(qs, qs[1:])):
            raise ValueError("quantiles must be non-decreasing in the level")
        object.__setattr__(self, "levels", dict(pairs))

    def quantile(self, level: float) -> float:
        try:
            return self.levels[level]
        except KeyError:
            available = ", ".join(repr(l) for l in self.levels)
            raise ValueError(
                f"level {level!r} not in the table (available: {available})"
            ) from None

    def save(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write("level,quantile,replications,grid_step,range,seed\n")
            for level, q in self.levels.items():
                fh.write(
                    f"{level!r},{q!r},{self.replications},"
                    f"{self.grid_step!r},{self.span!r},{self.seed}\n"
                )

    @classmethod
    def load(cls, path) -> "DQuantileTable":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["level", "quantile", "replications", "grid_step", "range", "seed"]
            if reader.fieldnames != expected:
                raise ValueError(f"{path}: expected columns {','.join(expected)}")
            levels: dict[float, float] = {}
            meta: tuple | None = None
            for row in reader:
                levels[float(row["level"])] = float(row["quantile"])
                this = (
                    int(row["replications"]),
                    float(row["grid_step"]),
                    float(row["range"]),
                    int(row["seed"]),
                )
                if meta is None:
                    meta = this
                elif meta != this:
                    raise ValueError(f"{path}: inconsistent provenance across rows")
        if meta is None:
            raise ValueError(f"{path}: no quantile rows")
        return cls(
            levels=levels,
            replications=meta[0],
            grid_step=meta[1],
            span=meta[2],
            seed=meta[3],
        )


def _slope_gap_integral(seed: int, grid_step: float, half_steps: int) -> float:
    """One draw of the limiting statistic on a [-L, L] grid.

    Brownian motion with independent Gaussian increments (variance =
    grid_step) on each side of 0, B(0) = 0, plus the parabola x^2. The
    convex-minorant slope on each grid interval is the isotonic regression of
    the per-interval increment slopes (uniform interval widths). The
    restricted process clips the left-side slopes above at 0 and the
    right-side slopes below at 0, each side's minorant anchored at the
    origin. The integrand is piecewise constant, so the rectangle rule is
    exact on the grid.
    """
    rng = np.random.default_rng(seed)
    sd = math.sqrt(grid_step)
    inc_right = rng.normal(0.0, sd, half_steps)
    inc_left = rng.normal(0.0, sd, half_steps)

    x_side = np.arange(1, half_steps + 1) * grid_step
    drift = x_side**2
    y_right = np.cumsum(inc_right) + drift
    y_left = np.cumsum(inc_left) + drift  # values at -x_side, walking leftward

    # diagram ordered by x: (-L .. -step, 0, step .. L); origin value is 0
    y = np.concatenate((y_left[::-1], [0.0], y_right))
    d = np.diff(y) / grid_step
    ones = np.ones_like(d)

    g_full, _ = pava(d, ones)
    g_left, _ = pava(d[:half_steps], ones[:half_steps])
    g_right, _ = pava(d[half_steps:], ones[half_steps:])
    g_low = np.minimum(g_left, 0.0)
    g_high = np.maximum(g_right, 0.0)
    gap = (g_full @ g_full) - (g_low @ g_low) - (g_high @ g_high)
    return float(grid_step * gap)


def _slope_gap_chunk(args) -> list[float]:
    seed_from, seed_to, grid_step, half_steps = args
    return [
        _slope_gap_integral(s, grid_step, half_steps)
        for s in range(seed_from, seed_to)
    ]


def simulate_d_quantiles(
    replications: int,
    grid_step: float = 0.01,
    span: float = 6.0,
    seed: int = 0,
    levels: tuple[float, ...] = QUANTILE_LEVELS,
    threads: int = 1,
) -> DQuantileTable:
    """Monte-Carlo quantiles of the limiting statistic.

    Per-replication seeds are seed + replication index, so the result is
    independent of the thread count. `span` is the truncation range L: the
    integrand vanishes far from the origin, and L >= 5 keeps the truncation
    error negligible at these grid sizes.
    """
    if replications < 1000:
        raise ValueError("need at least 1000 replications")
    if not 0.0 < grid_step <= 0.01:
        raise ValueError("grid_step must lie in (0, 0.01]")
    if span < 5.0:
        raise ValueError("span must be at least 5")
    if not levels or any(not 0.0 < l < 1.0 for l in levels):
        raise ValueError("levels must lie in (0, 1)")
    half_steps = round(span / grid_step)

    if threads <= 1:
        draws = _slope_gap_chunk((seed, seed + replications, grid_step, half_steps))
    else:
        bounds = np.linspace(0, replications, threads + 1).astype(int)
        jobs = [
            (seed + int(a), seed + int(b), grid_step, half_steps)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_slope_gap_chunk, jobs))
        draws = [x for chunk in chunks for x in chunk]

    qs = np.quantile(np.asarray(draws), np.asarray(levels))
    return DQuantileTable(
        levels={float(l): float(q) for l, q in zip(levels, qs)},
        replications=int(replications),
        grid_step=float(grid_step),
        span=float(span),
        seed=int(seed),
    )


@lru_cache(maxsize=1)
def default_quantiles() -> DQuantileTable:
    """The packaged quantile table (see its provenance columns)."""
    ref = resources.files("monopref").joinpath("data/d_quantiles.csv")
    with resources.as_file(ref) as path:
        return DQuantileTable.load(path)
