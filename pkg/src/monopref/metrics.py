"""Scoring of fitted preference functions.

The benchmark is a kernel (Nadaraya-Watson) estimate computed on held-out
test pairs; the test error averages the absolute gap between the fitted step
function and that benchmark over a fixed evaluation grid. Calibration is
scored by the expected calibration error over equal-width bins. Replication
sweeps aggregate per-replication records into means, standard deviations and
empirical coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChoicePairs, MonotoneStepFn, eval_step

__all__ = [
    "EVAL_GRID",
    "ReliabilityBins",
    "PerReplication",
    "ReplicationSummary",
    "nadaraya_watson_oracle",
    "oracle_curve",
    "test_error",
    "reliability_bins",
    "ece",
    "summarize_replications",
]

# 100 equidistant evaluation points spanning [0, 1]
EVAL_GRID = np.arange(100) / 99.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_UNDERFLOW = 1e-300


def _nearest_average(pairs: ChoicePairs, r: float) -> float:
    dist = np.abs(pairs.r - r)
    return float(pairs.u[dist == dist.min()].mean())


def oracle_curve(pairs: ChoicePairs, zeta: float, grid) -> np.ndarray:
    """Gaussian-kernel regression of the successor choices on r, evaluated
    at each grid point.

    Where the kernel mass under the grid point falls below 1e-300 (far from
    every test covariate), the estimate falls back to the average successor
    choice among the nearest covariates (all of them, under ties).
    """
    if len(pairs) == 0:
        raise ValueError("test pairs must be non-empty")
    if not zeta > 0.0:
        raise ValueError("bandwidth must be positive")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    z = (grid[:, None] - pairs.r[None, :]) / zeta
    with np.errstate(under="ignore"):
        kernel = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    mass = kernel.sum(axis=1)
    out = np.empty(grid.size)
    ok = mass >= _UNDERFLOW
    out[ok] = (kernel[ok] @ pairs.u) / mass[ok]
    for i in np.flatnonzero(~ok):
        out[i] = _nearest_average(pairs, grid[i])
    # a convex combination of values in [0, 1]; clip off summation-order ulps
    return np.clip(out, 0.0, 1.0)


def nadaraya_watson_oracle(pairs: ChoicePairs, zeta: float, r: float) -> float:
    """The kernel benchmark at a single point; see `oracle_curve`."""
    return float(oracle_curve(pairs, zeta, [r])[0])


def test_error(fitted: MonotoneStepFn, pairs: ChoicePairs, zeta: float = 0.01) -> float:
    """Mean absolute gap between the kernel benchmark and the fitted step
    function over the fixed evaluation grid."""
    benchmark = oracle_curve(pairs, zeta, EVAL_GRID)
    return float(np.mean(np.abs(benchmark - eval_step(fitted, EVAL_GRID))))


@dataclass(frozen=True)
class ReliabilityBins:
    """Per-bin counts, mean prediction (confidence) and mean outcome
    (accuracy) over equal-width bins of [0, 1]. Empty bins carry NaN."""

    counts: np.ndarray
    confidence: np.ndarray
    accuracy: np.ndarray

    def __post_init__(self) -> None:
        n = np.asarray(self.counts, dtype=np.int64)
        c = np.asarray(self.confidence, dtype=float)
        a = np.asarray(self.accuracy, dtype=float)
        if n.ndim != 1 or n.shape != c.shape or n.shape != a.shape or n.size == 0:
            raise ValueError("bin arrays must be non-empty, 1-d, equal length")
        filled = n > 0
        for arr in (c, a):
            vals = arr[filled]
            if np.any(vals < 0.0) or np.any(vals > 1.0):
                raise ValueError("non-empty bins must average into [0, 1]")
        object.__setattr__(self, "counts", n)
        object.__setattr__(self, "confidence", c)
        object.__setattr__(self, "accuracy", a)

    @property
    def bins(self) -> int:
        return int(self.counts.size)

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.bins + 1) / self.bins


def reliability_bins(
    fitted: MonotoneStepFn,
    pairs: ChoicePairs,
    bins: int = 50,
    binning: str = "covariate",
) -> ReliabilityBins:
    """Group test pairs into `bins` equal-width bins of [0, 1].

    Bin b_i = [(i-1)/B, i/B), the last bin closed at 1. Membership follows
    the covariate r by default; binning="prediction" groups by the predicted
    probability instead.
    """
    if bins < 1:
        raise ValueError("need at least one bin")
    if len(pairs) == 0:
        raise ValueError("test pairs must be non-empty")
    predictions = eval_step(fitted, pairs.r)
    if binning == "covariate":
        key = pairs.r
    elif binning == "prediction":
        key = predictions
    else:
        raise ValueError("binning must be 'covariate' or 'prediction'")
    idx = np.minimum((key * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    pred_sums = np.bincount(idx, weights=predictions, minlength=bins)
    out_sums = np.bincount(idx, weights=pairs.u, minlength=bins)
    with np.errstate(invalid="ignore"):
        confidence = np.where(counts > 0, pred_sums / counts, np.nan)
        accuracy = np.where(counts > 0, out_sums / counts, np.nan)
    return ReliabilityBins(counts=counts, confidence=confidence, accuracy=accuracy)


def ece(
    fitted: MonotoneStepFn,
    pairs: ChoicePairs,
    bins: int = 50,
    binning: str = "covariate",
) -> float:
    """Expected calibration error: count-weighted mean absolute gap between
    per-bin confidence and accuracy; empty bins contribute nothing."""
    rel = reliability_bins(fitted, pairs, bins=bins, binning=binning)
    filled = rel.counts > 0
    share = rel.counts[filled] / rel.counts.sum()
    return float(np.sum(share * np.abs(rel.confidence[filled] - rel.accuracy[filled])))


@dataclass(frozen=True)
class PerReplication:
    """One replication's scores; one row of the replication table."""

    config_id: str
    n_users: int
    rep: int
    test_error: float
    ece: float
    ci_lower: float
    ci_upper: float
    covered: bool

    @property
    def ci_length(self) -> float:
        return self.ci_upper - self.ci_lower


@dataclass(frozen=True)
class ReplicationSummary:
    """Aggregates over the replications of one (configuration, N) cell."""

    config_id: str
    n_users: int
    replications: int
    test_errors: np.ndarray
    eces: np.ndarray
    ci_lengths: np.ndarray
    covered: np.ndarray
    test_error_mean: float
    test_error_sd: float | None
    ece_mean: float
    ece_sd: float | None
    ci_length_mean: float
    ci_length_sd: float | None
    coverage: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        for sd in (self.test_error_sd, self.ece_sd, self.ci_length_sd):
            if sd is not None and sd < 0.0:
                raise ValueError("standard deviations must be non-negative")


def summarize_replications(records) -> ReplicationSummary:
    """Means, n-1 standard deviations, and empirical coverage of a cell's
    per-replication records. With a single record the deviations are None."""
    records = list(records)
    if not records:
        raise ValueError("no replication records")
    cells = {(rec.config_id, rec.n_users) for rec in records}
    if len(cells) != 1:
        raise ValueError(f"records span multiple cells: {sorted(cells)}")
    te = np.array([rec.test_error for rec in records])
    ce = np.array([rec.ece for rec in records])
    ln = np.array([rec.ci_length for rec in records])
    cov = np.array([rec.covered for rec in records], dtype=bool)
    many = len(records) >= 2

    def sd(arr: np.ndarray) -> float | None:
        return float(np.std(arr, ddof=1)) if many else None

    return ReplicationSummary(
        config_id=records[0].config_id,
        n_users=records[0].n_users,
        replications=len(records),
        test_errors=te,
        eces=ce,
        ci_lengths=ln,
        covered=cov,
        test_error_mean=float(te.mean()),
        test_error_sd=sd(te),
        ece_mean=float(ce.mean()),
        ece_sd=sd(ce),
        ci_length_mean=float(ln.mean()),
        ci_length_sd=sd(ln),
        coverage=float(cov.mean()),
    )
