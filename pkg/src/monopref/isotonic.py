"""Weighted isotonic regression and greatest-convex-minorant slopes.

The least-squares projection of a weighted series onto the non-decreasing
cone is computed by the pool-adjacent-violators algorithm (PAVA). The same
projection can be read off as the left-derivative slopes of the greatest
convex minorant (GCM) of the cumulative-sum diagram; `gcm_slopes` implements
that route independently and is used to cross-validate PAVA in the tests.
`constrained_fit` solves the variant where the fit is capped at a bound on
one side of a split index and floored at it on the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightedSeries",
    "IsotonicFit",
    "pava",
    "isotonic_fit",
    "gcm_slopes",
    "constrained_fit",
]


@dataclass(frozen=True)
class WeightedSeries:
    """A weighted series (weights[s], values[s]) with positive weights and
    values in [0, 1]."""

    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if w.size == 0:
            raise ValueError("series must be non-empty")
        if w.ndim != 1 or w.shape != v.shape:
            raise ValueError("weights and values must be 1-d and equally long")
        if not np.all(w > 0.0):
            raise ValueError("weights must be strictly positive")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("values must lie in [0, 1]")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class IsotonicFit:
    """Result of an isotonic fit: the fitted vector and its maximal constant
    blocks as half-open [start, stop) index ranges partitioning 0..len."""

    fitted: np.ndarray
    blocks: tuple[tuple[int, int], ...]


def pava(values, weights) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Minimize sum w_s (v_s - h_s)^2 over non-decreasing h by PAVA.

    Returns (fitted, blocks). Block means are maintained as running weighted
    means, so no large intermediate sums are cancelled. Pooling triggers only
    on a strict `previous > current` violation: plateaus of equal values stay
    separate blocks, which leaves the fitted vector unchanged.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = v.size
    if n == 0:
        raise ValueError("series must be non-empty")
    vl = v.tolist()
    wl = w.tolist()
    # parallel stacks: block start index, block weight, block running mean
    starts: list[int] = []
    wsum: list[float] = []
    mean: list[float] = []
    for i in range(n):
        starts.append(i)
        wsum.append(wl[i])
        mean.append(vl[i])
        while len(mean) > 1 and mean[-2] > mean[-1]:
            w_hi = wsum.pop()
            m_hi = mean.pop()
            starts.pop()
            w_all = wsum[-1] + w_hi
            mean[-1] += (m_hi - mean[-1]) * (w_hi / w_all)
            wsum[-1] = w_all
    fitted = np.empty(n, dtype=float)
    blocks: list[tuple[int, int]] = []
    for k, start in enumerate(starts):
        stop = starts[k + 1] if k + 1 < len(starts) else n
        fitted[start:stop] = mean[k]
        blocks.append((start, stop))
    return fitted, blocks


def isotonic_fit(series: WeightedSeries) -> IsotonicFit:
    """Weighted isotonic regression of `series.values` with `series.weights`."""
    fitted, blocks = pava(series.values, series.weights)
    return IsotonicFit(fitted=fitted, blocks=tuple(blocks))


def gcm_slopes(points) -> np.ndarray:
    """Left-derivative slopes of the greatest convex minorant of a diagram.

    `points` is a sequence (x_i, y_i), i = 0..l, with x strictly increasing
    and (x_0, y_0) = (0, 0). Returns the slopes of the GCM evaluated at
    x_1..x_l. For a cumulative-sum diagram (y non-decreasing) this equals the
    isotonic regression of the per-interval increments.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (x, y) points")
    x = pts[:, 0]
    y = pts[:, 1]
    if x[0] != 0.0 or y[0] != 0.0:
        raise ValueError("diagram must be anchored at (0, 0)")
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("x must be strictly increasing")
    # lower convex hull by monotone chain; input is already sorted by x
    hull = [0]
    for i in range(1, x.size):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            # drop k when it sits on or above the chord j -> i
            if (y[k] - y[j]) * (x[i] - x[j]) >= (y[i] - y[j]) * (x[k] - x[j]):
                hull.pop()
            else:
                break
        hull.append(i)
    slopes = np.empty(x.size - 1, dtype=float)
    for a, b in zip(hull[:-1], hull[1:]):
        # hull segment a -> b carries the left-derivative at x_{a+1}..x_b
        slopes[a:b] = (y[b] - y[a]) / (x[b] - x[a])
    return slopes


def constrained_fit(series: WeightedSeries, split: int, bound: float) -> IsotonicFit:
    """Isotonic fit with values capped at `bound` up to index `split` and
    floored at `bound` after it.

    `split` counts how many leading positions fall on the capped side
    (0 puts the whole series on the floored side). The two sides are fitted
    separately and clipped against the bound component-wise; the result is
    non-decreasing across the split by construction. Blocks are the maximal
    constant runs of the clipped vector; unlike the unconstrained fit, their
    values need not equal block means.
    """
    if not 0.0 < bound < 1.0:
        raise ValueError("bound must lie strictly inside (0, 1)")
    n = len(series)
    if not isinstance(split, (int, np.integer)) or not 0 <= split <= n:
        raise ValueError(f"split must be an integer in 0..{n}")
    fitted = np.empty(n, dtype=float)
    if split > 0:
        low, _ = pava(series.values[:split], series.weights[:split])
        np.minimum(low, bound, out=fitted[:split])
    if split < n:
        high, _ = pava(series.values[split:], series.weights[split:])
        np.maximum(high, bound, out=fitted[split:])
    boundaries = np.flatnonzero(np.diff(fitted) != 0.0) + 1
    edges = [0, *boundaries.tolist(), n]
    blocks = tuple((edges[k], edges[k + 1]) for k in range(len(edges) - 1))
    return IsotonicFit(fitted=fitted, blocks=blocks)
