"""Independent oracles and generators shared by the test modules.

The oracles deliberately use different algorithms from the library code:
exhaustive partition enumeration instead of pooling, per-observation sums
instead of pooled terms, and list scans instead of hashing.
"""

from __future__ import annotations

import math

import numpy as np

from monopref import PooledSample


def partition_oracle(values, weights) -> np.ndarray:
    """Isotonic regression by exhaustive search over all consecutive-block
    partitions: among partitions whose block means are non-decreasing, pick
    the one minimizing the weighted sum of squares. Exponential in len;
    intended for len <= 8."""
    values = [float(v) for v in values]
    weights = [float(w) for w in weights]
    n = len(values)
    best = None
    best_sse = math.inf
    for mask in range(2 ** (n - 1)):
        cuts = [i + 1 for i in range(n - 1) if mask >> i & 1]
        bounds = [0] + cuts + [n]
        fitted: list[float] = []
        prev = -math.inf
        feasible = True
        for a, b in zip(bounds[:-1], bounds[1:]):
            w = sum(weights[a:b])
            m = sum(values[j] * weights[j] for j in range(a, b)) / w
            if m < prev:
                feasible = False
                break
            prev = m
            fitted.extend([m] * (b - a))
        if not feasible:
            continue
        sse = sum(weights[j] * (values[j] - fitted[j]) ** 2 for j in range(n))
        if sse < best_sse:
            best_sse = sse
            best = fitted
    assert best is not None
    return np.asarray(best)


def constrained_partition_oracle(values, weights, split, bound) -> np.ndarray:
    """Constrained isotonic regression by the same enumeration: block values
    are block means clipped against the bound (capped left of the split,
    floored right of it, pinned to the bound when straddling); the minimum
    over feasible candidates is the unique projection."""
    values = [float(v) for v in values]
    weights = [float(w) for w in weights]
    n = len(values)
    best = None
    best_sse = math.inf
    for mask in range(2 ** (n - 1)):
        cuts = [i + 1 for i in range(n - 1) if mask >> i & 1]
        bounds = [0] + cuts + [n]
        fitted: list[float] = []
        prev = -math.inf
        feasible = True
        for a, b in zip(bounds[:-1], bounds[1:]):
            w = sum(weights[a:b])
            m = sum(values[j] * weights[j] for j in range(a, b)) / w
            if b <= split:
                v = min(m, bound)
            elif a >= split:
                v = max(m, bound)
            else:
                v = bound
            if v < prev - 1e-12:
                feasible = False
                break
            prev = v
            fitted.extend([v] * (b - a))
        if not feasible:
            continue
        sse = sum(weights[j] * (values[j] - fitted[j]) ** 2 for j in range(n))
        if sse < best_sse:
            best_sse = sse
            best = fitted
    assert best is not None
    return np.asarray(best)


def loglik_unpooled(weights, means, values) -> float:
    """Per-observation binomial log-likelihood: F_s * mean_s successes and
    F_s * (1 - mean_s) failures per knot, summed one term at a time."""
    total = 0.0
    for f, m, h in zip(weights, means, values):
        successes = float(f) * float(m)
        failures = float(f) * (1.0 - float(m))
        if successes > 0.0:
            if h == 0.0:
                return float("-inf")
            total += successes * math.log(h)
        if failures > 0.0:
            if h == 1.0:
                return float("-inf")
            total += failures * math.log1p(-h)
    return total


def pool_oracle(rs, us):
    """Quadratic, hash-free grouping of pairs by exact equality."""
    rs = [float(r) for r in rs]
    us = [float(u) for u in us]
    knots: list[float] = []
    for r in rs:
        if not any(r == k for k in knots):
            knots.append(r)
    knots.sort()
    counts = []
    means = []
    for k in knots:
        members = [us[i] for i, r in enumerate(rs) if r == k]
        counts.append(len(members))
        means.append(sum(members) / len(members))
    return knots, counts, means


def random_series(rng: np.random.Generator, max_len: int = 8):
    """Random (values, weights) with weights in (0, 5] and values in [0, 1]."""
    n = int(rng.integers(1, max_len + 1))
    weights = 5.0 - rng.uniform(0.0, 4.95, n)
    values = rng.random(n)
    return values, weights


def random_pooled_sample(rng: np.random.Generator, max_knots: int = 12) -> PooledSample:
    """Random realizable sample: means are success counts over the weights,
    so boundary means 0 and 1 occur."""
    n = int(rng.integers(1, max_knots + 1))
    knots = np.unique(rng.random(n))
    weights = rng.integers(1, 6, knots.size)
    successes = rng.integers(0, weights + 1)
    return PooledSample(knots=knots, weights=weights, means=successes / weights)
