"""Synthetic choice-log generation for the experiment sweeps.

A configuration couples a preference function with a distribution for the
number of prediction steps T and an intensity regime. Both length variants
have bounded support, which keeps every generated horizon within the range
the estimation theory assumes. Per-user RNG streams are derived from
(config.seed, user_index), so changing the user count never perturbs earlier
users' draws and generation order is free to vary across workers.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .model import ChoicePairs, ChoiceTrajectory, MonotoneStepFn

__all__ = [
    "PreferenceSpec",
    "ConstantLength",
    "TruncatedPoissonLength",
    "LengthSpec",
    "DegenerateIntensity",
    "UniformIntensity",
    "PersistentIntensity",
    "IntensitySpec",
    "SimConfig",
    "gerw_preference",
    "draw_length",
    "draw_intensities",
    "gen_trajectory",
    "generate_dataset",
    "split_train_test",
    "preference_from_dict",
    "length_from_dict",
    "intensity_from_dict",
]


class PreferenceSpec:
    """A non-decreasing map from [0, 1] into [0, 1], validated on a
    1000-point grid at construction. Calls accept scalars or arrays."""

    __slots__ = ("kind", "_fn")

    def __init__(self, kind: str, fn: Callable[[float], float]):
        grid = np.linspace(0.0, 1.0, 1000)
        vals = np.array([float(fn(float(x))) for x in grid])
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("preference function must map [0, 1] into [0, 1]")
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError("preference function must be non-decreasing")
        self.kind = kind
        self._fn = fn

    def __call__(self, r):
        if np.isscalar(r):
            return float(self._fn(float(r)))
        arr = np.asarray(r, dtype=float)
        return np.array([float(self._fn(float(x))) for x in arr])

    @property
    def scalar(self) -> Callable[[float], float]:
        """The underlying scalar map, for tight generation loops."""
        return self._fn

    @classmethod
    def quadratic(cls) -> "PreferenceSpec":
        """h(r) = 0.4 r^2 + 0.3, the sweep's data-generating preference."""
        return cls("quadratic", lambda r: 0.4 * r * r + 0.3)

    @classmethod
    def from_table(cls, knots, values) -> "PreferenceSpec":
        """Right-continuous non-decreasing step function with constant
        extension beyond the knot range."""
        step = MonotoneStepFn(knots=np.asarray(knots, float), values=np.asarray(values, float))
        ks = step.knots.tolist()
        vs = step.values.tolist()

        def fn(r: float) -> float:
            return vs[max(bisect.bisect_right(ks, r) - 1, 0)]

        return cls("table", fn)


def gerw_preference(p: float, f: Callable[[float], float]) -> PreferenceSpec:
    """Preference of a generalized reinforced walk: h(x) = p f(x) + (1-p)(1-f(x))
    for a memory map f; increasing in x whenever f is, since p > 1/2."""
    if not 0.5 < p < 1.0:
        raise ValueError("p must lie strictly inside (1/2, 1)")

    def fn(x: float) -> float:
        fx = f(x)
        return p * fx + (1.0 - p) * (1.0 - fx)

    return PreferenceSpec("gerw", fn)


@dataclass(frozen=True)
class ConstantLength:
    """T fixed at t0."""

    t0: int

    def __post_init__(self) -> None:
        if not self.t0 >= 1:
            raise ValueError("t0 must be at least 1")


@dataclass(frozen=True)
class TruncatedPoissonLength:
    """T = Poisson(mean) clamped to [floor, ceiling]: draws at or below the
    floor map to the floor, draws at or above the ceiling to the ceiling."""

    mean: float = 20.0
    floor: int = 4
    ceiling: int = 20

    def __post_init__(self) -> None:
        if not self.mean > 0.0:
            raise ValueError("mean must be positive")
        if self.floor < 1 or self.floor > self.ceiling:
            raise ValueError("need 1 <= floor <= ceiling")


LengthSpec = Union[ConstantLength, TruncatedPoissonLength]


@dataclass(frozen=True)
class DegenerateIntensity:
    """Every intensity equals `value`."""

    value: float = 1.0

    def __post_init__(self) -> None:
        if not self.value > 0.0:
            raise ValueError("value must be positive")


@dataclass(frozen=True)
class UniformIntensity:
    """Intensities i.i.d. uniform on (0, 1]."""


@dataclass(frozen=True)
class PersistentIntensity:
    """First intensity uniform; each later one repeats its predecessor with
    probability keep_prob, otherwise takes a fresh uniform."""

    keep_prob: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.keep_prob < 1.0:
            raise ValueError("keep_prob must lie in [0, 1)")


IntensitySpec = Union[DegenerateIntensity, UniformIntensity, PersistentIntensity]


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to generate one dataset deterministically."""

    users: int
    preference: PreferenceSpec
    length: LengthSpec
    intensity: IntensitySpec
    q: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.users < 1:
            raise ValueError("users must be at least 1")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def draw_length(spec: LengthSpec, rng: np.random.Generator) -> int:
    if isinstance(spec, ConstantLength):
        return spec.t0
    if isinstance(spec, TruncatedPoissonLength):
        x = int(rng.poisson(spec.mean))
        if x <= spec.floor:
            return spec.floor
        if x >= spec.ceiling:
            return spec.ceiling
        return x
    raise TypeError(f"unknown length spec {spec!r}")


def draw_intensities(spec: IntensitySpec, length: int, rng: np.random.Generator) -> np.ndarray:
    """Positive intensities of the given length. Uniform draws use
    1 - random() to land in the half-open (0, 1]: intensities must be
    strictly positive, and the distribution is unchanged."""
    if length < 1:
        raise ValueError("length must be at least 1")
    if isinstance(spec, DegenerateIntensity):
        return np.full(length, spec.value)
    if isinstance(spec, UniformIntensity):
        return 1.0 - rng.random(length)
    if isinstance(spec, PersistentIntensity):
        fresh = 1.0 - rng.random(length)
        if length > 1:
            keep = rng.random(length - 1) < spec.keep_prob
            w = fresh.copy()
            for t in range(1, length):
                if keep[t - 1]:
                    w[t] = w[t - 1]
            return w
        return fresh
    raise TypeError(f"unknown intensity spec {spec!r}")


def gen_trajectory(
    config: SimConfig, user_index: int, rng: np.random.Generator | None = None
) -> ChoiceTrajectory:
    """Generate one user's trajectory.

    Draw order: T, then the T+1 intensities, then the first choice
    (Bernoulli(q)), then one uniform per step (drawn as one block, consumed
    in step order) deciding U_{t+1} ~ Bernoulli(h(R_t)). The running
    accumulation of R matches `relative_intensities` bit for bit.
    """
    if rng is None:
        rng = np.random.default_rng([config.seed, user_index])
    length = draw_length(config.length, rng)
    w = draw_intensities(config.intensity, length + 1, rng)
    u = np.empty(length + 1, dtype=np.int8)
    u[0] = 1 if rng.random() < config.q else 0
    steps = rng.random(length).tolist()
    h = config.preference.scalar
    wl = w.tolist()
    num = 0.0
    den = 0.0
    prev = int(u[0])
    for t in range(1, length + 1):
        x = wl[t - 1]
        if prev:
            num += x
        else:
            num += 0.0
        den += x
        prev = 1 if steps[t - 1] < h(num / den) else 0
        u[t] = prev
    return ChoiceTrajectory(user_id=f"u{user_index + 1}", choices=u, intensities=w)


def generate_dataset(config: SimConfig) -> list[ChoiceTrajectory]:
    """All users of one dataset, in user-index order."""
    return [gen_trajectory(config, i) for i in range(config.users)]


def split_train_test(
    trajectories,
    train_window: tuple[int, int] | None = None,
    test_window: tuple[int, int] | None = None,
) -> tuple[ChoicePairs, ChoicePairs]:
    """Split the prediction pairs (R_t, U_{t+1}) of every trajectory.

    With both windows None the per-user default is train t = 1..floor(T/2)
    and test t = floor(T/2)+1..T. Explicit windows are inclusive 1-based
    ranges over t, clipped per-user to t <= T, and must be disjoint.
    """
    if (train_window is None) != (test_window is None):
        raise ValueError("give both windows or neither")
    rs_train: list[np.ndarray] = []
    us_train: list[np.ndarray] = []
    rs_test: list[np.ndarray] = []
    us_test: list[np.ndarray] = []
    if train_window is None:
        for traj in trajectories:
            half = traj.n_steps // 2
            r = traj.relative
            u_next = traj.choices[1:]
            rs_train.append(r[:half])
            us_train.append(u_next[:half])
            rs_test.append(r[half:])
            us_test.append(u_next[half:])
    else:
        t_lo, t_hi = (int(x) for x in train_window)
        s_lo, s_hi = (int(x) for x in test_window)
        if t_lo < 1 or t_hi < t_lo or s_lo < 1 or s_hi < s_lo:
            raise ValueError("windows must be increasing 1-based ranges")
        if t_lo <= s_hi and s_lo <= t_hi:
            raise ValueError("train and test windows must be disjoint")
        for traj in trajectories:
            steps = traj.n_steps
            r = traj.relative
            u_next = traj.choices[1:]
            hi = min(t_hi, steps)
            if t_lo <= hi:
                rs_train.append(r[t_lo - 1 : hi])
                us_train.append(u_next[t_lo - 1 : hi])
            hi = min(s_hi, steps)
            if s_lo <= hi:
                rs_test.append(r[s_lo - 1 : hi])
                us_test.append(u_next[s_lo - 1 : hi])
    if not rs_train or sum(a.size for a in rs_train) == 0:
        raise ValueError("no pairs fall inside the train window")
    train = ChoicePairs(
        r=np.concatenate(rs_train), u=np.concatenate(us_train).astype(float)
    )
    empty = np.empty(0)
    test = ChoicePairs(
        r=np.concatenate(rs_test) if rs_test else empty,
        u=np.concatenate(us_test).astype(float) if us_test else empty,
    )
    return train, test


def preference_from_dict(d: dict) -> PreferenceSpec:
    """Preference spec from config-file data. Kinds: quadratic, table.
    (Reinforced-walk preferences take a Python callable; build them with
    `gerw_preference` in code.)"""
    kind = d.get("kind")
    if kind == "quadratic":
        return PreferenceSpec.quadratic()
    if kind == "table":
        try:
            return PreferenceSpec.from_table(d["knots"], d["values"])
        except KeyError as missing:
            raise ValueError(f"table preference needs {missing.args[0]!r}") from None
    raise ValueError(f"unknown preference kind {kind!r} (use quadratic or table)")


def length_from_dict(d: dict) -> LengthSpec:
    """Length spec from config-file data. Kinds: constant, truncated_poisson."""
    kind = d.get("kind")
    if kind == "constant":
        if "t" not in d:
            raise ValueError("constant length needs 't'")
        return ConstantLength(t0=int(d["t"]))
    if kind == "truncated_poisson":
        return TruncatedPoissonLength(
            mean=float(d.get("mean", 20.0)),
            floor=int(d.get("floor", 4)),
            ceiling=int(d.get("ceiling", 20)),
        )
    raise ValueError(
        f"unknown length kind {kind!r} (use constant or truncated_poisson)"
    )


def intensity_from_dict(d: dict) -> IntensitySpec:
    """Intensity spec from config-file data. Kinds: degenerate, uniform,
    persistent."""
    kind = d.get("kind")
    if kind == "degenerate":
        return DegenerateIntensity(value=float(d.get("value", 1.0)))
    if kind == "uniform":
        return UniformIntensity()
    if kind == "persistent":
        return PersistentIntensity(keep_prob=float(d.get("keep_prob", 0.2)))
    raise ValueError(
        f"unknown intensity kind {kind!r} (use degenerate, uniform or persistent)"
    )
