"""Choice trajectories, relative intensities, pooling, and the likelihood.

A user makes T+1 binary choices with positive intensities. The relative
intensity after t events is R_t = (sum_{i<=t} U_i W_i) / (sum_{i<=t} W_i),
and the model says the next choice U_{t+1} is Bernoulli(h(R_t)) for a
non-decreasing preference function h. Estimation only ever sees the pairs
(R_t, U_{t+1}); pooling groups them by exact R value into sufficient
statistics (knots, counts, local means) on which the binomial log-likelihood
is a sum of per-knot terms.

Tie detection during pooling uses exact floating-point equality. R values are
always produced by the single canonical accumulation in
`relative_intensities`, so identical histories yield identical doubles, and
with unit intensities equal count ratios k/t round identically under
correctly-rounded division. With continuous intensities ties have probability
zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "ChoiceEvent",
    "ChoiceTrajectory",
    "ChoicePairs",
    "PooledSample",
    "MonotoneStepFn",
    "relative_intensities",
    "pool",
    "pool_pairs",
    "loglik",
    "eval_step",
    "read_trajectories",
    "write_trajectories",
    "TRAJECTORY_HEADER",
]

TRAJECTORY_HEADER = ("user_id", "event_index", "choice", "intensity")


@dataclass(frozen=True)
class ChoiceEvent:
    """One choice: indicator (1 = option one) and a positive intensity."""

    choice: int
    intensity: float

    def __post_init__(self) -> None:
        if self.choice not in (0, 1):
            raise ValueError("choice must be 0 or 1")
        if not self.intensity > 0.0:
            raise ValueError("intensity must be positive")


def relative_intensities(choices, intensities) -> np.ndarray:
    """Running ratio R_t = (sum_{i<=t} U_i W_i) / (sum_{i<=t} W_i), one value
    per event prefix.

    Single left-to-right accumulation of the two running sums followed by one
    division per step: bit-for-bit deterministic for identical inputs.
    """
    u = np.asarray(choices, dtype=float)
    w = np.asarray(intensities, dtype=float)
    if u.ndim != 1 or u.shape != w.shape:
        raise ValueError("choices and intensities must be 1-d and equally long")
    if u.size < 2:
        raise ValueError("need at least two events")
    if not np.all(w > 0.0):
        raise ValueError("intensities must be strictly positive")
    if not np.all((u == 0.0) | (u == 1.0)):
        raise ValueError("choices must be 0 or 1")
    num = np.cumsum(u * w)
    den = np.cumsum(w)
    return num / den


@dataclass
class ChoiceTrajectory:
    """One user's ordered choice events, held as parallel arrays."""

    user_id: str
    choices: np.ndarray
    intensities: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.choices, dtype=np.int8)
        w = np.asarray(self.intensities, dtype=float)
        if u.ndim != 1 or u.shape != w.shape:
            raise ValueError("choices and intensities must be 1-d and equally long")
        if u.size < 2:
            raise ValueError("a trajectory needs at least two events")
        if not np.all((u == 0) | (u == 1)):
            raise ValueError("choices must be 0 or 1")
        if not np.all(w > 0.0):
            raise ValueError("intensities must be strictly positive")
        self.choices = u
        self.intensities = w

    @classmethod
    def from_events(cls, user_id: str, events) -> "ChoiceTrajectory":
        events = list(events)
        return cls(
            user_id=user_id,
            choices=np.array([e.choice for e in events], dtype=np.int8),
            intensities=np.array([e.intensity for e in events], dtype=float),
        )

    @property
    def events(self) -> tuple[ChoiceEvent, ...]:
        return tuple(
            ChoiceEvent(int(u), float(w))
            for u, w in zip(self.choices, self.intensities)
        )

    @property
    def n_steps(self) -> int:
        """T: the number of (R_t, U_{t+1}) prediction steps."""
        return int(self.choices.size - 1)

    @cached_property
    def relative(self) -> np.ndarray:
        """R_1..R_T, cached after first computation. The final ratio is
        dropped: the last event is only ever a prediction target."""
        return relative_intensities(self.choices, self.intensities)[:-1]


@dataclass(frozen=True)
class ChoicePairs:
    """Prediction instances: covariates r (relative intensities) and the
    successor choices u."""

    r: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if r.ndim != 1 or r.shape != u.shape:
            raise ValueError("r and u must be 1-d and equally long")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u", u)

    def __len__(self) -> int:
        return int(self.r.size)


@dataclass(frozen=True)
class PooledSample:
    """Sufficient statistics: strictly increasing knots, pair counts per
    knot, and the mean successor choice per knot."""

    knots: np.ndarray
    weights: np.ndarray
    means: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.knots, dtype=float)
        f = np.asarray(self.weights, dtype=np.int64)
        m = np.asarray(self.means, dtype=float)
        if k.ndim != 1 or k.shape != f.shape or k.shape != m.shape or k.size == 0:
            raise ValueError("knots, weights, means must be non-empty, 1-d, equal length")
        if np.any(np.diff(k) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        if np.any(f < 1):
            raise ValueError("weights must be positive counts")
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ValueError("means must lie in [0, 1]")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "weights", f)
        object.__setattr__(self, "means", m)

    @property
    def n_pairs(self) -> int:
        return int(self.weights.sum())

    def __len__(self) -> int:
        return int(self.knots.size)


def pool_pairs(pairs: ChoicePairs) -> PooledSample:
    """Group pairs by exact equality of r; knots ascending."""
    if len(pairs) == 0:
        raise ValueError("cannot pool an empty pair set")
    knots, inverse = np.unique(pairs.r, return_inverse=True)
    weights = np.bincount(inverse, minlength=knots.size)
    sums = np.bincount(inverse, weights=pairs.u, minlength=knots.size)
    return PooledSample(knots=knots, weights=weights, means=sums / weights)


def _window_pairs(trajectories, window) -> ChoicePairs:
    rs = []
    us = []
    for traj in trajectories:
        r = traj.relative
        u_next = traj.choices[1:]
        if window is None:
            rs.append(r)
            us.append(u_next)
        else:
            lo, hi = window
            hi = min(int(hi), traj.n_steps)
            if lo <= hi:
                rs.append(r[lo - 1 : hi])
                us.append(u_next[lo - 1 : hi])
    if not rs:
        return ChoicePairs(r=np.empty(0), u=np.empty(0))
    return ChoicePairs(
        r=np.concatenate(rs), u=np.concatenate(us).astype(float)
    )


def pool(trajectories, window=None) -> PooledSample:
    """Pool the pairs (R_t, U_{t+1}) of many trajectories into a sample.

    `window` restricts t to an inclusive 1-based range (lo, hi), clipped
    per-user to t <= T_j; None takes every step.
    """
    if window is not None:
        lo, hi = int(window[0]), int(window[1])
        if lo < 1 or hi < lo:
            raise ValueError("window must be an increasing 1-based range")
    pairs = _window_pairs(trajectories, window)
    if len(pairs) == 0:
        raise ValueError("no pairs fall inside the window")
    return pool_pairs(pairs)


def loglik(sample: PooledSample, values) -> float:
    """Binomial log-likelihood sum_s F_s [Ubar_s log h_s + (1-Ubar_s) log(1-h_s)]
    with the convention 0*log 0 = 0.

    Returns -inf (the sentinel, not an exception) when some h_s = 0 has
    Ubar_s > 0 or some h_s = 1 has Ubar_s < 1.
    """
    h = np.asarray(values, dtype=float)
    if h.shape != sample.knots.shape:
        raise ValueError("values must align with the sample knots")
    if np.any(h < 0.0) or np.any(h > 1.0):
        raise ValueError("values must lie in [0, 1]")
    m = sample.means
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(m > 0.0, m * np.log(h), 0.0)
        down = np.where(m < 1.0, (1.0 - m) * np.log1p(-h), 0.0)
    return float(sample.weights.astype(float) @ (up + down))


@dataclass(frozen=True)
class MonotoneStepFn:
    """Right-continuous non-decreasing step function on [0, 1]."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size == 0:
            raise ValueError("knots and values must be non-empty, 1-d, equal length")
        if np.any(np.diff(k) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        if np.any(k < 0.0) or np.any(k > 1.0):
            raise ValueError("knots must lie in [0, 1]")
        if np.any(np.diff(v) < 0.0):
            raise ValueError("values must be non-decreasing")
        # allow sub-ulp overshoot from running-mean arithmetic, then clip exactly
        if np.any(v < -1e-9) or np.any(v > 1.0 + 1e-9):
            raise ValueError("values must lie in [0, 1]")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", np.clip(v, 0.0, 1.0))

    def __len__(self) -> int:
        return int(self.knots.size)


def eval_step(fn: MonotoneStepFn, r):
    """Evaluate the step function at r (scalar or array) in [0, 1].

    Value at r is the value at the largest knot <= r; left of the first knot
    the first value extends constantly, right of the last knot the last one.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("r must lie in [0, 1]")
    idx = np.searchsorted(fn.knots, arr, side="right") - 1
    out = fn.values[np.maximum(idx, 0)]
    if np.isscalar(r) or arr.ndim == 0:
        return float(out)
    return out


def _fmt(x: float) -> str:
    """Shortest round-trip decimal for a float; deterministic."""
    return repr(float(x))


def write_trajectories(trajectories, path) -> None:
    """Write the delimited trajectory format: one row per event,
    columns user_id, event_index (1-based), choice, intensity."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_HEADER) + "\n")
        for traj in trajectories:
            uid = str(traj.user_id)
            if not uid or any(c in uid for c in ",\r\n"):
                raise ValueError(f"user_id {uid!r} not representable in the format")
            for i in range(traj.choices.size):
                fh.write(
                    f"{uid},{i + 1},{int(traj.choices[i])},{_fmt(traj.intensities[i])}\n"
                )


def read_trajectories(path) -> list[ChoiceTrajectory]:
    """Parse the trajectory format; rows for a user must be contiguous and
    ordered by event_index starting at 1. Malformed content raises
    ValueError naming the offending 1-based line."""
    path = Path(path)
    out: list[ChoiceTrajectory] = []
    seen: set[str] = set()

    current: str | None = None
    choices: list[int] = []
    intensities: list[float] = []

    def flush(line_no: int) -> None:
        if current is None:
            return
        if len(choices) < 2:
            raise ValueError(
                f"line {line_no}: user {current!r} has fewer than two events"
            )
        out.append(
            ChoiceTrajectory(
                user_id=current,
                choices=np.array(choices, dtype=np.int8),
                intensities=np.array(intensities, dtype=float),
            )
        )

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJECTORY_HEADER:
            raise ValueError(
                f"line 1: expected header {','.join(TRAJECTORY_HEADER)!r}"
            )
        line_no = 1
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"line {line_no}: expected 4 fields, got {len(row)}")
            uid, idx_s, choice_s, intensity_s = row
            if uid != current:
                flush(line_no)
                if uid in seen:
                    raise ValueError(
                        f"line {line_no}: rows for user {uid!r} are not contiguous"
                    )
                seen.add(uid)
                current = uid
                choices = []
                intensities = []
            try:
                idx = int(idx_s)
            except ValueError:
                raise ValueError(f"line {line_no}: bad event_index {idx_s!r}") from None
            if idx != len(choices) + 1:
                raise ValueError(
                    f"line {line_no}: event_index {idx} out of order (expected {len(choices) + 1})"
                )
            if choice_s not in ("0", "1"):
                raise ValueError(f"line {line_no}: bad choice {choice_s!r}")
            try:
                intensity = float(intensity_s)
            except ValueError:
                raise ValueError(
                    f"line {line_no}: bad intensity {intensity_s!r}"
                ) from None
            if not intensity > 0.0:
                raise ValueError(f"line {line_no}: intensity must be positive")
            choices.append(int(choice_s))
            intensities.append(intensity)
        flush(line_no + 1)
    if not out:
        raise ValueError("trajectory file contains no events")
    return out
