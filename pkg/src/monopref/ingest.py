"""Pairwise-choice extraction from raw rating logs.

Items carry tag sets; a group spec names two disjoint tag groups. Each rated
item classifies as option one, option zero, both, or neither; dual-group and
unmatched items are excluded, repeat ratings keep only the earliest row, and
users must retain a minimum number of choices to enter the output. Events
are ordered per user by (timestamp, item_id) - the tie-break on item id is
what makes the output a deterministic function of the input files.

Processing order per user: rows with non-positive ratings are rejected first
(rating-based intensity only), then classification drops, then
deduplication, then the minimum-choices filter. The threshold therefore
counts distinct usable items.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ChoiceTrajectory

__all__ = [
    "RatingEvent",
    "GroupSpec",
    "IngestRules",
    "Membership",
    "EventColumns",
    "CategoryColumns",
    "RowError",
    "LoadResult",
    "CategoriesResult",
    "IngestSummary",
    "classify_item",
    "load_events",
    "load_categories",
    "extract_pairwise",
]


@dataclass(frozen=True, slots=True)
class RatingEvent:
    """One parsed log row."""

    user_id: str
    item_id: str
    timestamp: int
    rating: float


class Membership(enum.Enum):
    GROUP1 = "group1"
    GROUP0 = "group0"
    BOTH = "both"
    NEITHER = "neither"


@dataclass(frozen=True)
class GroupSpec:
    """Two disjoint tag groups plus the item -> tags catalogue."""

    group1: frozenset[str]
    group0: frozenset[str]
    categories: dict[str, frozenset[str]]

    def __post_init__(self) -> None:
        g1 = frozenset(self.group1)
        g0 = frozenset(self.group0)
        if not g1 or not g0:
            raise ValueError("both tag groups must be non-empty")
        if g1 & g0:
            raise ValueError(f"tag groups overlap: {sorted(g1 & g0)}")
        object.__setattr__(self, "group1", g1)
        object.__setattr__(self, "group0", g0)


@dataclass(frozen=True)
class IngestRules:
    """Extraction policy: user threshold and intensity mode."""

    min_choices: int = 20
    intensity: str = "constant"  # "constant" | "rating"

    def __post_init__(self) -> None:
        if self.min_choices < 2:
            raise ValueError("min_choices must be at least 2")
        if self.intensity not in ("constant", "rating"):
            raise ValueError("intensity must be 'constant' or 'rating'")


def classify_item(item_id: str, groups: GroupSpec) -> Membership:
    """Membership of one item; unknown items classify as NEITHER."""
    tags = groups.categories.get(item_id)
    if not tags:
        return Membership.NEITHER
    in1 = bool(tags & groups.group1)
    in0 = bool(tags & groups.group0)
    if in1 and in0:
        return Membership.BOTH
    if in1:
        return Membership.GROUP1
    if in0:
        return Membership.GROUP0
    return Membership.NEITHER


@dataclass(frozen=True)
class EventColumns:
    """Column names and delimiter of a rating-log file."""

    user: str = "user_id"
    item: str = "item_id"
    rating: str = "rating"
    timestamp: str = "timestamp"
    delimiter: str = ","


@dataclass(frozen=True)
class CategoryColumns:
    """Column names and delimiter of an item-categories file; the tags
    column holds pipe-separated tags."""

    item: str = "item_id"
    tags: str = "tags"
    delimiter: str = ","


@dataclass(frozen=True)
class RowError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class LoadResult:
    events: list[RatingEvent] = field(default_factory=list)
    errors: list[RowError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class CategoriesResult:
    categories: dict[str, frozenset[str]] = field(default_factory=dict)
    errors: list[RowError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def load_events(path, columns: EventColumns = EventColumns()) -> LoadResult:
    """Parse a rating log in file order.

    Malformed rows become RowError entries (1-based line numbers) and the
    parse continues; a missing header column aborts with ValueError.
    """
    path = Path(path)
    result = LoadResult()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=columns.delimiter)
        if reader.fieldnames is None:
            result.warnings.append(f"{path}: file is empty")
            return result
        needed = (columns.user, columns.item, columns.rating, columns.timestamp)
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            user = row.get(columns.user)
            item = row.get(columns.item)
            rating_s = row.get(columns.rating)
            ts_s = row.get(columns.timestamp)
            if not user or not item or rating_s is None or ts_s is None:
                result.errors.append(RowError(line, "missing field"))
                continue
            try:
                rating = float(rating_s)
            except ValueError:
                result.errors.append(RowError(line, f"bad rating {rating_s!r}"))
                continue
            if not np.isfinite(rating):
                result.errors.append(RowError(line, f"bad rating {rating_s!r}"))
                continue
            try:
                timestamp = int(ts_s)
            except ValueError:
                result.errors.append(RowError(line, f"bad timestamp {ts_s!r}"))
                continue
            result.events.append(RatingEvent(user, item, timestamp, rating))
    if not result.events and not result.errors:
        result.warnings.append(f"{path}: no event rows")
    return result


def load_categories(path, columns: CategoryColumns = CategoryColumns()) -> CategoriesResult:
    """Parse the item-categories file: one row per item, tags separated by
    '|'. Repeated items keep the first row and report the rest as errors."""
    path = Path(path)
    result = CategoriesResult()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=columns.delimiter)
        if reader.fieldnames is None:
            result.warnings.append(f"{path}: file is empty")
            return result
        missing = [c for c in (columns.item, columns.tags) if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            item = row.get(columns.item)
            tags_s = row.get(columns.tags)
            if not item or tags_s is None:
                result.errors.append(RowError(line, "missing field"))
                continue
            if item in result.categories:
                result.errors.append(RowError(line, f"duplicate item {item!r}"))
                continue
            tags = frozenset(t.strip() for t in tags_s.split("|") if t.strip())
            result.categories[item] = tags
    if not result.categories and not result.errors:
        result.warnings.append(f"{path}: no category rows")
    return result


@dataclass
class IngestSummary:
    """Drop accounting for one extraction run."""

    rows_considered: int = 0
    dropped_nonpositive_rating: int = 0
    dropped_neither: int = 0
    dropped_both: int = 0
    dropped_duplicate: int = 0
    users_seen: int = 0
    users_below_min: int = 0
    users_valid: int = 0
    events_written: int = 0

    def lines(self) -> list[str]:
        return [
            f"rows_considered={self.rows_considered}",
            f"dropped_nonpositive_rating={self.dropped_nonpositive_rating}",
            f"dropped_neither={self.dropped_neither}",
            f"dropped_both={self.dropped_both}",
            f"dropped_duplicate={self.dropped_duplicate}",
            f"users_seen={self.users_seen}",
            f"users_below_min={self.users_below_min}",
            f"users_valid={self.users_valid}",
            f"events_written={self.events_written}",
        ]


def extract_pairwise(
    events, groups: GroupSpec, rules: IngestRules
) -> tuple[list[ChoiceTrajectory], IngestSummary]:
    """Turn parsed events into per-user binary choice trajectories.

    Output trajectories are sorted by user id; within a user, events are
    sorted by (timestamp, item_id). Raises ValueError when no user survives
    the filters.
    """
    summary = IngestSummary()
    by_user: dict[str, dict[str, tuple[int, float, Membership]]] = {}
    for ev in events:
        summary.rows_considered += 1
        kept = by_user.setdefault(ev.user_id, {})
        if rules.intensity == "rating" and not ev.rating > 0.0:
            summary.dropped_nonpositive_rating += 1
            continue
        side = classify_item(ev.item_id, groups)
        if side is Membership.NEITHER:
            summary.dropped_neither += 1
            continue
        if side is Membership.BOTH:
            summary.dropped_both += 1
            continue
        prior = kept.get(ev.item_id)
        if prior is not None:
            # keep the earliest rating; ties keep the first row in the file
            if ev.timestamp < prior[0]:
                kept[ev.item_id] = (ev.timestamp, ev.rating, side)
            summary.dropped_duplicate += 1
        else:
            kept[ev.item_id] = (ev.timestamp, ev.rating, side)

    trajectories: list[ChoiceTrajectory] = []
    summary.users_seen = len(by_user)
    for user_id in sorted(by_user):
        kept = by_user[user_id]
        if len(kept) < rules.min_choices:
            summary.users_below_min += 1
            continue
        rows = sorted(
            ((ts, item, rating, side) for item, (ts, rating, side) in kept.items()),
            key=lambda r: (r[0], r[1]),
        )
        choices = np.array(
            [1 if side is Membership.GROUP1 else 0 for _, _, _, side in rows],
            dtype=np.int8,
        )
        if rules.intensity == "rating":
            intensities = np.array([rating for _, _, rating, _ in rows])
        else:
            intensities = np.ones(len(rows))
        trajectories.append(
            ChoiceTrajectory(user_id=user_id, choices=choices, intensities=intensities)
        )
        summary.users_valid += 1
        summary.events_written += len(rows)
    if not trajectories:
        raise ValueError(
            "no valid users after filtering "
            f"({summary.users_seen} seen, {summary.users_below_min} below the "
            f"{rules.min_choices}-choice minimum)"
        )
    return trajectories, summary
