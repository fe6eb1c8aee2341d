"""Two-sided daily battle time series: container, CSV I/O, slicing, and the
embedded Kursk tank/artillery record.

Side ``"X"`` is the Soviet (Red) side and ``"Y"`` the German (Blue) side.
Every array is indexed ``[day, category]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

SIDES = ("X", "Y")
CSV_FIELDS = ("day", "side", "category", "on_hand", "losses")


class DataError(ValueError):
    """Invalid battle data. ``row`` is the 1-based CSV line, when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class DayWindow:
    """Inclusive range of day indices."""

    first: int
    last: int

    def __post_init__(self):
        if int(self.first) != self.first or int(self.last) != self.last:
            raise DataError(f"day window bounds must be integers, got {self.first}:{self.last}")
        if self.first > self.last:
            raise DataError(f"day window {self.first}:{self.last} has first > last")
        if self.first < 1:
            raise DataError(f"day window {self.first}:{self.last}: days are 1-based")

    @classmethod
    def parse(cls, text: str) -> DayWindow:
        """Parse ``"first:last"``."""
        try:
            first, last = text.split(":")
            return cls(int(first), int(last))
        except ValueError as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed day window {text!r}, expected first:last") from None

    def __contains__(self, day: int) -> bool:
        return self.first <= day <= self.last

    def __str__(self) -> str:
        return f"{self.first}:{self.last}"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BattleSeries:
    """Per-day weapon strengths and losses for both sides.

    ``x_on_hand``, ``x_losses``, ``y_on_hand`` and ``y_losses`` all have
    shape ``(len(days), len(categories))``.
    """

    days: tuple[int, ...]
    categories: tuple[str, ...]
    x_on_hand: np.ndarray
    x_losses: np.ndarray
    y_on_hand: np.ndarray
    y_losses: np.ndarray

    def __post_init__(self):
        days = tuple(int(d) for d in self.days)
        cats = tuple(str(c) for c in self.categories)
        object.__setattr__(self, "days", days)
        object.__setattr__(self, "categories", cats)
        if not days:
            raise DataError("series must contain at least one day")
        if any(b <= a for a, b in zip(days, days[1:])):
            raise DataError("days must be strictly increasing")
        if days[0] < 1:
            raise DataError("day indices are 1-based")
        if not cats or len(set(cats)) != len(cats):
            raise DataError(f"category labels must be non-empty and unique, got {cats}")
        shape = (len(days), len(cats))
        for name in ("x_on_hand", "x_losses", "y_on_hand", "y_losses"):
            arr = _frozen(getattr(self, name))
            if arr.shape != shape:
                raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
            if np.any(arr < 0):
                raise DataError(f"{name} contains negative values")
            object.__setattr__(self, name, arr)

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def window(self) -> DayWindow:
        return DayWindow(self.days[0], self.days[-1])

    def category_index(self, category: str) -> int:
        try:
            return self.categories.index(category)
        except ValueError:
            raise DataError(
                f"unknown category {category!r}; series has {list(self.categories)}"
            ) from None

    def on_hand(self, side: str, category: str) -> np.ndarray:
        arr = self.x_on_hand if _side(side) == "X" else self.y_on_hand
        return arr[:, self.category_index(category)]

    def losses(self, side: str, category: str) -> np.ndarray:
        arr = self.x_losses if _side(side) == "X" else self.y_losses
        return arr[:, self.category_index(category)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BattleSeries):
            return NotImplemented
        return (
            self.days == other.days
            and self.categories == other.categories
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("x_on_hand", "x_losses", "y_on_hand", "y_losses")
            )
        )

    __hash__ = None

    def slice(self, window: DayWindow) -> BattleSeries:
        return slice_series(self, window)


def _side(side: str) -> str:
    if side not in SIDES:
        raise DataError(f"side must be one of {SIDES}, got {side!r}")
    return side


def slice_series(series: BattleSeries, window: DayWindow) -> BattleSeries:
    """Return the days of ``series`` that fall inside ``window``."""
    lo, hi = series.days[0], series.days[-1]
    if window.first < lo or window.last > hi:
        raise DataError(f"window {window} outside series day range {lo}:{hi}")
    keep = [i for i, d in enumerate(series.days) if d in window]
    if not keep:
        raise DataError(f"window {window} contains no observed days")
    return BattleSeries(
        days=tuple(series.days[i] for i in keep),
        categories=series.categories,
        x_on_hand=series.x_on_hand[keep],
        x_losses=series.x_losses[keep],
        y_on_hand=series.y_on_hand[keep],
        y_losses=series.y_losses[keep],
    )


# ---------------------------------------------------------------------------
# CSV I/O (long format: one row per day, side, category)
# ---------------------------------------------------------------------------

def _parse_value(text: str, field: str, row: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{field} is not numeric: {text!r}", row) from None
    if not math.isfinite(value):
        raise DataError(f"{field} is not finite: {text!r}", row)
    if value < 0:
        raise DataError(f"{field} is negative: {text!r}", row)
    return value


def _parse_day(text: str, row: int) -> int:
    try:
        day = int(text)
    except (TypeError, ValueError):
        raise DataError(f"day is not an integer: {text!r}", row) from None
    if day < 1:
        raise DataError(f"day must be a positive integer, got {day}", row)
    return day


def _read_rows(lines: Iterable[str], errors: list[DataError] | None):
    """Parse CSV rows into cells. With ``errors`` given, problems are
    appended there instead of raised."""

    def fail(exc: DataError):
        if errors is None:
            raise exc
        errors.append(exc)

    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or all(not h.strip() for h in header):
        fail(DataError("no data rows"))
        return {}, []
    header = [h.strip() for h in header]
    missing = [f for f in CSV_FIELDS if f not in header]
    if missing:
        fail(DataError(f"header is missing columns {missing}", 1))
        return {}, []
    col = {f: header.index(f) for f in CSV_FIELDS}

    cells: dict[tuple[int, str, str], tuple[float, float]] = {}
    categories: list[str] = []
    for lineno, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        try:
            if len(raw) < len(header):
                raise DataError(f"expected {len(header)} fields, got {len(raw)}", lineno)
            rec = {f: raw[i].strip() for f, i in col.items()}
            day = _parse_day(rec["day"], lineno)
            side = rec["side"]
            if side not in SIDES:
                raise DataError(f"side must be X or Y, got {side!r}", lineno)
            category = rec["category"]
            if not category:
                raise DataError("empty category", lineno)
            key = (day, side, category)
            if key in cells:
                raise DataError(
                    f"duplicate row for day {day}, side {side}, category {category}", lineno)
            value = (_parse_value(rec["on_hand"], "on_hand", lineno),
                     _parse_value(rec["losses"], "losses", lineno))
        except DataError as exc:
            fail(exc)
            continue
        cells[key] = value
        if category not in categories:
            categories.append(category)

    if not cells and (errors is None or not errors):
        fail(DataError("no data rows"))
        return {}, []

    days = sorted({k[0] for k in cells})
    for day in days:
        for side in SIDES:
            for cat in categories:
                if (day, side, cat) not in cells:
                    fail(DataError(f"missing cell for day {day}, side {side}, category {cat}"))
    return cells, categories


def read_csv_text(lines: Iterable[str]) -> BattleSeries:
    cells, categories = _read_rows(lines, None)
    days = sorted({k[0] for k in cells})
    arrays = {name: np.zeros((len(days), len(categories))) for name in
              ("x_on_hand", "x_losses", "y_on_hand", "y_losses")}
    for i, day in enumerate(days):
        for side in SIDES:
            prefix = side.lower()
            for j, cat in enumerate(categories):
                on_hand, losses = cells[(day, side, cat)]
                arrays[f"{prefix}_on_hand"][i, j] = on_hand
                arrays[f"{prefix}_losses"][i, j] = losses
    return BattleSeries(days=tuple(days), categories=tuple(categories), **arrays)


def validate_csv(path: str | Path) -> list[DataError]:
    """All schema violations in a CSV file; empty when the file is clean."""
    errors: list[DataError] = []
    with open(path, newline="", encoding="utf-8") as fh:
        _read_rows(fh, errors)
    return errors


def load_csv(path: str | Path) -> BattleSeries:
    """Load a long-format CSV (``day,side,category,on_hand,losses``)."""
    with open(path, newline="", encoding="utf-8") as fh:
        return read_csv_text(fh)


def _fmt(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_csv(series: BattleSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for i, day in enumerate(series.days):
            for side in SIDES:
                on_hand = series.x_on_hand if side == "X" else series.y_on_hand
                losses = series.x_losses if side == "X" else series.y_losses
                for j, cat in enumerate(series.categories):
                    writer.writerow([day, side, cat, _fmt(on_hand[i, j]), _fmt(losses[i, j])])


# ---------------------------------------------------------------------------
# Embedded Kursk record, 14 days of tanks and artillery
# ---------------------------------------------------------------------------

# day, Soviet tank, Soviet tank losses, German tank, German tank losses,
# Soviet arty, Soviet arty losses, German arty, German arty losses
_KURSK_ROWS = (
    (1, 2396, 105, 986, 198, 705, 13, 1166, 24),
    (2, 2367, 117, 749, 248, 676, 30, 1161, 5),
    (3, 2064, 259, 673, 121, 661, 15, 1154, 7),
    (4, 1754, 315, 596, 108, 648, 14, 1213, 13),
    (5, 1495, 289, 490, 139, 640, 9, 1210, 6),
    (6, 1406, 157, 548, 36, 629, 13, 1199, 12),
    (7, 1351, 135, 563, 63, 628, 7, 1206, 15),
    (8, 977, 414, 500, 98, 613, 16, 1194, 12),
    (9, 978, 117, 495, 57, 606, 10, 1187, 7),
    (10, 907, 118, 480, 46, 603, 5, 1184, 5),
    (11, 883, 96, 426, 79, 601, 5, 1183, 3),
    (12, 985, 27, 495, 23, 600, 3, 1179, 4),
    (13, 978, 42, 557, 7, 602, 0, 1182, 2),
    (14, 948, 85, 588, 6, 591, 4, 1182, 11),
)


def kursk_dataset() -> BattleSeries:
    """Daily tank and artillery strengths/losses at Kursk; X = Soviet, Y = German."""
    t = np.array(_KURSK_ROWS, dtype=float)
    return BattleSeries(
        days=tuple(int(d) for d in t[:, 0]),
        categories=("tank", "artillery"),
        x_on_hand=t[:, [1, 5]],
        x_losses=t[:, [2, 6]],
        y_on_hand=t[:, [3, 7]],
        y_losses=t[:, [4, 8]],
    )


def resolve_data(spec: str) -> BattleSeries:
    """``"embedded:kursk"`` or a CSV path."""
    if spec == "embedded:kursk":
        return kursk_dataset()
    if spec.startswith("embedded:"):
        raise DataError(f"unknown embedded dataset {spec!r}")
    return load_csv(spec)
