"""Event catalogs: loading, validation, and time partitioning.

Times are days relative to the start of the observation window. Catalog
files are comma separated ``x,y,t[,magnitude]`` rows with an optional header
and ``#`` comment lines.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import CatalogError

logger = logging.getLogger(__name__)

__all__ = [
    "Event",
    "SpatialWindow",
    "TimePartition",
    "Catalog",
    "load_catalog",
    "write_catalog",
    "regular_partition",
    "assign_periods",
    "partition_events",
]


class Event(NamedTuple):
    x: float
    y: float
    t: float
    magnitude: Optional[float] = None


@dataclass(frozen=True)
class SpatialWindow:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate spatial window {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x, y):
        """Vectorised closed-rectangle membership test."""
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d) -> "SpatialWindow":
        if isinstance(d, (list, tuple)):
            return cls(*map(float, d))
        return cls(float(d["x_min"]), float(d["x_max"]), float(d["y_min"]), float(d["y_max"]))


@dataclass(frozen=True)
class TimePartition:
    """Breakpoints ``0 = S_1 < S_2 < ... < S_{P+1} = T``."""

    breakpoints: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        object.__setattr__(self, "breakpoints", b)
        if len(b) < 2:
            raise ValueError("a partition needs at least two breakpoints")
        if b[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(not (hi > lo) for lo, hi in zip(b[:-1], b[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def P(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.breakpoints))


def regular_partition(horizon: float, P: int) -> TimePartition:
    """Split ``(0, horizon)`` into ``P`` intervals of equal length."""
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    b = np.linspace(0.0, float(horizon), P + 1)
    b[-1] = float(horizon)
    return TimePartition(tuple(b.tolist()))


@dataclass(frozen=True, eq=False)
class Catalog:
    """Time-sorted planar events observed in ``window`` over ``(0, horizon)``.

    Coordinates are held columnar (``xy`` is ``(N, 2)``, ``t`` is ``(N,)``)
    because every consumer works on arrays.
    """

    xy: np.ndarray
    t: np.ndarray
    window: SpatialWindow
    horizon: float
    magnitude: Optional[np.ndarray] = None

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if xy.shape[0] != t.shape[0]:
            raise CatalogError("coordinate and time arrays differ in length")
        if not (np.all(np.isfinite(xy)) and np.all(np.isfinite(t))):
            raise CatalogError("non-finite event coordinate")
        if np.any((t < 0) | (t > self.horizon)):
            raise CatalogError("time out of range")
        order = np.argsort(t, kind="stable")
        object.__setattr__(self, "xy", xy[order])
        object.__setattr__(self, "t", t[order])
        if self.magnitude is not None:
            mag = np.asarray(self.magnitude, dtype=float).reshape(-1)
            if mag.shape != t.shape:
                raise CatalogError("magnitude column length mismatch")
            object.__setattr__(self, "magnitude", mag[order])
        object.__setattr__(self, "horizon", float(self.horizon))

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def events(self) -> list:
        return list(self.iter_events())

    def iter_events(self) -> Iterator[Event]:
        mags = self.magnitude if self.magnitude is not None else [None] * len(self)
        for (x, y), t, m in zip(self.xy.tolist(), self.t.tolist(), mags):
            yield Event(x, y, t, None if m is None else float(m))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        same_mag = (self.magnitude is None and other.magnitude is None) or (
            self.magnitude is not None
            and other.magnitude is not None
            and np.array_equal(self.magnitude, other.magnitude)
        )
        return (
            self.window == other.window
            and self.horizon == other.horizon
            and np.array_equal(self.xy, other.xy)
            and np.array_equal(self.t, other.t)
            and same_mag
        )


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_catalog(
    path,
    window: SpatialWindow,
    horizon: float,
    on_outside: str = "error",
) -> Catalog:
    """Read a catalog file and validate it against ``window`` and ``horizon``.

    ``on_outside`` controls events whose epicentre falls outside the window:
    ``"error"`` raises, ``"drop"`` discards them with a warning.
    """
    if on_outside not in ("error", "drop"):
        raise ValueError(f"unknown out-of-window policy {on_outside!r}")
    text = Path(path).read_text(encoding="utf-8")
    rows = []
    mags = []
    have_mag = None
    header_seen = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        if row[0].lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in row]
        if not header_seen and not rows and not all(_is_number(f) for f in fields):
            header_seen = True
            names = [f.lower() for f in fields]
            if names[:3] != ["x", "y", "t"] or len(names) > 4 or names[3:] not in ([], ["magnitude"]):
                raise CatalogError(f"line {lineno}: unexpected header {fields}")
            have_mag = len(names) == 4
            continue
        if len(fields) not in (3, 4):
            raise CatalogError(f"line {lineno}: expected 3 or 4 columns, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise CatalogError(f"line {lineno}: non-numeric field in {fields}") from None
        if not all(math.isfinite(v) for v in vals):
            raise CatalogError(f"line {lineno}: non-finite value")
        x, y, t = vals[:3]
        if t < 0 or t > horizon:
            raise CatalogError(f"line {lineno}: time out of range ({t} not in [0, {horizon}])")
        row_has_mag = len(vals) == 4
        if have_mag is None:
            have_mag = row_has_mag
        elif have_mag != row_has_mag:
            raise CatalogError(f"line {lineno}: inconsistent magnitude column")
        if not window.contains(x, y):
            if on_outside == "error":
                raise CatalogError(f"line {lineno}: event ({x}, {y}) outside spatial window")
            logger.warning("line %d: dropping event (%g, %g) outside window", lineno, x, y)
            continue
        rows.append((x, y, t))
        if row_has_mag:
            mags.append(vals[3])

    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    return Catalog(
        xy=arr[:, :2],
        t=arr[:, 2],
        window=window,
        horizon=horizon,
        magnitude=np.asarray(mags, dtype=float) if have_mag else None,
    )


def write_catalog(catalog: Catalog, path, comments: Sequence[str] = ()) -> None:
    """Write ``catalog`` so that :func:`load_catalog` reproduces it exactly."""
    lines = [f"# {c}" for c in comments]
    has_mag = catalog.magnitude is not None
    lines.append("x,y,t,magnitude" if has_mag else "x,y,t")
    for ev in catalog.iter_events():
        cols = [repr(ev.x), repr(ev.y), repr(ev.t)]
        if has_mag:
            cols.append(repr(ev.magnitude))
        lines.append(",".join(cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def assign_periods(t, partition: TimePartition) -> np.ndarray:
    """Zero-based period index per time; intervals are ``[S_p, S_{p+1})``, last closed."""
    t = np.asarray(t, dtype=float)
    inner = np.asarray(partition.breakpoints[1:-1])
    return np.searchsorted(inner, t, side="right").astype(np.int64)


def partition_events(catalog: Catalog, partition: TimePartition) -> list:
    """Split a catalog into per-period ``(n_p, 3)`` arrays of ``x, y, t``."""
    if not math.isclose(partition.horizon, catalog.horizon, rel_tol=1e-12, abs_tol=0.0):
        raise CatalogError(
            f"partition horizon {partition.horizon} != catalog horizon {catalog.horizon}"
        )
    period = assign_periods(catalog.t, partition)
    table = np.column_stack([catalog.xy, catalog.t])
    return [table[period == p] for p in range(partition.P)]
