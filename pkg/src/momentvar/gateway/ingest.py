"""Tick CSV ingestion and resampling to a regular bar grid."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from ..errors import InvalidInputError
from ..variation import LogPriceSeries

logger = logging.getLogger(__name__)

TICK_HEADER = ("timestamp", "price")


class SchemaError(InvalidInputError):
    """CSV header or field layout does not match the expected schema."""


def parse_timestamp(text: str) -> float:
    """UTC epoch seconds from ISO-8601 text or a bare epoch number.

    Naive ISO timestamps are taken as UTC.
    """
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvalidInputError(f"unparseable timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


@dataclass
class IngestAudit:
    rows_in: int = 0
    rows_used: int = 0
    rejected: Dict[str, int] = field(default_factory=dict)
    duplicates_replaced: int = 0
    bars: int = 0
    gaps: int = 0

    @property
    def balanced(self) -> bool:
        return self.rows_in == self.rows_used + sum(self.rejected.values())

    def to_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_used": self.rows_used,
            "rejected": dict(sorted(self.rejected.items())),
            "duplicates_replaced": self.duplicates_replaced,
            "bars": self.bars,
            "gaps": self.gaps,
            "balanced": self.balanced,
        }


@dataclass(frozen=True)
class TickIngest:
    series: LogPriceSeries
    prices: np.ndarray
    audit: IngestAudit


def read_tick_rows(path: Union[str, Path]):
    """Yield raw data rows after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != TICK_HEADER:
            raise SchemaError(f"{path}: expected header 'timestamp,price', got {header!r}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield row


def load_ticks(path: Union[str, Path], bar_seconds: float = 300.0) -> TickIngest:
    """Read ticks, drop bad rows, keep the last observation in each bar.

    Rejection reasons: ``nonpositive_price``, ``unparseable``, ``out_of_order``.
    For repeated timestamps the last row wins and earlier rows count as
    ``duplicate_timestamp`` rejections. A step between bars
    that are not adjacent is recorded as a gap.
    """
    if not bar_seconds > 0:
        raise InvalidInputError("bar_seconds must be positive")
    audit = IngestAudit()
    reasons: Counter = Counter()
    latest: Dict[float, float] = {}
    last_t = -math.inf
    for row in read_tick_rows(path):
        audit.rows_in += 1
        if len(row) != 2:
            reasons["unparseable"] += 1
            continue
        try:
            t = parse_timestamp(row[0])
            p = float(row[1])
        except (InvalidInputError, ValueError):
            reasons["unparseable"] += 1
            continue
        if not math.isfinite(p) or not math.isfinite(t):
            reasons["unparseable"] += 1
            continue
        if p <= 0:
            reasons["nonpositive_price"] += 1
            continue
        if t < last_t:
            reasons["out_of_order"] += 1
            continue
        if t in latest:
            reasons["duplicate_timestamp"] += 1
            audit.duplicates_replaced += 1
        latest[t] = p
        last_t = t
    audit.rejected = dict(reasons)

    if not latest:
        raise InvalidInputError(f"{path}: no usable tick rows")
    times = np.fromiter(latest.keys(), dtype=float)
    prices = np.fromiter(latest.values(), dtype=float)

    bar = np.floor(times / bar_seconds).astype(np.int64)
    # last observation per bar: the final index of each run of equal bar ids
    ends = np.flatnonzero(np.append(np.diff(bar) != 0, True))
    bar_ids = bar[ends]
    bar_prices = prices[ends]
    # ticks superseded inside a bar were valid input, so they count as used
    audit.rows_used = len(times)
    audit.bars = len(ends)
    if len(ends) < 2:
        raise InvalidInputError(f"{path}: fewer than 2 bars after resampling")
    gaps = tuple(int(i) for i in np.flatnonzero(np.diff(bar_ids) > 1) + 1)
    audit.gaps = len(gaps)
    logger.info("ingested %s: %d rows, %d bars, %d gaps", path, audit.rows_in, audit.bars, audit.gaps)
    series = LogPriceSeries.from_prices((bar_ids + 1) * float(bar_seconds), bar_prices, gaps=gaps)
    return TickIngest(series=series, prices=bar_prices, audit=audit)


def ingest_ticks(path: Union[str, Path], bar_seconds: float = 300.0) -> LogPriceSeries:
    """Bar-resampled log-price series from a ``timestamp,price`` CSV."""
    return load_ticks(path, bar_seconds).series


def split_sessions(series: LogPriceSeries, day_seconds: float = 86_400.0) -> List[LogPriceSeries]:
    """Split a series into UTC-day sessions, each rebased to start at zero.

    Sessions with fewer than two bars are skipped.
    """
    day = np.floor((series.times - 1e-9) / day_seconds).astype(np.int64)
    out = []
    for d in np.unique(day):
        idx = np.flatnonzero(day == d)
        if len(idx) < 2:
            continue
        lp = series.logprice[idx]
        gaps = [int(g - idx[0]) for g in series.gaps if idx[0] < g <= idx[-1]]
        out.append(LogPriceSeries(series.times[idx], lp - lp[0], gaps=gaps))
    return out
