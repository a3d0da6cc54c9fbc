"""Option CSV parsing and the liquidity/maturity/weekday filters."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import InvalidInputError
from ..options import CALL, PUT, OptionQuote, OptionSlice, repair_monotonic
from .ingest import SchemaError

OPTION_HEADER = ("quote_date", "expiry", "strike", "right", "bid", "ask", "underlying", "rate")
OPTION_HEADER_PRICE = ("quote_date", "expiry", "strike", "right", "price", "underlying", "rate")

WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
DAYS_PER_YEAR = 365.0
MIN_SLICE_STRIKES = 3


@dataclass(frozen=True)
class OptionRow:
    quote_date: date
    expiry: date
    strike: float
    right: str
    bid: float
    ask: float
    underlying: float
    rate: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def days_to_expiry(self) -> int:
        return (self.expiry - self.quote_date).days

    def valid(self) -> bool:
        return (
            self.ask >= self.bid >= 0
            and self.expiry > self.quote_date
            and self.strike > 0
            and self.underlying > 0
            and self.right in (CALL, PUT)
            and all(math.isfinite(v) for v in (self.strike, self.bid, self.ask, self.underlying, self.rate))
        )


def _parse_right(text: str) -> str:
    t = text.strip().upper()
    if t in ("C", "CALL"):
        return CALL
    if t in ("P", "PUT"):
        return PUT
    raise InvalidInputError(f"unknown option right {text!r}")


def read_option_csv(path: Union[str, Path]) -> List[OptionRow]:
    """Parse an option CSV with either bid/ask columns or a single ``price``.

    A ``price`` row is stored with ``bid = ask = price``.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        cols = tuple(h.strip().lower() for h in header) if header else None
        if cols not in (OPTION_HEADER, OPTION_HEADER_PRICE):
            raise SchemaError(
                f"{path}: expected header {','.join(OPTION_HEADER)} "
                f"(or with 'price' in place of bid,ask), got {header!r}"
            )
        has_price = cols == OPTION_HEADER_PRICE
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(cols):
                raise SchemaError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(rec)}")
            try:
                d = dict(zip(cols, (c.strip() for c in rec)))
                if has_price:
                    d["bid"] = d["ask"] = d.pop("price")
                rows.append(OptionRow(
                    quote_date=date.fromisoformat(d["quote_date"]),
                    expiry=date.fromisoformat(d["expiry"]),
                    strike=float(d["strike"]),
                    right=_parse_right(d["right"]),
                    bid=float(d["bid"]),
                    ask=float(d["ask"]),
                    underlying=float(d["underlying"]),
                    rate=float(d["rate"]),
                ))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return rows


def _parse_weekday(w) -> Optional[int]:
    if w is None:
        return None
    if isinstance(w, int):
        if not 0 <= w <= 6:
            raise InvalidInputError("weekday index must be in 0..6 (Monday = 0)")
        return w
    t = str(w).strip().lower()
    if t in ("", "none", "any"):
        return None
    if t in WEEKDAYS:
        return WEEKDAYS.index(t)
    raise InvalidInputError(f"unknown weekday {w!r}")


@dataclass(frozen=True)
class FilterPolicy:
    """Row filters. ``weekday`` uses Monday = 0; ``None`` keeps every day."""

    min_days_to_maturity: int = 10
    weekday: Optional[int] = 2
    otm_only: bool = True
    moneyness_buckets: Tuple[float, ...] = (0.85, 1.00, 1.15)

    def __post_init__(self):
        object.__setattr__(self, "weekday", _parse_weekday(self.weekday))
        b = tuple(float(x) for x in self.moneyness_buckets)
        if len(b) == 0 or any(y <= x for x, y in zip(b, b[1:])):
            raise InvalidInputError("moneyness bucket boundaries must be strictly increasing")
        object.__setattr__(self, "moneyness_buckets", b)
        if self.min_days_to_maturity < 0:
            raise InvalidInputError("min_days_to_maturity must be nonnegative")

    def bucket_labels(self) -> List[str]:
        b = self.moneyness_buckets
        labels = [f"<{b[0]:.2f}"]
        labels += [f"{lo:.2f}-{hi:.2f}" for lo, hi in zip(b, b[1:])]
        labels.append(f">={b[-1]:.2f}")
        return labels

    def bucket(self, moneyness: float) -> str:
        i = int(np.searchsorted(self.moneyness_buckets, moneyness, side="right"))
        return self.bucket_labels()[i]


@dataclass
class FilterAudit:
    rows_in: int = 0
    rows_used: int = 0
    rejected: Dict[str, int] = field(default_factory=dict)
    buckets: Dict[str, int] = field(default_factory=dict)
    slices_kept: int = 0
    slices_dropped: List[dict] = field(default_factory=list)

    @property
    def balanced(self) -> bool:
        return self.rows_in == self.rows_used + sum(self.rejected.values())

    def to_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_used": self.rows_used,
            "rejected": dict(sorted(self.rejected.items())),
            "buckets": dict(self.buckets),
            "slices_kept": self.slices_kept,
            "slices_dropped": list(self.slices_dropped),
            "balanced": self.balanced,
        }


@dataclass(frozen=True)
class FilterResult:
    slices: List[OptionSlice]
    rows: List[OptionRow]
    audit: FilterAudit


def _otm_quote(row: OptionRow, spot: float, rate: float, T: float, fwd: float, otm_only: bool):
    """Return ``(OptionQuote, reason)``; the quote is ``None`` when rejected.

    With ``otm_only`` off an in-the-money quote is mapped to the OTM right of
    the same strike through put-call parity.
    """
    otm_right = PUT if row.strike <= fwd else CALL
    price = row.mid
    if row.right != otm_right:
        if otm_only:
            return None, "itm"
        parity = spot - row.strike * math.exp(-rate * T)  # C - P
        price = price - parity if row.right == CALL else price + parity
        if price < 0:
            return None, "negative_parity_price"
    return OptionQuote(row.strike, price, otm_right, T, spot, rate), None


def filter_options(rows: Sequence[OptionRow], policy: FilterPolicy = FilterPolicy()) -> FilterResult:
    """Apply the row filters and group the survivors into per-expiry slices.

    Rows are grouped by ``(quote_date, expiry)``; each group uses its median
    underlying and rate. The returned ``rows`` are the original rows that made
    it into a slice, so filtering them again reproduces the same result.
    """
    audit = FilterAudit(rows_in=len(rows))
    reasons: Counter = Counter()
    groups: Dict[tuple, List[OptionRow]] = defaultdict(list)
    for row in rows:
        if not row.valid():
            reasons["bad_quote"] += 1
        elif row.days_to_expiry < policy.min_days_to_maturity:
            reasons["short_maturity"] += 1
        elif policy.weekday is not None and row.quote_date.weekday() != policy.weekday:
            reasons["weekday"] += 1
        else:
            groups[(row.quote_date, row.expiry)].append(row)

    slices, kept_rows = [], []
    buckets = Counter()
    for key in sorted(groups):
        grp = groups[key]
        spot = float(np.median([r.underlying for r in grp]))
        rate = float(np.median([r.rate for r in grp]))
        T = grp[0].days_to_expiry / DAYS_PER_YEAR
        fwd = spot * math.exp(rate * T)

        # genuine OTM quotes take precedence over parity-converted ones
        order = sorted(grp, key=lambda r: (r.strike, r.right != (PUT if r.strike <= fwd else CALL)))
        by_strike: Dict[float, Tuple[OptionQuote, OptionRow]] = {}
        for row in order:
            q, why = _otm_quote(row, spot, rate, T, fwd, policy.otm_only)
            if q is None:
                reasons[why] += 1
            elif row.strike in by_strike:
                reasons["duplicate_strike"] += 1
            else:
                by_strike[row.strike] = (q, row)

        quote_rows = {id(q): r for q, r in by_strike.values()}
        label = {"quote_date": key[0].isoformat(), "expiry": key[1].isoformat()}
        quotes = [q for q, _ in by_strike.values()]
        kept_q, dropped_q = repair_monotonic(sorted(quotes, key=lambda q: q.strike))
        reasons["non_monotonic"] += len(dropped_q)
        if len(kept_q) < MIN_SLICE_STRIKES:
            reasons["slice_too_small"] += len(kept_q)
            audit.slices_dropped.append({**label, "quotes": len(kept_q), "reason": "slice_too_small"})
            continue
        sl = OptionSlice.from_quotes(kept_q, repair=False, **label)
        slices.append(sl)
        for q in sorted(kept_q, key=lambda q: q.strike):
            r = quote_rows[id(q)]
            kept_rows.append(r)
            buckets[policy.bucket(r.strike / spot)] += 1

    audit.rejected = {k: v for k, v in reasons.items() if v}
    audit.rows_used = len(kept_rows)
    audit.slices_kept = len(slices)
    audit.buckets = {lab: buckets.get(lab, 0) for lab in policy.bucket_labels()}
    return FilterResult(slices=slices, rows=kept_rows, audit=audit)
