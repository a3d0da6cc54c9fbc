"""Realized quadratic, third- and fourth-moment variations of log-return paths.

For a sampled log-return path ``R_0 = 0, R_1, ..., R_N`` the estimators are

    [R]_T     ~ sum (R_i - R_{i-1})^2
    [R, R^2]_T ~ sum (R_i - R_{i-1}) (R_i^2 - R_{i-1}^2)
    [R^2]_T   ~ sum (R_i^2 - R_{i-1}^2)^2

All estimators work along the last axis, so a 2-D array of paths yields one
value per path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DegenerateSampleError, InvalidInputError

SECONDS_PER_DAY = 86_400.0
Convention = Literal["calendar365", "trading252"]


@dataclass(frozen=True)
class LogPriceSeries:
    """Timestamped log-return path, rebased so the first entry is zero.

    Attributes:
        times: strictly increasing timestamps in seconds.
        logprice: ``log S_t - log S_0`` at each timestamp.
        gaps: indices ``i`` such that the step ``i-1 -> i`` crosses a session
            gap (overnight or missing bars). Informational only.
    """

    times: np.ndarray
    logprice: np.ndarray
    gaps: tuple = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        logprice = np.asarray(self.logprice, dtype=float)
        if times.ndim != 1 or logprice.shape != times.shape:
            raise InvalidInputError("times and logprice must be 1-D and of equal length")
        if len(times) < 2:
            raise InvalidInputError("a log-price series needs at least 2 points")
        if np.any(np.diff(times) <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        if logprice[0] != 0.0:
            raise InvalidInputError("first log-price must be exactly 0")
        if not np.all(np.isfinite(logprice)):
            raise InvalidInputError("log-prices must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "logprice", logprice)
        gaps = tuple(sorted({int(g) for g in self.gaps}))
        if gaps and not (1 <= gaps[0] and gaps[-1] < len(times)):
            raise InvalidInputError("gap indices must lie in [1, len - 1]")
        object.__setattr__(self, "gaps", gaps)

    @classmethod
    def from_prices(cls, times, prices, gaps=()) -> "LogPriceSeries":
        prices = np.asarray(prices, dtype=float)
        if np.any(prices <= 0):
            raise InvalidInputError("prices must be positive")
        logp = np.log(prices)
        return cls(times=times, logprice=logp - logp[0], gaps=gaps)

    @property
    def period_days(self) -> float:
        return float(self.times[-1] - self.times[0]) / SECONDS_PER_DAY

    def __len__(self) -> int:
        return len(self.logprice)


@dataclass(frozen=True)
class VariationReport:
    qv: float
    tmv: float
    fmv: float
    period_days: float
    trading_days: Optional[float] = None
    convention: Optional[str] = None
    annualization_factor: float = 1.0

    @property
    def qv_ann(self) -> float:
        return self.qv * self.annualization_factor

    @property
    def tmv_ann(self) -> float:
        return self.tmv * self.annualization_factor

    @property
    def fmv_ann(self) -> float:
        return self.fmv * self.annualization_factor

    def to_dict(self) -> dict:
        return {
            "qv": self.qv,
            "tmv": self.tmv,
            "fmv": self.fmv,
            "period_days": self.period_days,
            "trading_days": self.trading_days,
            "convention": self.convention,
            "annualization_factor": self.annualization_factor,
            "qv_ann": self.qv_ann,
            "tmv_ann": self.tmv_ann,
            "fmv_ann": self.fmv_ann,
        }


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    sd: float
    skewness: float
    kurtosis: float
    ljung_box_stat: float
    ljung_box_lags: int
    ljung_box_pvalue: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


PathLike = Union[LogPriceSeries, Sequence[float], np.ndarray]


def _as_paths(series: PathLike) -> np.ndarray:
    if isinstance(series, LogPriceSeries):
        return series.logprice
    r = np.asarray(series, dtype=float)
    if r.ndim == 0 or r.shape[-1] < 2:
        raise InvalidInputError("need at least 2 points along the time axis")
    return r


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


# Per-step terms. ``prev`` and ``curr`` are consecutive samples of R.

def qv_terms(prev, curr):
    return (curr - prev) ** 2


def tmv_terms(prev, curr):
    return (curr - prev) * (curr * curr - prev * prev)


def fmv_terms(prev, curr):
    return (curr * curr - prev * prev) ** 2


def tmv_terms_expanded(prev, curr):
    """Same value as :func:`tmv_terms`, written as power-contract holdings."""
    dr = curr - prev
    return dr**3 + 2.0 * prev * dr**2


def fmv_terms_expanded(prev, curr):
    """Same value as :func:`fmv_terms`, written as power-contract holdings."""
    dr = curr - prev
    return dr**4 + 4.0 * prev * dr**3 + 4.0 * prev**2 * dr**2


def realized_qv(series: PathLike):
    """Sum of squared log-return increments."""
    r = _as_paths(series)
    return _scalarize(np.sum(qv_terms(r[..., :-1], r[..., 1:]), axis=-1))


def realized_tmv(series: PathLike):
    """Realized third-moment covariation ``[R, R^2]``. Sign unrestricted."""
    r = _as_paths(series)
    return _scalarize(np.sum(tmv_terms(r[..., :-1], r[..., 1:]), axis=-1))


def realized_fmv(series: PathLike):
    """Realized fourth-moment variation ``[R^2]``. Always nonnegative."""
    r = _as_paths(series)
    return _scalarize(np.sum(fmv_terms(r[..., :-1], r[..., 1:]), axis=-1))


def variation_report(
    series: LogPriceSeries,
    period_days: Optional[float] = None,
    trading_days: Optional[float] = None,
    include_gaps: bool = True,
) -> VariationReport:
    """Raw (unannualized) realized variations of one series.

    With ``include_gaps=False`` the steps listed in ``series.gaps`` (overnight
    or missing-bar boundaries) contribute nothing to the sums.
    """
    if period_days is None:
        period_days = series.period_days
    r = series.logprice
    prev, curr = r[:-1], r[1:]
    keep = np.ones(len(prev), dtype=bool)
    if not include_gaps and series.gaps:
        keep[np.asarray(series.gaps) - 1] = False
    return VariationReport(
        qv=float(np.sum(qv_terms(prev, curr)[keep])),
        tmv=float(np.sum(tmv_terms(prev, curr)[keep])),
        fmv=float(np.sum(fmv_terms(prev, curr)[keep])),
        period_days=float(period_days),
        trading_days=None if trading_days is None else float(trading_days),
    )


def annualize(report: VariationReport, convention: Convention = "calendar365") -> VariationReport:
    """Attach an annualization factor to ``report``.

    ``calendar365`` scales by ``365 / period_days``; ``trading252`` scales by
    ``252 / trading_days``. Raw fields are never modified, so annualizing an
    already annualized report just replaces the factor.
    """
    if convention == "calendar365":
        period = report.period_days
        factor_num = 365.0
    elif convention == "trading252":
        if report.trading_days is None:
            raise InvalidInputError("trading252 convention needs report.trading_days")
        period = report.trading_days
        factor_num = 252.0
    else:
        raise InvalidInputError(f"unknown annualization convention {convention!r}")
    if not period > 0:
        raise InvalidInputError("annualization period must be positive")
    return replace(report, convention=convention, annualization_factor=factor_num / period)


def autocorrelations(x, nlags: int) -> np.ndarray:
    """Sample autocorrelations at lags ``1..nlags`` (biased, mean-removed)."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    denom = np.dot(d, d)
    if denom == 0:
        raise DegenerateSampleError("zero-variance sample has no autocorrelation")
    n = len(x)
    return np.array([np.dot(d[k:], d[: n - k]) / denom for k in range(1, nlags + 1)])


def ljung_box(x, lags: int) -> float:
    """Ljung-Box portmanteau statistic ``n(n+2) sum rho_k^2 / (n-k)``."""
    n = len(x)
    rho = autocorrelations(x, lags)
    k = np.arange(1, lags + 1)
    return float(n * (n + 2) * np.sum(rho**2 / (n - k)))


def summary_stats(sample, lags: int = 18) -> SummaryStats:
    """Mean, SD (n-1), skewness, raw kurtosis and Ljung-Box Q of a sample.

    Skewness and kurtosis are standardized central moments with ``n``
    denominators; kurtosis is not excess (a normal sample gives about 3).
    """
    x = np.asarray(sample, dtype=float).ravel()
    n = len(x)
    if not 1 <= lags < n:
        raise InvalidInputError(f"need 1 <= lags < n, got lags={lags}, n={n}")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("skewness/kurtosis undefined for a constant sample")
    q = ljung_box(x, lags)
    return SummaryStats(
        n=n,
        mean=float(x.mean()),
        sd=float(np.std(x, ddof=1)),
        skewness=skewness(x),
        kurtosis=kurtosis(x),
        ljung_box_stat=q,
        ljung_box_lags=lags,
        ljung_box_pvalue=float(stats.chi2.sf(q, lags)),
    )


def skewness(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d**2)
    if m2 == 0:
        raise DegenerateSampleError("skewness undefined for a constant sample")
    return float(np.mean(d**3) / m2**1.5)


def kurtosis(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d**2)
    if m2 == 0:
        raise DegenerateSampleError("kurtosis undefined for a constant sample")
    return float(np.mean(d**4) / m2**2)
