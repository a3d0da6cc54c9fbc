"""Moment-variation swap hedges and QQ-based Gaussianity scoring.

A holder of the underlying buys ``w`` units of the floating leg of a
variation swap. With a zero fixed leg the hedged log-return is approximately

    tmv swap:  R_T - w [R, R^2]_T
    fmv swap:  R_T - w sign(R_T) [R^2]_T

(the fourth-moment leg is received when the return is negative and paid when
it is positive). ``w`` comes either from a regression of ``R_T`` (or ``|R_T|``)
on the realized variation, or from minimizing the QQ RMSE of the hedged
returns against a mean/variance-matched normal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateSampleError, InvalidInputError
from .regression import HedgeFit, ols
from .variation import kurtosis, skewness

logger = logging.getLogger(__name__)

Kind = Literal["tmv", "fmv"]


def _check_kind(kind: str) -> str:
    if kind not in ("tmv", "fmv"):
        raise InvalidInputError(f"kind must be 'tmv' or 'fmv', got {kind!r}")
    return kind


def _pair(base, variation):
    base = np.asarray(base, dtype=float).ravel()
    variation = np.asarray(variation, dtype=float).ravel()
    if base.shape != variation.shape:
        raise InvalidInputError("base and variation must have equal length")
    return base, variation


def fit_hedge(base, variation, kind: Kind) -> HedgeFit:
    """Regression hedge ratio.

    ``tmv`` regresses ``R_T`` on ``[R,R^2]_T``; ``fmv`` regresses ``|R_T|`` on
    ``[R^2]_T``. The hedge weight is the fitted slope.
    """
    base, variation = _pair(base, variation)
    if _check_kind(kind) == "tmv":
        return ols(variation, base, variation_kind="tmv", response_kind="raw_return")
    return ols(variation, np.abs(base), variation_kind="fmv", response_kind="abs_return")


@dataclass(frozen=True)
class HedgedSeries:
    base_returns: np.ndarray
    variation_values: np.ndarray
    weight: float
    kind: str
    fixed_leg: float
    hedged_returns: np.ndarray


def build_hedged(base, variation, weight: float, kind: Kind, fixed_leg: float = 0.0) -> HedgedSeries:
    """Hedged log-returns for a long underlying plus ``weight`` swap units."""
    base, variation = _pair(base, variation)
    if not np.isfinite(weight):
        raise InvalidInputError("weight must be finite")
    leg = variation - fixed_leg
    if _check_kind(kind) == "tmv":
        hedged = base - weight * leg
    else:
        hedged = base - weight * np.sign(base) * leg
    return HedgedSeries(base, variation, float(weight), kind, float(fixed_leg), hedged)


def normal_plotting_quantiles(n: int) -> np.ndarray:
    return stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)


def qq_pairs(sample):
    """``(theoretical, empirical)`` quantile pairs against the matched normal."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    sd = x.std(ddof=1)
    theo = x.mean() + sd * normal_plotting_quantiles(len(x))
    return theo, x


def qq_rmse(sample) -> float:
    """RMS gap between order statistics and matched-normal quantiles.

    The reference normal has the sample's mean and variance; quantiles sit at
    plotting positions ``(i - 0.5) / n``. The score is in the sample's units,
    so ``qq_rmse(a x + b) == |a| qq_rmse(x)``.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if len(x) < 10:
        raise InvalidInputError("qq_rmse needs at least 10 observations")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("sample must be finite")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("constant sample")
    theo, emp = qq_pairs(x)
    return float(np.sqrt(np.mean((emp - theo) ** 2)))


@dataclass(frozen=True)
class WeightSearch:
    weight: float
    rmse: float
    regression_weight: float
    regression_rmse: float
    bracketed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def optimize_weight(base, variation, kind: Kind, fixed_leg: float = 0.0,
                    fit: Optional[HedgeFit] = None) -> WeightSearch:
    """Hedge weight minimizing :func:`qq_rmse` of the hedged returns.

    A bracket is grown from the regression weight and searched by golden
    section. If no bracket is found the regression weight is returned with
    ``bracketed = False``. The result never scores worse than the regression
    weight.
    """
    base, variation = _pair(base, variation)
    if fit is None:
        fit = fit_hedge(base, variation, kind)
    w0 = fit.weight

    def f(w):
        return qq_rmse(build_hedged(base, variation, w, kind, fixed_leg).hedged_returns)

    rmse0 = f(w0)
    step = 0.25 * abs(w0) if w0 != 0 else 1.0 / max(np.std(variation), 1e-300) * np.std(base) * 0.1
    try:
        xa, xb, xc, *_ = optimize.bracket(f, xa=w0, xb=w0 + step, maxiter=200)
        res = optimize.minimize_scalar(f, bracket=(xa, xb, xc), method="golden",
                                       options={"xtol": 1e-8})
    except (RuntimeError, optimize.BracketError) as exc:  # no bracket: keep regression weight
        logger.warning("weight search failed to bracket a minimum: %s", exc)
        return WeightSearch(float(w0), float(rmse0), float(w0), float(rmse0), False)
    w, val = float(res.x), float(res.fun)
    if val > rmse0:
        w, val = float(w0), float(rmse0)
    return WeightSearch(w, val, float(w0), float(rmse0), True)


@dataclass(frozen=True)
class HedgeReport:
    """Distribution diagnostics of base and hedged returns for one swap kind."""

    kind: str
    fit: HedgeFit
    search: WeightSearch
    base_skewness: float
    base_kurtosis: float
    base_qq_rmse: float
    hedged_skewness: float
    hedged_kurtosis: float
    hedged_qq_rmse: float
    optimal_skewness: float
    optimal_kurtosis: float

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("fit", "search")}
        d["fit"] = self.fit.to_dict()
        d["search"] = self.search.to_dict()
        return d


def hedge_report(base, variation, kind: Kind, fixed_leg: float = 0.0) -> HedgeReport:
    """Regression hedge and RMSE-optimal hedge with before/after statistics."""
    base, variation = _pair(base, variation)
    fit = fit_hedge(base, variation, kind)
    search = optimize_weight(base, variation, kind, fixed_leg, fit=fit)
    hedged = build_hedged(base, variation, fit.weight, kind, fixed_leg).hedged_returns
    best = build_hedged(base, variation, search.weight, kind, fixed_leg).hedged_returns
    return HedgeReport(
        kind=kind,
        fit=fit,
        search=search,
        base_skewness=skewness(base),
        base_kurtosis=kurtosis(base),
        base_qq_rmse=qq_rmse(base),
        hedged_skewness=skewness(hedged),
        hedged_kurtosis=kurtosis(hedged),
        hedged_qq_rmse=qq_rmse(hedged),
        optimal_skewness=skewness(best),
        optimal_kurtosis=kurtosis(best),
    )
