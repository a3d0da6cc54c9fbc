"""Simple-regression fits shared by the moment-vs-variation study and hedging."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError, SingularDesignError


@dataclass(frozen=True)
class HedgeFit:
    """OLS fit ``y = beta0 + beta1 * x``.

    ``rmse`` is the residual standard error ``sqrt(SSR / (n - 2))``.
    ``weight`` is the hedge ratio the fit implies, i.e. ``beta1``.
    """

    beta0: float
    beta1: float
    se0: float
    se1: float
    r2: float
    adj_r2: float
    rmse: float
    n: int
    variation_kind: Optional[str] = None
    response_kind: Optional[str] = None

    @property
    def weight(self) -> float:
        return self.beta1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weight"] = self.weight
        return d


def ols(x, y, variation_kind=None, response_kind=None) -> HedgeFit:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = len(x)
    if len(y) != n:
        raise InvalidInputError(f"x and y lengths differ ({n} vs {len(y)})")
    if n < 3:
        raise InvalidInputError("need at least 3 observations for a fit with standard errors")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("regression inputs must be finite")

    xbar = x.mean()
    sxx = np.sum((x - xbar) ** 2)
    # relative threshold: a regressor constant up to rounding is singular too
    if sxx <= (np.finfo(float).eps * max(1.0, np.abs(x).max())) ** 2 * n:
        raise SingularDesignError("regressor has zero variance")
    ybar = y.mean()
    beta1 = np.sum((x - xbar) * (y - ybar)) / sxx
    beta0 = ybar - beta1 * xbar

    resid = y - beta0 - beta1 * x
    ssr = float(np.sum(resid**2))
    sst = float(np.sum((y - ybar) ** 2))
    s2 = ssr / (n - 2)
    se1 = np.sqrt(s2 / sxx)
    se0 = np.sqrt(s2 * (1.0 / n + xbar**2 / sxx))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)
    return HedgeFit(
        beta0=float(beta0),
        beta1=float(beta1),
        se0=float(se0),
        se1=float(se1),
        r2=float(r2),
        adj_r2=float(adj_r2),
        rmse=float(np.sqrt(s2)),
        n=n,
        variation_kind=variation_kind,
        response_kind=response_kind,
    )
