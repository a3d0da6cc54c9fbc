"""Option-implied expectations of realized variations and BKM moments.

Every quantity here is a weighted strike integral of out-of-the-money option
prices ``phi(K)`` (puts at or below the forward ``S0 exp(rT)``, calls above)::

    E[[R]]      = 2 e^{rT}  int phi(K) / K^2 dK
    E[[R,R^2]]  = 4 e^{rT}  int log(K/S0) phi(K) / K^2 dK
    E[[R^2]]    = 8 e^{rT}  int log(K/S0)^2 phi(K) / K^2 dK
    E[R^3]      =   e^{rT}  int (6 l - 3 l^2) phi(K) / K^2 dK,   l = log(K/S0)
    E[R^4]      =   e^{rT}  int (12 l^2 - 4 l^3) phi(K) / K^2 dK

The variation integrals omit jump corrections; see :mod:`momentvar.jumps`.
Integrals use the trapezoidal rule on the quoted strikes. Optionally the grid
is extended into the wings at the end-strike implied volatilities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .errors import (
    DegenerateSampleError,
    InvalidInputError,
    OutOfRangeError,
    TruncationWarning,
)
from .regression import HedgeFit, ols

CALL, PUT = "C", "P"


def _norm_right(right: str) -> str:
    r = str(right).strip().upper()
    if r in ("C", "CALL"):
        return CALL
    if r in ("P", "PUT"):
        return PUT
    raise InvalidInputError(f"option right must be call or put, got {right!r}")


# --------------------------------------------------------------------------
# Black-Scholes helpers

def bs_price(spot, strike, maturity_T, rate, vol, right):
    """European Black-Scholes price, vectorized over strike/vol."""
    strike = np.asarray(strike, dtype=float)
    vol = np.asarray(vol, dtype=float)
    fwd = spot * math.exp(rate * maturity_T)
    disc = math.exp(-rate * maturity_T)
    sd = vol * math.sqrt(maturity_T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(fwd / strike) + 0.5 * sd**2) / sd
    d2 = d1 - sd
    call = disc * (fwd * ndtr(d1) - strike * ndtr(d2))
    intrinsic_c = disc * np.maximum(fwd - strike, 0.0)
    call = np.where(sd > 0, call, intrinsic_c)
    if _norm_right(right) == CALL:
        return call
    return call - disc * (fwd - strike)


def implied_vol(price, spot, strike, maturity_T, rate, right) -> float:
    """Black-Scholes implied volatility; ``nan`` when no volatility fits."""
    right = _norm_right(right)
    fwd = spot * math.exp(rate * maturity_T)
    disc = math.exp(-rate * maturity_T)
    lower = disc * max(fwd - strike, 0.0) if right == CALL else disc * max(strike - fwd, 0.0)
    upper = disc * fwd if right == CALL else disc * strike
    if not lower < price < upper:
        return float("nan")

    def f(s):
        return float(bs_price(spot, strike, maturity_T, rate, s, right)) - price

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            return float("nan")
    return optimize.brentq(f, 1e-12, hi, xtol=1e-14, rtol=1e-12, maxiter=200)


# --------------------------------------------------------------------------
# Quotes and slices

@dataclass(frozen=True)
class OptionQuote:
    strike: float
    price: float
    right: str
    maturity_T: float
    spot: float
    rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "right", _norm_right(self.right))
        if not (self.strike > 0 and self.spot > 0 and self.maturity_T > 0):
            raise InvalidInputError("strike, spot and maturity_T must be positive")
        if not self.price >= 0:
            raise InvalidInputError("price must be nonnegative")


@dataclass(frozen=True)
class OptionSlice:
    """OTM quotes of one maturity, sorted by strike.

    Attributes:
        strikes, prices: 1-D arrays, strikes strictly increasing.
        rights: ``"P"`` for strikes at or below the forward, ``"C"`` above.
        spot, rate, maturity_T: shared market data (rate continuous per year).
    """

    strikes: np.ndarray
    prices: np.ndarray
    rights: Tuple[str, ...]
    spot: float
    rate: float
    maturity_T: float
    quote_date: Optional[str] = None
    expiry: Optional[str] = None
    discarded: Tuple = field(default=(), compare=False)

    def __post_init__(self):
        k = np.asarray(self.strikes, dtype=float)
        p = np.asarray(self.prices, dtype=float)
        rights = tuple(_norm_right(r) for r in self.rights)
        if k.ndim != 1 or p.shape != k.shape or len(rights) != len(k):
            raise InvalidInputError("strikes, prices and rights must be 1-D of equal length")
        if len(k) == 0:
            raise InvalidInputError("empty slice")
        if not (self.spot > 0 and self.maturity_T > 0):
            raise InvalidInputError("spot and maturity_T must be positive")
        if np.any(k <= 0) or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidInputError("strikes must be positive and prices finite and nonnegative")
        if np.any(np.diff(k) <= 0):
            raise InvalidInputError("strikes must be strictly increasing (no duplicates)")
        fwd = self.spot * math.exp(self.rate * self.maturity_T)
        for kk, rr in zip(k, rights):
            if (rr == PUT) != (kk <= fwd):
                raise InvalidInputError(
                    f"quote at K={kk} is not OTM: puts must sit at or below the forward {fwd:.6g}, calls above"
                )
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "rights", rights)

    @property
    def forward(self) -> float:
        return self.spot * math.exp(self.rate * self.maturity_T)

    @property
    def growth(self) -> float:
        return math.exp(self.rate * self.maturity_T)

    @property
    def spans_forward(self) -> bool:
        return bool(self.strikes[0] <= self.forward <= self.strikes[-1])

    @property
    def quotes(self) -> List[OptionQuote]:
        return [
            OptionQuote(k, p, r, self.maturity_T, self.spot, self.rate)
            for k, p, r in zip(self.strikes, self.prices, self.rights)
        ]

    def __len__(self) -> int:
        return len(self.strikes)

    @classmethod
    def from_quotes(cls, quotes: Iterable[OptionQuote], repair: bool = True, **meta) -> "OptionSlice":
        """Build a slice, discarding quotes that break strike monotonicity.

        OTM puts must not decrease in strike and OTM calls must not increase.
        Walking outward from the forward, a quote priced above its inner
        neighbour is discarded and listed in ``slice.discarded``.
        """
        quotes = sorted(quotes, key=lambda q: q.strike)
        if not quotes:
            raise InvalidInputError("no quotes")
        q0 = quotes[0]
        for q in quotes:
            if (q.spot, q.rate, q.maturity_T) != (q0.spot, q0.rate, q0.maturity_T):
                raise InvalidInputError("quotes in a slice must share spot, rate and maturity")
        kept, discarded = quotes, []
        if repair:
            kept, discarded = repair_monotonic(quotes)
        return cls(
            strikes=[q.strike for q in kept],
            prices=[q.price for q in kept],
            rights=[q.right for q in kept],
            spot=q0.spot,
            rate=q0.rate,
            maturity_T=q0.maturity_T,
            discarded=tuple(discarded),
            **meta,
        )


def repair_monotonic(quotes: Sequence[OptionQuote]):
    """Split strike-sorted OTM quotes into (kept, discarded) by monotonicity."""
    puts = [q for q in quotes if q.right == PUT]
    calls = [q for q in quotes if q.right == CALL]
    kept, discarded = [], []
    last = math.inf
    for q in reversed(puts):
        if q.price <= last:
            kept.append(q)
            last = q.price
        else:
            discarded.append(q)
    kept.reverse()
    last = math.inf
    for q in calls:
        if q.price <= last:
            kept.append(q)
            last = q.price
        else:
            discarded.append(q)
    return kept, discarded


def bs_slice(spot: float, rate: float, maturity_T: float, vol, strikes) -> OptionSlice:
    """OTM Black-Scholes slice. ``vol`` may be a scalar or a callable of strike."""
    strikes = np.asarray(strikes, dtype=float)
    fwd = spot * math.exp(rate * maturity_T)
    vols = vol(strikes) if callable(vol) else np.full_like(strikes, float(vol))
    rights = np.where(strikes <= fwd, PUT, CALL)
    prices = np.where(
        rights == PUT,
        bs_price(spot, strikes, maturity_T, rate, vols, PUT),
        bs_price(spot, strikes, maturity_T, rate, vols, CALL),
    )
    return OptionSlice(strikes, np.maximum(prices, 0.0), tuple(rights), spot, rate, maturity_T)


def slice_from_terminal_samples(terminal_prices, spot: float, rate: float, maturity_T: float,
                                strikes, martingale_correct: bool = True) -> OptionSlice:
    """Monte Carlo OTM prices from simulated risk-neutral terminal prices.

    With ``martingale_correct`` the sample is rescaled so its mean equals the
    forward, which makes the put and call prices parity-consistent.
    """
    s = np.sort(np.asarray(terminal_prices, dtype=float))
    fwd = spot * math.exp(rate * maturity_T)
    if martingale_correct:
        s = s * (fwd / s.mean())
    strikes = np.asarray(strikes, dtype=float)
    n = len(s)
    csum = np.concatenate([[0.0], np.cumsum(s)])
    idx = np.searchsorted(s, strikes, side="right")  # samples <= K
    below_sum = csum[idx]
    above_sum = csum[-1] - below_sum
    disc = math.exp(-rate * maturity_T)
    put = disc * (strikes * idx - below_sum) / n
    call = disc * (above_sum - strikes * (n - idx)) / n
    rights = np.where(strikes <= fwd, PUT, CALL)
    prices = np.maximum(np.where(rights == PUT, put, call), 0.0)
    return OptionSlice(strikes, prices, tuple(rights), spot, rate, maturity_T)


# --------------------------------------------------------------------------
# phi and quadrature

def _quote_total_variance(sl: OptionSlice) -> np.ndarray:
    return np.array([
        implied_vol(p, sl.spot, k, sl.maturity_T, sl.rate, r) ** 2 * sl.maturity_T
        for k, p, r in zip(sl.strikes, sl.prices, sl.rights)
    ])


def phi(sl: OptionSlice, K, extrapolate: bool = False):
    """OTM option price at strike ``K``.

    On-grid strikes return the quote. Between strikes, total implied variance
    is interpolated linearly in strike and converted back to a put (``K`` at or
    below the forward) or call price. Where a neighbouring quote has no
    implied volatility (e.g. a zero price) the price is interpolated linearly
    instead. With ``extrapolate`` the end-strike total variance is held flat
    beyond the grid.
    """
    scalar = np.ndim(K) == 0
    K = np.atleast_1d(np.asarray(K, dtype=float))
    k = sl.strikes
    if not extrapolate and (np.any(K < k[0]) or np.any(K > k[-1])):
        raise OutOfRangeError(f"strike outside quoted range [{k[0]}, {k[-1]}]")
    w = _quote_total_variance(sl)
    out = np.empty_like(K)
    for j, kk in enumerate(K):
        hit = np.flatnonzero(k == kk)
        if hit.size:
            out[j] = sl.prices[hit[0]]
            continue
        i = int(np.searchsorted(k, kk))
        if i == 0 or i == len(k):
            wi = w[0] if i == 0 else w[-1]
            if not np.isfinite(wi):
                out[j] = 0.0
                continue
        else:
            lo, hi = i - 1, i
            t = (kk - k[lo]) / (k[hi] - k[lo])
            if not (np.isfinite(w[lo]) and np.isfinite(w[hi])):
                out[j] = (1 - t) * sl.prices[lo] + t * sl.prices[hi]
                continue
            wi = (1 - t) * w[lo] + t * w[hi]
        right = PUT if kk <= sl.forward else CALL
        out[j] = float(bs_price(sl.spot, kk, sl.maturity_T, sl.rate, math.sqrt(wi / sl.maturity_T), right))
    return float(out[0]) if scalar else out


def _wing_grid(sl: OptionSlice, n_wing: int = 200, n_sd: float = 12.0):
    """Strike grid extended into both wings at flat end-strike implied vol."""
    k, p = sl.strikes, sl.prices
    w = _quote_total_variance(sl)
    parts_k, parts_p = [], []
    if np.isfinite(w[0]) and k[0] > 0:
        lo = sl.forward * math.exp(-n_sd * math.sqrt(w[0]))
        if lo < k[0]:
            kw = np.geomspace(lo, k[0], n_wing + 1)[:-1]
            right = np.where(kw <= sl.forward, PUT, CALL)
            pw = np.where(right == PUT,
                          bs_price(sl.spot, kw, sl.maturity_T, sl.rate, math.sqrt(w[0] / sl.maturity_T), PUT),
                          bs_price(sl.spot, kw, sl.maturity_T, sl.rate, math.sqrt(w[0] / sl.maturity_T), CALL))
            parts_k.append(kw)
            parts_p.append(pw)
    parts_k.append(k)
    parts_p.append(p)
    if np.isfinite(w[-1]):
        hi = sl.forward * math.exp(n_sd * math.sqrt(w[-1]))
        if hi > k[-1]:
            kw = np.geomspace(k[-1], hi, n_wing + 1)[1:]
            right = np.where(kw <= sl.forward, PUT, CALL)
            pw = np.where(right == PUT,
                          bs_price(sl.spot, kw, sl.maturity_T, sl.rate, math.sqrt(w[-1] / sl.maturity_T), PUT),
                          bs_price(sl.spot, kw, sl.maturity_T, sl.rate, math.sqrt(w[-1] / sl.maturity_T), CALL))
            parts_k.append(kw)
            parts_p.append(pw)
    return np.concatenate(parts_k), np.maximum(np.concatenate(parts_p), 0.0)


def strike_integral(sl: OptionSlice, kernel: Callable[[np.ndarray], np.ndarray],
                    extrapolate: bool = False) -> float:
    """Trapezoidal ``int kernel(K) phi(K) dK`` over the slice's strikes."""
    if len(sl) < 3:
        raise InvalidInputError("need at least 3 strikes")
    if not sl.spans_forward:
        warnings.warn(
            f"strikes [{sl.strikes[0]}, {sl.strikes[-1]}] do not straddle the forward {sl.forward:.6g}; "
            "integral is one-sided",
            TruncationWarning,
            stacklevel=3,
        )
    if extrapolate:
        k, p = _wing_grid(sl)
    else:
        k, p = sl.strikes, sl.prices
    return float(np.trapezoid(kernel(k) * p, k))


def _logm(sl: OptionSlice, k):
    return np.log(k / sl.spot)


def implied_qv(sl: OptionSlice, extrapolate: bool = False) -> float:
    """Option part of the risk-neutral expected quadratic variation."""
    return 2.0 * sl.growth * strike_integral(sl, lambda k: 1.0 / k**2, extrapolate)


def implied_tmv(sl: OptionSlice, extrapolate: bool = False) -> float:
    """Option part of the risk-neutral expected third-moment covariation."""
    return 4.0 * sl.growth * strike_integral(sl, lambda k: _logm(sl, k) / k**2, extrapolate)


def implied_fmv(sl: OptionSlice, extrapolate: bool = False) -> float:
    """Option part of the risk-neutral expected fourth-moment variation."""
    return 8.0 * sl.growth * strike_integral(sl, lambda k: _logm(sl, k) ** 2 / k**2, extrapolate)


def _bkm_quad_price(sl, extrapolate=False):
    return strike_integral(sl, lambda k: 2.0 * (1.0 - _logm(sl, k)) / k**2, extrapolate)


def _bkm_cubic_price(sl, extrapolate=False):
    def kern(k):
        lm = _logm(sl, k)
        return (6.0 * lm - 3.0 * lm**2) / k**2
    return strike_integral(sl, kern, extrapolate)


def _bkm_quartic_price(sl, extrapolate=False):
    def kern(k):
        lm = _logm(sl, k)
        return (12.0 * lm**2 - 4.0 * lm**3) / k**2
    return strike_integral(sl, kern, extrapolate)


def bkm_second(sl: OptionSlice, extrapolate: bool = False) -> float:
    return sl.growth * _bkm_quad_price(sl, extrapolate)


def bkm_third(sl: OptionSlice, extrapolate: bool = False) -> float:
    """Risk-neutral ``E[R_T^3]`` from the cubic contract."""
    return sl.growth * _bkm_cubic_price(sl, extrapolate)


def bkm_fourth(sl: OptionSlice, extrapolate: bool = False) -> float:
    """Risk-neutral ``E[R_T^4]`` from the quartic contract."""
    return sl.growth * _bkm_quartic_price(sl, extrapolate)


def rn_skew_kurt(sl: OptionSlice, extrapolate: bool = False) -> Tuple[float, float]:
    """Risk-neutral skewness and (raw) kurtosis of ``R_T``.

    The mean is approximated by the truncated expansion
    ``e^{rT} - 1 - e^{rT} (V/2 + W/6 + X/24)`` of the quadratic, cubic and
    quartic contract prices ``V, W, X``.
    """
    g = sl.growth
    V = _bkm_quad_price(sl, extrapolate)
    W = _bkm_cubic_price(sl, extrapolate)
    X = _bkm_quartic_price(sl, extrapolate)
    mu = g - 1.0 - g * V / 2.0 - g * W / 6.0 - g * X / 24.0
    var = g * V - mu**2
    if not var > 0:
        raise DegenerateSampleError(f"implied variance is not positive ({var})")
    skew = (g * W - 3.0 * mu * g * V + 2.0 * mu**3) / var**1.5
    kurt = (g * X - 4.0 * mu * g * W + 6.0 * g * mu**2 * V - 3.0 * mu**4) / var**2
    return float(skew), float(kurt)


@dataclass(frozen=True)
class ImpliedMoments:
    qv_implied: float
    tmv_implied: float
    fmv_implied: float
    m3_bkm: float
    m4_bkm: float
    skew_rn: float
    kurt_rn: float
    maturity_T: float
    n_strikes: int
    spans_forward: bool
    quote_date: Optional[str] = None
    expiry: Optional[str] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def implied_moments(sl: OptionSlice, extrapolate: bool = False) -> ImpliedMoments:
    with warnings.catch_warnings():
        # reported once through ``spans_forward`` instead of per integral
        warnings.simplefilter("ignore", TruncationWarning)
        try:
            skew, kurt = rn_skew_kurt(sl, extrapolate)
        except DegenerateSampleError:
            skew = kurt = float("nan")
        return ImpliedMoments(
            qv_implied=implied_qv(sl, extrapolate),
            tmv_implied=implied_tmv(sl, extrapolate),
            fmv_implied=implied_fmv(sl, extrapolate),
            m3_bkm=bkm_third(sl, extrapolate),
            m4_bkm=bkm_fourth(sl, extrapolate),
            skew_rn=skew,
            kurt_rn=kurt,
            maturity_T=sl.maturity_T,
            n_strikes=len(sl),
            spans_forward=sl.spans_forward,
            quote_date=sl.quote_date,
            expiry=sl.expiry,
        )


def variation_moment_regression(x, y, variation_kind: Optional[str] = None) -> HedgeFit:
    """OLS of implied moments ``y`` on implied variations ``x``."""
    return ols(x, y, variation_kind=variation_kind, response_kind="implied_moment")
