"""Jump corrections to the option-synthesized variation expectations.

With ``J`` the jump measure of the log-return process and ``x`` a jump size,

    J2 = 2 E int (1 + x + x^2/2 - e^x) J(ds dx)
    J3 = 4 E int j3(x, R_{s-}) J(ds dx)
    J4 = 8 E int j4(x, R_{s-}) J(ds dx)

``J2`` is the well-known quadratic-variation correction for variance swaps.
Every integrand vanishes to third order in ``x``; near ``x = 0`` the brackets
cancel catastrophically, so they are evaluated through the exponential
remainders ``e^x - sum_{k<=n} x^k/k!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import InvalidInputError, MissingDataError
from .simulation import JumpSpec, PathEnsemble

_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 24


def exp_remainder(x, n: int):
    """``e^x - sum_{k=0..n} x^k / k!`` without cancellation for small ``|x|``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUTOFF
    out = np.empty_like(x)

    xs = x[small]
    # Horner form of sum_{k=n+1}^{n+m} x^k/k! = x^{n+1}/(n+1)! * (1 + x/(n+2)(1 + ...))
    acc = np.ones_like(xs)
    for k in range(n + _SERIES_TERMS, n + 1, -1):
        acc = 1.0 + acc * xs / k
    out[small] = acc * xs ** (n + 1) / math.factorial(n + 1)

    xl = x[~small]
    poly = sum(xl**k / math.factorial(k) for k in range(n + 1))
    out[~small] = np.exp(xl) - poly
    return out if out.ndim else float(out)


def _h(x):
    # 1 + x + x^2/2 - e^x
    return -exp_remainder(x, 2)


def _c3(x):
    # 1 + x + x^2/2 + x^3/4 - e^x
    x = np.asarray(x, dtype=float)
    return x**3 / 12.0 - exp_remainder(x, 3)


def _c4(x):
    # 1 + x + x^2/2 + x^3/6 + x^4/16 - e^x
    x = np.asarray(x, dtype=float)
    return x**4 / 48.0 - exp_remainder(x, 4)


def j3_integrand(x, r_minus):
    """``R(1 + x + x^2/2 - e^x) + 1 + x + x^2/2 + x^3/4 - e^x`` (without the 4)."""
    out = np.asarray(r_minus, dtype=float) * _h(x) + _c3(x)
    return out if np.ndim(out) else float(out)


def j4_integrand(x, r_minus):
    """``R^2 (1+x+x^2/2-e^x) + 2R (1+x+x^2/2+x^3/4-e^x) + 2 (1+x+x^2/2+x^3/6+x^4/16-e^x)``.

    The factor 8 is applied by the caller.
    """
    r = np.asarray(r_minus, dtype=float)
    out = r * r * _h(x) + 2.0 * r * _c3(x) + 2.0 * _c4(x)
    return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# Closed-form expectations over the normal jump-size law

def _mgf_remainder(jumps: JumpSpec, n: int) -> float:
    """``E[e^x] - sum_{k<=n} E[x^k]/k!`` for ``x ~ N(m, s^2)``."""
    m, s2 = jumps.jump_mean, jumps.jump_sd**2
    a = m + 0.5 * s2
    # E[e^x] = e^a; expand e^a and subtract the normal raw moments term by term
    poly_gap = sum((a**k - jumps.raw_moment(k)) / math.factorial(k) for k in range(n + 1))
    return float(exp_remainder(a, n)) + poly_gap


def expected_h(jumps: JumpSpec) -> float:
    """``E[1 + x + x^2/2 - e^x]``."""
    m, s2 = jumps.jump_mean, jumps.jump_sd**2
    a = m + 0.5 * s2
    # 1 + m + (m^2+s^2)/2 - e^a, rearranged so the O(1) terms cancel exactly
    return -0.5 * m * s2 - s2 * s2 / 8.0 - float(exp_remainder(a, 2))


def expected_c3(jumps: JumpSpec) -> float:
    return jumps.raw_moment(3) / 12.0 - _mgf_remainder(jumps, 3)


def expected_c4(jumps: JumpSpec) -> float:
    return jumps.raw_moment(4) / 48.0 - _mgf_remainder(jumps, 4)


def j2_correction(jumps: JumpSpec, horizon_T: float) -> float:
    """Quadratic-variation jump correction ``2 lambda T E[1 + x + x^2/2 - e^x]``."""
    if not horizon_T > 0:
        raise InvalidInputError("horizon_T must be positive")
    if jumps.intensity == 0:
        return 0.0
    return 2.0 * jumps.intensity * horizon_T * expected_h(jumps)


@dataclass(frozen=True)
class JumpCorrection:
    j2: float
    j3: float
    j4: float
    method: str
    mc_stderr: Optional[tuple] = None

    def __post_init__(self):
        if (self.mc_stderr is not None) != (self.method == "monte_carlo"):
            raise InvalidInputError("mc_stderr is present exactly for monte_carlo corrections")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["mc_stderr"] = None if self.mc_stderr is None else list(self.mc_stderr)
        return d


def _require_jumps(ensemble: PathEnsemble):
    if ensemble.jumps is None:
        raise MissingDataError("ensemble carries no jump bookkeeping (simulate with jump records)")
    return ensemble.jumps


def _mc_mean(per_path: np.ndarray):
    n = len(per_path)
    se = per_path.std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")
    return float(np.sum(per_path) / n), float(se)


def _path_means(ensemble: PathEnsemble):
    acc = ensemble.accum
    if np.any(np.isnan(acc.int_r)) or np.any(np.isnan(acc.int_r2)):
        raise MissingDataError("ensemble lacks time integrals of R and R^2")
    return float(np.mean(acc.int_r)), float(np.mean(acc.int_r2))


def j3_correction(jumps: JumpSpec, ensemble: PathEnsemble,
                  method: Literal["monte_carlo", "analytic_moments"] = "monte_carlo"):
    """Third-moment jump correction ``J3`` under the ensemble's measure.

    ``monte_carlo`` averages ``4 sum_jumps j3(x, R_{s-})`` over paths.
    ``analytic_moments`` uses closed-form jump-size expectations together
    with the ensemble mean of ``int R_s ds`` (jump sizes and arrival times
    are independent of ``R_{s-}``).

    Returns ``(value, stderr)``; stderr is ``None`` for the analytic method.
    """
    if method == "monte_carlo":
        rec = _require_jumps(ensemble)
        if len(rec) == 0:
            return 0.0, 0.0
        per_path = rec.per_path_sum(4.0 * j3_integrand(rec.size, rec.r_minus), ensemble.n_paths)
        return _mc_mean(per_path)
    if method == "analytic_moments":
        if jumps.intensity == 0:
            return 0.0, None
        int_r, _ = _path_means(ensemble)
        lam, T = jumps.intensity, ensemble.horizon_T
        return 4.0 * lam * (expected_h(jumps) * int_r + T * expected_c3(jumps)), None
    raise InvalidInputError(f"unknown method {method!r}")


def j4_correction(jumps: JumpSpec, ensemble: PathEnsemble,
                  method: Literal["monte_carlo", "analytic_moments"] = "monte_carlo"):
    """Fourth-moment jump correction ``J4``; see :func:`j3_correction`."""
    if method == "monte_carlo":
        rec = _require_jumps(ensemble)
        if len(rec) == 0:
            return 0.0, 0.0
        per_path = rec.per_path_sum(8.0 * j4_integrand(rec.size, rec.r_minus), ensemble.n_paths)
        return _mc_mean(per_path)
    if method == "analytic_moments":
        if jumps.intensity == 0:
            return 0.0, None
        int_r, int_r2 = _path_means(ensemble)
        lam, T = jumps.intensity, ensemble.horizon_T
        val = expected_h(jumps) * int_r2 + 2.0 * expected_c3(jumps) * int_r + 2.0 * T * expected_c4(jumps)
        return 8.0 * lam * val, None
    raise InvalidInputError(f"unknown method {method!r}")


def jump_corrections(jumps: JumpSpec, ensemble: PathEnsemble,
                     method: Literal["monte_carlo", "analytic_moments"] = "monte_carlo") -> JumpCorrection:
    j3, se3 = j3_correction(jumps, ensemble, method)
    j4, se4 = j4_correction(jumps, ensemble, method)
    return JumpCorrection(
        j2=j2_correction(jumps, ensemble.horizon_T),
        j3=j3,
        j4=j4,
        method=method,
        mc_stderr=(se3, se4) if method == "monte_carlo" else None,
    )
