"""Monte Carlo paths for Heston dynamics with optional compound-Poisson jumps.

Log-returns follow

    dR = (mu - V/2) dt + sqrt(V) dW1 + dJ
    dV = kappa (theta - V) dt + sigma sqrt(V) dW2,   d<W1, W2> = rho dt

discretized with an Euler full-truncation scheme (``V+`` in both drift and
diffusion of ``V`` and in the return step). Jumps have normal log-sizes and
are added to ``R`` without drift compensation.

Paths are simulated in fixed-size blocks. Every block draws from its own
Philox streams keyed by ``(seed, block_index)``, so an ensemble is bit-identical
whatever ``n_jobs`` is.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, ParameterError
from .variation import fmv_terms, qv_terms, tmv_terms

BLOCK_SIZE = 4096
DEFAULT_STEPS_PER_DAY = 390
TRADING_DAYS_PER_YEAR = 252.0

_DIFFUSION_STREAM = 0
_JUMP_STREAM = 1


@dataclass(frozen=True)
class HestonSpec:
    """Heston parameters in per-year units. ``v0`` defaults to ``theta``."""

    mu: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    v0: Optional[float] = None
    s0: float = 1.0

    def __post_init__(self):
        if self.v0 is None:
            object.__setattr__(self, "v0", self.theta)
        for name in ("kappa", "theta", "v0", "s0"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        # sigma = 0 is allowed: it degenerates to deterministic variance
        if not self.sigma >= 0:
            raise ParameterError(f"sigma must be nonnegative, got {self.sigma}")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [-1, 1], got {self.rho}")
        if not math.isfinite(self.mu):
            raise ParameterError("mu must be finite")

    @property
    def feller_satisfied(self) -> bool:
        return 2.0 * self.kappa * self.theta >= self.sigma**2


@dataclass(frozen=True)
class JumpSpec:
    """Compound-Poisson jumps in log-return space with N(mean, sd^2) sizes."""

    intensity: float
    jump_mean: float = 0.0
    jump_sd: float = 0.0

    def __post_init__(self):
        if not self.intensity >= 0:
            raise ParameterError(f"intensity must be nonnegative, got {self.intensity}")
        if not self.jump_sd >= 0:
            raise ParameterError(f"jump_sd must be nonnegative, got {self.jump_sd}")
        if not math.isfinite(self.jump_mean):
            raise ParameterError("jump_mean must be finite")

    def raw_moment(self, k: int) -> float:
        """``E[x^k]`` for the normal jump-size law, ``k <= 4``."""
        m, v = self.jump_mean, self.jump_sd**2
        table = {
            0: 1.0,
            1: m,
            2: m * m + v,
            3: m**3 + 3 * m * v,
            4: m**4 + 6 * m * m * v + 3 * v * v,
        }
        if k not in table:
            raise InvalidInputError("raw moments are tabulated up to order 4")
        return table[k]

    def scaled(self, s: float) -> "JumpSpec":
        """Same law with every jump multiplied by ``s``."""
        return JumpSpec(self.intensity, self.jump_mean * s, self.jump_sd * abs(s))


@dataclass
class JumpRecords:
    """One row per jump: which path and step, its size and ``R`` just before it."""

    path: np.ndarray
    step: np.ndarray
    size: np.ndarray
    r_minus: np.ndarray

    @classmethod
    def empty(cls) -> "JumpRecords":
        return cls(
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0),
            np.empty(0),
        )

    def __len__(self) -> int:
        return len(self.size)

    def per_path_sum(self, values, n_paths: int) -> np.ndarray:
        return np.bincount(self.path, weights=values, minlength=n_paths)


@dataclass
class PathAccumulators:
    """Per-path running sums collected during simulation.

    The three ``realized_*`` fields are the realized variations on the full
    simulation grid. The ``int_*`` fields are left-point Riemann sums of
    ``V``, ``R V``, ``R^2 V``, ``R`` and ``R^2`` against ``dt``.
    """

    realized_qv: np.ndarray
    realized_tmv: np.ndarray
    realized_fmv: np.ndarray
    int_v: np.ndarray
    int_rv: np.ndarray
    int_r2v: np.ndarray
    int_r: np.ndarray
    int_r2: np.ndarray


@dataclass
class PathEnsemble:
    n_paths: int
    n_steps: int
    horizon_T: float
    terminal: np.ndarray
    accum: PathAccumulators
    logreturn_paths: Optional[np.ndarray] = None
    variance_paths: Optional[np.ndarray] = None
    jumps: Optional[JumpRecords] = None
    spec: Optional[HestonSpec] = None
    jump_spec: Optional[JumpSpec] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.horizon_T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon_T, self.n_steps + 1)

    @classmethod
    def from_paths(cls, logreturn_paths, horizon_T: float, jumps: Optional[JumpRecords] = None):
        """Wrap an externally produced ``n_paths x (n_steps+1)`` grid of R."""
        r = np.atleast_2d(np.asarray(logreturn_paths, dtype=float))
        if r.shape[1] < 2:
            raise InvalidInputError("need at least one step per path")
        if np.any(r[:, 0] != 0):
            raise InvalidInputError("every path must start at R = 0")
        n_paths, n1 = r.shape
        dt = horizon_T / (n1 - 1)
        prev, curr = r[:, :-1], r[:, 1:]
        nan = np.full(n_paths, np.nan)
        accum = PathAccumulators(
            realized_qv=qv_terms(prev, curr).sum(axis=1),
            realized_tmv=tmv_terms(prev, curr).sum(axis=1),
            realized_fmv=fmv_terms(prev, curr).sum(axis=1),
            int_v=nan,
            int_rv=nan,
            int_r2v=nan,
            int_r=prev.sum(axis=1) * dt,
            int_r2=(prev**2).sum(axis=1) * dt,
        )
        return cls(n_paths, n1 - 1, float(horizon_T), r[:, -1].copy(), accum, logreturn_paths=r, jumps=jumps)


def steps_for_horizon(horizon_T: float, steps_per_day: int = DEFAULT_STEPS_PER_DAY,
                      days_per_year: float = TRADING_DAYS_PER_YEAR) -> int:
    return max(1, int(round(horizon_T * days_per_year * steps_per_day)))


def _block_rngs(seed: int, block: int):
    ss_d = np.random.SeedSequence(seed, spawn_key=(block, _DIFFUSION_STREAM))
    ss_j = np.random.SeedSequence(seed, spawn_key=(block, _JUMP_STREAM))
    return np.random.Generator(np.random.Philox(ss_d)), np.random.Generator(np.random.Philox(ss_j))


def _simulate_block(spec: HestonSpec, jumps: Optional[JumpSpec], n: int, n_steps: int,
                    dt: float, seed: int, block: int, store: bool):
    rng, rng_j = _block_rngs(seed, block)
    mu, kappa, theta, sigma, rho = spec.mu, spec.kappa, spec.theta, spec.sigma, spec.rho
    rho_c = math.sqrt(max(0.0, 1.0 - rho * rho))
    lam_dt = 0.0 if jumps is None else jumps.intensity * dt

    r = np.zeros(n)
    v = np.full(n, float(spec.v0))
    acc = {k: np.zeros(n) for k in PathAccumulators.__dataclass_fields__}
    r_grid = v_grid = None
    if store:
        r_grid = np.empty((n, n_steps + 1))
        v_grid = np.empty((n, n_steps + 1))
        r_grid[:, 0] = 0.0
        v_grid[:, 0] = spec.v0
    j_path, j_step, j_size, j_rminus = [], [], [], []

    for i in range(n_steps):
        z = rng.standard_normal((2, n))
        vp = np.maximum(v, 0.0)
        sq = np.sqrt(vp * dt)
        r_next = r + (mu - 0.5 * vp) * dt + sq * z[0]
        v = v + kappa * (theta - vp) * dt + sigma * sq * (rho * z[0] + rho_c * z[1])

        if lam_dt > 0.0:
            counts = rng_j.poisson(lam_dt, size=n)
            for k in range(1, int(counts.max(initial=0)) + 1):
                idx = np.flatnonzero(counts >= k)
                sizes = jumps.jump_mean + jumps.jump_sd * rng_j.standard_normal(len(idx))
                j_path.append(idx)
                j_step.append(np.full(len(idx), i))
                j_size.append(sizes)
                j_rminus.append(r_next[idx].copy())
                r_next[idx] += sizes

        rv_dt = vp * dt
        acc["realized_qv"] += qv_terms(r, r_next)
        acc["realized_tmv"] += tmv_terms(r, r_next)
        acc["realized_fmv"] += fmv_terms(r, r_next)
        acc["int_v"] += rv_dt
        acc["int_rv"] += r * rv_dt
        acc["int_r2v"] += r * r * rv_dt
        acc["int_r"] += r * dt
        acc["int_r2"] += r * r * dt
        r = r_next
        if store:
            r_grid[:, i + 1] = r
            v_grid[:, i + 1] = np.maximum(v, 0.0)

    if j_path:
        recs = JumpRecords(
            np.concatenate(j_path).astype(np.int64),
            np.concatenate(j_step).astype(np.int64),
            np.concatenate(j_size),
            np.concatenate(j_rminus),
        )
    else:
        recs = JumpRecords.empty()
    return r, acc, r_grid, v_grid, recs


def simulate_heston(
    spec: HestonSpec,
    jumps: Optional[JumpSpec] = None,
    n_paths: int = 10_000,
    n_steps: Optional[int] = None,
    horizon_T: float = 1.0 / TRADING_DAYS_PER_YEAR,
    seed: int = 0,
    store_paths: bool = True,
    n_jobs: int = 1,
) -> PathEnsemble:
    """Simulate an ensemble of log-return (and variance) paths.

    Args:
        spec: Heston parameters.
        jumps: optional jump law; ``None`` or zero intensity means no jumps.
        n_paths: number of paths.
        n_steps: Euler steps; defaults to 390 per trading day of ``horizon_T``.
        horizon_T: horizon in years.
        seed: root seed of the per-block random streams.
        store_paths: keep the full ``R`` and ``V`` grids. Large ensembles can
            switch this off; per-path realized variations and integrals are
            always accumulated.
        n_jobs: worker threads. Output does not depend on it.

    Returns:
        PathEnsemble with jump bookkeeping always attached (possibly empty).
    """
    if n_steps is None:
        n_steps = steps_for_horizon(horizon_T)
    if int(n_paths) < 1 or int(n_steps) < 1:
        raise InvalidInputError("n_paths and n_steps must be >= 1")
    if not horizon_T > 0:
        raise InvalidInputError("horizon_T must be positive")
    n_paths, n_steps = int(n_paths), int(n_steps)
    dt = horizon_T / n_steps
    if jumps is not None and jumps.intensity == 0:
        jumps_eff = None
    else:
        jumps_eff = jumps

    sizes = [min(BLOCK_SIZE, n_paths - s) for s in range(0, n_paths, BLOCK_SIZE)]

    def run(b):
        return _simulate_block(spec, jumps_eff, sizes[b], n_steps, dt, seed, b, store_paths)

    if n_jobs > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(b) for b in range(len(sizes))]

    offsets = np.cumsum([0] + sizes[:-1])
    terminal = np.concatenate([res[0] for res in results])
    accum = PathAccumulators(**{
        k: np.concatenate([res[1][k] for res in results]) for k in PathAccumulators.__dataclass_fields__
    })
    r_grid = v_grid = None
    if store_paths:
        r_grid = np.concatenate([res[2] for res in results])
        v_grid = np.concatenate([res[3] for res in results])
    recs = JumpRecords(
        np.concatenate([res[4].path + off for res, off in zip(results, offsets)]),
        np.concatenate([res[4].step for res in results]),
        np.concatenate([res[4].size for res in results]),
        np.concatenate([res[4].r_minus for res in results]),
    )
    return PathEnsemble(
        n_paths=n_paths,
        n_steps=n_steps,
        horizon_T=float(horizon_T),
        terminal=terminal,
        accum=accum,
        logreturn_paths=r_grid,
        variance_paths=v_grid,
        jumps=recs,
        spec=spec,
        jump_spec=jumps,
        seed=seed,
    )


def ensemble_sample_moments(ensemble: PathEnsemble, order: int) -> float:
    """Sample mean of ``R_T ** order`` across paths."""
    if order not in (3, 4):
        raise InvalidInputError("order must be 3 or 4")
    if ensemble.n_paths < 1 or len(ensemble.terminal) == 0:
        raise InvalidInputError("empty ensemble")
    return float(np.mean(ensemble.terminal**order))


@dataclass(frozen=True)
class MomentRelation:
    """Third/fourth sample moments against 1.5 x mean realized variation.

    ``bias3`` is ``|m3 - 1.5 mean_tmv| / |m3|`` unless ``m3`` is statistically
    indistinguishable from zero (``abs3 = True``); then it is the absolute gap.
    Same for ``bias4``.
    """

    m3: float
    mean_tmv: float
    m4: float
    mean_fmv: float
    bias3: float
    bias4: float
    bias3_se: float
    bias4_se: float
    abs3: bool
    abs4: bool
    n_paths: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _relative_gap(a: np.ndarray, b: np.ndarray, zero_z: float):
    """Relative gap ``|mean(a) - mean(b)| / |mean(a)|`` with delta-method SE."""
    n = len(a)
    ma, mb = a.mean(), b.mean()
    se_a = a.std(ddof=1) / math.sqrt(n) if n > 1 else float("inf")
    d = a - b
    if abs(ma) <= zero_z * se_a:
        se_d = d.std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")
        return float(abs(ma - mb)), float(se_d), True
    g = (ma - mb) / ma
    grad_a, grad_b = mb / ma**2, -1.0 / ma
    cov = np.cov(np.vstack([a, b])) / n if n > 1 else np.full((2, 2), np.nan)
    var_g = grad_a**2 * cov[0, 0] + grad_b**2 * cov[1, 1] + 2 * grad_a * grad_b * cov[0, 1]
    return float(abs(g)), float(math.sqrt(max(var_g, 0.0))), False


def moment_relation_check(ensemble: PathEnsemble, zero_z: float = 3.0) -> MomentRelation:
    """Compare ``E[R_T^3]`` with ``1.5 E[[R,R^2]_T]`` and ``E[R_T^4]`` with ``1.5 E[[R^2]_T]``."""
    if ensemble.n_paths < 2:
        raise InvalidInputError("need at least 2 paths")
    rt = ensemble.terminal
    a3, b3 = rt**3, 1.5 * ensemble.accum.realized_tmv
    a4, b4 = rt**4, 1.5 * ensemble.accum.realized_fmv
    bias3, se3, abs3 = _relative_gap(a3, b3, zero_z)
    bias4, se4, abs4 = _relative_gap(a4, b4, zero_z)
    return MomentRelation(
        m3=float(a3.mean()),
        mean_tmv=float(ensemble.accum.realized_tmv.mean()),
        m4=float(a4.mean()),
        mean_fmv=float(ensemble.accum.realized_fmv.mean()),
        bias3=bias3,
        bias4=bias4,
        bias3_se=se3,
        bias4_se=se4,
        abs3=abs3,
        abs4=abs4,
        n_paths=ensemble.n_paths,
    )
