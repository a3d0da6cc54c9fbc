"""Subcommand orchestration: inputs and config in, reports and plot data out."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import __version__
from ..errors import DegenerateSampleError, InvalidInputError, MissingDataError, TruncationWarning
from ..hedging import build_hedged, hedge_report, qq_pairs
from ..jumps import jump_corrections
from ..options import implied_moments, variation_moment_regression
from ..simulation import HestonSpec, JumpSpec, moment_relation_check, simulate_heston
from ..variation import annualize, fmv_terms, qv_terms, summary_stats, tmv_terms, variation_report
from .config import Config
from .filtering import FilterPolicy, filter_options, read_option_csv
from .ingest import load_ticks, split_sessions
from .reports import read_jsonl, thin_indices, write_csv, write_jsonl

logger = logging.getLogger(__name__)

COMMANDS = ("realized", "implied", "simulate", "jumps", "hedge", "report")


@dataclass
class PlotData:
    header: Tuple[str, ...]
    rows: List[tuple]


@dataclass
class ReportBundle:
    command: str
    records: List[dict] = field(default_factory=list)
    plots: Dict[str, PlotData] = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)

    def add(self, record_type: str, /, **payload) -> dict:
        rec = {"record": record_type, **payload}
        self.records.append(rec)
        return rec

    def find(self, record_type: str) -> List[dict]:
        return [r for r in self.records if r["record"] == record_type]

    def write(self, out_dir: Union[str, Path]) -> List[Path]:
        out = Path(out_dir)
        self.files = [write_jsonl(out / f"{self.command}.jsonl", self.records)]
        for name in sorted(self.plots):
            p = self.plots[name]
            self.files.append(write_csv(out / f"{self.command}_{name}.csv", p.header, p.rows))
        return self.files


# --------------------------------------------------------------------------
# Config -> domain objects

def heston_from_config(cfg: Config) -> HestonSpec:
    return HestonSpec(
        mu=cfg["heston.mu"],
        kappa=cfg["heston.kappa"],
        theta=cfg["heston.theta"],
        sigma=cfg["heston.sigma"],
        rho=cfg["heston.rho"],
        v0=cfg["heston.v0"],
        s0=cfg["heston.s0"],
    )


def jumps_from_config(cfg: Config) -> Optional[JumpSpec]:
    if cfg["jumps.intensity"] == 0:
        return None
    return JumpSpec(cfg["jumps.intensity"], cfg["jumps.mean"], cfg["jumps.sd"])


def horizon_from_config(cfg: Config) -> Tuple[float, int]:
    """``(horizon_T, n_steps)``; ``sim.horizon_T`` overrides ``sim.horizon_days``."""
    if cfg.explicit("sim.horizon_T") and cfg.explicit("sim.horizon_days"):
        raise InvalidInputError("set only one of sim.horizon_T and sim.horizon_days")
    days_per_year = cfg["sim.days_per_year"]
    if cfg.explicit("sim.horizon_T"):
        T = cfg["sim.horizon_T"]
        days = T * days_per_year
    else:
        days = cfg["sim.horizon_days"]
        T = days / days_per_year
    if not T > 0:
        raise InvalidInputError("simulation horizon must be positive")
    n_steps = cfg["sim.n_steps"]
    if n_steps is None:
        n_steps = max(1, int(round(days * cfg["sim.steps_per_day"])))
    return T, int(n_steps)


def policy_from_config(cfg: Config) -> FilterPolicy:
    return FilterPolicy(
        min_days_to_maturity=cfg["filter.min_days"],
        weekday=cfg["filter.weekday"],
        otm_only=cfg["filter.otm_only"],
        moneyness_buckets=tuple(cfg["filter.buckets"]),
    )


def _simulate(cfg: Config, jumps: Optional[JumpSpec] = None, store_paths: bool = False):
    T, n_steps = horizon_from_config(cfg)
    return simulate_heston(
        heston_from_config(cfg),
        jumps=jumps,
        n_paths=cfg["sim.n_paths"],
        n_steps=n_steps,
        horizon_T=T,
        seed=cfg["seed"],
        store_paths=store_paths,
        n_jobs=cfg["sim.n_jobs"],
    )


def _ensemble_info(ens) -> dict:
    return {"n_paths": ens.n_paths, "n_steps": ens.n_steps, "horizon_T": ens.horizon_T, "seed": ens.seed}


def _path_plot(ens, max_rows: int) -> PlotData:
    idx = thin_indices(ens.n_paths, max_rows)
    a = ens.accum
    rows = [(int(i), ens.terminal[i], a.realized_qv[i], a.realized_tmv[i], a.realized_fmv[i]) for i in idx]
    return PlotData(("path", "R_T", "qv", "tmv", "fmv"), rows)


# --------------------------------------------------------------------------
# Subcommands

def _cmd_realized(cfg: Config, bundle: ReportBundle, target: Optional[str]):
    path = target or cfg["input.ticks"]
    if not path:
        raise MissingDataError("realized needs a ticks CSV (argument or input.ticks)")
    ing = load_ticks(path, cfg["realized.bar_seconds"])
    bundle.add("ingest_audit", **ing.audit.to_dict())
    series = ing.series
    sessions = split_sessions(series)
    conv = cfg["realized.convention"]
    include_gaps = cfg["realized.include_gaps"]

    rep = variation_report(series, trading_days=max(len(sessions), 1), include_gaps=include_gaps)
    rep = annualize(rep, conv)
    bundle.add("variation", scope="full", include_gaps=include_gaps, **rep.to_dict())

    daily_rows = []
    for s in sessions:
        d = annualize(variation_report(s, period_days=1.0, trading_days=1.0, include_gaps=include_gaps), conv)
        daily_rows.append((s.times[0], d.qv_ann, d.tmv_ann, d.fmv_ann))
    lags = cfg["realized.lags"]
    for j, name in enumerate(("qv_ann", "tmv_ann", "fmv_ann"), start=1):
        sample = [r[j] for r in daily_rows]
        try:
            st = summary_stats(sample, lags=lags)
            bundle.add("daily_summary", variable=name, **st.to_dict())
        except InvalidInputError as exc:  # too few sessions or flat series
            bundle.add("daily_summary", variable=name, skipped=str(exc), n=len(sample))

    lp = series.logprice
    prev, curr = lp[:-1], lp[1:]
    cum = [np.concatenate([[0.0], np.cumsum(f(prev, curr))]) for f in (qv_terms, tmv_terms, fmv_terms)]
    bundle.plots["series"] = PlotData(
        ("time", "logprice", "cum_qv", "cum_tmv", "cum_fmv"),
        [(series.times[i], lp[i], cum[0][i], cum[1][i], cum[2][i]) for i in range(len(lp))],
    )
    bundle.plots["daily"] = PlotData(("session_start", "qv_ann", "tmv_ann", "fmv_ann"), daily_rows)


def _cmd_implied(cfg: Config, bundle: ReportBundle, target: Optional[str]):
    path = target or cfg["input.options"]
    if not path:
        raise MissingDataError("implied needs an options CSV (argument or input.options)")
    rows = read_option_csv(path)
    result = filter_options(rows, policy_from_config(cfg))
    bundle.add("filter_audit", **result.audit.to_dict())
    extrap = cfg["quadrature.extrapolate"]

    moments = []
    for sl in result.slices:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            m = implied_moments(sl, extrapolate=extrap)
        moments.append(m)
        bundle.add("implied_moments", extrapolate=extrap, **m.to_dict())

    for xk, yk, kind in (("tmv_implied", "m3_bkm", "tmv"), ("fmv_implied", "m4_bkm", "fmv")):
        x = np.array([getattr(m, xk) for m in moments])
        y = np.array([getattr(m, yk) for m in moments])
        ok = np.isfinite(x) & np.isfinite(y)
        try:
            fit = variation_moment_regression(x[ok], y[ok], variation_kind=kind)
            bundle.add("moment_regression", response=yk, **fit.to_dict())
        except InvalidInputError as exc:
            bundle.add("moment_regression", response=yk, variation_kind=kind, skipped=str(exc))

    header = ("quote_date", "expiry", "maturity_T", "qv_implied", "tmv_implied", "fmv_implied",
              "m3_bkm", "m4_bkm", "skew_rn", "kurt_rn")
    bundle.plots["moments"] = PlotData(header, [tuple(getattr(m, h) for h in header) for m in moments])


def _cmd_simulate(cfg: Config, bundle: ReportBundle, target: Optional[str]):
    ens = _simulate(cfg, jumps_from_config(cfg))
    rel = moment_relation_check(ens)
    st = summary_stats(ens.terminal, lags=1)
    bundle.add("ensemble", **_ensemble_info(ens),
               mean_R_T=st.mean, sd_R_T=st.sd, skewness=st.skewness, kurtosis=st.kurtosis,
               mean_qv=float(ens.accum.realized_qv.mean()))
    bundle.add("moment_relation", **rel.to_dict())
    bundle.plots["paths"] = _path_plot(ens, cfg["output.max_plot_rows"])


def _loglog_slope(scales: Sequence[float], values: Sequence[float]) -> float:
    s, v = np.asarray(scales, float), np.abs(np.asarray(values, float))
    ok = (s > 0) & (v > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(s[ok]), np.log(v[ok]), 1)[0])


def _cmd_jumps(cfg: Config, bundle: ReportBundle, target: Optional[str]):
    js = jumps_from_config(cfg)
    if js is None:
        raise InvalidInputError("jumps needs jumps.intensity > 0")
    method = cfg["jumps.method"]
    ens = _simulate(cfg, js)
    jc = jump_corrections(js, ens, method=method)
    bundle.add("jump_corrections", **_ensemble_info(ens), scale=1.0, **jc.to_dict())

    scales = cfg["jumps.scales"]
    if scales:
        rows = []
        for s in scales:
            if not isinstance(s, float) or not s > 0:
                raise InvalidInputError(f"jumps.scales must be positive numbers, got {s!r}")
            js_s = js.scaled(s)
            jc_s = jump_corrections(js_s, _simulate(cfg, js_s), method=method)
            rows.append((s, jc_s.j2, jc_s.j3, jc_s.j4))
        bundle.add("jump_order",
                   scales=[r[0] for r in rows],
                   slope_j3=_loglog_slope([r[0] for r in rows], [r[2] for r in rows]),
                   slope_j4=_loglog_slope([r[0] for r in rows], [r[3] for r in rows]))
        bundle.plots["scales"] = PlotData(("scale", "j2", "j3", "j4"), rows)


def _cmd_hedge(cfg: Config, bundle: ReportBundle, target: Optional[str]):
    ens = _simulate(cfg, jumps_from_config(cfg))
    base = ens.terminal
    bundle.add("ensemble", **_ensemble_info(ens))
    variations = {"tmv": ens.accum.realized_tmv, "fmv": ens.accum.realized_fmv}
    fixed = cfg["hedge.fixed_leg"]
    qq_rows = []
    idx = thin_indices(len(base), cfg["output.max_plot_rows"])

    theo, emp = qq_pairs(base)
    qq_rows += [("base", theo[i], emp[i]) for i in idx]
    for kind in cfg["hedge.kinds"]:
        if kind not in variations:
            raise InvalidInputError(f"hedge.kinds entries must be tmv or fmv, got {kind!r}")
        try:
            rep = hedge_report(base, variations[kind], kind, fixed_leg=fixed)
        except DegenerateSampleError as exc:
            bundle.add("hedge", kind=kind, skipped=str(exc))
            continue
        bundle.add("hedge", **rep.to_dict())
        hedged = build_hedged(base, variations[kind], rep.fit.weight, kind, fixed).hedged_returns
        theo, emp = qq_pairs(hedged)
        qq_rows += [(f"hedged_{kind}", theo[i], emp[i]) for i in idx]
    bundle.plots["qq"] = PlotData(("series", "theoretical_quantile", "sample_quantile"), qq_rows)


def _cmd_report(cfg: Config, bundle: ReportBundle, target: Optional[str]):
    if not target:
        raise MissingDataError("report needs a directory")
    d = Path(target)
    if not d.is_dir():
        raise MissingDataError(f"{d} is not a directory")
    files = sorted(p for p in d.glob("*.jsonl") if p.name != "report.jsonl")
    if not files:
        raise MissingDataError(f"no .jsonl reports in {d}")
    for p in files:
        recs = read_jsonl(p)
        kinds: Dict[str, int] = {}
        for r in recs:
            kinds[r.get("record", "?")] = kinds.get(r.get("record", "?"), 0) + 1
        bundle.add("report_file", file=p.name, records=len(recs), kinds=dict(sorted(kinds.items())))
    csvs = sorted(p.name for p in d.glob("*.csv"))
    bundle.add("plot_files", files=csvs)


_HANDLERS: Dict[str, Callable] = {
    "realized": _cmd_realized,
    "implied": _cmd_implied,
    "simulate": _cmd_simulate,
    "jumps": _cmd_jumps,
    "hedge": _cmd_hedge,
    "report": _cmd_report,
}


def run_pipeline(cfg: Config, command: str, target: Optional[str] = None,
                 out_dir: Optional[Union[str, Path]] = None, write: bool = True) -> ReportBundle:
    """Run one subcommand and (optionally) write its report files.

    Output lands in ``out_dir`` (default ``output.dir``; for ``report`` the
    inspected directory). Files are ``<command>.jsonl`` plus
    ``<command>_<plot>.csv``. Given the same inputs, config and seed the bytes
    are identical between runs.
    """
    if command not in _HANDLERS:
        raise InvalidInputError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    bundle = ReportBundle(command)
    bundle.add("meta", command=command, version=__version__, seed=cfg["seed"],
               target=None if target is None else Path(target).name, config=cfg.resolved())
    _HANDLERS[command](cfg, bundle, target)
    if write:
        if out_dir is None:
            out_dir = target if command == "report" else cfg["output.dir"]
        bundle.write(out_dir)
        logger.info("wrote %s", ", ".join(str(p) for p in bundle.files))
    return bundle
