"""Batch command line: estimate, filter, price, optimize, frontier, wel, sensitivity."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data_io as dio
from .config import RunConfig
from .estimation import estimate_index, estimate_pair
from .filtering import extract_innovations, filter_index, unconditional_variance
from .frontier import cvar_frontier, markowitz_frontier, min_cvar, min_variance, scenario_panel, tangency
from .portfolio import (
    MarketModel,
    backward_induction,
    certainty_equivalent,
    model_merton_weights,
    optimal_weights,
    portfolio_log_return,
    simulate_market,
    wealth_path,
)
from .pricing import build_surface
from .welfare import UtilitySpec, pair_weight_map, rmss, sensitivity, wel_report

log = logging.getLogger("mhngarch")

SUBCOMMANDS = ("estimate", "filter", "price", "optimize", "frontier", "wel", "sensitivity")


class CliError(RuntimeError):
    pass


class UsageError(CliError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def asset_seed(base: int, asset_id: str) -> int:
    """Per-asset seed independent of processing order."""
    return (int(base) * 1_000_003 + zlib.crc32(asset_id.encode())) % (2**32)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MHN_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _r12(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else float("%.12g" % x)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------- shared loaders

class _Context:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.panel = dio.load_prices(cfg.prices_path, index_id=cfg.index_id)
        if self.panel.index_id is None:
            raise CliError(f"index {cfg.index_id!r} not present in {cfg.prices_path}")
        self.returns = dio.log_returns(self.panel)
        available = [a for a in self.panel.ids if a != cfg.index_id]
        if cfg.assets:
            missing = [a for a in cfg.assets if a not in available]
            if missing:
                raise CliError(f"assets not in price panel: {missing}")
            self.assets = list(cfg.assets)
        else:
            self.assets = available
        self._rows = None

    def rows(self):
        if self._rows is None:
            path = self.cfg.params_path
            if not path.exists():
                raise CliError(f"missing prerequisite artifact: parameter file {path} (run 'estimate' first)")
            rows, index_id, _ = dio.load_params(path)
            if index_id != self.cfg.index_id:
                raise CliError(f"parameter file index {index_id!r} differs from configured {self.cfg.index_id!r}")
            missing = [a for a in [index_id] + self.assets if a not in rows]
            if missing:
                raise CliError(f"parameter file {path} lacks rows for {missing}")
            self._rows = rows
        return self._rows

    def pair(self, aid):
        return dio.pair_from_rows(self.rows(), self.cfg.index_id, aid, self.cfg.r)

    def shapes(self, aid):
        rows = self.rows()
        return rows[self.cfg.index_id].shape, rows[aid].shape

    def log_prices(self, aid):
        return np.log(self.panel.series(aid))

    def index_filtered(self) -> tuple[np.ndarray, float]:
        """Index variances for each return and for the period after the sample."""
        pair = dio.pair_from_rows(self.rows(), self.cfg.index_id, self.cfg.index_id, self.cfg.r)
        x1 = self.log_prices(self.cfg.index_id)
        h, _, _ = filter_index(np.diff(x1), pair, unconditional_variance(pair.index))
        return h[:-1], float(h[-1])

    def filtered(self, aid):
        return extract_innovations(self.log_prices(self.cfg.index_id), self.log_prices(aid), self.pair(aid))


# ---------------------------------------------------------------- subcommands

def _fit_one(job):
    aid, dxn, dx1, index_fit, est = job
    fit = estimate_pair(dxn, index_fit, est, index_series=dx1)
    return aid, fit


def cmd_estimate(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    est = replace(cfg.estimation, r=cfg.r, seed=asset_seed(cfg.seed, cfg.index_id))
    dx1 = ctx.returns.series(cfg.index_id)
    index_fit = estimate_index(dx1, est)
    if not index_fit.converged:
        raise CliError(f"index fit did not converge: {index_fit.message}")
    jobs = [(aid, ctx.returns.series(aid), dx1, index_fit,
             replace(est, seed=asset_seed(cfg.seed, aid))) for aid in ctx.assets]
    fits = dict(_pmap(_fit_one, jobs))
    rows = {cfg.index_id: dio.ParamRow(block=index_fit.params.index, mu=float(np.mean(dx1)),
                                       shape=index_fit.shapes[0])}
    report = [(cfg.index_id, index_fit.objective, index_fit.iterations, int(index_fit.converged),
               index_fit.min_hessian_eig, int(index_fit.convex))]
    for aid in ctx.assets:
        f = fits[aid]
        rows[aid] = dio.ParamRow(block=f.params.asset, a=f.params.a, lam12=f.params.lam12,
                                 mu=float(np.mean(ctx.returns.series(aid))), shape=f.shapes[1])
        report.append((aid, f.objective, f.iterations, int(f.converged), f.min_hessian_eig, int(f.convex)))
    params_path = ctx.out / "params.json"
    dio.save_params(params_path, rows, cfg.index_id, cfg.r)
    rep_path = ctx.out / "estimate_report.csv"
    dio.write_table(rep_path, ["asset_id", "objective", "iterations", "converged", "min_hessian_eig", "convex"], report)
    return [params_path, rep_path]


def cmd_filter(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    external = dio.load_external_vol(cfg.external_vol) if cfg.external_vol else None
    dates = ctx.returns.dates
    header = ["date", "asset", "h_mhn", "hist_vol"] + (["external_vol"] if external is not None else [])
    rows = []
    h1 = ctx.index_filtered()[0]
    hv1 = dio.rolling_hist_vol(ctx.returns.series(cfg.index_id), cfg.hist_vol_window)
    for t, d in enumerate(dates):
        extra = [external.get((d, cfg.index_id), math.nan)] if external is not None else []
        rows.append([d, cfg.index_id, h1[t], hv1[t]] + extra)
    for aid in ctx.assets:
        path = ctx.filtered(aid)
        hv = dio.rolling_hist_vol(ctx.returns.series(aid), cfg.hist_vol_window)
        for t, d in enumerate(dates):
            extra = [external.get((d, aid), math.nan)] if external is not None else []
            rows.append([d, aid, path.hn[t], hv[t]] + extra)
    out = ctx.out / "volatility.csv"
    dio.write_table(out, header, rows)
    return [out]


def cmd_price(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    sdir = ctx.out / "surfaces"
    sdir.mkdir(exist_ok=True)
    rows = ctx.rows()
    written = []
    header = ["strike", "maturity_periods", "call", "put", "call_iv", "put_iv"]
    targets = [cfg.index_id] + ctx.assets
    for aid in targets:
        if aid == cfg.index_id:
            h_next = ctx.index_filtered()[1]
        else:
            h_next = ctx.filtered(aid).hn_next
        S = float(ctx.panel.series(aid)[-1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            surf = build_surface(S, cfg.r, h_next, rows[aid].block, cfg.moneyness, cfg.maturities)
        body = list(surf.rows())
        csv_path = sdir / f"{aid}.csv"
        dio.write_table(csv_path, header, body)
        json_path = sdir / f"{aid}.json"
        _write_json(json_path, {"asset": aid, "spot": _r12(S), "h_next": _r12(h_next),
                                "cells": [dict(zip(header, [_r12(v) for v in r])) for r in body]})
        written += [csv_path, json_path]
    return written


def _dynamic_weights(model, policy, h, clamp):
    """State-dependent weights for variance states ``h`` of shape (..., T, 1+n)."""
    T = h.shape[-2]
    return np.stack([optimal_weights(h[..., t, :], policy.E[:, t + 1], model, policy.gamma, clamp, t)
                     for t in range(T)], axis=-2)


def cmd_optimize(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    odir = ctx.out / "optimize"
    odir.mkdir(exist_ok=True)
    written = []
    summary = []
    dates = ctx.returns.dates
    for aid in ctx.assets:
        pair = ctx.pair(aid)
        model = MarketModel.from_pairs([pair])
        path = ctx.filtered(aid)
        H = min(cfg.horizon, len(dates))
        y = np.column_stack([ctx.returns.series(cfg.index_id), ctx.returns.series(aid)])[-H:] - cfg.r
        h = np.column_stack([path.h1, path.hn])[-H:]
        covs = np.stack([model.covariance(ht) for ht in h])
        for g in cfg.gammas:
            policy = backward_induction(model, g, H, h_ref=h[0], clamp=cfg.clamp)
            w_dyn = _dynamic_weights(model, policy, h, cfg.clamp)
            w_m = model_merton_weights(model, g)
            if cfg.clamp is not None:
                w_m = np.clip(w_m, *cfg.clamp)
            W_dyn = wealth_path(w_dyn, y, cfg.r, 1.0, covs)
            W_m = wealth_path(w_m, y, cfg.r, 1.0, covs)
            rows = []
            start = len(dates) - H
            row_dates = [ctx.panel.dates[start]] + dates[start:]
            for t in range(H + 1):
                wd = w_dyn[t] if t < H else np.full(2, math.nan)
                rows.append([row_dates[t], wd[0], wd[1], 1.0 - wd.sum(), W_dyn[t],
                             w_m[0], w_m[1], 1.0 - w_m.sum(), W_m[t]])
            p = odir / f"{aid}_gamma{g:g}.csv"
            dio.write_table(p, ["date", "w_index", "w_asset", "cash", "wealth",
                                "merton_w_index", "merton_w_asset", "merton_cash", "merton_wealth"], rows)
            written.append(p)
            summary.append([aid, g, certainty_equivalent(policy, h[0]), W_dyn[-1], W_m[-1]])
    sp = ctx.out / "optimize_summary.csv"
    dio.write_table(sp, ["asset", "gamma", "ce_model", "terminal_dynamic", "terminal_merton"], summary)
    return written + [sp]


def _frontier_rows(points, ids):
    return [[p.target, p.mean, p.risk, int(p.feasible)] + list(p.weights) for p in points]


def cmd_frontier(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    pairs = [ctx.pair(a) for a in ctx.assets]
    model = MarketModel.from_pairs(pairs)
    h = [None] * (len(ctx.assets) + 1)
    for j, aid in enumerate(ctx.assets, start=1):
        fp = ctx.filtered(aid)
        h[0], h[j] = fp.h1_next, fp.hn_next
    rows = ctx.rows()
    shapes = (rows[cfg.index_id].shape,) + tuple(rows[a].shape for a in ctx.assets)
    panel = scenario_panel(model, cfg.scenarios, seed=asset_seed(cfg.seed, "frontier"), h=np.array(h),
                           shapes=shapes, ids=ctx.assets)
    mu, Sigma = panel.mean(), panel.cov()
    sd = np.sqrt(np.diag(Sigma))
    w0 = min_variance(Sigma)
    sd_min = math.sqrt(float(w0 @ Sigma @ w0))
    risk_grid = np.linspace(sd_min, sd.max(), cfg.frontier_points)
    header = ["target", "mean", "risk_measure", "feasible"] + [f"w_{a}" for a in ctx.assets]
    written = []
    doc = {"assets": ctx.assets, "scenarios": cfg.scenarios}
    mk = markowitz_frontier(mu, Sigma, risk_grid)
    p = ctx.out / "frontier_markowitz.csv"
    dio.write_table(p, header, _frontier_rows(mk, ctx.assets))
    written.append(p)
    doc["markowitz"] = [[_r12(v) for v in r] for r in _frontier_rows(mk, ctx.assets)]
    try:
        wt, sharpe = tangency(mu, Sigma, cfg.r)
        doc["tangency"] = {"weights": [_r12(v) for v in wt], "sharpe": _r12(sharpe),
                           "mean": _r12(mu @ wt), "std": _r12(math.sqrt(wt @ Sigma @ wt))}
    except ValueError as exc:
        doc["tangency"] = {"error": str(exc)}
    for level in cfg.cvar_levels:
        base = min_cvar(panel, level)
        grid = np.linspace(base["mean"], mu.max(), cfg.frontier_points)
        pts = cvar_frontier(panel, level, grid)
        name = f"cvar{round(level * 100):d}"
        p = ctx.out / f"frontier_{name}.csv"
        dio.write_table(p, header, _frontier_rows(pts, ctx.assets))
        written.append(p)
        doc[name] = [[_r12(v) for v in r] for r in _frontier_rows(pts, ctx.assets)]
    jp = ctx.out / "frontier.json"
    _write_json(jp, doc)
    return written + [jp]


def cmd_wel(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    out_rows = []
    for aid in ctx.assets:
        model = MarketModel.from_pairs([ctx.pair(aid)])
        y, h = simulate_market(model, cfg.horizon, cfg.wel_paths, seed=asset_seed(cfg.seed, aid),
                               shapes=ctx.shapes(aid))
        for g in cfg.gammas:
            policy = backward_induction(model, g, cfg.horizon, clamp=cfg.clamp)
            w_dyn = _dynamic_weights(model, policy, h, cfg.clamp)
            w_m = model_merton_weights(model, g)
            if cfg.clamp is not None:
                w_m = np.clip(w_m, *cfg.clamp)
            W_dyn = np.exp(portfolio_log_return(w_dyn, y, h, model.a, model.r).sum(axis=1))
            W_m = np.exp(portfolio_log_return(w_m, y, h, model.a, model.r).sum(axis=1))
            rep = wel_report(W_m, W_dyn, UtilitySpec(g))
            out_rows.append([aid, g, rep["wel_raw"], rep["wel_negated"]])
    p = ctx.out / "wel.csv"
    dio.write_table(p, ["asset", "gamma", "wel_raw", "wel_negated"], out_rows)
    return [p]


def cmd_sensitivity(ctx: _Context) -> list[Path]:
    cfg = ctx.cfg
    out_rows = []
    for param in cfg.sensitivity_parameters:
        S, step = [], None
        for aid in ctx.assets:
            fn, theta0 = pair_weight_map(ctx.pair(aid), param, gamma=cfg.wel_gamma_for_sensitivity, T=cfg.horizon)
            rep = sensitivity(fn, theta0, parameter=param)
            S.append(float(rep.S[0]))
            step = rep.step
        total = rmss(S)
        out_rows += [[param, aid, s, total, step] for aid, s in zip(ctx.assets, S)]
    p = ctx.out / "sensitivity.csv"
    dio.write_table(p, ["parameter", "asset", "S_i", "rmss", "step"], out_rows)
    return [p]


COMMANDS = {
    "estimate": cmd_estimate,
    "filter": cmd_filter,
    "price": cmd_price,
    "optimize": cmd_optimize,
    "frontier": cmd_frontier,
    "wel": cmd_wel,
    "sensitivity": cmd_sensitivity,
}


def run_pipeline(subcommand: str, config: RunConfig) -> tuple[int, list[Path]]:
    """Run one stage; returns ``(exit status, artifacts written)``."""
    if subcommand not in COMMANDS:
        raise UsageError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}")
    ctx = _Context(config)
    return 0, COMMANDS[subcommand](ctx)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mhn", description=__doc__)
    p.add_argument("subcommand", help=", ".join(SUBCOMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--assets", help="comma-separated asset ids")
    p.add_argument("--external-vol", help="CSV date,asset_id,vol of comparison volatilities")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        assets = [a.strip() for a in args.assets.split(",") if a.strip()] if args.assets else None
        cfg = RunConfig.from_json(args.config, out_dir=args.out, seed=args.seed, assets=assets,
                                  external_vol=args.external_vol)
        status, artifacts = run_pipeline(args.subcommand, cfg)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every failure is reported as JSON
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "subcommand": args.subcommand, "artifacts": [str(a) for a in artifacts]}))
    return status


if __name__ == "__main__":
    sys.exit(main())
