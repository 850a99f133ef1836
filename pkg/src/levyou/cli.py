"""Command-line front end.

Subcommands: ``cumulants``, ``cdf``, ``simulate``, ``price european``,
``price asian``, ``bench`` and ``verify``. Every command reads a TOML or JSON
configuration (see :mod:`levyou.config`) and writes CSV to ``--out``, to the
path named in the ``[output]`` section, or to stdout.

Exit codes: 0 when every check passes, 2 when a numerical check fails, 1 for
configuration or runtime errors. ``LEVYOU_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import math
import os
import sys
import time

import numpy as np
from scipy import stats

from . import oracles
from .cdf import DiscreteCdf, cdf_from_cf, invert_cf_to_cdf, make_plan
from .config import RunConfig, load_config
from .errors import ConfigError, DegenerateWindowError, LevyOuError
from .models import (ActivityClass, Family, cumulants_increment, increment_law,
                     levy_cumulants)
from .pricing import (SpotModel, asian_payoff_average, call_prices, moneyness_panel,
                      price_asian_mc, price_european_mc, terminal_spot, write_report_csv)
from .sampler import (DateGrid, build_increment_sampler, clear_cache, sample_gaussian_ou,
                      sample_increments, sample_paths, write_paths_csv)

log = logging.getLogger("levyou")

Z_THRESHOLD = 5.0
SD_THRESHOLD = 4.0
ORACLE_TOL = 1e-9
GAUSS_TOL = 1e-12


def _f(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (str, bool)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


class _Failed(Exception):
    """A numerical acceptance check did not pass (exit code 2)."""


# ----------------------------------------------------------- plumbing


def _setup_logging():
    level = os.environ.get("LEVYOU_LOG", "WARNING").upper()
    num = getattr(logging, level, None)
    if not isinstance(num, int):
        try:
            num = int(level)
        except ValueError:
            num = logging.WARNING
    logging.basicConfig(level=num, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise ConfigError("--config <path> is required")
    cfg = load_config(args.config)
    ex, eng = cfg.experiment, cfg.engine
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        ex.seed = args.seed
    if getattr(args, "paths", None) is not None:
        ex.n_paths = args.paths
    if getattr(args, "grid_exp", None) is not None:
        eng.M = args.grid_exp
    if getattr(args, "threads", None) is not None:
        ex.threads = args.threads
    if not 4 <= eng.M <= 26:
        raise ConfigError(f"grid exponent M must lie in [4, 26], got {eng.M}")
    if ex.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


@contextlib.contextmanager
def _sink(args, cfg: RunConfig, key: str = "csv"):
    path = getattr(args, "out", None) or cfg.output.get(key)
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_f(v) for v in r])


def _grid(cfg: RunConfig, default_T=None, default_Q=None) -> DateGrid:
    ex = cfg.experiment
    if ex.dates is not None:
        t = ex.dates if ex.dates[0] == 0.0 else [0.0] + list(ex.dates)
        return DateGrid(np.array(t))
    T = ex.T if ex.T is not None else default_T
    Q = ex.Q if ex.Q is not None else default_Q
    if T is None:
        return DateGrid(np.array([0.0, ex.dt]))
    return DateGrid.uniform(T, Q or 1)


# ----------------------------------------------------------- commands


def cmd_cumulants(args) -> int:
    cfg = _load(args)
    ex, spec = cfg.experiment, cfg.spec
    if ex.n_paths < 200:
        raise ConfigError("cumulant check needs n_paths >= 200 (100 batches)")
    z = sample_increments(spec, ex.dt, ex.n_paths, ex.seed, M=cfg.engine.M, threads=ex.threads)
    est, se = oracles.sample_cumulants(z)
    exact = cumulants_increment(spec, ex.dt)
    rows, ok = [], True
    for k in range(4):
        zk = (est[k] - exact[k]) / se[k] if se[k] > 0 else 0.0
        ok &= abs(zk) <= Z_THRESHOLD
        rows.append((k + 1, exact[k], est[k], se[k], zk))
    with _sink(args, cfg) as fh:
        _write_rows(fh, ["k", "analytic", "mc", "se", "z"], rows)
    if not ok:
        raise _Failed(f"sample cumulant beyond {Z_THRESHOLD} standard errors")
    return 0


def _atom_message(law, disc: DiscreteCdf) -> str:
    fa = law.fa
    atom = math.exp(-fa.lam * fa.dt)
    x, p = disc.x, disc.p
    j = int(np.clip(np.searchsorted(x, fa.mu), 2, x.size - 3))
    jump = float(np.nan_to_num(p[j + 2] - p[j - 2]))
    return (f"{law.spec.family.value} alpha={law.spec.alpha} has finite activity: its increment "
            f"has an atom of mass {atom:.6g} at mu={fa.mu:.6g} (reconstructed CDF jumps by "
            f"{jump:.6g} over four grid steps), so no continuous monotone window exists "
            f"[M={disc.plan.M}, a={disc.plan.a:.6g}, h={disc.plan.h:.6g}]. "
            "Rerun with --fa-decompose to invert the conditional jump law phi_V instead.")


def cmd_cdf(args) -> int:
    cfg = _load(args)
    spec, eng, ex = cfg.spec, cfg.engine, cfg.experiment
    law = increment_law(spec, ex.dt)
    fa = law.activity is ActivityClass.FINITE
    if fa and not args.fa_decompose:
        plan = make_plan(law.strip, law.decay, law.cumulants[0], M=eng.M, eps_disc=eng.eps_disc,
                         a=eng.a, h=eng.h)
        disc = invert_cf_to_cdf(law.cf, plan)  # may already fail on its own
        raise DegenerateWindowError(_atom_message(law, disc))
    cdf = cdf_from_cf(law.target_cf, law.strip, law.decay, law.target_mean, M=eng.M,
                      eps_disc=eng.eps_disc, a=eng.a, h=eng.h)
    disc, plan = cdf.discrete, cdf.plan
    print(f"# {spec.family.value} alpha={spec.alpha} dt={ex.dt:.17g} target={'V' if fa else 'Z'} "
          f"M={plan.M} a={plan.a:.17g} h={plan.h:.17g} window=[{cdf.x_lo:.17g}, {cdf.x_hi:.17g}] "
          f"points={disc.hi - disc.lo + 1}", file=sys.stderr)
    with _sink(args, cfg, "cdf_csv") as fh:
        _write_rows(fh, ["x", "p"], zip(disc.window_x, disc.window_p))
    if args.check_oracle:
        xs, ps = disc.window_x, disc.window_p
        idx = np.unique(np.linspace(0, xs.size - 1, ex.oracle_points).round().astype(int))
        if spec.family is Family.OU_GAUSS:
            sd = math.sqrt(law.cumulants[1])
            err = np.abs(ps - oracles.normal_cdf(xs, sd))
            tol = GAUSS_TOL
        else:
            ref = oracles.cdf_direct(law.target_cf, plan.a, xs[idx])
            err = np.abs(ps[idx] - ref)
            tol = ORACLE_TOL
        print(f"# oracle max |P_hat - P| = {err.max():.3e} over {err.size} points (tol {tol:g})",
              file=sys.stderr)
        if err.max() > tol:
            raise _Failed(f"CDF deviates from the oracle by {err.max():.3e}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    ex = cfg.experiment
    grid = _grid(cfg)
    pm = sample_paths(cfg.spec, ex.x0, grid, ex.n_paths, ex.seed, M=cfg.engine.M, threads=ex.threads)
    path = getattr(args, "out", None) or cfg.output.get("paths_csv") or cfg.output.get("csv")
    if path:
        write_paths_csv(path, pm)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["path_id", "t", "x"])
        for p in range(pm.n_paths):
            for tj, xj in zip(grid.t, pm.values[p]):
                w.writerow([p, _f(tj), _f(xj)])
    return 0


def cmd_price(args) -> int:
    cfg = _load(args)
    ex, eng = cfg.experiment, cfg.engine
    model = SpotModel(cfg.spec)
    failures = []
    if args.kind == "european":
        T = ex.T if ex.T is not None else ex.dt
        chis = np.array(ex.chi) if ex.chi is not None else moneyness_panel(T, ex.n_chi)
        spot = terminal_spot(model, T, ex.n_paths, ex.seed, M=eng.M, threads=ex.threads)
        rep = price_european_mc(model, chis, T, ex.n_paths, ex.seed, spot=spot)
        mean_sd = spot.std(ddof=1) / math.sqrt(spot.size)
        dev = abs(spot.mean() - float(model.forward(T)))
        if dev > SD_THRESHOLD * mean_sd:
            failures.append(f"martingale: |E[S_T] - F| = {dev:.3e} > 4 SD ({mean_sd:.3e})")
        m = rep.metrics()
        print(f"# {rep.family} alpha={rep.alpha}: MAX {m['MAX_bp']:.4f} bp, RMSE {m['RMSE_bp']:.4f} bp, "
              f"MAPE {m['MAPE_pct']:.4f} %, SD-bar {m['SDbar_bp']:.4f} bp", file=sys.stderr)
        if ex.rmse_threshold_bp is not None and m["RMSE_bp"] > ex.rmse_threshold_bp:
            failures.append(f"RMSE {m['RMSE_bp']:.4f} bp above {ex.rmse_threshold_bp} bp")
    else:
        grid = _grid(cfg, default_T=1.0, default_Q=12)
        chis = np.array(ex.chi) if ex.chi is not None else np.array([0.2, 0.0, -0.2])
        pm = sample_paths(cfg.spec, 0.0, grid, ex.n_paths, ex.seed, M=eng.M, threads=ex.threads)
        rep = price_asian_mc(model, chis, grid, ex.n_paths, ex.seed, paths=pm, include_start=ex.fix_t0)
        zero, zero_sd = call_prices(asian_payoff_average(model, pm, ex.fix_t0), [0.0])
        expect = float(np.mean(model.forward(grid.t[0 if ex.fix_t0 else 1:])))
        if abs(zero[0] - expect) > SD_THRESHOLD * zero_sd[0]:
            failures.append(f"strike-0 Asian {zero[0]:.6f} differs from {expect:.6f} by more than 4 SD")
        for c, p, s in zip(rep.chi, rep.price, rep.sd):
            print(f"# chi={c:+.4f} price {100 * p:.4f} % SD {1e4 * s:.4f} bp", file=sys.stderr)
        if ex.target_price is not None:
            band = (ex.target_band_bp or 0.0) * 1e-4
            if abs(rep.price[0] - ex.target_price) > band:
                failures.append(f"price {rep.price[0]:.6f} outside {ex.target_price} +- {band:.2e}")
    with _sink(args, cfg) as fh:
        write_report_csv(fh, [rep])
    if failures:
        raise _Failed("; ".join(failures))
    return 0


def cmd_bench(args) -> int:
    cfg = _load(args)
    ex, spec = cfg.experiment, cfg.spec
    n = ex.n_paths
    if n <= 0:
        raise ConfigError("bench needs n_paths >= 1")
    clear_cache()
    t0 = time.perf_counter()
    build_increment_sampler(spec, ex.dt, cfg.engine.M)
    t1 = time.perf_counter()
    sample_increments(spec, ex.dt, n, ex.seed, M=cfg.engine.M, threads=ex.threads)
    t2 = time.perf_counter()
    sigma = math.sqrt(levy_cumulants(spec.params, 2)[1]) if spec.family is not Family.OU_GAUSS \
        else spec.params.sigma
    grid = DateGrid(np.array([0.0, ex.dt]))
    t3 = time.perf_counter()
    sample_gaussian_ou(spec.b, sigma, 0.0, grid, n, ex.seed)
    t4 = time.perf_counter()
    build, samp, gauss = t1 - t0, t2 - t1, t4 - t3
    rows = [("fgmc", n, build, samp, build + samp),
            ("gaussian", n, 0.0, gauss, gauss)]
    with _sink(args, cfg) as fh:
        _write_rows(fh, ["method", "n", "build_s", "sample_s", "total_s"], rows)
        _write_rows(fh, ["metric", "value"], [("sample_ratio", samp / gauss),
                                              ("build_fraction", build / (build + samp))])
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    spec, ex, eng = cfg.spec, cfg.experiment, cfg.engine
    law = increment_law(spec, ex.dt)
    checks = []

    def check(name, value, threshold, ok):
        checks.append((name, value, threshold, "PASS" if ok else "FAIL"))

    fd = oracles.cumulants_fd(law.log_cf)
    scale = max(abs(law.cumulants[1]), 1e-300)
    err = np.max(np.abs(fd - law.cumulants) / np.maximum(np.abs(law.cumulants), scale))
    check("cumulants_fd_vs_analytic", err, 1e-6, err <= 1e-6)

    u = np.linspace(-50, 50, 401)
    phi = law.cf(u)
    herm = float(np.max(np.abs(phi - np.conj(law.cf(-u)))))
    check("hermitian_symmetry", herm, 1e-14, herm <= 1e-14)
    mod = float(np.max(np.abs(phi)))
    check("cf_modulus_le_1", mod, 1.0, mod <= 1.0 + 1e-14)

    cdf = cdf_from_cf(law.target_cf, law.strip, law.decay, law.target_mean, M=eng.M,
                      eps_disc=eng.eps_disc, a=eng.a, h=eng.h)
    xs, ps = cdf.discrete.window_x, cdf.discrete.window_p
    idx = np.unique(np.linspace(0, xs.size - 1, ex.oracle_points).round().astype(int))
    if spec.family is Family.OU_GAUSS:
        dev = float(np.max(np.abs(ps - oracles.normal_cdf(xs, math.sqrt(law.cumulants[1])))))
        check("cdf_vs_normal", dev, GAUSS_TOL, dev <= GAUSS_TOL)
    else:
        dev = float(np.max(np.abs(ps[idx] - oracles.cdf_direct(law.target_cf, cdf.plan.a, xs[idx]))))
        check("cdf_vs_quadrature", dev, ORACLE_TOL, dev <= ORACLE_TOL)
    inside = xs[0] < law.target_mean < xs[-1]
    check("window_contains_mean", float(inside), 1.0, inside)

    if law.fa is not None:
        fa = law.fa
        lhs = math.exp(-fa.lam * fa.dt) + fa.p_jump * fa.cf_v(u)
        rhs = np.exp(law.log_cf(u) - 1j * u * fa.mu)
        split = float(np.max(np.abs(lhs - rhs)))
        check("fa_split_identity", split, 1e-12, split <= 1e-12)
        n = ex.ks_samples
        z, jumps = sample_increments(spec, ex.dt, n, ex.seed, M=eng.M, return_jumps=True)
        ref = oracles.compound_poisson_sample(spec, ex.dt, n, ex.seed + 1)
        ks = stats.ks_2samp(np.round(z, 12), np.round(ref, 12))
        check("ks_vs_compound_poisson_pvalue", ks.pvalue, 0.01, ks.pvalue >= 0.01)
        p0 = math.exp(-fa.lam * fa.dt)
        frac = float(np.mean(jumps == 0))
        zs = abs(frac - p0) / math.sqrt(p0 * (1 - p0) / n)
        check("no_jump_frequency_z", zs, SD_THRESHOLD, zs <= SD_THRESHOLD)

    try:
        model = SpotModel(spec)
    except LevyOuError:
        model = None
    if model is not None:
        s = terminal_spot(model, ex.dt, ex.n_paths, ex.seed, M=eng.M, threads=ex.threads)
        zm = abs(s.mean() - 1.0) / (s.std(ddof=1) / math.sqrt(s.size))
        check("martingale_z", zm, SD_THRESHOLD, zm <= SD_THRESHOLD)

    with _sink(args, cfg) as fh:
        _write_rows(fh, ["check", "value", "threshold", "result"], checks)
    failed = [c[0] for c in checks if c[3] == "FAIL"]
    if failed:
        raise _Failed("failed checks: " + ", ".join(failed))
    return 0


# ----------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="TOML or JSON run configuration")
    p.add_argument("--seed", type=int, default=d, help="override experiment.seed (u64)")
    p.add_argument("--paths", type=int, default=d, help="override experiment.n_paths")
    p.add_argument("--grid-exp", dest="grid_exp", type=int, default=d, help="FFT grid exponent M")
    p.add_argument("--threads", type=int, default=d, help="worker threads (results unchanged)")
    p.add_argument("--out", default=d, help="CSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levyou", description=__doc__.splitlines()[0])
    _common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cumulants", help="analytic vs Monte Carlo cumulants k=1..4")
    _common(p, True)
    p.set_defaults(func=cmd_cumulants)

    p = sub.add_parser("cdf", help="dump the reconstructed CDF window")
    _common(p, True)
    p.add_argument("--fa-decompose", action="store_true",
                   help="invert phi_V of the finite-activity split instead of phi_Z")
    p.add_argument("--check-oracle", action="store_true",
                   help="compare with the quadrature oracle (normal CDF for Gaussian OU)")
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("simulate", help="simulate paths, CSV path_id,t,x")
    _common(p, True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("price", help="price European or Asian calls")
    _common(p, True)
    p.add_argument("kind", choices=["european", "asian"])
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("bench", help="time single-increment sampling vs the Gaussian baseline")
    _common(p, True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="oracle cross-checks, pass/fail CSV")
    _common(p, True)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except _Failed as exc:
        print(f"levyou: check failed: {exc}", file=sys.stderr)
        return 2
    except (LevyOuError, OSError) as exc:
        print(f"levyou: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
