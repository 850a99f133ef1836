"""Spot model, Monte Carlo prices of European and Asian calls, Fourier reference prices.

The spot is ``S_t = F(0, t) exp(X_t + f_t)`` with ``X_0 = 0`` and the drift
``f_t = -Psi_Z(-i, t)`` chosen so that ``E[S_t] = F(0, t)``. Prices are
undiscounted and quoted as fractions of a unit forward.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import MartingaleError, ParameterError, QuadratureError
from .models import (ActivityClass, OuProcessSpec, _cexpm1, analyticity_strip, classify,
                     fa_decomposition, lcf_increment)
from .sampler import DateGrid, PathMatrix, sample_paths

__all__ = [
    "ForwardCurve",
    "SpotModel",
    "PriceReport",
    "moneyness_panel",
    "martingale_drift",
    "spot_from_state",
    "call_prices",
    "price_european_mc",
    "price_european_lewis",
    "price_asian_mc",
    "asian_payoff_average",
    "error_metrics",
    "write_report_csv",
]

BP = 1e4
MAPE_FLOOR = 1e-6
LEWIS_TOL = 1e-10


@dataclass(frozen=True)
class ForwardCurve:
    """``t -> F(0, t)``; flat at 1 by default."""

    fn: Callable[[float], float] | None = None

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        val = np.ones_like(t) if self.fn is None else np.asarray(self.fn(t), dtype=float)
        if np.any(~(val > 0)):
            raise ParameterError("forward curve must be positive")
        return val


def _check_martingale(spec: OuProcessSpec) -> None:
    strip = analyticity_strip(spec)
    if not strip.p_minus < -1.0:
        raise MartingaleError(
            f"E[exp(X_t)] is infinite: the lower strip bound p_- = {strip.p_minus:g} must be < -1 "
            f"({spec.family.value}; for tempered stable laws this is beta_p > 1)")


def martingale_drift(spec: OuProcessSpec, t: float) -> float:
    """``f_t = -Psi_Z(-i, t)``; zero at ``t = 0``."""
    _check_martingale(spec)
    if t == 0:
        return 0.0
    return float(-lcf_increment(spec, np.array([-1j]), t)[0].real)


@dataclass(frozen=True)
class SpotModel:
    spec: OuProcessSpec
    curve: ForwardCurve = field(default_factory=ForwardCurve)

    def __post_init__(self):
        _check_martingale(self.spec)

    def drift(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([martingale_drift(self.spec, float(s)) for s in t])

    def forward(self, t) -> np.ndarray:
        return self.curve(t)


def spot_from_state(model: SpotModel, x, t: float) -> np.ndarray:
    """``S = F(0, t) exp(x + f_t)``."""
    return model.forward(t) * np.exp(np.asarray(x, dtype=float) + martingale_drift(model.spec, t))


def moneyness_panel(T: float, n: int = 30, half_width: float = 0.2) -> np.ndarray:
    """``n`` equally spaced moneyness values strictly inside ``sqrt(T) (-w, w)``."""
    return math.sqrt(T) * np.linspace(-half_width, half_width, n + 2)[1:-1]


@dataclass
class PriceReport:
    """Prices and MC standard deviations over a moneyness panel."""

    family: str
    alpha: float
    chi: np.ndarray
    price: np.ndarray
    sd: np.ndarray
    ref_price: np.ndarray | None = None
    kind: str = "european"

    @property
    def abs_err_bp(self) -> np.ndarray | None:
        if self.ref_price is None:
            return None
        return np.abs(self.price - self.ref_price) * BP

    def metrics(self) -> dict:
        return error_metrics(self.price, self.ref_price, self.sd)

    @property
    def sd_bar_bp(self) -> float:
        return float(np.mean(self.sd) * BP)


def error_metrics(mc_prices, ref_prices, sds) -> dict:
    """MAX, RMSE and mean SD in bp of forward; MAPE in percent.

    MAPE skips reference prices below 1e-6. Without references only the
    mean SD is returned.
    """
    mc = np.asarray(mc_prices, dtype=float)
    sds = np.asarray(sds, dtype=float)
    if mc.size == 0:
        raise ParameterError("error metrics need at least one price")
    out = {"SDbar_bp": float(np.mean(sds) * BP)}
    if ref_prices is None:
        return out
    ref = np.asarray(ref_prices, dtype=float)
    if ref.shape != mc.shape or sds.shape != mc.shape:
        raise ParameterError("price, reference and SD arrays must have equal length")
    err = np.abs(mc - ref)
    keep = ref > MAPE_FLOOR
    out["MAX_bp"] = float(err.max() * BP)
    out["RMSE_bp"] = float(math.sqrt(np.mean(err ** 2)) * BP)
    out["MAPE_pct"] = float(np.mean(err[keep] / ref[keep]) * 100) if keep.any() else float("nan")
    return out


def call_prices(underlying: np.ndarray, strikes) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of ``(underlying - K)^+`` for each strike."""
    s = np.asarray(underlying, dtype=float)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    n = s.size
    price = np.empty(strikes.size)
    sd = np.empty(strikes.size)
    for i, k in enumerate(strikes):
        pay = np.maximum(s - k, 0.0)
        price[i] = pay.mean()
        sd[i] = pay.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return price, sd


def terminal_spot(model: SpotModel, T: float, n_paths: int, seed: int, M: int = 16,
                  threads: int = 1) -> np.ndarray:
    """``S_T`` from one increment per path (one CDF build)."""
    pm = sample_paths(model.spec, 0.0, DateGrid(np.array([0.0, T])), n_paths, seed, M=M,
                      threads=threads)
    return spot_from_state(model, pm.values[:, 1], T)


def price_european_mc(model: SpotModel, chis: Sequence[float], T: float, n_paths: int, seed: int,
                      M: int = 16, threads: int = 1, reference: bool = True,
                      spot: np.ndarray | None = None) -> PriceReport:
    """European calls ``E[(S_T - K)^+]`` with ``K = F(0,T) e^chi`` on shared paths."""
    if not T > 0:
        raise ParameterError("expiry must be > 0")
    chis = np.atleast_1d(np.asarray(chis, dtype=float))
    if spot is None:
        spot = terminal_spot(model, T, n_paths, seed, M=M, threads=threads)
    F = float(model.forward(T))
    price, sd = call_prices(spot, F * np.exp(chis))
    ref = None
    if reference:
        ref = np.array([price_european_lewis(model, c, T) for c in chis])
    return PriceReport(model.spec.family.value, model.spec.alpha, chis, price, sd, ref)


def price_european_lewis(model: SpotModel, chi: float, T: float, tol: float = LEWIS_TOL) -> float:
    """Reference call price by Fourier integration on the line ``Im(u) = -1/2``.

    ``C = F [1 - e^{chi/2} / pi int_0^inf Re(e^{-iu chi} phi_T(u - i/2)) du / (u^2 + 1/4)]``
    with ``phi_T`` the CF of ``X_T + f_T``.
    """
    spec = model.spec
    f = martingale_drift(spec, T)
    F = float(model.forward(T))
    atom = 0.0
    if classify(spec) is ActivityClass.FINITE:
        # split off the no-jump atom, whose integral is closed form; the rest
        # decays like a power of u and the oscillatory rule converges
        fa = fa_decomposition(spec, T)
        m = fa.mu + f
        w0 = math.exp(-fa.lam * T + 0.5 * m)
        atom = w0 * math.pi * math.exp(-0.5 * abs(m - chi))

        def phi(u):
            z = np.array([u - 0.5j])
            return (np.exp(1j * z * m - fa.lam * T) * _cexpm1(fa.jump_exponent(z)))[0]
    else:
        def phi(u):
            z = u - 0.5j
            return np.exp(lcf_increment(spec, np.array([z]), T)[0] + 1j * z * f)

    def g_re(u):
        return phi(u).real / (u * u + 0.25)

    def g_im(u):
        return phi(u).imag / (u * u + 0.25)

    kw = dict(epsabs=tol, epsrel=0.0, limit=2000)
    if chi == 0.0:
        val, err = integrate.quad(g_re, 0.0, np.inf, **kw)
    else:
        # Re(e^{-iu chi} phi) = cos(u chi) Re phi + sin(u chi) Im phi
        c, ec = integrate.quad(g_re, 0.0, np.inf, weight="cos", wvar=chi, epsabs=tol, limlst=200)
        s, es = integrate.quad(g_im, 0.0, np.inf, weight="sin", wvar=chi, epsabs=tol, limlst=200)
        val, err = c + s, ec + es
    val += atom
    if not (np.isfinite(val) and err < 100 * tol):
        raise QuadratureError(f"Fourier reference integral did not converge (chi={chi}, err={err:g})")
    return F * (1.0 - math.exp(0.5 * chi) / math.pi * val)


def asian_payoff_average(model: SpotModel, pm: PathMatrix, include_start: bool = False) -> np.ndarray:
    """``(1/Q) sum_j S_{t_j}`` over the monitoring dates ``t_1..t_Q`` of the path grid.

    With ``include_start`` the spot at ``t_0`` is fixed as well and the
    average runs over ``Q + 1`` points.
    """
    j0 = 0 if include_start else 1
    t = pm.grid.t[j0:]
    s = np.zeros(pm.n_paths)
    for j, tj in enumerate(t, start=j0):
        s += spot_from_state(model, pm.values[:, j], float(tj))
    return s / t.size


def price_asian_mc(model: SpotModel, chis: Sequence[float], monitoring: DateGrid, n_paths: int,
                   seed: int, M: int = 16, threads: int = 1,
                   paths: PathMatrix | None = None, include_start: bool = False) -> PriceReport:
    """Arithmetic-average Asian calls with ``K = F(0, T) e^chi``, ``T = t_Q``.

    ``monitoring`` starts at ``t_0 = 0``, the valuation date. It is not a
    fixing unless ``include_start`` is set (see :func:`asian_payoff_average`).
    """
    if not isinstance(monitoring, DateGrid):
        monitoring = DateGrid(monitoring)
    if monitoring.t[0] != 0.0:
        raise ParameterError("monitoring grid must start at t_0 = 0")
    chis = np.atleast_1d(np.asarray(chis, dtype=float))
    if paths is None:
        paths = sample_paths(model.spec, 0.0, monitoring, n_paths, seed, M=M, threads=threads)
    avg = asian_payoff_average(model, paths, include_start)
    T = float(monitoring.t[-1])
    price, sd = call_prices(avg, float(model.forward(T)) * np.exp(chis))
    return PriceReport(model.spec.family.value, model.spec.alpha, chis, price, sd, None, kind="asian")


def write_report_csv(dest, reports: Sequence[PriceReport]) -> None:
    """Per-option rows plus one summary row (``chi = ALL``) per report.

    ``dest`` is a path or an open text handle.
    """
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as fh:
            write_report_csv(fh, reports)
        return
    fh = dest
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["family", "alpha", "chi", "price", "sd", "ref_price", "abs_err_bp",
                "MAX_bp", "RMSE_bp", "MAPE_pct", "SDbar_bp"])
    fmt = lambda v: "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.16e}"
    for r in reports:
        err = r.abs_err_bp
        for i, c in enumerate(r.chi):
            w.writerow([r.family, fmt(float(r.alpha)), fmt(float(c)), fmt(float(r.price[i])),
                        fmt(float(r.sd[i])),
                        fmt(None if r.ref_price is None else float(r.ref_price[i])),
                        fmt(None if err is None else float(err[i])), "", "", "", ""])
        m = r.metrics()
        w.writerow([r.family, fmt(float(r.alpha)), "ALL", "", "", "", "",
                    fmt(m.get("MAX_bp")), fmt(m.get("RMSE_bp")), fmt(m.get("MAPE_pct")),
                    fmt(m.get("SDbar_bp"))])
