"""CDF reconstruction from a characteristic function by a shifted FFT sum.

The CDF at ``x`` is recovered from the characteristic function along the
horizontal line ``Im(u) = a`` inside the strip of analyticity::

    P(x) = R_a - exp(a x) / pi * int_0^inf Re[exp(-iux) phi(u + ia) / (i(u + ia))] du

with ``R_a = 0`` for ``a > 0`` and ``1`` for ``a < 0``. A midpoint rule with
step ``h`` and ``N = 2**M`` nodes is evaluated on the grid
``x_j = x_center + (j - N/2) gamma`` with ``gamma h = 2 pi / N`` by one FFT.
The retained monotone part of the grid is turned into a continuous CDF with a
monotone cubic interpolant and exponential tails.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import DegenerateWindowError, ParameterError, TailFitError
from .models import AnalyticityStrip, DecayProfile, IncrementLaw

__all__ = [
    "FftPlan",
    "DiscreteCdf",
    "CdfFunction",
    "select_shift",
    "select_step",
    "make_plan",
    "invert_cf_to_cdf",
    "direct_sum",
    "error_bound",
    "cdf_from_cf",
    "build_cdf",
    "write_cdf_csv",
]

EPS_DISC = 1e-12
MIN_WINDOW = 16
INVERSE_TOL = 1e-12
STRIP_MARGIN = 0.99
INFINITE_SIDE_FACTOR = 10.0
TAIL_FLOOR = 0.5
TAIL_MASS = 1e-12
BUCKETS = 1 << 18
NEWTON_STEPS = 2


# ------------------------------------------------------------------ plan


def _effective_sides(strip: AnalyticityStrip, decay: DecayProfile):
    neg, pos = -strip.p_minus, strip.p_plus
    if not (neg > 0 and pos > 0):
        raise ParameterError(f"strip ({strip.p_minus}, {strip.p_plus}) must contain the real axis")
    if math.isinf(neg) and math.isinf(pos):
        # entire CF: use the scale on which the envelope decays by e
        s = decay.ell ** (-1.0 / decay.omega) if decay.kind == "exponential" else 1.0
        return s, s
    if math.isinf(neg):
        neg = INFINITE_SIDE_FACTOR * pos
    elif math.isinf(pos):
        pos = INFINITE_SIDE_FACTOR * neg
    return neg, pos


def select_shift(strip: AnalyticityStrip, decay: DecayProfile) -> float:
    """Shift ``a`` of the integration line.

    Half (exponential decay) or a quarter (power-law decay) of the wider side
    of the strip, signed towards that side, then clamped to 0.99 of the half
    width so that ``2a`` stays strictly inside the strip.
    """
    neg, pos = _effective_sides(strip, decay)
    factor = 0.5 if decay.kind == "exponential" else 0.25
    if pos >= neg:
        return min(factor * pos, STRIP_MARGIN * 0.5 * pos)
    return -min(factor * neg, STRIP_MARGIN * 0.5 * neg)


def select_step(a: float, decay: DecayProfile, N: int, eps_disc: float = EPS_DISC) -> float:
    """Frequency step ``h`` balancing truncation and discretisation errors."""
    if a == 0:
        raise ParameterError("shift a must be nonzero")
    if decay.kind == "exponential":
        return (2 * math.pi * abs(a) / (decay.ell * N ** decay.omega)) ** (1.0 / (decay.omega + 1.0))
    return 2 * math.pi * abs(a) / math.asinh(1.0 / eps_disc)


@dataclass(frozen=True)
class FftPlan:
    """Grid parameters of one inversion."""

    M: int
    a: float
    h: float
    x_center: float

    @property
    def N(self) -> int:
        return 1 << self.M

    @property
    def gamma(self) -> float:
        return 2 * math.pi / (self.N * self.h)

    @property
    def R_a(self) -> float:
        return 0.0 if self.a > 0 else 1.0

    @property
    def x(self) -> np.ndarray:
        return self.x_center + (np.arange(self.N) - self.N // 2) * self.gamma

    @property
    def u(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h


def make_plan(strip: AnalyticityStrip, decay: DecayProfile, x_center: float, M: int = 16,
              eps_disc: float = EPS_DISC, a: float | None = None, h: float | None = None) -> FftPlan:
    if not (isinstance(M, (int, np.integer)) and 4 <= M <= 26):
        raise ParameterError(f"grid exponent M must be an integer in [4, 26], got {M!r}")
    if a is None:
        a = select_shift(strip, decay)
    elif not strip.contains(2 * a) or a == 0:
        raise ParameterError(f"shift a={a} must be nonzero with 2a inside the strip")
    if h is None:
        h = select_step(a, decay, 1 << M, eps_disc)
    if not (h > 0 and np.isfinite(h)):
        raise ParameterError(f"step h must be positive and finite, got {h!r}")
    return FftPlan(M=int(M), a=float(a), h=float(h), x_center=float(x_center))


# ------------------------------------------------------------- inversion


def _coefficients(cf: Callable, plan: FftPlan) -> np.ndarray:
    u = plan.u
    return cf(u + 1j * plan.a) / (1j * u - plan.a)


def direct_sum(cf: Callable, plan: FftPlan, x) -> np.ndarray:
    """Midpoint-rule CDF at arbitrary points by the O(N) sum per point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = _coefficients(cf, plan)
    u = plan.u
    out = np.empty(x.shape)
    for s in range(0, x.size, 256):
        xs = x[s:s + 256]
        acc = np.exp(-1j * np.outer(xs, u)) @ c
        out[s:s + 256] = plan.R_a - plan.h * np.exp(plan.a * xs) / math.pi * acc.real
    return out


@dataclass(frozen=True)
class DiscreteCdf:
    """Grid CDF values and the retained monotone window ``[lo, hi]`` (inclusive).

    ``dens`` is the exact derivative of the discretised CDF on the grid.
    """

    plan: FftPlan
    x: np.ndarray
    p: np.ndarray
    lo: int
    hi: int
    dens: np.ndarray | None = None

    @property
    def window_x(self) -> np.ndarray:
        return self.x[self.lo:self.hi + 1]

    @property
    def window_p(self) -> np.ndarray:
        return self.p[self.lo:self.hi + 1]

    @property
    def window_dens(self) -> np.ndarray | None:
        return None if self.dens is None else self.dens[self.lo:self.hi + 1]


def _monotone_window(p: np.ndarray, center: int):
    """Longest run of strictly increasing values inside (0, 1); ties prefer the run holding ``center``."""
    inside = (p > 0) & (p < 1)
    step_ok = (np.diff(p) > 0) & inside[:-1] & inside[1:]
    if not step_ok.any():
        return 0, 0
    padded = np.concatenate(([False], step_ok, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)  # run of steps [start, end) covers points start..end
    lengths = ends - starts
    best = lengths.max()
    cands = np.flatnonzero(lengths == best)
    pick = cands[0]
    for c in cands:
        if starts[c] <= center <= ends[c]:
            pick = c
            break
    return int(starts[pick]), int(ends[pick])


def _grid_sum(coef: np.ndarray, plan: FftPlan) -> np.ndarray:
    """``sum_n coef_n exp(-i u_n x_j)`` on the whole grid with one FFT."""
    N = plan.N
    n = np.arange(N)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    d = coef * np.exp(-1j * plan.x_center * plan.u) * sign
    return np.fft.fft(d) * (1j * np.exp(-1j * math.pi * n / N))


def invert_cf_to_cdf(cf: Callable, plan: FftPlan) -> DiscreteCdf:
    """Evaluate the midpoint-rule CDF on the whole grid with one FFT.

    Raises
    ------
    DegenerateWindowError
        If fewer than 16 consecutive grid points are strictly increasing in
        (0, 1), which happens e.g. when a CDF with an atom is inverted without
        first splitting off the atom.
    """
    c = _coefficients(cf, plan)
    x = plan.x
    # d/dx of each term e^{ax} e^{-iux} c_n is -phi(u_n + ia) e^{ax} e^{-iux}
    phi = c * (1j * plan.u - plan.a)
    with np.errstate(over="ignore", invalid="ignore"):
        scale = plan.h * np.exp(plan.a * x) / math.pi
        p = plan.R_a - scale * _grid_sum(c, plan).real
        dens = scale * _grid_sum(phi, plan).real
    p = np.where(np.isfinite(p), p, np.nan)
    lo, hi = _monotone_window(p, plan.N // 2)
    if hi - lo + 1 < MIN_WINDOW:
        raise DegenerateWindowError(
            f"only {hi - lo + 1} monotone CDF points (need {MIN_WINDOW}); a law with an atom "
            "must be inverted through its finite-activity split")
    dens = np.where(np.isfinite(dens), dens, np.nan)
    return DiscreteCdf(plan=plan, x=x, p=p, lo=lo, hi=hi, dens=dens)


def error_bound(plan: FftPlan, decay: DecayProfile, cf: Callable, x) -> np.ndarray:
    """Truncation plus discretisation bound on ``|P_hat(x) - P(x)|``."""
    x = np.asarray(x, dtype=float)
    a, h, U = plan.a, plan.h, plan.N * plan.h
    if decay.kind == "exponential":
        z = decay.ell * U ** decay.omega
        trunc = decay.B * np.exp(a * x) / (math.pi * decay.omega) * math.exp(-z) / z
    else:
        trunc = decay.B * np.exp(a * x) / (math.pi * decay.omega) * U ** (-decay.omega)
    phi2 = float(np.real(cf(np.array([2j * a]))[0]))
    r = 2 * math.pi * abs(a) / h
    disc = (1.0 + np.exp(2 * a * x) * phi2) / (math.exp(r) - math.exp(-r)) if r < 700 else 0.0 * x
    return trunc + disc


# ----------------------------------------------------------- continuous CDF


def _clip_rate(fit: float, cap: float) -> float:
    """Fitted tail rate kept within ``[TAIL_FLOOR cap, cap]``; no cap, no clipping."""
    if math.isinf(cap):
        return fit
    return min(max(fit, TAIL_FLOOR * cap), cap)


def _monotone_slopes(xs: np.ndarray, ps: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Shrink nonnegative knot slopes so the Hermite cubic stays monotone.

    Fritsch-Carlson condition: on each interval with secant ``d`` the ratios
    ``m_k / d`` and ``m_{k+1} / d`` must lie in the circle of radius 3.
    """
    m = m.copy()
    d = np.diff(ps) / np.diff(xs)
    flat = d <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.hypot(m[:-1], m[1:]) / d
        tau = np.where(flat | (r <= 3.0), 1.0, 3.0 / r)
    tau = np.where(flat, 0.0, tau)
    scale = np.ones_like(m)
    scale[:-1] = tau
    scale[1:] = np.minimum(scale[1:], tau)
    return m * scale


class CdfFunction:
    """Monotone cubic interpolant on the retained window with exponential tails.

    Knot slopes are the exact densities of the discretised CDF, shrunk where
    needed to keep each cubic piece monotone.

    Window points with tail mass below ``TAIL_MASS`` are left to the tails.

    Parameters
    ----------
    discrete : DiscreteCdf
    strip : AnalyticityStrip
        Caps the tail decay rates: the left tail by ``p_plus`` and the right
        tail by ``-p_minus``. Fitted rates are also floored at half the cap.
    """

    def __init__(self, discrete: DiscreteCdf, strip: AnalyticityStrip):
        self.discrete = discrete
        self.strip = strip
        xs, ps, ds = discrete.window_x, discrete.window_p, discrete.window_dens
        # beyond TAIL_MASS the grid values are roundoff; the exponential tails
        # take over there so that the tail fit sees resolved values
        keep = (ps >= TAIL_MASS) & (ps <= 1.0 - TAIL_MASS)
        if keep.sum() >= MIN_WINDOW:
            xs, ps = xs[keep], ps[keep]
            ds = None if ds is None else ds[keep]
        if not (0 < ps[0] and ps[-1] < 1):
            raise TailFitError("window boundary CDF values must lie strictly inside (0, 1)")
        self.xs = xs
        self.ps = ps
        self.x_lo, self.x_hi = float(xs[0]), float(xs[-1])
        self.p_lo, self.p_hi = float(ps[0]), float(ps[-1])
        self.q_hi = 1.0 - self.p_hi
        if ds is None or not np.all(np.isfinite(ds)):
            self._pchip = PchipInterpolator(xs, ps, extrapolate=False)
        else:
            slopes = _monotone_slopes(xs, ps, np.maximum(ds, 0.0))
            self._pchip = CubicHermiteSpline(xs, ps, slopes, extrapolate=False)
        cap_l = strip.p_plus
        cap_r = -strip.p_minus
        if math.isinf(cap_l) and not math.isinf(cap_r):
            cap_l = INFINITE_SIDE_FACTOR * cap_r
        if math.isinf(cap_r) and not math.isinf(cap_l):
            cap_r = INFINITE_SIDE_FACTOR * cap_l
        fit_l = math.log(ps[1] / ps[0]) / (xs[1] - xs[0])
        fit_r = math.log((1.0 - ps[-2]) / (1.0 - ps[-1])) / (xs[-1] - xs[-2])
        if not (fit_l > 0 and fit_r > 0 and np.isfinite(fit_l) and np.isfinite(fit_r)):
            raise TailFitError(f"non-positive tail rates ({fit_l}, {fit_r})")
        # noise at the window ends can flatten the fit; the strip bounds the true
        # decay from below, so the fit is kept within [cap / 2, cap]
        self.rate_left = _clip_rate(fit_l, cap_l)
        self.rate_right = _clip_rate(fit_r, cap_r)
        c = self._pchip.c
        self._c0, self._c1, self._c2, self._c3 = (np.ascontiguousarray(c[i]) for i in range(4))
        self._widths = np.diff(xs)
        self._chord_slope = self._widths / np.diff(ps)
        # bucket edges e_m = p_lo + m / scale; draws in bucket m lie between the
        # knots counted at e_m and e_{m+1}, which usually coincide
        nb = BUCKETS
        self._bucket_scale = nb / (self.p_hi - self.p_lo)
        edges = self.p_lo + np.arange(nb + 1) / self._bucket_scale
        cnt = np.searchsorted(ps, edges, side="right") - 1
        self._bucket_lo = cnt[:-1]
        self._bucket_hi = cnt[1:]

    @property
    def plan(self) -> FftPlan:
        return self.discrete.plan

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        left = x < self.x_lo
        right = x > self.x_hi
        mid = ~(left | right)
        out[left] = self.p_lo * np.exp(self.rate_left * (x[left] - self.x_lo))
        out[right] = 1.0 - self.q_hi * np.exp(-self.rate_right * (x[right] - self.x_hi))
        out[mid] = self._pchip(x[mid])
        return out

    def inverse(self, u) -> np.ndarray:
        """Quantile function; interior points satisfy ``|F(x) - u| <= 1e-12``."""
        u = np.asarray(u, dtype=float)
        if u.size == 0:
            return np.empty(u.shape)
        flat = u.ravel()
        lo, hi = flat.min(), flat.max()
        if not (lo > 0 and hi < 1):  # also rejects nan
            raise ParameterError("inverse CDF arguments must lie in (0, 1)")
        if self.p_lo <= lo and hi <= self.p_hi:
            return self._inverse_interior(flat).reshape(u.shape)
        out = np.empty(flat.shape)
        left = flat < self.p_lo
        right = flat > self.p_hi
        mid = ~(left | right)
        out[left] = self.x_lo + np.log(flat[left] / self.p_lo) / self.rate_left
        out[right] = self.x_hi - np.log((1.0 - flat[right]) / self.q_hi) / self.rate_right
        if mid.any():
            out[mid] = self._inverse_interior(flat[mid])
        return out.reshape(u.shape)

    def _locate(self, u: np.ndarray) -> np.ndarray:
        """Index ``k`` with ``ps[k] <= u < ps[k+1]`` via a bucket table in ``p``."""
        ps = self.ps
        b = ((u - self.p_lo) * self._bucket_scale).astype(np.int64)
        np.clip(b, 0, self._bucket_lo.size - 1, out=b)
        k = self._bucket_lo.take(b)
        amb = np.flatnonzero(k != self._bucket_hi.take(b))
        if amb.size:
            k[amb] = np.searchsorted(ps, u[amb], side="right") - 1
        np.clip(k, 0, ps.size - 2, out=k)
        # rounding in the bucket index can misplace draws lying on an edge
        off = np.flatnonzero((ps.take(k) > u) | (ps.take(k + 1) <= u))
        if off.size:
            k[off] = np.clip(np.searchsorted(ps, u[off], side="right") - 1, 0, ps.size - 2)
        return k

    def _inverse_interior(self, u: np.ndarray) -> np.ndarray:
        k = self._locate(u)
        c0, c1, c2, c3 = (c.take(k) for c in (self._c0, self._c1, self._c2, self._c3))
        width = self._widths.take(k)
        # start from the chord, then Newton on the local cubic
        t = (u - c3) * self._chord_slope.take(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(NEWTON_STEPS):
                f = ((c0 * t + c1) * t + c2) * t + c3 - u
                fp = (3.0 * c0 * t + 2.0 * c1) * t + c2
                t -= f / fp
                np.clip(t, 0.0, width, out=t)
        f = ((c0 * t + c1) * t + c2) * t + c3 - u
        bad = ~(np.abs(f) <= INVERSE_TOL)
        if bad.any():
            t[bad] = self._bisect(u[bad], c0[bad], c1[bad], c2[bad], c3[bad], width[bad])
        t += self.xs.take(k)
        return t

    @staticmethod
    def _bisect(u, c0, c1, c2, c3, width):
        lo = np.zeros_like(u)
        hi = width.copy()
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            f = ((c0 * mid + c1) * mid + c2) * mid + c3 - u
            below = f < 0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def cdf_from_cf(cf: Callable, strip: AnalyticityStrip, decay: DecayProfile, x_center: float,
                M: int = 16, eps_disc: float = EPS_DISC, a: float | None = None,
                h: float | None = None) -> CdfFunction:
    plan = make_plan(strip, decay, x_center, M=M, eps_disc=eps_disc, a=a, h=h)
    return CdfFunction(invert_cf_to_cdf(cf, plan), strip)


def build_cdf(law: IncrementLaw, M: int = 16, eps_disc: float = EPS_DISC) -> CdfFunction:
    """CDF of the increment (or of the jump variable V for finite-activity laws)."""
    return cdf_from_cf(law.target_cf, law.strip, law.decay, law.target_mean, M=M, eps_disc=eps_disc)


def write_cdf_csv(path, discrete: DiscreteCdf, window_only: bool = True) -> None:
    """Write ``x,p`` rows with 17 significant digits."""
    if window_only:
        xs, ps = discrete.window_x, discrete.window_p
    else:
        xs, ps = discrete.x, discrete.p
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "p"])
        for x, p in zip(xs, ps):
            w.writerow([f"{x:.16e}", f"{p:.16e}"])
