"""Lévy-driven Ornstein-Uhlenbeck processes and the laws of their increments.

Four families are covered. In the OU-Lévy families (OU-TS, OU-NTS) the driving
Lévy process is tempered stable or normal tempered stable. In the Lévy-OU
families (TS-OU, NTS-OU) those laws are the stationary distribution instead.
A Gaussian OU process (OU-GAUSS) serves as a baseline.

For a time step ``t`` the process evolves as ``X_{s+t} = X_s exp(-b t) + Z_t``.
Everything here describes the law of ``Z_t`` through its log characteristic
function ``Psi_Z(u, t) = log E[exp(i u Z_t)]``: strip of analyticity,
cumulants, activity class, decay envelope and, for finite-activity laws, the
split into a drift, a Bernoulli jump indicator and a jump variable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError, PreconditionError, QuadratureError

__all__ = [
    "Family",
    "TsParams",
    "NtsParams",
    "GaussParams",
    "OuProcessSpec",
    "AnalyticityStrip",
    "ActivityClass",
    "DecayProfile",
    "FaDecomposition",
    "IncrementLaw",
    "ts_characteristic_exponent",
    "nts_characteristic_exponent",
    "driver_exponent",
    "lcf_increment",
    "analyticity_strip",
    "classify",
    "levy_cumulants",
    "cumulants_increment",
    "fa_decomposition",
    "decay_profile",
    "increment_law",
]

GL_NODES = 64
QUAD_RTOL = 1e-10
# below this |w| the tempered-stable kernels are summed as power series
_SERIES_RADIUS = 0.25
_SERIES_TERMS = 40
_CHUNK = 4096
_CHECK_POINTS = 2048


class Family(str, enum.Enum):
    OU_TS = "OU-TS"
    TS_OU = "TS-OU"
    OU_NTS = "OU-NTS"
    NTS_OU = "NTS-OU"
    OU_GAUSS = "OU-GAUSS"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("_", "-")
        for fam in cls:
            if fam.value == key:
                return fam
        raise ParameterError(f"unknown family {name!r}; expected one of {[f.value for f in cls]}")

    @property
    def is_ou_levy(self) -> bool:
        """True when the named law drives the SDE (OU-TS, OU-NTS, OU-GAUSS)."""
        return self in (Family.OU_TS, Family.OU_NTS, Family.OU_GAUSS)


# ---------------------------------------------------------------- parameters


def _check_finite(**vals):
    for k, v in vals.items():
        if not np.isfinite(v):
            raise ParameterError(f"{k} must be finite, got {v!r}")


@dataclass(frozen=True)
class TsParams:
    """Bilateral tempered stable law.

    Parameters
    ----------
    alpha_p, alpha_n : float
        Stability indices of the positive and negative jump sides, < 2.
    beta_p, beta_n : float
        Tempering rates, > 0.
    c_p, c_n : float
        Side intensities, >= 0 and not both zero.
    gamma_c : float
        Mean of the law.
    """

    alpha_p: float
    alpha_n: float
    beta_p: float
    beta_n: float
    c_p: float
    c_n: float
    gamma_c: float = 0.0

    def __post_init__(self):
        for name in ("alpha_p", "alpha_n", "beta_p", "beta_n", "c_p", "c_n", "gamma_c"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _check_finite(alpha_p=self.alpha_p, alpha_n=self.alpha_n, beta_p=self.beta_p,
                      beta_n=self.beta_n, c_p=self.c_p, c_n=self.c_n, gamma_c=self.gamma_c)
        if self.alpha_p >= 2 or self.alpha_n >= 2:
            raise ParameterError("tempered stable indices must be < 2")
        if self.beta_p <= 0 or self.beta_n <= 0:
            raise ParameterError("tempering rates beta_p, beta_n must be > 0")
        if self.c_p < 0 or self.c_n < 0:
            raise ParameterError("intensities c_p, c_n must be >= 0")
        if self.c_p == 0 and self.c_n == 0:
            raise ParameterError("at least one of c_p, c_n must be > 0")

    def sides(self):
        """Active jump sides as (sign, alpha, beta, c) tuples."""
        out = []
        if self.c_p > 0:
            out.append((1.0, self.alpha_p, self.beta_p, self.c_p))
        if self.c_n > 0:
            out.append((-1.0, self.alpha_n, self.beta_n, self.c_n))
        return out

    @property
    def alpha_max(self) -> float:
        return max(a for _, a, _, _ in self.sides())


@dataclass(frozen=True)
class NtsParams:
    """Normal tempered stable law ``theta S + sigma W(S)`` with tempered stable subordinator S.

    ``alpha = 0`` gives the variance gamma law.
    """

    alpha: float
    sigma: float
    kappa: float
    theta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "sigma", "kappa", "theta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _check_finite(alpha=self.alpha, sigma=self.sigma, kappa=self.kappa, theta=self.theta)
        if self.alpha >= 1:
            raise ParameterError("NTS index alpha must be < 1")
        if self.sigma <= 0 or self.kappa <= 0:
            raise ParameterError("sigma and kappa must be > 0")

    @property
    def rate(self) -> float:
        """Subordinator tempering rate (1 - alpha) / kappa."""
        return (1.0 - self.alpha) / self.kappa


@dataclass(frozen=True)
class GaussParams:
    """Brownian driver with volatility ``sigma``."""

    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", float(self.sigma))
        _check_finite(sigma=self.sigma)
        if self.sigma <= 0:
            raise ParameterError("sigma must be > 0")


_PARAM_TYPE = {
    Family.OU_TS: TsParams,
    Family.TS_OU: TsParams,
    Family.OU_NTS: NtsParams,
    Family.NTS_OU: NtsParams,
    Family.OU_GAUSS: GaussParams,
}


@dataclass(frozen=True)
class OuProcessSpec:
    """Mean-reversion speed, family tag and law parameters of an OU process."""

    family: Family
    b: float
    params: TsParams | NtsParams | GaussParams

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "b", float(self.b))
        if not np.isfinite(self.b) or self.b <= 0:
            raise ParameterError(f"mean reversion b must be > 0, got {self.b!r}")
        if not isinstance(self.params, _PARAM_TYPE[fam]):
            raise ParameterError(f"{fam.value} needs {_PARAM_TYPE[fam].__name__}, got {type(self.params).__name__}")
        p = self.params
        if fam is Family.TS_OU and min(a for _, a, _, _ in p.sides()) < 0:
            raise ParameterError("TS-OU requires alpha >= 0 on active sides (self-decomposability)")
        if fam is Family.NTS_OU and p.alpha < 0:
            raise ParameterError("NTS-OU requires alpha >= 0 (self-decomposability)")

    @property
    def alpha(self) -> float:
        """Representative stability index (max over active sides for TS)."""
        p = self.params
        if isinstance(p, TsParams):
            return p.alpha_max
        if isinstance(p, NtsParams):
            return p.alpha
        return 2.0


@dataclass(frozen=True)
class AnalyticityStrip:
    """Open strip ``p_minus < Im(u) < p_plus``; sides may be infinite."""

    p_minus: float
    p_plus: float

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (y > self.p_minus) & (y < self.p_plus)


class ActivityClass(str, enum.Enum):
    FINITE = "FA"
    INFINITE_FINITE_VARIATION = "IA-FV"
    INFINITE_INFINITE_VARIATION = "IA-IV"


@dataclass(frozen=True)
class DecayProfile:
    """Envelope of the characteristic function along the real axis.

    ``kind == "exponential"``: ``|phi(u)| <= B exp(-ell |u|^omega)``.
    ``kind == "power"``: ``|phi(u)| <= B |u|^(-omega)``.
    """

    kind: str
    omega: float
    ell: float | None = None
    B: float = 1.0


# ---------------------------------------------------------- stable kernels


def _clog1p(z):
    """Complex ``log(1 + z)``; real arithmetic away from 0, scipy's log1p near 0."""
    z = np.asarray(z, dtype=complex)
    re, im = 1.0 + z.real, z.imag
    out = np.asarray(np.log(np.hypot(re, im)) + 1j * np.arctan2(im, re))
    small = np.abs(z) < _SERIES_RADIUS
    if small.any():
        out[small] = special.log1p(z[small])
    return out


def _cexpm1(z):
    """Complex ``exp(z) - 1``; real arithmetic away from 0, scipy's expm1 near 0."""
    z = np.asarray(z, dtype=complex)
    m = np.exp(z.real)
    out = np.asarray((m * np.cos(z.imag) - 1.0) + 1j * (m * np.sin(z.imag)))
    small = np.abs(z) < _SERIES_RADIUS
    if small.any():
        out[small] = special.expm1(z[small])
    return out


def _series_coeffs(alpha: float) -> np.ndarray:
    k = np.arange(2, _SERIES_TERMS + 2, dtype=float)
    return np.exp(special.gammaln(k - alpha) - special.gammaln(k + 1.0))


def _horner(coef, w):
    acc = np.zeros_like(w)
    for c in coef[::-1]:
        acc = acc * w + c
    return acc


def _ts_kernel(w, alpha: float):
    """``sum_{k>=2} Gamma(k - alpha) / k! w^k``.

    Equals ``Gamma(-alpha) [(1-w)^alpha - 1 + alpha w]``, with the limits
    ``-log(1-w) - w`` at alpha = 0 and ``(1-w) log(1-w) + w`` at alpha = 1.
    """
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    small = np.abs(w) < _SERIES_RADIUS
    if small.any():
        ws = w[small]
        out[small] = ws * ws * _horner(_series_coeffs(alpha), ws)
    big = ~small
    if big.any():
        wb = w[big] if small.any() else w.ravel()
        # log(1 - w) in real arithmetic: cheaper than complex log1p and exact
        # enough away from w = 0
        re, im = 1.0 - wb.real, -wb.imag
        lr, th = np.log(np.hypot(re, im)), np.arctan2(im, re)
        if alpha == 0.0:
            val = -(lr + 1j * th) - wb
        elif alpha == 1.0:
            val = (1.0 - wb) * (lr + 1j * th) + wb
        else:
            m = np.exp(alpha * lr)
            g = special.gamma(-alpha)
            val = g * ((m * np.cos(alpha * th) - 1.0 + alpha * wb.real)
                       + 1j * (m * np.sin(alpha * th) + alpha * wb.imag))
        if small.any():
            out[big] = val
        else:
            out = val.reshape(w.shape)
    return out


def _ts_kernel_diff(w, r: float, alpha: float):
    """``_ts_kernel(w) - _ts_kernel(r w)`` without cancellation near w = 0."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    small = np.abs(w) < _SERIES_RADIUS
    if small.any():
        ws = w[small]
        k = np.arange(2, _SERIES_TERMS + 2, dtype=float)
        coef = _series_coeffs(alpha) * -np.expm1(k * math.log(r))
        out[small] = ws * ws * _horner(coef, ws)
    big = ~small
    if big.any():
        wb = w[big]
        out[big] = _ts_kernel(wb, alpha) - _ts_kernel(r * wb, alpha)
    return out


def _nts_q(u, p: NtsParams):
    u = np.asarray(u, dtype=complex)
    return (0.5 * p.sigma ** 2 * u * u - 1j * p.theta * u) / p.rate


# ----------------------------------------------------- Lévy exponents


def ts_characteristic_exponent(u, p: TsParams):
    """Log characteristic function of the tempered stable law at time 1.

    Valid for ``-beta_p < Im(u) < beta_n`` (one-sided laws extend to infinity
    on the missing side).
    """
    u = np.asarray(u, dtype=complex)
    out = 1j * u * p.gamma_c
    for sign, alpha, beta, c in p.sides():
        out = out + c * beta ** alpha * _ts_kernel(1j * sign * u / beta, alpha)
    return out


def nts_characteristic_exponent(u, p: NtsParams):
    """Log characteristic function of the normal tempered stable law at time 1."""
    lq = _clog1p(_nts_q(u, p))
    if p.alpha == 0.0:
        return -p.rate * lq
    return -(p.rate / p.alpha) * _cexpm1(p.alpha * lq)


def driver_exponent(spec: OuProcessSpec, u):
    """Log characteristic function at time 1 of the law named by the family tag."""
    p = spec.params
    if isinstance(p, TsParams):
        return ts_characteristic_exponent(u, p)
    if isinstance(p, NtsParams):
        return nts_characteristic_exponent(u, p)
    u = np.asarray(u, dtype=complex)
    return -0.5 * p.sigma ** 2 * u * u


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


_GL_CACHE = {n: _gl(n) for n in (GL_NODES, 2 * GL_NODES)}


def _gl_panels(fn: Callable, u: np.ndarray, b: float, t: float, n: int, f0: complex):
    """Time integral for ``b t > 1`` in ``sigma = b s`` on two panels per argument.

    ``fn(u e^{-sigma})`` changes character near ``sigma = log|u|``, so the
    first panel ends just past that point. The second ends once ``|u| e^{-sigma}``
    is below ``e^{-40}``, where the integrand has settled to ``f0 = fn(0)``.
    """
    x, w = _GL_CACHE[n]
    bt = b * t
    lu = np.log1p(np.abs(u))
    sc = np.minimum(bt, lu + 40.0)
    sm = np.minimum(sc, lu + 2.0)
    acc = f0 * (bt - sc)
    for lo, hi in ((np.zeros_like(sm), sm), (sm, sc)):
        h = 0.5 * (hi - lo)[:, None]
        sig = lo[:, None] + h * (x + 1.0)
        acc = acc + np.sum(fn(u[:, None] * np.exp(-sig)) * (h * w), axis=1)
    return acc / b


def _time_integral(fn: Callable, u: np.ndarray, b: float, t: float):
    """``int_0^t fn(u exp(-b s)) ds`` by 64-node Gauss-Legendre.

    For ``b t > 1`` the rule runs on two panels per argument in ``b s``
    (see ``_gl_panels``). The 128-node rule is evaluated as a refinement
    check on every argument for short inputs and on an evenly strided subset
    (plus the largest ``|u|``) for long FFT grids; relative disagreement
    above 1e-10 raises.
    """
    u = np.asarray(u, dtype=complex).ravel()
    out = np.empty_like(u)
    stride = max(1, u.size // _CHECK_POINTS)
    idx = np.unique(np.append(np.arange(0, u.size, stride), np.argmax(np.abs(u))))
    if b * t > 1.0:
        f0 = complex(fn(np.zeros((1, 1), dtype=complex))[0, 0])
        for s in range(0, u.size, _CHUNK):
            out[s:s + _CHUNK] = _gl_panels(fn, u[s:s + _CHUNK], b, t, GL_NODES, f0)
        ref = _gl_panels(fn, u[idx], b, t, 2 * GL_NODES, f0)
    else:
        x1, w1 = _GL_CACHE[GL_NODES]
        x2, w2 = _GL_CACHE[2 * GL_NODES]
        half = 0.5 * t
        d1 = np.exp(-b * half * (x1 + 1.0))
        d2 = np.exp(-b * half * (x2 + 1.0))
        for s in range(0, u.size, _CHUNK):
            out[s:s + _CHUNK] = half * (fn(u[s:s + _CHUNK, None] * d1) @ w1)
        ref = half * (fn(u[idx, None] * d2) @ w2)
    bad = np.abs(out[idx] - ref) > QUAD_RTOL * np.abs(ref) + 1e-300
    if bad.any():
        j = idx[int(np.argmax(bad))]
        raise QuadratureError(
            f"Gauss-Legendre refinement check failed at u={u[j]!r}: {out[j]!r} vs {ref[int(np.argmax(bad))]!r}")
    return out


# ---------------------------------------------------------------- strips


def analyticity_strip(spec: OuProcessSpec) -> AnalyticityStrip:
    """Strip of analyticity of ``Psi_Z``; it does not depend on the time step."""
    p = spec.params
    if isinstance(p, TsParams):
        lo = -p.beta_p if p.c_p > 0 else -math.inf
        hi = p.beta_n if p.c_n > 0 else math.inf
        return AnalyticityStrip(lo, hi)
    if isinstance(p, NtsParams):
        a = math.sqrt(p.theta ** 2 + 2.0 * p.sigma ** 2 * p.rate)
        return AnalyticityStrip((p.theta - a) / p.sigma ** 2, (p.theta + a) / p.sigma ** 2)
    return AnalyticityStrip(-math.inf, math.inf)


def _check_args(spec, u, dt):
    if not (np.isfinite(dt) and dt > 0):
        raise ParameterError(f"time step must be > 0, got {dt!r}")
    u = np.asarray(u, dtype=complex)
    strip = analyticity_strip(spec)
    if not strip.contains(u.imag).all():
        bad = u.ravel()[~strip.contains(u.imag).ravel()][0]
        raise DomainError(f"Im(u)={bad.imag!r} outside strip ({strip.p_minus}, {strip.p_plus})")
    return u


# ------------------------------------------------------- increment LCF


def lcf_increment(spec: OuProcessSpec, u, dt: float):
    """Log characteristic function ``Psi_Z(u, dt)`` of the OU increment.

    Parameters
    ----------
    spec : OuProcessSpec
    u : array_like of complex
        Arguments inside the strip of analyticity.
    dt : float
        Time step, > 0.

    Returns
    -------
    ndarray of complex, same shape as ``u``.
    """
    u = _check_args(spec, u, dt)
    shape = u.shape
    u = u.ravel()
    fam, b, p = spec.family, spec.b, spec.params
    e = math.exp(-b * dt)
    if fam is Family.OU_GAUSS:
        out = -0.25 * p.sigma ** 2 * (-math.expm1(-2 * b * dt)) / b * u * u
    elif fam is Family.TS_OU:
        out = 1j * u * p.gamma_c * (-math.expm1(-b * dt))
        for sign, alpha, beta, c in p.sides():
            out = out + c * beta ** alpha * _ts_kernel_diff(1j * sign * u / beta, e, alpha)
    elif fam is Family.NTS_OU:
        q2 = _nts_q(u * e, p)
        dq = (0.5 * p.sigma ** 2 * u * u * -math.expm1(-2 * b * dt)
              - 1j * p.theta * u * -math.expm1(-b * dt)) / p.rate
        lr = _clog1p(dq / (1.0 + q2))
        if p.alpha == 0.0:
            out = -p.rate * lr
        else:
            out = -(p.rate / p.alpha) * np.exp(p.alpha * _clog1p(q2)) * _cexpm1(p.alpha * lr)
    else:
        out = _time_integral(lambda v: driver_exponent(spec, v), u, b, dt)
    return out.reshape(shape)


# ------------------------------------------------------------ cumulants


def levy_cumulants(params, kmax: int = 4) -> np.ndarray:
    """Cumulants ``c_1..c_kmax`` of the law at time 1 (index 0 holds c_1)."""
    out = np.zeros(kmax)
    if isinstance(params, TsParams):
        out[0] = params.gamma_c
        for k in range(2, kmax + 1):
            s = 0.0
            for sign, alpha, beta, c in params.sides():
                s += sign ** k * c * beta ** (alpha - k) * math.gamma(k - alpha)
            out[k - 1] = s
    elif isinstance(params, NtsParams):
        a, kap, th, s2 = params.alpha, params.kappa, params.theta, params.sigma ** 2
        out[0] = th
        for k in range(2, kmax + 1):
            s = 0.0
            for n in range(k // 2 + 1):
                s += (math.factorial(k) / (math.factorial(n) * math.factorial(k - 2 * n))
                      * math.gamma(k - a - n) / math.gamma(1 - a)
                      * (kap / (1 - a)) ** (k - 1 - n) * th ** (k - 2 * n) * (s2 / 2) ** n)
            out[k - 1] = s
    else:
        if kmax >= 2:
            out[1] = params.sigma ** 2
    return out


def cumulants_increment(spec: OuProcessSpec, dt: float, kmax: int = 4) -> np.ndarray:
    """Closed-form cumulants ``c_1..c_kmax`` of ``Z_dt``."""
    if not (np.isfinite(dt) and dt > 0):
        raise ParameterError(f"time step must be > 0, got {dt!r}")
    ck = levy_cumulants(spec.params, kmax)
    k = np.arange(1, kmax + 1)
    damp = -np.expm1(-k * spec.b * dt)
    if spec.family.is_ou_levy:
        return damp / (k * spec.b) * ck
    return damp * ck


# -------------------------------------------------------- classification


def classify(spec: OuProcessSpec) -> ActivityClass:
    """Activity class of the increment law (finite activity, or infinite with finite or infinite variation)."""
    fam, p = spec.family, spec.params
    if fam is Family.OU_GAUSS:
        return ActivityClass.INFINITE_INFINITE_VARIATION
    if fam is Family.OU_TS:
        a = p.alpha_max
        if a < 0:
            return ActivityClass.FINITE
        return ActivityClass.INFINITE_FINITE_VARIATION if a < 1 else ActivityClass.INFINITE_INFINITE_VARIATION
    if fam is Family.TS_OU:
        a = p.alpha_max
        if a == 0:
            return ActivityClass.FINITE
        return ActivityClass.INFINITE_FINITE_VARIATION if a < 1 else ActivityClass.INFINITE_INFINITE_VARIATION
    a = p.alpha
    if fam is Family.OU_NTS:
        if a < 0:
            return ActivityClass.FINITE
        return ActivityClass.INFINITE_FINITE_VARIATION if a < 0.5 else ActivityClass.INFINITE_INFINITE_VARIATION
    if a == 0:
        return ActivityClass.FINITE
    return ActivityClass.INFINITE_FINITE_VARIATION if a < 0.5 else ActivityClass.INFINITE_INFINITE_VARIATION


# --------------------------------------------------- finite activity split


@dataclass(frozen=True)
class FaDecomposition:
    """``Z = mu + B V`` with ``B ~ Bernoulli(1 - exp(-lam dt))``.

    ``log E[exp(iuZ)] = i u mu + f(u) - lam dt`` where ``f(u) = lam dt phi_J(u)``
    is the jump exponent; ``phi_V = (exp(f) - 1) / (exp(lam dt) - 1)``.
    """

    lam: float
    mu: float
    dt: float
    jump_exponent: Callable

    @property
    def p_jump(self) -> float:
        return -math.expm1(-self.lam * self.dt)

    def cf_jump(self, u):
        """Characteristic function of the jump variable J."""
        return self.jump_exponent(u) / (self.lam * self.dt)

    def cf_v(self, u):
        """Characteristic function of V, the increment conditional on at least one jump."""
        return _cexpm1(self.jump_exponent(u)) / math.expm1(self.lam * self.dt)

    def log_cf(self, u):
        u = np.asarray(u, dtype=complex)
        return 1j * u * self.mu + self.jump_exponent(u) - self.lam * self.dt


def fa_decomposition(spec: OuProcessSpec, dt: float) -> FaDecomposition:
    """Split a finite-activity increment into drift, jump indicator and jump law.

    Raises
    ------
    PreconditionError
        If the law has infinite activity.
    """
    if classify(spec) is not ActivityClass.FINITE:
        raise PreconditionError(f"{spec.family.value} with alpha={spec.alpha} is not finite activity")
    if not (np.isfinite(dt) and dt > 0):
        raise ParameterError(f"time step must be > 0, got {dt!r}")
    fam, b, p = spec.family, spec.b, spec.params
    one_m_e = -math.expm1(-b * dt)
    strip = analyticity_strip(spec)

    def guard(u):
        u = np.asarray(u, dtype=complex)
        if not strip.contains(u.imag).all():
            raise DomainError(f"argument outside strip ({strip.p_minus}, {strip.p_plus})")
        return u

    if fam is Family.OU_TS:
        sides = p.sides()
        lam_s = [c * beta ** alpha * math.gamma(-alpha) for _, alpha, beta, c in sides]
        lam = sum(lam_s)
        mu = p.gamma_c * one_m_e / b
        for (sign, alpha, beta, _), ls in zip(sides, lam_s):
            mu += sign * ls * alpha * one_m_e / (b * beta)

        def jump(u):
            u = guard(u)

            def integrand(v):
                acc = np.zeros_like(v)
                for (sign, alpha, beta, _), ls in zip(sides, lam_s):
                    acc = acc + ls * np.exp(alpha * _clog1p(-1j * sign * v / beta))
                return acc

            return _time_integral(integrand, u.ravel(), b, dt).reshape(u.shape)

    elif fam is Family.TS_OU:
        sides = p.sides()
        lam = sum(c for _, _, _, c in sides) * b
        mu = p.gamma_c * one_m_e
        for sign, _, beta, c in sides:
            mu -= sign * c / beta * one_m_e

        def jump(u):
            u = guard(u)
            acc = np.zeros_like(u)
            for sign, _, beta, c in sides:
                w = 1j * sign * u / beta
                acc = acc + c * (b * dt + _clog1p(-w * math.exp(-b * dt)) - _clog1p(-w))
            return acc

    elif fam is Family.OU_NTS:
        lam = p.rate / -p.alpha
        mu = 0.0

        def jump(u):
            u = guard(u)
            fn = lambda v: lam * np.exp(p.alpha * _clog1p(_nts_q(v, p)))
            return _time_integral(fn, u.ravel(), b, dt).reshape(u.shape)

    else:  # NTS-OU with alpha = 0: variance gamma stationary law
        lam = 2.0 * b / p.kappa
        mu = 0.0

        def jump(u):
            u = guard(u)
            return p.rate * (2 * b * dt + _clog1p(_nts_q(u * math.exp(-b * dt), p))
                             - _clog1p(_nts_q(u, p)))

    return FaDecomposition(lam=float(lam), mu=float(mu), dt=float(dt), jump_exponent=jump)


# ------------------------------------------------------------ decay


def decay_profile(spec: OuProcessSpec, dt: float) -> DecayProfile:
    """Decay envelope of the characteristic function the CDF engine inverts.

    For finite-activity laws this is the jump variable V of the FA split;
    otherwise it is ``phi_Z`` itself.
    """
    fam, b, p = spec.family, spec.b, spec.params
    if fam is Family.OU_GAUSS:
        return DecayProfile("exponential", 2.0, 0.25 * p.sigma ** 2 * -math.expm1(-2 * b * dt) / b)
    if fam in (Family.OU_TS, Family.TS_OU):
        amax = p.alpha_max
        top = [(alpha, c) for _, alpha, _, c in p.sides() if alpha == amax]
        if fam is Family.OU_TS:
            if amax < 0:
                return DecayProfile("power", -amax)
            if amax == 0:
                return DecayProfile("power", dt * sum(c for _, c in top))
        elif amax == 0:
            return DecayProfile("power", 1.0)
        ell = 0.0
        for alpha, c in top:
            if alpha == 1.0:
                base = c * math.pi / 2
            else:
                base = -c * math.gamma(-alpha) * math.cos(alpha * math.pi / 2)
            damp = -math.expm1(-alpha * b * dt)
            ell += base * damp / (alpha * b) if fam is Family.OU_TS else base * damp
        return DecayProfile("exponential", amax, ell)
    a = p.alpha
    if fam is Family.OU_NTS:
        if a < 0:
            return DecayProfile("power", -2.0 * a)
        if a == 0:
            return DecayProfile("power", 2.0 * dt / p.kappa)
    elif a == 0:
        return DecayProfile("power", 1.0)
    base = p.rate ** (1 - a) * (0.5 * p.sigma ** 2) ** a / a
    damp = -math.expm1(-2 * a * b * dt)
    ell = base * damp / (2 * a * b) if fam is Family.OU_NTS else base * damp
    return DecayProfile("exponential", 2.0 * a, ell)


# ------------------------------------------------------------ bundle


@dataclass(frozen=True)
class IncrementLaw:
    """Everything the CDF engine and the sampler need about ``Z_dt``."""

    spec: OuProcessSpec
    dt: float
    strip: AnalyticityStrip
    activity: ActivityClass
    decay: DecayProfile
    cumulants: np.ndarray
    fa: FaDecomposition | None

    def log_cf(self, u):
        return lcf_increment(self.spec, u, self.dt)

    def cf(self, u):
        return np.exp(self.log_cf(u))

    @property
    def target_cf(self) -> Callable:
        """CF handed to the inversion engine: ``phi_V`` for FA laws, else ``phi_Z``."""
        return self.fa.cf_v if self.fa is not None else self.cf

    @property
    def target_mean(self) -> float:
        if self.fa is None:
            return float(self.cumulants[0])
        return (float(self.cumulants[0]) - self.fa.mu) / self.fa.p_jump


def increment_law(spec: OuProcessSpec, dt: float) -> IncrementLaw:
    if not (np.isfinite(dt) and dt > 0):
        raise ParameterError(f"time step must be > 0, got {dt!r}")
    act = classify(spec)
    fa = fa_decomposition(spec, dt) if act is ActivityClass.FINITE else None
    return IncrementLaw(spec=spec, dt=float(dt), strip=analyticity_strip(spec), activity=act,
                        decay=decay_profile(spec, dt), cumulants=cumulants_increment(spec, dt),
                        fa=fa)
