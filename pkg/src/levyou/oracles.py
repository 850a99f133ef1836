"""Independent reference computations used to cross-check the fast paths.

Nothing here reuses the FFT engine or the sampler. The CDF comes from
QUADPACK oscillatory quadrature and the derivatives of the exponent from
Richardson-extrapolated finite differences. Finite-activity increments are
built jump by jump with numpy's own generator, and the tempered stable
exponent from its Lévy-Khintchine integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .errors import ParameterError, PreconditionError, QuadratureError
from .models import ActivityClass, Family, OuProcessSpec, TsParams, classify

__all__ = [
    "OracleConfig",
    "cdf_direct",
    "cumulants_fd",
    "ts_exponent_levy_khintchine",
    "compound_poisson_sample",
    "sample_cumulants",
    "normal_cdf",
    "black76_call",
]


FD_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class OracleConfig:
    """Tolerances and step ladders of the reference computations."""

    cdf_tol: float = 1e-11
    fd_steps: tuple = (1e-2, 5e-3, 2.5e-3)
    lk_tol: float = 1e-11
    ks_samples: int = 100_000

    def __post_init__(self):
        if not (self.cdf_tol > 0 and self.lk_tol > 0 and self.ks_samples > 0):
            raise ParameterError("oracle tolerances and sample sizes must be positive")
        if not (len(self.fd_steps) >= 2 and all(h > 0 for h in self.fd_steps)):
            raise ParameterError("need at least two positive finite-difference steps")


# ------------------------------------------------------------------- CDF


def _cutoff(env: Callable[[float], float], tol: float) -> float:
    u = 1.0
    while env(u) > tol and u < 1e12:
        u *= 2.0
    return u


def cdf_direct(cf: Callable, a: float, x, tol: float = 1e-11, u_split: float | None = None) -> np.ndarray:
    """CDF by adaptive quadrature of the shifted inversion integral.

    Parameters
    ----------
    cf : callable
        Characteristic function accepting complex arrays.
    a : float
        Shift of the integration line (nonzero, inside the strip).
    x : array_like
        Evaluation points.
    tol : float
        Absolute tolerance on the CDF value.
    u_split : float, optional
        Frequency beyond which the Fourier-integral routine (QAWF) takes
        over from the finite-range oscillatory rule (QAWO). By default the
        point where ``|cf(u + ia) / (u + ia)|`` drops below ``1e-6``, capped at 1e4.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = lambda u: complex(cf(np.array([u + 1j * a]))[0]) / (1j * (u + 1j * a))
    if u_split is None:
        u_split = min(_cutoff(lambda u: abs(g(u)), 1e-6), 1e4)
    far = abs(g(u_split)) > tol * 1e-4
    re = lambda u: g(u).real
    im = lambda u: g(u).imag
    out = np.empty_like(x)
    with warnings.catch_warnings():
        # QUADPACK flags roundoff once the requested accuracy sits at machine
        # level; the result is still the best attainable value
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for i, xi in enumerate(x):
            out[i] = _cdf_direct_point(re, im, a, xi, tol, u_split, far)
    return out


def _cdf_direct_point(re, im, a, xi, tol, u_split, far) -> float:
    scale = math.exp(a * xi) / math.pi
    eps = tol / max(scale, 1e-300)
    kw = dict(epsabs=eps / 4, epsrel=1e-13, limit=4000)
    if xi == 0.0:
        val = integrate.quad(re, 0.0, u_split, **kw)[0]
        if far:
            val += integrate.quad(re, u_split, np.inf, **kw)[0]
    else:
        val = (integrate.quad(re, 0.0, u_split, weight="cos", wvar=xi, **kw)[0]
               + integrate.quad(im, 0.0, u_split, weight="sin", wvar=xi, **kw)[0])
        if far:
            tail = dict(epsabs=eps / 4, limlst=500)
            val += (integrate.quad(re, u_split, np.inf, weight="cos", wvar=xi, **tail)[0]
                    + integrate.quad(im, u_split, np.inf, weight="sin", wvar=xi, **tail)[0])
    if not np.isfinite(val):
        raise QuadratureError(f"oracle CDF integral failed at x={xi}")
    r_a = 0.0 if a > 0 else 1.0
    return r_a - scale * val


def normal_cdf(x, sd: float, mean: float = 0.0) -> np.ndarray:
    return special.ndtr((np.asarray(x, dtype=float) - mean) / sd)


def black76_call(F: float, K, T: float, vol: float) -> np.ndarray:
    """Undiscounted Black-76 call on a forward."""
    K = np.asarray(K, dtype=float)
    s = vol * math.sqrt(T)
    d1 = (np.log(F / K) + 0.5 * s * s) / s
    return F * special.ndtr(d1) - K * special.ndtr(d1 - s)


# ------------------------------------------------------------- cumulants


def cumulants_fd(lcf: Callable, kmax: int = 4, steps=(1e-2, 5e-3, 2.5e-3),
                 imag_tol: float = FD_IMAG_TOL, return_residue: bool = False):
    """Cumulants from central finite differences of the log CF at 0.

    Three step sizes, each half of the previous, are combined by two
    Richardson levels, cancelling the ``h^2`` and ``h^4`` error terms.

    Raises
    ------
    QuadratureError
        If an extrapolated derivative divided by ``i^k`` has an imaginary
        part above ``imag_tol``. ``return_residue`` also returns those parts.
    """
    f = lambda u: complex(lcf(np.array([u], dtype=complex))[0])
    stencils = {
        1: ([-1, 1], [-0.5, 0.5], 1),
        2: ([-1, 0, 1], [1.0, -2.0, 1.0], 2),
        3: ([-2, -1, 1, 2], [-0.5, 1.0, -1.0, 0.5], 3),
        4: ([-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0], 4),
    }
    out = np.empty(kmax)
    resid = np.empty(kmax)
    for k in range(1, kmax + 1):
        pts, wts, order = stencils[k]
        est = []
        for h in steps:
            d = sum(w * f(p * h) for p, w in zip(pts, wts)) / h ** order
            est.append(d / (1j) ** k)
        r1 = [(4 * est[i + 1] - est[i]) / 3 for i in range(len(est) - 1)]
        r2 = [(16 * r1[i + 1] - r1[i]) / 15 for i in range(len(r1) - 1)]
        best = r2[-1] if r2 else r1[-1]
        out[k - 1] = best.real
        resid[k - 1] = best.imag
    if np.any(np.abs(resid) > imag_tol):
        raise QuadratureError(f"finite-difference cumulants are not real: imaginary parts {resid}")
    if return_residue:
        return out, resid
    return out


def ts_exponent_levy_khintchine(u, p: TsParams, tol: float = 1e-11) -> np.ndarray:
    """Tempered stable exponent from its Lévy measure.

    ``psi(u) = i u gamma + int (e^{iux} - 1 - iux 1_{|x|<=1}) nu(dx)`` with
    ``nu(dx) = c_p e^{-beta_p x} x^{-1-alpha_p}`` on x > 0 and its mirror on x < 0,
    and ``gamma`` fixed so the mean equals ``gamma_c``. Real ``u`` only.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))

    def side_integral(uu, alpha, beta, c, sign):
        v = sign * uu
        dens = lambda x: c * math.exp(-beta * x) * x ** (-1.0 - alpha)
        # cos(vx) - 1 and sin(vx) - vx written to avoid cancellation at small x
        re = lambda x: -2.0 * math.sin(0.5 * v * x) ** 2 * dens(x)

        def im_small(x):
            y = v * x
            s = math.sin(y) - y if abs(y) > 1e-3 else -y ** 3 / 6 + y ** 5 / 120
            return s * dens(x)

        im_big = lambda x: math.sin(v * x) * dens(x)
        r = sum(integrate.quad(re, lo, hi, epsabs=tol, epsrel=1e-13, limit=500)[0]
                for lo, hi in ((0, 1), (1, np.inf)))
        i1 = integrate.quad(im_small, 0, 1, epsabs=tol, epsrel=1e-13, limit=500)[0]
        i2 = integrate.quad(im_big, 1, np.inf, epsabs=tol, epsrel=1e-13, limit=500)[0]
        return r + 1j * (i1 + i2)

    # drift: gamma = gamma_c - int_{|x|>1} x nu(dx)
    gamma = p.gamma_c
    for sign, alpha, beta, c in p.sides():
        big = integrate.quad(lambda x: x * c * math.exp(-beta * x) * x ** (-1.0 - alpha), 1, np.inf,
                             epsabs=tol, epsrel=1e-13)[0]
        gamma -= sign * big
    out = np.empty(u.shape, dtype=complex)
    for i, uu in enumerate(u):
        acc = 1j * uu * gamma
        for sign, alpha, beta, c in p.sides():
            acc += side_integral(uu, alpha, beta, c, sign)
        out[i] = acc
    return out


# ---------------------------------------------------- compound Poisson


def compound_poisson_sample(spec: OuProcessSpec, dt: float, n: int, seed: int,
                            return_jumps: bool = False):
    """Exact draws of a finite-activity OU increment, one jump at a time.

    Jump arrival times are uniform on ``[0, dt]`` and every jump is damped by
    ``exp(-b (dt - tau))``. Jump laws:

    * OU-TS, alpha < 0: Gamma(-alpha, rate beta) per side, intensity
      ``c beta^alpha Gamma(-alpha)``; the driver drift is fixed so the driver
      mean equals ``gamma_c``.
    * OU-NTS, alpha < 0: subordinator jump ``s ~ Gamma(-alpha, rate (1-alpha)/kappa)``
      mapped to ``theta s + sigma sqrt(s) N(0,1)``, intensity ``(1-alpha)/(kappa |alpha|)``.
    * TS-OU, alpha = 0 (gamma OU): background driving process with intensity
      ``c b`` per side and Exp(beta) jumps; stationary mean ``gamma_c``.
    * NTS-OU, alpha = 0 (variance gamma OU): two such gamma sides with rates
      from the factorisation ``1 - i theta kappa u + sigma^2 kappa u^2 / 2``.
    """
    if classify(spec) is not ActivityClass.FINITE:
        raise PreconditionError("compound Poisson oracle needs a finite-activity law")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6F7261636C65]))
    b, p, fam = spec.b, spec.params, spec.family
    out = np.zeros(n)
    njumps = np.zeros(n, dtype=np.int64)

    def add_side(rate, draw_size, sign=1.0):
        k = rng.poisson(rate * dt, size=n)
        tot = int(k.sum())
        if tot == 0:
            return
        owner = np.repeat(np.arange(n), k)
        tau = rng.uniform(0.0, dt, size=tot)
        jumps = sign * draw_size(tot) * np.exp(-b * (dt - tau))
        np.add.at(out, owner, jumps)
        np.add.at(njumps, owner, 1)

    one_m_e = -math.expm1(-b * dt)
    if fam is Family.OU_TS:
        drift = p.gamma_c
        for sign, alpha, beta, c in p.sides():
            lam = c * beta ** alpha * math.gamma(-alpha)
            drift -= sign * lam * (-alpha) / beta
            add_side(lam, lambda m, a=alpha, be=beta: rng.gamma(-a, 1.0 / be, size=m), sign)
        out += drift * one_m_e / b
    elif fam is Family.OU_NTS:
        rate = p.rate
        lam = rate / -p.alpha

        def nts_jump(m):
            s = rng.gamma(-p.alpha, 1.0 / rate, size=m)
            return p.theta * s + p.sigma * np.sqrt(s) * rng.standard_normal(m)

        add_side(lam, nts_jump)
    elif fam is Family.TS_OU:
        shift = p.gamma_c
        for sign, _, beta, c in p.sides():
            shift -= sign * c / beta
            add_side(c * b, lambda m, be=beta: rng.exponential(1.0 / be, size=m), sign)
        out += shift * one_m_e
    else:
        # 1 - i theta kappa u + sigma^2 kappa u^2/2 = (1 - iu/eta_p)(1 + iu/eta_n)
        s2k = 0.5 * p.sigma ** 2 * p.kappa
        tk = p.theta * p.kappa
        d = math.sqrt(tk * tk + 4.0 * s2k)
        inv_p = 0.5 * (tk + d)
        inv_n = 0.5 * (d - tk)
        for sign, inv_eta in ((1.0, inv_p), (-1.0, inv_n)):
            add_side(b / p.kappa, lambda m, s=inv_eta: rng.exponential(s, size=m), sign)
    if return_jumps:
        return out, njumps
    return out


# --------------------------------------------------- sample statistics


def sample_cumulants(x, kmax: int = 4, batches: int = 100):
    """Unbiased k-statistics and their standard errors from batch means.

    Returns
    -------
    est : ndarray
        k-statistics of the full sample.
    se : ndarray
        Standard error of each estimate, from the spread of per-batch
        k-statistics across ``batches`` equal batches.
    """
    x = np.asarray(x, dtype=float).ravel()
    est = np.array([stats.kstat(x, k) for k in range(1, kmax + 1)])
    m = x.size // batches
    per = np.array([[stats.kstat(x[i * m:(i + 1) * m], k) for k in range(1, kmax + 1)]
                    for i in range(batches)])
    se = per.std(axis=0, ddof=1) / math.sqrt(batches)
    return est, se
