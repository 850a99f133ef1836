import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from levyou.cdf import select_shift
from levyou.errors import DomainError, ParameterError, PreconditionError
from levyou.models import (ActivityClass, Family, GaussParams, NtsParams, OuProcessSpec, TsParams,
                           analyticity_strip, classify, cumulants_increment, decay_profile,
                           driver_exponent, fa_decomposition, lcf_increment,
                           nts_characteristic_exponent, ts_characteristic_exponent)
from levyou.oracles import cumulants_fd, ts_exponent_levy_khintchine

from tables import B_NTS, B_TS, DT, FINITE_ACTIVITY_ROWS, INFINITE_ACTIVITY_ROWS, make_spec, \
    nts_params, ts_params

ALL_ROWS = INFINITE_ACTIVITY_ROWS + FINITE_ACTIVITY_ROWS


def _specs(theta=0.0):
    out = []
    for fam, a in ALL_ROWS:
        out.append(make_spec(fam, a, theta if "NTS" in fam else 0.0))
    out.append(OuProcessSpec("OU-GAUSS", 0.1, GaussParams(1.0)))
    return out


SPECS = _specs() + [make_spec("OU-NTS", 0.4, 0.1), make_spec("NTS-OU", 0.6, 0.1)]
SPEC_IDS = [f"{s.family.value}-{s.alpha:g}" + ("-asym" if getattr(s.params, "theta", 0) else "")
            for s in SPECS]


# ------------------------------------------------------------ exponents


def test_exponents_vanish_at_origin():
    assert ts_characteristic_exponent(0.0, ts_params(0.4)) == 0
    assert nts_characteristic_exponent(0.0, nts_params(0.2)) == 0
    for s in SPECS:
        assert lcf_increment(s, np.array([0.0]), DT)[0] == 0


def test_ts_exponent_matches_levy_khintchine():
    p = ts_params(0.4)
    got = ts_characteristic_exponent(np.array([1.0]), p)
    ref = ts_exponent_levy_khintchine(np.array([1.0]), p)
    assert abs(got[0] - ref[0]) < 1e-8


@pytest.mark.parametrize("alpha", [1.6, 1.0, 0.5, 0.0, -1.0])
def test_ts_exponent_matches_levy_khintchine_other_indices(alpha):
    p = TsParams(alpha, alpha, 2.5, 3.5, 0.5, 1.0, 0.2)
    u = np.array([-3.0, 0.7, 2.0])
    np.testing.assert_allclose(ts_characteristic_exponent(u, p), ts_exponent_levy_khintchine(u, p),
                               atol=1e-8, rtol=0)


def test_ts_first_cumulant_is_gamma_c():
    p = ts_params(0.4, gamma_c=0.3)
    h = 1e-4
    d = (ts_characteristic_exponent(h, p) - ts_characteristic_exponent(-h, p)) / (2 * h)
    assert abs((-1j * d).real - 0.3) < 1e-8


def test_ts_alpha_one_and_zero_are_limits():
    u = np.array([0.3 + 0.1j, -2.0, 5.0 - 1.0j])
    for a in (0.0, 1.0):
        exact = ts_characteristic_exponent(u, TsParams(a, a, 2.5, 3.5, 0.5, 1.0))
        lo = ts_characteristic_exponent(u, TsParams(a - 1e-7, a - 1e-7, 2.5, 3.5, 0.5, 1.0))
        hi = ts_characteristic_exponent(u, TsParams(a + 1e-7, a + 1e-7, 2.5, 3.5, 0.5, 1.0))
        np.testing.assert_allclose(exact, 0.5 * (lo + hi), rtol=1e-6, atol=1e-9)


def test_nts_symmetric_exponent_is_real_and_even():
    p = nts_params(0.2)
    v = nts_characteristic_exponent(np.array([1.7, -1.7]), p)
    assert np.all(np.abs(v.imag) < 1e-15)
    assert v[0] == pytest.approx(v[1], abs=1e-15)


def test_nts_second_cumulant_is_sigma_squared():
    p = nts_params(0.2)
    c = cumulants_fd(lambda u: nts_characteristic_exponent(u, p), kmax=2)
    assert c[1] == pytest.approx(0.040401, rel=1e-8)


def test_nts_alpha_zero_is_variance_gamma_limit():
    u = np.array([1.0, -4.0 + 2.0j])
    vg = nts_characteristic_exponent(u, NtsParams(0.0, 0.201, 0.256, 0.1))
    near = nts_characteristic_exponent(u, NtsParams(1e-8, 0.201, 0.256, 0.1))
    np.testing.assert_allclose(vg, near, rtol=1e-6)


def test_exponent_outside_strip_raises():
    with pytest.raises(DomainError):
        lcf_increment(make_spec("OU-TS", 0.4), np.array([3.6j]), DT)
    with pytest.raises(DomainError):
        lcf_increment(make_spec("OU-TS", 0.4), np.array([-2.5j]), DT)
    with pytest.raises(DomainError):
        lcf_increment(make_spec("NTS-OU", 0.4), np.array([-20.0j]), DT)


# ----------------------------------------------------------- validation


@pytest.mark.parametrize("kwargs", [
    dict(alpha_p=2.0, alpha_n=0.5, beta_p=1, beta_n=1, c_p=1, c_n=1),
    dict(alpha_p=0.5, alpha_n=0.5, beta_p=0, beta_n=1, c_p=1, c_n=1),
    dict(alpha_p=0.5, alpha_n=0.5, beta_p=1, beta_n=1, c_p=-1, c_n=1),
    dict(alpha_p=0.5, alpha_n=0.5, beta_p=1, beta_n=1, c_p=0, c_n=0),
    dict(alpha_p=float("nan"), alpha_n=0.5, beta_p=1, beta_n=1, c_p=1, c_n=1),
])
def test_invalid_ts_params(kwargs):
    with pytest.raises(ParameterError):
        TsParams(**kwargs)


@pytest.mark.parametrize("args", [(1.0, 0.2, 0.2), (1.2, 0.2, 0.2), (0.5, 0.0, 0.2), (0.5, 0.2, -1.0)])
def test_invalid_nts_params(args):
    with pytest.raises(ParameterError):
        NtsParams(*args)


def test_invalid_specs():
    with pytest.raises(ParameterError):
        OuProcessSpec("OU-TS", 0.0, ts_params(0.4))
    with pytest.raises(ParameterError):
        OuProcessSpec("OU-TS", 0.1, nts_params(0.4))
    with pytest.raises(ParameterError):
        OuProcessSpec("TS-OU", 0.1, ts_params(-1.0))
    with pytest.raises(ParameterError):
        OuProcessSpec("NTS-OU", 0.1, nts_params(-1.0))
    with pytest.raises(ParameterError):
        OuProcessSpec("OU-CGMY", 0.1, ts_params(0.4))
    with pytest.raises(ParameterError):
        lcf_increment(make_spec("OU-TS", 0.4), np.array([1.0]), 0.0)


def test_family_parse_is_lenient_on_case_and_separator():
    assert Family.parse("ou_nts") is Family.OU_NTS


# ------------------------------------------------------------ strips


def test_strips():
    s = analyticity_strip(make_spec("OU-TS", 0.8))
    assert (s.p_minus, s.p_plus) == (-2.5, 3.5)
    s = analyticity_strip(make_spec("OU-NTS", 0.2))
    A = math.sqrt(2 * 0.201 ** 2 * 0.8 / 0.256)
    assert s.p_plus == pytest.approx(A / 0.201 ** 2, rel=1e-15)
    assert s.p_minus == -s.p_plus
    # the tabulated 12.4376 is off in the fourth decimal; the formula gives 12.43781
    assert s.p_plus == pytest.approx(12.4376, abs=5e-4)
    s = analyticity_strip(make_spec("NTS-OU", 0.6, 0.1))
    assert s.p_minus < 0 < s.p_plus and s.p_plus > -s.p_minus


def test_unilateral_strip_is_infinite_on_missing_side():
    s = analyticity_strip(OuProcessSpec("OU-TS", 0.1, TsParams(0.5, 0.5, 2.5, 3.5, 0.5, 0.0)))
    assert s.p_minus == -2.5 and math.isinf(s.p_plus)


# ------------------------------------------------------- classification


@pytest.mark.parametrize("fam, params, expected", [
    ("OU-TS", ts_params(-1.0), ActivityClass.FINITE),
    ("OU-TS", TsParams(-1.0, 0.5, 2.5, 3.5, 0.5, 1.0), ActivityClass.INFINITE_FINITE_VARIATION),
    ("OU-TS", ts_params(0.0), ActivityClass.INFINITE_FINITE_VARIATION),
    ("OU-TS", ts_params(1.2), ActivityClass.INFINITE_INFINITE_VARIATION),
    ("TS-OU", ts_params(0.0), ActivityClass.FINITE),
    ("TS-OU", ts_params(0.4), ActivityClass.INFINITE_FINITE_VARIATION),
    ("OU-NTS", nts_params(-2.0), ActivityClass.FINITE),
    ("OU-NTS", nts_params(0.2), ActivityClass.INFINITE_FINITE_VARIATION),
    ("OU-NTS", nts_params(0.5), ActivityClass.INFINITE_INFINITE_VARIATION),
    ("NTS-OU", nts_params(0.0), ActivityClass.FINITE),
    ("NTS-OU", nts_params(0.6), ActivityClass.INFINITE_INFINITE_VARIATION),
])
def test_classify(fam, params, expected):
    assert classify(OuProcessSpec(fam, 0.1, params)) is expected


# ------------------------------------------------------------ cumulants


def test_cumulant_examples():
    c = cumulants_increment(make_spec("OU-TS", 1.6), DT)
    assert c[1] * 1e3 == pytest.approx(174.60, abs=0.005)
    c = cumulants_increment(make_spec("OU-NTS", 0.2), DT)
    assert c[1] * 1e3 == pytest.approx(3.306, abs=1e-3)
    assert c[2] == 0
    c = cumulants_increment(make_spec("OU-NTS", 0.4, 0.1), DT)
    # NTS entries are printed truncated, so allow one unit of the last digit
    assert 0 <= c[0] * 1e3 - 8.258 < 1e-3


@pytest.mark.parametrize("spec", SPECS, ids=SPEC_IDS)
def test_cumulants_match_finite_differences(spec):
    ana = cumulants_increment(spec, DT)
    fd = cumulants_fd(lambda u: lcf_increment(spec, u, DT))
    scale = np.abs(ana).max()
    for k in range(4):
        assert abs(fd[k] - ana[k]) <= 1e-6 * max(abs(ana[k]), 1e-3 * scale), (k + 1, fd[k], ana[k])


@pytest.mark.parametrize("fam", ["OU-TS", "TS-OU", "OU-NTS", "NTS-OU"])
def test_first_cumulant_from_derivative(fam):
    if "TS" in fam.split("-"):
        spec = OuProcessSpec(fam, B_TS, ts_params(0.8, gamma_c=0.3))
    else:
        spec = OuProcessSpec(fam, B_NTS, nts_params(0.4, 0.1))
    h = 1e-5
    d = lcf_increment(spec, np.array([h, -h]), DT)
    c1 = (-1j * (d[0] - d[1]) / (2 * h)).real
    assert abs(c1 - cumulants_increment(spec, DT)[0]) < 1e-8


def test_symmetric_nts_third_cumulant_is_zero():
    for fam in ("OU-NTS", "NTS-OU"):
        assert cumulants_increment(make_spec(fam, 0.4), DT)[2] == 0.0


# ------------------------------------------------- quadrature against Simpson


def test_gauss_legendre_matches_simpson():
    spec = make_spec("OU-TS", 0.4)
    s = np.linspace(0.0, DT, 200_001)
    vals = driver_exponent(spec, 1.0 * np.exp(-spec.b * s))
    ref = integrate.simpson(vals, x=s)
    got = lcf_increment(spec, np.array([1.0]), DT)[0]
    assert abs(got - ref) < 1e-10


# ------------------------------------------------------- invariants


@pytest.mark.parametrize("spec", SPECS, ids=SPEC_IDS)
def test_hermitian_and_bounded(spec, real_mesh):
    phi = np.exp(lcf_increment(spec, real_mesh, DT))
    phim = np.exp(lcf_increment(spec, -real_mesh, DT))
    assert np.all(np.abs(phi) <= 1 + 1e-14)
    np.testing.assert_allclose(phi, np.conj(phim), atol=1e-14, rtol=0)


@settings(max_examples=30, deadline=None)
@given(u=st.floats(-200, 200), dt=st.floats(1e-3, 5.0), which=st.sampled_from(range(len(SPECS))))
def test_hermitian_property(u, dt, which):
    spec = SPECS[which]
    v = lcf_increment(spec, np.array([u, -u]), dt)
    assert v[0].real <= 1e-13
    assert abs(v[0] - np.conj(v[1])) <= 1e-12 * max(1.0, abs(v[0]))


@pytest.mark.parametrize("spec", SPECS[:-3] + SPECS[-2:], ids=SPEC_IDS[:-3] + SPEC_IDS[-2:])
def test_strip_consistency(spec):
    strip = analyticity_strip(spec)
    s = np.linspace(0.99 * strip.p_minus, 0.99 * strip.p_plus, 200)
    v = lcf_increment(spec, 1j * s, DT)
    assert np.all(np.isfinite(v))
    assert np.all(np.abs(v.imag) <= 1e-12 * np.maximum(1.0, np.abs(v.real)))


@pytest.mark.parametrize("fam, alpha", FINITE_ACTIVITY_ROWS + [("TS-OU", 0.0), ("NTS-OU", 0.0)])
def test_fa_split_identity(fam, alpha, real_mesh):
    spec = make_spec(fam, alpha)
    fa = fa_decomposition(spec, DT)
    q = math.exp(-fa.lam * DT)
    lhs = q + (1 - q) * fa.cf_v(real_mesh)
    rhs = np.exp(lcf_increment(spec, real_mesh, DT) - 1j * real_mesh * fa.mu)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)
    assert fa.cf_v(np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-15)


def test_fa_split_identity_asymmetric():
    spec = make_spec("OU-NTS", -1.0, 0.1)
    fa = fa_decomposition(spec, DT)
    u = np.linspace(-50, 50, 101)
    q = math.exp(-fa.lam * DT)
    np.testing.assert_allclose(q + (1 - q) * fa.cf_v(u),
                               np.exp(lcf_increment(spec, u, DT) - 1j * u * fa.mu), atol=1e-12)


def test_fa_intensities():
    uni = OuProcessSpec("OU-TS", 0.1, TsParams(-1.0, -1.0, 2.5, 3.5, 0.5, 0.0))
    assert fa_decomposition(uni, DT).lam == pytest.approx(0.2, rel=1e-14)
    assert fa_decomposition(make_spec("OU-NTS", -1.0), DT).lam == pytest.approx(7.8125, rel=1e-14)


def test_fa_requires_finite_activity():
    with pytest.raises(PreconditionError):
        fa_decomposition(make_spec("OU-TS", 0.4), DT)


@pytest.mark.parametrize("fam, alpha", [("TS-OU", 1.6), ("TS-OU", 0.8), ("NTS-OU", 0.6),
                                        ("NTS-OU", 0.2)])
def test_levy_ou_stationarity(fam, alpha):
    spec = make_spec(fam, alpha)
    t = 50.0 / spec.b
    u = np.linspace(-30, 30, 61)
    got = lcf_increment(spec, u, t)
    np.testing.assert_allclose(got, driver_exponent(spec, u), atol=1e-10, rtol=0)


# -------------------------------------------------------------- decay


def test_decay_examples():
    d = decay_profile(make_spec("OU-TS", 0.8), DT)
    assert d.kind == "exponential" and d.omega == 0.8
    d = decay_profile(make_spec("OU-NTS", 0.2), DT)
    assert d.kind == "exponential" and d.omega == pytest.approx(0.4)
    gamma_ou = OuProcessSpec("OU-TS", 0.1, TsParams(0.0, 0.0, 2.5, 3.5, 0.5, 0.0))
    d = decay_profile(gamma_ou, 1.0)
    assert d.kind == "power" and d.omega == pytest.approx(0.5)
    assert decay_profile(make_spec("OU-TS", -1.0), DT).omega == 1.0
    assert decay_profile(make_spec("OU-NTS", -1.0), DT).omega == 2.0


@pytest.mark.parametrize("fam, alpha", INFINITE_ACTIVITY_ROWS)
def test_exponential_decay_envelope(fam, alpha):
    spec = make_spec(fam, alpha)
    d = decay_profile(spec, DT)
    u = np.logspace(2, 4, 200)
    rate = d.ell * u ** d.omega
    a = select_shift(analyticity_strip(spec), d)
    for shift in (0.0, a):
        # log of |phi(u + i shift)| e^{ell u^omega}
        g = lcf_increment(spec, u + 1j * shift, DT).real + rate
        assert np.all(np.isfinite(g))
        if d.omega <= 1:
            # bounded: the amplitude settles to a constant
            assert g.max() <= g[0] + 1.0
        else:
            # the next term grows like u^(omega - 1); the rate itself is exact
            assert np.all(np.abs(g) <= 0.05 * rate + 1.0)


@pytest.mark.parametrize("fam, alpha", FINITE_ACTIVITY_ROWS)
def test_power_decay_envelope(fam, alpha):
    spec = make_spec(fam, alpha)
    d = decay_profile(spec, DT)
    a = select_shift(analyticity_strip(spec), d)
    fa = fa_decomposition(spec, DT)
    u = np.logspace(2, 4, 100)
    g = np.abs(fa.cf_v(u + 1j * a)) * u ** d.omega
    assert g.max() < 100.0 * g[0] + 1.0


@pytest.mark.parametrize("b", [3.0, 20.0, 1000.0])
@pytest.mark.parametrize("u", [1.0 + 1.7j, 1062.2 + 1.7j, 1e5 + 1.7j])
def test_time_integral_strong_reversion_matches_adaptive_quad(b, u, spec_of):
    base = spec_of("OU-TS", 1.6)
    spec = OuProcessSpec(base.family, b, base.params)
    t = 1.0

    def f(s, part):
        return getattr(complex(driver_exponent(spec, np.array([u * math.exp(-b * s)]))[0]), part)

    pts = [p for p in (math.log(abs(u)) / b * k for k in (0.5, 1.0, 1.5)) if 0 < p < t] or None
    kw = dict(epsabs=0, epsrel=1e-13, limit=1000, points=pts)
    ref = integrate.quad(f, 0, t, args=("real",), **kw)[0] + 1j * integrate.quad(f, 0, t, args=("imag",), **kw)[0]
    got = lcf_increment(spec, np.array([u]), t)[0]
    assert abs(got - ref) <= 1e-12 * abs(ref)
