import csv
import io
import math

import numpy as np
import pytest

from levyou.errors import MartingaleError, ParameterError
from levyou.models import OuProcessSpec, TsParams
from levyou.oracles import black76_call
from levyou.pricing import (BP, ForwardCurve, SpotModel, asian_payoff_average, call_prices,
                            error_metrics,
                            martingale_drift, moneyness_panel, price_asian_mc, price_european_lewis,
                            price_european_mc, spot_from_state, terminal_spot, write_report_csv)
from levyou.sampler import DateGrid, sample_paths

from tables import DT, FINITE_ACTIVITY_ROWS, INFINITE_ACTIVITY_ROWS, make_spec


def gauss_total_var(spec, T):
    b, s = spec.b, spec.params.sigma
    return s * s * -math.expm1(-2 * b * T) / (2 * b)


# ----------------------------------------------------------- drift


def test_drift_vanishes_at_zero(spec_of):
    assert martingale_drift(spec_of("OU-TS", 0.8), 0.0) == 0.0


def test_gaussian_drift_is_half_variance(gauss_spec):
    T = 0.75
    assert martingale_drift(gauss_spec, T) == pytest.approx(-0.5 * gauss_total_var(gauss_spec, T),
                                                            rel=1e-12)


def test_martingale_infeasible_is_rejected():
    # beta_p = 0.8 < 1: E[exp(Z)] is infinite
    spec = OuProcessSpec("OU-TS", 0.1, TsParams(0.4, 0.4, 0.8, 3.5, 0.5, 1.0, 0.0))
    with pytest.raises(MartingaleError):
        SpotModel(spec)
    with pytest.raises(MartingaleError):
        martingale_drift(spec, 0.1)


def test_spot_from_state_examples(spec_of):
    m = SpotModel(spec_of("OU-NTS", 0.4))
    assert spot_from_state(m, 0.0, 0.0) == 1.0
    T = 0.5
    assert spot_from_state(m, -martingale_drift(m.spec, T), T) == pytest.approx(1.0, abs=1e-15)
    curve = ForwardCurve(lambda t: 2.0 + t)
    m2 = SpotModel(m.spec, curve)
    assert spot_from_state(m2, -martingale_drift(m.spec, T), T) == pytest.approx(2.5, abs=1e-14)


def test_forward_curve_must_be_positive():
    with pytest.raises(ParameterError):
        ForwardCurve(lambda t: np.zeros_like(t))(1.0)


@pytest.mark.parametrize("row", [("OU-TS", 1.2), ("TS-OU", 0.8), ("OU-NTS", 0.2), ("NTS-OU", 0.6),
                                 ("OU-TS", -2.0), ("OU-NTS", -1.0)])
def test_martingale_mc(row, spec_of):
    m = SpotModel(spec_of(*row, 0.1 if "NTS" in row[0] else 0.0))
    n = 200_000
    s = terminal_spot(m, 0.25, n, 61)
    assert abs(s.mean() - 1.0) <= 4 * s.std(ddof=1) / math.sqrt(n)


# ------------------------------------------------------------ lewis


@pytest.mark.parametrize("chi", [-0.3, -0.05, 0.0, 0.02, 0.25])
@pytest.mark.parametrize("T", [1 / 12, 1.0])
def test_lewis_matches_black76_for_gaussian(chi, T, gauss_spec):
    m = SpotModel(gauss_spec)
    vol = math.sqrt(gauss_total_var(gauss_spec, T) / T)
    ref = float(black76_call(1.0, math.exp(chi), T, vol))
    assert abs(price_european_lewis(m, chi, T) - ref) <= 1e-10


def test_lewis_scales_with_forward(gauss_spec):
    curve = ForwardCurve(lambda t: 1.7 * np.ones_like(t))
    a = price_european_lewis(SpotModel(gauss_spec), 0.05, 0.5)
    b = price_european_lewis(SpotModel(gauss_spec, curve), 0.05, 0.5)
    assert b == pytest.approx(1.7 * a, rel=1e-12)


@pytest.mark.parametrize("row", INFINITE_ACTIVITY_ROWS[::3] + FINITE_ACTIVITY_ROWS)
def test_atm_lewis_within_no_arbitrage_bounds(row, spec_of):
    p = price_european_lewis(SpotModel(spec_of(*row)), 0.0, DT)
    assert 0.0 < p < 1.0


@pytest.mark.parametrize("row", [("OU-TS", 0.8), ("OU-TS", -1.0), ("OU-NTS", -2.0)])
def test_lewis_is_decreasing_and_convex_in_strike(row, spec_of):
    m = SpotModel(spec_of(*row))
    chis = moneyness_panel(DT)
    k = np.exp(chis)
    c = np.array([price_european_lewis(m, x, DT) for x in chis])
    assert np.all(np.diff(c) < 0)
    slope = np.diff(c) / np.diff(k)
    assert np.all(np.diff(slope) > -1e-9)
    # intrinsic value and forward bound
    assert np.all(c >= np.maximum(1 - k, 0) - 1e-12) and np.all(c <= 1.0)


def test_lewis_fa_atom_split_matches_direct_quadrature(spec_of):
    # compare with the plain strip integral (no atom split) at a large chi,
    # where the oscillatory rule converges on the raw characteristic function
    from scipy import integrate
    from levyou.models import lcf_increment
    spec = spec_of("OU-NTS", -1.0)
    m = SpotModel(spec)
    T, chi = DT, 0.6
    f = martingale_drift(spec, T)

    def phi(u):
        z = u - 0.5j
        return np.exp(lcf_increment(spec, np.array([z]), T)[0] + 1j * z * f)

    def g(u):
        return (np.exp(-1j * u * chi) * phi(u)).real / (u * u + 0.25)

    val = sum(integrate.quad(g, lo, lo + 50.0, limit=2000, epsabs=1e-13)[0]
              for lo in np.arange(0.0, 20000.0, 50.0))
    ref = 1.0 - math.exp(0.5 * chi) / math.pi * val
    assert price_european_lewis(m, chi, T) == pytest.approx(ref, abs=5e-8)


# ------------------------------------------------------------ monte carlo


def test_panel_is_thirty_interior_points():
    p = moneyness_panel(DT)
    assert p.size == 30
    np.testing.assert_allclose(p, math.sqrt(DT) * np.linspace(-0.2, 0.2, 32)[1:-1])
    assert np.all(np.abs(p) < 0.2 * math.sqrt(DT))


def test_zero_strike_prices_the_forward(spec_of):
    s = terminal_spot(SpotModel(spec_of("OU-TS", 0.8)), DT, 100_000, 3)
    price, sd = call_prices(s, [0.0])
    assert price[0] == pytest.approx(s.mean(), rel=1e-15)
    assert abs(price[0] - 1.0) <= 4 * sd[0]
    assert sd[0] == pytest.approx(s.std(ddof=1) / math.sqrt(s.size))


def test_mc_calls_monotone_convex_and_parity(spec_of):
    m = SpotModel(spec_of("OU-NTS", 0.6, 0.1))
    n = 200_000
    s = terminal_spot(m, DT, n, 5)
    chis = moneyness_panel(DT)
    k = np.exp(chis)
    c, _ = call_prices(s, k)
    assert np.all(np.diff(c) <= 0)
    slope = np.diff(c) / np.diff(k)
    assert np.all(np.diff(slope) >= -1e-12)
    se_s = s.std(ddof=1) / math.sqrt(n)
    for kk in k[::7]:
        put = np.maximum(kk - s, 0).mean()
        call = np.maximum(s - kk, 0).mean()
        assert abs(call - put - (1.0 - kk)) <= 4 * se_s


def test_european_mc_report_shares_paths(spec_of):
    m = SpotModel(spec_of("NTS-OU", 0.8))
    chis = moneyness_panel(DT)
    r = price_european_mc(m, chis, DT, 50_000, 9, reference=False)
    s = terminal_spot(m, DT, 50_000, 9)
    c, sd = call_prices(s, np.exp(chis))
    np.testing.assert_array_equal(r.price, c)
    np.testing.assert_array_equal(r.sd, sd)
    assert r.ref_price is None and r.abs_err_bp is None


@pytest.mark.slow
def test_european_mc_close_to_lewis(spec_of):
    m = SpotModel(spec_of("NTS-OU", 0.8))
    r = price_european_mc(m, moneyness_panel(DT), DT, 400_000, 13)
    met = r.metrics()
    # error well inside a few SD of the panel
    assert met["RMSE_bp"] < 4 * met["SDbar_bp"]


def test_european_rejects_bad_expiry(spec_of):
    with pytest.raises(ParameterError):
        price_european_mc(SpotModel(spec_of("OU-TS", 0.8)), [0.0], 0.0, 10, 1)


# ------------------------------------------------------------------ asian


def test_asian_single_fixing_is_european(spec_of):
    m = SpotModel(spec_of("OU-TS", 0.4))
    T = 0.5
    grid = DateGrid(np.array([0.0, T]))
    chis = np.array([-0.1, 0.0, 0.1])
    a = price_asian_mc(m, chis, grid, 30_000, 4)
    e = price_european_mc(m, chis, T, 30_000, 4, reference=False)
    np.testing.assert_array_equal(a.price, e.price)
    np.testing.assert_array_equal(a.sd, e.sd)


def test_asian_zero_strike_is_average_forward(spec_of):
    m = SpotModel(spec_of("OU-NTS", 0.2))
    grid = DateGrid.uniform(1.0, 12)
    a = price_asian_mc(m, [-np.inf], grid, 100_000, 6)
    assert abs(a.price[0] - 1.0) <= 4 * a.sd[0]


def test_asian_reuses_given_paths(spec_of):
    m = SpotModel(spec_of("OU-NTS", 0.8))
    grid = DateGrid.uniform(1.0, 4)
    pm = sample_paths(m.spec, 0.0, grid, 5000, 2)
    a = price_asian_mc(m, [0.0], grid, 5000, 2, paths=pm)
    b = price_asian_mc(m, [0.0], grid, 5000, 2)
    np.testing.assert_array_equal(a.price, b.price)


def test_asian_grid_must_start_at_zero(spec_of):
    with pytest.raises(ParameterError):
        price_asian_mc(SpotModel(spec_of("OU-NTS", 0.8)), [0.0], DateGrid(np.array([0.1, 0.5])), 10, 1)


# ---------------------------------------------------------------- metrics


def test_metrics_exact_match():
    m = error_metrics([0.1, 0.2], [0.1, 0.2], [1e-4, 3e-4])
    assert m["MAX_bp"] == 0 and m["RMSE_bp"] == 0 and m["MAPE_pct"] == 0
    assert m["SDbar_bp"] == pytest.approx(2.0)


def test_metrics_unit_conversion():
    m = error_metrics([0.5001], [0.5], [0.0])
    assert m["MAX_bp"] == pytest.approx(1.0) and m["RMSE_bp"] == pytest.approx(1.0)
    assert m["MAPE_pct"] == pytest.approx(0.02)


def test_metrics_skip_tiny_references_in_mape():
    m = error_metrics([0.1, 1e-7], [0.1, 1e-9], [0, 0])
    assert m["MAPE_pct"] == 0.0
    assert m["MAX_bp"] == pytest.approx((1e-7 - 1e-9) * BP)


def test_metrics_reject_bad_input():
    with pytest.raises(ParameterError):
        error_metrics([], [], [])
    with pytest.raises(ParameterError):
        error_metrics([1.0, 2.0], [1.0], [0.0, 0.0])


def test_report_csv(spec_of):
    m = SpotModel(spec_of("OU-NTS", 0.8))
    chis = moneyness_panel(DT)[:3]
    r = price_european_mc(m, chis, DT, 2000, 1)
    buf = io.StringIO()
    write_report_csv(buf, [r])
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert list(rows[0])[:7] == ["family", "alpha", "chi", "price", "sd", "ref_price", "abs_err_bp"]
    assert len(rows) == 4 and rows[-1]["chi"] == "ALL"
    assert float(rows[-1]["RMSE_bp"]) == pytest.approx(r.metrics()["RMSE_bp"], rel=1e-15)
    assert float(rows[0]["price"]) == r.price[0]


def test_asian_start_fixing_adds_the_known_spot(spec_of):
    m = SpotModel(spec_of("OU-NTS", 0.2))
    grid = DateGrid.uniform(1.0, 12)
    pm = sample_paths(m.spec, 0.0, grid, 4000, 3)
    a12 = asian_payoff_average(m, pm)
    a13 = asian_payoff_average(m, pm, include_start=True)
    np.testing.assert_allclose(a13, (12 * a12 + 1.0) / 13, rtol=1e-14)
    r = price_asian_mc(m, [0.0], grid, 4000, 3, paths=pm, include_start=True)
    assert r.price[0] == pytest.approx(np.maximum(a13 - 1.0, 0).mean(), rel=1e-15)
