import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windbid.errors import DegenerateSeries, InsufficientData
from windbid.market.types import MarketDay
from windbid.scenarios import (ArmaModel, PenaltyPrices, PowerCurve, ResidualDistribution, fit_arma,
                               generate_scenarios, load_models, sample_noise, save_models,
                               speed_to_power)


def simulate_arma(phi, theta, n, seed, burn=500, intercept=0.0):
    """Reference ARMA generator, written out separately from sample_noise."""
    rng = np.random.default_rng(seed)
    e = rng.normal(size=n + burn)
    x = np.zeros(n + burn)
    for t in range(n + burn):
        acc = intercept + e[t]
        for i, p in enumerate(phi, start=1):
            if t - i >= 0:
                acc += p * x[t - i]
        for j, q in enumerate(theta, start=1):
            if t - j >= 0:
                acc += q * e[t - j]
        x[t] = acc
    return x[burn:]


def test_ar1_recovery():
    m = fit_arma(simulate_arma([0.8], [], 10000, 1), 1, 0)
    assert 0.75 <= m.ar_coeffs[0] <= 0.85


def test_ar3_recovery():
    phi = [0.5, -0.3, 0.2]
    m = fit_arma(simulate_arma(phi, [], 10000, 2), 3, 0)
    np.testing.assert_allclose(m.ar_coeffs, phi, atol=0.05)


def test_arma11_recovery():
    m = fit_arma(simulate_arma([0.6], [0.4], 10000, 3), 1, 1)
    assert abs(m.ar_coeffs[0] - 0.6) <= 0.05
    assert abs(m.ma_coeffs[0] - 0.4) <= 0.05


def test_intercept_recovered():
    m = fit_arma(simulate_arma([0.5], [], 10000, 4, intercept=2.0), 1, 0)
    assert abs(m.intercept - 2.0) < 0.1


def test_white_noise_fit_is_flat():
    x = np.random.default_rng(5).normal(size=10000)
    m = fit_arma(x, 3, 0)
    assert np.all(np.abs(m.ar_coeffs) <= 0.05)


def test_fit_errors():
    with pytest.raises(DegenerateSeries):
        fit_arma(np.full(500, 3.0), 1, 0)
    with pytest.raises(InsufficientData):
        fit_arma(np.random.default_rng(0).normal(size=79), 5, 2)


def test_residual_kinds():
    x = simulate_arma([0.5], [], 2000, 6)
    emp = fit_arma(x, 1, 0)
    gau = fit_arma(x, 1, 0, residual="gaussian")
    assert emp.residual_dist.kind == "empirical" and emp.residual_dist.sample.size == 1999
    assert gau.residual_dist.kind == "gaussian" and abs(gau.residual_dist.std - 1.0) < 0.1


def test_nonstationary_model_warns():
    with pytest.warns(RuntimeWarning):
        ArmaModel(1, 0, [1.1], [])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ArmaModel(2, 0, [0.5, 0.3], [])


def test_model_validation():
    with pytest.raises(ValueError):
        ArmaModel(2, 0, [0.5], [])
    with pytest.raises(ValueError):
        ResidualDistribution("gaussian", std=0.0)
    with pytest.raises(ValueError):
        ResidualDistribution("empirical", sample=[])


def test_white_noise_sample_mean():
    m = ArmaModel.white(1.0)
    draws = sample_noise(m, 100_000, 7)
    assert abs(draws.mean()) <= 0.02


def test_sampling_is_deterministic():
    m = fit_arma(simulate_arma([0.6], [0.3], 3000, 8), 2, 1)
    np.testing.assert_array_equal(sample_noise(m, 24, 42), sample_noise(m, 24, 42))
    assert not np.array_equal(sample_noise(m, 24, 42), sample_noise(m, 24, 43))


def test_pure_ar_ignores_ma_field():
    dist = ResidualDistribution("gaussian", std=1.0)
    a = ArmaModel(1, 0, [0.5], [], 0.0, dist)
    b = ArmaModel(1, 0, [0.5], [], 0.0, dist)
    b.ma_coeffs = np.array([9.0])  # stray values in the field must not leak in when q = 0
    np.testing.assert_array_equal(sample_noise(a, 24, 1), sample_noise(b, 24, 1))


def test_recursion_matches_hand_computation():
    dist = ResidualDistribution("empirical", sample=[1.0])
    m = ArmaModel(1, 1, [0.5], [0.25], 10.0, dist)
    # e = 1 always, zero pre-sample state, intercept excluded
    np.testing.assert_allclose(sample_noise(m, 3, 0), [1.0, 1.75, 2.125])


@pytest.mark.parametrize("phi", [0.3, 0.7, 0.9, -0.6])
def test_ar1_stationary_variance(phi):
    m = ArmaModel(1, 0, [phi], [], 0.0, ResidualDistribution("gaussian", std=1.0))
    path = sample_noise(m, 100_500, 12)[500:]
    target = 1.0 / (1.0 - phi * phi)
    assert abs(path.var() / target - 1.0) <= 0.10


def test_power_curve_points():
    c = PowerCurve()
    assert speed_to_power(c, 0.0) == 0.0
    assert speed_to_power(c, c.rated_speed) == c.rated_power
    assert speed_to_power(c, c.cut_out) == 0.0
    assert speed_to_power(c, c.cut_in) == 0.0
    mid = 7.0
    assert speed_to_power(c, mid) == pytest.approx(400 * (343 - 27) / (1728 - 27))
    with pytest.raises(ValueError):
        speed_to_power(c, -1.0)
    with pytest.raises(ValueError):
        PowerCurve(5, 4, 25, 1)


@settings(max_examples=60, deadline=None)
@given(cut_in=st.floats(0.5, 5), span=st.floats(1, 15), tail=st.floats(1, 15), rated=st.floats(1, 1e4))
def test_power_curve_monotone(cut_in, span, tail, rated):
    c = PowerCurve(cut_in, cut_in + span, cut_in + span + tail, rated)
    v = np.linspace(0, c.rated_speed, 400)
    p = speed_to_power(c, v)
    assert np.all(np.diff(p) >= -1e-9 * rated)
    assert np.all(p >= 0) and np.all(p <= rated * (1 + 1e-12))
    assert speed_to_power(c, c.cut_out + 1) == 0.0


def test_power_curve_inverse():
    c = PowerCurve()
    p = np.linspace(0, 400, 41)
    np.testing.assert_allclose(c(c.inverse(p)), p, atol=1e-9)


def _day():
    return MarketDay(40 + 10 * np.sin(np.arange(24) / 4), 45 + 5 * np.cos(np.arange(24) / 3),
                     np.linspace(0, 400, 24), np.linspace(2, 14, 24))


def test_generate_scenarios_basic():
    m = fit_arma(simulate_arma([0.7], [], 3000, 9), 1, 0)
    scen = generate_scenarios(_day(), m, m, PowerCurve(), 10, 3)
    np.testing.assert_allclose(scen.prob, 0.1)
    assert scen.wind.shape == (24, 10)
    assert np.all(scen.wind >= 0) and np.all(scen.up_price >= 0) and np.all(scen.op_price >= 0)
    assert abs(scen.prob.sum() - 1) <= 1e-9
    again = generate_scenarios(_day(), m, m, PowerCurve(), 10, 3)
    np.testing.assert_array_equal(scen.rt_price, again.rt_price)
    np.testing.assert_array_equal(scen.wind, again.wind)


def test_zero_noise_reproduces_forecast():
    day = _day()
    scen = generate_scenarios(day, ArmaModel.zero(), ArmaModel.zero(), PowerCurve(), 5, 0)
    for w in range(5):
        np.testing.assert_allclose(scen.rt_price[:, w], day.rt_price_forecast)
        np.testing.assert_allclose(scen.wind[:, w], PowerCurve()(day.wind_speed_forecast))
    # without a speed forecast the power forecast itself is reproduced
    plain = MarketDay(day.da_price, day.rt_price_forecast, [0, 100, 399, 400] * 6)
    scen = generate_scenarios(plain, ArmaModel.zero(), ArmaModel.zero(), PowerCurve(), 2, 0)
    np.testing.assert_allclose(scen.wind[:, 1], plain.wind_forecast)


def test_scenario_seeds_are_per_scenario():
    m = ArmaModel.white(5.0)
    big = generate_scenarios(_day(), m, m, PowerCurve(), 4, 100)
    shifted = generate_scenarios(_day(), m, m, PowerCurve(), 3, 101)
    np.testing.assert_array_equal(big.rt_price[:, 1:], shifted.rt_price)


def test_penalty_prices():
    pen = PenaltyPrices()
    rt = np.array([[-10.0], [20.0], [50.0]])
    da = np.array([30.0, 10.0, 60.0])
    np.testing.assert_allclose(pen.up(rt, da)[:, 0], [1.5 * 30 + 5, 1.5 * 20 + 5, 1.5 * 60 + 5])
    np.testing.assert_allclose(pen.op(rt)[:, 0], [0, 10, 25])
    rt_only = PenaltyPrices(include_da=False)
    np.testing.assert_allclose(rt_only.up(rt, da)[:, 0], [5, 35, 80])


def test_model_file_round_trip(tmp_path):
    p = fit_arma(simulate_arma([0.6, 0.1], [0.2], 3000, 10), 2, 1)
    w = fit_arma(simulate_arma([0.8], [], 3000, 11), 1, 0, residual="gaussian")
    path = tmp_path / "models.json"
    save_models(path, p, w, PowerCurve(3.5, 13, 25, 8))
    p2, w2, c2 = load_models(path)
    np.testing.assert_array_equal(p2.ar_coeffs, p.ar_coeffs)
    np.testing.assert_array_equal(p2.residual_dist.sample, p.residual_dist.sample)
    assert w2.residual_dist.std == w.residual_dist.std
    assert c2 == PowerCurve(3.5, 13, 25, 8)
    np.testing.assert_array_equal(sample_noise(p2, 24, 5), sample_noise(p, 24, 5))
