import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from windbid.market.types import MarketDay
from windbid.strategies import benchmark_bid, full_bid, zero_bid


def test_benchmark_on_instance_a(instance_a):
    np.testing.assert_array_equal(benchmark_bid(instance_a[0]).p_da, [10, 0])


def test_ties_commit_nothing():
    day = MarketDay([30, 30, 30], [30, 30, 30], [5, 6, 7])
    np.testing.assert_array_equal(benchmark_bid(day).p_da, 0)


def test_calm_day():
    day = MarketDay([90, 80], [10, 10], [0, 0])
    np.testing.assert_array_equal(benchmark_bid(day).p_da, 0)


def test_zero_and_full(instance_a):
    np.testing.assert_array_equal(zero_bid(instance_a[0]).p_da, [0, 0])
    np.testing.assert_array_equal(full_bid(instance_a[0]).p_da, [10, 5])


prices = st.lists(st.floats(-50, 200), min_size=24, max_size=24)


@settings(max_examples=100, deadline=None)
@given(da=prices, rt=prices, wind=st.lists(st.floats(0, 400), min_size=24, max_size=24))
def test_benchmark_bounds(da, rt, wind):
    day = MarketDay(da, rt, wind)
    bid = benchmark_bid(day).p_da
    assert np.all(bid >= 0) and np.all(bid <= day.wind_forecast)
    if np.all(day.rt_price_forecast >= day.da_price):
        np.testing.assert_array_equal(bid, zero_bid(day).p_da)
