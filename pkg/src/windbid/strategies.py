"""Fixed bidding rules used as baselines."""
import numpy as np

from windbid.market.types import BidVector, MarketDay


def benchmark_bid(day: MarketDay) -> BidVector:
    """Commit the whole forecast in hours where DA pays strictly more than forecast RT."""
    return BidVector(np.where(day.da_price > day.rt_price_forecast, day.wind_forecast, 0.0))


def zero_bid(day: MarketDay) -> BidVector:
    return BidVector(np.zeros(day.horizon))


def full_bid(day: MarketDay) -> BidVector:
    return BidVector(day.wind_forecast.copy())
