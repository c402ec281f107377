"""Learning day-ahead bids of a wind farm with storage from a two-stage stochastic program."""

__version__ = "0.1.0"
