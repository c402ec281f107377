"""Data containers for the day-ahead / real-time bidding problem."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from windbid.errors import DimensionMismatch

DISCHARGE_CONVENTIONS = ("paper", "divide")


def _vector(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _matrix(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a T x n_scenarios matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass
class MarketDay:
    """One bidding day: DA prices plus forecasts of RT price and wind energy.

    ``wind_speed_forecast`` is optional; scenario generation needs it to
    perturb speeds before the power curve, and falls back to inverting the
    curve when it is missing.
    """

    da_price: np.ndarray
    rt_price_forecast: np.ndarray
    wind_forecast: np.ndarray
    wind_speed_forecast: Optional[np.ndarray] = None

    def __post_init__(self):
        self.da_price = _vector(self.da_price, "da_price")
        self.rt_price_forecast = _vector(self.rt_price_forecast, "rt_price_forecast")
        self.wind_forecast = _vector(self.wind_forecast, "wind_forecast")
        T = self.da_price.size
        if T < 1:
            raise DimensionMismatch("horizon must be at least one period")
        for name in ("rt_price_forecast", "wind_forecast"):
            if getattr(self, name).size != T:
                raise DimensionMismatch(f"{name} has length {getattr(self, name).size}, expected {T}")
        if np.any(self.wind_forecast < 0):
            raise ValueError("wind_forecast must be nonnegative")
        if self.wind_speed_forecast is not None:
            self.wind_speed_forecast = _vector(self.wind_speed_forecast, "wind_speed_forecast")
            if self.wind_speed_forecast.size != T:
                raise DimensionMismatch("wind_speed_forecast length differs from horizon")

    @property
    def horizon(self) -> int:
        return self.da_price.size

    def scaled(self, c: float) -> "MarketDay":
        return MarketDay(self.da_price * c, self.rt_price_forecast * c,
                         self.wind_forecast.copy(), self.wind_speed_forecast)

    def to_dict(self):
        d = {
            "da_price": self.da_price.tolist(),
            "rt_price_forecast": self.rt_price_forecast.tolist(),
            "wind_forecast": self.wind_forecast.tolist(),
        }
        if self.wind_speed_forecast is not None:
            d["wind_speed_forecast"] = self.wind_speed_forecast.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["da_price"], d["rt_price_forecast"], d["wind_forecast"],
                   d.get("wind_speed_forecast"))


@dataclass
class BatteryContext:
    e_min: float
    e_max: float
    e_init: float
    e_final: float
    p_ch_max: float
    p_dis_max: float
    eta_ch: float = 1.0
    eta_dis: float = 1.0
    # "paper": stored energy drops by eta_dis * P_dis; "divide": by P_dis / eta_dis
    discharge_convention: str = "paper"

    def __post_init__(self):
        for name in ("e_min", "e_max", "e_init", "e_final", "p_ch_max", "p_dis_max", "eta_ch", "eta_dis"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            setattr(self, name, v)
        if not 0 <= self.e_min <= self.e_init <= self.e_max:
            raise ValueError("require 0 <= e_min <= e_init <= e_max")
        if not 0 < self.eta_ch <= 1:
            raise ValueError("eta_ch must lie in (0, 1]")
        if not self.eta_dis > 0:
            raise ValueError("eta_dis must be positive")
        if self.p_ch_max < 0 or self.p_dis_max < 0:
            raise ValueError("power limits must be nonnegative")
        if self.discharge_convention not in DISCHARGE_CONVENTIONS:
            raise ValueError(f"discharge_convention must be one of {DISCHARGE_CONVENTIONS}")
        # e_final > e_max is allowed through: the LP then reports Infeasible.
        if self.e_final < self.e_min:
            raise ValueError("e_final must be at least e_min")

    @classmethod
    def disabled(cls) -> "BatteryContext":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0)

    @property
    def discharge_coeff(self) -> float:
        """Energy removed from storage per MWh discharged."""
        if self.discharge_convention == "paper":
            return self.eta_dis
        return 1.0 / self.eta_dis

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "e_min", "e_max", "e_init", "e_final", "p_ch_max", "p_dis_max",
            "eta_ch", "eta_dis", "discharge_convention")}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ScenarioSet:
    """Scenario realizations, each matrix shaped (T, n_scenarios)."""

    prob: np.ndarray
    wind: np.ndarray
    rt_price: np.ndarray
    up_price: np.ndarray
    op_price: np.ndarray

    def __post_init__(self):
        self.prob = _vector(self.prob, "prob")
        for name in ("wind", "rt_price", "up_price", "op_price"):
            setattr(self, name, _matrix(getattr(self, name), name))
        shape = self.wind.shape
        for name in ("rt_price", "up_price", "op_price"):
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if shape[1] != self.prob.size:
            raise DimensionMismatch(f"{self.prob.size} probabilities for {shape[1]} scenarios")
        if np.any(self.prob < 0) or abs(self.prob.sum() - 1.0) > 1e-9:
            raise ValueError("scenario probabilities must be nonnegative and sum to 1")
        if np.any(self.wind < 0):
            raise ValueError("scenario wind must be nonnegative")
        if np.any(self.up_price < 0) or np.any(self.op_price < 0):
            raise ValueError("penalty prices must be nonnegative")

    @property
    def n_scenarios(self) -> int:
        return self.prob.size

    @property
    def horizon(self) -> int:
        return self.wind.shape[0]

    def scaled(self, c: float) -> "ScenarioSet":
        return ScenarioSet(self.prob, self.wind, self.rt_price * c, self.up_price * c, self.op_price * c)

    @classmethod
    def deterministic(cls, wind, rt_price, up_price, op_price) -> "ScenarioSet":
        return cls([1.0], wind, rt_price, up_price, op_price)

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("prob", "wind", "rt_price", "up_price", "op_price")}

    @classmethod
    def from_dict(cls, d):
        return cls(d["prob"], d["wind"], d["rt_price"], d["up_price"], d["op_price"])


@dataclass
class BidVector:
    p_da: np.ndarray

    def __post_init__(self):
        self.p_da = _vector(self.p_da, "p_da")
        if np.any(self.p_da < 0):
            raise ValueError("day-ahead bids must be nonnegative")

    def __len__(self):
        return self.p_da.size


def as_bid(bid) -> BidVector:
    return bid if isinstance(bid, BidVector) else BidVector(bid)


RECOURSE_SYMBOLS = ("p_rt", "p_up", "p_op", "p_ch", "p_dis", "energy")


@dataclass
class SecondStageAssignment:
    """Recourse decisions, each shaped (T, n_scenarios)."""

    p_rt: np.ndarray
    p_up: np.ndarray
    p_op: np.ndarray
    p_ch: np.ndarray
    p_dis: np.ndarray
    energy: np.ndarray


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class SolveReport:
    status: Status
    objective: float
    first_stage: Optional[BidVector] = None
    recourse: Optional[SecondStageAssignment] = None
    iterations: int = 0
    max_constraint_violation: float = 0.0
    x: Optional[np.ndarray] = field(default=None, repr=False)
    # index of the scenario responsible for a non-optimal second-stage status
    scenario: Optional[int] = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL
