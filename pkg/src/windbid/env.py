"""One-step bidding environment: observe a day, bid once, get the normalized recourse value."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from windbid.data import HOURS, DataSet
from windbid.errors import DataExhausted, DimensionMismatch, NumericalFailure
from windbid.market import solve_second_stage
from windbid.market.lp import DEFAULT_OPTIONS, SolverOptions
from windbid.market.types import BatteryContext, MarketDay, ScenarioSet, SolveReport
from windbid.scenarios import ArmaModel, PenaltyPrices, PowerCurve, generate_scenarios

PRICE_SCALE = 100.0
DEGENERATE_EPS = 1e-9
EPISODE_FORMAT_VERSION = 1


def _range(value, name):
    lo, hi = (float(v) for v in value)
    if not lo <= hi:
        raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
    return lo, hi


@dataclass(frozen=True)
class EpisodeConfig:
    """Sampling ranges for the battery context and scenario count.

    ``e_max_factor`` scales four hours of the day's mean forecast energy;
    ``e_init_frac`` places e_init within [e_min, e_max] and ``e_final_frac``
    places e_final within [e_min, e_init]; ``power_frac`` scales rated power.
    """

    n_scenarios: int = 10
    e_max_factor: Tuple[float, float] = (0.25, 2.0)
    e_init_frac: Tuple[float, float] = (0.0, 1.0)
    e_final_frac: Tuple[float, float] = (0.0, 1.0)
    power_frac: Tuple[float, float] = (0.1, 0.5)
    eta_ch: Tuple[float, float] = (0.85, 1.0)
    eta_dis: Tuple[float, float] = (0.85, 1.0)
    battery: bool = True
    discharge_convention: str = "paper"
    penalties: PenaltyPrices = field(default_factory=PenaltyPrices)
    cap_shortfall: bool = False

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ValueError("n_scenarios must be at least 1")
        for name in ("e_max_factor", "e_init_frac", "e_final_frac", "power_frac", "eta_ch", "eta_dis"):
            object.__setattr__(self, name, _range(getattr(self, name), name))
        for name in ("e_init_frac", "e_final_frac"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi > 1:
                raise ValueError(f"{name} must lie within [0, 1]")
        if self.e_max_factor[0] < 0 or self.power_frac[0] < 0:
            raise ValueError("battery size ranges must be nonnegative")
        if not (0 < self.eta_ch[0] and self.eta_ch[1] <= 1):
            raise ValueError("eta_ch range must lie in (0, 1]")
        if not self.eta_dis[0] > 0:
            raise ValueError("eta_dis range must be positive")


def sample_battery(config: EpisodeConfig, day: MarketDay, curve: PowerCurve, rng) -> BatteryContext:
    if not config.battery:
        return BatteryContext.disabled()
    u = rng.uniform(size=6)

    def pick(rng_pair, x):
        lo, hi = rng_pair
        return lo + x * (hi - lo)

    e_max = pick(config.e_max_factor, u[0]) * 4.0 * float(day.wind_forecast.mean())
    e_init = pick(config.e_init_frac, u[1]) * e_max
    e_final = pick(config.e_final_frac, u[2]) * e_init
    power = pick(config.power_frac, u[3]) * curve.rated_power
    return BatteryContext(0.0, e_max, e_init, e_final, power, power,
                          pick(config.eta_ch, u[4]), pick(config.eta_dis, u[5]),
                          config.discharge_convention)


def observation(day: MarketDay, battery: BatteryContext, rated_power: float) -> np.ndarray:
    """[DA, G, RT forecast, e_init, e_final, e_max, eta_ch, eta_dis], scaled."""
    cap = battery.e_max if battery.e_max > 0 else 1.0
    obs = np.concatenate([
        day.da_price / PRICE_SCALE,
        day.wind_forecast / rated_power,
        day.rt_price_forecast / PRICE_SCALE,
        [battery.e_init / cap, battery.e_final / cap, battery.e_max / rated_power,
         battery.eta_ch, battery.eta_dis],
    ])
    assert obs.size == 3 * day.horizon + 5
    return obs


def reward_denominator(day: MarketDay, scenarios: ScenarioSet) -> float:
    best = np.maximum(day.da_price[:, None], scenarios.rt_price)
    return float((scenarios.wind * best).sum() / scenarios.n_scenarios)


@dataclass
class EpisodeState:
    day: MarketDay
    battery: BatteryContext
    scenarios: ScenarioSet
    seed: Optional[int] = None
    day_index: Optional[int] = None
    rated_power: float = 400.0
    cap_shortfall: bool = False
    denominator: float = field(init=False)
    degenerate: bool = field(init=False)
    done: bool = False
    report: Optional[SolveReport] = field(default=None, repr=False)

    def __post_init__(self):
        self.denominator = reward_denominator(self.day, self.scenarios)
        self.degenerate = self.denominator <= DEGENERATE_EPS

    @property
    def observation(self) -> np.ndarray:
        return observation(self.day, self.battery, self.rated_power)

    def to_dict(self):
        return {"version": EPISODE_FORMAT_VERSION, "seed": self.seed, "day_index": self.day_index,
                "rated_power": self.rated_power, "cap_shortfall": self.cap_shortfall,
                "day": self.day.to_dict(), "battery": self.battery.to_dict(),
                "scenarios": self.scenarios.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != EPISODE_FORMAT_VERSION:
            raise ValueError(f"unsupported episode version {d.get('version')!r}")
        return cls(MarketDay.from_dict(d["day"]), BatteryContext.from_dict(d["battery"]),
                   ScenarioSet.from_dict(d["scenarios"]), d["seed"], d["day_index"],
                   d["rated_power"], d["cap_shortfall"])

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def reset(config: EpisodeConfig, data: DataSet, price_model: ArmaModel, wind_model: ArmaModel,
          curve: PowerCurve, seed: int, days=None) -> Tuple[np.ndarray, EpisodeState]:
    """Sample a day, a battery and a scenario set from ``seed``.

    ``days`` restricts the draw to a subset of day indices (e.g. a train split).
    """
    pool = np.arange(data.n_days) if days is None else np.asarray(days, dtype=int)
    if pool.size == 0:
        raise DataExhausted("no complete day available to start an episode")
    rng = np.random.default_rng(seed)
    d = int(pool[rng.integers(pool.size)])
    day = data.market_day(d, curve)
    battery = sample_battery(config, day, curve, rng)
    scen_seed = int(rng.integers(0, 2 ** 31 - config.n_scenarios))
    scenarios = generate_scenarios(day, price_model, wind_model, curve, config.n_scenarios,
                                   scen_seed, config.penalties)
    state = EpisodeState(day, battery, scenarios, seed, d, curve.rated_power, config.cap_shortfall)
    return state.observation, state


def action_to_bid(action, day: MarketDay) -> np.ndarray:
    a = np.asarray(action, dtype=float).reshape(-1)
    if a.size != day.horizon:
        raise DimensionMismatch(f"action has length {a.size}, expected {day.horizon}")
    return np.clip(a, 0.0, 1.0) * day.wind_forecast


def step(state: EpisodeState, action, options: SolverOptions = DEFAULT_OPTIONS,
         threads: int = 1) -> Tuple[float, bool]:
    """Score ``action`` and end the episode.

    The bid is ``action * forecast wind``; the reward is the second-stage
    optimum divided by the day's perfect-price revenue.  A day with no such
    revenue yields reward 0 and sets ``state.degenerate``.
    """
    bid = action_to_bid(action, state.day)
    report = solve_second_stage(state.day, state.battery, state.scenarios, bid, options,
                                threads=threads, cap_shortfall=state.cap_shortfall)
    state.report = report
    state.done = True
    if not report.optimal:
        raise NumericalFailure(f"second stage is {report.status.value}", scenario=report.scenario)
    if state.degenerate:
        return 0.0, True
    return report.objective / state.denominator, True


@dataclass
class EpisodeSource:
    """Everything ``reset`` needs besides the seed."""

    data: DataSet
    price_model: ArmaModel
    wind_model: ArmaModel
    curve: PowerCurve = field(default_factory=PowerCurve)
    config: EpisodeConfig = field(default_factory=EpisodeConfig)
    days: Optional[np.ndarray] = None

    def make(self, seed: int) -> EpisodeState:
        return reset(self.config, self.data, self.price_model, self.wind_model, self.curve,
                     seed, self.days)[1]


class BiddingEnv:
    """Stateful wrapper: ``reset()`` draws episodes from consecutive seeds."""

    def __init__(self, data: DataSet, price_model: ArmaModel, wind_model: ArmaModel,
                 curve: PowerCurve = PowerCurve(), config: EpisodeConfig = EpisodeConfig(),
                 seed: int = 0, days=None, options: SolverOptions = DEFAULT_OPTIONS, threads: int = 1):
        self.data = data
        self.price_model = price_model
        self.wind_model = wind_model
        self.curve = curve
        self.config = config
        self.days = days
        self.options = options
        self.threads = threads
        self._next_seed = seed
        self.state: Optional[EpisodeState] = None

    @property
    def horizon(self) -> int:
        return HOURS

    @property
    def obs_dim(self) -> int:
        return 3 * self.horizon + 5

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is None:
            seed = self._next_seed
            self._next_seed += 1
        obs, self.state = reset(self.config, self.data, self.price_model, self.wind_model,
                                self.curve, seed, self.days)
        return obs

    def step(self, action) -> Tuple[float, bool]:
        if self.state is None or self.state.done:
            raise RuntimeError("call reset() before step()")
        return step(self.state, action, self.options, self.threads)
