"""ARMA noise models, the wind power curve, and scenario sampling."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from windbid.errors import DegenerateSeries, InsufficientData
from windbid.market.types import MarketDay, ScenarioSet

MODEL_FORMAT_VERSION = 1


@dataclass
class ResidualDistribution:
    """Innovation distribution: a bootstrap sample or a Gaussian."""

    kind: str = "empirical"
    sample: Optional[np.ndarray] = None
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind == "empirical":
            if self.sample is None or len(self.sample) == 0:
                raise ValueError("empirical residual distribution needs a nonempty sample")
            self.sample = np.asarray(self.sample, dtype=float)
        elif self.kind == "gaussian":
            if not self.std > 0:
                raise ValueError("gaussian residual std must be positive")
        else:
            raise ValueError(f"unknown residual distribution kind {self.kind!r}")

    @classmethod
    def fit(cls, residuals, kind="empirical"):
        residuals = np.asarray(residuals, dtype=float)
        if kind == "gaussian":
            return cls("gaussian", mean=float(residuals.mean()), std=float(residuals.std(ddof=1)))
        return cls("empirical", sample=residuals.copy())

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "empirical":
            return self.sample[rng.integers(0, self.sample.size, size=size)]
        return rng.normal(self.mean, self.std, size=size)

    @property
    def variance(self) -> float:
        if self.kind == "empirical":
            return float(self.sample.var())
        return self.std ** 2

    def to_dict(self):
        if self.kind == "empirical":
            return {"kind": "empirical", "sample": self.sample.tolist()}
        return {"kind": "gaussian", "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "empirical":
            return cls("empirical", sample=d["sample"])
        return cls("gaussian", mean=d["mean"], std=d["std"])


@dataclass
class ArmaModel:
    """x_t = c + sum_i phi_i x_{t-i} + e_t + sum_j theta_j e_{t-j}."""

    p: int
    q: int
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    intercept: float = 0.0
    residual_dist: ResidualDistribution = field(
        default_factory=lambda: ResidualDistribution("gaussian", std=1.0))

    def __post_init__(self):
        self.ar_coeffs = np.asarray(self.ar_coeffs, dtype=float).reshape(-1)
        self.ma_coeffs = np.asarray(self.ma_coeffs, dtype=float).reshape(-1)
        if self.ar_coeffs.size != self.p or self.ma_coeffs.size != self.q:
            raise ValueError(f"coefficient lengths ({self.ar_coeffs.size}, {self.ma_coeffs.size}) "
                             f"do not match orders ({self.p}, {self.q})")
        if not self.is_stationary():
            warnings.warn("AR polynomial has a root on or inside the unit circle", RuntimeWarning)

    def is_stationary(self) -> bool:
        if self.p == 0:
            return True
        # 1 - phi_1 z - ... - phi_p z^p, highest power first for np.roots
        poly = np.concatenate([-self.ar_coeffs[::-1], [1.0]])
        roots = np.roots(poly)
        return bool(np.all(np.abs(roots) > 1.0))

    def to_dict(self):
        return {
            "p": self.p, "q": self.q,
            "ar_coeffs": self.ar_coeffs.tolist(), "ma_coeffs": self.ma_coeffs.tolist(),
            "intercept": self.intercept, "residual_dist": self.residual_dist.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["p"], d["q"], d["ar_coeffs"], d["ma_coeffs"], d.get("intercept", 0.0),
                   ResidualDistribution.from_dict(d["residual_dist"]))

    @classmethod
    def white(cls, std=1.0):
        return cls(0, 0, [], [], 0.0, ResidualDistribution("gaussian", std=std))

    @classmethod
    def zero(cls):
        """A model whose every draw is zero."""
        return cls(0, 0, [], [], 0.0, ResidualDistribution("empirical", sample=[0.0]))


def _lagged(x, lags, start):
    """Design matrix of x_{t-1..t-lags} for t = start..len(x)-1."""
    n = x.size - start
    return np.column_stack([x[start - k:start - k + n] for k in range(1, lags + 1)]) if lags else np.empty((n, 0))


def fit_arma(series, p: int, q: int, residual: str = "empirical") -> ArmaModel:
    """Hannan-Rissanen estimate of an ARMA(p, q) model with intercept.

    A long autoregression supplies innovation estimates, then the series is
    regressed on its own lags and the lagged innovations.  For ``q == 0`` this
    is ordinary least squares on the lags.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    if p < 0 or q < 0:
        raise ValueError("orders must be nonnegative")
    if x.size < 10 * (p + q + 1):
        raise InsufficientData(f"need at least {10 * (p + q + 1)} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if x.var() < 1e-12:
        raise DegenerateSeries("series variance is below 1e-12")
    if q > 0:
        long_order = max(20, 2 * (p + q))
        if x.size <= long_order + q + p + 1:
            raise InsufficientData(f"series too short for a long AR({long_order}) pre-fit")
        X = np.column_stack([np.ones(x.size - long_order), _lagged(x, long_order, long_order)])
        beta, *_ = np.linalg.lstsq(X, x[long_order:], rcond=None)
        innov = np.zeros(x.size)
        innov[long_order:] = x[long_order:] - X @ beta
        start = long_order + q
        X2 = np.column_stack([np.ones(x.size - start), _lagged(x, p, start)[:, :p] if p else
                              np.empty((x.size - start, 0)), _lagged(innov, q, start)])
    else:
        start = p
        X2 = np.column_stack([np.ones(x.size - start), _lagged(x, p, start)])
    y = x[start:]
    beta2, *_ = np.linalg.lstsq(X2, y, rcond=None)
    resid = y - X2 @ beta2
    return ArmaModel(p, q, beta2[1:1 + p], beta2[1 + p:1 + p + q], float(beta2[0]),
                     ResidualDistribution.fit(resid, residual))


def sample_noise(model: ArmaModel, horizon: int, rng) -> np.ndarray:
    """One ARMA path of length ``horizon`` driven by the model's innovations.

    Pre-sample values and innovations are zero and the intercept is left out,
    so the path is a zero-centred perturbation to add to a forecast.
    ``rng`` is a seed or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng)
    e = model.residual_dist.draw(rng, horizon)
    phi = model.ar_coeffs
    theta = model.ma_coeffs
    if model.p == 0 and model.q == 0:
        return e.astype(float, copy=True)
    out = np.zeros(horizon)
    for t in range(horizon):
        v = e[t]
        for i in range(min(model.p, t)):
            v += phi[i] * out[t - 1 - i]
        for j in range(min(model.q, t)):
            v += theta[j] * e[t - 1 - j]
        out[t] = v
    return out


@dataclass(frozen=True)
class PowerCurve:
    cut_in: float = 3.0
    rated_speed: float = 12.0
    cut_out: float = 25.0
    rated_power: float = 400.0

    def __post_init__(self):
        if not 0 < self.cut_in < self.rated_speed < self.cut_out:
            raise ValueError("require 0 < cut_in < rated_speed < cut_out")
        if not self.rated_power > 0:
            raise ValueError("rated_power must be positive")

    def __call__(self, speed):
        return speed_to_power(self, speed)

    def inverse(self, power):
        """Smallest speed producing ``power`` (rated power maps to rated speed)."""
        power = np.clip(np.asarray(power, dtype=float), 0.0, self.rated_power)
        frac = power / self.rated_power
        speed = np.cbrt(self.cut_in ** 3 + frac * (self.rated_speed ** 3 - self.cut_in ** 3))
        return np.where(power > 0, speed, 0.0)

    def to_dict(self):
        return {"cut_in": self.cut_in, "rated_speed": self.rated_speed,
                "cut_out": self.cut_out, "rated_power": self.rated_power}


def speed_to_power(curve: PowerCurve, speed):
    """Cubic ramp between cut-in and rated speed, flat to cut-out, zero elsewhere."""
    v = np.asarray(speed, dtype=float)
    if np.any(v < 0):
        raise ValueError("wind speed must be nonnegative")
    ramp = curve.rated_power * (v ** 3 - curve.cut_in ** 3) / (curve.rated_speed ** 3 - curve.cut_in ** 3)
    out = np.where(v < curve.cut_in, 0.0,
                   np.where(v < curve.rated_speed, ramp,
                            np.where(v < curve.cut_out, curve.rated_power, 0.0)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PenaltyPrices:
    """Shortfall and curtailment prices derived from each scenario's prices.

    up = kappa_up * max(rt, da, 0) + floor_up,  op = kappa_op * max(rt, 0)
    """

    kappa_up: float = 1.5
    floor_up: float = 5.0
    kappa_op: float = 0.5
    include_da: bool = True

    def up(self, rt, da):
        ref = np.maximum(rt, da[:, None]) if self.include_da else rt
        return self.kappa_up * np.maximum(ref, 0.0) + self.floor_up

    def op(self, rt):
        return self.kappa_op * np.maximum(rt, 0.0)


def generate_scenarios(day: MarketDay, price_model: ArmaModel, wind_model: ArmaModel,
                       curve: PowerCurve, n: int, seed: int,
                       penalties: PenaltyPrices = PenaltyPrices()) -> ScenarioSet:
    """Sample ``n`` equiprobable scenarios around the day's forecasts.

    Scenario ``w`` uses generator seed ``seed + w``; price noise is drawn
    before wind noise from that generator, independently of each other.
    """
    if n < 1:
        raise ValueError("need at least one scenario")
    T = day.horizon
    speed_fc = day.wind_speed_forecast
    if speed_fc is None:
        speed_fc = curve.inverse(day.wind_forecast)
    rt = np.empty((T, n))
    wind = np.empty((T, n))
    for w in range(n):
        rng = np.random.default_rng(seed + w)
        rt[:, w] = day.rt_price_forecast + sample_noise(price_model, T, rng)
        speed = np.maximum(speed_fc + sample_noise(wind_model, T, rng), 0.0)
        wind[:, w] = speed_to_power(curve, speed)
    if day.wind_speed_forecast is None:
        # keep the inverted curve from drifting the unperturbed values
        same = np.isclose(wind, curve(speed_fc)[:, None])
        wind = np.where(same, day.wind_forecast[:, None], wind)
    return ScenarioSet(np.full(n, 1.0 / n), wind, rt, penalties.up(rt, day.da_price), penalties.op(rt))


def save_models(path, price_model: ArmaModel, wind_model: ArmaModel, curve: PowerCurve):
    doc = {"format": "windbid-noise-models", "version": MODEL_FORMAT_VERSION,
           "price_model": price_model.to_dict(), "wind_model": wind_model.to_dict(),
           "power_curve": curve.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_models(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported noise-model file version {doc.get('version')!r}")
    return (ArmaModel.from_dict(doc["price_model"]), ArmaModel.from_dict(doc["wind_model"]),
            PowerCurve(**doc["power_curve"]))
