"""Flat ``key = value`` run configuration with dotted module prefixes."""
from __future__ import annotations

from typing import Any, Dict

from windbid.agent.ddpg import AgentConfig
from windbid.env import EpisodeConfig
from windbid.errors import ConfigError
from windbid.market.lp import SolverOptions
from windbid.scenarios import PenaltyPrices, PowerCurve

DEFAULTS: Dict[str, Any] = {
    "run.seed": 0,
    "run.threads": 1,
    "data.prices": "",
    "data.wind": "",
    "data.synth_days": 200,
    "market.horizon": 24,
    "market.feas_tol": 1e-7,
    "market.opt_tol": 1e-7,
    "market.piv_tol": 1e-9,
    "market.report_tol": 1e-6,
    "market.refactor_every": 50,
    "market.cap_shortfall": False,
    "scenario.n": 10,
    "scenario.price_p": 5,
    "scenario.price_q": 2,
    "scenario.wind_p": 3,
    "scenario.wind_q": 0,
    "scenario.residual": "empirical",
    "scenario.kappa_up": 1.5,
    "scenario.floor_up": 5.0,
    "scenario.kappa_op": 0.5,
    "scenario.up_includes_da": True,
    "curve.cut_in": 3.0,
    "curve.rated_speed": 12.0,
    "curve.cut_out": 25.0,
    "curve.rated_power": 400.0,
    "env.battery": True,
    "env.e_max_factor": (0.25, 2.0),
    "env.e_init_frac": (0.0, 1.0),
    "env.e_final_frac": (0.0, 1.0),
    "env.power_frac": (0.1, 0.5),
    "env.eta_ch": (0.85, 1.0),
    "env.eta_dis": (0.85, 1.0),
    "env.discharge_convention": "paper",
    "agent.actor_lr": 1e-4,
    "agent.critic_lr": 1e-3,
    "agent.tau": 0.005,
    "agent.batch_size": 64,
    "agent.buffer_capacity": 100_000,
    "agent.sigma": 0.2,
    "agent.sigma_decay": 0.999,
    "agent.hidden": (16, 16, 16),
    "agent.activation": "relu",
    "agent.target_networks": False,
    "agent.log_every": 100,
    "agent.checkpoint_every": 10_000,
    "train.steps": 500_000,
    "eval.episodes": 2000,
}


def _coerce(key, raw, default):
    text = raw.strip() if isinstance(raw, str) else raw
    try:
        if isinstance(default, bool):
            if isinstance(text, bool):
                return text
            low = str(text).lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = text if isinstance(text, (tuple, list)) else [p for p in str(text).split(",") if p.strip()]
            kind = type(default[0])
            return tuple(kind(p) for p in items)
        return str(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config_text(text: str, source="<config>") -> Dict[str, Any]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value, DEFAULTS[key])
    return out


class RunConfig:
    """Resolved settings; building it re-checks every module's own validation."""

    def __init__(self, overrides: Dict[str, Any] = None):
        self.values = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
            self.values[key] = _coerce(key, value, DEFAULTS[key])
        self.validate()

    @classmethod
    def load(cls, path=None, overrides=None) -> "RunConfig":
        values = {}
        if path:
            try:
                with open(path) as fh:
                    values = parse_config_text(fh.read(), str(path))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        values.update(overrides or {})
        return cls(values)

    def __getitem__(self, key):
        return self.values[key]

    def validate(self):
        v = self.values
        try:
            self.solver_options()
            self.power_curve()
            self.episode_config()
            self.agent_config()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        if v["market.horizon"] != 24:
            raise ConfigError("market.horizon: only 24-hour days are supported")
        for key in ("scenario.price_p", "scenario.price_q", "scenario.wind_p", "scenario.wind_q"):
            if v[key] < 0:
                raise ConfigError(f"{key} must be nonnegative")
        if v["scenario.residual"] not in ("empirical", "gaussian"):
            raise ConfigError("scenario.residual must be 'empirical' or 'gaussian'")
        if v["run.threads"] < 1:
            raise ConfigError("run.threads must be at least 1")
        if v["data.synth_days"] < 1:
            raise ConfigError("data.synth_days must be at least 1")
        if v["train.steps"] < 0 or v["eval.episodes"] < 1:
            raise ConfigError("train.steps must be >= 0 and eval.episodes >= 1")

    def solver_options(self) -> SolverOptions:
        v = self.values
        return SolverOptions(feas_tol=v["market.feas_tol"], opt_tol=v["market.opt_tol"],
                             piv_tol=v["market.piv_tol"], report_tol=v["market.report_tol"],
                             refactor_every=v["market.refactor_every"])

    def power_curve(self) -> PowerCurve:
        v = self.values
        return PowerCurve(v["curve.cut_in"], v["curve.rated_speed"], v["curve.cut_out"], v["curve.rated_power"])

    def penalties(self) -> PenaltyPrices:
        v = self.values
        return PenaltyPrices(v["scenario.kappa_up"], v["scenario.floor_up"], v["scenario.kappa_op"],
                             v["scenario.up_includes_da"])

    def episode_config(self) -> EpisodeConfig:
        v = self.values
        return EpisodeConfig(v["scenario.n"], v["env.e_max_factor"], v["env.e_init_frac"],
                             v["env.e_final_frac"], v["env.power_frac"], v["env.eta_ch"], v["env.eta_dis"],
                             v["env.battery"], v["env.discharge_convention"], self.penalties(),
                             v["market.cap_shortfall"])

    def agent_config(self) -> AgentConfig:
        v = self.values
        return AgentConfig(v["agent.actor_lr"], v["agent.critic_lr"], v["agent.tau"], v["agent.batch_size"],
                           v["agent.buffer_capacity"], v["agent.sigma"], v["agent.sigma_decay"],
                           v["agent.hidden"], v["agent.activation"], v["run.seed"],
                           v["agent.target_networks"], v["agent.log_every"], v["agent.checkpoint_every"])

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}

    def dumps(self) -> str:
        lines = []
        for k, v in self.values.items():
            text = ",".join(str(x) for x in v) if isinstance(v, tuple) else str(v)
            lines.append(f"{k} = {text}")
        return "\n".join(lines) + "\n"
