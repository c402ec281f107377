"""Command-line entry point: ``windbid <command> [options]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from importlib import resources

import numpy as np

from windbid import __version__
from windbid.agent import load_agent, train
from windbid.config import RunConfig
from windbid.data import DataSet, ingest, synth_data
from windbid.env import BiddingEnv, EpisodeSource
from windbid.errors import (ConfigError, DataExhausted, DegenerateSeries, InsufficientData,
                            NumericalFailure, SchemaError)
from windbid.evaluation import BASELINES, SP_POLICY, agent_policy, evaluate, write_report
from windbid.market import solve_full_sp, solve_second_stage
from windbid.market.types import BatteryContext, MarketDay, ScenarioSet
from windbid.scenarios import fit_arma, load_models, save_models

log = logging.getLogger("windbid")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4
TRAIN_SEED_OFFSET = 1_000_000_007  # keeps training episodes apart from evaluation seeds


class UsageError(Exception):
    pass


class SolverError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, cfg: RunConfig, seeds: dict, artifacts):
    doc = {"command": command, "version": __version__, "argv": sys.argv[1:], "config": cfg.to_dict(),
           "seeds": seeds,
           "artifacts": {os.path.basename(p): _sha256(p) for p in artifacts if os.path.exists(p)}}
    path = os.path.join(out_dir, f"manifest_{command}.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return path


def load_instance(name_or_path):
    """Read a day/battery/scenarios JSON; bare names resolve to bundled fixtures."""
    path = name_or_path
    if not os.path.exists(path):
        fixture = resources.files("windbid") / "fixtures" / f"{name_or_path}.json"
        if not fixture.is_file():
            raise FileNotFoundError(f"no instance file or bundled fixture named {name_or_path!r}")
        path = str(fixture)
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return (MarketDay.from_dict(doc["day"]), BatteryContext.from_dict(doc["battery"]),
                ScenarioSet.from_dict(doc["scenarios"]), bool(doc.get("cap_shortfall", False)))
    except KeyError as exc:
        raise SchemaError(f"instance is missing {exc}", path) from None


def load_data(args, cfg: RunConfig) -> DataSet:
    prices = args.prices or cfg["data.prices"]
    wind = args.wind or cfg["data.wind"]
    if prices or wind:
        if not (prices and wind):
            raise UsageError("--prices and --wind must be given together")
        return ingest(prices, wind)
    return synth_data(cfg["data.synth_days"], cfg["run.seed"])


def fit_models(data: DataSet, cfg: RunConfig):
    kind = cfg["scenario.residual"]
    price = fit_arma(data.rt_price, cfg["scenario.price_p"], cfg["scenario.price_q"], kind)
    wind = fit_arma(data.wind_speed, cfg["scenario.wind_p"], cfg["scenario.wind_q"], kind)
    return price, wind


def episode_source(args, cfg: RunConfig) -> EpisodeSource:
    data = load_data(args, cfg)
    if getattr(args, "noise", None):
        price, wind, curve = load_models(args.noise)
    else:
        price, wind = fit_models(data, cfg)
        curve = cfg.power_curve()
    return EpisodeSource(data, price, wind, curve, cfg.episode_config())


def cmd_synth(args, cfg):
    data = synth_data(args.days or cfg["data.synth_days"], cfg["run.seed"])
    prices = os.path.join(args.out_dir, "prices.csv")
    wind = os.path.join(args.out_dir, "wind.csv")
    data.write_csv(prices, wind)
    print(f"wrote {len(data)} hourly records ({data.n_days} days) to {prices} and {wind}")
    return [prices, wind], {"data": cfg["run.seed"]}


def cmd_fit_noise(args, cfg):
    data = load_data(args, cfg)
    price, wind = fit_models(data, cfg)
    path = os.path.join(args.out_dir, "noise_models.json")
    save_models(path, price, wind, cfg.power_curve())
    print(f"price ARMA({price.p},{price.q}) ar={np.round(price.ar_coeffs, 4).tolist()} "
          f"ma={np.round(price.ma_coeffs, 4).tolist()}")
    print(f"wind ARMA({wind.p},{wind.q}) ar={np.round(wind.ar_coeffs, 4).tolist()} "
          f"ma={np.round(wind.ma_coeffs, 4).tolist()}")
    print(f"saved {path}")
    return [path], {"data": cfg["run.seed"]}


def cmd_train(args, cfg):
    steps = cfg["train.steps"]
    agent_cfg = cfg.agent_config()
    if steps < agent_cfg.batch_size:
        raise UsageError(f"steps ({steps}) below batch size ({agent_cfg.batch_size})")
    src = episode_source(args, cfg)
    env_seed = TRAIN_SEED_OFFSET + cfg["run.seed"]
    env = BiddingEnv(src.data, src.price_model, src.wind_model, src.curve, src.config, seed=env_seed,
                     options=cfg.solver_options(), threads=cfg["run.threads"])
    ckpt = os.path.join(args.out_dir, args.name + ".json")
    t0 = time.time()
    agent, history = train(env, agent_cfg, steps, checkpoint_path=ckpt)
    curve_path = os.path.join(args.out_dir, args.name + "_curve.csv")
    history.write_csv(curve_path)
    last = history.rows[-1]
    print(f"trained {steps} steps in {time.time() - t0:.1f}s, final mean reward {last['mean_reward']:.4f}")
    print(f"saved {ckpt} and {curve_path}")
    return [ckpt, curve_path], {"agent": agent_cfg.seed, "env": env_seed}


def _run_eval(args, cfg, policies):
    src = episode_source(args, cfg)
    records = evaluate(policies, cfg["eval.episodes"], src, cfg["run.seed"], cfg.solver_options(),
                       threads=cfg["run.threads"])
    summary = write_report(records, args.out_dir)
    print(f"{'policy':<10} {'mean':>8} {'median':>8} {'>=95%':>7} {'<85%':>7} {'failed':>6}")
    for s in summary.values():
        print(f"{s.policy:<10} {s.mean_ratio:8.4f} {s.median_ratio:8.4f} {s.share_within_95:7.3f} "
              f"{s.share_below_85:7.3f} {s.n_failed:6d}")
    names = ("eval_records.csv", "summary.csv", "histogram.csv", "ratios.csv", "plot_data.json")
    return [os.path.join(args.out_dir, n) for n in names], {"episodes": cfg["run.seed"]}


def cmd_evaluate(args, cfg):
    policies = {SP_POLICY: SP_POLICY}
    policies.update(BASELINES)
    for spec in args.agent or []:
        name, _, path = spec.rpartition("=")
        try:
            agent = load_agent(path)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load agent {path!r}: {exc}") from None
        policies[name or "rl"] = agent_policy(agent)
    return _run_eval(args, cfg, policies)


def cmd_bench(args, cfg):
    return _run_eval(args, cfg, {SP_POLICY: SP_POLICY, "bench": BASELINES["bench"]})


def cmd_solve_day(args, cfg):
    day, battery, scenarios, cap = load_instance(args.instance)
    cap = cap or cfg["market.cap_shortfall"]
    if args.bid is not None:
        bid = [float(x) for x in args.bid.split(",")]
        report = solve_second_stage(day, battery, scenarios, bid, cfg.solver_options(),
                                    threads=cfg["run.threads"], cap_shortfall=cap)
    else:
        report = solve_full_sp(day, battery, scenarios, cfg.solver_options(), cap_shortfall=cap)
    if not report.optimal:
        raise SolverError(f"problem is {report.status.value}")
    print(f"{report.objective:.10g}")
    print("bid " + " ".join(f"{b:.10g}" for b in report.first_stage.p_da))
    return [], {}


COMMANDS = {
    "synth": (cmd_synth, "write synthetic prices.csv and wind.csv"),
    "fit-noise": (cmd_fit_noise, "fit ARMA noise models and save them as JSON"),
    "train": (cmd_train, "train a DDPG bidding agent"),
    "evaluate": (cmd_evaluate, "compare agents and baselines against the full program"),
    "solve-day": (cmd_solve_day, "solve one instance file and print its optimum and bid"),
    "bench": (cmd_bench, "evaluate the benchmark rule only"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="windbid", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out-dir", default=".")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("synth",):
            p.add_argument("--days", type=int)
        if name in ("fit-noise", "train", "evaluate", "bench"):
            p.add_argument("--prices", help="prices CSV (timestamp,da_price,rt_price)")
            p.add_argument("--wind", help="wind CSV (timestamp,wind_speed)")
            p.add_argument("--scenarios", type=int)
        if name in ("train", "evaluate", "bench"):
            p.add_argument("--noise", help="noise_models.json from fit-noise")
        if name == "train":
            p.add_argument("--steps", type=int)
            p.add_argument("--name", default="agent", help="checkpoint file stem")
        if name in ("evaluate", "bench"):
            p.add_argument("--episodes", type=int)
        if name == "evaluate":
            p.add_argument("--agent", action="append", metavar="[NAME=]PATH",
                           help="agent checkpoint to evaluate (repeatable)")
        if name == "solve-day":
            p.add_argument("instance", help="instance JSON or a bundled fixture name (instance_a, instance_b)")
            p.add_argument("--bid", help="comma-separated day-ahead bid; solve the second stage only")
    return parser


def _overrides(args):
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    for flag, key in (("seed", "run.seed"), ("threads", "run.threads"), ("steps", "train.steps"),
                      ("episodes", "eval.episodes"), ("scenarios", "scenario.n")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = RunConfig.load(args.config, _overrides(args))
        os.makedirs(args.out_dir, exist_ok=True)
        artifacts, seeds = func(args, cfg)
        if args.command != "solve-day":
            write_manifest(args.out_dir, args.command, cfg, seeds, artifacts)
        return EXIT_OK
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, DataExhausted, DegenerateSeries, InsufficientData, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
