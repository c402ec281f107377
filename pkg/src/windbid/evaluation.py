"""Paired evaluation of bidding policies against the full stochastic program."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Union

import numpy as np

from windbid.env import EpisodeSource, EpisodeState, action_to_bid
from windbid.errors import WindBidError
from windbid.market import solve_full_sp, solve_second_stage
from windbid.market.lp import DEFAULT_OPTIONS, SolverOptions
from windbid.market.types import BidVector, as_bid
from windbid.strategies import benchmark_bid, full_bid, zero_bid

SP_POLICY = "sp"
RATIO_EPS = 1e-6
DOMINANCE_TOL = 1e-6
BIN_WIDTH = 0.05
N_BINS = 20  # [0, 1] in 0.05 steps, then one overflow bin for decisions above 1

Policy = Callable[[EpisodeState], Union[BidVector, np.ndarray]]


def day_policy(rule) -> Policy:
    """Adapt a ``MarketDay -> BidVector`` rule."""
    return lambda state: rule(state.day)


def agent_policy(agent) -> Policy:
    return lambda state: action_to_bid(agent.act(state.observation), state.day)


BASELINES: Dict[str, Policy] = {
    "bench": day_policy(benchmark_bid),
    "zero": day_policy(zero_bid),
    "full": day_policy(full_bid),
}


def bid_fractions(bid, wind_forecast) -> np.ndarray:
    """Bid as a fraction of forecast wind; a positive bid on a calm hour is +inf."""
    bid = np.asarray(bid, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(wind_forecast > 0, bid / np.where(wind_forecast > 0, wind_forecast, 1.0),
                        np.where(bid > 0, np.inf, 0.0))
    return frac


@dataclass
class EvalRecord:
    episode: int
    seed: int
    day_index: int
    f_sp: float
    values: Dict[str, float] = field(default_factory=dict)
    actions: Dict[str, np.ndarray] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)

    @property
    def sp_failed(self) -> bool:
        return SP_POLICY in self.errors

    @property
    def ratio_defined(self) -> bool:
        return not self.sp_failed and abs(self.f_sp) >= RATIO_EPS

    def ratio(self, policy: str) -> float:
        v = self.values.get(policy, float("nan"))
        if not self.ratio_defined or policy in self.errors:
            return float("nan")
        return v / self.f_sp

    def dominated(self, policy: str) -> bool:
        """f_policy <= f_sp up to tolerance (vacuously true for failed solves)."""
        v = self.values.get(policy, float("nan"))
        if math.isnan(v) or self.sp_failed:
            return True
        return v <= self.f_sp + DOMINANCE_TOL * (1.0 + abs(self.f_sp))


def _evaluate_episode(i, seed, source, policies, options, cap_shortfall):
    state = source.make(seed)
    rec = EvalRecord(i, seed, state.day_index, float("nan"))
    day, battery, scen = state.day, state.battery, state.scenarios
    try:
        sp = solve_full_sp(day, battery, scen, options, cap_shortfall=cap_shortfall)
        if not sp.optimal:
            raise WindBidError(f"full program is {sp.status.value}")
    except WindBidError as exc:
        rec.errors[SP_POLICY] = str(exc)
        return rec
    rec.f_sp = sp.objective
    rec.values[SP_POLICY] = sp.objective
    rec.actions[SP_POLICY] = bid_fractions(sp.first_stage.p_da, day.wind_forecast)
    for name, policy in policies.items():
        if name == SP_POLICY:
            continue
        try:
            bid = as_bid(policy(state))
            rep = solve_second_stage(day, battery, scen, bid, options, cap_shortfall=cap_shortfall)
            rec.actions[name] = bid_fractions(bid.p_da, day.wind_forecast)
            if not rep.optimal:
                raise WindBidError(f"second stage is {rep.status.value}")
            rec.values[name] = rep.objective
        except WindBidError as exc:
            rec.values[name] = float("nan")
            rec.errors[name] = str(exc)
    return rec


def evaluate(policies: Mapping[str, Policy], n_episodes: int, source: EpisodeSource, seed: int,
             options: SolverOptions = DEFAULT_OPTIONS, threads: int = 1,
             cap_shortfall: Optional[bool] = None) -> List[EvalRecord]:
    """Score every policy on the same ``n_episodes`` episodes (seeds ``seed + i``).

    Each episode's scenario set is shared by the full program and all
    policies.  Solver failures are kept on the record rather than raised.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    if cap_shortfall is None:
        cap_shortfall = source.config.cap_shortfall
    work = [(i, seed + i) for i in range(n_episodes)]

    def run(item):
        return _evaluate_episode(item[0], item[1], source, policies, options, cap_shortfall)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, work))
    return [run(item) for item in work]


def policy_names(records: List[EvalRecord]) -> List[str]:
    names = []
    for rec in records:
        for name in list(rec.values) + list(rec.errors):
            if name not in names:
                names.append(name)
    return names


def action_histogram(actions) -> np.ndarray:
    """Counts over 0.05-wide bins on [0, 1]; values above 1 go to a final overflow bin."""
    a = np.asarray(actions, dtype=float).reshape(-1)
    a = a[~np.isnan(a)]
    counts = np.zeros(N_BINS + 1, dtype=np.int64)
    over = a > 1.0
    counts[N_BINS] = int(over.sum())
    # small tolerance so that e.g. 0.3 lands in [0.30, 0.35) despite rounding
    idx = np.floor(np.clip(a[~over], 0.0, 1.0) / BIN_WIDTH + 1e-9).astype(int)
    np.add.at(counts, np.minimum(idx, N_BINS - 1), 1)
    return counts


@dataclass
class PolicySummary:
    policy: str
    n_episodes: int
    n_failed: int
    n_excluded: int
    mean_ratio: float
    median_ratio: float
    share_within_95: float
    share_below_85: float
    mean_value: float
    action_counts: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)


def summarize(records: List[EvalRecord]) -> Dict[str, PolicySummary]:
    """Ratio statistics and action histograms per policy.

    Records whose full program failed or whose optimum is within 1e-6 of zero
    are left out of the ratio statistics and counted as excluded.
    """
    if not records:
        raise ValueError("cannot summarize an empty table")
    out = {}
    for name in policy_names(records):
        failed = sum(1 for r in records if name in r.errors or r.sp_failed)
        excluded = sum(1 for r in records if not r.sp_failed and not r.ratio_defined)
        ratios = np.array(sorted(r.ratio(name) for r in records if r.ratio_defined and name not in r.errors))
        values = sorted(r.values[name] for r in records if name in r.values and not math.isnan(r.values[name]))
        acts = [r.actions[name] for r in records if name in r.actions]
        n = ratios.size
        out[name] = PolicySummary(
            name, len(records), failed, excluded,
            math.fsum(ratios) / n if n else float("nan"),
            float(np.median(ratios)) if n else float("nan"),
            float(np.sum(ratios >= 0.95) / n) if n else float("nan"),
            float(np.sum(ratios < 0.85) / n) if n else float("nan"),
            math.fsum(values) / len(values) if values else float("nan"),
            action_histogram(np.concatenate(acts)) if acts else np.zeros(N_BINS + 1, dtype=np.int64),
            ratios,
        )
    return out


RECORD_FIELDS = ["episode", "seed", "day_index", "policy", "f_policy", "f_sp", "ratio", "error", "actions"]


def _num(x):
    return repr(float(x))


def write_records(records: List[EvalRecord], path):
    """One row per (episode, policy); ``actions`` is a space-separated list of fractions."""
    with open(path, "w", newline="") as fh:
        fh.write("# episode, seed, day_index, policy, f_policy (objective with the policy's bid), "
                 "f_sp (full-program optimum), ratio (f_policy / f_sp, nan when undefined), "
                 "error (empty on success), actions (bid / forecast wind per hour)\n")
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for rec in records:
            names = [SP_POLICY] + [n for n in policy_names([rec]) if n != SP_POLICY]
            for name in names:
                acts = rec.actions.get(name)
                w.writerow([rec.episode, rec.seed, rec.day_index, name,
                            _num(rec.values.get(name, float("nan"))), _num(rec.f_sp),
                            _num(rec.ratio(name)), rec.errors.get(name, ""),
                            "" if acts is None else " ".join(_num(a) for a in acts)])


def read_records(path) -> List[EvalRecord]:
    records: Dict[int, EvalRecord] = {}
    with open(path, newline="") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        for row in csv.DictReader(lines):
            ep = int(row["episode"])
            rec = records.get(ep)
            if rec is None:
                rec = records[ep] = EvalRecord(ep, int(row["seed"]), int(row["day_index"]),
                                               float(row["f_sp"]))
            name = row["policy"]
            value = float(row["f_policy"])
            if row["error"]:
                rec.errors[name] = row["error"]
                if name != SP_POLICY:
                    rec.values[name] = value
            else:
                rec.values[name] = value
            if row["actions"]:
                rec.actions[name] = np.array([float(a) for a in row["actions"].split()])
    return [records[k] for k in sorted(records)]


SUMMARY_FIELDS = ["policy", "n_episodes", "n_failed", "n_excluded", "mean_ratio", "median_ratio",
                  "share_within_95", "share_below_85", "mean_value"]


def write_summary(summary: Dict[str, PolicySummary], path):
    with open(path, "w", newline="") as fh:
        fh.write("# policy, n_episodes, n_failed (solver failures), n_excluded (|f_sp| < 1e-6), "
                 "mean_ratio, median_ratio, share_within_95 (ratio >= 0.95), share_below_85 "
                 "(ratio < 0.85), mean_value (mean objective)\n")
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for s in summary.values():
            w.writerow([s.policy, s.n_episodes, s.n_failed, s.n_excluded, _num(s.mean_ratio),
                        _num(s.median_ratio), _num(s.share_within_95), _num(s.share_below_85),
                        _num(s.mean_value)])


def histogram_labels():
    edges = [round(i * BIN_WIDTH, 2) for i in range(N_BINS + 1)]
    labels = [f"[{lo:.2f},{hi:.2f})" for lo, hi in zip(edges[:-2], edges[1:-1])]
    return labels + ["[0.95,1.00]", ">1"]


def write_histogram(summary: Dict[str, PolicySummary], path):
    labels = histogram_labels()
    with open(path, "w", newline="") as fh:
        fh.write("# policy, bin (0.05-wide action bins on [0, 1] plus an overflow bin for bids above "
                 "forecast), lo, hi, count (hourly decisions in the bin), share (count / all decisions)\n")
        w = csv.writer(fh)
        w.writerow(["policy", "bin", "lo", "hi", "count", "share"])
        lows = [round(k * BIN_WIDTH, 2) for k in range(N_BINS)] + [1.0]
        highs = [round((k + 1) * BIN_WIDTH, 2) for k in range(N_BINS)] + [math.inf]
        for s in summary.values():
            total = int(s.action_counts.sum())
            for k, label in enumerate(labels):
                share = s.action_counts[k] / total if total else 0.0
                w.writerow([s.policy, label, _num(lows[k]), _num(highs[k]), int(s.action_counts[k]),
                            _num(share)])


def write_plot_data(summary: Dict[str, PolicySummary], path):
    """Sorted ratios per policy (an empirical distribution) plus the action histograms, as JSON."""
    doc = {"bin_labels": histogram_labels(),
           "policies": {name: {"ratios": s.ratios.tolist(), "action_counts": s.action_counts.tolist()}
                        for name, s in summary.items()}}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def write_ratio_distribution(summary: Dict[str, PolicySummary], path):
    with open(path, "w", newline="") as fh:
        fh.write("# policy, rank (0-based position after sorting), ratio (f_policy / f_sp)\n")
        w = csv.writer(fh)
        w.writerow(["policy", "rank", "ratio"])
        for s in summary.values():
            for k, r in enumerate(s.ratios):
                w.writerow([s.policy, k, _num(r)])


def write_report(records: List[EvalRecord], out_dir) -> Dict[str, PolicySummary]:
    """eval_records.csv, summary.csv, histogram.csv, ratios.csv and plot_data.json."""
    os.makedirs(out_dir, exist_ok=True)
    summary = summarize(records)
    write_records(records, os.path.join(out_dir, "eval_records.csv"))
    write_summary(summary, os.path.join(out_dir, "summary.csv"))
    write_histogram(summary, os.path.join(out_dir, "histogram.csv"))
    write_ratio_distribution(summary, os.path.join(out_dir, "ratios.csv"))
    write_plot_data(summary, os.path.join(out_dir, "plot_data.json"))
    return summary
