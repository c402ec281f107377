import filecmp

import numpy as np
import pytest

from windbid.data import synth_data
from windbid.env import EpisodeConfig, EpisodeSource
from windbid.evaluation import (BASELINES, N_BINS, SP_POLICY, EvalRecord, action_histogram,
                                bid_fractions, evaluate, read_records, summarize, write_records,
                                write_report)
from windbid.market import solve_full_sp
from windbid.scenarios import ArmaModel, fit_arma


@pytest.fixture(scope="module")
def source():
    data = synth_data(15, 2)
    return EpisodeSource(data, fit_arma(data.rt_price, 5, 2), fit_arma(data.wind_speed, 3, 0),
                         config=EpisodeConfig(n_scenarios=4))


@pytest.fixture(scope="module")
def records(source):
    pol = {SP_POLICY: SP_POLICY, **BASELINES}
    return evaluate(pol, 12, source, 7)


def test_every_ratio_is_dominated(records):
    for rec in records:
        for name in rec.values:
            assert rec.dominated(name)
            r = rec.ratio(name)
            assert np.isnan(r) or r <= 1 + 1e-6


def test_sp_bid_policy_scores_one(source):
    def sp_policy(state):
        return solve_full_sp(state.day, state.battery, state.scenarios).first_stage

    recs = evaluate({"sp_bid": sp_policy}, 6, source, 3)
    for rec in recs:
        assert rec.ratio("sp_bid") == pytest.approx(1.0, abs=1e-6)


def test_evaluation_is_deterministic(source, records, tmp_path):
    again = evaluate({SP_POLICY: SP_POLICY, **BASELINES}, 12, source, 7)
    write_records(records, tmp_path / "a.csv")
    write_records(again, tmp_path / "b.csv")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)
    threaded = evaluate({SP_POLICY: SP_POLICY, **BASELINES}, 12, source, 7, threads=3)
    write_records(threaded, tmp_path / "c.csv")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "c.csv", shallow=False)


def test_no_noise_episodes_ratio_at_most_one():
    data = synth_data(10, 4)
    zero = ArmaModel.zero()
    src = EpisodeSource(data, zero, zero, config=EpisodeConfig(n_scenarios=1))
    for rec in evaluate(dict(BASELINES), 100, src, 0):
        for name in BASELINES:
            assert rec.ratio(name) <= 1 + 1e-6


def test_csv_round_trip(records, tmp_path):
    path = tmp_path / "eval_records.csv"
    write_records(records, path)
    back = read_records(path)
    write_records(back, tmp_path / "again.csv")
    assert filecmp.cmp(path, tmp_path / "again.csv", shallow=False)
    s1, s2 = summarize(records), summarize(back)
    for name in s1:
        assert s1[name].mean_ratio == s2[name].mean_ratio
        np.testing.assert_array_equal(s1[name].action_counts, s2[name].action_counts)
    assert path.read_text().startswith("# ")


def test_summary_is_permutation_invariant(records):
    s1 = summarize(records)
    s2 = summarize(list(reversed(records)))
    for name in s1:
        assert s1[name].mean_ratio == s2[name].mean_ratio
        assert s1[name].median_ratio == s2[name].median_ratio
        np.testing.assert_array_equal(s1[name].action_counts, s2[name].action_counts)


def test_single_row_summary():
    rec = EvalRecord(0, 0, 0, 200.0, values={SP_POLICY: 200.0, "x": 150.0})
    s = summarize([rec])
    assert s["x"].mean_ratio == 0.75 and s["x"].median_ratio == 0.75
    assert s[SP_POLICY].share_within_95 == 1.0
    assert s["x"].share_below_85 == 1.0


def test_failures_and_tiny_optima_are_excluded():
    good = EvalRecord(0, 0, 0, 100.0, values={SP_POLICY: 100.0, "x": 90.0})
    tiny = EvalRecord(1, 1, 0, 1e-9, values={SP_POLICY: 1e-9, "x": 0.0})
    failed = EvalRecord(2, 2, 0, 100.0, values={SP_POLICY: 100.0, "x": float("nan")},
                        errors={"x": "scenario 3: iteration limit reached"})
    s = summarize([good, tiny, failed])["x"]
    assert s.n_excluded == 1 and s.n_failed == 1
    assert s.mean_ratio == pytest.approx(0.9) and s.ratios.size == 1


def test_action_histogram():
    c = action_histogram(np.full(30, 0.5))
    assert np.count_nonzero(c) == 1 and c[10] == 30
    c = action_histogram([0.0, 0.05, 0.3, 0.999, 1.0, 1.5, np.inf])
    assert c[0] == 1 and c[1] == 1 and c[6] == 1
    assert c[N_BINS - 1] == 2 and c[N_BINS] == 2
    assert c.sum() == 7


def test_bid_fractions_overflow():
    f = bid_fractions([5, 0, 3, 12], np.array([10, 0, 0, 10]))
    np.testing.assert_array_equal(f, [0.5, 0.0, np.inf, 1.2])


def test_report_files(records, tmp_path):
    write_report(records, tmp_path)
    for name in ("eval_records.csv", "summary.csv", "histogram.csv", "ratios.csv", "plot_data.json"):
        assert (tmp_path / name).exists()
    hist = (tmp_path / "histogram.csv").read_text().splitlines()
    assert hist[0].startswith("#")
    assert len(hist) == 2 + (N_BINS + 1) * len(summarize(records))


def test_needs_episodes(source):
    with pytest.raises(ValueError):
        evaluate(dict(BASELINES), 0, source, 0)
    with pytest.raises(ValueError):
        summarize([])
