import numpy as np
import pytest

from windbid.cli import load_instance
from windbid.market.types import BatteryContext, MarketDay, ScenarioSet


def realistic_instance(rng, T=24, S=10, battery=True):
    """Day-sized instance shaped like the synthetic data, penalties as in scenario generation."""
    h = np.arange(T)
    da = 40 + 15 * np.sin(2 * np.pi * (h - 8) / 24) + rng.normal(0, 5, T)
    rt_fc = da + rng.normal(0, 8, T)
    G = np.clip(rng.uniform(0, 400) + rng.normal(0, 60, T), 0, 400)
    rt = rt_fc[:, None] + rng.normal(0, 10, (T, S))
    wind = np.clip(G[:, None] + rng.normal(0, 50, (T, S)), 0, 400)
    up = 1.5 * np.maximum(np.maximum(rt, da[:, None]), 0) + 5
    op = 0.5 * np.maximum(rt, 0)
    if battery:
        e_max = rng.uniform(0.25, 2) * max(G.mean(), 1.0) * 4
        e_init = rng.uniform(0, e_max)
        p = rng.uniform(40, 200)
        bat = BatteryContext(0, e_max, e_init, rng.uniform(0, e_init), p, p,
                             rng.uniform(0.85, 1), rng.uniform(0.85, 1))
    else:
        bat = BatteryContext.disabled()
    return MarketDay(da, rt_fc, G), bat, ScenarioSet(np.full(S, 1 / S), wind, rt, up, op)


@pytest.fixture
def instance_a():
    return load_instance("instance_a")[:3]


@pytest.fixture
def instance_b():
    return load_instance("instance_b")[:3]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
