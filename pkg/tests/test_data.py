import logging

import numpy as np
import pytest

from windbid.data import ingest, synth_data
from windbid.errors import DataExhausted, SchemaError
from windbid.scenarios import PowerCurve


def _write(tmp_path, hours, start="2022-03-01T00:00", bad_line=None):
    base = np.datetime64(start, "h")
    prices = ["timestamp,da_price,rt_price"]
    wind = ["timestamp,wind_speed"]
    for i in range(hours):
        ts = str(base + i)
        da = "abc" if bad_line == i + 2 else f"{30 + i % 7}.5"
        prices.append(f"{ts},{da},{28 + i % 5}")
        wind.append(f"{ts},{5 + i % 9}")
    p, w = tmp_path / "prices.csv", tmp_path / "wind.csv"
    p.write_text("\n".join(prices) + "\n")
    w.write_text("\n".join(wind) + "\n")
    return p, w


def test_two_full_days(tmp_path):
    ds = ingest(*_write(tmp_path, 48))
    assert ds.n_days == 2 and len(ds) == 48
    assert ds.dropped_rows == 0 and ds.dropped_days == 0


def test_partial_day_is_dropped(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        ds = ingest(*_write(tmp_path, 47))
    assert ds.n_days == 1 and ds.dropped_days == 1
    assert "incomplete day" in caplog.text


def test_days_must_start_at_midnight(tmp_path):
    ds = ingest(*_write(tmp_path, 48, start="2022-03-01T05:00"))
    assert ds.n_days == 1
    assert str(ds.timestamps[0]) == "2022-03-02T00"


def test_malformed_price_reports_line(tmp_path):
    with pytest.raises(SchemaError) as info:
        ingest(*_write(tmp_path, 48, bad_line=7))
    assert info.value.line == 7 and info.value.column == "da_price"
    assert "line 7" in str(info.value)


def test_missing_column(tmp_path):
    p, w = _write(tmp_path, 24)
    p.write_text("timestamp,da_price\n2022-03-01T00:00,3\n")
    with pytest.raises(SchemaError):
        ingest(p, w)


def test_unmatched_and_empty_rows_count_as_dropped(tmp_path):
    p, w = _write(tmp_path, 48)
    lines = w.read_text().splitlines()
    lines[5] = lines[5].split(",")[0] + ","
    w.write_text("\n".join(lines + ["2022-03-05T00:00,4"]) + "\n")
    ds = ingest(p, w)
    # skipped wind row, its orphaned price row, and the extra wind hour
    assert ds.dropped_rows == 3
    assert ds.n_days == 1


def test_negative_wind_rejected(tmp_path):
    p, w = _write(tmp_path, 24)
    w.write_text(w.read_text().replace(",5\n", ",-5\n", 1))
    with pytest.raises(SchemaError):
        ingest(p, w)


def test_csv_round_trip(tmp_path):
    ds = synth_data(3, 11)
    ds.write_csv(tmp_path / "p.csv", tmp_path / "w.csv")
    back = ingest(tmp_path / "p.csv", tmp_path / "w.csv")
    np.testing.assert_array_equal(back.timestamps, ds.timestamps)
    np.testing.assert_array_equal(back.rt_price, ds.rt_price)
    np.testing.assert_array_equal(back.wind_speed, ds.wind_speed)


def test_synth_is_deterministic():
    a, b = synth_data(10, 5), synth_data(10, 5)
    assert len(a) == 240 and a.n_days == 10
    for col in ("da_price", "rt_price", "wind_speed"):
        np.testing.assert_array_equal(getattr(a, col), getattr(b, col))
        assert np.all(np.isfinite(getattr(a, col)))
    assert np.all(a.wind_speed >= 0)
    assert not np.array_equal(a.rt_price, synth_data(10, 6).rt_price)


def test_market_day_and_exhaustion():
    ds = synth_data(2, 0)
    curve = PowerCurve()
    day = ds.market_day(1, curve)
    np.testing.assert_array_equal(day.da_price, ds.da_price[24:48])
    np.testing.assert_allclose(day.wind_forecast, curve(ds.wind_speed[24:48]))
    with pytest.raises(DataExhausted):
        ds.market_day(2, curve)
