import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulrsvar.errors import IngestError
from ulrsvar.pipeline_app import (
    IntervalRow,
    SeriesBundle,
    apply_pipeline,
    ar_block_forecast,
    block_filter,
    compare_intervals,
    fit_ar,
    fit_block_ar1,
    horizon_in_blocks,
    ingest_csv,
    quarter_scale,
)
from ulrsvar.prediction import build_belt
from ulrsvar.rng import normals, stream


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def persistent_bundle(T=440, seed=0):
    z = normals(stream(seed, "series"), (T, 2))
    x = np.zeros((T, 2))
    for t in range(1, T):
        x[t] = np.array([0.995, 0.9]) * x[t - 1] + z[t]
    return SeriesBundle(("a", "b"), tuple(f"d{t}" for t in range(T)), x + np.array([10.0, -3.0]))


# ---------------------------------------------------------------- ingestion


def test_ingest_reads_columns(tmp_path):
    p = write(tmp_path, "# comment\ndate,x,y\n2000Q1,1.5,2\n2000Q2,2.5,3\n")
    b = ingest_csv(p)
    assert b.names == ("x", "y")
    assert b.dates == ("2000Q1", "2000Q2")
    np.testing.assert_array_equal(b.series("y"), [2.0, 3.0])
    sub = ingest_csv(p, date_column="date", columns=["y"])
    assert sub.values.shape == (2, 1)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("date,x\n1,2\n2\n", "line 3"),
        ("date,x\n1,2\n1,3\n", "duplicate date"),
        ("date,x\n1,abc\n", "line 2: non-numeric"),
        ("date,x\n1,\n", "non-numeric or missing"),
        ("date,x\n1,nan\n", "non-finite"),
        ("date\n1\n", "need a date column"),
        ("date,x\n", "no data rows"),
        ("", "empty"),
    ],
)
def test_ingest_errors_name_the_line(tmp_path, text, fragment):
    with pytest.raises(IngestError, match=fragment):
        ingest_csv(write(tmp_path, text))


def test_ingest_unknown_columns(tmp_path):
    p = write(tmp_path, "date,x\n1,2\n")
    with pytest.raises(IngestError, match="unknown columns"):
        ingest_csv(p, columns=["z"])
    with pytest.raises(IngestError, match="no column"):
        ingest_csv(p, date_column="when")


# ---------------------------------------------------------------- filtering


def test_block_filter_means_and_drop(caplog):
    vals = np.arange(1.0, 24.0)[:, None]
    b = SeriesBundle(("x",), tuple(range(23)), vals)
    with caplog.at_level("INFO"):
        f = block_filter(b, 11)
    assert f.length == 2 and f.dropped == 1
    np.testing.assert_allclose(f.averages[:, 0], [6.0, 17.0])
    np.testing.assert_allclose(f.centers, [5.0, 16.0])
    assert "dropping the last 1" in caplog.text
    with pytest.raises(ValueError):
        block_filter(b, 1)
    with pytest.raises(ValueError):
        block_filter(b, 30)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 1000))
def test_block_filter_preserves_total(L, seed):
    x = normals(stream(seed, "bf"), (5 * L + 3, 1))
    f = block_filter(SeriesBundle(("x",), tuple(range(len(x))), x), L)
    assert f.length == len(x) // L
    assert f.averages.sum() * L == pytest.approx(x[: f.length * L].sum(), abs=1e-9)


# ---------------------------------------------------------------- AR fits


def test_quarter_scale():
    assert quarter_scale(0.025, 11) == pytest.approx(0.025 ** (1 / 11))
    assert quarter_scale(-0.5, 2) == pytest.approx(math.sqrt(0.5))


def test_fit_block_ar1_flags():
    f = block_filter(persistent_bundle(), 11)
    fits = fit_block_ar1(f)
    assert [x.name for x in fits] == ["a", "b"]
    for x in fits:
        assert x.rho_period == pytest.approx(abs(x.rho_ulr) ** (1 / 11))
    const = block_filter(SeriesBundle(("c",), tuple(range(44)), np.ones((44, 1))), 11)
    assert fit_block_ar1(const)[0].flags == ("degenerate",)
    alt = block_filter(SeriesBundle(("n",), tuple(range(66)), np.repeat([[1.0], [-1.0]] * 3, 11, axis=0) + np.arange(66)[:, None] * 1e-3), 11)
    fit = fit_block_ar1(alt)[0]
    assert fit.negative and "negative_rho" in fit.flags


def test_fit_ar_recovers_coefficients():
    z = normals(stream(1, "ar2"), 20000)
    x = np.zeros(20000)
    for t in range(2, 20000):
        x[t] = 0.5 * x[t - 1] - 0.3 * x[t - 2] + z[t]
    coef, s2 = fit_ar(x, 2)
    np.testing.assert_allclose(coef, [0.5, -0.3], atol=0.03)
    assert s2 == pytest.approx(1.0, rel=0.05)
    with pytest.raises(ValueError):
        fit_ar(x, 5)
    with pytest.raises(ValueError):
        fit_ar(x[:3], 1)


def test_ar_block_forecast_matches_monte_carlo():
    coef = np.array([0.6, 0.2])
    hist = np.array([0.3, -0.4, 1.0])
    mean, var = ar_block_forecast(hist, coef, 1.0, 3, 7)
    R = 200_000
    z = normals(stream(2, "fc"), (R, 7))
    x = np.tile(hist[-2:], (R, 1))
    paths = np.empty((R, 7))
    prev2, prev1 = x[:, 0], x[:, 1]
    for h in range(7):
        cur = coef[0] * prev1 + coef[1] * prev2 + z[:, h]
        paths[:, h] = cur
        prev2, prev1 = prev1, cur
    avg = paths[:, 2:7].mean(axis=1)
    assert mean == pytest.approx(avg.mean(), abs=0.01)
    assert var == pytest.approx(avg.var(), rel=0.02)


def test_horizon_in_blocks():
    assert horizon_in_blocks(200, 11) == 18
    assert horizon_in_blocks(5, 11) == 0


# ---------------------------------------------------------------- intervals


def test_interval_row_casts_to_float():
    row = IntervalRow("x", 3, (np.float64(1), 2), (0, 1), (0, 3))
    assert all(type(v) is float for v in row.raw_ar + row.plug_in + row.minmax)
    assert row.widths() == (1.0, 1.0, 3.0)


def test_compare_intervals_structure():
    bundle = persistent_bundle()
    f = block_filter(bundle, 11)
    belt = build_belt(f.length, reps=1000, seed=0, n_transitions=f.length - 1, demean=True)
    rows = compare_intervals(bundle, f, horizon=200, belt=belt)
    assert [r.name for r in rows] == ["a", "b"]
    for r in rows:
        assert r.h_ulr == 18
        for lo, hi in (r.raw_ar, r.plug_in, r.minmax):
            assert lo < hi
        # the min-max interval widens the plug-in interval
        assert r.minmax[0] <= r.plug_in[0] + 1e-9 and r.minmax[1] >= r.plug_in[1] - 1e-9
    with pytest.raises(ValueError):
        compare_intervals(bundle, f, horizon=3, belt=belt)


def test_compare_intervals_degenerate_series():
    vals = np.column_stack([np.ones(220), persistent_bundle(220).values[:, 0]])
    b = SeriesBundle(("flat", "a"), tuple(range(220)), vals)
    f = block_filter(b, 11)
    belt = build_belt(f.length, reps=1000, seed=0, n_transitions=f.length - 1, demean=True)
    rows = compare_intervals(b, f, horizon=55, belt=belt)
    assert rows[0].flags == ("degenerate",)
    assert all(math.isnan(v) for v in rows[0].minmax)


def test_apply_pipeline_writes_outputs(tmp_path):
    bundle = persistent_bundle(330)
    lines = ["date,a,b"] + [f"{d},{float(x)!r},{float(y)!r}" for d, (x, y) in zip(bundle.dates, bundle.values)]
    src = write(tmp_path, "\n".join(lines) + "\n")
    res = apply_pipeline(src, tmp_path / "out", horizon=110)
    for key in ("filtered", "table1", "table2", "log"):
        assert res.files[key].exists()
    t2 = res.files["table2"].read_text().splitlines()
    assert t2[0].startswith("series,horizon,horizon_blocks")
    assert len(t2) == 3
    assert "rounded to 10" in res.files["log"].read_text()
