import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ulrsvar.acf import (
    acf_family,
    acf_of_means,
    averaged_sr_acov,
    end_aligned_grid,
    local_acov,
    local_means,
    sample_acov,
    sample_acov_distant,
)
from ulrsvar.errors import DegenerateError, WindowError
from ulrsvar.model_core import ModelParams
from ulrsvar.simulator import simulate_replications


def naive_cross(y, h):
    """Loop oracle: two windows, each demeaned by its own mean."""
    T = len(y)
    a, b = y[h:], y[: T - h]
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    acc = np.zeros((y.shape[1], y.shape[1]))
    for t in range(T - h):
        acc += np.outer(a[t] - ma, b[t] - mb)
    return acc / (T - h)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (30, 2), elements=st.floats(-5, 5)), st.integers(0, 29))
def test_sample_acov_matches_loop(y, h):
    np.testing.assert_allclose(sample_acov(y, h), naive_cross(y, h), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (25, 2), elements=st.floats(-5, 5)), st.floats(-10, 10))
def test_sample_acov_shift_invariant(y, shift):
    np.testing.assert_allclose(sample_acov(y + shift, 3), sample_acov(y, 3), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (25, 2), elements=st.floats(-5, 5)))
def test_lag_zero_is_psd(y):
    g = sample_acov(y, 0)
    np.testing.assert_allclose(g, g.T, atol=1e-12)
    assert np.linalg.eigvalsh(g).min() > -1e-9


def test_lag_zero_equals_population_covariance():
    y = np.random.default_rng(0).standard_normal((50, 3))
    np.testing.assert_allclose(sample_acov(y, 0), np.cov(y.T, bias=True), atol=1e-13)


def test_lag_out_of_range():
    with pytest.raises(WindowError):
        sample_acov(np.zeros(5), 5)


def test_distant_lag_raw_and_demeaned():
    y = np.arange(1.0, 11.0)
    raw = sample_acov_distant(y, 0.3, demean=False)
    assert raw[0, 0] == pytest.approx(np.mean(y[3:] * y[:7]))
    np.testing.assert_allclose(sample_acov_distant(y, 0.3), sample_acov(y, 3))
    with pytest.raises(WindowError):
        sample_acov_distant(y, 1.0)


def test_local_acov_uses_the_right_window():
    y = np.arange(1.0, 101.0) ** 1.5
    got = local_acov(y, 0.2, 10, 2)
    # window dates 21..30 paired with 19..28
    ref = naive_cross(y[18:30, None], 2)
    np.testing.assert_allclose(got, ref)


def test_local_acov_window_errors():
    y = np.zeros(100)
    with pytest.raises(WindowError):
        local_acov(y, 0.95, 10, 0)
    with pytest.raises(WindowError):
        local_acov(y, 0.0, 10, 1)
    with pytest.raises(WindowError):
        local_acov(y, 0.5, 10, 11)
    with pytest.raises(WindowError):
        local_acov(y, 0.5, 0, 0)


def test_local_means_values():
    y = np.arange(1.0, 101.0)
    lm = local_means(y, [0.0, 0.5, 0.9], 10)
    np.testing.assert_allclose(lm.means[:, 0], [5.5, 55.5, 95.5])
    assert lm.K == 3
    with pytest.raises(WindowError):
        local_means(y, [1.2], 10)


def test_end_aligned_grid_windows_end_on_block_boundaries():
    T, K, H = 1000, 10, 40
    grid = end_aligned_grid(K, H, T)
    ends = np.round(grid * T).astype(int) + H
    np.testing.assert_array_equal(ends, np.arange(1, K + 1) * T // K)
    y = np.arange(1.0, T + 1.0)
    lm = local_means(y, grid, H)
    np.testing.assert_allclose(lm.means[-1, 0], np.mean(y[T - H :]))


def test_averaged_sr_is_grid_average():
    y = np.random.default_rng(1).standard_normal((300, 2))
    grid = [0.1, 0.4, 0.7]
    ref = (local_acov(y, 0.1, 20, 1) + local_acov(y, 0.4, 20, 1) + local_acov(y, 0.7, 20, 1)) / 3
    np.testing.assert_allclose(averaged_sr_acov(y, grid, 20, 1), ref)


def test_acf_of_means_degenerate():
    lm = local_means(np.ones(100), [0.1, 0.5], 10)
    with pytest.raises(DegenerateError):
        acf_of_means(lm, 0)


def test_acf_family_kinds_and_errors():
    y = np.random.default_rng(2).standard_normal((400, 2))
    grid = end_aligned_grid(8, 20, 400)
    std = acf_family(y, "standard", range(5))
    assert std.values.shape == (5, 2, 2)
    np.testing.assert_allclose(np.diagonal(std.correlations()[0]), 1.0)
    assert not std.degenerate
    dist = acf_family(y, "distant", [0.1, 0.2])
    np.testing.assert_allclose(dist.values[1], sample_acov(y, 80))
    loc = acf_family(y, "local", [0, 1], H_T=20, c=0.5)
    assert loc.metadata["c"] == 0.5
    avg = acf_family(y, "averaged_sr", [0, 1], c_grid=grid, H_T=20)
    assert avg.metadata["K"] == 8
    lr = acf_family(y, "long_run_of_means", [0, 1, 2], c_grid=grid, H_T=20)
    assert lr.values.shape == (3, 2, 2)
    with pytest.raises(ValueError):
        acf_family(y, "bogus", [0])
    with pytest.raises(ValueError):
        acf_family(y, "standard", [2, 1])


def test_degenerate_estimate_gives_nan_correlations():
    y = np.column_stack([np.ones(100), np.arange(100.0)])
    est = acf_family(y, "standard", [0, 1])
    assert est.degenerate
    assert np.isnan(est.correlations()[1, 0, 0])


def test_local_acov_recovers_short_run_structure():
    """Inside a window the slow component is nearly constant, so the local ACF
    targets the short-run autocovariance phi^h / (1 - phi^2)."""
    p = ModelParams.univariate(phi=0.5, eta=1.0, theta=1.0, s=1.0)
    y, _, _ = simulate_replications(p, 20000, seed=4, reps=1)
    grid = end_aligned_grid(40, 400, 20000)
    g1 = averaged_sr_acov(y[0], grid, 400, 1)[0, 0]
    g0 = averaged_sr_acov(y[0], grid, 400, 0)[0, 0]
    assert g1 / g0 == pytest.approx(0.5, abs=0.04)
    assert g0 == pytest.approx(4 / 3, rel=0.08)


def test_distant_acov_sees_the_long_run_component():
    p = ModelParams.univariate(phi=0.5, eta=1.0, theta=1.0, s=1.0)
    reps = 2000
    y, _, _ = simulate_replications(p, 2000, seed=1, reps=reps)
    vals = np.array([sample_acov_distant(y[r, :, 0], 0.2, demean=False)[0, 0] for r in range(reps)])
    se = vals.std() / math.sqrt(reps)
    # stationary OU: Cov(y_l(u), y_l(u + 0.2)) = e^{-0.2} / 2
    assert abs(vals.mean() - 0.5 * math.exp(-0.2)) < 4 * se
