import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ulrsvar.model_core import ModelParams, ULRParams, bivariate_design_params, stationary_cov_sr, stationary_cov_ulr
from ulrsvar.rng import normals, stream
from ulrsvar.simulator import (
    LTU_TAGS,
    LTUVariant,
    ltu_variance,
    simulate_array,
    simulate_ltu,
    simulate_ou,
    simulate_replications,
    tail_prob,
)


# ---------------------------------------------------------------- random streams


def test_streams_are_reproducible_and_labelled():
    a = stream(5, "sr", 3).random(4)
    assert np.array_equal(a, stream(5, "sr", 3).random(4))
    assert not np.array_equal(a, stream(5, "sr", 4).random(4))
    assert not np.array_equal(a, stream(6, "sr", 3).random(4))


def test_stream_rejects_negative():
    with pytest.raises(ValueError):
        stream(-1)
    with pytest.raises(ValueError):
        stream(0, -2)


def test_normals_are_standard_normal():
    z = normals(stream(0, "check"), 200_000)
    assert np.all(np.isfinite(z))
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01


# ---------------------------------------------------------------- triangular array


def test_path_shapes_and_decomposition():
    p = bivariate_design_params()
    path = simulate_array(p, 500, seed=1)
    assert path.y.shape == (500, 2)
    assert path.y_l_grid.shape == (500, 1)
    np.testing.assert_allclose(path.y, path.y_s + path.y_l_grid @ p.ulr.a_mat.T, atol=1e-12)


def test_path_independent_of_batch():
    p = bivariate_design_params()
    y_batch, _, _ = simulate_replications(p, 300, seed=9, reps=4)
    single = simulate_array(p, 300, seed=9, rep=2)
    np.testing.assert_array_equal(y_batch[2], single.y)
    y_idx, _, _ = simulate_replications(p, 300, seed=9, reps=[3, 1])
    np.testing.assert_array_equal(y_idx[0], y_batch[3])


def test_same_seed_same_path():
    p = bivariate_design_params()
    np.testing.assert_array_equal(simulate_array(p, 200, 4).y, simulate_array(p, 200, 4).y)
    assert not np.array_equal(simulate_array(p, 200, 4).y, simulate_array(p, 200, 5).y)


def test_rejects_short_T():
    with pytest.raises(ValueError):
        simulate_array(bivariate_design_params(), 1, 0)


def test_short_run_moments_match_stationary_law():
    p = bivariate_design_params()
    _, y_s, _ = simulate_replications(p, 50, seed=3, reps=4000)
    g0 = stationary_cov_sr(p.sr)
    emp0 = np.einsum("rti,rtj->ij", y_s, y_s) / (y_s.shape[0] * y_s.shape[1])
    np.testing.assert_allclose(emp0, g0, rtol=0.03, atol=0.05)
    emp1 = np.einsum("rti,rtj->ij", y_s[:, 1:], y_s[:, :-1]) / (y_s.shape[0] * (y_s.shape[1] - 1))
    np.testing.assert_allclose(emp1, p.sr.phi @ g0, rtol=0.05, atol=0.05)


def test_long_run_component_is_stationary_ou():
    p = ModelParams.univariate(phi=0.0, eta=1.0, theta=2.0, s=1.0)
    T = 20
    _, _, y_l = simulate_replications(p, T, seed=2, reps=20000)
    x = y_l[..., 0]
    var = stationary_cov_ulr(p.ulr)[0, 0]
    assert x[:, 0].var() == pytest.approx(var, rel=0.04)
    assert x[:, -1].var() == pytest.approx(var, rel=0.04)
    lag = 5
    corr = np.mean(x[:, lag:] * x[:, :-lag]) / var
    assert corr == pytest.approx(math.exp(-2.0 * lag / T), abs=0.02)


def test_simulate_ou_on_irregular_grid():
    ulr = ULRParams([[1.0]], [[1.0]], [[1.0]])
    grid = np.array([0.0, 0.1, 0.5, 2.0])
    draws = np.array([simulate_ou(ulr, grid, seed=0, rep=r)[:, 0] for r in range(6000)])
    cov = np.cov(draws.T)
    ref = 0.5 * np.exp(-np.abs(grid[:, None] - grid[None, :]))
    np.testing.assert_allclose(cov, ref, atol=0.03)


def test_simulate_ou_rejects_bad_grid():
    ulr = ULRParams([[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        simulate_ou(ulr, [0.0, 0.0], 0)
    with pytest.raises(ValueError):
        simulate_ou(ulr, [], 0)


# ---------------------------------------------------------------- LTU variants


def test_ltu_variant_validation():
    with pytest.raises(ValueError):
        LTUVariant("nope")
    with pytest.raises(ValueError):
        LTUVariant("ulr")
    with pytest.raises(ValueError):
        LTUVariant("random_walk", c=1.0)
    with pytest.raises(ValueError):
        LTUVariant("time_deformed", c=1.0, d=1.5)
    with pytest.raises(ValueError):
        LTUVariant("random_walk", sigma=-1.0)


def all_variants():
    out = []
    for tag in LTU_TAGS:
        if tag == "time_deformed":
            out.append(LTUVariant(tag, c=1.0, d=0.5))
        elif tag in {"random_walk", "singular", "rw_scaled"}:
            out.append(LTUVariant(tag))
        else:
            out.append(LTUVariant(tag, c=1.0))
    return out


@pytest.mark.parametrize("variant", all_variants(), ids=lambda v: v.tag)
def test_ltu_variance_matches_monte_carlo(variant):
    T = 60
    paths = simulate_ltu(variant, T, seed=1, reps=20000)
    assert paths.shape == (20000, T)
    for t in (1, 30, 60):
        ref = ltu_variance(variant, T, t)
        assert paths[:, t - 1].var() == pytest.approx(ref, rel=0.05, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5), st.integers(2, 5000), st.integers(1, 5000))
def test_ulr_variant_has_constant_variance(c, T, t):
    v = LTUVariant("ulr", c=c)
    assert ltu_variance(v, T, min(t, T)) == pytest.approx(1.0, rel=1e-9)


def test_ltu_stationary_variance_grows_with_T():
    v = LTUVariant("ltu_stationary", c=1.0)
    assert ltu_variance(v, 1000, 1) > ltu_variance(v, 100, 1) > 1


def test_tail_prob_bounded_vs_growing():
    bounded = tail_prob(LTUVariant("ulr", c=1.0), 200, 4.0, reps=2000, seed=0)
    growing = tail_prob(LTUVariant("random_walk"), 200, 4.0, reps=2000, seed=0)
    assert bounded.prob < 0.01
    assert growing.prob > 0.5
    assert growing.t_argmax > 150
    with pytest.raises(ValueError):
        tail_prob(LTUVariant("random_walk"), 10, 1.0, reps=10, seed=0)


def test_single_ltu_path_shape():
    assert simulate_ltu(LTUVariant("random_walk"), 10, seed=0).shape == (10,)
