"""Long-horizon predictive quantiles, confidence belts for rho, and Bonferroni min-max bounds.

The univariate predictive quantile at horizon gamma (in units of the
ultra-long time scale) is

    q(theta, alpha) = exp(-theta gamma) y_l(T)
                      + Psi^{-1}(1 - alpha) sqrt(eta^2 + s^2 (1 - exp(-2 theta gamma)) / (2 theta)),

where eta is the stationary standard deviation of the short-run noise.  theta
is not consistently estimable, so the Bonferroni bound maximises q at level
1 - alpha + alpha1 over a (1 - alpha1) confidence set for theta obtained by
inverting a Monte-Carlo confidence belt for the AR(1) coefficient
rho = exp(-theta / K), and the min-max bound minimises that over alpha1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtri

from .estimator import ar1_mle
from .model_core import ModelParams, stationary_cov_sr, stationary_cov_ulr, _transition
from .rng import normals, stream

# ---------------------------------------------------------------- quantiles


def normal_quantile(p):
    """Inverse standard normal CDF."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise ValueError("p must lie in (0, 1)")
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out


def _ulr_var_factor(theta, gamma):
    """(1 - exp(-2 theta gamma)) / (2 theta), continued to gamma at theta = 0 and to theta < 0."""
    x = 2.0 * np.asarray(theta, dtype=float) * gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(x == 0, 1.0, -np.expm1(-x) / np.where(x == 0, 1.0, x))
    return gamma * ratio


def quantile_curve(theta, alpha: float, gamma: float, eta: float, s: float, y_l_T: float):
    """Predictive quantile for any real theta (vectorised); theta <= 0 uses the explosive continuation."""
    theta = np.asarray(theta, dtype=float)
    z = normal_quantile(1.0 - alpha)
    with np.errstate(over="ignore", invalid="ignore"):
        mean = np.where(np.isinf(theta), 0.0, np.exp(-theta * gamma) * y_l_T)
        var = np.where(np.isinf(theta), 0.0, s * s * _ulr_var_factor(np.where(np.isinf(theta), 1.0, theta), gamma))
    out = mean + z * np.sqrt(eta * eta + var)
    return float(out) if out.ndim == 0 else out


def theoretical_quantile(theta: float, alpha: float, gamma: float, eta: float, s: float, y_l_T: float) -> float:
    """Upper (1 - alpha) predictive quantile for theta > 0."""
    if not theta > 0:
        raise ValueError("theta must be > 0; use theoretical_quantile_limit for theta -> 0")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    return quantile_curve(theta, alpha, gamma, eta, s, y_l_T)


def theoretical_quantile_limit(alpha: float, gamma: float, eta: float, s: float, y_l_T: float) -> float:
    """theta -> 0+ limit: y_l(T) + Psi^{-1}(1 - alpha) sqrt(eta^2 + s^2 gamma)."""
    return y_l_T + normal_quantile(1.0 - alpha) * math.sqrt(eta * eta + s * s * gamma)


# ---------------------------------------------------------------- predictive laws


class GaussianLaw(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray


def predictive_distribution(params: ModelParams, state, horizon_mode: str, gamma: float = 0.0, h: int = 1) -> GaussianLaw:
    """Gaussian law of the future observation given ``state = (y_s(T), y_l(1))``.

    ``short``: h steps ahead on the short-run scale with the long-run factor
    frozen, mean Phi^h y_s(T) + A y_l(1).
    ``long``: gamma units ahead on the long-run scale; the OU transition law of
    A y_l(1 + gamma) convolved with the stationary short-run law.
    """
    y_s = np.atleast_1d(np.asarray(state[0], dtype=float))
    y_l = np.atleast_1d(np.asarray(state[1], dtype=float))
    sr, ulr = params.sr, params.ulr
    A = ulr.a_mat
    if horizon_mode == "short":
        if h < 1:
            raise ValueError("h must be >= 1")
        cov = np.zeros((sr.n, sr.n))
        power = np.eye(sr.n)
        for _ in range(h):
            cov += power @ sr.omega @ power.T
            power = sr.phi @ power
        return GaussianLaw(power @ y_s + A @ y_l, cov)
    if horizon_mode == "long":
        if gamma < 0:
            raise ValueError("gamma must be >= 0")
        if math.isinf(gamma):
            return GaussianLaw(np.zeros(sr.n), A @ stationary_cov_ulr(ulr) @ A.T + stationary_cov_sr(sr))
        rho, sig = _transition(ulr, gamma)
        return GaussianLaw(A @ rho @ y_l, A @ sig @ A.T + stationary_cov_sr(sr))
    raise ValueError(f"unknown horizon mode {horizon_mode!r}")


# ---------------------------------------------------------------- confidence belt

DEFAULT_LEVELS = (0.05, 0.1, 0.5, 0.9, 0.95)


def default_rho_grid() -> np.ndarray:
    return np.concatenate([np.linspace(0.005, 0.995, 100), [0.9975, 0.999]])


@dataclass(frozen=True)
class ConfidenceBelt:
    """Monte-Carlo quantiles of the AR(1) ML estimate as a function of the true rho.

    ``samples[i]`` holds the sorted estimates at ``rho_grid[i]`` so curves at
    any level can be read off; ``quantile_curves`` caches the requested levels.
    """

    K: int
    rho_grid: np.ndarray
    levels: tuple
    quantile_curves: dict
    reps: int
    seed: int
    samples: np.ndarray = field(repr=False)
    n_transitions: int = 0
    demean: bool = False

    def curve(self, level: float) -> np.ndarray:
        if not 0 <= level <= 1:
            raise ValueError("level must lie in [0, 1]")
        # samples are sorted, so this is np.quantile's linear rule without the sort
        pos = level * (self.samples.shape[1] - 1)
        i = min(int(math.floor(pos)), self.samples.shape[1] - 2)
        frac = pos - i
        return self.samples[:, i] + frac * (self.samples[:, i + 1] - self.samples[:, i])


def simulate_ar1_samples(rho, n_transitions: int, reps: int, seed: int, label) -> np.ndarray:
    """Paths y(0..n) of y(k) = rho y(k-1) + sqrt(1 - rho^2) e(k), y(0) ~ N(0, 1); shape (reps, n + 1)."""
    z = normals(stream(seed, "belt", label), (reps, n_transitions + 1))
    a = math.sqrt(max(0.0, 1.0 - rho * rho))
    out = np.empty_like(z)
    out[:, 0] = z[:, 0]
    for k in range(1, n_transitions + 1):
        out[:, k] = rho * out[:, k - 1] + a * z[:, k]
    return out


def belt_estimates(x: np.ndarray, demean: bool = False) -> np.ndarray:
    if demean:
        x = x - x.mean(axis=-1, keepdims=True)
    return ar1_mle(x)[0]


def build_belt(
    K: int,
    rho_grid=None,
    levels=DEFAULT_LEVELS,
    reps: int = 1000,
    seed: int = 0,
    n_transitions: int | None = None,
    demean: bool = False,
) -> ConfidenceBelt:
    """Tabulate quantiles of rho_hat over a grid of true rho.

    Each cell draws ``reps`` paths with ``n_transitions`` (default K)
    transitions from stream ``(seed, "belt", grid index)``.  ``demean``
    subtracts the path mean before estimation, matching data that were
    demeaned before fitting.
    """
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    grid = default_rho_grid() if rho_grid is None else np.asarray(rho_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] <= 0 or grid[-1] >= 1:
        raise ValueError("rho_grid must be increasing inside (0, 1)")
    nt = K if n_transitions is None else int(n_transitions)
    if nt < 2:
        raise ValueError("need at least two transitions")
    samples = np.empty((grid.size, reps))
    for i, rho in enumerate(grid):
        est = belt_estimates(simulate_ar1_samples(float(rho), nt, reps, seed, i), demean)
        samples[i] = np.sort(est)
    levels = tuple(sorted(float(l) for l in levels))
    curves = {lv: np.quantile(samples, lv, axis=1) for lv in levels}
    return ConfidenceBelt(int(K), grid, levels, curves, reps, seed, samples, nt, demean)


@dataclass(frozen=True)
class BeltInterval:
    rho_lo: float
    rho_hi: float
    theta_lo: float
    theta_hi: float
    flags: tuple = ()

    def contains(self, rho: float) -> bool:
        return self.rho_lo <= rho <= self.rho_hi


def _segment_solutions(x, lo, hi, r):
    """Union of {t in segment : lo(t) <= r <= hi(t)} for piecewise-linear lo, hi; returns (min, max) or None."""
    x0, x1 = x[:-1], x[1:]
    # each segment is parametrised by u in [0, 1]; g(u) = g0 + u (g1 - g0) <= 0 for both constraints
    u_lo = np.zeros(x0.size)
    u_hi = np.ones(x0.size)
    for g0, g1 in ((lo[:-1] - r, lo[1:] - r), (r - hi[:-1], r - hi[1:])):
        d = g1 - g0
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -g0 / d
        inc = d > 0
        dec = d < 0
        flat = d == 0
        u_hi = np.where(inc, np.minimum(u_hi, root), u_hi)
        u_lo = np.where(dec, np.maximum(u_lo, root), u_lo)
        u_hi = np.where(flat & (g0 > 0), -1.0, u_hi)
    ok = u_lo <= u_hi
    if not np.any(ok):
        return None
    left = x0 + u_lo * (x1 - x0)
    right = x0 + u_hi * (x1 - x0)
    return float(np.min(left[ok])), float(np.max(right[ok]))


def _theta(rho: float, K: float) -> float:
    if rho <= 0:
        return math.inf
    return -K * math.log(rho)


def invert_belt(belt: ConfidenceBelt, rho_hat: float, alpha1: float, sided: str = "two") -> BeltInterval:
    """Confidence set {rho : q_low(rho) <= rho_hat <= q_high(rho)} as its closed hull.

    ``two`` uses levels alpha1/2 and 1 - alpha1/2; ``lower`` bounds rho from
    below only (level 1 - alpha1 curve); ``upper`` bounds it from above only
    (level alpha1 curve).  Curves are interpolated linearly between grid
    points and the inversion is exact on each segment.
    """
    if not 0 < alpha1 < 1:
        raise ValueError("alpha1 must lie in (0, 1)")
    x = belt.rho_grid
    if sided == "two":
        lo, hi = belt.curve(alpha1 / 2), belt.curve(1 - alpha1 / 2)
    elif sided == "lower":
        lo, hi = np.full(x.size, -np.inf), belt.curve(1 - alpha1)
    elif sided == "upper":
        lo, hi = belt.curve(alpha1), np.full(x.size, np.inf)
    else:
        raise ValueError(f"unknown side {sided!r}")
    lo_f = np.where(np.isinf(lo), -1e300, lo)
    hi_f = np.where(np.isinf(hi), 1e300, hi)
    sol = _segment_solutions(x, lo_f, hi_f, float(rho_hat))
    flags: list[str] = []
    if sol is None:
        if rho_hat > np.max(hi_f):
            flags.append("above_belt")
            a = b = float(x[-1])
        elif rho_hat < np.min(lo_f):
            flags.append("below_belt")
            a = b = float(x[0])
        else:
            flags.append("empty")
            a, b = float(x[0]), float(x[-1])
    else:
        a, b = sol
        if b >= x[-1]:
            flags.append("clipped_high")
        if a <= x[0]:
            flags.append("clipped_low")
    return BeltInterval(a, b, _theta(b, belt.K), _theta(a, belt.K), tuple(flags))


# ---------------------------------------------------------------- Bonferroni and min-max


class Nuisance(NamedTuple):
    """Parameters held at their point estimates while theta varies."""

    eta: float
    s: float


def _max_over_theta(level_alpha: float, lo: float, hi: float, nuis: Nuisance, y_l_T: float, gamma: float, n_grid: int = 256):
    """Maximum of the quantile curve over [lo, hi] with the maximiser; grid scan plus bounded refinement."""
    eta, s = nuis
    if lo == -math.inf:
        # theta -> -inf: the mean exp(|theta| gamma) y_l_T dominates the growing spread
        z = normal_quantile(1.0 - level_alpha)
        if y_l_T > 0 or (y_l_T == 0 and s > 0 and z > 0):
            return math.inf, -math.inf
        lo = min(hi, -50.0 / max(gamma, 1e-12))
    if lo == hi:
        return quantile_curve(lo, level_alpha, gamma, eta, s, y_l_T), lo
    finite_hi = hi if math.isfinite(hi) else max(lo, 0.0) + 1e3 / max(gamma, 1e-12)
    grid = np.concatenate([np.linspace(lo, finite_hi, n_grid), [lo, finite_hi]])
    if lo > 0:
        grid = np.concatenate([grid, np.geomspace(lo, finite_hi, n_grid)])
    grid = np.unique(grid)
    vals = quantile_curve(grid, level_alpha, gamma, eta, s, y_l_T)
    j = int(np.argmax(vals))
    best, arg = float(vals[j]), float(grid[j])
    if grid.size > 1:
        res = minimize_scalar(
            lambda t: -quantile_curve(t, level_alpha, gamma, eta, s, y_l_T),
            bounds=(grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    if not math.isfinite(hi):
        tail = quantile_curve(math.inf, level_alpha, gamma, eta, s, y_l_T)
        if tail > best:
            best, arg = tail, math.inf
    return best, arg


def bonferroni_bound(alpha: float, alpha1: float, theta_interval, other_params, y_l_T: float, gamma: float) -> float:
    """max over theta in the interval of the quantile at level 1 - alpha + alpha1."""
    return bonferroni_detail(alpha, alpha1, theta_interval, other_params, y_l_T, gamma)[0]


def bonferroni_detail(alpha, alpha1, theta_interval, other_params, y_l_T, gamma):
    if not 0 < alpha1 < alpha < 1:
        raise ValueError("need 0 < alpha1 < alpha < 1")
    lo, hi = (float(v) for v in theta_interval)
    if not lo <= hi or math.isnan(lo) or math.isnan(hi) or hi == -math.inf:
        raise ValueError("empty theta interval")
    return _max_over_theta(alpha - alpha1, lo, hi, Nuisance(*other_params), y_l_T, gamma)


@dataclass(frozen=True)
class PredictionInterval:
    """Min-max bound with its optimal split and the plug-in / parameter-shift / level-shift decomposition."""

    horizon_ratio: float
    level: float
    lower: float
    upper: float
    alpha1_star: float
    beta_star: float
    decomposition: tuple
    theta_hat: float = math.nan
    flags: tuple = ()
    lower_alpha1_star: float = math.nan
    lower_decomposition: tuple = ()

    @property
    def q_star(self) -> float:
        return self.upper


def _one_sided_minmax(alpha, belt, rho_hat, nuis, y_l_T, gamma, n_grid, sided):
    K = belt.K
    theta_hat = _theta(abs(rho_hat), K)

    def objective(a1):
        iv = invert_belt(belt, rho_hat, a1, sided=sided)
        val, arg = bonferroni_detail(alpha, a1, (iv.theta_lo, iv.theta_hi), nuis, y_l_T, gamma)
        return val, arg, iv

    grid = np.linspace(0, alpha, n_grid + 2)[1:-1]
    vals = [objective(a)[0] for a in grid]
    j = int(np.argmin(vals))
    a_best = float(grid[j])
    lo_b, hi_b = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(lambda a: objective(a)[0], bounds=(lo_b, hi_b), method="bounded", options={"xatol": 1e-10})
    if res.fun < vals[j]:
        a_best = float(res.x)
    q_star, beta, iv = objective(a_best)
    flags = list(iv.flags)
    if j == 0 or j == grid.size - 1:
        flags.append("alpha1_at_grid_edge")
    eta, s = nuis
    if math.isfinite(theta_hat) and theta_hat > 0:
        plug = quantile_curve(theta_hat, alpha, gamma, eta, s, y_l_T)
        plug_shift = quantile_curve(theta_hat, alpha - a_best, gamma, eta, s, y_l_T)
    else:
        flags.append("plug_in_undefined")
        plug = plug_shift = math.nan
    decomposition = (plug, q_star - plug_shift, plug_shift - plug)
    return q_star, a_best, beta, decomposition, theta_hat, tuple(flags)


def minmax_interval(
    alpha: float,
    belt: ConfidenceBelt,
    rho_hat: float,
    other_params,
    y_l_T: float,
    gamma: float,
    two_sided: bool = False,
    n_grid: int = 64,
) -> PredictionInterval:
    """Bonferroni min-max bound Q* = min over alpha1 of the worst-case quantile over the belt set.

    The theta-set for a given alpha1 inverts the belt with equal tails.  The
    decomposition is (plug-in quantile, parameter shift, level shift):

        Q* = q(1-alpha; theta_hat) + [q(1-alpha+a1*; beta*) - q(1-alpha+a1*; theta_hat)]
                                   + [q(1-alpha+a1*; theta_hat) - q(1-alpha; theta_hat)].

    Two-sided intervals apply the one-sided bound with alpha/2 to each tail;
    the lower tail is the upper bound for the reflected series -y.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n_grid < 64:
        raise ValueError("n_grid must be >= 64")
    nuis = Nuisance(*other_params)
    a_side = alpha / 2 if two_sided else alpha
    q, a1, beta, dec, th, flags = _one_sided_minmax(a_side, belt, rho_hat, nuis, y_l_T, gamma, n_grid, "two")
    if two_sided:
        ql, a1l, _, decl, _, fl = _one_sided_minmax(a_side, belt, rho_hat, nuis, -y_l_T, gamma, n_grid, "two")
        lower = -ql
        flags = tuple(dict.fromkeys(flags + fl))
        decl = tuple(-v for v in decl)
    else:
        lower, a1l, decl = -math.inf, math.nan, ()
    return PredictionInterval(gamma, 1 - alpha, lower, q, a1, beta, dec, th, flags, a1l, decl)


def plug_in_interval(alpha: float, estimates, y_l_T: float, gamma: float, two_sided: bool = False):
    """Quantile at the point estimates ``estimates = (theta, eta, s)``.

    One-sided returns the upper bound; two-sided returns ``(lower, upper)``
    with alpha/2 in each tail.
    """
    theta, eta, s = (float(v) for v in estimates)
    if not all(math.isfinite(v) for v in (theta, eta, s)):
        raise ValueError("estimates must be finite")
    if not two_sided:
        return theoretical_quantile(theta, alpha, gamma, eta, s, y_l_T)
    up = theoretical_quantile(theta, alpha / 2, gamma, eta, s, y_l_T)
    lo = -theoretical_quantile(theta, alpha / 2, gamma, eta, s, -y_l_T)
    return lo, up
