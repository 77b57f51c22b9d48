"""Sample autocovariances of the array: global, distant-lag, local, and of local means.

Dates are 1-based as in the formulas: ``y[i]`` is y_{i+1}, and a fraction c of
the sample maps to the integer date round(c*T).  Windows that run past the end
of the series are rejected, never truncated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, WindowError


def _as_2d(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ValueError("y must be a (T,) or (T, n) array")
    return y


def _cross(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """mean(x_t z_t') - mean(x) mean(z)' with separate window means."""
    m = x.shape[0]
    return x.T @ z / m - np.outer(x.mean(axis=0), z.mean(axis=0))


def sample_acov(y, h: int) -> np.ndarray:
    """Global sample autocovariance at lag h (two demeaning windows)."""
    y = _as_2d(y)
    T = y.shape[0]
    if not 0 <= h < T:
        raise WindowError(f"lag {h} outside [0, {T})")
    return _cross(y[h:], y[: T - h])


def _date(c: float, T: int) -> int:
    return int(round(c * T))


def sample_acov_distant(y, c: float, demean: bool = True) -> np.ndarray:
    """Autocovariance at the distant lag round(c*T).

    With ``demean=False`` this is the raw cross-product mean
    (1/(T - cT)) sum_t y_t y_{t-cT}'.
    """
    y = _as_2d(y)
    T = y.shape[0]
    h = _date(c, T)
    if not 1 <= h < T:
        raise WindowError(f"distant lag round({c}*{T}) = {h} leaves no window")
    if demean:
        return sample_acov(y, h)
    return y[h:].T @ y[: T - h] / (T - h)


def _window(T: int, c: float, H: int, h: int = 0) -> int:
    start = _date(c, T)
    if H < 1:
        raise WindowError("bandwidth H_T must be >= 1")
    if h > H:
        raise WindowError(f"lag {h} exceeds bandwidth {H}")
    if start - h < 0 or start + H > T:
        raise WindowError(f"window ({start}, {start + H}] with lag {h} does not fit in 1..{T}")
    return start


def local_acov(y, c: float, H_T: int, h: int) -> np.ndarray:
    """Autocovariance at lag h over the window of dates cT+1 .. cT+H_T, demeaned locally."""
    y = _as_2d(y)
    start = _window(y.shape[0], c, H_T, h)
    return _cross(y[start : start + H_T], y[start - h : start + H_T - h])


@dataclass(frozen=True)
class LocalMeans:
    c_grid: np.ndarray
    means: np.ndarray  # (K, n)
    H_T: int

    @property
    def K(self) -> int:
        return len(self.c_grid)


def local_means(y, c_grid, H_T: int) -> LocalMeans:
    """Window means m_T(c_k) over dates c_k T + 1 .. c_k T + H_T."""
    y = _as_2d(y)
    c_grid = np.asarray(c_grid, dtype=float)
    if np.any(c_grid < 0) or np.any(c_grid > 1):
        raise WindowError("grid points must lie in [0, 1]")
    T = y.shape[0]
    means = np.empty((c_grid.size, y.shape[1]))
    for k, c in enumerate(c_grid):
        start = _window(T, c, H_T)
        means[k] = y[start : start + H_T].mean(axis=0)
    return LocalMeans(c_grid, means, int(H_T))


def averaged_sr_acov(y, c_grid, H_T: int, h: int) -> np.ndarray:
    """Mean of the local autocovariances over the grid."""
    y = _as_2d(y)
    return np.mean([local_acov(y, c, H_T, h) for c in c_grid], axis=0)


def acf_of_means(means: LocalMeans, lag: int) -> np.ndarray:
    """Sample autocovariance of the K local means on the long-run time scale."""
    if not 0 <= lag < means.K:
        raise WindowError(f"lag {lag} outside [0, {means.K})")
    if np.any(np.var(means.means, axis=0) == 0.0):
        raise DegenerateError("a local-mean series is constant; its ACF is undefined")
    return sample_acov(means.means, lag)


def end_aligned_grid(K: int, H_T: int, T: int) -> np.ndarray:
    """c_k = k/K - H_T/T, k = 1..K: the window of c_k ends on date kT/K."""
    return np.arange(1, K + 1) / K - H_T / T


# ---------------------------------------------------------------- families for plotting

ACF_KINDS = ("standard", "distant", "local", "averaged_sr", "long_run_of_means")


@dataclass(frozen=True)
class AcfEstimate:
    lags: np.ndarray
    values: np.ndarray  # (len(lags), n, n)
    kind: str
    metadata: dict = field(default_factory=dict)

    def correlations(self) -> np.ndarray:
        """Normalise by the lag-0 standard deviations; NaN where a variance is zero."""
        v0 = np.diag(self.metadata["gamma0"]) if "gamma0" in self.metadata else np.diag(self.values[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            sd = np.sqrt(v0)
            return self.values / np.outer(sd, sd)

    @property
    def degenerate(self) -> bool:
        v0 = np.diag(self.metadata["gamma0"]) if "gamma0" in self.metadata else np.diag(self.values[0])
        return bool(np.any(v0 <= 0))


def acf_family(y, kind: str, lags, c_grid=None, H_T: int | None = None, c: float | None = None) -> AcfEstimate:
    """Evaluate one ACF family on a lag sequence.

    ``standard``: global ACF of y.  ``distant``: lags given as fractions of T.
    ``local``: window at ``c`` of width ``H_T``.  ``averaged_sr``: grid average.
    ``long_run_of_means``: ACF of the local means on ``c_grid``.
    """
    y = _as_2d(y)
    lags = np.asarray(lags)
    if np.any(np.diff(lags) <= 0):
        raise ValueError("lags must be strictly increasing")
    meta: dict = {}
    if kind == "standard":
        vals = [sample_acov(y, int(h)) for h in lags]
        meta["gamma0"] = sample_acov(y, 0)
    elif kind == "distant":
        vals = [sample_acov_distant(y, float(f)) for f in lags]
        meta["gamma0"] = sample_acov(y, 0)
    elif kind == "local":
        vals = [local_acov(y, c, H_T, int(h)) for h in lags]
        meta.update(c=c, H_T=H_T, gamma0=local_acov(y, c, H_T, 0))
    elif kind == "averaged_sr":
        vals = [averaged_sr_acov(y, c_grid, H_T, int(h)) for h in lags]
        meta.update(c_grid=np.asarray(c_grid), H_T=H_T, K=len(c_grid))
        meta["gamma0"] = averaged_sr_acov(y, c_grid, H_T, 0)
    elif kind == "long_run_of_means":
        lm = local_means(y, c_grid, H_T)
        vals = [sample_acov(lm.means, int(h)) for h in lags]
        meta.update(c_grid=np.asarray(c_grid), H_T=H_T, K=lm.K, gamma0=sample_acov(lm.means, 0))
    else:
        raise ValueError(f"unknown ACF kind {kind!r}")
    return AcfEstimate(lags, np.array(vals), kind, meta)
