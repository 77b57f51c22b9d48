"""Seeded simulation of the triangular array, its latent parts, and the LTU model zoo.

Replication ``r`` of a run with seed ``s`` draws its short-run innovations
from stream ``(s, "sr", r)`` and its OU innovations from ``(s, "ulr", r)``, so
a path is fixed by ``(params, T, seed, rep)`` whether it is generated alone
or inside a batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .model_core import (
    ModelParams,
    ULRParams,
    _transition,
    discretize_ulr,
    psd_factor,
    stationary_cov_sr,
    stationary_cov_ulr,
)
from .rng import normals, stream


@dataclass(frozen=True)
class ArrayPath:
    """One simulated trajectory; row i of each array is date t = i + 1."""

    t_max: int
    y: np.ndarray
    y_s: np.ndarray
    y_l_grid: np.ndarray
    seed: int
    rep: int = 0
    a_convention: str = "raw"


def _apply(mat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """x @ mat.T along the last axis, summed in a fixed order (batch-size independent)."""
    out = np.zeros(x.shape[:-1] + (mat.shape[0],))
    for i in range(mat.shape[0]):
        acc = out[..., i]
        for j in range(mat.shape[1]):
            if mat[i, j] != 0.0:
                acc += mat[i, j] * x[..., j]
    return out


def _var1_recursion(coef: np.ndarray, init: np.ndarray, shocks: np.ndarray) -> np.ndarray:
    """x_t = coef x_{t-1} + shocks_t, t = 1..T, from x_0 = init.  Shapes (R, d), (R, T, d)."""
    R, T, d = shocks.shape
    if np.count_nonzero(coef - np.diag(np.diag(coef))) == 0:
        out = np.empty_like(shocks)
        for i in range(d):
            x = shocks[:, :, i].copy()
            x[:, 0] += coef[i, i] * init[:, i]
            out[:, :, i] = lfilter([1.0], [1.0, -coef[i, i]], x, axis=1)
        return out
    out = np.empty_like(shocks)
    prev = init
    for t in range(T):
        prev = _apply(coef, prev) + shocks[:, t]
        out[:, t] = prev
    return out


def simulate_replications(params: ModelParams, T: int, seed: int, reps: Sequence[int] | int):
    """Simulate several replications at once.

    Returns ``(y, y_s, y_l)`` with shapes (R, T, n), (R, T, n), (R, T, L).
    ``reps`` is either a count (replications 0..reps-1) or explicit indices.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    idx = list(range(reps)) if isinstance(reps, (int, np.integer)) else list(reps)
    n, L = params.n, params.L
    sr, ulr = params.sr, params.ulr
    g0 = psd_factor(stationary_cov_sr(sr))
    sig = psd_factor(stationary_cov_ulr(ulr))
    disc = discretize_ulr(ulr, T)
    sig_T = psd_factor(disc.sigma_T)

    z_s = np.empty((len(idx), T + 1, n))
    z_l = np.empty((len(idx), T + 1, L))
    for k, r in enumerate(idx):
        z_s[k] = normals(stream(seed, "sr", r), (T + 1, n))
        z_l[k] = normals(stream(seed, "ulr", r), (T + 1, L))

    y_s = _var1_recursion(sr.phi, _apply(g0, z_s[:, 0]), _apply(sr.omega_half, z_s[:, 1:]))
    y_l = _var1_recursion(disc.rho_mat, _apply(sig, z_l[:, 0]), _apply(sig_T, z_l[:, 1:]))
    y = y_s + _apply(ulr.a_mat, y_l)
    return y, y_s, y_l


def simulate_array(params: ModelParams, T: int, seed: int, rep: int = 0) -> ArrayPath:
    """One path of y_T(t) = y_s(t) + A y_l(t/T), t = 1..T, both components started stationary."""
    y, y_s, y_l = simulate_replications(params, T, seed, [rep])
    return ArrayPath(T, y[0], y_s[0], y_l[0], seed, rep, params.a_convention)


def simulate_ou(ulr: ULRParams, grid, seed: int, rep: int = 0) -> np.ndarray:
    """Exact OU draws on an increasing grid, started from the stationary law at grid[0]."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    z = normals(stream(seed, "ou", rep), (grid.size, ulr.L))
    out = np.empty_like(z)
    out[0] = psd_factor(stationary_cov_ulr(ulr)) @ z[0]
    for i in range(1, grid.size):
        rho, sig = _transition(ulr, grid[i] - grid[i - 1])
        out[i] = rho @ out[i - 1] + psd_factor(sig) @ z[i]
    return out


# ---------------------------------------------------------------- LTU zoo

LTU_TAGS = (
    "random_walk",
    "singular",
    "ltu_zero_init",
    "ltu_stationary",
    "ltu_scaled",
    "rw_scaled",
    "ulr",
    "time_deformed",
)
_NEEDS_C = {"ltu_zero_init", "ltu_stationary", "ltu_scaled", "ulr", "time_deformed"}


@dataclass(frozen=True)
class LTUVariant:
    tag: str
    sigma: float = 1.0
    c: float | None = None
    d: float | None = None

    def __post_init__(self):
        if self.tag not in LTU_TAGS:
            raise ValueError(f"unknown LTU variant {self.tag!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.tag in _NEEDS_C:
            if self.c is None or self.c <= 0:
                raise ValueError(f"variant {self.tag} needs c > 0")
        elif self.c is not None:
            raise ValueError(f"variant {self.tag} takes no c")
        if self.tag == "time_deformed":
            if self.d is None or not 0 < self.d <= 1:
                raise ValueError("time_deformed needs d in (0, 1]")
        elif self.d is not None:
            raise ValueError(f"variant {self.tag} takes no d")

    def recursion(self, T: int) -> tuple[float, float, float]:
        """(autoregressive coefficient, innovation scale, initial standard deviation)."""
        sig, c = self.sigma, self.c
        if self.tag == "random_walk":
            return 1.0, sig, 0.0
        if self.tag == "singular":
            return 1.0, 0.0, sig
        if self.tag == "ltu_zero_init":
            return math.exp(-c / T), sig, 0.0
        if self.tag == "ltu_stationary":
            return math.exp(-c / T), sig, sig / math.sqrt(-math.expm1(-2 * c / T))
        if self.tag == "ltu_scaled":
            return math.exp(-c / T), sig / T, 0.0
        if self.tag == "rw_scaled":
            return 1.0, sig / T, 0.0
        unit = T if self.tag == "ulr" else T**self.d
        return math.exp(-c / unit), sig * math.sqrt(-math.expm1(-2 * c / unit)), sig


def simulate_ltu(variant: LTUVariant, T: int, seed: int, reps: int | None = None) -> np.ndarray:
    """Paths y_T(1..T) of an LTU variant; shape (T,) or (reps, T)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    R = 1 if reps is None else reps
    coef, scale, init_sd = variant.recursion(T)
    gen = stream(seed, "ltu", variant.tag, T)
    z = normals(gen, (R, T + 1))
    x = scale * z[:, 1:]
    x[:, 0] += coef * init_sd * z[:, 0]
    out = lfilter([1.0], [1.0, -coef], x, axis=1)
    return out[0] if reps is None else out


def ltu_variance(variant: LTUVariant, T: int, t: int) -> float:
    """Exact Var y_T(t) of an LTU variant."""
    coef, scale, init_sd = variant.recursion(T)
    if coef == 1.0:
        return init_sd**2 + t * scale**2
    return coef ** (2 * t) * init_sd**2 + scale**2 * (1 - coef ** (2 * t)) / (1 - coef**2)


@dataclass(frozen=True)
class TailEstimate:
    prob: float
    se: float
    t_argmax: int
    reps: int


def tail_prob(variant: LTUVariant, T: int, A_level: float, reps: int, seed: int, chunk: int = 500) -> TailEstimate:
    """Monte-Carlo max over t <= T of P(|y_T(t)| > A_level), with its binomial standard error."""
    if reps < 100:
        raise ValueError("reps must be >= 100")
    counts = np.zeros(T)
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        coef, scale, init_sd = variant.recursion(T)
        z = normals(stream(seed, "tail", variant.tag, T, done), (m, T + 1))
        x = scale * z[:, 1:]
        x[:, 0] += coef * init_sd * z[:, 0]
        paths = lfilter([1.0], [1.0, -coef], x, axis=1)
        counts += (np.abs(paths) > A_level).sum(axis=0)
        done += m
    freq = counts / reps
    k = int(np.argmax(freq))
    p = float(freq[k])
    return TailEstimate(p, math.sqrt(p * (1 - p) / reps), k + 1, reps)
