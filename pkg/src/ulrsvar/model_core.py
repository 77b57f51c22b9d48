"""Model parameterisation and exact second-order algebra.

The observed n-vector is

    y_T(t) = y_s(t) + A y_l(t / T),
    y_s(t) = Phi y_s(t-1) + Omega^{1/2} eps_t,
    d y_l(tau) = -Theta y_l(tau) d tau + S dW_tau,

a short-run VAR(1) plus an L-dimensional Ornstein-Uhlenbeck factor observed
on the ultra-long time scale t/T.  Sampling the OU process on the grid t/T
gives an exact VAR(1) with coefficient exp(-Theta/T) and innovation
covariance Sigma_T, both of which are computed here.

Two univariate autocovariance formulas and two spectrum normalisations are
exposed side by side.  ``variant="growing_ou"`` has an OU term that grows with
the lag and vanishes at lag 0; ``variant="stationary_ou"`` is the autocovariance
of the simulated process.  ``variant="unnormalized"`` of the spectrum
integrates to twice the stationary OU variance; ``variant="normalized"`` halves
the OU term so it integrates to the lag-0 variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, NonStationaryError

# ---------------------------------------------------------------- linear algebra


def _square(m, name="matrix") -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


_PADE_ORDER = 8


def _pade_coefficients(q: int) -> np.ndarray:
    c = np.empty(q + 1)
    for k in range(q + 1):
        c[k] = (
            math.factorial(2 * q - k)
            * math.factorial(q)
            / (math.factorial(2 * q) * math.factorial(k) * math.factorial(q - k))
        )
    return c


_PADE = _pade_coefficients(_PADE_ORDER)


def mat_exp(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal [8/8] Pade approximant.

    The input is scaled by 2**-j until its 1-norm is at most 0.5, where the
    [8/8] approximant is accurate to well below double-precision rounding,
    and the result is squared j times.
    """
    a = _square(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("mat_exp needs finite entries")
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    j = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    a = a / 2.0**j
    ident = np.eye(n)
    num = _PADE[0] * ident
    den = _PADE[0] * ident
    power = ident
    for k in range(1, _PADE_ORDER + 1):
        power = power @ a
        num = num + _PADE[k] * power
        den = den + (-1) ** k * _PADE[k] * power
    out = np.linalg.solve(den, num)
    for _ in range(j):
        out = out @ out
    return out


def kron_sum(theta) -> np.ndarray:
    """Kronecker sum ``Id (x) Theta + Theta (x) Id``."""
    t = _square(theta, "theta")
    ident = np.eye(t.shape[0])
    return np.kron(ident, t) + np.kron(t, ident)


def spectral_radius(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(_square(m))))) if np.size(m) else 0.0


def psd_factor(m) -> np.ndarray:
    """Lower-triangular factor F with F F' = m; falls back to a symmetric root for singular m."""
    m = _square(m)
    m = 0.5 * (m + m.T)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(m)
        return v * np.sqrt(np.clip(w, 0.0, None))


# ---------------------------------------------------------------- parameter types


class UnivariateView(NamedTuple):
    eta: float
    phi: float
    s: float
    theta: float


@dataclass(frozen=True)
class SRParams:
    """Short-run VAR(1): autoregressive matrix and lower-triangular Omega^{1/2}."""

    phi: np.ndarray
    omega_half: np.ndarray

    def __post_init__(self):
        phi = _square(self.phi, "phi")
        oh = _square(self.omega_half, "omega_half")
        if phi.shape != oh.shape:
            raise DimensionError("phi and omega_half must have the same shape")
        if spectral_radius(phi) >= 1.0:
            raise NonStationaryError("eigenvalues of phi must lie inside the unit circle")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "omega_half", oh)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return self.omega_half @ self.omega_half.T


@dataclass(frozen=True)
class ULRParams:
    """OU drift Theta, diffusion S and loadings A (n x L)."""

    theta: np.ndarray
    s_mat: np.ndarray
    a_mat: np.ndarray

    def __post_init__(self):
        th = _square(self.theta, "theta")
        s = _square(self.s_mat, "s_mat")
        a = np.asarray(self.a_mat, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if th.shape != s.shape:
            raise DimensionError("theta and s_mat must have the same shape")
        if a.ndim != 2 or a.shape[1] != th.shape[0]:
            raise DimensionError("a_mat must be n x L with L = dim(theta)")
        if a.shape[1] > a.shape[0]:
            raise DimensionError("the number of long-run factors L cannot exceed n")
        if np.any(np.linalg.eigvals(th).real <= 0):
            raise NonStationaryError("eigenvalues of exp(-theta) must lie inside the unit circle")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "s_mat", s)
        object.__setattr__(self, "a_mat", a)

    @property
    def L(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class ModelParams:
    sr: SRParams
    ulr: ULRParams
    a_convention: str = field(default="raw")

    def __post_init__(self):
        if self.sr.n != self.ulr.a_mat.shape[0]:
            raise DimensionError("a_mat must have n rows")

    @property
    def n(self) -> int:
        return self.sr.n

    @property
    def L(self) -> int:
        return self.ulr.L

    @classmethod
    def univariate(cls, phi: float, eta: float, theta: float, s: float) -> "ModelParams":
        return cls(SRParams([[phi]], [[eta]]), ULRParams([[theta]], [[s]], [[1.0]]))

    def univariate_view(self) -> UnivariateView:
        if self.n != 1 or self.L != 1:
            raise DimensionError("univariate accessors need n = L = 1")
        return UnivariateView(
            eta=float(self.sr.omega_half[0, 0]),
            phi=float(self.sr.phi[0, 0]),
            s=float(self.ulr.s_mat[0, 0]),
            theta=float(self.ulr.theta[0, 0]),
        )

    def identified(self) -> "ModelParams":
        """Observationally equivalent parameters with A'A = Id.

        With A = Q R (thin QR, diag(R) > 0), A y_l = Q (R y_l) and R y_l is again
        OU with drift R Theta R^{-1} and diffusion R S.
        """
        q, r = np.linalg.qr(self.ulr.a_mat)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        q = q * signs
        r = signs[:, None] * r
        rinv = np.linalg.inv(r)
        ulr = ULRParams(r @ self.ulr.theta @ rinv, r @ self.ulr.s_mat, q)
        return ModelParams(self.sr, ulr, a_convention="identified")


def bivariate_design_params() -> ModelParams:
    """Bivariate Monte-Carlo design: Phi = diag(.3,.7), triangular Omega^{1/2}, A = (1,1)', exp(-10 theta) = .4, s = 1."""
    theta = math.log(2.5) / 10.0
    return ModelParams(
        SRParams(np.diag([0.3, 0.7]), [[1.0, 1.0], [0.0, 2.0]]),
        ULRParams([[theta]], [[1.0]], [[1.0], [1.0]]),
    )


# ---------------------------------------------------------------- discretisation


@dataclass(frozen=True)
class DiscretizedULR:
    rho_mat: np.ndarray
    sigma_T: np.ndarray
    T: float


def _transition(ulr: ULRParams, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact OU transition over a time step: (exp(-Theta*step), Sigma_step)."""
    theta = ulr.theta
    L = theta.shape[0]
    ks = kron_sum(theta)
    q = ulr.s_mat @ ulr.s_mat.T
    rhs = (np.eye(L * L) - mat_exp(-ks * step)) @ q.reshape(-1, order="F")
    vec = np.linalg.solve(ks, rhs)
    sig = vec.reshape(L, L, order="F")
    return mat_exp(-theta * step), 0.5 * (sig + sig.T)


def discretize_ulr(ulr: ULRParams, T) -> DiscretizedULR:
    """OU sampled on the grid t/T: AR matrix exp(-Theta/T) and innovation covariance Sigma_T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rho, sig = _transition(ulr, 1.0 / T)
    return DiscretizedULR(rho, sig, T)


def stationary_cov_ulr(ulr: ULRParams) -> np.ndarray:
    """Sigma with vec(Sigma) = (Theta (+) Theta)^{-1} vec(S S')."""
    L = ulr.L
    q = ulr.s_mat @ ulr.s_mat.T
    vec = np.linalg.solve(kron_sum(ulr.theta), q.reshape(-1, order="F"))
    sig = vec.reshape(L, L, order="F")
    return 0.5 * (sig + sig.T)


def stationary_cov_sr(sr: SRParams, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Gamma_s(0) = sum_j Phi^j Omega Phi^j' via the fixed point Gamma <- Phi Gamma Phi' + Omega."""
    phi = sr.phi
    if spectral_radius(phi) >= 1.0:
        raise NonStationaryError("phi is not stable")
    omega = sr.omega
    gamma = omega.copy()
    scale = max(1.0, float(np.max(np.abs(omega))))
    for _ in range(max_iter):
        new = phi @ gamma @ phi.T + omega
        if np.max(np.abs(new - gamma)) <= tol * scale:
            gamma = new
            break
        gamma = new
    else:
        raise RuntimeError("Lyapunov iteration did not converge")
    return 0.5 * (gamma + gamma.T)


def sr_acov(sr: SRParams, h: int) -> np.ndarray:
    """Gamma_s(h) = Phi^h Gamma_s(0) for h >= 0."""
    return np.linalg.matrix_power(sr.phi, h) @ stationary_cov_sr(sr)


def long_run_cov_sr(sr: SRParams) -> np.ndarray:
    """Sigma_inf = (I - Phi)^{-1} Omega (I - Phi)^{-T} for the VAR(1) short-run component."""
    inv = np.linalg.inv(np.eye(sr.n) - sr.phi)
    return inv @ sr.omega @ inv.T


# ---------------------------------------------------------------- univariate theory


def theo_acov_univ(params: ModelParams, T, h: int, variant: str = "growing_ou") -> float:
    """Lag-h autocovariance of the univariate array.

    ``growing_ou``: eta^2 phi^h + s^2/(2 theta) (1 - exp(-2 h theta / T)).
    ``stationary_ou``: eta^2 phi^h / (1 - phi^2) + s^2/(2 theta) exp(-h theta / T),
    the autocovariance of the simulated process (eta is the innovation scale).
    """
    eta, phi, s, theta = params.univariate_view()
    if h < 0:
        raise ValueError("h must be >= 0")
    var_l = s * s / (2.0 * theta)
    if variant == "growing_ou":
        return eta**2 * phi**h + var_l * -math.expm1(-2.0 * h * theta / T)
    if variant == "stationary_ou":
        return eta**2 * phi**h / (1.0 - phi**2) + var_l * math.exp(-h * theta / T)
    raise ValueError(f"unknown variant {variant!r}")


def theo_spectrum_univ(params: ModelParams, T, w, variant: str = "unnormalized"):
    """Spectral density of the univariate array at frequency w (vectorised in w).

    The OU part is s^2/(2 pi theta) (1 - r^2) / (1 + r^2 - 2 r cos w) with
    r = exp(-theta/T) for ``unnormalized``; ``normalized`` halves it so the
    density integrates to the lag-0 variance of the two-component process.
    """
    eta, phi, s, theta = params.univariate_view()
    w = np.asarray(w, dtype=float)
    sr_part = eta**2 / (2 * math.pi) / (1.0 + phi**2 - 2.0 * phi * np.cos(w))
    r = math.exp(-theta / T)
    ulr_part = s * s / (2 * math.pi * theta) * (1.0 - r * r) / (1.0 + r * r - 2.0 * r * np.cos(w))
    if variant == "normalized":
        ulr_part = 0.5 * ulr_part
    elif variant != "unnormalized":
        raise ValueError(f"unknown variant {variant!r}")
    out = sr_part + ulr_part
    return float(out) if out.ndim == 0 else out


def asymptotic_limit(params: ModelParams, c_or_lambda: float, kind: str, variant: str | None = None) -> float:
    """Large-T limits of the univariate autocovariance and spectrum.

    ``acov_long_lag``: limit of the lag-cT autocovariance (variants as in
    :func:`theo_acov_univ`, default ``growing_ou``).
    ``spectrum_zero``: limit of the spectrum at w_T = sqrt(lambda / T)
    (variants as in :func:`theo_spectrum_univ`, default ``unnormalized``).
    The unnormalized OU term tends to s^2 / (pi lambda); this equals 2 theta / lambda
    only when s^2 = 2 pi theta.
    """
    eta, phi, s, theta = params.univariate_view()
    x = float(c_or_lambda)
    if x <= 0:
        raise ValueError("c_or_lambda must be > 0")
    if kind == "acov_long_lag":
        variant = variant or "growing_ou"
        if variant == "growing_ou":
            return s * s / (2 * theta) * -math.expm1(-2.0 * x * theta)
        if variant == "stationary_ou":
            return s * s / (2 * theta) * math.exp(-x * theta)
        raise ValueError(f"unknown variant {variant!r}")
    if kind == "spectrum_zero":
        variant = variant or "unnormalized"
        base = eta**2 / (2 * math.pi) / (1.0 - phi) ** 2
        if variant == "unnormalized":
            return base + s * s / (math.pi * x)
        if variant == "normalized":
            return base + s * s / (2 * math.pi * x)
        raise ValueError(f"unknown variant {variant!r}")
    raise ValueError(f"unknown kind {kind!r}")
