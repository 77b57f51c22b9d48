"""Five-step estimation of the short-run VAR and the ultra-long-run OU factor.

1. Phi and Omega from the grid-averaged local autocovariances at lags 0 and 1.
2. Local means m_T(c_k) over the grid.
3. PCA of M_T = sum_k m_T(c_k) m_T(c_k)'; loadings with A'A = Id.
4. Gaussian ML for the OU drift and diffusion from the factor values on the grid.
5. Residual comparison of observed and fitted values on a second grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import logm

from .acf import LocalMeans, _as_2d, averaged_sr_acov, local_means
from .errors import ClippedCovarianceWarning, DegenerateError, DimensionError, WindowError
from .model_core import kron_sum, mat_exp, psd_factor, spectral_radius

# ---------------------------------------------------------------- step 1


def _clip_psd(m: np.ndarray) -> tuple[np.ndarray, bool]:
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    if np.all(w >= 0):
        return m, False
    return (v * np.clip(w, 0.0, None)) @ v.T, True


def step1_sr(gamma0, gamma1) -> tuple[np.ndarray, np.ndarray]:
    """Method of moments for the short-run VAR: Phi = G1 G0^{-1}, Omega = G0 - Phi G0 Phi'.

    A negative eigenvalue in Omega is clipped to zero with a
    :class:`ClippedCovarianceWarning`.
    """
    g0 = np.atleast_2d(np.asarray(gamma0, dtype=float))
    g1 = np.atleast_2d(np.asarray(gamma1, dtype=float))
    if g0.shape != g1.shape or g0.shape[0] != g0.shape[1]:
        raise DimensionError("gamma0 and gamma1 must be square and of equal shape")
    if np.linalg.matrix_rank(g0) < g0.shape[0]:
        raise DegenerateError("gamma0 is singular")
    phi = np.linalg.solve(g0.T, g1.T).T
    omega, clipped = _clip_psd(g0 - phi @ g0 @ phi.T)
    if clipped:
        warnings.warn("moment estimate of Omega was not PSD; clipped at 0", ClippedCovarianceWarning, stacklevel=2)
    return phi, omega


# ---------------------------------------------------------------- steps 2-3


def step2_means(y, c_grid, H_T: int) -> LocalMeans:
    return local_means(y, c_grid, H_T)


class PCAResult(NamedTuple):
    L_hat: int
    a_hat: np.ndarray  # (n, L_hat)
    y_l_hat: np.ndarray  # (K, L_hat)
    eigenvalues: np.ndarray  # descending


def sign_fix(v: np.ndarray) -> np.ndarray:
    """Flip columns so that the first entry with |x| > 1e-12 is positive."""
    v = v.copy()
    for j in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, j]) > 1e-12)
        if nz.size and v[nz[0], j] < 0:
            v[:, j] = -v[:, j]
    return v


@lru_cache(maxsize=64)
def wishart_max_eig_quantile(n: int, K: int, level: float = 0.05, draws: int = 20000) -> float:
    """(1 - level) quantile of the largest eigenvalue of a Wishart_n(K, Id) matrix (Monte Carlo, fixed seed)."""
    from .rng import normals, stream

    z = normals(stream(0, "wishart", n, K), (draws, K, n))
    w = np.linalg.eigvalsh(np.einsum("rki,rkj->rij", z, z))[:, -1]
    return float(np.quantile(w, 1.0 - level))


def step3_pca(means: LocalMeans, threshold: float = 0.05, noise_cov=None, level: float = 0.05) -> PCAResult:
    """Factor count, loadings and factor values from the local means.

    Loadings are the leading orthonormal eigenvectors of M_T, sign-fixed, and
    the factor values are a_hat' m_T(c_k).

    The count uses one of two rules.  Without ``noise_cov``, an eigenvalue is
    kept when its share of the trace exceeds ``threshold``.  With
    ``noise_cov`` (the covariance of one local mean's sampling error,
    Sigma_inf / H_T), M_T is whitened by it and eigenvalues above the
    (1 - level) quantile of the largest Wishart_n(K, Id) eigenvalue count as
    significant.
    """
    m = np.asarray(means.means, dtype=float)
    K, n = m.shape
    if K < 2:
        raise ValueError("PCA needs at least two local means")
    M = m.T @ m
    w, v = np.linalg.eigh(M)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    trace = float(np.sum(w))
    if trace <= 0:
        return PCAResult(0, np.zeros((n, 0)), np.zeros((K, 0)), np.clip(w, 0, None))
    if noise_cov is None:
        L_hat = int(np.sum(w / trace > threshold))
    else:
        f = np.linalg.cholesky(np.atleast_2d(noise_cov))
        winv = np.linalg.inv(f)
        ww = np.linalg.eigvalsh(winv @ M @ winv.T)
        L_hat = int(np.sum(ww > wishart_max_eig_quantile(n, K, level)))
    L_hat = min(L_hat, n)
    a_hat = sign_fix(v[:, :L_hat])
    return PCAResult(L_hat, a_hat, m @ a_hat, w)


# ---------------------------------------------------------------- step 4

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def ar1_mle(x, grid_size: int = 512, bound: float = 0.999, iters: int = 80):
    """Conditional Gaussian ML of a zero-mean AR(1), vectorised over leading axes.

    The innovation variance is profiled out, leaving the residual sum of
    squares in rho.  rho is located on a ``grid_size``-point scan of
    [-bound, bound] and refined by golden-section search between the scan
    neighbours.  Returns ``(rho, innovation_variance, loglik)``, with NaN for
    series without variation.
    """
    x = np.asarray(x, dtype=float)
    lag, cur = x[..., :-1], x[..., 1:]
    N = cur.shape[-1]
    sxx = np.einsum("...t,...t->...", lag, lag)
    sxy = np.einsum("...t,...t->...", lag, cur)
    syy = np.einsum("...t,...t->...", cur, cur)

    def rss(r):
        return syy - 2.0 * r * sxy + r * r * sxx

    grid = np.linspace(-bound, bound, grid_size)
    scan = rss(grid.reshape((grid_size,) + (1,) * sxx.ndim))
    j = np.argmin(scan, axis=0)
    lo = grid[np.maximum(j - 1, 0)]
    hi = grid[np.minimum(j + 1, grid_size - 1)]
    a, b = lo.astype(float), hi.astype(float)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = rss(c), rss(d)
    for _ in range(iters):
        left = fc <= fd
        a_n = np.where(left, a, c)
        b_n = np.where(left, d, b)
        c_n = np.where(left, b_n - _GOLDEN * (b_n - a_n), d)
        d_n = np.where(left, c, a_n + _GOLDEN * (b_n - a_n))
        fc, fd = np.where(left, rss(c_n), fd), np.where(left, fc, rss(d_n))
        a, b, c, d = a_n, b_n, c_n, d_n
    rho = 0.5 * (a + b)
    var = rss(rho) / N
    with np.errstate(divide="ignore", invalid="ignore"):
        loglik = -0.5 * N * (np.log(2 * np.pi * var) + 1.0)
    bad = (sxx <= 0) | ~(var > 0)
    rho = np.where(bad, np.nan, rho)
    return rho, np.where(bad, np.nan, var), np.where(bad, np.nan, loglik)


@dataclass(frozen=True)
class OUFit:
    theta_hat: np.ndarray
    s_hat: np.ndarray
    loglik: float
    rho_hat: np.ndarray
    sigma_c2: np.ndarray  # stationary covariance of the factor
    flags: tuple = ()


def step4_mle_ou(y_l_hat, K: float, bound: float = 0.999) -> OUFit:
    """OU drift and diffusion from factor values on a regular grid of spacing 1/K.

    L = 1: conditional ML of rho = exp(-theta/K) and the stationary scale
    sigma_c (innovation variance sigma_c^2 (1 - rho^2)); theta = -K ln|rho|,
    s^2 = 2 theta sigma_c^2.  A negative rho is kept with the flag
    ``negative_rho``.

    L > 1: least-squares VAR(1), Theta = -K log(B) on the principal branch
    (flag ``principal_log``) and S S' recovered from the innovation covariance.
    """
    x = np.asarray(y_l_hat, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    Kn, L = x.shape
    if L < 1:
        raise ValueError("no long-run factor to fit")
    if Kn < 3:
        raise ValueError("need at least three factor values")
    if np.all(np.ptp(x, axis=0) == 0):
        raise DegenerateError("pseudo-observations are constant; rho is at the boundary")
    if L == 1:
        rho, var, ll = ar1_mle(x[:, 0], bound=bound)
        if not np.isfinite(rho):
            raise DegenerateError("pseudo-observations have no variation")
        flags = []
        if rho < 0:
            flags.append("negative_rho")
        if abs(rho) >= bound - 1e-9:
            flags.append("boundary")
        if abs(rho) < 2.0 / math.sqrt(Kn - 1):
            flags.append("weakly_identified")
        r = abs(float(rho))
        sc2 = float(var) / (1.0 - r * r)
        theta = -K * math.log(r) if r > 0 else math.inf
        s = math.sqrt(2.0 * theta * sc2) if math.isfinite(theta) else math.inf
        return OUFit(np.array([[theta]]), np.array([[s]]), float(ll), np.array([[float(rho)]]), np.array([[sc2]]), tuple(flags))

    lag, cur = x[:-1], x[1:]
    N = cur.shape[0]
    B = np.linalg.solve(lag.T @ lag, lag.T @ cur).T
    resid = cur - lag @ B.T
    V = resid.T @ resid / N
    ev = np.linalg.eigvals(B)
    if np.any((np.abs(ev.imag) < 1e-12) & (ev.real <= 0)):
        raise ValueError("VAR coefficient has a non-positive real eigenvalue; no real matrix logarithm")
    theta = np.real(-K * logm(B))
    ks = kron_sum(theta)
    rhs = ks @ V.reshape(-1, order="F")
    q = np.linalg.solve(np.eye(L * L) - mat_exp(-ks / K), rhs).reshape(L, L, order="F")
    q = 0.5 * (q + q.T)
    sign, logdet = np.linalg.slogdet(V)
    ll = -0.5 * N * (L * math.log(2 * math.pi) + logdet + L)
    vec_sig = np.linalg.solve(ks, q.reshape(-1, order="F")).reshape(L, L, order="F")
    flags = ["principal_log"]
    if spectral_radius(B) >= 1:
        flags.append("boundary")
    return OUFit(theta, psd_factor(q), float(ll), B, 0.5 * (vec_sig + vec_sig.T), tuple(flags))


# ---------------------------------------------------------------- long-run variance


def long_run_variance(y_s_window, bandwidth: int) -> np.ndarray:
    """Bartlett-weighted sum of sample autocovariances (Newey-West), demeaned over the window."""
    x = _as_2d(y_s_window)
    N = x.shape[0]
    if not 0 <= bandwidth < N:
        raise ValueError("bandwidth must be in [0, window length)")
    x = x - x.mean(axis=0)
    out = x.T @ x / N
    for j in range(1, bandwidth + 1):
        g = x[j:].T @ x[:-j] / N
        out = out + (1.0 - j / (bandwidth + 1.0)) * (g + g.T)
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------- report


@dataclass
class ResidualTable:
    gamma: np.ndarray
    observed: np.ndarray
    fitted: np.ndarray
    residual: np.ndarray


@dataclass
class EstimationReport:
    T: int
    c_grid: np.ndarray
    H_T: int
    K: float
    gamma0_hat: np.ndarray
    gamma1_hat: np.ndarray
    phi_hat: np.ndarray
    omega_hat: np.ndarray
    omega_half_hat: np.ndarray
    sigma_inf_hat: np.ndarray
    sigma_inf_kernel: np.ndarray
    L_hat: int
    a_hat: np.ndarray
    y_l_hat: np.ndarray
    eigenvalues: np.ndarray
    theta_hat: np.ndarray
    s_hat: np.ndarray
    rho_hat: np.ndarray
    loglik: float
    factor_rule: str
    flags: list = field(default_factory=list)
    diagnostics: ResidualTable | None = None

    @property
    def spectral_radius_phi(self) -> float:
        return spectral_radius(self.phi_hat)

    def to_rows(self) -> list[tuple[str, int, int, float]]:
        """Flat (name, i, j, value) rows for CSV output."""
        rows: list[tuple[str, int, int, float]] = [
            ("T", 0, 0, self.T),
            ("H_T", 0, 0, self.H_T),
            ("K", 0, 0, self.K),
            ("L_hat", 0, 0, self.L_hat),
            ("loglik", 0, 0, self.loglik),
            ("spectral_radius_phi", 0, 0, self.spectral_radius_phi),
        ]
        mats = {
            "c_grid": self.c_grid[:, None],
            "gamma0_hat": self.gamma0_hat,
            "gamma1_hat": self.gamma1_hat,
            "phi_hat": self.phi_hat,
            "omega_hat": self.omega_hat,
            "omega_half_hat": self.omega_half_hat,
            "sigma_inf_hat": self.sigma_inf_hat,
            "sigma_inf_kernel": self.sigma_inf_kernel,
            "a_hat": self.a_hat,
            "y_l_hat": self.y_l_hat,
            "eigenvalues": self.eigenvalues[:, None],
            "theta_hat": self.theta_hat,
            "s_hat": self.s_hat,
            "rho_hat": self.rho_hat,
        }
        for name, m in mats.items():
            m = np.atleast_2d(m)
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    rows.append((name, i, j, float(m[i, j])))
        return rows

    def to_text(self) -> str:
        def fmt(m):
            m = np.atleast_2d(m)
            return "\n".join("    " + "  ".join(f"{v: .6g}" for v in row) for row in m)

        parts = [
            f"T = {self.T}, H_T = {self.H_T}, K = {self.K:g}, grid points = {len(self.c_grid)}",
            "Step 1 (short run)",
            "  Phi_hat:\n" + fmt(self.phi_hat),
            "  Omega_hat:\n" + fmt(self.omega_hat),
            f"  spectral radius of Phi_hat = {self.spectral_radius_phi:.6g}",
            "  Sigma_inf_hat (VAR(1) formula):\n" + fmt(self.sigma_inf_hat),
            "Step 3 (PCA of local means)",
            f"  rule = {self.factor_rule}; eigenvalues = " + ", ".join(f"{v:.6g}" for v in self.eigenvalues),
            f"  L_hat = {self.L_hat}",
        ]
        if self.L_hat:
            parts.append("  A_hat:\n" + fmt(self.a_hat))
            parts += [
                "Step 4 (OU maximum likelihood)",
                "  rho_hat:\n" + fmt(self.rho_hat),
                "  Theta_hat:\n" + fmt(self.theta_hat),
                "  S_hat:\n" + fmt(self.s_hat),
                f"  loglik = {self.loglik:.6g}",
            ]
        if self.diagnostics is not None:
            r = self.diagnostics.residual
            parts.append(
                f"Step 5: {len(self.diagnostics.gamma)} residuals, mean "
                + ", ".join(f"{v:.4g}" for v in r.mean(axis=0))
            )
        parts.append("flags: " + (", ".join(self.flags) if self.flags else "none"))
        return "\n".join(parts) + "\n"


def _grid_density(c_grid) -> float:
    c = np.asarray(c_grid, dtype=float)
    d = np.diff(c)
    if c.size < 2 or np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise ValueError("c_grid must be a regular increasing grid")
    return 1.0 / d[0]


def estimate(
    y,
    c_grid,
    H_T: int,
    threshold: float = 0.05,
    rule: str = "significance",
    level: float = 0.05,
    residual_grid=None,
) -> EstimationReport:
    """Run steps 1-4 (and step 5 if ``residual_grid`` is given) on an observed path."""
    y = _as_2d(y)
    T, n = y.shape
    c_grid = np.asarray(c_grid, dtype=float)
    K = _grid_density(c_grid)
    flags: list[str] = []
    g0 = averaged_sr_acov(y, c_grid, H_T, 0)
    g1 = averaged_sr_acov(y, c_grid, H_T, 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClippedCovarianceWarning)
        phi, omega = step1_sr(g0, g1)
    if any(issubclass(w.category, ClippedCovarianceWarning) for w in caught):
        flags.append("omega_clipped")
    if spectral_radius(phi) >= 1:
        flags.append("phi_nonstationary")
    sigma_inf = np.linalg.inv(np.eye(n) - phi) @ omega @ np.linalg.inv(np.eye(n) - phi).T
    bw = max(0, min(H_T - 1, int(4 * (H_T / 100.0) ** (2.0 / 9.0))))
    kern = np.mean(
        [long_run_variance(y[int(round(c * T)) : int(round(c * T)) + H_T], bw) for c in c_grid], axis=0
    )

    means = step2_means(y, c_grid, H_T)
    factor_rule = f"share>{threshold:g}"
    noise = None
    if rule == "significance":
        if np.all(np.linalg.eigvalsh(sigma_inf) > 0):
            noise = sigma_inf / H_T
            factor_rule = f"whitened-wishart@{level:g}"
        else:
            flags.append("significance_rule_unavailable")
    elif rule != "share":
        raise ValueError(f"unknown factor rule {rule!r}")
    pca = step3_pca(means, threshold, noise_cov=noise, level=level)
    if pca.L_hat == 0:
        flags.append("no_long_run_factor")
        L = 0
        theta = s = rho = np.zeros((0, 0))
        ll = float("nan")
    else:
        L = pca.L_hat
        try:
            fit = step4_mle_ou(pca.y_l_hat, K)
        except ValueError as exc:  # includes DegenerateError
            flags.append(f"ou_fit_failed: {exc}")
            theta = s = rho = np.full((L, L), np.nan)
            ll = float("nan")
        else:
            theta, s, rho, ll = fit.theta_hat, fit.s_hat, fit.rho_hat, fit.loglik
            flags.extend(fit.flags)
    report = EstimationReport(
        T=T,
        c_grid=c_grid,
        H_T=int(H_T),
        K=K,
        gamma0_hat=g0,
        gamma1_hat=g1,
        phi_hat=phi,
        omega_hat=omega,
        omega_half_hat=psd_factor(omega),
        sigma_inf_hat=sigma_inf,
        sigma_inf_kernel=kern,
        L_hat=L,
        a_hat=pca.a_hat,
        y_l_hat=pca.y_l_hat,
        eigenvalues=pca.eigenvalues,
        theta_hat=theta,
        s_hat=s,
        rho_hat=rho,
        loglik=ll,
        factor_rule=factor_rule,
        flags=flags,
    )
    if residual_grid is not None:
        report.diagnostics = step5_residuals(y, report, residual_grid)
    return report


# ---------------------------------------------------------------- step 5


def step5_residuals(y, report: EstimationReport, gamma_grid) -> ResidualTable:
    """Observed y(gamma_k T) against Phi^{(gamma_k - gamma_{k-1})T} [y(gamma_{k-1}T) - A y_l(gamma_{k-1})] + A y_l(gamma_k).

    The factor value at gamma is a_hat' times the local mean over the H_T
    dates ending at gamma*T.
    """
    y = _as_2d(y)
    T = y.shape[0]
    g = np.asarray(gamma_grid, dtype=float)
    if g.size < 2 or np.any(np.diff(g) <= 0):
        raise ValueError("gamma_grid must be increasing with at least two points")
    if np.any(g <= 0) or np.any(g > 1):
        raise WindowError("gamma_grid must lie in (0, 1]")
    H = report.H_T
    dates = np.rint(g * T).astype(int)
    if np.any(dates - H < 0):
        raise WindowError("first residual date leaves no room for a local mean")
    lm = local_means(y, (dates - H) / T, H)
    level = lm.means @ report.a_hat @ report.a_hat.T  # A_hat y_l_hat(gamma_k)
    obs = y[dates - 1]
    fitted = np.empty((g.size - 1, y.shape[1]))
    for k in range(1, g.size):
        power = np.linalg.matrix_power(report.phi_hat, int(dates[k] - dates[k - 1]))
        fitted[k - 1] = power @ (obs[k - 1] - level[k - 1]) + level[k]
    return ResidualTable(g[1:], obs[1:], fitted, obs[1:] - fitted)
