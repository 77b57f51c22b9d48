"""Seeded Monte-Carlo experiments: figure artifacts, replication studies, coverage and audits.

Every function here is a pure function of its arguments and seed.  Artifact
files start with a ``# spec_hash=...`` comment line so a CSV can be traced back
to the experiment that produced it.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.signal import lfilter

from . import svgplot
from .acf import acf_family, end_aligned_grid, local_means
from .config import floats, format_kv, params_from_kv, params_to_kv, parse_kv
from .estimator import ar1_mle, estimate
from .model_core import (
    ModelParams,
    ULRParams,
    bivariate_design_params,
    discretize_ulr,
    theo_spectrum_univ,
)
from .prediction import (
    ConfidenceBelt,
    build_belt,
    invert_belt,
    minmax_interval,
    plug_in_interval,
)
from .rng import normals, stream
from .simulator import ltu_variance, simulate_array, simulate_ltu, simulate_replications, tail_prob

DEFAULT_OUTPUTS = ("path", "local_means", "acf_standard", "acf_local", "acf_averaged_sr", "acf_means")

# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    params: ModelParams
    T: int
    c_grid: tuple
    H_T: int
    K: int
    reps: int
    seed: int
    outputs: tuple = DEFAULT_OUTPUTS
    max_lag: int = 40

    def __post_init__(self):
        c = np.asarray(self.c_grid, dtype=float)
        object.__setattr__(self, "c_grid", tuple(float(v) for v in c))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.T < 2 or self.H_T < 1 or self.reps < 1:
            raise ValueError("need T >= 2, H_T >= 1, reps >= 1")
        if len(c) != self.K:
            raise ValueError(f"c_grid has {len(c)} points but K = {self.K}")
        starts = np.rint(c * self.T).astype(int)
        if np.any(starts < 1) or np.any(starts + self.H_T > self.T):
            raise ValueError("every window (c_k T, c_k T + H_T] must lie inside 1..T with a lag-1 neighbour")
        unknown = set(self.outputs) - set(DEFAULT_OUTPUTS)
        if unknown:
            raise ValueError(f"unknown outputs: {sorted(unknown)}")

    def to_kv(self) -> dict[str, str]:
        kv = {"name": self.name}
        kv.update(params_to_kv(self.params))
        kv.update(
            T=str(self.T),
            H_T=str(self.H_T),
            K=str(self.K),
            c_grid=" ".join(repr(v) for v in self.c_grid),
            reps=str(self.reps),
            seed=str(self.seed),
            outputs=" ".join(self.outputs),
            max_lag=str(self.max_lag),
        )
        return kv

    def to_text(self) -> str:
        return format_kv(self.to_kv())

    @property
    def spec_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def spec_from_kv(kv: dict[str, str]) -> ExperimentSpec:
    T, H, K = int(kv["T"]), int(kv["H_T"]), int(kv["K"])
    grid = floats(kv["c_grid"]) if "c_grid" in kv else end_aligned_grid(K, H, T)
    return ExperimentSpec(
        name=kv.get("name", "custom"),
        params=params_from_kv(kv),
        T=T,
        c_grid=tuple(grid),
        H_T=H,
        K=K,
        reps=int(kv.get("reps", 1)),
        seed=int(kv.get("seed", 0)),
        outputs=tuple(kv["outputs"].split()) if "outputs" in kv else DEFAULT_OUTPUTS,
        max_lag=int(kv.get("max_lag", 40)),
    )


def load_spec(path) -> ExperimentSpec:
    return spec_from_kv(parse_kv(Path(path).read_text()))


def bivariate_preset(seed: int = 1, reps: int = 1) -> ExperimentSpec:
    """Bivariate design at T = 7200, H_T = 60, K = 20; windows end on the dates kT/K."""
    T, H, K = 7200, 60, 20
    return ExperimentSpec("bivariate", bivariate_design_params(), T, tuple(end_aligned_grid(K, H, T)), H, K, reps, seed)


PRESETS = {"bivariate": bivariate_preset}


def resolve_spec(name_or_path: str) -> ExperimentSpec:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    return load_spec(name_or_path)


# ---------------------------------------------------------------- CSV helpers


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header: list[str], rows, comments: dict | None = None) -> Path:
    """Write a CSV whose first lines are ``# key=value`` comments."""
    buf = io.StringIO()
    for k, v in (comments or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def path_rows(path) -> tuple[list[str], list]:
    n, L = path.y.shape[1], path.y_l_grid.shape[1]
    header = ["t"] + [f"y_{i + 1}" for i in range(n)] + [f"ys_{i + 1}" for i in range(n)] + [f"yl_{j + 1}" for j in range(L)]
    rows = [[t + 1, *path.y[t], *path.y_s[t], *path.y_l_grid[t]] for t in range(path.t_max)]
    return header, rows


def acf_rows(est) -> list:
    rows = []
    for lag, mat in zip(est.lags, est.values):
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                rows.append([lag if isinstance(lag, (int, np.integer)) else float(lag), i + 1, j + 1, mat[i, j]])
    return rows


# ---------------------------------------------------------------- figure suite


@dataclass
class SuiteResult:
    spec_hash: str
    files: dict
    flags: dict
    means_correlation: float


def run_fig_suite(spec: ExperimentSpec, out_dir, svg: bool = False) -> SuiteResult:
    """Simulate one path and write the path, local means and ACF artifacts.

    ACF artifacts whose lag-0 variance is zero carry ``# degenerate=1``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = spec.spec_hash
    base = {"spec_hash": h, "experiment": spec.name}
    path = simulate_array(spec.params, spec.T, spec.seed)
    y = path.y
    c_grid = np.asarray(spec.c_grid)
    files: dict[str, Path] = {}
    flags: dict[str, bool] = {}

    if "path" in spec.outputs:
        header, rows = path_rows(path)
        files["path"] = write_csv(out / "path.csv", header, rows, base)
    lm = local_means(y, c_grid, spec.H_T)
    if "local_means" in spec.outputs:
        n = y.shape[1]
        rows = [[k + 1, c, *lm.means[k]] for k, c in enumerate(c_grid)]
        files["local_means"] = write_csv(out / "local_means.csv", ["k", "c"] + [f"m_{i + 1}" for i in range(n)], rows, base)
    m = lm.means
    corr = float("nan")
    if m.shape[1] >= 2 and np.all(np.std(m, axis=0) > 0):
        corr = float(np.corrcoef(m[:, 0], m[:, 1])[0, 1])

    mid = float(c_grid[len(c_grid) // 2])
    families = {
        "acf_standard": dict(kind="standard", lags=np.arange(0, min(spec.max_lag, spec.T - 1) + 1)),
        "acf_local": dict(kind="local", lags=np.arange(0, min(20, spec.H_T) + 1), c=mid, H_T=spec.H_T),
        "acf_averaged_sr": dict(kind="averaged_sr", lags=np.arange(0, min(20, spec.H_T) + 1), c_grid=c_grid, H_T=spec.H_T),
        "acf_means": dict(kind="long_run_of_means", lags=np.arange(0, spec.K), c_grid=c_grid, H_T=spec.H_T),
    }
    estimates = {}
    for name, kw in families.items():
        if name not in spec.outputs:
            continue
        lags = kw.pop("lags")
        kind = kw.pop("kind")
        est = acf_family(y, kind, lags, **kw)
        estimates[name] = est
        flags[name] = est.degenerate
        files[name] = write_csv(
            out / f"{name}.csv", ["lag", "i", "j", "value"], acf_rows(est), {**base, "degenerate": int(est.degenerate)}
        )

    if svg:
        t = np.arange(1, spec.T + 1)
        if "path" in files:
            series = {f"y_{i + 1}": (t, y[:, i]) for i in range(y.shape[1])}
            files["path_svg"] = svgplot.save(svgplot.line_plot(series, "simulated path"), out / "path.svg")
        if "local_means" in files:
            series = {f"m_{i + 1}": (c_grid, m[:, i]) for i in range(m.shape[1])}
            files["local_means_svg"] = svgplot.save(svgplot.line_plot(series, "local means"), out / "local_means.svg")
        for name, est in estimates.items():
            r = est.correlations()
            series = {f"({i + 1},{i + 1})": (est.lags, r[:, i, i]) for i in range(r.shape[1])}
            files[f"{name}_svg"] = svgplot.save(svgplot.line_plot(series, name), out / f"{name}.svg")

    (out / "spec.txt").write_text(spec.to_text())
    manifest = "".join(f"{p.name} {h}\n" for p in files.values())
    (out / "manifest.txt").write_text(manifest)
    return SuiteResult(h, files, flags, corr)


# ---------------------------------------------------------------- replication studies


@dataclass
class ReplicationStudy:
    seeds: np.ndarray
    phi_hat: np.ndarray  # (R, n, n)
    L_hat: np.ndarray
    alignment: np.ndarray  # |<a_hat, a_true>| with a_true normalised; NaN when L_hat != 1
    gamma0_hat: np.ndarray
    gamma1_hat: np.ndarray
    theta_hat: np.ndarray  # NaN when L_hat != 1


def replicate_estimation(
    params: ModelParams, T: int, H_T: int, K: int, seeds, rule: str = "significance", threshold: float = 0.05
) -> ReplicationStudy:
    """Run :func:`estimate` on one path per seed (replication 0 of each seed)."""
    seeds = np.asarray(list(seeds))
    grid = end_aligned_grid(K, H_T, T)
    a_true = params.ulr.a_mat[:, 0] / np.linalg.norm(params.ulr.a_mat[:, 0])
    phis, Ls, al, g0s, g1s, ths = [], [], [], [], [], []
    for sd in seeds:
        y = simulate_array(params, T, int(sd)).y
        rep = estimate(y, grid, H_T, threshold=threshold, rule=rule)
        phis.append(rep.phi_hat)
        Ls.append(rep.L_hat)
        g0s.append(rep.gamma0_hat)
        g1s.append(rep.gamma1_hat)
        if rep.L_hat == 1:
            al.append(abs(float(rep.a_hat[:, 0] @ a_true)))
            ths.append(float(rep.theta_hat[0, 0]))
        else:
            al.append(math.nan)
            ths.append(math.nan)
    return ReplicationStudy(seeds, np.array(phis), np.array(Ls), np.array(al), np.array(g0s), np.array(g1s), np.array(ths))


def impossibility_design_params() -> ModelParams:
    """Univariate design where the factor dominates the window-mean noise: phi = .5, eta = 1, theta = 2, s = 4."""
    return ModelParams.univariate(phi=0.5, eta=1.0, theta=2.0, s=4.0)


def _iqr(x) -> float:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 2:
        return math.nan
    q75, q25 = np.percentile(x, [75, 25])
    return float(q75 - q25)


@dataclass
class ImpossibilityTable:
    T: list
    H_T: list
    iqr_theta: list
    iqr_phi: list
    median_theta: list
    reps: int
    flags: list = field(default_factory=list)

    @property
    def theta_ratio(self) -> float:
        return self.iqr_theta[-1] / self.iqr_theta[0]

    @property
    def phi_ratio(self) -> float:
        return self.iqr_phi[-1] / self.iqr_phi[0]

    def rows(self):
        return list(zip(self.T, self.H_T, self.iqr_theta, self.iqr_phi, self.median_theta))


def impossibility_demo(
    K: int = 25,
    T_grid=(7200, 28800),
    reps: int = 2000,
    seed: int = 0,
    params: ModelParams | None = None,
    H_base: int = 60,
    chunk: int = 100,
) -> ImpossibilityTable:
    """Dispersion of theta_hat and phi_hat with K fixed as T grows.

    H_T grows in proportion to T (H_base at T_grid[0]), so the short-run
    sample behind phi_hat grows with T while theta_hat always rests on K
    pseudo-observations.
    """
    params = params or impossibility_design_params()
    if params.n != 1:
        raise ValueError("impossibility_demo uses a univariate design")
    T0 = T_grid[0]
    out = ImpossibilityTable([], [], [], [], [], reps)
    for T in T_grid:
        H = int(round(H_base * T / T0))
        grid = end_aligned_grid(K, H, T)
        th, ph = [], []
        for start in range(0, reps, chunk):
            idx = list(range(start, min(reps, start + chunk)))
            y, _, _ = simulate_replications(params, T, seed, idx)
            for r in range(len(idx)):
                rep = estimate(y[r], grid, H, rule="share")
                ph.append(rep.phi_hat[0, 0])
                th.append(rep.theta_hat[0, 0] if rep.L_hat == 1 else math.nan)
        out.T.append(T)
        out.H_T.append(H)
        out.iqr_theta.append(_iqr(th))
        out.iqr_phi.append(_iqr(ph))
        med = np.asarray(th, float)
        med = med[np.isfinite(med)]
        out.median_theta.append(float(np.median(med)) if med.size else math.nan)
    if reps < 2:
        out.flags.append("dispersion_undefined")
    return out


# ---------------------------------------------------------------- local-mean variance diagnostic


@dataclass
class VarianceRow:
    H: int
    empirical: float
    predicted: float  # (1/3) s^2 exp(2 theta c) H^2 / T
    predicted_corrected: float  # (1/3) s^2 H^2 / T
    exact: float  # finite-H variance of the Brownian term
    ratio: float  # empirical / predicted
    ratio_corrected: float
    flagged: bool


def local_mean_variance_check(ulr: ULRParams, c: float, H_grid, T: int, reps: int, seed: int) -> list[VarianceRow]:
    """Variance of sqrt(H) times the window mean of the OU innovations after date cT.

    Delta(c) = (1/H) sum_{j=1..H} [y_l(c + j/T) - exp(-theta j/T) y_l(c)] collects
    only the Brownian increments inside the window.  Its H-scaled variance is
    compared with (1/3) s^2 exp(2 theta c) H^2/T, with the exp-free version
    (1/3) s^2 H^2/T, and with the exact finite sum.  Rows with H^2/T > 1 are
    flagged because the small-window expansion no longer applies.
    """
    if ulr.L != 1:
        raise ValueError("univariate OU only")
    theta, s = float(ulr.theta[0, 0]), float(ulr.s_mat[0, 0])
    disc = discretize_ulr(ulr, T)
    rho, sd = float(disc.rho_mat[0, 0]), math.sqrt(float(disc.sigma_T[0, 0]))
    rows = []
    for H in H_grid:
        H = int(H)
        z = normals(stream(seed, "local-mean-variance", H), (reps, H))
        e = lfilter([1.0], [1.0, -rho], sd * z, axis=1)
        stat = math.sqrt(H) * e.mean(axis=1)
        emp = float(np.var(stat, ddof=1))
        pred = s * s * math.exp(2 * theta * c) * H * H / (3.0 * T)
        pred_c = s * s * H * H / (3.0 * T)
        w = np.array([np.sum(rho ** np.arange(H - i)) for i in range(H)])  # weight of innovation i+1
        exact = float(disc.sigma_T[0, 0] * np.sum(w**2) / H)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = emp / pred if pred > 0 else math.nan
            ratio_c = emp / pred_c if pred_c > 0 else math.nan
        rows.append(VarianceRow(H, emp, pred, pred_c, exact, ratio, ratio_c, H * H / T > 1))
    return rows


# ---------------------------------------------------------------- coverage studies


def ar1_paths(rho: float, n_transitions: int, reps: int, seed: int, label, scale: float = 1.0, extra: int = 0):
    """Stationary AR(1) paths of variance scale^2 plus ``extra`` spare normals per row for future draws."""
    z = normals(stream(seed, "coverage", label), (reps, n_transitions + 1 + extra))
    x = np.empty((reps, n_transitions + 1))
    x[:, 0] = z[:, 0]
    a = math.sqrt(1.0 - rho * rho)
    for k in range(1, n_transitions + 1):
        x[:, k] = rho * x[:, k - 1] + a * z[:, k]
    return scale * x, z[:, n_transitions + 1 :]


def belt_coverage(belt: ConfidenceBelt, rho_true: float, alpha1: float, reps: int, seed: int) -> float:
    """Share of simulated estimates whose inverted (1 - alpha1) set contains rho_true."""
    x, _ = ar1_paths(rho_true, belt.n_transitions, reps, seed, f"belt-{rho_true!r}")
    if belt.demean:
        x = x - x.mean(axis=1, keepdims=True)
    rh = ar1_mle(x)[0]
    hits = [invert_belt(belt, float(r), alpha1).contains(rho_true) for r in rh]
    return float(np.mean(hits))


@dataclass
class MinmaxCoverage:
    q_star: float  # coverage of the min-max bound
    plug_in: float  # coverage of the plug-in bound
    max_identity_error: float  # largest |sum(decomposition) - Q*|
    reps: int


def minmax_coverage(
    theta: float,
    s: float,
    K: int,
    gamma: float,
    alpha: float,
    reps: int,
    seed: int,
    belt: ConfidenceBelt | None = None,
    eta: float = 0.0,
) -> MinmaxCoverage:
    """Coverage of Q* and of the plug-in quantile for the factor gamma units ahead.

    The factor is observed on a grid of spacing 1/K (K transitions), theta and s
    are estimated by the AR(1) ML fit, and the future value is drawn from the
    exact OU transition plus independent N(0, eta^2) noise.
    """
    belt = belt or build_belt(K, seed=seed)
    rho = math.exp(-theta / K)
    sc = s / math.sqrt(2 * theta)
    x, spare = ar1_paths(rho, K, reps, seed, f"minmax-{theta!r}-{s!r}", scale=sc, extra=2)
    m = math.exp(-theta * gamma)
    v = s * s * -math.expm1(-2 * theta * gamma) / (2 * theta)
    future = m * x[:, -1] + math.sqrt(v) * spare[:, 0] + eta * spare[:, 1]
    rh, var, _ = ar1_mle(x)
    hit_q = hit_p = 0
    worst = 0.0
    for i in range(reps):
        r = abs(float(rh[i]))
        th = -K * math.log(r)
        s_hat = math.sqrt(2 * th * float(var[i]) / (1 - r * r))
        pi = minmax_interval(alpha, belt, float(rh[i]), (eta, s_hat), float(x[i, -1]), gamma)
        qp = plug_in_interval(alpha, (th, eta, s_hat), float(x[i, -1]), gamma)
        worst = max(worst, abs(sum(pi.decomposition) - pi.upper))
        hit_q += future[i] < pi.upper
        hit_p += future[i] < qp
    return MinmaxCoverage(hit_q / reps, hit_p / reps, worst, reps)


# ---------------------------------------------------------------- spectrum audit


@dataclass
class SpectrumAudit:
    theta: float
    s: float
    T: int
    simulated_variance: float
    integral_unnormalized: float
    integral_normalized: float

    @property
    def factor_unnormalized(self) -> float:
        return self.integral_unnormalized / self.simulated_variance

    @property
    def factor_normalized(self) -> float:
        return self.integral_normalized / self.simulated_variance

    def rows(self):
        return [
            ("unnormalized", self.integral_unnormalized, self.simulated_variance, self.factor_unnormalized),
            ("normalized", self.integral_normalized, self.simulated_variance, self.factor_normalized),
        ]


def spectrum_audit(theta: float = 1.0, s: float = 1.0, T: int = 2, reps: int = 50000, seed: int = 0) -> SpectrumAudit:
    """Integrate the OU part of both spectrum variants and compare with the simulated OU variance.

    The short-run part is switched off (phi = eta = 0) so only the OU term is
    audited.  The simulated variance pools all T dates of ``reps`` stationary
    paths.
    """
    params = ModelParams.univariate(phi=0.0, eta=0.0, theta=theta, s=s)
    _, _, y_l = simulate_replications(params, T, seed, reps)
    sim = float(np.var(y_l[..., 0]))
    ints = {}
    for variant in ("unnormalized", "normalized"):
        ints[variant] = quad(lambda w: theo_spectrum_univ(params, T, w, variant), -math.pi, math.pi, limit=200, epsabs=1e-13)[0]
    return SpectrumAudit(theta, s, T, sim, ints["unnormalized"], ints["normalized"])


# ---------------------------------------------------------------- LTU classification


@dataclass
class LTURow:
    tag: str
    T: int
    tail: float
    tail_se: float
    var_mid_empirical: float
    var_mid_exact: float


def ltu_classification(variants, T_grid, reps: int, seed: int, A_level: float = 4.0) -> list[LTURow]:
    """Tail probability over t <= T and the variance at t = T/2 for each variant and T."""
    rows = []
    for v in variants:
        for T in T_grid:
            est = tail_prob(v, T, A_level, reps, seed)
            paths = simulate_ltu(v, T, seed, reps=reps)
            mid = T // 2
            rows.append(LTURow(v.tag, T, est.prob, est.se, float(np.var(paths[:, mid - 1])), ltu_variance(v, T, mid)))
    return rows

