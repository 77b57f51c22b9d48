"""Apply the method to observed series: CSV ingestion, block-average filtering,
AR(1) fits on both time scales, and three prediction intervals per series.

The three intervals target the average of the ``block_len`` observations
centred ``horizon`` periods after the last observation:

1. a Gaussian interval from an AR(p) fitted to the raw (demeaned) data;
2. the plug-in interval from the AR(1) fitted to the block averages;
3. the two-sided min-max interval that accounts for the estimation risk on
   the long-run AR coefficient, with a confidence belt at the filtered length.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestError
from .estimator import ar1_mle
from .prediction import ConfidenceBelt, build_belt, minmax_interval, normal_quantile, plug_in_interval

log = logging.getLogger(__name__)

# ---------------------------------------------------------------- ingestion


@dataclass(frozen=True)
class SeriesBundle:
    names: tuple
    dates: tuple
    values: np.ndarray  # (T_obs, number of series)

    @property
    def T_obs(self) -> int:
        return self.values.shape[0]

    def series(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def ingest_csv(path, date_column: str | None = None, columns=None) -> SeriesBundle:
    """Read a CSV with one date column and numeric series columns.

    ``date_column`` defaults to the first column; ``columns`` selects a subset
    of series (default: every other column).  Ragged rows, empty or
    non-numeric cells and duplicate dates raise :class:`IngestError` with the
    line number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and not r[0].startswith("#")]
    if not rows:
        raise IngestError(f"{path}: file is empty")
    (_, header), body = rows[0], rows[1:]
    header = [h.strip() for h in header]
    if len(header) < 2:
        raise IngestError(f"{path}: line 1: need a date column and at least one series")
    if date_column and date_column not in header:
        raise IngestError(f"{path}: line 1: no column {date_column!r}")
    dcol = header.index(date_column) if date_column else 0
    names = [h for j, h in enumerate(header) if j != dcol] if columns is None else list(columns)
    missing = [n for n in names if n not in header]
    if missing:
        raise IngestError(f"{path}: line 1: unknown columns {missing}")
    idx = [header.index(n) for n in names]
    if not body:
        raise IngestError(f"{path}: no data rows")
    dates, values, seen = [], [], {}
    for lineno, row in body:
        if len(row) != len(header):
            raise IngestError(f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}")
        d = row[dcol].strip()
        if d in seen:
            raise IngestError(f"{path}: line {lineno}: duplicate date {d!r} (first seen on line {seen[d]})")
        seen[d] = lineno
        try:
            vals = [float(row[j]) for j in idx]
        except ValueError:
            raise IngestError(f"{path}: line {lineno}: non-numeric or missing cell") from None
        if not all(math.isfinite(v) for v in vals):
            raise IngestError(f"{path}: line {lineno}: non-finite value")
        dates.append(d)
        values.append(vals)
    return SeriesBundle(tuple(names), tuple(dates), np.array(values, dtype=float))


# ---------------------------------------------------------------- filtering


@dataclass(frozen=True)
class FilteredULR:
    block_len: int
    centers: np.ndarray  # mid-block positions, 0-based, on the raw time index
    averages: np.ndarray  # (blocks, number of series)
    names: tuple
    dropped: int = 0

    @property
    def length(self) -> int:
        return self.averages.shape[0]


def block_filter(bundle: SeriesBundle, block_len: int = 11) -> FilteredULR:
    """Means over consecutive non-overlapping blocks; a trailing partial block is dropped."""
    if block_len < 2:
        raise ValueError("block_len must be >= 2")
    T = bundle.T_obs
    if block_len > T:
        raise ValueError(f"block_len {block_len} exceeds the {T} observations")
    B = T // block_len
    dropped = T - B * block_len
    if dropped:
        log.info("dropping the last %d observations (partial block)", dropped)
    used = bundle.values[: B * block_len]
    avgs = used.reshape(B, block_len, -1).mean(axis=1)
    centers = np.arange(B) * block_len + (block_len - 1) / 2.0
    return FilteredULR(block_len, centers, avgs, bundle.names, dropped)


# ---------------------------------------------------------------- AR(1) on both scales


def quarter_scale(rho_ulr: float, block_len: int) -> float:
    """Per-period AR coefficient implied by a block-level one: |rho|^(1 / block_len)."""
    return abs(rho_ulr) ** (1.0 / block_len)


@dataclass(frozen=True)
class BlockFit:
    name: str
    rho_ulr: float
    rho_period: float
    negative: bool
    innovation_var: float
    flags: tuple = ()


def fit_block_ar1(filtered: FilteredULR) -> list[BlockFit]:
    """Conditional ML AR(1) on each demeaned block-average series."""
    if filtered.length < 3:
        raise ValueError("need at least three block averages")
    out = []
    for j, name in enumerate(filtered.names):
        x = filtered.averages[:, j] - filtered.averages[:, j].mean()
        if np.ptp(x) == 0:
            out.append(BlockFit(name, math.nan, math.nan, False, math.nan, ("degenerate",)))
            continue
        rho, var, _ = ar1_mle(x)
        rho = float(rho)
        if not math.isfinite(rho):
            out.append(BlockFit(name, math.nan, math.nan, False, math.nan, ("degenerate",)))
            continue
        flags = []
        if abs(rho) < 1e-8:
            flags.append("zero_rho")
            period = 0.0
        else:
            period = quarter_scale(rho, filtered.block_len)
        if rho < 0:
            flags.append("negative_rho")
        out.append(BlockFit(name, rho, period, rho < 0, float(var), tuple(flags)))
    return out


# ---------------------------------------------------------------- raw AR(p)


def fit_ar(x, order: int = 1):
    """OLS AR(p) on a demeaned series: (coefficients, innovation variance)."""
    x = np.asarray(x, dtype=float)
    if not 1 <= order <= 4:
        raise ValueError("AR order must be in 1..4")
    N = x.size
    if N <= 2 * order + 1:
        raise ValueError("series too short for the AR order")
    X = np.column_stack([x[order - k - 1 : N - k - 1] for k in range(order)])
    yv = x[order:]
    coef, *_ = np.linalg.lstsq(X, yv, rcond=None)
    resid = yv - X @ coef
    return coef, float(resid @ resid / resid.size)


def ar_block_forecast(x, coef, sigma2: float, lead_first: int, lead_last: int):
    """Mean and variance of the average of the AR forecasts at leads lead_first..lead_last."""
    p = len(coef)
    hist = list(x[-p:][::-1]) if p else []
    n = lead_last
    fc = []
    state = list(hist)
    for _ in range(n):
        nxt = float(np.dot(coef, state[:p]))
        fc.append(nxt)
        state = [nxt] + state
    psi = np.zeros(n)
    psi[0] = 1.0
    for j in range(1, n):
        psi[j] = sum(coef[k] * psi[j - k - 1] for k in range(min(p, j)))
    leads = np.arange(lead_first, lead_last + 1)
    m = len(leads)
    # error of the average: sum over shocks u_{T+k}, k = 1..lead_last
    w = np.zeros(n)
    for h in leads:
        w[:h] += psi[:h][::-1]
    w /= m
    return float(np.mean([fc[h - 1] for h in leads])), float(sigma2 * np.sum(w**2))


# ---------------------------------------------------------------- three intervals


@dataclass(frozen=True)
class IntervalRow:
    name: str
    h_ulr: int
    raw_ar: tuple
    plug_in: tuple
    minmax: tuple
    flags: tuple = ()

    def __post_init__(self):
        for key in ("raw_ar", "plug_in", "minmax"):
            object.__setattr__(self, key, tuple(float(v) for v in getattr(self, key)))

    def widths(self) -> tuple:
        return tuple(b - a for a, b in (self.raw_ar, self.plug_in, self.minmax))


def horizon_in_blocks(horizon: int, block_len: int) -> int:
    return int(round(horizon / block_len))


def compare_intervals(
    bundle: SeriesBundle,
    filtered: FilteredULR,
    horizon: int = 200,
    alpha: float = 0.05,
    ar_order: int = 1,
    belt: ConfidenceBelt | None = None,
    belt_reps: int = 1000,
    seed: int = 0,
) -> list[IntervalRow]:
    """Three two-sided (1 - alpha) intervals per series for the block average centred ``horizon`` periods ahead."""
    B = filtered.length
    L = filtered.block_len
    h_ulr = horizon_in_blocks(horizon, L)
    if h_ulr < 1:
        raise ValueError("horizon shorter than half a block")
    gamma = h_ulr / B
    if belt is None:
        belt = build_belt(B, reps=belt_reps, seed=seed, n_transitions=B - 1, demean=True)
    half = L // 2
    z = normal_quantile(1 - alpha / 2)
    rows = []
    for j, name in enumerate(bundle.names):
        raw = bundle.values[:, j]
        avg = filtered.averages[:, j]
        flags: list[str] = []
        nan2 = (math.nan, math.nan)
        if np.ptp(raw) == 0 or np.ptp(avg) == 0:
            rows.append(IntervalRow(name, h_ulr, nan2, nan2, nan2, ("degenerate",)))
            continue
        mu = raw.mean()
        coef, s2 = fit_ar(raw - mu, ar_order)
        mean1, var1 = ar_block_forecast(raw - mu, coef, s2, max(1, horizon - half), horizon + half)
        col1 = (mu + mean1 - z * math.sqrt(var1), mu + mean1 + z * math.sqrt(var1))

        m2 = avg.mean()
        x = avg - m2
        rho, var, _ = ar1_mle(x)
        rho = float(rho)
        r = abs(rho)
        if not (0 < r < 1):
            rows.append(IntervalRow(name, h_ulr, col1, nan2, nan2, ("rho_degenerate",)))
            continue
        if rho < 0:
            flags.append("negative_rho")
        theta = -B * math.log(r)
        s_hat = math.sqrt(2 * theta * float(var) / (1 - r * r))
        lo2, hi2 = plug_in_interval(alpha, (theta, 0.0, s_hat), float(x[-1]), gamma, two_sided=True)
        pi = minmax_interval(alpha, belt, rho, (0.0, s_hat), float(x[-1]), gamma, two_sided=True)
        flags.extend(pi.flags)
        rows.append(IntervalRow(name, h_ulr, col1, (m2 + lo2, m2 + hi2), (m2 + pi.lower, m2 + pi.upper), tuple(dict.fromkeys(flags))))
    return rows


# ---------------------------------------------------------------- end to end


@dataclass
class ApplyResult:
    bundle: SeriesBundle
    filtered: FilteredULR
    fits: list
    intervals: list
    files: dict = field(default_factory=dict)


def _csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def apply_pipeline(
    input_path,
    out_dir,
    block_len: int = 11,
    horizon: int = 200,
    alpha: float = 0.05,
    ar_order: int = 1,
    belt_reps: int = 1000,
    seed: int = 0,
) -> ApplyResult:
    """Ingest, filter, fit and write table1.csv, table2.csv, filtered.csv and run.log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ingest_csv(input_path)
    filtered = block_filter(bundle, block_len)
    fits = fit_block_ar1(filtered)
    intervals = compare_intervals(bundle, filtered, horizon, alpha, ar_order, belt_reps=belt_reps, seed=seed)
    files = {
        "filtered": _csv(
            out / "filtered.csv",
            ["block", "center_date"] + list(filtered.names),
            [[b + 1, bundle.dates[int(filtered.centers[b])], *filtered.averages[b]] for b in range(filtered.length)],
        ),
        "table1": _csv(
            out / "table1.csv",
            ["series", "rho_block", "rho_period", "negative", "flags"],
            [[f.name, f.rho_ulr, f.rho_period, int(f.negative), ";".join(f.flags)] for f in fits],
        ),
        "table2": _csv(
            out / "table2.csv",
            ["series", "horizon", "horizon_blocks", "raw_lower", "raw_upper", "plugin_lower", "plugin_upper", "minmax_lower", "minmax_upper", "flags"],
            [[r.name, horizon, r.h_ulr, *r.raw_ar, *r.plug_in, *r.minmax, ";".join(r.flags)] for r in intervals],
        ),
    }
    logtxt = [
        f"input: {input_path}",
        f"observations: {bundle.T_obs}; series: {', '.join(bundle.names)}",
        f"blocks: {filtered.length} of length {block_len}; dropped trailing observations: {filtered.dropped}",
        f"horizon: {horizon} periods = {horizon / block_len:.3f} blocks, rounded to {horizon_in_blocks(horizon, block_len)}",
        f"alpha: {alpha}; raw AR order: {ar_order}; belt reps: {belt_reps}; seed: {seed}",
    ]
    (out / "run.log").write_text("\n".join(logtxt) + "\n")
    files["log"] = out / "run.log"
    return ApplyResult(bundle, filtered, fits, intervals, files)
