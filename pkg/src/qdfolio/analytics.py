"""Archive evaluation: coverage, QD-scores, archive profiles, hull surfaces,
Sharpe statistics, and the re-estimation robustness sweep."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .core import AssetUniverse, Estimates, Portfolio
from .engine import Archive, EliteRecord
from .estimation import (
    ReturnsWindow,
    capm_expected_returns,
    ledoit_wolf_cov,
    market_series,
    sample_estimates,
)

N_PROFILE_THRESHOLDS = 100


@dataclass(frozen=True)
class EstimatorSettings:
    """How to re-estimate moments during the robustness sweep."""

    mean_method: str = "sample"  # "sample" | "capm"
    cov_method: str = "sample"  # "sample" | "ledoit-wolf"
    rf: float = 0.0
    trading_days_per_year: int = 252
    market_mode: str = "equal"  # "equal" | "cap"

    def estimate(self, win: ReturnsWindow, universe: AssetUniverse | None = None) -> Estimates:
        base = sample_estimates(win, self.trading_days_per_year)
        if self.cov_method == "ledoit-wolf":
            sigma = ledoit_wolf_cov(win, self.trading_days_per_year)
        elif self.cov_method == "sample":
            sigma = base.sigma
        else:
            raise ValueError(f"unknown covariance method {self.cov_method!r}")
        if self.mean_method == "capm":
            mkt = market_series(win, universe, self.market_mode)
            mu = capm_expected_returns(win, mkt, self.rf, self.trading_days_per_year)
        elif self.mean_method == "sample":
            mu = base.mu
        else:
            raise ValueError(f"unknown mean method {self.mean_method!r}")
        return Estimates(mu=mu, sigma=sigma)


@dataclass
class MetricsReport:
    coverage_mod: float
    qd_score1: float
    qd_score_mod: float
    ap1: list[tuple[float, float]]
    ap2: list[tuple[float, float]]
    ap1_counts: list[tuple[float, int]]
    ap2_counts: list[tuple[float, int]]
    sharpe_mean: float
    sharpe_std: float
    hull_area_weights: float | None = None
    hull_area_rr: float | None = None

    def to_dict(self) -> dict:
        return {
            "coverage_mod": self.coverage_mod,
            "qd_score1": self.qd_score1,
            "qd_score_mod": self.qd_score_mod,
            "ap1": [list(t) for t in self.ap1],
            "ap2": [list(t) for t in self.ap2],
            "ap1_counts": [list(t) for t in self.ap1_counts],
            "ap2_counts": [list(t) for t in self.ap2_counts],
            "sharpe_mean": self.sharpe_mean,
            "sharpe_std": self.sharpe_std,
            "hull_area_weights": self.hull_area_weights,
            "hull_area_rr": self.hull_area_rr,
        }

    def save_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def save_tidy_csv(self, path) -> None:
        """Plot-ready long format: metric,param,value."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["metric", "param", "value"])
            w.writerow(["coverage_mod", "", self.coverage_mod])
            w.writerow(["qd_score1", "", self.qd_score1])
            w.writerow(["qd_score_mod", "", self.qd_score_mod])
            w.writerow(["sharpe_mean", "", self.sharpe_mean])
            w.writerow(["sharpe_std", "", self.sharpe_std])
            if self.hull_area_weights is not None:
                w.writerow(["hull_area_weights", "", self.hull_area_weights])
            if self.hull_area_rr is not None:
                w.writerow(["hull_area_rr", "", self.hull_area_rr])
            for t, p in self.ap1:
                w.writerow(["ap1", t, p])
            for t, p in self.ap2:
                w.writerow(["ap2", t, p])


def modified_coverage(a: Archive) -> float:
    """Fraction of niches holding a near-optimal elite."""
    return float(a.near_optimal[a.occupied].sum()) / a.n_niches


def qd_scores(a: Archive) -> tuple[float, float]:
    """(sum of min-max-normalized fitness over all elites, over near-optimal elites).

    Normalization constants are the min and max fitness over the full set of
    occupied niches for both scores. A degenerate archive (all fitness equal)
    scores 1 per elite.
    """
    occ = a.occupied_indices()
    if occ.size == 0:
        raise ValueError("archive is empty")
    f = a.fitness[occ]
    lo, hi = float(f.min()), float(f.max())
    norm = (f - lo) / (hi - lo) if hi > lo else np.ones_like(f)
    return float(norm.sum()), float(norm[a.near_optimal[occ]].sum())


def archive_profiles(a: Archive, thresholds=None):
    """Proportion (and count) of elites with fitness >= threshold.

    AP1 covers the non-near-optimal elites, AP2 the near-optimal ones; each
    proportion divides by its own subset size (at least 1). Default
    thresholds: 100 even steps across each subset's fitness range.
    """
    occ = a.occupied_indices()
    near = a.near_optimal[occ]
    f_non = a.fitness[occ][~near]
    f_opt = a.fitness[occ][near]

    def curve(vals, ts):
        denom = max(1, vals.size)
        counts = [(float(t), int(np.sum(vals >= t))) for t in ts]
        props = [(t, c / denom) for t, c in counts]
        return props, counts

    def default_ts(vals):
        if vals.size == 0:
            return np.array([0.0])
        lo, hi = float(vals.min()), float(vals.max())
        return np.linspace(lo, hi, N_PROFILE_THRESHOLDS)

    if thresholds is not None:
        ts = np.asarray(thresholds, dtype=float)
        if np.any(np.diff(ts) < 0):
            raise ValueError("thresholds must be ascending")
        ts1 = ts2 = ts
    else:
        ts1, ts2 = default_ts(f_non), default_ts(f_opt)
    ap1, ap1_counts = curve(f_non, ts1)
    ap2, ap2_counts = curve(f_opt, ts2)
    return ap1, ap2, ap1_counts, ap2_counts


# ---------------------------------------------------------------------------
# Convex hull surfaces
# ---------------------------------------------------------------------------


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Hull vertices in counterclockwise order via the monotone chain."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] < 3:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-1] - out[-2], p - out[-2]
                if a[0] * b[1] - a[1] * b[0] > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def hull_area_2d(points) -> float:
    """Area of the convex hull of 2-D points (shoelace over the monotone chain)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an n x 2 point array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    hull = convex_hull_2d(pts)
    if hull.shape[0] < 3:
        return 0.0
    x, y = hull[:, 0], hull[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def project_simplex_3d(weights: np.ndarray) -> np.ndarray:
    """Drop the redundant third coordinate of 3-asset weight vectors.

    The budget constraint makes the weights coplanar, so the hull in the
    (w1, w2) coordinate plane is a faithful picture of the weight-space
    hull; by symmetry of the plane normal (1, 1, 1), the measured area is
    independent of which coordinate is dropped (always 1/sqrt(3) of the
    intrinsic in-plane area).
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    if w.shape[1] != 3:
        raise ValueError("projection is defined for 3-asset portfolios only")
    return w[:, :2]


def weight_hull_area_3assets(portfolios) -> float:
    """Hull area of 3-asset portfolios in (w1, w2) projection coordinates."""
    w = np.array([p.weights if isinstance(p, Portfolio) else p for p in portfolios], dtype=float)
    if w.size == 0:
        return 0.0
    return hull_area_2d(project_simplex_3d(w))


def rr_hull_area(records: list[EliteRecord]) -> float:
    """Hull area over (sigma, mu) points, in squared decimal units.

    The reporting layer multiplies by 1e3 when displaying.
    """
    if len(records) < 3:
        raise ValueError("need at least 3 records for a risk-return hull")
    pts = np.array([[r.rr.sigma, r.rr.mu] for r in records])
    return hull_area_2d(pts)


def sharpe_stats(records: list[EliteRecord], rf: float = 0.0) -> tuple[float, float]:
    """Mean and (population) standard deviation of per-record Sharpe ratios."""
    if not records:
        raise ValueError("need at least one record")
    s = np.array([(r.rr.mu - rf) / r.rr.sigma for r in records])
    return float(s.mean()), float(s.std())


def compute_metrics(a: Archive, rf: float | None = None, thresholds=None) -> MetricsReport:
    """Full metrics report for one archive.

    Hull surfaces are only computed where defined: the weight hull for
    3-asset universes, the risk-return hull when at least 3 near-optimal
    elites exist. Sharpe statistics cover near-optimal elites.
    """
    if rf is None:
        rf = a.config.rf
    qd1, qdmod = qd_scores(a)
    ap1, ap2, ap1_counts, ap2_counts = archive_profiles(a, thresholds)
    near = [rec for _, rec in a.records() if rec.near_optimal]
    if near:
        sh_mean, sh_std = sharpe_stats(near, rf)
    else:
        sh_mean, sh_std = float("nan"), float("nan")
    hull_w = None
    if a.weights.shape[1] == 3 and near:
        hull_w = weight_hull_area_3assets([r.w for r in near])
    hull_rr = rr_hull_area(near) if len(near) >= 3 else None
    return MetricsReport(
        coverage_mod=modified_coverage(a),
        qd_score1=qd1,
        qd_score_mod=qdmod,
        ap1=ap1,
        ap2=ap2,
        ap1_counts=ap1_counts,
        ap2_counts=ap2_counts,
        sharpe_mean=sh_mean,
        sharpe_std=sh_std,
        hull_area_weights=hull_w,
        hull_area_rr=hull_rr,
    )


def robustness_sweep(
    a: Archive,
    data: ReturnsWindow,
    t_grid,
    c_grid,
    settings: EstimatorSettings,
    universe: AssetUniverse | None = None,
) -> np.ndarray:
    """Coverage of the fixed archive when moments are re-estimated.

    For each window size T (trailing rows of ``data``) and threshold c, the
    reference portfolio's risk-return point is recomputed under the new
    estimates and every archived portfolio's near-optimality is re-checked.
    Returns a len(t_grid) x len(c_grid) coverage matrix; the archive itself
    is never re-optimized.
    """
    t_grid = [int(t) for t in t_grid]
    c_grid = [float(c) for c in c_grid]
    if max(t_grid) > data.n_days:
        raise ValueError(f"window size {max(t_grid)} exceeds available history {data.n_days}")
    occ = a.occupied_indices()
    W = a.weights[occ]
    w0 = a.w0.weights
    out = np.zeros((len(t_grid), len(c_grid)))
    for i, t in enumerate(t_grid):
        est = settings.estimate(data.tail(t), universe)
        mu0 = float(w0 @ est.mu)
        sigma0 = float(np.sqrt(max(0.0, w0 @ est.sigma @ w0)))
        mu = W @ est.mu
        sigma = np.sqrt(np.clip(np.einsum("bi,bi->b", W @ est.sigma, W), 0.0, None))
        for j, c in enumerate(c_grid):
            near = (mu >= (1.0 - c) * mu0) & (sigma <= (1.0 + c) * sigma0)
            out[i, j] = float(near.sum()) / a.n_niches
    return out


def save_sweep_csv(path, coverage: np.ndarray, t_grid, c_grid) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["T"] + [f"c={c}" for c in c_grid])
        for i, t in enumerate(t_grid):
            w.writerow([t] + [repr(float(v)) for v in coverage[i]])
