"""Moment estimation: sample moments, shrinkage covariance, CAPM expected returns.

Inputs are daily simple returns; outputs are annualized by a linear scaling
(default 252 trading days per year) for both means and covariances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .core import AssetUniverse, Estimates, _frozen_array

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True, eq=False)
class ReturnsWindow:
    """A T x N matrix of daily simple returns with strictly increasing dates."""

    dates: tuple
    returns: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        dates = tuple(str(d) for d in self.dates)
        if r.ndim != 2:
            raise ValueError("returns must be a T x N matrix")
        t, n = r.shape
        if t < 2 or n < 2:
            raise ValueError(f"need T >= 2 and N >= 2, got T={t}, N={n}")
        if len(dates) != t:
            raise ValueError("dates and returns disagree on T")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns contain missing or non-finite entries")
        if any(a >= b for a, b in zip(dates, dates[1:])):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", _frozen_array(r))

    @property
    def n_days(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def tail(self, t: int) -> "ReturnsWindow":
        """Trailing window of the last ``t`` rows."""
        if t > self.n_days:
            raise ValueError(f"requested {t} rows, only {self.n_days} available")
        return ReturnsWindow(dates=self.dates[-t:], returns=self.returns[-t:])


def estimates_from_moments(means_pct, stds_pct, corr) -> Estimates:
    """Build Estimates from annual percent means/stds and a correlation matrix.

    Percentages are converted to decimals: mu_i = means_i / 100 and
    sigma_ij = corr_ij * std_i * std_j / 1e4.
    """
    means = np.asarray(means_pct, dtype=float)
    stds = np.asarray(stds_pct, dtype=float)
    corr = np.asarray(corr, dtype=float)
    n = means.size
    if stds.shape != (n,) or corr.shape != (n, n):
        raise ValueError("means, stds and corr disagree on dimension")
    if np.max(np.abs(corr - corr.T)) > 1e-10:
        raise ValueError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(corr) - 1.0)) > 1e-12:
        raise ValueError("correlation matrix must have unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ValueError("correlation entries must lie in [-1, 1]")
    sigma = corr * np.outer(stds, stds) / 1e4
    sigma = 0.5 * (sigma + sigma.T)
    lo = float(np.linalg.eigvalsh(sigma).min())
    if lo < -1e-8:
        raise ValueError(f"moments imply a non-PSD covariance: eigenvalue {lo:.6e}")
    return Estimates(mu=means / 100.0, sigma=sigma)


def sample_estimates(win: ReturnsWindow, trading_days_per_year: int = TRADING_DAYS_PER_YEAR) -> Estimates:
    """Annualized sample mean vector and sample covariance (denominator T-1)."""
    r = win.returns
    mu = r.mean(axis=0) * trading_days_per_year
    cov = np.cov(r, rowvar=False, ddof=1) * trading_days_per_year
    cov = 0.5 * (cov + cov.T)
    # Guard against tiny negative eigenvalues from round-off.
    lo = float(np.linalg.eigvalsh(cov).min())
    if -1e-8 < lo < 0:
        cov = cov + (-lo + 1e-15) * np.eye(cov.shape[0])
    return Estimates(mu=mu, sigma=cov)


def ledoit_wolf_cov(
    win: ReturnsWindow,
    trading_days_per_year: int = TRADING_DAYS_PER_YEAR,
    return_intensity: bool = False,
):
    """Shrink the sample covariance toward the average-variance identity target.

    Returns (1 - delta) * S + delta * vbar * I, annualized, where S is the
    sample covariance (denominator T-1), vbar the mean sample variance, and
    delta the estimated optimal shrinkage intensity clamped to [0, 1].
    """
    r = win.returns
    t, n = r.shape
    x = r - r.mean(axis=0)
    s = (x.T @ x) / (t - 1)
    s = 0.5 * (s + s.T)
    vbar = float(np.trace(s)) / n
    target = vbar * np.eye(n)
    d2 = float(np.sum((s - target) ** 2))
    if d2 <= 0.0:
        delta = 0.0
    else:
        # Average squared Frobenius distance between per-day outer products
        # and the sample covariance, scaled by 1/T.
        x2 = x**2
        b2 = (float(np.sum(x2.T @ x2)) / t - float(np.sum(s * s))) / t
        delta = min(1.0, max(0.0, b2 / d2))
    shrunk = (1.0 - delta) * s + delta * target
    shrunk = 0.5 * (shrunk + shrunk.T) * trading_days_per_year
    if return_intensity:
        return shrunk, delta
    return shrunk


def capm_expected_returns(
    win: ReturnsWindow,
    market: np.ndarray,
    rf: float = 0.0,
    trading_days_per_year: int = TRADING_DAYS_PER_YEAR,
) -> np.ndarray:
    """Per-asset expected annual returns from single-factor market betas.

    beta_i = cov(asset_i, market) / var(market), then
    mu_i = rf + beta_i * (annualized market mean - rf).
    """
    m = np.asarray(market, dtype=float)
    if m.shape != (win.n_days,):
        raise ValueError("market series must align with the returns window")
    mc = m - m.mean()
    var_m = float(mc @ mc) / (win.n_days - 1)
    if var_m <= 0.0:
        raise ValueError("market series has zero variance")
    x = win.returns - win.returns.mean(axis=0)
    beta = (x.T @ mc) / (win.n_days - 1) / var_m
    mu_market = float(m.mean()) * trading_days_per_year
    return rf + beta * (mu_market - rf)


def market_series(win: ReturnsWindow, universe: AssetUniverse | None = None, mode: str = "equal") -> np.ndarray:
    """Market proxy: equal- or cap-weighted average of the universe's returns."""
    if mode == "equal":
        return win.returns.mean(axis=1)
    if mode == "cap":
        if universe is None:
            raise ValueError("cap-weighted market proxy needs a universe")
        w = universe.market_cap / universe.market_cap.sum()
        return win.returns @ w
    raise ValueError(f"unknown market proxy mode {mode!r}")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def load_returns_csv(path) -> tuple[ReturnsWindow, list[str]]:
    """Read a `date,<asset1>,...,<assetN>` CSV of daily simple returns."""
    df = pd.read_csv(path)
    if df.shape[1] < 3 or df.columns[0] != "date":
        raise ValueError(f"{path}: expected header 'date,<asset1>,...,<assetN>'")
    names = list(df.columns[1:])
    if df.isna().any().any():
        raise ValueError(f"{path}: missing entries are not supported")
    win = ReturnsWindow(dates=tuple(str(d) for d in df["date"]), returns=df[names].to_numpy(dtype=float))
    return win, names


def save_returns_csv(path, win: ReturnsWindow, names) -> None:
    df = pd.DataFrame(win.returns, columns=list(names))
    df.insert(0, "date", list(win.dates))
    df.to_csv(path, index=False)


def load_metadata_csv(path) -> AssetUniverse:
    """Read an `asset,sector,market_cap` CSV; sector indices follow first appearance."""
    df = pd.read_csv(path)
    for col in ("asset", "sector", "market_cap"):
        if col not in df.columns:
            raise ValueError(f"{path}: missing column {col!r}")
    sectors: dict[str, int] = {}
    idx = []
    for s in df["sector"].astype(str):
        if s not in sectors:
            sectors[s] = len(sectors)
        idx.append(sectors[s])
    return AssetUniverse(
        names=list(df["asset"].astype(str)),
        sector_of=np.array(idx, dtype=int),
        market_cap=df["market_cap"].to_numpy(dtype=float),
        n_sectors=len(sectors),
    )


def save_metadata_csv(path, universe: AssetUniverse, sector_names=None) -> None:
    if sector_names is None:
        sector_names = [f"S{i:02d}" for i in range(universe.n_sectors)]
    df = pd.DataFrame(
        {
            "asset": list(universe.names),
            "sector": [sector_names[i] for i in universe.sector_of],
            "market_cap": universe.market_cap,
        }
    )
    df.to_csv(path, index=False)
