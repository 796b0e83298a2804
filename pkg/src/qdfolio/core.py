"""Domain types shared by every module, plus the elementary portfolio arithmetic.

All returns and volatilities are stored as decimal fractions per year.
Percent inputs are converted on ingestion (see :mod:`qdfolio.estimation`).
Every type here is an immutable value object and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Simplex membership is checked to this absolute tolerance after normalization.
SIMPLEX_ATOL = 1e-9
# Constructors renormalize weight sums deviating by at most this much,
# and reject anything worse.
SIMPLEX_RENORM_TOL = 1e-6


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Portfolio:
    """A point on the long-only weight simplex."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-D vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < -SIMPLEX_ATOL):
            raise ValueError(f"negative weight {w.min():.3e} below tolerance")
        w = np.clip(w, 0.0, None)
        s = float(w.sum())
        if abs(s - 1.0) > SIMPLEX_RENORM_TOL:
            raise ValueError(f"weights sum to {s!r}, not 1 within {SIMPLEX_RENORM_TOL}")
        object.__setattr__(self, "weights", _frozen_array(w / s))

    def __len__(self) -> int:
        return self.weights.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Portfolio) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True, eq=False)
class AssetUniverse:
    """Asset names, sector membership, and market capitalizations.

    ``sector_of[i]`` is the sector index of asset ``i`` in ``[0, n_sectors)``.
    """

    names: tuple
    sector_of: np.ndarray
    market_cap: np.ndarray
    n_sectors: int

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        sec = np.asarray(self.sector_of, dtype=int)
        cap = np.asarray(self.market_cap, dtype=float)
        n = len(names)
        if n < 2:
            raise ValueError("universe needs at least 2 assets")
        if sec.shape != (n,) or cap.shape != (n,):
            raise ValueError("names, sector_of and market_cap must share length")
        if self.n_sectors < 1 or sec.min() < 0 or sec.max() >= self.n_sectors:
            raise ValueError("sector indices must lie in [0, n_sectors)")
        if not np.all(cap > 0):
            raise ValueError("every market cap must be positive")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "sector_of", _frozen_array(sec, dtype=int))
        object.__setattr__(self, "market_cap", _frozen_array(cap))

    @property
    def n_assets(self) -> int:
        return len(self.names)


@dataclass(frozen=True, eq=False)
class Estimates:
    """Expected annual return vector and annual return covariance matrix."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sig = np.asarray(self.sigma, dtype=float)
        n = mu.size
        if mu.ndim != 1 or n < 1:
            raise ValueError("mu must be a 1-D vector")
        if sig.shape != (n, n):
            raise ValueError(f"sigma must be {n}x{n}, got {sig.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sig))):
            raise ValueError("estimates must be finite")
        if np.max(np.abs(sig - sig.T)) > 1e-10:
            raise ValueError("sigma is not symmetric within 1e-10")
        w = np.linalg.eigvalsh(sig)
        if w.min() < -1e-8:
            raise ValueError(f"sigma not PSD: eigenvalue {w.min():.6e}")
        object.__setattr__(self, "mu", _frozen_array(mu))
        object.__setattr__(self, "sigma", _frozen_array(sig))

    @property
    def n_assets(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class RiskReturnPoint:
    """Expected portfolio return and volatility, both decimal per year."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise ValueError("risk-return point must be finite")
        if self.sigma < 0:
            raise ValueError("volatility must be non-negative")


def risk_return(w: Portfolio, est: Estimates) -> RiskReturnPoint:
    """Map a portfolio to its (expected return, volatility) point.

    mu = w'mu_hat, sigma = sqrt(w'S w); the sqrt argument is clamped at zero
    when it is negative by no more than 1e-12 (floating-point noise on PSD
    matrices).
    """
    wv = w.weights
    if wv.size != est.n_assets:
        raise ValueError(f"portfolio has {wv.size} assets, estimates {est.n_assets}")
    mu = float(wv @ est.mu)
    var = float(wv @ est.sigma @ wv)
    if var < 0:
        if var < -1e-12:
            raise ValueError(f"negative portfolio variance {var:.3e}")
        var = 0.0
    return RiskReturnPoint(mu=mu, sigma=float(np.sqrt(var)))


def sharpe(w: Portfolio, est: Estimates, rf: float = 0.0) -> float:
    """Sharpe ratio (mu - rf) / sigma; undefined for zero-volatility portfolios."""
    rr = risk_return(w, est)
    if rr.sigma <= 0.0:
        raise ValueError("Sharpe ratio undefined for zero-volatility portfolio")
    return (rr.mu - rf) / rr.sigma
