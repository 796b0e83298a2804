"""Investor-facing selection from the archive, plus the synthetic universe
generator used when no real dataset is available."""

from __future__ import annotations

import numpy as np

from .behavior import BehaviorDescriptor, niche_index
from .core import AssetUniverse, Portfolio
from .engine import Archive, EliteRecord
from .estimation import ReturnsWindow


class NoNearOptimalError(RuntimeError):
    pass


def select_portfolio(a: Archive, preferred_bd: BehaviorDescriptor) -> tuple[Portfolio, int]:
    """Pick the elite nearest (in niche space) to the investor's preferred descriptor.

    If the preferred descriptor's own niche holds a near-optimal elite it is
    returned directly; otherwise the near-optimal elite whose niche centroid
    is Euclidean-closest to that niche's centroid wins (ties to the lowest
    niche index).
    """
    candidates = np.flatnonzero(a.occupied & a.near_optimal)
    if candidates.size == 0:
        raise NoNearOptimalError(
            "archive holds no near-optimal portfolio; loosen the threshold c or extend the evaluation budget"
        )
    nb = niche_index(preferred_bd, a.partition)
    if a.occupied[nb] and a.near_optimal[nb]:
        return a.record(nb).w, nb
    anchor = a.partition.centroids[nb]
    d = np.sum((a.partition.centroids[candidates] - anchor) ** 2, axis=1)
    chosen = int(candidates[np.argmin(d)])
    return a.record(chosen).w, chosen


# Daily volatilities of the synthetic sector-factor return model. The drift
# is kept well above the market factor's sampling noise so that realized
# market means stay positive on every multi-year trailing window; CAPM-based
# expected returns then stay positive too, keeping Sharpe maximization
# well-posed on generated datasets.
SYNTH_MARKET_VOL = 0.006
SYNTH_SECTOR_VOL = 0.006
SYNTH_IDIO_VOL = 0.012
SYNTH_MARKET_DRIFT = 0.0008


def generate_synthetic_universe(
    n_assets: int,
    n_sectors: int,
    t_days: int,
    seed: int,
) -> tuple[ReturnsWindow, AssetUniverse]:
    """Sector-factor daily returns plus log-normally distributed market caps.

    Each asset's return is beta * market factor + its sector's factor +
    idiosyncratic noise; sectors are assigned round-robin so none is empty.
    Fully deterministic per seed.
    """
    if not (n_assets >= n_sectors >= 1):
        raise ValueError("need n_assets >= n_sectors >= 1")
    if t_days < 2:
        raise ValueError("need at least 2 days")
    rng = np.random.default_rng(seed)
    sector_of = np.arange(n_assets) % n_sectors
    beta = rng.uniform(0.6, 1.4, size=n_assets)
    market = rng.normal(SYNTH_MARKET_DRIFT, SYNTH_MARKET_VOL, size=t_days)
    sector = rng.normal(0.0, SYNTH_SECTOR_VOL, size=(t_days, n_sectors))
    idio = rng.normal(0.0, SYNTH_IDIO_VOL, size=(t_days, n_assets))
    returns = market[:, None] * beta[None, :] + sector[:, sector_of] + idio
    caps = rng.lognormal(mean=np.log(1e10), sigma=1.2, size=n_assets)
    dates = _weekday_dates(t_days)
    universe = AssetUniverse(
        names=[f"SYN{i:03d}" for i in range(n_assets)],
        sector_of=sector_of,
        market_cap=caps,
        n_sectors=n_sectors,
    )
    return ReturnsWindow(dates=dates, returns=returns), universe


def _weekday_dates(t_days: int) -> tuple:
    import datetime as dt

    out = []
    d = dt.date(2020, 1, 2)
    while len(out) < t_days:
        if d.weekday() < 5:
            out.append(d.isoformat())
        d += dt.timedelta(days=1)
    return tuple(out)
