"""Long-only mean-variance optimization on the weight simplex.

The workhorse is a Frank-Wolfe solver with away steps and exact line search
for quadratics; it is projection-free, respects the simplex exactly, and
certifies optimality through the duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .core import Estimates, Portfolio, RiskReturnPoint, risk_return, sharpe

DEFAULT_TOL = 1e-9
MAX_ITER = 50_000
GAMMA_GRID_LO = 1e-3
GAMMA_GRID_HI = 1e4


class ConvergenceError(RuntimeError):
    """Raised when Frank-Wolfe hits the iteration cap; carries the last gap."""

    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (last duality gap {gap:.3e})")
        self.gap = gap


@dataclass(frozen=True)
class FrontierPoint:
    w: Portfolio
    rr: RiskReturnPoint
    gamma: float


def _fw_simplex_quadratic(Q: np.ndarray, c: np.ndarray, tol: float, max_iter: int = MAX_ITER) -> np.ndarray:
    """Minimize x'Qx - c'x over the simplex by away-step Frank-Wolfe.

    Q must be symmetric PSD. Terminates when the Frank-Wolfe duality gap
    drops to ``tol`` or below, so the objective is within ``tol`` of optimal.
    """
    n = c.size
    x = np.full(n, 1.0 / n)
    gap = np.inf
    for _ in range(max_iter):
        g = 2.0 * (Q @ x) - c
        s = int(np.argmin(g))
        gx = float(g @ x)
        gap = gx - float(g[s])
        if gap <= tol:
            return x
        # Away vertex: worst gradient coordinate in the current support.
        support = np.flatnonzero(x > 0)
        v = int(support[np.argmax(g[support])])
        away_gain = float(g[v]) - gx
        if away_gain > gap and x[v] < 1.0:
            d = x.copy()
            d[v] -= 1.0  # d = x - e_v
            t_max = x[v] / (1.0 - x[v])
            descent = away_gain
        else:
            d = -x.copy()
            d[s] += 1.0  # d = e_s - x
            t_max = 1.0
            descent = gap
        curv = float(d @ Q @ d)
        if curv > 0:
            t = min(t_max, descent / (2.0 * curv))
        else:
            t = t_max
        if t <= 0:
            return x
        x = x + t * d
        # Keep the iterate exactly feasible despite round-off.
        np.clip(x, 0.0, None, out=x)
        x /= x.sum()
    raise ConvergenceError(f"Frank-Wolfe did not converge in {max_iter} iterations", gap)


def solve_mv(gamma: float, est: Estimates, tol: float = DEFAULT_TOL) -> Portfolio:
    """Maximize w'mu - gamma * w'Sw over the simplex, to objective gap ``tol``."""
    if gamma < 0:
        raise ValueError("risk aversion must be non-negative")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    x = _fw_simplex_quadratic(gamma * est.sigma, est.mu, tol)
    return Portfolio(weights=x)


def mv_objective(w: Portfolio, gamma: float, est: Estimates) -> float:
    wv = w.weights
    return float(wv @ est.mu) - gamma * float(wv @ est.sigma @ wv)


def max_sharpe(est: Estimates, rf: float = 0.0, tol: float = DEFAULT_TOL) -> Portfolio:
    """Maximum-Sharpe long-only portfolio.

    When every asset has positive excess return the problem reduces exactly to
    minimizing y'Sy over {y >= 0, a'y = 1} with a = mu - rf, reparametrized to
    the standard simplex. Otherwise that feasible set is unbounded and a
    risk-aversion grid scan with local refinement is used instead.
    """
    a = est.mu - rf
    if np.max(a) <= 0:
        raise ValueError("no asset has expected return above rf; Sharpe maximization undefined")
    if np.all(a > 0):
        d = 1.0 / a
        q = est.sigma * np.outer(d, d)
        x = _fw_simplex_quadratic(q, np.zeros(est.n_assets), tol)
        y = x * d
        cand = Portfolio(weights=y / y.sum())
    else:
        cand = _max_sharpe_grid(est, rf, tol)
    # Vertex portfolios guard degenerate cases (e.g. zero-variance winners).
    best, best_s = cand, _sharpe_or_neg_inf(cand, est, rf)
    for i in np.flatnonzero(a > 0):
        e = np.zeros(est.n_assets)
        e[i] = 1.0
        v = Portfolio(weights=e)
        sv = _sharpe_or_neg_inf(v, est, rf)
        if sv > best_s:
            best, best_s = v, sv
    return best


def _sharpe_or_neg_inf(w: Portfolio, est: Estimates, rf: float) -> float:
    try:
        return sharpe(w, est, rf)
    except ValueError:
        return -np.inf


def _max_sharpe_grid(est: Estimates, rf: float, tol: float, n_grid: int = 200) -> Portfolio:
    gammas = np.geomspace(GAMMA_GRID_LO, GAMMA_GRID_HI, n_grid)
    cands = [(g, solve_mv(g, est, tol)) for g in gammas]
    scored = [(_sharpe_or_neg_inf(w, est, rf), g, w) for g, w in cands]
    s0, g0, w0 = max(scored, key=lambda t: t[0])

    def neg(lg):
        return -_sharpe_or_neg_inf(solve_mv(10.0**lg, est, tol), est, rf)

    lg0 = np.log10(g0)
    res = minimize_scalar(neg, bounds=(lg0 - 0.5, lg0 + 0.5), method="bounded")
    if res.success and -res.fun > s0:
        return solve_mv(10.0**res.x, est, tol)
    return w0


def efficient_frontier(est: Estimates, n_points: int, tol: float = DEFAULT_TOL) -> list[FrontierPoint]:
    """Frontier points from a logarithmic risk-aversion grid, sorted by volatility.

    Dominated points are pruned so expected return is strictly increasing
    along the curve.
    """
    if n_points < 2:
        raise ValueError("need at least 2 frontier points")
    gammas = np.geomspace(GAMMA_GRID_LO, GAMMA_GRID_HI, n_points)
    pts = []
    for g in gammas:
        w = solve_mv(float(g), est, tol)
        pts.append(FrontierPoint(w=w, rr=risk_return(w, est), gamma=float(g)))
    pts.sort(key=lambda p: (p.rr.sigma, p.rr.mu))
    pruned: list[FrontierPoint] = []
    for p in pts:
        if not pruned or p.rr.mu > pruned[-1].rr.mu:
            pruned.append(p)
    return pruned


def fit_gamma(est: Estimates, target: Portfolio, tol: float = DEFAULT_TOL) -> tuple[float, Portfolio]:
    """Scan risk aversion so that solve_mv best matches ``target`` in L-infinity.

    Returns the fitted gamma and its portfolio. Coarse logarithmic scan
    followed by a bounded local refinement.
    """

    def err(lg):
        w = solve_mv(10.0**lg, est, tol)
        return float(np.max(np.abs(w.weights - target.weights)))

    lgs = np.linspace(np.log10(GAMMA_GRID_LO), np.log10(GAMMA_GRID_HI), 141)
    errs = [err(lg) for lg in lgs]
    i = int(np.argmin(errs))
    lo = lgs[max(0, i - 1)]
    hi = lgs[min(len(lgs) - 1, i + 1)]
    res = minimize_scalar(err, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
    lg = float(res.x) if res.success and res.fun <= errs[i] else float(lgs[i])
    gamma = 10.0**lg
    return gamma, solve_mv(gamma, est, tol)
