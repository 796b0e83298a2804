"""Quality-diversity search for diverse near-optimal mean-variance portfolios."""

from .behavior import (
    BehaviorDescriptor,
    CvtPartition,
    behavior_b1,
    behavior_b2,
    build_cvt,
    niche_index,
)
from .core import (
    AssetUniverse,
    Estimates,
    Portfolio,
    RiskReturnPoint,
    risk_return,
    sharpe,
)
from .engine import (
    Archive,
    EliteRecord,
    QdConfig,
    fitness1,
    fitness2,
    in_region,
    recombine,
    run_qd,
)
from .estimation import (
    ReturnsWindow,
    capm_expected_returns,
    estimates_from_moments,
    ledoit_wolf_cov,
    sample_estimates,
)
from .mv import (
    ConvergenceError,
    FrontierPoint,
    efficient_frontier,
    fit_gamma,
    max_sharpe,
    solve_mv,
)
from .selection import generate_synthetic_universe, select_portfolio

__version__ = "0.1.0"

__all__ = [
    "AssetUniverse",
    "Archive",
    "BehaviorDescriptor",
    "ConvergenceError",
    "CvtPartition",
    "EliteRecord",
    "Estimates",
    "FrontierPoint",
    "Portfolio",
    "QdConfig",
    "ReturnsWindow",
    "RiskReturnPoint",
    "behavior_b1",
    "behavior_b2",
    "build_cvt",
    "capm_expected_returns",
    "efficient_frontier",
    "estimates_from_moments",
    "fit_gamma",
    "fitness1",
    "fitness2",
    "generate_synthetic_universe",
    "in_region",
    "ledoit_wolf_cov",
    "max_sharpe",
    "niche_index",
    "recombine",
    "risk_return",
    "run_qd",
    "sample_estimates",
    "select_portfolio",
    "sharpe",
    "solve_mv",
]
