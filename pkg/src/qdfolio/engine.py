"""The CVT-MAP-Elites loop: recombination, fitness, archive updates.

Candidates are generated and evaluated in generations of ``batch_size``;
archive commits are applied sequentially in candidate order within each
generation, so a run is fully deterministic for a fixed (seed, batch_size).
``batch_size=1`` reproduces the one-candidate-at-a-time reference behavior.

RNG consumption order per generation: parent slot indices, then the convex
weights lambda, then the mutation offsets delta. The CVT is built from a
generator seeded by [seed, 0]; the loop uses [seed, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .behavior import (
    BehaviorDescriptor,
    CvtPartition,
    build_cvt,
    descriptor_matrix,
    niche_indices,
    sample_simplex,
)
from .core import AssetUniverse, Estimates, Portfolio, RiskReturnPoint, risk_return

SNAPSHOT_EVERY = 10_000
RESAMPLE_ATTEMPTS = 16


@dataclass(frozen=True)
class QdConfig:
    """Run parameters for a single CVT-MAP-Elites search."""

    M: int
    n_max: int
    n_cvt: int
    p_init: float = 0.1
    m: float = 0.05
    c: float = 0.1
    fitness: str = "F2"
    behavior: str = "B1"
    seed: int = 0
    rf: float = 0.0
    batch_size: int = 64

    def __post_init__(self):
        if self.M < 1 or self.n_max < 1 or self.n_cvt < self.M:
            raise ValueError("need n_cvt >= M >= 1 and n_max >= 1")
        if not (0.0 < self.p_init <= 1.0):
            raise ValueError("p_init must lie in (0, 1]")
        if self.m < 0:
            raise ValueError("mutation rate must be non-negative")
        if not (0.0 < self.c < 1.0):
            raise ValueError("near-optimality constant must lie in (0, 1)")
        if self.fitness not in ("F1", "F2"):
            raise ValueError(f"unknown fitness {self.fitness!r}")
        if self.behavior not in ("B1", "B2"):
            raise ValueError(f"unknown behavior {self.behavior!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "n_max": self.n_max,
            "n_cvt": self.n_cvt,
            "p_init": self.p_init,
            "m": self.m,
            "c": self.c,
            "fitness": self.fitness,
            "behavior": self.behavior,
            "seed": self.seed,
            "rf": self.rf,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QdConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        return cls(**known)


@dataclass(frozen=True)
class EliteRecord:
    w: Portfolio
    bd: BehaviorDescriptor
    fitness: float
    rr: RiskReturnPoint
    near_optimal: bool


@dataclass
class Snapshot:
    eval_count: int
    coverage_mod: float
    qd_score1: float
    qd_score_mod: float


class Archive:
    """One elite per occupied CVT niche, stored column-wise for speed."""

    def __init__(self, partition: CvtPartition, n_assets: int, w0: Portfolio, rr0: RiskReturnPoint, config: QdConfig):
        m = partition.n_niches
        self.partition = partition
        self.config = config
        self.w0 = w0
        self.rr0 = rr0
        self.eval_count = 0
        self.occupied = np.zeros(m, dtype=bool)
        self.weights = np.zeros((m, n_assets))
        self.fitness = np.full(m, -np.inf)
        self.bd = np.zeros((m, partition.dim))
        self.mu = np.zeros(m)
        self.sigma = np.zeros(m)
        self.near_optimal = np.zeros(m, dtype=bool)
        self.snapshots: list[Snapshot] = []
        self.audit_log: list[tuple[int, float, float]] | None = None

    @property
    def n_niches(self) -> int:
        return self.partition.n_niches

    def occupied_indices(self) -> np.ndarray:
        return np.flatnonzero(self.occupied)

    def record(self, niche: int) -> EliteRecord:
        if not self.occupied[niche]:
            raise KeyError(f"niche {niche} is empty")
        return EliteRecord(
            w=Portfolio(weights=self.weights[niche]),
            bd=BehaviorDescriptor(values=self.bd[niche]),
            fitness=float(self.fitness[niche]),
            rr=RiskReturnPoint(mu=float(self.mu[niche]), sigma=float(self.sigma[niche])),
            near_optimal=bool(self.near_optimal[niche]),
        )

    def records(self) -> list[tuple[int, EliteRecord]]:
        return [(int(i), self.record(int(i))) for i in self.occupied_indices()]

    def _insert(self, niche: int, w, bd, fit: float, mu: float, sigma: float, near: bool) -> bool:
        if self.occupied[niche] and fit <= self.fitness[niche]:
            return False
        if self.audit_log is not None and self.occupied[niche]:
            self.audit_log.append((niche, float(self.fitness[niche]), fit))
        self.occupied[niche] = True
        self.weights[niche] = w
        self.bd[niche] = bd
        self.fitness[niche] = fit
        self.mu[niche] = mu
        self.sigma[niche] = sigma
        self.near_optimal[niche] = near
        return True


def recombine(w1: Portfolio, w2: Portfolio, m: float, rng: np.random.Generator) -> Portfolio:
    """Blend two parents, mutate, clip to [0, 1] and renormalize.

    child = clip(lambda*w1 + (1-lambda)*w2 + delta, 0, 1) / sum, with
    lambda ~ U[0, 1] and delta ~ U[-m, m]^N. If clipping zeroes the whole
    vector, fresh (lambda, delta) are drawn up to 16 times before falling
    back to the uniform portfolio.
    """
    if len(w1) != len(w2):
        raise ValueError("parents must have the same length")
    if m < 0:
        raise ValueError("mutation rate must be non-negative")
    n = len(w1)
    for _ in range(RESAMPLE_ATTEMPTS):
        lam = rng.uniform()
        delta = rng.uniform(-m, m, size=n)
        child = np.clip(lam * w1.weights + (1.0 - lam) * w2.weights + delta, 0.0, 1.0)
        s = child.sum()
        if s > 0:
            return Portfolio(weights=child / s)
    return Portfolio(weights=np.full(n, 1.0 / n))


def _recombine_batch(W1: np.ndarray, W2: np.ndarray, m: float, rng: np.random.Generator) -> np.ndarray:
    """Vectorized recombination over paired parent rows."""
    b, n = W1.shape
    lam = rng.uniform(size=(b, 1))
    delta = rng.uniform(-m, m, size=(b, n))
    child = np.clip(lam * W1 + (1.0 - lam) * W2 + delta, 0.0, 1.0)
    s = child.sum(axis=1)
    dead = np.flatnonzero(s == 0)
    for i in dead:
        for _ in range(RESAMPLE_ATTEMPTS):
            l2 = rng.uniform()
            d2 = rng.uniform(-m, m, size=n)
            child[i] = np.clip(l2 * W1[i] + (1.0 - l2) * W2[i] + d2, 0.0, 1.0)
            s[i] = child[i].sum()
            if s[i] > 0:
                break
        else:
            child[i] = 1.0 / n
            s[i] = 1.0
    return child / s[:, None]


def in_region(rr: RiskReturnPoint, rr0: RiskReturnPoint, c: float) -> bool:
    """Near-optimality region membership: mu >= (1-c)mu0 and sigma <= (1+c)sigma0."""
    if not (0.0 < c < 1.0):
        raise ValueError("c must lie in (0, 1)")
    return rr.mu >= (1.0 - c) * rr0.mu and rr.sigma <= (1.0 + c) * rr0.sigma


def fitness1(w: Portfolio, w0: Portfolio, est: Estimates) -> float:
    """Negative Euclidean distance between the risk profiles of w and w0."""
    rr = risk_return(w, est)
    rr0 = risk_return(w0, est)
    return -float(np.hypot(rr0.mu - rr.mu, rr0.sigma - rr.sigma))


def fitness2(w: Portfolio, w0: Portfolio, est: Estimates, c: float) -> float:
    """Weight-space distance from w0 when near-optimal, fitness1 otherwise."""
    rr = risk_return(w, est)
    rr0 = risk_return(w0, est)
    if in_region(rr, rr0, c):
        return float(np.linalg.norm(w.weights - w0.weights))
    return -float(np.hypot(rr0.mu - rr.mu, rr0.sigma - rr.sigma))


class _Evaluator:
    """Batch evaluation of candidates: risk-return, fitness, niche index."""

    def __init__(self, cfg: QdConfig, est: Estimates, universe: AssetUniverse | None, w0: Portfolio, partition: CvtPartition):
        self.cfg = cfg
        self.est = est
        self.universe = universe
        self.partition = partition
        self.w0 = w0.weights
        rr0 = risk_return(w0, est)
        self.mu0, self.sigma0 = rr0.mu, rr0.sigma
        self.mu_lo = (1.0 - cfg.c) * rr0.mu
        self.sigma_hi = (1.0 + cfg.c) * rr0.sigma

    def __call__(self, W: np.ndarray):
        est = self.est
        mu = W @ est.mu
        var = np.einsum("bi,bi->b", W @ est.sigma, W)
        sigma = np.sqrt(np.clip(var, 0.0, None))
        near = (mu >= self.mu_lo) & (sigma <= self.sigma_hi)
        dist = np.hypot(self.mu0 - mu, self.sigma0 - sigma)
        if self.cfg.fitness == "F1":
            fit = -dist
        else:
            fit = np.where(near, np.linalg.norm(W - self.w0, axis=1), -dist)
        bd = descriptor_matrix(W, self.cfg.behavior, self.universe)
        niches = niche_indices(bd, self.partition)
        return fit, niches, bd, mu, sigma, near


def run_qd(
    cfg: QdConfig,
    est: Estimates,
    universe: AssetUniverse | None,
    w0: Portfolio,
    snapshot_every: int | None = SNAPSHOT_EVERY,
    audit: bool = False,
    partition: CvtPartition | None = None,
) -> Archive:
    """Run CVT-MAP-Elites and return the final archive with eval_count == n_max.

    Phases: (a) build the CVT from fresh samples; (b) place uniform random
    portfolios until ceil(p_init * M) niches are occupied, every placement
    counting toward the budget; (c) recombine uniformly chosen occupied
    elites until the budget is spent, inserting children that land in empty
    niches or strictly beat the incumbent.
    """
    n = est.n_assets
    if len(w0) != n:
        raise ValueError("reference portfolio and estimates disagree on dimension")
    if cfg.behavior == "B2" and universe is None:
        raise ValueError("behavior B2 needs an asset universe")
    if partition is None:
        partition = build_cvt(
            cfg.M,
            cfg.n_cvt,
            seed=np.random.SeedSequence([cfg.seed, 0]),
            behavior=cfg.behavior,
            n_assets=n,
            universe=universe,
        )
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    archive = Archive(partition, n, w0, risk_return(w0, est), cfg)
    if audit:
        archive.audit_log = []
    evaluate = _Evaluator(cfg, est, universe, w0, partition)
    next_snapshot = snapshot_every if snapshot_every else None

    def maybe_snapshot():
        nonlocal next_snapshot
        if next_snapshot is None:
            return
        while archive.eval_count >= next_snapshot:
            archive.snapshots.append(_take_snapshot(archive))
            next_snapshot += snapshot_every

    # Phase (b): random initialization.
    need = int(np.ceil(cfg.p_init * cfg.M))
    while int(archive.occupied.sum()) < need:
        if archive.eval_count >= cfg.n_max:
            frac = archive.occupied.sum() / cfg.M
            raise RuntimeError(
                f"evaluation budget exhausted during initialization: {frac:.1%} of niches filled, {cfg.p_init:.1%} required"
            )
        b = min(cfg.batch_size, cfg.n_max - archive.eval_count)
        W = sample_simplex(rng, b, n)
        fit, niches, bd, mu, sg, near = evaluate(W)
        for j in range(b):
            archive._insert(int(niches[j]), W[j], bd[j], float(fit[j]), float(mu[j]), float(sg[j]), bool(near[j]))
            archive.eval_count += 1
            maybe_snapshot()
            if int(archive.occupied.sum()) >= need:
                break

    # Phase (c): recombination until the budget is spent.
    while archive.eval_count < cfg.n_max:
        b = min(cfg.batch_size, cfg.n_max - archive.eval_count)
        occ = archive.occupied_indices()
        parents = occ[rng.integers(0, occ.size, size=(b, 2))]
        W = _recombine_batch(archive.weights[parents[:, 0]], archive.weights[parents[:, 1]], cfg.m, rng)
        fit, niches, bd, mu, sg, near = evaluate(W)
        for j in range(b):
            archive._insert(int(niches[j]), W[j], bd[j], float(fit[j]), float(mu[j]), float(sg[j]), bool(near[j]))
            archive.eval_count += 1
            maybe_snapshot()
    return archive


def _take_snapshot(archive: Archive) -> Snapshot:
    occ = archive.occupied
    n_occ = int(occ.sum())
    coverage = float(archive.near_optimal[occ].sum()) / archive.n_niches
    if n_occ == 0:
        return Snapshot(archive.eval_count, coverage, 0.0, 0.0)
    f = archive.fitness[occ]
    lo, hi = float(f.min()), float(f.max())
    if hi > lo:
        norm = (f - lo) / (hi - lo)
    else:
        norm = np.ones_like(f)
    qd1 = float(norm.sum())
    qdmod = float(norm[archive.near_optimal[occ]].sum())
    return Snapshot(archive.eval_count, coverage, qd1, qdmod)
