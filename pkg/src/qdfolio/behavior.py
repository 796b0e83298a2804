"""Behavior descriptors and the centroidal Voronoi tessellation of behavior space.

Two descriptor maps are supported: raw portfolio weights (tag ``B1``) and
sector exposures plus normalized market capitalization (tag ``B2``). Niches
are Voronoi cells of k-means centroids fitted to descriptor samples obtained
from uniformly drawn simplex portfolios.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import AssetUniverse, Portfolio, _frozen_array

KMEANS_SHIFT_TOL = 1e-8
KMEANS_MAX_ITER = 300


def sample_simplex(rng: np.random.Generator, count: int, n_assets: int) -> np.ndarray:
    """Random simplex portfolios: independent U[0,1] coordinates, normalized.

    This is the sampler behind both CVT construction and search
    initialization. It is mildly center-biased relative to the exactly
    uniform Dirichlet(1,...,1) draw; the niche geometry it induces is what
    the reference toy-example results are calibrated against.
    """
    u = rng.uniform(size=(count, n_assets))
    return u / u.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class BehaviorDescriptor:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("descriptor must be a 1-D vector")
        object.__setattr__(self, "values", _frozen_array(v))


@dataclass(frozen=True, eq=False)
class CvtPartition:
    """Fixed k-means centroids partitioning behavior space into Voronoi niches."""

    centroids: np.ndarray
    seed: int
    behavior: str  # "B1" | "B2"

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centroids must be an M x d matrix")
        object.__setattr__(self, "centroids", _frozen_array(c))

    @property
    def n_niches(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "behavior": self.behavior,
            "seed": self.seed,
            "n_niches": self.n_niches,
            "dim": self.dim,
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CvtPartition":
        p = cls(centroids=np.array(d["centroids"], dtype=float), seed=int(d["seed"]), behavior=d["behavior"])
        if p.n_niches != d["n_niches"] or p.dim != d["dim"]:
            raise ValueError("partition dimensions disagree with stored metadata")
        return p

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "CvtPartition":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def behavior_b1(w: Portfolio) -> BehaviorDescriptor:
    """Identity descriptor: the portfolio weights themselves."""
    return BehaviorDescriptor(values=w.weights)


def behavior_b2(w: Portfolio, u: AssetUniverse) -> BehaviorDescriptor:
    """Sector exposures followed by cap-weighted market capitalization.

    Exposure i is the total weight in sector i; the final coordinate is the
    portfolio's cap-weighted average market cap divided by the largest single
    asset cap, so it lies in (0, 1].
    """
    wv = w.weights
    if wv.size != u.n_assets:
        raise ValueError(f"portfolio has {wv.size} assets, universe {u.n_assets}")
    s = np.bincount(u.sector_of, weights=wv, minlength=u.n_sectors)
    c = float(wv @ u.market_cap) / float(u.market_cap.max())
    return BehaviorDescriptor(values=np.concatenate([s, [c]]))


def _b2_matrix(weights: np.ndarray, u: AssetUniverse) -> np.ndarray:
    """Vectorized behavior_b2 over rows of a weight matrix."""
    onehot = np.zeros((u.n_assets, u.n_sectors))
    onehot[np.arange(u.n_assets), u.sector_of] = 1.0
    s = weights @ onehot
    c = weights @ (u.market_cap / u.market_cap.max())
    return np.column_stack([s, c])


def descriptor_matrix(weights: np.ndarray, behavior: str, universe: AssetUniverse | None = None) -> np.ndarray:
    """Descriptors for each row of ``weights`` under the named behavior map."""
    if behavior == "B1":
        return np.asarray(weights, dtype=float)
    if behavior == "B2":
        if universe is None:
            raise ValueError("behavior B2 needs an asset universe")
        return _b2_matrix(np.asarray(weights, dtype=float), universe)
    raise ValueError(f"unknown behavior {behavior!r}")


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = x[rng.integers(n)]
        else:
            r = rng.random() * total
            j = int(np.searchsorted(np.cumsum(d2), r))
            j = min(j, n - 1)
            centers[i] = x[j]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def _assign(x: np.ndarray, centers: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Nearest-center labels, chunked to bound the distance-matrix memory."""
    c2 = np.sum(centers**2, axis=1)
    labels = np.empty(x.shape[0], dtype=np.int64)
    for lo in range(0, x.shape[0], chunk):
        xs = x[lo : lo + chunk]
        d = c2 - 2.0 * (xs @ centers.T)
        labels[lo : lo + chunk] = np.argmin(d, axis=1)
    return labels


def _lloyd(x: np.ndarray, centers: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    k, d = centers.shape
    prev_labels = None
    for _ in range(max_iter):
        labels = _assign(x, centers)
        sums = np.zeros((k, d))
        np.add.at(sums, labels, x)
        counts = np.bincount(labels, minlength=k).astype(float)
        empty = counts == 0
        if np.any(empty):
            # Re-seed empty clusters at the points farthest from their centers.
            dist = np.sum((x - centers[labels]) ** 2, axis=1)
            far = np.argsort(dist)[::-1]
            for i, ci in enumerate(np.flatnonzero(empty)):
                sums[ci] = x[far[i]]
                counts[ci] = 1.0
                labels[far[i]] = ci
        new_centers = sums / counts[:, None]
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < tol or (prev_labels is not None and np.array_equal(labels, prev_labels)):
            break
        prev_labels = labels
    return centers


def build_cvt(
    M: int,
    n_cvt: int,
    seed,
    behavior: str = "B1",
    n_assets: int | None = None,
    universe: "AssetUniverse | None" = None,
    sampler=None,
) -> CvtPartition:
    """Fit a CVT with M niches to n_cvt behavior samples.

    Samples are random simplex portfolios (see :func:`sample_simplex`)
    mapped through the behavior function. ``sampler`` may override the
    portfolio source; it receives (rng, count) and must return a
    count x N weight matrix.
    """
    if not (1 <= M <= n_cvt):
        raise ValueError("need n_cvt >= M >= 1")
    if behavior == "B2":
        if universe is None:
            raise ValueError("behavior B2 needs an asset universe")
        n_assets = universe.n_assets
    if n_assets is None:
        raise ValueError("n_assets (or a universe) is required")
    rng = np.random.default_rng(seed)
    if sampler is None:
        weights = sample_simplex(rng, n_cvt, n_assets)
    else:
        weights = np.asarray(sampler(rng, n_cvt), dtype=float)
    samples = descriptor_matrix(weights, behavior, universe)
    if np.unique(samples, axis=0).shape[0] < M:
        raise ValueError("fewer distinct behavior samples than requested niches")
    centers = _kmeans_pp_init(samples, M, rng)
    centers = _lloyd(samples, centers, KMEANS_SHIFT_TOL, KMEANS_MAX_ITER)
    seed_int = int(seed) if np.isscalar(seed) else -1
    return CvtPartition(centroids=centers, seed=seed_int, behavior=behavior)


def niche_index(bd: BehaviorDescriptor, p: CvtPartition) -> int:
    """Index of the Euclidean-nearest centroid; ties resolve to the lowest index."""
    v = bd.values
    if v.size != p.dim:
        raise ValueError(f"descriptor has dim {v.size}, partition expects {p.dim}")
    return int(_assign(v[None, :], p.centroids)[0])


def niche_indices(descriptors: np.ndarray, p: CvtPartition) -> np.ndarray:
    """Vectorized nearest-centroid lookup for rows of a descriptor matrix."""
    x = np.asarray(descriptors, dtype=float)
    if x.shape[1] != p.dim:
        raise ValueError(f"descriptors have dim {x.shape[1]}, partition expects {p.dim}")
    return _assign(x, p.centroids)
