"""Mini-batch k-means with k-means++ seeding, plus a full-batch Lloyd mode.

Mini-batch updates use per-center counts as decaying learning rates; the
Lloyd mode exists as an independent verification route and asserts its
inertia never increases from one iteration to the next.  Distances are
squared Euclidean, computed in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewDistinct, TooFewPoints


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 50
    batch_size: int = 1024
    max_iters: int = 200
    seed: int = 0
    tolerance: float = 1e-4

    def validate(self) -> None:
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.batch_size < 1 or self.max_iters < 1:
            raise ValueError("batch_size and max_iters must be positive")


@dataclass
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iters: int
    inertia_history: list[float] = field(default_factory=list)


def _check_points(points: np.ndarray, k: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise TooFewPoints("points must be a non-empty (n, d) matrix")
    if points.shape[0] < k:
        raise TooFewPoints(f"{points.shape[0]} points for k={k}")
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < k:
        raise TooFewDistinct(f"{distinct} distinct points for k={k}")
    return points


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    d = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.maximum(d, 0.0)


def _inertia(points: np.ndarray, centers: np.ndarray,
             assignments: np.ndarray) -> float:
    diff = points - centers[assignments]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans_pp_init(points: np.ndarray, k: int,
                   seed: int | np.random.Generator = 0) -> np.ndarray:
    """k-means++ seeding: new centers drawn with probability proportional
    to squared distance from the nearest already-chosen center."""
    points = _check_points(points, k)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(n))]
    d2 = _sq_dists(points, centers[:1]).ravel()
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # All remaining mass sits on chosen centers; fall back to any
            # point not yet selected (cannot happen with >= k distinct).
            candidates = np.where(d2 > 0)[0]
            pick = int(rng.integers(n)) if candidates.size == 0 else int(candidates[0])
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centers[i] = points[pick]
        d2 = np.minimum(d2, _sq_dists(points, centers[i : i + 1]).ravel())
    return centers


def lloyd_kmeans(points: np.ndarray, cfg: KMeansConfig) -> KMeansResult:
    """Full-batch Lloyd iterations; inertia is asserted non-increasing."""
    cfg.validate()
    points = _check_points(points, cfg.k)
    rng = np.random.default_rng(cfg.seed)
    centers = kmeans_pp_init(points, cfg.k, rng)
    history: list[float] = []
    assignments = np.zeros(points.shape[0], dtype=np.int64)
    for iteration in range(cfg.max_iters):
        assignments = np.argmin(_sq_dists(points, centers), axis=1)
        inertia = _inertia(points, centers, assignments)
        if history:
            assert inertia <= history[-1] * (1 + 1e-12) + 1e-9, (
                f"Lloyd inertia increased: {history[-1]} -> {inertia}"
            )
        history.append(inertia)
        new_centers = centers.copy()
        moved = 0.0
        for c in range(cfg.k):
            members = points[assignments == c]
            if len(members) == 0:
                # Reseed an empty cluster at the worst-fit point.
                residual = ((points - centers[assignments]) ** 2).sum(axis=1)
                new_centers[c] = points[int(np.argmax(residual))]
            else:
                new_centers[c] = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new_centers[c] - centers[c])))
        centers = new_centers
        if moved < cfg.tolerance:
            break
    assignments = np.argmin(_sq_dists(points, centers), axis=1)
    return KMeansResult(
        centers=centers,
        assignments=assignments,
        inertia=_inertia(points, centers, assignments),
        n_iters=len(history),
        inertia_history=history,
    )


def minibatch_kmeans(points: np.ndarray, cfg: KMeansConfig) -> KMeansResult:
    """Per-center count-weighted mini-batch updates (decaying step sizes).

    Stops when the max center movement in an iteration falls below the
    tolerance or after max_iters batches.  Clusters left empty over the
    whole run are reseeded at the globally worst-fit point.
    """
    cfg.validate()
    points = _check_points(points, cfg.k)
    rng = np.random.default_rng(cfg.seed)
    centers = kmeans_pp_init(points, cfg.k, rng)
    counts = np.zeros(cfg.k, dtype=np.int64)
    n = points.shape[0]
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        batch_idx = rng.integers(n, size=min(cfg.batch_size, n))
        batch = points[batch_idx]
        nearest = np.argmin(_sq_dists(batch, centers), axis=1)
        before = centers.copy()
        for point, c in zip(batch, nearest):
            counts[c] += 1
            eta = 1.0 / counts[c]
            centers[c] = (1.0 - eta) * centers[c] + eta * point
        moved = float(np.max(np.linalg.norm(centers - before, axis=1)))
        if moved < cfg.tolerance:
            break

    assignments = np.argmin(_sq_dists(points, centers), axis=1)
    for c in range(cfg.k):
        if not np.any(assignments == c):
            residual = ((points - centers[assignments]) ** 2).sum(axis=1)
            centers[c] = points[int(np.argmax(residual))]
            assignments = np.argmin(_sq_dists(points, centers), axis=1)
    return KMeansResult(
        centers=centers,
        assignments=assignments,
        inertia=_inertia(points, centers, assignments),
        n_iters=iterations,
    )
