"""K-means with k-means++ seeding, Lloyd iterations and independent restarts.

Stand-in for the (1+eps)-approximate K-means step of the clustering
algorithms.  Only the near-optimality of the objective matters downstream,
so the best of ``restarts`` seeded runs is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class KMeansConfig:
    K: int
    restarts: int = 10
    max_iters: int = 300
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError(f"K >= 1 required, got {self.K}")
        if self.restarts < 1:
            raise ValidationError(f"restarts >= 1 required, got {self.restarts}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters >= 1 required, got {self.max_iters}")
        if self.tol < 0:
            raise ValidationError(f"tol >= 0 required, got {self.tol}")

    def replace(self, **changes) -> "KMeansConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    iterations_used: int
    restart_index: int
    history: tuple[float, ...] = ()  # objective after each Lloyd step of the winning restart


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # explicit differences, not the |x|^2 - 2x.c + |c|^2 expansion, so exact ties stay exact
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkm,nkm->nk", diff, diff)


def assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center index for each row; exact ties go to the lowest index."""
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if points.ndim != 2 or centers.ndim != 2 or points.shape[1] != centers.shape[1]:
        raise ValidationError(f"dimension mismatch: points {points.shape}, centers {centers.shape}")
    return np.argmin(_sq_dists(points, centers), axis=1)


def objective(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    """Sum of squared distances from each point to its assigned center."""
    diff = points - centers[labels]
    return float(np.einsum("nm,nm->", diff, diff))


def kmeans_pp_init(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; falls back to uniform picks when all distances vanish."""
    n = points.shape[0]
    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _update_centers(points, labels, centers, K):
    new = np.zeros_like(centers)
    counts = np.bincount(labels, minlength=K)
    np.add.at(new, labels, points)
    nonempty = counts > 0
    new[nonempty] /= counts[nonempty, None]
    if not np.all(nonempty):
        # re-seed each empty center at the point currently farthest from its own center
        dist = np.sum((points - new[labels]) ** 2, axis=1) if np.any(nonempty) else np.zeros(len(points))
        taken = set()
        for j in np.flatnonzero(~nonempty):
            order = np.argsort(-dist, kind="stable")
            idx = next(int(i) for i in order if int(i) not in taken)
            taken.add(idx)
            new[j] = points[idx]
            dist[idx] = 0.0
    return new


def lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    """Run Lloyd steps from ``centers``; returns labels, centers, iterations, objective history."""
    K = centers.shape[0]
    labels = assign(points, centers)
    history = [objective(points, labels, centers)]
    it = 0
    for it in range(1, max_iters + 1):
        centers = _update_centers(points, labels, centers, K)
        new_labels = assign(points, centers)
        obj = objective(points, new_labels, centers)
        history.append(obj)
        changed = np.any(new_labels != labels)
        labels = new_labels
        prev = history[-2]
        if not changed or prev <= 0 or (prev - obj) < tol * prev:
            break
    return labels, centers, it, history


def hartigan_refine(points: np.ndarray, labels: np.ndarray, K: int, max_passes: int = 100):
    """Single-point transfers that strictly lower the objective (Hartigan's rule).

    Moving ``x`` from cluster ``a`` to ``b`` changes the objective by
    ``n_b/(n_b+1) |x - c_b|^2 - n_a/(n_a-1) |x - c_a|^2``.  A vectorized
    screen picks the rows that could improve; only those are visited, one
    at a time with exact bookkeeping.  Every Hartigan-stable partition is
    also Lloyd-stable, so this only ever escapes Lloyd's fixed points.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=K).astype(float)
    sums = np.zeros((K, points.shape[1]))
    np.add.at(sums, labels, points)
    rows = np.arange(len(points))
    for _ in range(max_passes):
        cent = sums / np.maximum(counts, 1.0)[:, None]
        d2 = _sq_dists(points, cent)
        own = counts[labels]
        stay = np.where(own > 1, own / np.maximum(own - 1, 1) * d2[rows, labels], -np.inf)
        move = counts / (counts + 1) * d2
        move[rows, labels] = np.inf
        cand = np.flatnonzero(move.min(axis=1) < stay * (1 - 1e-12))
        if cand.size == 0:
            break
        for i in cand:
            a, x = labels[i], points[i]
            if counts[a] <= 1:
                continue
            cent = sums / np.maximum(counts, 1.0)[:, None]
            gain = counts / (counts + 1) * np.sum((x - cent) ** 2, axis=1)
            gain[a] = np.inf
            b = int(np.argmin(gain))
            if gain[b] < counts[a] / (counts[a] - 1) * np.sum((x - cent[a]) ** 2) * (1 - 1e-12):
                labels[i] = b
                counts[a] -= 1
                counts[b] += 1
                sums[a] -= x
                sums[b] += x
    centers = sums / np.maximum(counts, 1.0)[:, None]
    return labels, centers


def kmeans(points: np.ndarray, cfg: KMeansConfig) -> KMeansResult:
    """Best-objective result of ``cfg.restarts`` independent k-means++/Lloyd runs.

    Each run ends with Hartigan single-point transfers, which escape many of
    the poor fixed points Lloyd iteration can stop at.

    Restart ``i`` draws its randomness from ``seed + i``, so a run with more
    restarts can only improve on one with fewer.  Equal objectives keep the
    lowest restart index.  Rows are processed in lexicographic order, which
    makes the output equivariant under any permutation of the input rows.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValidationError(f"points must be a 2-D array, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValidationError("points contain NaN or infinite values")
    n = points.shape[0]
    if n < cfg.K:
        raise ValidationError(f"need at least K={cfg.K} points, got n={n}")
    order = np.lexsort(points.T[::-1])
    canon = points[order]
    best = None
    for i in range(cfg.restarts):
        rng = np.random.default_rng(cfg.seed + i)
        init = kmeans_pp_init(canon, cfg.K, rng)
        labels, centers, iters, hist = lloyd(canon, init, cfg.max_iters, cfg.tol)
        h_labels, h_centers = hartigan_refine(canon, labels, cfg.K)
        if objective(canon, h_labels, h_centers) < hist[-1] * (1 - 1e-12):
            # settle with Lloyd so labels stay the argmin of the returned centers
            labels, centers, more, tail = lloyd(canon, h_centers, cfg.max_iters, cfg.tol)
            iters += more
            hist += tail
        obj = hist[-1]
        if best is None or obj < best.objective:
            best = KMeansResult(labels, centers, obj, iters, i, tuple(hist))
    labels = np.empty(n, dtype=np.int64)
    labels[order] = best.labels
    return KMeansResult(labels, best.centers, best.objective, best.iterations_used, best.restart_index, best.history)
