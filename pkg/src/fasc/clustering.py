"""Vanilla spectral clustering, its cross-fitted variant, and FASC.

FASC removes an estimated ``r``-dimensional factor subspace (top principal
directions of the uncentered second-moment matrix) from every row and then
runs spectral clustering on the residuals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import Dataset, split_halves
from .errors import ValidationError
from .kmeans import KMeansConfig, kmeans
from .numerics import Projector, SpectralBasis, top_right_singular

Method = Literal["kmeans_raw", "spectral", "spectral_crossfit", "fasc"]
SplitMode = Literal["half_split", "full_sample"]


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    labels: np.ndarray
    embedded_centers: np.ndarray
    method: Method
    basis: SpectralBasis | None = None
    objective: float = 0.0
    factor_basis: SpectralBasis | None = None
    K: int = 0


@dataclass(frozen=True)
class FascConfig:
    r: int
    K: int
    k: int | None = None  # defaults to K
    split: SplitMode = "full_sample"
    kmeans: KMeansConfig | None = None

    def __post_init__(self):
        if self.k is None:
            object.__setattr__(self, "k", self.K)
        if self.kmeans is None:
            object.__setattr__(self, "kmeans", KMeansConfig(self.K))
        if self.r < 0:
            raise ValidationError(f"r >= 0 required, got {self.r}")
        if not 1 <= self.k <= self.K:
            raise ValidationError(f"need 1 <= k <= K, got k={self.k}, K={self.K}")
        if self.split not in ("half_split", "full_sample"):
            raise ValidationError(f"unknown split mode {self.split!r}")
        if self.kmeans.K != self.K:
            raise ValidationError(f"kmeans config has K={self.kmeans.K}, expected {self.K}")


def _km_cfg(cfg: KMeansConfig | None, K: int) -> KMeansConfig:
    if cfg is None:
        return KMeansConfig(K)
    return cfg if cfg.K == K else cfg.replace(K=K)


def kmeans_raw(data: Dataset, K: int, kmeans_cfg: KMeansConfig | None = None) -> ClusteringResult:
    """K-means directly on the rows of ``data``."""
    km = kmeans(data.X, _km_cfg(kmeans_cfg, K))
    return ClusteringResult(km.labels, km.centers, "kmeans_raw", None, km.objective, K=K)


def spectral_cluster(
    data: Dataset, K: int, k: int | None = None, kmeans_cfg: KMeansConfig | None = None
) -> ClusteringResult:
    """Embed rows on the top-``k`` right singular subspace, then K-means."""
    k = K if k is None else k
    if not 1 <= k <= min(K, data.d):
        raise ValidationError(f"need 1 <= k <= min(K, d) = {min(K, data.d)}, got k={k}")
    if data.n < K:
        raise ValidationError(f"need n >= K, got n={data.n}, K={K}")
    V = top_right_singular(data.X, k)
    Z = Projector(V, "onto").apply(data.X)
    km = kmeans(Z, _km_cfg(kmeans_cfg, K))
    return ClusteringResult(km.labels, km.centers, "spectral", V, km.objective, K=K)


def match_alphabets(centers_a: np.ndarray, centers_b: np.ndarray) -> np.ndarray:
    """Relabeling of alphabet ``b`` onto ``a`` minimising summed center distance.

    Both arguments are ``K x d`` centers in a common space.  Returns ``perm``
    with ``perm[j]`` the ``a``-label assigned to ``b``-label ``j``.
    """
    cost = np.linalg.norm(centers_a[:, None, :] - centers_b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(centers_b.shape[0], dtype=np.int64)
    perm[cols] = rows
    return perm


def _stitch(first: ClusteringResult, second: ClusteringResult, method: Method, K: int, **extra) -> ClusteringResult:
    ca = first.embedded_centers @ first.basis.vectors.T
    cb = second.embedded_centers @ second.basis.vectors.T
    perm = match_alphabets(ca, cb)
    labels = np.concatenate([first.labels, perm[second.labels]])
    return ClusteringResult(
        labels, first.embedded_centers, method, first.basis, first.objective + second.objective, K=K, **extra
    )


def spectral_cluster_crossfit(
    data: Dataset, K: int, k: int | None = None, kmeans_cfg: KMeansConfig | None = None
) -> ClusteringResult:
    """Spectral clustering where each half is embedded with the other half's basis.

    The two label alphabets are reconciled by matching the halves' centers,
    mapped back into the original space, with minimum total distance.
    """
    k = K if k is None else k
    if data.n < 2 * K:
        raise ValidationError(f"cross-fitting needs n >= 2K, got n={data.n}, K={K}")
    if not 1 <= k <= min(K, data.d):
        raise ValidationError(f"need 1 <= k <= min(K, d) = {min(K, data.d)}, got k={k}")
    cfg = _km_cfg(kmeans_cfg, K)
    h1, h2 = split_halves(data)

    def one_side(target: Dataset, other: Dataset) -> ClusteringResult:
        V = top_right_singular(other.X, k)
        km = kmeans(Projector(V, "onto").apply(target.X), cfg)
        return ClusteringResult(km.labels, km.centers, "spectral_crossfit", V, km.objective, K=K)

    return _stitch(one_side(h1, h2), one_side(h2, h1), "spectral_crossfit", K)


def factor_basis(X: np.ndarray, r: int) -> SpectralBasis:
    """Top-``r`` eigenvectors of ``X^T X / n`` with those eigenvalues."""
    if r == 0:
        return SpectralBasis.empty(X.shape[1])
    if r > min(X.shape):
        raise ValidationError(f"r={r} exceeds min(n, d) = {min(X.shape)}")
    V = top_right_singular(X, r)
    return SpectralBasis(V.vectors, V.values / X.shape[0])


def factor_adjust(data: Dataset, basis: SpectralBasis) -> Dataset:
    """Residuals ``x_i - V V^T x_i`` with the factor subspace removed."""
    return data.with_X(Projector(basis, "complement").apply(data.X))


def fasc(data: Dataset, cfg: FascConfig) -> ClusteringResult:
    """Factor-adjusted spectral clustering.

    ``full_sample`` estimates the factor space from all rows and clusters
    all residuals.  ``half_split`` estimates it on one half, clusters the
    other half's residuals, repeats with roles swapped and reconciles the
    two alphabets as in :func:`spectral_cluster_crossfit`.
    """
    if cfg.r + cfg.k > data.d:
        raise ValidationError(f"need r + k <= d, got r={cfg.r}, k={cfg.k}, d={data.d}")
    if cfg.split == "full_sample":
        Vr = factor_basis(data.X, cfg.r)
        res = spectral_cluster(factor_adjust(data, Vr), cfg.K, cfg.k, cfg.kmeans)
        return ClusteringResult(res.labels, res.embedded_centers, "fasc", res.basis, res.objective, Vr, cfg.K)

    if data.n < 2:
        raise ValidationError(f"half_split needs n >= 2, got n={data.n}")
    h1, h2 = split_halves(data)

    def one_side(target: Dataset, other: Dataset) -> ClusteringResult:
        Vr = factor_basis(other.X, cfg.r)
        res = spectral_cluster(factor_adjust(target, Vr), cfg.K, cfg.k, cfg.kmeans)
        return ClusteringResult(res.labels, res.embedded_centers, "fasc", res.basis, res.objective, Vr, cfg.K)

    first, second = one_side(h1, h2), one_side(h2, h1)
    return _stitch(first, second, "fasc", cfg.K, factor_basis=first.factor_basis)
