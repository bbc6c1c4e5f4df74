"""Evaluation metrics, signal-to-noise quantities and assumption diagnostics."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linear_sum_assignment

from .dataset import Dataset, FactorMixtureSpec
from .errors import ValidationError
from .numerics import centered_covariance, operator_norm, top_eigen, top_right_singular

EXHAUSTIVE_MAX_K = 8

# --------------------------------------------------------------------------
# mislabeling
# --------------------------------------------------------------------------


def _check_labels(predicted, truth, K: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValidationError(f"label vectors differ in shape: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValidationError("label vectors are empty")
    for name, v in (("predicted", p), ("truth", t)):
        if v.min() < 0 or v.max() >= K:
            raise ValidationError(f"{name} labels must lie in [0, {K}), got range [{v.min()}, {v.max()}]")
    return p, t


def confusion(predicted, truth, K: int) -> np.ndarray:
    """``C[a, b]`` counts rows with predicted ``a`` and true ``b``."""
    p, t = _check_labels(predicted, truth, K)
    C = np.zeros((K, K), dtype=np.int64)
    np.add.at(C, (p, t), 1)
    return C


@lru_cache(maxsize=None)
def _perms(K: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(K))), dtype=np.int64)


def mislabeling_exhaustive(predicted, truth, K: int) -> float:
    """Minimum mislabeling by enumerating all ``K!`` relabelings of the truth."""
    C = confusion(predicted, truth, K)
    P = _perms(K)
    agree = C[P, np.arange(K)].sum(axis=1)  # perm tau: truth b -> predicted tau[b]
    return 1.0 - agree.max() / C.sum()


def mislabeling_hungarian(predicted, truth, K: int) -> float:
    """Minimum mislabeling via a maximum-weight assignment on the confusion matrix."""
    C = confusion(predicted, truth, K)
    rows, cols = linear_sum_assignment(C, maximize=True)
    return 1.0 - C[rows, cols].sum() / C.sum()


def mislabeling(predicted, truth, K: int | None = None) -> float:
    """Fraction of rows misassigned under the best relabeling.

    Labels are 0-based.  ``K`` defaults to the larger alphabet seen in
    either vector; the smaller alphabet is padded with empty classes.
    Exhaustive over permutations for ``K <= 8``, Hungarian above that.
    """
    if K is None:
        K = int(max(np.max(predicted), np.max(truth))) + 1
    if K <= EXHAUSTIVE_MAX_K:
        return mislabeling_exhaustive(predicted, truth, K)
    return mislabeling_hungarian(predicted, truth, K)


def random_guess_baseline(truth, K: int, seed: int, align: bool = False) -> float:
    """Error rate of uniformly random labels drawn with ``seed``.

    By default the guess is compared label for label, which has expectation
    ``1 - 1/K``.  ``align=True`` minimises over relabelings instead, which
    sits below ``1 - 1/K`` by a margin that shrinks with n.
    """
    t = np.asarray(truth, dtype=np.int64)
    guess = np.random.default_rng(seed).integers(0, K, size=t.size)
    if align:
        return mislabeling(guess, t, K)
    return float(np.mean(guess != t))


# --------------------------------------------------------------------------
# normal CDF
# --------------------------------------------------------------------------


def normal_cdf(x: float) -> float:
    """Standard normal CDF as ``erfc(-x / sqrt 2) / 2``.

    ``math.erfc`` (the C library's complementary error function) keeps full
    relative precision in the lower tail, where ``1 + erf`` would cancel.
    """
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# --------------------------------------------------------------------------
# SNR family
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SnrReport:
    snr: float | None  # two symmetric clusters only
    s_quantity: float
    snr_bar: float
    optimal_rate: float | None

    def as_dict(self) -> dict:
        return asdict(self)


def min_center_gap_sq(centroids: np.ndarray) -> float:
    K = centroids.shape[0]
    if K < 2:
        return math.inf
    diffs = centroids[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diffs, diffs)
    return float(np.min(d2[~np.eye(K, dtype=bool)]))


def is_symmetric_pair(spec: FactorMixtureSpec, atol: float = 1e-12) -> bool:
    return spec.K == 2 and np.allclose(spec.centroids[1], -spec.centroids[0], rtol=0, atol=atol)


def solve_covariance(spec: FactorMixtureSpec, rhs: np.ndarray) -> np.ndarray:
    """``(B B^T + sigma^2 I)^{-1} rhs`` by Cholesky; raises if singular."""
    Sigma = spec.covariance()
    try:
        c = cho_factor(Sigma, lower=True)
    except np.linalg.LinAlgError:
        raise ValidationError("model covariance is singular (sigma = 0 with rank-deficient B)") from None
    return cho_solve(c, rhs)


def covariance_norm(spec: FactorMixtureSpec) -> float:
    """``|B B^T + sigma^2 I|_2 = sigma_max(B)^2 + sigma^2``."""
    return operator_norm(spec.loading) ** 2 + spec.sigma**2


def snr_report(spec: FactorMixtureSpec) -> SnrReport:
    """SNR, S and SNR-bar for a mixture spec.

    ``snr`` and ``optimal_rate`` are only defined for two clusters at
    ``+-mu``; otherwise they are ``None``.  ``snr_bar`` is ``inf`` when
    ``sigma = 0`` and ``s_quantity`` is ``inf`` when the covariance vanishes.
    Single-cluster specs have infinite separation terms.
    """
    gap = min_center_gap_sq(spec.centroids)
    cov_norm = covariance_norm(spec)
    s_q = gap / cov_norm if math.isfinite(gap) and cov_norm > 0 else math.inf
    snr_bar = math.inf if spec.sigma == 0 or not math.isfinite(gap) else gap / spec.sigma**2
    snr = rate = None
    if is_symmetric_pair(spec):
        mu = spec.centroids[0]
        try:
            z = solve_covariance(spec, mu)
            snr = float(mu @ z)
        except ValidationError:
            snr = math.inf
        rate = normal_cdf(-math.sqrt(snr))
    return SnrReport(snr, s_q, snr_bar, rate)


def optimal_bayes_labels(data: Dataset, spec: FactorMixtureSpec) -> np.ndarray:
    """Bayes rule for ``x ~ N(+-mu, Sigma)``: label 0 iff ``<x, Sigma^{-1} mu> >= 0``."""
    if not is_symmetric_pair(spec):
        raise ValidationError("the Bayes reference needs two clusters with mu_2 = -mu_1")
    if data.d != spec.d:
        raise ValidationError(f"data has d={data.d}, spec has d={spec.d}")
    w = solve_covariance(spec, spec.centroids[0])
    return np.where(data.X @ w >= 0, 0, 1).astype(np.int64)


# --------------------------------------------------------------------------
# assumption diagnostics
# --------------------------------------------------------------------------


def mean_second_moment(spec: FactorMixtureSpec) -> np.ndarray:
    """``E[mu_y mu_y^T] = sum_j p_j mu_j mu_j^T``."""
    mu = spec.centroids
    return (mu * spec.weights[:, None]).T @ mu


@dataclass(frozen=True)
class AssumptionReport:
    sigma_min_B: float
    sigma_max_B: float
    u_top_m_norm: float
    pervasiveness_ratio_lo: float
    pervasiveness_ratio_hi: float
    weak_factor_ok: bool
    perpendicularity_ok: bool
    eigen_gap: float
    mean_matrix_norm: float
    perpendicularity_threshold: float
    weak_factor_threshold: float
    factor_degenerate: bool = False
    mean_rank_zero: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def assumption_report(
    spec: FactorMixtureSpec, k: int, n: int | None = None, perp_const: float = 0.2
) -> AssumptionReport:
    """Check the loading/centroid conditions on a known spec.

    ``perpendicularity_ok``: ``|U^T M| <= min(sqrt(d) * max(sigma, 1/sqrt(log n)), perp_const)``
    (the ``1/sqrt(log n)`` term is dropped when ``n`` is not given).
    ``weak_factor_ok``: ``3 (|E mu mu^T| + sigma^2) <= sigma_min(B)^2``.
    ``eigen_gap`` is ``lambda_r - lambda_{r+1}`` of the population second
    moment ``E[mu mu^T] + B B^T + sigma^2 I``.
    """
    d, r = spec.d, spec.r
    if not 1 <= k <= d:
        raise ValidationError(f"need 1 <= k <= d={d}, got k={k}")
    Mmat = mean_second_moment(spec)
    mean_norm = float(np.max(np.abs(np.linalg.eigvalsh(Mmat))))
    mean_rank_zero = mean_norm <= 1e-14
    M = top_eigen(Mmat, k).vectors

    floor = spec.sigma
    if n is not None and n > 1:
        floor = max(floor, 1.0 / math.sqrt(math.log(n)))
    perp_thr = min(math.sqrt(d) * floor, perp_const)
    weak_thr = 3.0 * (mean_norm + spec.sigma**2)

    if r == 0 or not np.any(spec.loading):
        return AssumptionReport(
            0.0, 0.0, 0.0, 0.0, 0.0, False, True, 0.0, mean_norm, perp_thr, weak_thr,
            factor_degenerate=True, mean_rank_zero=mean_rank_zero,
        )
    Ub = top_right_singular(spec.loading.T, r)  # right vectors of B^T = left vectors of B
    s2 = np.clip(Ub.values, 0.0, None)
    smin, smax = math.sqrt(s2[-1]), math.sqrt(s2[0])
    utm = 0.0 if mean_rank_zero else operator_norm(Ub.vectors.T @ M)
    pop = Mmat + spec.loading @ spec.loading.T + spec.sigma**2 * np.eye(d)
    lam = np.linalg.eigvalsh(pop)[::-1]
    gap = float(lam[r - 1] - lam[r]) if r < d else float(lam[r - 1])
    return AssumptionReport(
        sigma_min_B=smin,
        sigma_max_B=smax,
        u_top_m_norm=utm,
        pervasiveness_ratio_lo=smin**2 / d,
        pervasiveness_ratio_hi=smax**2 / d,
        weak_factor_ok=bool(weak_thr <= smin**2),
        perpendicularity_ok=bool(utm <= perp_thr),
        eigen_gap=gap,
        mean_matrix_norm=mean_norm,
        perpendicularity_threshold=perp_thr,
        weak_factor_threshold=weak_thr,
        mean_rank_zero=mean_rank_zero,
    )


def grassmann_bound(r: int, n: int, d: int, xi: float = 1.0) -> float:
    """``sqrt(11 r log n / (xi d))``, the high-probability bound on ``|U^T M|``
    for a uniformly random centroid subspace.  ``xi`` is an unnamed constant."""
    return math.sqrt(11.0 * r * math.log(n) / (xi * d))


@dataclass(frozen=True)
class SpectralConditionReport:
    beta: float
    psi: float  # nan when some cluster is empty
    rho: float
    size_condition: float = field(default=math.nan)  # beta n / K^2, wants > 10

    def as_dict(self) -> dict:
        return asdict(self)


def spectral_conditions(
    spec: FactorMixtureSpec, labels, sigma_eff: float, n: int, d: int, k: int, centroids: np.ndarray | None = None
) -> SpectralConditionReport:
    """Plug-in values of the cluster-balance ``beta`` and the separation ratios ``psi``, ``rho``.

    ``psi = min_{i!=j} |theta_i - theta_j| / (beta^{-1/2} K (1 + sqrt(d/n)) sigma)`` and
    ``rho = sigma_k([theta_{y_1}, ..., theta_{y_n}]^T) / ((sqrt n + sqrt d) sigma)``.
    ``centroids`` overrides the spec's (e.g. factor-projected centroids).
    """
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValidationError("labels are empty")
    if sigma_eff <= 0:
        raise ValidationError(f"sigma_eff must be > 0, got {sigma_eff}")
    theta = spec.centroids if centroids is None else np.asarray(centroids, dtype=float)
    K = theta.shape[0]
    counts = np.bincount(y, minlength=K)
    beta = K / n * counts.min()
    size_cond = beta * n / K**2
    # sigma_k of the stacked rows theta_{y_i} equals that of diag(sqrt(n_j)) Theta
    weighted = np.sqrt(counts)[:, None] * theta
    kk = min(k, *weighted.shape)
    sk = math.sqrt(max(0.0, float(top_right_singular(weighted, kk).values[-1]))) if kk >= k else 0.0
    rho = sk / ((math.sqrt(n) + math.sqrt(d)) * sigma_eff)
    if beta == 0:
        return SpectralConditionReport(0.0, math.nan, rho, size_cond)
    gap = math.sqrt(min_center_gap_sq(theta)) if K > 1 else math.inf
    psi = gap / (beta**-0.5 * K * (1 + math.sqrt(d / n)) * sigma_eff)
    return SpectralConditionReport(float(beta), float(psi), float(rho), float(size_cond))


def scree(data: Dataset) -> np.ndarray:
    """All eigenvalues of the mean-centered sample covariance, descending."""
    return top_eigen(centered_covariance(data), data.d).values
