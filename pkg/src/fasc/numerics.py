"""Dense symmetric eigenproblems, right singular subspaces and projectors.

All bases follow one sign convention: in every column the first entry with
magnitude above ``1e-12`` is positive.  That makes results reproducible
across the eigen route and the Gram (singular value) route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .dataset import Dataset
from .errors import NumericalError, ValidationError

SYMMETRY_TOL = 1e-8
RESIDUAL_RTOL = 1e-8
SIGN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Orthonormal columns with their eigenvalues (or squared singular values), descending."""

    vectors: np.ndarray  # d x m
    values: np.ndarray  # m

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    @classmethod
    def empty(cls, d: int) -> "SpectralBasis":
        return cls(np.zeros((d, 0)), np.zeros(0))


@dataclass(frozen=True)
class Projector:
    """Orthogonal projection onto ``span(basis)`` or onto its complement."""

    basis: SpectralBasis
    mode: Literal["onto", "complement"] = "complement"

    def __post_init__(self):
        if self.mode not in ("onto", "complement"):
            raise ValidationError(f"projector mode must be 'onto' or 'complement', got {self.mode!r}")

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Rows of ``X`` mapped through the projection.

        ``onto`` returns the ``n x m`` coordinates ``x_i^T V``; ``complement``
        returns ``x_i - V V^T x_i`` in the original space.
        """
        V = self.basis.vectors
        if X.shape[1] != V.shape[0]:
            raise ValidationError(f"basis has ambient dimension {V.shape[0]}, data has d={X.shape[1]}")
        if self.mode == "onto":
            return X @ V
        if V.shape[1] == 0:
            return X
        return X - (X @ V) @ V.T


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > SIGN_EPS)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def _check_square_symmetric(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValidationError("matrix has non-finite entries")
    asym = np.max(np.abs(S - S.T)) if S.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(S))):
        raise ValidationError(f"matrix is not symmetric (max |S - S^T| = {asym:.3e})")
    return S


def sample_covariance(data: Dataset) -> np.ndarray:
    """Uncentered second-moment matrix ``X^T X / n``."""
    X = data.X
    S = X.T @ X / X.shape[0]
    return (S + S.T) / 2


def centered_covariance(data: Dataset) -> np.ndarray:
    """Mean-centered covariance ``(X - xbar)^T (X - xbar) / n``."""
    Xc = data.X - data.X.mean(axis=0)
    S = Xc.T @ Xc / Xc.shape[0]
    return (S + S.T) / 2


def _residuals(S: np.ndarray, V: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.linalg.norm(S @ V - V * w, axis=0)


def top_eigen(S: np.ndarray, m: int) -> SpectralBasis:
    """The ``m`` leading eigenpairs of a symmetric matrix.

    Backed by LAPACK's symmetric solver (``syevd``).  Each returned pair is
    checked against ``|S v - lambda v| <= 1e-8 (s + |lambda|)`` where ``s``
    is ``max(1, |S|_2)``; the scale keeps the test meaningful for Gram
    matrices with large norm.  A failed check raises :class:`NumericalError`
    carrying the worst residual.
    """
    S = _check_square_symmetric(S)
    d = S.shape[0]
    if not 1 <= m <= d:
        raise ValidationError(f"need 1 <= m <= d={d}, got m={m}")
    S = (S + S.T) / 2
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}", residual=math.inf) from exc
    scale = max(1.0, float(np.max(np.abs(w))))
    w, V = w[::-1][:m], V[:, ::-1][:, :m]
    res = _residuals(S, V, w)
    bound = RESIDUAL_RTOL * (scale + np.abs(w))
    if np.any(res > bound):
        worst = float(np.max(res))
        raise NumericalError(f"eigen residual {worst:.3e} exceeds tolerance", residual=worst)
    return SpectralBasis(_fix_signs(V), w.copy())


def top_right_singular(X: np.ndarray, k: int) -> SpectralBasis:
    """Top ``k`` right singular vectors of ``X`` and their squared singular values.

    Uses the ``d x d`` Gram matrix ``X^T X`` when ``d <= n``; otherwise the
    ``n x n`` Gram ``X X^T`` gives left vectors ``u`` and ``v = X^T u / s``.
    Right vectors attached to (numerically) zero singular values are filled
    in with an orthonormal completion.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise ValidationError(f"need 1 <= k <= min(n, d) = {min(n, d)}, got k={k}")
    if d <= n:
        return top_eigen(X.T @ X, k)
    left = top_eigen(X @ X.T, k)
    vals = np.clip(left.values, 0.0, None)
    s = np.sqrt(vals)
    g = int(np.sum(s > 1e-12 * max(1.0, s[0])))  # values are sorted, so a prefix
    V = (X.T @ left.vectors[:, :g]) / s[:g]
    if g < k:
        G = np.random.default_rng(0).standard_normal((d, k - g))
        Q, _ = np.linalg.qr(np.hstack([V, G]))
        V = Q[:, :k]
        vals[g:] = 0.0
    return SpectralBasis(_fix_signs(V), vals)


def project(P: Projector, data: Dataset) -> Dataset:
    """Apply ``P`` to every row; labels pass through."""
    return data.with_X(P.apply(data.X))


def operator_norm(A: np.ndarray, tol: float = 1e-9, max_iter: int = 10_000, seed: int = 0) -> float:
    """Spectral norm by power iteration on ``A^T A``.

    Stops when the Rayleigh-quotient estimate changes by less than ``tol``
    (relative).  A start vector that collapses to zero triggers a restart
    from a fresh random vector.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0 or not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    for _ in range(10):
        v = rng.standard_normal(A.shape[1])
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(max_iter):
            w = A.T @ (A @ v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            new = float(v @ w)
            v = w / nw
            if abs(new - est) <= tol * new:
                return float(np.linalg.norm(A @ v))
            est = new
        else:
            return math.sqrt(est)
    raise NumericalError("power iteration stagnated on every restart", residual=math.inf)


def subspace_distance(A: SpectralBasis, B: SpectralBasis) -> float:
    """``|A A^T - B B^T|_2``, the sine of the largest principal angle."""
    if A.dim != B.dim:
        raise ValidationError(f"ambient dimensions differ: {A.dim} vs {B.dim}")
    if A.m != B.m:
        raise ValidationError(f"column counts differ: {A.m} vs {B.m}")
    D = A.projector() - B.projector()
    return min(1.0, operator_norm(D))
