import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fasc.analysis import (
    assumption_report,
    confusion,
    grassmann_bound,
    mislabeling,
    mislabeling_exhaustive,
    mislabeling_hungarian,
    normal_cdf,
    optimal_bayes_labels,
    random_guess_baseline,
    scree,
    snr_report,
    solve_covariance,
    spectral_conditions,
)
from fasc.dataset import Dataset, FactorMixtureSpec, generate, toy_spec
from fasc.errors import ValidationError


def brute_mislabeling(p, t, K):
    n = len(p)
    return min(sum(p[i] != tau[t[i]] for i in range(n)) for tau in itertools.permutations(range(K))) / n


def _sym_spec(mu, B, sigma):
    mu = np.asarray(mu, dtype=float)
    return FactorMixtureSpec(np.vstack([mu, -mu]), B, sigma, np.array([0.5, 0.5]))


# --- mislabeling ----------------------------------------------------------------


def test_identity_and_permutation_zero():
    t = np.array([0, 0, 1, 2, 2, 1])
    assert mislabeling(t, t, 3) == 0.0
    assert mislabeling(np.array([2, 0, 1])[t], t, 3) == 0.0


def test_worked_example():
    truth = np.array([1, 1, 2, 2, 3, 3]) - 1
    pred = np.array([2, 2, 1, 1, 1, 3]) - 1
    assert mislabeling(pred, truth, 3) == pytest.approx(1 / 6)
    assert brute_mislabeling(pred, truth, 3) == pytest.approx(1 / 6)


def test_errors():
    with pytest.raises(ValidationError):
        mislabeling(np.array([0, 1]), np.array([0]), 2)
    with pytest.raises(ValidationError):
        mislabeling(np.array([0, 3]), np.array([0, 1]), 2)


def test_alphabet_padding():
    # predicted uses 2 clusters, truth 3: smaller alphabet padded with an empty class
    pred = np.array([0, 0, 1, 1, 1, 1])
    truth = np.array([0, 0, 1, 1, 2, 2])
    assert mislabeling(pred, truth) == pytest.approx(2 / 6)


def test_confusion_counts():
    C = confusion(np.array([0, 1, 1]), np.array([1, 1, 0]), 2)
    assert C.tolist() == [[0, 1], [1, 1]]


def test_permutation_invariance_exhaustive_small():
    rng = np.random.default_rng(0)
    for _ in range(200):
        K, n = int(rng.integers(1, 5)), int(rng.integers(1, 9))
        p, t = rng.integers(0, K, n), rng.integers(0, K, n)
        base = brute_mislabeling(p, t, K)
        assert mislabeling(p, t, K) == pytest.approx(base, abs=1e-15)
        for sigma in itertools.permutations(range(K)):
            s = np.array(sigma)
            assert mislabeling(s[p], t, K) == pytest.approx(base, abs=1e-15)
            assert mislabeling(p, s[t], K) == pytest.approx(base, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_hungarian_equals_exhaustive(K, n, seed):
    rng = np.random.default_rng(seed)
    p, t = rng.integers(0, K, n), rng.integers(0, K, n)
    assert mislabeling_hungarian(p, t, K) == mislabeling_exhaustive(p, t, K)


def test_large_k_uses_assignment():
    rng = np.random.default_rng(1)
    t = rng.integers(0, 12, 300)
    perm = rng.permutation(12)
    p = perm[t]
    p[:15] = (p[:15] + 1) % 12
    assert mislabeling(p, t, 12) == pytest.approx(15 / 300)


def test_random_guess_baseline():
    t = np.random.default_rng(2).integers(0, 8, 20000)
    assert random_guess_baseline(t, 8, seed=5) == pytest.approx(0.875, abs=0.01)
    assert random_guess_baseline(t, 8, seed=5, align=True) <= random_guess_baseline(t, 8, seed=5)


# --- normal CDF -----------------------------------------------------------------


def test_normal_cdf_against_erf_reference():
    xs = np.round(np.arange(-8.0, 8.0 + 1e-9, 1e-3), 3)
    worst = max(abs(normal_cdf(x) - 0.5 * (1 + math.erf(x / math.sqrt(2)))) for x in xs)
    assert worst <= 1e-12
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(-10.0) == pytest.approx(7.619853024160527e-24, rel=1e-12)


# --- SNR family -----------------------------------------------------------------


def test_snr_no_factor_toy():
    mu = np.zeros(100)
    mu[0] = 10.0
    rep = snr_report(_sym_spec(mu, np.zeros((100, 3)), 1.0))
    assert rep.snr == pytest.approx(100.0)
    assert rep.optimal_rate == pytest.approx(normal_cdf(-10.0), rel=1e-12)


def test_snr_unit_case():
    rep = snr_report(_sym_spec([1.0, 0.0, 0.0], np.zeros((3, 0)), 1.0))
    assert (rep.s_quantity, rep.snr_bar, rep.snr) == pytest.approx((4.0, 4.0, 1.0))


@pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
def test_snr_matches_woodbury(t):
    spec = toy_spec(t, d=100, r=3, seed=0)
    mu, B = spec.centroids[0], spec.loading  # B already carries sqrt(t)
    # (I + B B^T)^{-1} = I - B (I_r + B^T B)^{-1} B^T
    inner = np.linalg.solve(np.eye(3) + B.T @ B, B.T @ mu)
    woodbury = mu @ mu - (B.T @ mu) @ inner
    assert snr_report(spec).snr == pytest.approx(woodbury, rel=1e-8)


def test_snr_solve_residual():
    spec = toy_spec(7.0, d=50, r=3, seed=1)
    mu = spec.centroids[0]
    z = solve_covariance(spec, mu)
    assert np.linalg.norm(spec.covariance() @ z - mu) <= 1e-8 * np.linalg.norm(mu)


def test_snr_edge_cases():
    rep = snr_report(_sym_spec([1.0, 0.0], np.zeros((2, 0)), 0.0))
    assert rep.snr_bar == math.inf and rep.snr == math.inf
    theta = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    rep = snr_report(FactorMixtureSpec(theta, np.zeros((2, 1)), 1.0, np.full(3, 1 / 3)))
    assert rep.snr is None and rep.optimal_rate is None


def test_s_quantity_ordering_and_equality_without_factors():
    rng = np.random.default_rng(3)
    for _ in range(50):
        K, d, r = int(rng.integers(2, 6)), int(rng.integers(2, 30)), int(rng.integers(0, 4))
        theta = rng.standard_normal((K, d))
        spec = FactorMixtureSpec(theta - theta.mean(axis=0), rng.standard_normal((d, r)),
                                 float(rng.uniform(0.1, 2)), np.full(K, 1 / K))
        rep = snr_report(spec)
        assert rep.s_quantity <= rep.snr_bar
        flat = FactorMixtureSpec(spec.centroids, np.zeros((d, r)), spec.sigma, spec.weights)
        rep0 = snr_report(flat)
        assert rep0.s_quantity == rep0.snr_bar


def test_snr_monotone_in_t():
    rates = [snr_report(toy_spec(t, seed=2)) for t in np.linspace(0, 100, 21)]
    snrs = [r.snr for r in rates]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(snrs, snrs[1:]))
    assert all(b.optimal_rate >= a.optimal_rate for a, b in zip(rates, rates[1:]))


# --- Bayes rule -----------------------------------------------------------------


def test_bayes_labels_on_centroids():
    spec = toy_spec(1.0, d=20, seed=0)
    data = Dataset(np.vstack([spec.centroids[0], spec.centroids[1]]))
    assert optimal_bayes_labels(data, spec).tolist() == [0, 1]


def test_bayes_rate_at_t0_monte_carlo():
    spec = toy_spec(0.0, d=100, seed=0)
    data = generate(spec, 50000, seed=1)
    assert mislabeling(optimal_bayes_labels(data, spec), data.labels, 2) <= 0.005


def test_bayes_rejects_non_symmetric():
    theta = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    spec = FactorMixtureSpec(theta, np.zeros((2, 1)), 1.0, np.full(3, 1 / 3))
    with pytest.raises(ValidationError):
        optimal_bayes_labels(Dataset(np.ones((2, 2))), spec)


# --- assumption diagnostics -----------------------------------------------------


def test_orthogonal_construction():
    d, r = 16, 2
    Q = np.linalg.qr(np.random.default_rng(4).standard_normal((d, d)))[0]
    B = Q[:, :r] * math.sqrt(d)
    mu = Q[:, r] * 0.5
    spec = _sym_spec(mu, B, 0.1)
    rep = assumption_report(spec, k=1)
    assert rep.u_top_m_norm <= 1e-8
    assert rep.pervasiveness_ratio_lo == pytest.approx(1.0)
    assert rep.pervasiveness_ratio_hi == pytest.approx(1.0)
    assert rep.sigma_min_B <= rep.sigma_max_B
    assert rep.perpendicularity_ok and rep.weak_factor_ok


def test_single_cluster_flags_rank_zero_mean():
    spec = FactorMixtureSpec(np.zeros((1, 5)), np.eye(5)[:, :2], 0.5, np.ones(1))
    rep = assumption_report(spec, k=1)
    assert rep.mean_rank_zero and rep.mean_matrix_norm == 0.0


def test_r0_is_degenerate():
    spec = _sym_spec([1.0, 0.0, 0.0], np.zeros((3, 0)), 1.0)
    rep = assumption_report(spec, k=1)
    assert rep.factor_degenerate and rep.sigma_min_B == 0.0 and rep.sigma_max_B == 0.0


def test_u_top_m_bound_range():
    rng = np.random.default_rng(5)
    for _ in range(20):
        d, r, K = 30, int(rng.integers(1, 4)), int(rng.integers(2, 5))
        theta = rng.standard_normal((K, d))
        spec = FactorMixtureSpec(theta - theta.mean(axis=0), rng.standard_normal((d, r)), 0.3, np.full(K, 1 / K))
        k = K - 1
        rep = assumption_report(spec, k=k)
        assert 0 <= rep.u_top_m_norm <= math.sqrt(min(r, k)) * (1 + 1e-8)


def test_grassmann_bound_monte_carlo():
    n, d, r, K = 1000, 400, 3, 5
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        theta = rng.standard_normal((K, d)) / math.sqrt(d)
        spec = FactorMixtureSpec(theta - theta.mean(axis=0), rng.standard_normal((d, r)), 0.1, np.full(K, 1 / K))
        hits += assumption_report(spec, k=K - 1, n=n).u_top_m_norm <= grassmann_bound(r, n, d)
    assert hits >= 0.95 * 50


def test_thresholds_use_exposed_constant():
    spec = _sym_spec([1.0] + [0.0] * 8, np.eye(9)[:, 1:3] * 3, 0.01)
    rep = assumption_report(spec, k=1, n=100, perp_const=0.05)
    assert rep.perpendicularity_threshold == pytest.approx(min(3 * max(0.01, 1 / math.sqrt(math.log(100))), 0.05))
    assert rep.weak_factor_threshold == pytest.approx(3 * (1.0 + 0.01**2))


# --- spectral conditions --------------------------------------------------------


def test_spectral_conditions_plug_in():
    spec = _sym_spec([1.0, 0.0], np.zeros((2, 0)), 1.0)
    rep = spectral_conditions(spec, np.array([0, 1] * 1), 1.0, n=2, d=2, k=1)
    assert rep.beta == 1.0
    assert rep.psi == pytest.approx(0.5)


def test_spectral_conditions_sigma_k_matches_gram_oracle():
    rng = np.random.default_rng(6)
    theta = rng.standard_normal((3, 10))
    spec = FactorMixtureSpec(theta - theta.mean(axis=0), np.zeros((10, 0)), 1.0, np.full(3, 1 / 3), centered=True)
    y = rng.integers(0, 3, 60)
    n, d, k = 60, 10, 2
    rep = spectral_conditions(spec, y, 1.0, n, d, k)
    stacked = spec.centroids[y]
    ev = np.sort(np.linalg.eigvalsh(stacked.T @ stacked))[::-1]
    oracle = math.sqrt(ev[k - 1]) / (math.sqrt(n) + math.sqrt(d))
    assert rep.rho == pytest.approx(oracle, rel=1e-8)


def test_spectral_conditions_empty_cluster():
    spec = _sym_spec([1.0, 0.0], np.zeros((2, 0)), 1.0)
    rep = spectral_conditions(spec, np.zeros(5, dtype=int), 1.0, n=5, d=2, k=1)
    assert rep.beta == 0.0 and math.isnan(rep.psi)


def test_spectral_conditions_errors():
    spec = _sym_spec([1.0, 0.0], np.zeros((2, 0)), 1.0)
    with pytest.raises(ValidationError):
        spectral_conditions(spec, np.array([], dtype=int), 1.0, 1, 2, 1)
    with pytest.raises(ValidationError):
        spectral_conditions(spec, np.array([0, 1]), 0.0, 2, 2, 1)


# --- scree ----------------------------------------------------------------------


def test_scree_scaled_identity_rows():
    X = np.diag([3.0, 2.0, 1.0])
    data = Dataset(np.vstack([X, -X]))
    vals = scree(data)
    assert np.allclose(vals, np.var(data.X, axis=0)[np.argsort(-np.var(data.X, axis=0))])


def test_scree_trace_identity():
    X = np.random.default_rng(7).standard_normal((40, 6)) * np.arange(1, 7)
    vals = scree(Dataset(X))
    assert vals.sum() == pytest.approx(np.trace(np.cov(X, rowvar=False, bias=True)), rel=1e-8)
    assert np.all(np.diff(vals) <= 0)
