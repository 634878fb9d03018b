import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgpbo.errors import FitError, InitializationError, NotPositiveDefiniteError
from qgpbo.featuremap import Family, FeatureMapSpec
from qgpbo.gp import (
    NM_BUDGET,
    QuantumKernel,
    RBFKernel,
    dumps_summary,
    fit,
    log_marginal_likelihood,
    model_summary,
    predict,
    train_mll,
    train_rbf,
)
from qgpbo.qkernel import KernelMode, QuantumKernelConfig

SPEC = FeatureMapSpec(Family.CHEBYSHEV_HWE, 3, 2, 1)


def qkernel(mode=KernelMode.EXACT, shots=None, seed=0):
    theta = np.random.default_rng(seed).uniform(0, 2 * np.pi, SPEC.num_params)
    return QuantumKernel(QuantumKernelConfig(SPEC, theta, mode, shots, master_seed=seed))


def dense_reference(K, Ks, Kss, y, noise):
    A = K + noise * np.eye(len(y))
    Ainv = np.linalg.inv(A)
    _, logdet = np.linalg.slogdet(A)
    return (
        Ks.T @ Ainv @ y,
        Kss - Ks.T @ Ainv @ Ks,
        -0.5 * y @ Ainv @ y - 0.5 * logdet - 0.5 * len(y) * np.log(2 * np.pi),
    )


def test_single_point_fit():
    model = fit(qkernel(), np.array([[0.2]]), np.array([0.7]), 0.0)
    assert model.chol_factor[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert model.alpha[0] == pytest.approx(0.7, abs=1e-9)


def test_log_likelihood_of_zero_label():
    model = fit(qkernel(), np.array([[0.2]]), np.array([0.0]), 0.0)
    assert log_marginal_likelihood(model) == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-9)
    assert log_marginal_likelihood(model) == pytest.approx(-0.9189385, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.floats(1e-3, 0.5), st.integers(0, 2**32 - 1))
def test_rbf_posterior_matches_dense_inverse(n, m, noise, seed):
    rng = np.random.default_rng(seed)
    X, Xs, y = rng.uniform(-1, 1, (n, 2)), rng.uniform(-1, 1, (m, 2)), rng.normal(size=n)
    kern = RBFKernel(float(rng.uniform(0.3, 2)), float(rng.uniform(0.5, 2)))
    model = fit(kern, X, y, noise)
    post = predict(model, Xs)
    mu, cov, lml = dense_reference(kern(X), kern(X, Xs), kern(Xs), y, noise + model.jitter)
    np.testing.assert_allclose(post.mean, mu, atol=1e-8)
    np.testing.assert_allclose(post.cov, cov, atol=1e-8)
    assert log_marginal_likelihood(model) == pytest.approx(lml, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_quantum_posterior_matches_dense_inverse(n, seed):
    rng = np.random.default_rng(seed)
    X, Xs, y = rng.uniform(-1, 1, (n, 1)), rng.uniform(-1, 1, (3, 1)), rng.normal(size=n)
    kern = qkernel(seed=seed % 97)
    model = fit(kern, X, y, 0.05)
    post = predict(model, Xs)
    mu, cov, lml = dense_reference(kern.train_matrix(X)[0], kern.cross_matrix(X, Xs), kern.test_matrix(Xs),
                                   y, 0.05 + model.jitter)
    np.testing.assert_allclose(post.mean, mu, atol=1e-8)
    np.testing.assert_allclose(post.cov, cov, atol=1e-8)
    assert log_marginal_likelihood(model) == pytest.approx(lml, abs=1e-8)


def test_marginal_std_matches_full_covariance():
    rng = np.random.default_rng(1)
    X, y = rng.uniform(-1, 1, (8, 1)), rng.normal(size=8)
    model = fit(qkernel(), X, y, 0.01)
    Xs = np.linspace(-1, 1, 11)[:, None]
    np.testing.assert_allclose(predict(model, Xs, full_cov=False).std, predict(model, Xs).std, atol=1e-10)


def test_prior_recovered_far_from_data():
    kern = RBFKernel(0.05, 1.0)
    model = fit(kern, np.array([[-1.0], [-0.9]]), np.array([0.5, -0.3]), 0.01)
    post = predict(model, np.array([[1.0]]))
    assert post.mean[0] == pytest.approx(0.0, abs=1e-10)
    assert post.std[0] ** 2 == pytest.approx(1.0, abs=1e-10)


def test_predict_dimension_mismatch():
    model = fit(RBFKernel(), np.zeros((2, 2)) + [[0, 0], [1, 1]], np.array([0.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        predict(model, np.zeros((1, 3)))


def test_fit_validates_shapes():
    with pytest.raises(ValueError):
        fit(RBFKernel(), np.zeros((3, 1)), np.zeros(2), 0.1)
    with pytest.raises(ValueError):
        fit(RBFKernel(), np.zeros((1, 1)), np.zeros(1), -1.0)


class _Indefinite:
    def train_matrix(self, X):
        return np.array([[1.0, 0.0], [0.0, -1.0]]), 0.0, None


def test_cholesky_failure_reports_min_eigenvalue():
    with pytest.raises(NotPositiveDefiniteError) as info:
        fit(_Indefinite(), np.zeros((2, 1)), np.zeros(2), 0.0)
    assert info.value.min_eigenvalue == pytest.approx(-1.0, abs=1e-3)


def test_jitter_escalates_for_singular_matrix():
    # duplicated points make the noiseless Gram exactly singular
    X = np.array([[0.3], [0.3], [0.3]])
    model = fit(RBFKernel(0.5, 1.0), X, np.array([1.0, 1.0, 1.0]), 0.0)
    assert model.jitter >= 1e-10


def sampled_model():
    rng = np.random.default_rng(3)
    X = np.sort(rng.uniform(-1, 1, 15))[:, None]
    y = np.sin(3 * X[:, 0])
    return X, y


def test_sampled_posterior_is_valid_and_close_to_exact():
    X, y = sampled_model()
    Xs = np.linspace(-1, 1, 40)[:, None]
    exact = predict(fit(qkernel(), X, y, 0.01), Xs)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = fit(qkernel(KernelMode.SAMPLED, 10_000), X, y, 0.01)
        post = predict(model, Xs)
    assert np.all(np.isfinite(post.std))
    assert np.linalg.eigvalsh(post.cov)[0] > -1e-8
    assert np.max(np.abs(post.mean - exact.mean)) < 0.2
    assert model.K_raw is not None


def test_sampled_blocks_agree_with_full_covariance_path():
    X, y = sampled_model()
    model = fit(qkernel(KernelMode.SAMPLED, 10_000), X, y, 0.01)
    Xs = np.linspace(-1, 1, 7)[:, None]
    a, b = predict(model, Xs), predict(model, Xs, full_cov=False)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
    np.testing.assert_allclose(a.std, b.std, atol=1e-12)


# -- training ----------------------------------------------------------------


def regression_data(seed=0):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(-1, 1, 12))[:, None]
    return X, np.sin(2.5 * X[:, 0]) + 0.05 * rng.normal(size=12)


def test_train_mll_history_is_best_so_far():
    X, y = regression_data()
    theta, hist = train_mll(SPEC, X, y, 0.01, budget=40, seed=1)
    assert theta.shape == (SPEC.num_params,)
    assert 1 <= len(hist) <= 40
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    model = fit(QuantumKernel(QuantumKernelConfig(SPEC, theta)), X, y, 0.01)
    assert -log_marginal_likelihood(model) == pytest.approx(hist[-1], abs=1e-9)


def test_train_mll_default_budget():
    X, y = regression_data()
    _, hist = train_mll(SPEC, X, y, 0.01, seed=2)
    assert len(hist) <= NM_BUDGET
    assert hist[-1] < hist[0]


def test_train_mll_is_deterministic():
    X, y = regression_data()
    a = train_mll(SPEC, X, y, 0.01, budget=25, seed=3)
    b = train_mll(SPEC, X, y, 0.01, budget=25, seed=3)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]


def test_train_mll_with_noise():
    X, y = regression_data()
    theta, hist, noise = train_mll(SPEC, X, y, 0.1, budget=60, seed=0, train_noise=True)
    assert noise > 0 and len(hist) <= 60


def test_train_mll_rejects_non_finite_start():
    X, y = regression_data()
    y[0] = np.nan
    with pytest.raises(InitializationError):
        train_mll(SPEC, X, y, 0.01, budget=5)


def test_train_rbf_fits_smooth_function():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (20, 1))
    y = np.sin(3 * X[:, 0])
    kern = train_rbf(X, y, 1e-4, seed=0)
    assert 0.1 < kern.lengthscale < 3
    Xs = np.linspace(-0.9, 0.9, 9)[:, None]
    pred = predict(fit(kern, X, y, 1e-4), Xs).mean
    assert np.max(np.abs(pred - np.sin(3 * Xs[:, 0]))) < 0.05


def test_train_rbf_degenerate_inputs():
    with pytest.raises(FitError):
        train_rbf(np.ones((4, 1)), np.arange(4.0), 0.1)
    with pytest.raises(FitError):
        train_rbf(np.zeros((1, 1)), np.zeros(1), 0.1)


def test_summary_serializes():
    X, y = regression_data()
    model = fit(qkernel(), X, y, 0.01)
    text = dumps_summary(model_summary(model, spec=SPEC))
    assert '"n_train": 12' in text and '"feature_map"' in text
