import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from coopbandits.numerics import (RandomStream, eig_sym, gaussian_sample, inv_norm_cdf,
                                  norm_cdf)


def check_spectrum(a, spec):
    lam, U = spec.eigenvalues, spec.eigenvectors
    n = a.shape[0]
    for p in range(n):
        resid = np.max(np.abs(a @ U[:, p] - lam[p] * U[:, p]))
        assert resid <= 1e-9 * max(1.0, abs(lam[p]))
    assert np.max(np.abs(U.T @ U - np.eye(n))) <= 1e-9
    assert np.all(np.diff(lam) <= 0)


def test_identity():
    spec = eig_sym(np.eye(3))
    np.testing.assert_allclose(spec.eigenvalues, [1, 1, 1])
    check_spectrum(np.eye(3), spec)


def test_rank_one_projector():
    a = np.ones((4, 4)) / 4
    spec = eig_sym(a)
    np.testing.assert_allclose(spec.eigenvalues, [1, 0, 0, 0], atol=1e-14)
    np.testing.assert_allclose(spec.eigenvectors[:, 0], [0.5] * 4, atol=1e-14)


def test_path3_consensus_matrix():
    # P = I - L/2 for the 3-node path; L has spectrum {0, 1, 3}
    L = np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=float)
    spec = eig_sym(np.eye(3) - 0.5 * L)
    np.testing.assert_allclose(spec.eigenvalues, [1, 0.5, -0.5], atol=1e-14)


def test_rejects_bad_input():
    with pytest.raises(ValueError, match="square"):
        eig_sym(np.ones((2, 3)))
    with pytest.raises(ValueError, match="symmetric"):
        eig_sym(np.array([[1.0, 2.0], [2.1, 1.0]]))


def test_sign_convention():
    spec = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
    U = spec.eigenvectors
    for j in range(2):
        assert U[np.argmax(np.abs(U[:, j])), j] > 0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
def test_random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=(n, n))
    a = (b + b.T) / 2
    spec = eig_sym(a)
    check_spectrum(a, spec)
    recon = spec.eigenvectors @ np.diag(spec.eigenvalues) @ spec.eigenvectors.T
    assert np.max(np.abs(recon - a)) <= 1e-8
    np.testing.assert_allclose(spec.eigenvalues, np.linalg.eigvalsh(a)[::-1], atol=1e-9)


def test_repeated_eigenvalues():
    # complete graph consensus matrix with a 3-fold eigenvalue
    a = np.eye(4) - 0.25 * (4 * np.eye(4) - np.ones((4, 4)))
    spec = eig_sym(a)
    check_spectrum(a, spec)


def bisect_quantile(p):
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2)) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_inv_norm_cdf_examples():
    assert inv_norm_cdf(0.5) == 0.0
    oracle = bisect_quantile(0.975)
    assert abs(oracle - 1.959964) < 1e-6
    assert abs(inv_norm_cdf(0.975) - oracle) < 1e-9


@pytest.mark.parametrize("p", [1e-6, 0.01, 0.5, 0.99, 1 - 1e-6])
def test_inv_norm_cdf_round_trip(p):
    assert abs(norm_cdf(inv_norm_cdf(p)) - p) <= 1e-9


@given(st.floats(1e-300, 1 - 1e-16, exclude_min=True, exclude_max=True))
def test_inv_norm_cdf_accuracy(p):
    x = inv_norm_cdf(p)
    assert abs(norm_cdf(x) - p) <= 1e-9


@pytest.mark.parametrize("p", [0.1, 0.3, 0.025, 0.49, 1e-5, 1e-9])
def test_inv_norm_cdf_antisymmetry(p):
    # snap p so that p and 1 - p are both exact doubles
    p = 1.0 - (1.0 - p)
    assert abs(inv_norm_cdf(p) + inv_norm_cdf(1 - p)) <= 1e-12


def test_inv_norm_cdf_matches_bisection_grid():
    for p in np.linspace(0.001, 0.999, 57):
        assert abs(inv_norm_cdf(p) - bisect_quantile(p)) < 1e-9


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_inv_norm_cdf_domain(p):
    with pytest.raises(ValueError):
        inv_norm_cdf(p)


def test_gaussian_sample_zero_sd():
    assert gaussian_sample(RandomStream(3), 75, 0) == 75


def test_gaussian_sample_negative_sd():
    with pytest.raises(ValueError):
        gaussian_sample(RandomStream(3), 0, -1)


def test_gaussian_moments():
    x = RandomStream(11).normal(0.0, 1.0, 10**6)
    assert abs(x.mean()) <= 0.005
    assert abs(x.var() - 1.0) <= 0.01


def test_gaussian_ks():
    s = RandomStream(5)
    draws = np.array([gaussian_sample(s, 0.0, 1.0) for _ in range(10**5)])
    assert stats.kstest(draws, "norm").pvalue > 0.001


def test_stream_determinism():
    a, b = RandomStream(42), RandomStream(42)
    assert [gaussian_sample(a, 1, 2) for _ in range(20)] == [gaussian_sample(b, 1, 2) for _ in range(20)]
    assert not np.array_equal(RandomStream(1).normal(size=5), RandomStream(2).normal(size=5))
