"""
Covariance model, spectral weights, debiasing and the augmented likelihood
"""

import numpy as np
import pytest

from src.analysis.transform import LogLeaderPyramid
from src.analysis.whittle import (
    ClassMask,
    CovarianceModel,
    augmented_loglik,
    class_spectrum,
    cov_model,
    debias_weights,
    debiased_fourier,
    frequency_set,
    g1,
    g2,
    homogeneous_spectrum,
    lag_radius,
    lag_spectrum,
    leader_variance,
    marginal_leader_density,
    scale_spectra,
    spectral_weights,
)
from src.errors import EmptyClassError, ParameterDomainError


def _single_scale(grid):
    return LogLeaderPyramid(grids={1: grid}, offsets={1: 0.0}, j1=1, j2=1)


def test_cov_model_at_support_radius_keeps_only_g2():
    n_j = 64
    r_j = n_j // 4
    assert cov_model(0.08, 0.1, 2, r_j, n_j) == pytest.approx(0.1 * g2(r_j))
    assert cov_model(0.08, 0.1, 2, r_j, n_j, g2_form="nugget") == pytest.approx(0.1 * g2(r_j, "nugget"))


def test_cov_model_at_zero_lag():
    assert cov_model(0.08, 0.1, 2, 0, 64) == pytest.approx(0.08 * np.log(17))


def test_cov_model_worked_value():
    assert cov_model(0.08, 0.1, 2, 3, 64) == pytest.approx(0.08 * np.log(17 / 4), rel=1e-12)
    assert cov_model(0.08, 0.1, 2, 3, 64) == pytest.approx(0.11575, abs=1e-5)


def test_g_functions_are_nonnegative_with_finite_support():
    r = np.linspace(0, 40, 401)
    assert np.all(g1(r, 64) >= 0)
    assert np.all(g1(r[r >= 16], 64) == 0)
    for form in ("printed", "nugget"):
        assert np.all(g2(r, form) >= 0)
    assert g2(0.0, "nugget") == pytest.approx(1.0)
    assert np.all(g2(r[r >= 3], "nugget") == 0)


def test_covariance_model_rejects_nonpositive_theta():
    with pytest.raises(ParameterDomainError):
        CovarianceModel(0.0, 0.1, 1, 32)


def test_frequency_set_excludes_dc_and_respects_cutoff():
    freqs = frequency_set(16)
    assert freqs.shape == (80, 2)
    assert not np.any(np.all(freqs == 0, axis=1))
    assert np.abs(freqs).max() == 4
    assert len({tuple(m) for m in freqs}) == 80


def test_delta_kernel_has_flat_spectrum():
    delta = np.zeros((16, 16))
    delta[0, 0] = 1.0
    np.testing.assert_allclose(lag_spectrum(delta, frequency_set(16)), 1.0, atol=1e-14)


def test_spectral_weights_are_even_in_frequency():
    freqs = frequency_set(32)
    G1, G2 = spectral_weights(1, 32, freqs, "nugget")
    lookup = {tuple(m): (a, b) for m, a, b in zip(freqs, G1, G2)}
    for m, (a, b) in lookup.items():
        neg = lookup[(-m[0], -m[1])]
        assert a == pytest.approx(neg[0], abs=1e-12)
        assert b == pytest.approx(neg[1], abs=1e-12)


def test_spectral_weights_match_double_sum():
    """G1 on N_j = 16 equals the explicit lag sum"""
    n_j = 16
    freqs = frequency_set(n_j)
    G1, _ = spectral_weights(1, n_j, freqs, "nugget", eps=1e-8)
    kernel = g1(lag_radius(n_j), n_j)
    oracle = np.empty(len(freqs))
    for s, (m1, m2) in enumerate(freqs):
        total = 0.0
        for a in range(n_j):
            for b in range(n_j):
                total += kernel[a, b] * np.cos(2 * np.pi * (a * m1 + b * m2) / n_j)
        oracle[s] = max(total, 1e-8)
    np.testing.assert_allclose(G1, oracle, atol=1e-10)
    assert np.all(G1 > 0)


def test_full_mask_debias_weights():
    mask = ClassMask({1: np.zeros((16, 16), dtype=int)}, 1)
    freqs = frequency_set(16)
    G1, _ = spectral_weights(1, 16, freqs, "nugget")
    w = debias_weights(mask, 1, 0, freqs, G1)
    assert w.xi == pytest.approx(1 / 256)
    np.testing.assert_allclose(w.lag, 1.0)
    np.testing.assert_allclose(w.spectral, 256.0, rtol=1e-10)


def test_single_site_debias_weights():
    labels = np.ones((16, 16), dtype=int)
    labels[5, 7] = 0
    w = debias_weights(ClassMask({1: labels}, 2), 1, 0)
    assert w.lag[0, 0] == 1.0
    assert np.count_nonzero(w.lag) == 1


def test_debias_weights_match_quadruple_loop(rng):
    labels = rng.integers(0, 2, (16, 16))
    w = debias_weights(ClassMask({1: labels}, 2), 1, 1)
    T = (labels == 1).astype(int)
    count = np.zeros((16, 16), dtype=int)
    for n1 in range(16):
        for n2 in range(16):
            for u in range(16):
                for r in range(16):
                    count[n1, n2] += T[u, r] * T[(u + n1) % 16, (r + n2) % 16]
    np.testing.assert_array_equal(w.lag, count * (1.0 / T.sum()))


def test_empty_class_raises():
    mask = ClassMask({1: np.zeros((16, 16), dtype=int)}, 2)
    with pytest.raises(EmptyClassError, match="class 2"):
        debias_weights(mask, 1, 1)
    with pytest.raises(EmptyClassError):
        debiased_fourier(_single_scale(np.zeros((16, 16))), mask, 1, {1: frequency_set(16)})


def test_full_mask_fourier_is_scaled_fft(rng):
    grid = rng.standard_normal((32, 32))
    grid -= grid.mean()
    freqs = frequency_set(32)
    mask = ClassMask({1: np.zeros((32, 32), dtype=int)}, 1)
    x = debiased_fourier(_single_scale(grid), mask, 0, {1: freqs})[1]
    F = np.fft.fft2(grid)
    np.testing.assert_allclose(x, F[freqs[:, 0] % 32, freqs[:, 1] % 32] / 1024, atol=1e-12)


def test_constant_region_has_zero_coefficients(rng):
    grid = rng.standard_normal((32, 32))
    labels = np.zeros((32, 32), dtype=int)
    labels[:, 16:] = 1
    grid[:, 16:] = 3.5
    x = debiased_fourier(_single_scale(grid), ClassMask({1: labels}, 2), 1, {1: frequency_set(32)})[1]
    np.testing.assert_allclose(x, 0.0, atol=1e-12)


def test_half_plane_fourier_matches_naive_dft(rng):
    grid = rng.standard_normal((32, 32))
    labels = np.zeros((32, 32), dtype=int)
    labels[16:, :] = 1
    freqs = frequency_set(32)
    x = debiased_fourier(_single_scale(grid), ClassMask({1: labels}, 2), 0, {1: freqs})[1]

    T = labels == 0
    t = grid[T].mean()
    rows, cols = np.indices((32, 32))
    oracle = np.array([
        np.sum(T * (grid - t) * np.exp(-2j * np.pi * (rows * m1 + cols * m2) / 32)) / T.sum()
        for m1, m2 in freqs
    ])
    np.testing.assert_allclose(x, oracle, atol=1e-10)


def test_full_mask_reduces_to_homogeneous_path(ll_128):
    scales = scale_spectra(ll_128.sides())
    mask = ClassMask({j: np.zeros((n, n), dtype=int) for j, n in ll_128.sides().items()}, 1)
    debiased = class_spectrum(ll_128, mask, 0, scales)
    plain = homogeneous_spectrum(ll_128, scales)
    side = np.concatenate([np.full(len(sp.freqs), sp.n_j, dtype=float) for sp in scales.values()])
    np.testing.assert_allclose(debiased.x * side, plain.x, atol=1e-10)
    np.testing.assert_allclose(debiased.W / side ** 2, plain.W, atol=1e-10)


def test_augmented_loglik_worked_value():
    one = np.ones(1)
    assert augmented_loglik(np.array([1 + 0j]), np.array([0.5 + 0j]), 1.0, 1.0, one, one, one) == pytest.approx(-0.5)


def test_augmented_loglik_quadratic_terms_vanish(rng):
    x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    W, G1, G2 = rng.uniform(0.5, 2, (3, 6))
    at_x = augmented_loglik(x, x, 1.0, 2.0, G1, G2, W)
    assert at_x == pytest.approx(-6 * np.log(2.0) - np.sum(W / G2 * np.abs(x) ** 2) / 2.0)
    at_zero = augmented_loglik(x, np.zeros(6), 1.0, 2.0, G1, G2, W)
    assert at_zero == pytest.approx(-6 * np.log(2.0) - np.sum(W / G1 * np.abs(x) ** 2))


def test_augmented_loglik_quadratic_homogeneity_and_permutation(rng):
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    mu = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    W, G1, G2 = rng.uniform(0.5, 2, (3, 8))
    base = augmented_loglik(x, mu, 1.0, 1.0, G1, G2, W)
    assert augmented_loglik(2 * x, 2 * mu, 1.0, 1.0, G1, G2, W) == pytest.approx(4 * base)
    p = rng.permutation(8)
    assert augmented_loglik(x[p], mu[p], 1.0, 1.0, G1[p], G2[p], W[p]) == pytest.approx(base)


def test_marginal_density_at_zero_is_gaussian_mode():
    var = leader_variance(0.08, 0.1, 2)
    assert var == pytest.approx(0.1 + 0.08 * 2 * np.log(2))
    assert var == pytest.approx(0.21090, abs=1e-5)
    assert marginal_leader_density(0.0, 0.08, 0.1, 2) == pytest.approx(-0.5 * np.log(2 * np.pi * var))


def test_marginal_density_vectorises_over_classes(rng):
    ell = rng.standard_normal((4, 4))
    out = marginal_leader_density(ell, np.array([0.02, 0.2]), np.array([0.1, 0.1]), 1)
    assert out.shape == (2, 4, 4)
    np.testing.assert_allclose(out[1], marginal_leader_density(ell, 0.2, 0.1, 1))


def test_marginal_density_peaks_where_variance_equals_square():
    ell = 0.7
    theta2 = np.linspace(0.05, 2.0, 400)
    dens = marginal_leader_density(ell, np.full_like(theta2, 1e-6), theta2, 1)
    best = theta2[np.argmax(dens)]
    assert best == pytest.approx(ell ** 2, abs=0.01)
    below = dens[theta2 < ell ** 2]
    above = dens[theta2 > ell ** 2]
    assert np.all(np.diff(below) > 0) and np.all(np.diff(above) < 0)


def test_nonpositive_variance_is_a_domain_error():
    with pytest.raises(ParameterDomainError):
        leader_variance(1.0, 0.1, 3, form="cumulant")


def test_covariance_variance_form_uses_zero_lag():
    var = leader_variance(0.08, 0.1, 1, form="covariance", n_j=64, g2_form="nugget")
    assert var == pytest.approx(0.08 * np.log(17) + 0.1)
