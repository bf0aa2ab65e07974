"""
Segmentation scores, Monte Carlo summaries, PSRF and the spectrum utility
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.analysis.metrics import (
    apply_permutation,
    best_permutation,
    chain_diagnostics,
    confusion_matrix,
    monte_carlo_stats,
    psrf,
    score_segmentation,
    spectrum_curve,
)
from src.errors import LabelRangeError, ParameterDomainError, ShapeMismatchError


def test_identical_masks_score_perfectly(rng):
    truth = rng.integers(0, 3, (32, 32))
    score = score_segmentation(truth, truth, 3)
    assert score.dsc == [1.0, 1.0, 1.0]
    assert score.error == 0.0
    assert score.permutation == (0, 1, 2)


def test_half_split_against_a_single_class():
    n = 16
    pred = np.zeros((n, n), dtype=int)
    pred[:, n // 2:] = 1
    score = score_segmentation(pred, np.zeros((n, n), dtype=int), 2)
    assert score.dsc[0] == pytest.approx(2 / 3)
    assert score.error == pytest.approx(50.0)
    assert score.confusion[0] == {"fn": n * n // 2, "fp": 0, "tn": 0, "tp": n * n // 2}


def test_swapped_labels_are_realigned():
    truth = np.zeros((8, 8), dtype=int)
    truth[:, 4:] = 1
    score = score_segmentation(1 - truth, truth, 2)
    assert score.permutation == (1, 0)
    assert score.dsc == [1.0, 1.0] and score.error == 0.0
    np.testing.assert_array_equal(apply_permutation(1 - truth, score.permutation), truth)


def test_record_is_one_based():
    truth = np.zeros((4, 4), dtype=int)
    truth[2:] = 1
    record = score_segmentation(truth, truth, 2).to_record()
    assert record["permutation"] == [1, 2]
    assert set(record["dsc"]) == {"1", "2"}
    assert record["k"] == 2


def test_mask_checks():
    with pytest.raises(ShapeMismatchError):
        score_segmentation(np.zeros((4, 4), dtype=int), np.zeros((4, 8), dtype=int), 2)
    with pytest.raises(LabelRangeError):
        score_segmentation(np.full((4, 4), 2), np.zeros((4, 4), dtype=int), 2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), perm=st.permutations(range(3)))
def test_scores_are_invariant_under_joint_relabelling(seed, perm):
    gen = np.random.default_rng(seed)
    truth = gen.integers(0, 3, (12, 12))
    pred = np.where(gen.random((12, 12)) < 0.3, gen.integers(0, 3, (12, 12)), truth)
    relabel = np.asarray(perm)
    base = score_segmentation(pred, truth, 3)
    moved = score_segmentation(relabel[pred], relabel[truth], 3)
    assert moved.error == pytest.approx(base.error)
    for c in range(3):
        assert moved.dsc[relabel[c]] == pytest.approx(base.dsc[c])


@pytest.mark.parametrize("k", [2, 3, 4])
def test_permutation_search_is_exhaustively_optimal(rng, k):
    truth = rng.integers(0, k, (20, 20))
    pred = rng.integers(0, k, (20, 20))
    conf = confusion_matrix(pred, truth, k)
    best = max(sum(conf[p[c], c] for c in range(k)) for p in itertools.permutations(range(k)))
    chosen = best_permutation(conf)
    assert sum(conf[chosen[c], c] for c in range(k)) == best
    score = score_segmentation(pred, truth, k)
    assert score.error == pytest.approx(100.0 * (400 - best) / 400)


def test_hungarian_fallback_agrees_with_exhaustive_search(rng):
    truth = rng.integers(0, 4, (20, 20))
    pred = np.where(rng.random((20, 20)) < 0.2, rng.integers(0, 4, (20, 20)), (truth + 1) % 4)
    conf = confusion_matrix(pred, truth, 4)
    exhaustive = best_permutation(conf, max_k=8)
    assignment = best_permutation(conf, max_k=2)
    hits = lambda p: sum(conf[p[c], c] for c in range(4))
    assert hits(assignment) == hits(exhaustive)


def test_monte_carlo_stats_hand_values():
    stats = monte_carlo_stats([0.0, 2.0], 1.0)
    assert stats.mean == pytest.approx(1.0)
    assert stats.std == pytest.approx(np.sqrt(2))
    assert stats.rmse == pytest.approx(1.0)
    exact = monte_carlo_stats([0.3, 0.3, 0.3], 0.3)
    assert exact.std == 0.0 and exact.rmse == 0.0
    with pytest.raises(ValueError):
        monte_carlo_stats([], 0.0)


def test_psrf_of_white_noise_chains(rng):
    assert psrf(rng.standard_normal((2, 1000))) < 1.05


def test_psrf_of_separated_chains(rng):
    chains = np.stack([rng.normal(0, 0.01, 100), rng.normal(100, 0.01, 100)])
    assert psrf(chains) > 1.2


def test_psrf_of_identical_copies_tends_to_one(rng):
    chain = rng.standard_normal(2000)
    short = psrf(np.stack([chain[:50]] * 3))
    long = psrf(np.stack([chain] * 3))
    assert short < long <= 1.0
    assert long == pytest.approx(1.0, abs=1e-3)


def test_psrf_preconditions(rng):
    with pytest.raises(ValueError):
        psrf(rng.standard_normal((1, 100)))
    with pytest.raises(ValueError):
        psrf(rng.standard_normal((3, 5)))


def test_chain_diagnostics(rng):
    diag = chain_diagnostics({"theta1_1": rng.standard_normal((3, 200)), "theta2_1": rng.standard_normal((3, 200))})
    assert diag.n_chains == 3 and diag.length == 200
    assert diag.converged()
    with pytest.raises(ShapeMismatchError):
        chain_diagnostics({"a": np.zeros((2, 20)), "b": np.zeros((3, 20))})


def test_spectrum_apex_and_symmetry():
    h, d = spectrum_curve(0.5, -0.02, h=np.array([0.5, 0.4, 0.6]))
    assert d[0] == pytest.approx(2.0)
    assert d[1] == pytest.approx(d[2])
    h, d = spectrum_curve(0.5, -0.02)
    assert h[np.argmax(d)] == pytest.approx(0.5)
    assert d.min() == pytest.approx(0.0, abs=1e-12)


def test_spectrum_cubic_forms():
    h = np.array([0.4, 0.6])
    _, plain = spectrum_curve(0.5, -0.02, 0.01, form="none", h=h)
    _, corrected = spectrum_curve(0.5, -0.02, 0.01, form="corrected", h=h)
    _, printed = spectrum_curve(0.5, -0.02, 0.01, form="printed", h=h)
    assert plain[0] == pytest.approx(plain[1])
    assert corrected[0] - plain[0] == pytest.approx(-(corrected[1] - plain[1]))
    assert not np.allclose(printed, corrected)


def test_spectrum_needs_negative_c2():
    with pytest.raises(ParameterDomainError):
        spectrum_curve(0.5, 0.0)
