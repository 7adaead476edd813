import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfmimo.errors import DomainError, ValidationError
from lfmimo.numerics import SeedStream, complex_gaussian, herm, qr_positive
from lfmimo.statistics import _entrywise_stats
from lfmimo.statistics import (
    cross_term_norms,
    family_z,
    gap_vs_empirical,
    second_order,
    second_order_sum,
    singular_value_bound,
    verify_lemma2,
    verify_lemma4,
)


def _subspace(rng, M, N):
    return qr_positive(complex_gaussian(rng, (M, N)))[0]


def test_second_order_zero_gamma(rng):
    Hq = _subspace(rng, 8, 2)
    assert np.allclose(second_order(Hq, 0.0).Rko, 8 * Hq @ herm(Hq), atol=1e-14)


def test_second_order_max_gamma_is_scaled_identity(rng):
    # M=8, N=2, gamma=0.75: first coefficient vanishes, MN gamma/(M-N) = 2
    R = second_order(_subspace(rng, 8, 2), 0.75).Rko
    assert np.allclose(R, 2.0 * np.eye(8), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 4), extra=st.integers(1, 12), frac=st.floats(0.0, 1.0))
def test_second_order_trace_and_psd(seed, N, extra, frac):
    rng = np.random.default_rng(seed)
    M = N + extra
    gamma = frac * (M - N) / M
    R = second_order(_subspace(rng, M, N), gamma).Rko
    assert abs(np.trace(R).real - M * N) <= 1e-9 * M * N
    assert np.allclose(R, herm(R), atol=1e-13)
    assert np.linalg.eigvalsh(R).min() >= -1e-10


def test_second_order_domain(rng):
    with pytest.raises(DomainError):
        second_order(_subspace(rng, 8, 2), 0.9)


def test_second_order_sum_over_users(rng):
    Hq = np.stack([_subspace(rng, 8, 2) for _ in range(4)])
    total = second_order_sum(Hq, 0.3)
    assert np.allclose(total, sum(second_order(h, 0.3).Rko for h in Hq))
    assert np.trace(total).real == pytest.approx(4 * 16)


def test_gap_unlimited_feedback_proxy_is_small():
    gap = gap_vs_empirical(8, 2, 4, 2, 10_000, SeedStream(50), codebook_contains_channel=True)
    assert gap <= 0.05


def test_gap_requires_trials():
    with pytest.raises(ValidationError):
        gap_vs_empirical(8, 2, 4, 4, 99, SeedStream(0))


def test_gap_small_at_moderate_trials():
    assert gap_vs_empirical(8, 2, 4, 6, 2000, SeedStream(51)) < 0.1


def test_lemma2_equal_lambda():
    rep = verify_lemma2(2, 10_000, SeedStream(60))
    assert rep.passed and rep.max_z <= 3.0


def test_lemma2_degenerate_lambda():
    rep = verify_lemma2(2, 10_000, SeedStream(61), lam=[2.0, 0.0])
    assert rep.passed


def test_lemma2_random_lambda():
    lam = np.random.default_rng(62).uniform(0.1, 3.0, 3)
    assert verify_lemma2(3, 10_000, SeedStream(62), lam=lam).passed


def test_lemma2_minimum_trials():
    with pytest.raises(ValidationError):
        verify_lemma2(2, 9_999, SeedStream(0))


def test_lemma4_identity_case():
    rep = verify_lemma4(8, 2, np.full((2, 8), 1 / 8), 10_000, SeedStream(70), X=np.eye(8))
    assert rep.passed


def test_lemma4_diagonal_x():
    X = np.diag(np.arange(1.0, 9.0))
    Theta = np.random.default_rng(71).uniform(0, 1, (2, 8))
    assert verify_lemma4(8, 2, Theta, 10_000, SeedStream(71), X=X).passed


def test_lemma4_random_x():
    Theta = np.random.default_rng(72).uniform(0, 1, (3, 6))
    assert verify_lemma4(6, 3, Theta, 10_000, SeedStream(72)).passed


def test_lemma4_rejects_bad_theta():
    with pytest.raises(ValidationError):
        verify_lemma4(8, 2, -np.ones((2, 8)), 10_000, SeedStream(0))


def test_report_row():
    row = verify_lemma2(2, 10_000, SeedStream(63)).as_row()
    assert set(row) == {"check", "trials", "max_z", "n_tests", "z", "threshold", "passed"}
    # two 2x2 Hermitian averages: 3 real + 1 imaginary quantities each
    assert row["n_tests"] == 8 and row["z"] <= row["max_z"]


def test_family_z_single_check_is_identity():
    assert family_z(2.7, 1) == pytest.approx(2.7, rel=1e-12)
    assert family_z(math.inf, 5) == math.inf


def test_family_z_matches_sidak_oracle():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    z, n = mpmath.mpf("3.15"), 64
    p_one = mpmath.erfc(z / mpmath.sqrt(2))
    p_family = 1 - (1 - p_one) ** n
    expected = mpmath.sqrt(2) * mpmath.erfinv(1 - p_family)
    assert family_z(3.15, 64) == pytest.approx(float(expected), rel=1e-9)


def test_family_z_decreases_with_family_size():
    levels = [family_z(3.0, n) for n in (1, 4, 16, 64)]
    assert all(a > b for a, b in zip(levels, levels[1:]))


def test_cross_term_consistent_with_zero():
    # the cross block has zero mean for every B; its sample norm is pure noise
    for B in (4, 8):
        norm, se = cross_term_norms(8, 2, B, 2000, SeedStream(80, 0, (B,)))
        assert norm <= 3.0 * se


@pytest.mark.xfail(strict=True, reason="cross block has zero mean at every B; its sampled norm does not shrink with B")
def test_cross_term_shrinks_with_B():
    est = [cross_term_norms(8, 2, B, 2000, SeedStream(81, 0, (B,))) for B in (4, 8, 12)]
    for (a, sa), (b, sb) in zip(est, est[1:]):
        assert a - b > 3.0 * math.hypot(sa, sb)


def test_singular_value_bound():
    res = singular_value_bound(8, 2, 6, 2000, SeedStream(90))
    assert res["mean_omega"] <= res["bound"] + 3.0 * res["stderr"]
    assert 0 < res["gamma"] < 1


def test_identity_check_still_detects_small_bias():
    # one biased entry out of a 4x4 Hermitian family must still fail after the correction
    rng = np.random.default_rng(64)
    Y = complex_gaussian(rng, (20_000, 4, 4), variance=0.25)
    samples = herm(Y) @ Y
    target = np.eye(4, dtype=complex)
    z_ok, n = _entrywise_stats(samples, target)
    assert family_z(z_ok, n) <= 3.0
    biased = target.copy()
    biased[1, 1] += 0.05
    z_bad, n_bad = _entrywise_stats(samples, biased)
    assert n_bad == n == 16 and family_z(z_bad, n_bad) > 3.0
