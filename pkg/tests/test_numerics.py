import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfmimo import tolerances as tol
from lfmimo.errors import DomainError, NumericalError, ValidationError
from lfmimo.numerics import (
    SeedStream,
    complex_gaussian,
    gamma_fn,
    herm,
    herm_evd,
    is_semi_unitary,
    orthonormalize,
    qr_positive,
    random_unitary,
    solve_hpd,
)

# arbitrary-precision reference, 30 digits (mpmath.gamma(mpf(1)/12))
GAMMA_1_12 = 11.4994281860739906638856098524


def test_herm_evd_identity():
    U, lam = herm_evd(np.eye(4))
    assert np.allclose(lam, 1.0)
    assert is_semi_unitary(U)


def test_herm_evd_diagonal():
    _, lam = herm_evd(np.diag([3.0, 1.0]))
    assert sorted(lam) == pytest.approx([1.0, 3.0])


def test_herm_evd_matches_svd(rng):
    H = complex_gaussian(rng, (4, 2))
    U, lam = herm_evd(H @ herm(H))
    s = np.linalg.svd(H, compute_uv=False)
    assert np.allclose(np.sort(lam)[-2:], np.sort(s**2), rtol=1e-9)
    assert np.allclose(np.sort(lam)[:2], 0.0, atol=1e-9)
    A = H @ herm(H)
    assert np.linalg.norm(U @ np.diag(lam) @ herm(U) - A) <= 1e-9 * np.linalg.norm(A)


def test_herm_evd_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        herm_evd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_herm_evd_rejects_nan():
    with pytest.raises(NumericalError):
        herm_evd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_qr_positive_semi_unitary_input(rng):
    Q0 = random_unitary(rng, 6)[:, :3]
    Q, R = qr_positive(Q0)
    assert np.allclose(R, np.eye(3), atol=1e-12)
    assert np.allclose(Q, Q0, atol=1e-12)


def test_qr_positive_scaled_identity():
    Q, R = qr_positive(2.0 * np.eye(2))
    assert np.allclose(Q, np.eye(2))
    assert np.allclose(R, 2.0 * np.eye(2))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 9), extra=st.integers(0, 4))
def test_qr_positive_postconditions(seed, m, extra):
    rng = np.random.default_rng(seed)
    n = max(1, m - extra)
    A = complex_gaussian(rng, (m, n))
    Q, R = qr_positive(A)
    assert np.linalg.norm(Q @ R - A) <= 1e-10 * np.linalg.norm(A)
    assert np.max(np.abs(herm(Q) @ Q - np.eye(n))) <= tol.SEMI_UNITARY_TOL
    d = np.diag(R)
    assert np.all(d.imag == 0) and np.all(d.real >= 0)
    assert np.allclose(np.tril(R, -1), 0)


def test_qr_positive_batched_matches_single(rng):
    A = complex_gaussian(rng, (5, 8, 2))
    Q, R = qr_positive(A)
    for b in range(5):
        Qb, Rb = qr_positive(A[b])
        assert np.allclose(Q[b], Qb, atol=1e-14) and np.allclose(R[b], Rb, atol=1e-14)


def test_qr_positive_rank_deficient_names_column(rng):
    A = complex_gaussian(rng, (6, 3))
    A[:, 2] = 2.0 * A[:, 0]
    with pytest.raises(ValidationError, match="column 2"):
        qr_positive(A)
    Q, R = qr_positive(A, allow_rank_deficient=True)
    assert is_semi_unitary(Q)
    assert np.allclose(Q @ R, A, atol=1e-10)


def test_orthonormalize_matches_qr(rng):
    A = complex_gaussian(rng, (64, 8, 2))
    Q, _ = qr_positive(A)
    assert np.allclose(orthonormalize(A), Q, atol=1e-12)


def test_gamma_fn_known_values():
    assert gamma_fn(1.0) == pytest.approx(1.0, rel=1e-12)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert gamma_fn(0.5) == pytest.approx(1.7724538509, abs=1e-10)


def test_gamma_fn_arbitrary_precision_oracle():
    assert abs(gamma_fn(1.0 / 12.0) / GAMMA_1_12 - 1.0) <= 1e-10


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_gamma_fn_domain(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


def test_solve_hpd_trivial(rng):
    B = complex_gaussian(rng, (3, 2))
    assert np.allclose(solve_hpd(np.eye(3), B), B)
    assert np.allclose(solve_hpd(2 * np.eye(3), np.eye(3)), 0.5 * np.eye(3))


def test_solve_hpd_residual(rng):
    G = complex_gaussian(rng, (6, 6))
    A = G @ herm(G) + np.eye(6)
    B = complex_gaussian(rng, (6, 3))
    X = solve_hpd(A, B)
    assert np.linalg.norm(A @ X - B) <= 1e-9 * np.linalg.norm(B)


def test_solve_hpd_batched_and_vector(rng):
    G = complex_gaussian(rng, (4, 5, 5))
    A = G @ herm(G) + np.eye(5)
    b = complex_gaussian(rng, (4, 5))
    x = solve_hpd(A, b)
    assert x.shape == (4, 5)
    assert np.allclose(np.einsum("bij,bj->bi", A, x), b)


def test_solve_hpd_ill_conditioned_carries_condition():
    A = np.diag([1.0, 1e-14])
    with pytest.raises(NumericalError) as info:
        solve_hpd(A, np.eye(2))
    assert info.value.context["condition"] == pytest.approx(1e14, rel=1e-6)


def test_solve_hpd_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        solve_hpd(np.array([[2.0, 1.0], [0.0, 2.0]]), np.eye(2))


def test_seed_stream_replays_exactly():
    a = SeedStream(7, 3).child(5).generator().standard_normal(16)
    b = SeedStream(7, 3).child(5).generator().standard_normal(16)
    assert np.array_equal(a, b)


def test_seed_stream_ids_differ():
    a = SeedStream(7, 3).generator().standard_normal(1000)
    b = SeedStream(7, 4).generator().standard_normal(1000)
    c = SeedStream(7, 3).child(0).generator().standard_normal(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15
    assert not np.array_equal(a, c)


def test_seed_stream_rejects_out_of_range():
    with pytest.raises(ValidationError):
        SeedStream(2**64)
    with pytest.raises(ValidationError):
        SeedStream(1, -1)


def test_complex_gaussian_variance_split():
    z = complex_gaussian(np.random.default_rng(1), (200_000,))
    assert np.var(z.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(z.imag) == pytest.approx(0.5, rel=0.02)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, rel=0.02)


def test_random_unitary_is_unitary(rng):
    U = random_unitary(rng, 5)
    assert np.allclose(herm(U) @ U, np.eye(5), atol=1e-12)
