import math

import numpy as np
import pytest

from lfmimo.channel import gen_channel
from lfmimo.errors import ConfigError, DomainError, ValidationError
from lfmimo.numerics import SeedStream, complex_gaussian, herm, is_semi_unitary, qr_positive, random_unitary
from lfmimo.quantize import Codebook, chordal_d2, distortion_closed, distortion_empirical, gen_rvq, quantize

# arbitrary-precision evaluation of the closed form at M=8, N=2, K=4 (mpmath, 30 digits)
XI_BAR = {8: 0.906823632954036757603767868312, 10: 0.807888012178116898444849145363}


def _subspace(rng, M, N):
    return qr_positive(complex_gaussian(rng, (M, N)))[0]


def test_gen_rvq_shapes_and_semi_unitarity():
    cb = gen_rvq(8, 2, 6, SeedStream(1))
    assert len(cb) == 64 and cb.words.shape == (64, 8, 2)
    assert all(is_semi_unitary(w) for w in cb.words)


def test_gen_rvq_single_word():
    cb = gen_rvq(4, 2, 0, SeedStream(1))
    assert len(cb) == 1 and is_semi_unitary(cb.words[0])


def test_gen_rvq_deterministic():
    a = gen_rvq(8, 2, 4, SeedStream(9, 1, (3,)))
    b = gen_rvq(8, 2, 4, SeedStream(9, 1, (3,)))
    assert np.array_equal(a.words, b.words)


def test_gen_rvq_word_is_qr_factor_of_gaussian_draw():
    stream = SeedStream(4)
    raw = complex_gaussian(stream.generator(), (4, 8, 2))
    assert np.allclose(gen_rvq(8, 2, 2, stream).words, qr_positive(raw)[0], atol=1e-12)


@pytest.mark.parametrize("B", [-1, 25])
def test_gen_rvq_guard(B):
    with pytest.raises(ConfigError):
        gen_rvq(8, 2, B, SeedStream(0))


def test_chordal_d2_extremes(rng):
    U = random_unitary(rng, 8)
    assert chordal_d2(U[:, :2], U[:, :2]) == pytest.approx(0.0, abs=1e-12)
    assert chordal_d2(U[:, :2], U[:, 2:4]) == pytest.approx(2.0, abs=1e-12)


def test_chordal_d2_principal_angles(rng):
    A, C = _subspace(rng, 4, 2), _subspace(rng, 4, 2)
    cosines = np.linalg.svd(herm(A) @ C, compute_uv=False)
    assert chordal_d2(A, C) == pytest.approx(np.sum(1 - cosines**2), abs=1e-12)


def test_chordal_d2_shape_mismatch(rng):
    with pytest.raises(ValidationError):
        chordal_d2(_subspace(rng, 4, 2), _subspace(rng, 4, 1))


def test_quantize_finds_injected_channel(rng):
    cb = gen_rvq(8, 2, 5, SeedStream(2))
    Hs = _subspace(rng, 8, 2)
    cb.words[17] = Hs
    q = quantize(Hs, cb)
    assert q.index == 17 and q.d2 == pytest.approx(0.0, abs=1e-12)


def test_quantize_single_word(rng):
    cb = gen_rvq(8, 2, 0, SeedStream(2))
    assert quantize(_subspace(rng, 8, 2), cb).index == 0


def test_quantize_ties_go_to_lowest_index(rng):
    w = _subspace(rng, 8, 2)
    cb = Codebook(8, 2, 2, np.stack([_subspace(rng, 8, 2), w, w, w]))
    assert quantize(w, cb).index == 1


def test_quantize_brute_force_oracle():
    root = SeedStream(21)
    for t in range(100):
        ch = gen_channel(8, 2, root.child(t).child(0))
        cb = gen_rvq(8, 2, 6, root.child(t).child(1))
        q = quantize(ch.Hsub, cb)
        dists = [chordal_d2(ch.Hsub, w) for w in cb.words]
        assert q.index == int(np.argmin(dists))
        assert q.d2 <= min(dists) + 1e-12
        assert 0.0 <= q.d2 <= 2.0
        G = herm(ch.Hsub) @ q.Hq
        assert q.d2 == pytest.approx(2 - np.sum(np.abs(G) ** 2), abs=1e-10)


def test_distance_spectrum_rotation_invariant(rng):
    cb = gen_rvq(8, 2, 5, SeedStream(8))
    Hs = _subspace(rng, 8, 2)
    U = random_unitary(rng, 8)
    before = [chordal_d2(Hs, w) for w in cb.words]
    after = [chordal_d2(U @ Hs, U @ w) for w in cb.words]
    assert np.allclose(before, after, atol=1e-10)
    rotated = Codebook(8, 2, 5, U @ cb.words)
    assert quantize(U @ Hs, rotated).index == quantize(Hs, cb).index


def test_quantize_shape_check(rng):
    with pytest.raises(ValidationError):
        quantize(_subspace(rng, 4, 2), gen_rvq(8, 2, 1, SeedStream(0)))


def test_distortion_closed_hand_values():
    # T = N^2 (K - 1) = 12 and C = 7! 6! / 12! = 1/132
    xi, gamma = distortion_closed(8, 2, 4, 10)
    T = 12
    C = 1.0 / 132.0
    assert math.factorial(7) * math.factorial(6) / math.factorial(12) == pytest.approx(C, rel=1e-15)
    assert xi == pytest.approx(math.gamma(1 / T) / T * C ** (-1 / T) * 2 ** (-10 / T), rel=1e-12)
    assert xi == pytest.approx(XI_BAR[10], rel=1e-12)
    assert xi == pytest.approx(0.81, abs=0.01)
    assert gamma == pytest.approx(xi / 2)
    assert distortion_closed(8, 2, 4, 8)[0] == pytest.approx(XI_BAR[8], rel=1e-12)


def test_distortion_closed_large_dimensions_finite():
    xi, _ = distortion_closed(64, 2, 32, 10)
    assert math.isfinite(xi) and xi > 0


def test_distortion_closed_single_user():
    with pytest.raises(DomainError):
        distortion_closed(8, 2, 1, 10)


def test_injected_channel_gives_zero_distortion():
    # every codebook holds its own channel's subspace
    root = SeedStream(30)
    d = []
    for t in range(20):
        ch = gen_channel(8, 2, root.child(t))
        cb = gen_rvq(8, 2, 3, root.child(t).child(1))
        cb.words[5] = ch.Hsub
        d.append(quantize(ch.Hsub, cb).d2)
    assert max(d) == pytest.approx(0.0, abs=1e-12)


def test_distortion_empirical_decreasing_in_B():
    est = [distortion_empirical(8, 2, 4, B, 400, SeedStream(40, 0, (B,))) for B in (4, 6, 8, 10)]
    for (a, sa), (b, sb) in zip(est, est[1:]):
        assert a - b > 3.0 * math.hypot(sa, sb)
    for xi, _ in est:
        assert 0.0 <= xi / 2 <= 1.0


def test_distortion_empirical_fixed_codebook_mode():
    xi, se = distortion_empirical(8, 2, 2, 4, 50, SeedStream(41), fixed_codebook=True)
    assert 0 < xi < 2 and se > 0
