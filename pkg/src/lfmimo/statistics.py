"""Second-order statistics of quantized channels and Monte-Carlo identity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .channel import check_gamma, decompose, gen_channel
from .errors import ValidationError
from .numerics import SeedStream, complex_gaussian, herm, random_unitary
from .quantize import gen_rvq, quantize

__all__ = [
    "SecondOrder",
    "VerificationReport",
    "second_order",
    "second_order_sum",
    "gap_vs_empirical",
    "cross_term_norms",
    "family_z",
    "singular_value_bound",
    "verify_lemma2",
    "verify_lemma4",
]


@dataclass(frozen=True)
class SecondOrder:
    Rko: np.ndarray
    gamma: float
    M: int
    N: int


@dataclass
class VerificationReport:
    """Outcome of a Monte-Carlo identity check.

    ``max_z`` is the largest entrywise deviation between the sample mean and
    the closed form, measured in standard errors, over ``n_tests``
    independent quantities. The check passes when the family-wise
    equivalent :attr:`z` stays within ``threshold``.
    """

    name: str
    trials: int
    max_z: float
    threshold: float = 3.0
    details: dict = field(default_factory=dict)
    n_tests: int = 1

    @property
    def z(self) -> float:
        return family_z(self.max_z, self.n_tests)

    @property
    def passed(self) -> bool:
        return self.z <= self.threshold

    def as_row(self) -> dict:
        return {"check": self.name, "trials": self.trials, "max_z": self.max_z, "n_tests": self.n_tests,
                "z": self.z, "threshold": self.threshold, "passed": self.passed}


def second_order(Hq: np.ndarray, gamma: float, clamp: bool = False) -> SecondOrder:
    """Approximate conditional second moment ``E[H H^H | Hq]`` of one user.

    ``Hq`` may carry leading batch axes; ``gamma`` is shared.
    """
    Hq = np.asarray(Hq, dtype=complex)
    M, N = Hq.shape[-2:]
    gamma = check_gamma(gamma, M, N, clamp)
    along = M * (1.0 - M * gamma / (M - N))
    iso = M * N * gamma / (M - N)
    R = along * (Hq @ herm(Hq)) + iso * np.eye(M)
    return SecondOrder(Rko=R, gamma=gamma, M=M, N=N)


def second_order_sum(Hq_all, gamma: float, clamp: bool = False) -> np.ndarray:
    """Sum over users (axis -3 of ``(..., K, M, N)``) of the second-order approximations."""
    return second_order(np.asarray(Hq_all), gamma, clamp).Rko.sum(axis=-3)


def _canonical_rotation(Hq: np.ndarray) -> np.ndarray:
    # Q^H maps span(Hq) onto span(E); residual phases on E cancel in E E^H
    Q, _ = np.linalg.qr(Hq, mode="complete")
    return herm(Q)


def _entrywise_stats(samples: np.ndarray, target: np.ndarray) -> tuple[float, int]:
    """Largest |mean - target| / stderr over real and imaginary parts of every entry.

    Returns ``(z, n)`` with ``n`` the number of independent quantities
    compared: for Hermitian samples only the upper triangle counts, and
    entries whose spread is at rounding level (e.g. imaginary parts of a
    Hermitian diagonal) are checked against an absolute floor instead of
    being counted.
    """
    T = samples.shape[0]
    mean = samples.mean(axis=0)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(target))), float(np.max(np.abs(mean))))
    keep = np.ones(samples.shape[1:], dtype=bool)
    if samples.shape[-1] == samples.shape[-2] and np.allclose(samples, herm(samples), atol=floor):
        keep = np.triu(keep)
    z, n = 0.0, 0
    for part in (np.real, np.imag):
        se = part(samples).std(axis=0, ddof=1) / math.sqrt(T)
        dev = np.abs(part(mean) - part(target))
        ok = se > floor
        if np.any(~ok & (dev > floor)):
            return math.inf, max(n, 1)
        ok &= keep
        if np.any(ok):
            z = max(z, float(np.max(dev[ok] / se[ok])))
            n += int(ok.sum())
    return z, max(n, 1)


def _entrywise_z(samples: np.ndarray, target: np.ndarray) -> float:
    return _entrywise_stats(samples, target)[0]


def family_z(z: float, n: int) -> float:
    """Convert the largest of ``n`` two-sided z-scores into a single-test equivalent.

    Uses the Sidak correction, so a family of ``n`` checks at the returned
    level has the false-alarm rate of one check at ``z``. ``n = 1`` returns
    ``z`` unchanged.
    """
    if not math.isfinite(z):
        return math.inf
    p_one = math.erfc(z / math.sqrt(2.0))
    p_family = -math.expm1(n * math.log1p(-p_one)) if p_one < 1.0 else 1.0
    if p_family >= 1.0:
        return 0.0
    if p_family <= 0.0:
        return math.inf
    return -NormalDist().inv_cdf(p_family / 2.0)


def gap_vs_empirical(M: int, N: int, K: int, B: int, trials: int, stream: SeedStream,
                     codebook_contains_channel: bool = False) -> float:
    """Normalized Frobenius gap between the rotated-frame sample mean of ``H H^H`` and ``R^o``.

    Every trial quantizes a fresh channel with a fresh RVQ codebook and
    rotates the result so that the selected codeword spans the first ``N``
    coordinate axes. ``R^o`` is evaluated at that canonical codeword with the
    empirical per-column distortion. ``K`` does not affect the estimate (each
    user is statistically identical) and is accepted for symmetry with the
    other distortion routines.

    ``codebook_contains_channel`` injects the true subspace into each
    codebook, expressed in a Haar-random basis as an RVQ codeword would be,
    which emulates unlimited feedback.
    """
    if trials < 100:
        raise ValidationError("gap_vs_empirical needs trials >= 100")
    acc = np.zeros((M, M), dtype=complex)
    d2_sum = 0.0
    for t in range(trials):
        ts = stream.child(t)
        ch = gen_channel(M, N, ts.child(0))
        cb = gen_rvq(M, N, B, ts.child(1))
        if codebook_contains_channel:
            cb.words[0] = ch.Hsub @ random_unitary(ts.child(2).generator(), N)
        q = quantize(ch.Hsub, cb)
        Qr = _canonical_rotation(q.Hq)
        G = Qr @ ch.H
        acc += G @ herm(G)
        d2_sum += q.d2
    mean = acc / trials
    gamma_hat = d2_sum / (trials * N)
    E = np.eye(M, N, dtype=complex)
    Ro = second_order(E, gamma_hat, clamp=True).Rko
    return float(np.linalg.norm(mean - Ro) / np.linalg.norm(mean))


def cross_term_norms(M: int, N: int, B: int, trials: int, stream: SeedStream) -> tuple[float, float]:
    """Norm of the off-diagonal block ``E_perp^H mean(H H^H) E`` in the canonical frame.

    Returns ``(norm, noise)`` where ``noise = sqrt(sum(var) / trials)`` is the
    root-mean-square norm the sample mean would show if the block had zero
    mean, with ``var`` the per-entry sample variance.
    """
    if trials < 2:
        raise ValidationError("cross_term_norms needs trials >= 2")
    blocks = np.empty((trials, M - N, N), dtype=complex)
    for t in range(trials):
        ts = stream.child(t)
        ch = gen_channel(M, N, ts.child(0))
        q = quantize(ch.Hsub, gen_rvq(M, N, B, ts.child(1)))
        G = _canonical_rotation(q.Hq) @ ch.H
        blocks[t] = (G @ herm(G))[N:, :N]
    var = blocks.var(axis=0, ddof=1)
    return float(np.linalg.norm(blocks.mean(axis=0))), float(math.sqrt(var.sum() / trials))


def singular_value_bound(M: int, N: int, B: int, trials: int, stream: SeedStream) -> dict:
    """Sample the singular values of ``Z Y^H`` and compare with ``sqrt(gamma (1 - gamma))``."""
    omegas = np.empty((trials, N))
    d2 = np.empty(trials)
    for t in range(trials):
        ts = stream.child(t)
        ch = gen_channel(M, N, ts.child(0))
        q = quantize(ch.Hsub, gen_rvq(M, N, B, ts.child(1)))
        dec = decompose(ch.Hsub, q.Hq)
        omegas[t] = np.linalg.svd(dec.Z @ herm(dec.Y), compute_uv=False)
        d2[t] = q.d2
    gamma = float(d2.mean() / N)
    per_trial = omegas.mean(axis=1)
    return {
        "mean_omega": float(per_trial.mean()),
        "stderr": float(per_trial.std(ddof=1) / math.sqrt(trials)),
        "bound": math.sqrt(gamma * (1.0 - gamma)),
        "gamma": gamma,
    }


def verify_lemma2(N: int, trials: int, stream: SeedStream, lam=None) -> VerificationReport:
    """Check ``E[Y^H X^H X Y] = E[X Y Y^H X^H] = (sum(lam)/N) I`` by sampling.

    ``X`` is Haar unitary; ``Y`` has independent rows, row ``n`` with i.i.d.
    CN(0, lam[n]/N) entries, so that ``E[Y Y^H] = diag(lam)``.
    """
    if trials < 10_000:
        raise ValidationError("verify_lemma2 needs trials >= 10000")
    rng = stream.generator()
    lam = np.ones(N) if lam is None else np.asarray(lam, dtype=float)
    if lam.shape != (N,) or np.any(lam < 0):
        raise ValidationError("lam must be a non-negative vector of length N")
    target = lam.sum() / N * np.eye(N)
    lhs = np.empty((trials, N, N), dtype=complex)
    rhs = np.empty((trials, N, N), dtype=complex)
    for t in range(trials):
        X = random_unitary(rng, N)
        Y = np.sqrt(lam / N)[:, None] * complex_gaussian(rng, (N, N))
        XY = X @ Y
        lhs[t] = herm(XY) @ XY
        rhs[t] = XY @ herm(XY)
    (zl, nl), (zr, nr) = _entrywise_stats(lhs, target), _entrywise_stats(rhs, target)
    return VerificationReport("lemma2", trials, max(zl, zr), details={"lam": lam.tolist()}, n_tests=nl + nr)


def verify_lemma4(M: int, N: int, Theta: np.ndarray, trials: int, stream: SeedStream,
                  X: np.ndarray | None = None) -> VerificationReport:
    """Check ``E[Y^H X Y] = diag(Theta diag^{-1}(X))`` for ``Y`` with entry variances ``Theta^T``."""
    if trials < 10_000:
        raise ValidationError("verify_lemma4 needs trials >= 10000")
    Theta = np.asarray(Theta, dtype=float)
    if Theta.shape != (N, M) or np.any(Theta < 0):
        raise ValidationError(f"Theta must be a non-negative {N}x{M} matrix")
    rng = stream.generator()
    if X is None:
        X = complex_gaussian(rng, (M, M))
    target = np.diag(Theta @ np.diag(X))
    std = np.sqrt(Theta.T)
    samples = np.empty((trials, N, N), dtype=complex)
    for t in range(trials):
        Y = std * complex_gaussian(rng, (M, N))
        samples[t] = herm(Y) @ X @ Y
    z, n = _entrywise_stats(samples, target)
    return VerificationReport("lemma4", trials, z, n_tests=n)
