"""Random vector quantization (RVQ) of channel subspaces.

A codebook holds ``2**B`` semi-unitary ``M x N`` codewords; a user feeds back
the index of the codeword closest to its channel subspace in chordal
distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .channel import gen_channel
from .errors import ConfigError, DomainError, ValidationError
from .numerics import SeedStream, complex_gaussian, gamma_fn, herm, orthonormalize

__all__ = [
    "Codebook",
    "QuantizedCSI",
    "gen_rvq",
    "chordal_d2",
    "quantize",
    "distortion_empirical",
    "distortion_closed",
]


@dataclass(frozen=True)
class Codebook:
    M: int
    N: int
    B: int
    words: np.ndarray  # shape (2**B, M, N)
    seed: SeedStream | None = None

    def __len__(self):
        return self.words.shape[0]


@dataclass(frozen=True)
class QuantizedCSI:
    index: int
    Hq: np.ndarray
    d2: float


def gen_rvq(M: int, N: int, B: int, stream: SeedStream) -> Codebook:
    """Draw an RVQ codebook: orthonormalized i.i.d. complex Gaussian ``M x N`` matrices."""
    if not 0 <= B <= tol.MAX_FEEDBACK_BITS:
        raise ConfigError(f"B={B} outside supported range [0, {tol.MAX_FEEDBACK_BITS}]")
    if N < 1 or M < N:
        raise ConfigError(f"need M >= N >= 1, got M={M}, N={N}")
    raw = complex_gaussian(stream.generator(), (2**B, M, N))
    return Codebook(M=M, N=N, B=B, words=orthonormalize(raw), seed=stream)


def _d2_all(Hsub: np.ndarray, words: np.ndarray) -> np.ndarray:
    N = Hsub.shape[1]
    G = np.einsum("mi,wmj->wij", Hsub.conj(), words, optimize=True)
    d2 = N - np.einsum("wij,wij->w", G.real, G.real) - np.einsum("wij,wij->w", G.imag, G.imag)
    return np.clip(d2, 0.0, N)


def chordal_d2(Hsub: np.ndarray, C: np.ndarray) -> float:
    """Squared chordal distance ``N - tr(Hsub^H C C^H Hsub)`` between two N-planes."""
    Hsub = np.asarray(Hsub, dtype=complex)
    C = np.asarray(C, dtype=complex)
    if Hsub.shape != C.shape:
        raise ValidationError(f"shape mismatch: {Hsub.shape} vs {C.shape}")
    N = Hsub.shape[1]
    G = herm(Hsub) @ C
    return float(np.clip(N - np.sum(np.abs(G) ** 2), 0.0, N))


def quantize(Hsub: np.ndarray, cb: Codebook) -> QuantizedCSI:
    """Select the codeword nearest to ``Hsub``; ties go to the lowest index."""
    Hsub = np.asarray(Hsub, dtype=complex)
    if Hsub.shape != (cb.M, cb.N):
        raise ValidationError(f"channel subspace shape {Hsub.shape} does not match codebook ({cb.M}, {cb.N})")
    idx = int(np.argmin(_d2_all(Hsub, cb.words)))
    word = cb.words[idx]
    return QuantizedCSI(index=idx, Hq=word, d2=chordal_d2(Hsub, word))


def distortion_empirical(M: int, N: int, K: int, B: int, trials: int, stream: SeedStream,
                         fixed_codebook: bool = False) -> tuple[float, float]:
    """Monte-Carlo estimate of the mean minimum chordal distance.

    Each trial draws ``K`` users, each with a fresh channel and (unless
    ``fixed_codebook``) a fresh codebook, and records the users' mean
    minimum distance. Returns ``(xi, stderr)`` over trials.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    shared = gen_rvq(M, N, B, stream.child(2**32)) if fixed_codebook else None
    per_trial = np.empty(trials)
    for t in range(trials):
        ts = stream.child(t)
        acc = 0.0
        for k in range(K):
            ch = gen_channel(M, N, ts.child(0).child(k))
            cb = shared if shared is not None else gen_rvq(M, N, B, ts.child(1).child(k))
            acc += quantize(ch.Hsub, cb).d2
        per_trial[t] = acc / K
    stderr = per_trial.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return float(per_trial.mean()), float(stderr)


def distortion_closed(M: int, N: int, K: int, B: float) -> tuple[float, float]:
    """High-resolution approximation of the RVQ distortion.

    Returns ``(xi_bar, gamma)`` where ``gamma = xi_bar / N`` is the
    per-column distortion. Factorials are evaluated in log space.
    """
    if K < 2:
        raise DomainError(f"closed-form distortion needs K >= 2, got K={K}")
    if N < 1 or M < N:
        raise ConfigError(f"need M >= N >= 1, got M={M}, N={N}")
    T = N * N * (K - 1)
    log_c = -math.lgamma(T + 1) + sum(math.lgamma(M - i + 1) - math.lgamma(N - i + 1) for i in range(1, N + 1))
    xi = gamma_fn(1.0 / T) / T * math.exp(-log_c / T) * 2.0 ** (-B / T)
    return xi, xi / N
