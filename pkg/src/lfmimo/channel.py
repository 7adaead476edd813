"""Rayleigh channel generation, subspace decomposition and the synthetic channel model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .errors import ConfigError, DomainError, ValidationError
from .numerics import SeedStream, complex_gaussian, herm, herm_evd, is_semi_unitary, qr_positive

log = logging.getLogger(__name__)

__all__ = [
    "UserChannel",
    "Decomposition",
    "gen_channel",
    "decompose",
    "synth_channel",
    "check_gamma",
    "robust_scalars",
]


@dataclass(frozen=True)
class UserChannel:
    """True channel ``H`` (M x N), its column subspace and the matching eigenvalues."""

    H: np.ndarray
    Hsub: np.ndarray
    eigvals: np.ndarray


@dataclass(frozen=True)
class Decomposition:
    """Factors of ``Hsub = Hq X Y + S Z`` for a subspace ``Hsub`` and its codeword ``Hq``."""

    X: np.ndarray
    Y: np.ndarray
    S: np.ndarray
    Z: np.ndarray

    @property
    def d2(self) -> float:
        return float(np.real(np.trace(herm(self.Z) @ self.Z)))

    def reconstruct(self, Hq: np.ndarray) -> np.ndarray:
        return Hq @ self.X @ self.Y + self.S @ self.Z


def gen_channel(M: int, N: int, stream: SeedStream) -> UserChannel:
    """Draw an i.i.d. unit-variance complex Gaussian ``M x N`` channel.

    The subspace is taken from the EVD of ``H H^H``: the eigenvectors of the
    ``N`` non-zero eigenvalues, kept in the order LAPACK returns them.
    """
    if N < 1 or M < N:
        raise ConfigError(f"need M >= N >= 1, got M={M}, N={N}")
    H = complex_gaussian(stream.generator(), (M, N))
    U, lam = herm_evd(H @ herm(H))
    return UserChannel(H=H, Hsub=U[:, M - N:], eigvals=lam[M - N:])


def _orth_complement(Q: np.ndarray) -> np.ndarray:
    M, N = Q.shape
    full, _ = np.linalg.qr(Q, mode="complete")
    return full[:, N:]


def decompose(Hsub: np.ndarray, Hq: np.ndarray) -> Decomposition:
    """Split a channel subspace into its components along and orthogonal to a codeword.

    The in-span part ``Hq Hq^H Hsub = Hq C`` is factored through the ``N x N``
    coordinate matrix ``C = X Y``; the residual ``(I - Hq Hq^H) Hsub`` is
    factored in coordinates of a fixed orthonormal basis of the complement,
    which keeps ``S`` inside the left nullspace of ``Hq`` even when a column
    degenerates.
    """
    Hsub = np.asarray(Hsub, dtype=complex)
    Hq = np.asarray(Hq, dtype=complex)
    M, N = Hsub.shape
    if Hq.shape != (M, N):
        raise ValidationError(f"shape mismatch: {Hsub.shape} vs {Hq.shape}")
    if M < 2 * N:
        raise ValidationError(f"decompose needs M >= 2N, got M={M}, N={N}")
    if not (is_semi_unitary(Hsub) and is_semi_unitary(Hq)):
        raise ValidationError("decompose inputs must be semi-unitary")
    X, Y = qr_positive(herm(Hq) @ Hsub, allow_rank_deficient=True)
    U = _orth_complement(Hq)
    V, Z = qr_positive(herm(U) @ Hsub, allow_rank_deficient=True)
    return Decomposition(X=X, Y=Y, S=U @ V, Z=Z)


def check_gamma(gamma: float, M: int, N: int, clamp: bool = False) -> float:
    """Validate a per-column distortion against ``[0, (M - N) / M]``.

    With ``clamp`` the value is pulled back inside the range and a warning is
    logged; otherwise an out-of-range value raises :class:`DomainError`.
    """
    gamma = float(gamma)
    upper = (M - N) / M
    if 0.0 <= gamma <= upper:
        return gamma
    if not clamp:
        raise DomainError(f"gamma={gamma} outside [0, {upper}] for M={M}, N={N}")
    clamped = min(max(gamma, 0.0), upper - tol.GAMMA_CLAMP_MARGIN)
    log.warning("clamping gamma %.6g to %.6g (M=%d, N=%d)", gamma, clamped, M, N)
    return clamped


def robust_scalars(M: int, N: int, gamma: float) -> tuple[float, float]:
    """Return the mean coefficients ``(delta, eta)`` of the synthetic channel model."""
    if M <= N:
        raise ConfigError(f"robust model needs M > N, got M={M}, N={N}")
    err = M * M * gamma / (M - N)
    return math.sqrt(max(M - err, 0.0)), math.sqrt(err)


def synth_channel(Hq: np.ndarray, gamma: float, stream: SeedStream, clamp: bool = False) -> np.ndarray:
    """Draw ``delta * Hq + eta * O`` with ``O`` i.i.d. CN(0, 1/M)."""
    M, N = Hq.shape
    gamma = check_gamma(gamma, M, N, clamp)
    delta, eta = robust_scalars(M, N, gamma)
    O = complex_gaussian(stream.generator(), (M, N), variance=1.0 / M)
    return delta * Hq + eta * O
