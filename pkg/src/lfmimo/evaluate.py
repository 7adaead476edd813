"""Achievable-rate evaluation, closed-form rate approximations and flop counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .numerics import herm

__all__ = [
    "RateRecord",
    "user_rate",
    "sum_rate",
    "bound_low",
    "bound_high",
    "flops_rmmse",
    "flops_rwmmse_iter",
]


@dataclass(frozen=True)
class RateRecord:
    """Monte-Carlo sum-rate statistics for one (scheme, SNR, B) cell; rates in bit/s/Hz."""

    scheme: str
    snr_db: float
    B: int
    M: int
    N: int
    K: int
    trials: int
    sum_rate_mean: float
    sum_rate_stderr: float
    seed: int

    def __post_init__(self):
        if self.sum_rate_mean < 0 or self.sum_rate_stderr < 0:
            raise ValidationError("rates and standard errors must be non-negative")


def _logdet2(A: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(A)):
        raise NumericalError("non-finite entries in rate expression")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix in rate expression is not positive definite") from exc
    return 2.0 * np.sum(np.log2(np.abs(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)


def _user_rates(H: np.ndarray, P: np.ndarray, K: int, noise_var: float) -> np.ndarray:
    # H: (..., K, M, N) true channels, P: (..., M, K N); returns (..., K) rates
    N = H.shape[-1]
    HP = herm(H) @ P[..., None, :, :]  # (..., K, N, K N)
    blocks = np.moveaxis(HP.reshape(*HP.shape[:-1], K, N), -2, -3)  # (..., K, K, N, N)
    gains = blocks @ herm(blocks)
    total = gains.sum(axis=-3)
    own = np.diagonal(gains, axis1=-4, axis2=-3)
    own = np.moveaxis(own, -1, -3)
    noise = noise_var * np.eye(N)
    return _logdet2(total + noise) - _logdet2(total - own + noise)


def _unpack(P, K):
    if hasattr(P, "P"):
        return P.P, P.K
    if K is None:
        raise ValidationError("K is required when P is a bare matrix")
    return np.asarray(P, dtype=complex), K


def user_rate(Hk: np.ndarray, P, k: int, noise_var: float, K: int | None = None) -> float:
    """Achievable rate of user ``k`` in bit/s/Hz against its true channel ``Hk``.

    Evaluated as ``log2 det(S + I + sigma^2 I) - log2 det(I + sigma^2 I)``
    where ``S`` and ``I`` are the desired and interference Gram matrices, so
    the interference-plus-noise matrix is never inverted. ``P`` is either a
    :class:`~lfmimo.precoders.PrecoderOutput` or the concatenated
    ``M x NK`` matrix (then pass ``K``).
    """
    if not noise_var > 0:
        raise ValidationError("noise variance must be positive")
    P, K = _unpack(P, K)
    if not 0 <= k < K:
        raise ValidationError(f"user index {k} out of range for K={K}")
    Hk = np.asarray(Hk, dtype=complex)
    N = Hk.shape[-1]
    HP = herm(Hk) @ P
    gains = [HP[..., j * N:(j + 1) * N] @ herm(HP[..., j * N:(j + 1) * N]) for j in range(K)]
    total = sum(gains)
    noise = noise_var * np.eye(N)
    return float(_logdet2(total + noise) - _logdet2(total - gains[k] + noise))


def sum_rate(H_all, P, noise_var: float, K: int | None = None):
    """Sum of the users' rates; batched over leading axes of ``H_all`` (..., K, M, N) and ``P``."""
    if not noise_var > 0:
        raise ValidationError("noise variance must be positive")
    P, K = _unpack(P, K)
    rates = _user_rates(np.asarray(H_all, dtype=complex), P, K, noise_var).sum(axis=-1)
    return float(rates) if rates.ndim == 0 else rates


def _check_bound_args(rho, K, gamma):
    if not rho > 0 or K < 1 or not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"invalid bound arguments rho={rho}, K={K}, gamma={gamma}")


def bound_low(rho: float, K: int, N: int, gamma: float) -> float:
    """Low-SNR per-user rate approximation of MMSE precoding under quantized feedback."""
    _check_bound_args(rho, K, gamma)
    return N * math.log2(1.0 + rho * K * (1.0 - gamma) / (rho * K - rho + K))


def bound_high(rho: float, K: int, N: int, gamma: float) -> float:
    """High-SNR per-user rate approximation; saturates at ``N log2(1 + 1/(K gamma))``."""
    _check_bound_args(rho, K, gamma)
    return N * math.log2(1.0 + rho / (K + rho * K * gamma))


def flops_rmmse(M: int, N: int, K: int) -> float:
    """Flop count of one robust MMSE precoder computation."""
    return M**3 + M**2 * (2 * N * K + 0.5 * K + 1) + M * (3 * N**2 * K + 3 * N * K - 0.5 * K + 3) \
        - 2.0 / 3.0 * K * (N**3 + 1)


def flops_rwmmse_iter(M: int, N: int, K: int) -> tuple[float, float, float]:
    """Per-iteration flop counts (receive filters, weights, precoder) of the robust WMMSE loop."""
    filt = N * K * (2 * M**2 + 5 * M * N + 2 * M + 3 * N**2 - 2.5 * N + 1.5)
    weights = N * K * (5 * N**2 - N + 2)
    prec = (M**3 + 4 * M**2 * N * K + 5 * M * N**2 * K**2 + M * N * K + 3 * M + 4 * N**3 * K**3
            - 2.5 * N**2 * K**2 + 1.5 * N * K - 2)
    return filt, weights, prec
