"""Downlink multiuser precoders.

Channels enter as a ``K x M x N`` array (or list) of per-user blocks. Every
function also accepts leading batch axes, ``(..., K, M, N)``, and then treats
each batch entry as an independent problem; the harness uses this to run a
block of Monte-Carlo trials in one pass.

Closed-form schemes share one normalization: every user block is reduced to
its orthonormal column basis and scaled by ``sqrt(rho / (N K))``, which is the
usual ``sqrt(rho / M)`` when ``M = N K``. Every output satisfies
``tr(P P^H) = rho``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import tolerances as tol
from .channel import check_gamma, robust_scalars
from .errors import ConfigError, NumericalError, ValidationError
from .numerics import herm, qr_positive, solve_hpd
from .statistics import second_order_sum

log = logging.getLogger(__name__)

SCHEMES = ("mrt", "bd", "mmse", "wmmse", "rmmse", "rwmmse")

__all__ = [
    "SCHEMES",
    "PrecoderOutput",
    "IterState",
    "stack_users",
    "concat_users",
    "mrt",
    "bd",
    "mmse",
    "rmmse",
    "wmmse_iterate",
    "robust_wmmse",
    "weighted_mse",
    "one_step_distance",
]


@dataclass
class IterState:
    """Receive filters ``D``, weights ``W`` (each ``K x N x N``) and the weighted-MSE objective."""

    D: np.ndarray
    W: np.ndarray
    objective: np.ndarray | float


@dataclass
class PrecoderOutput:
    """Concatenated precoder ``P = [P_1 ... P_K]`` (``M x NK``, possibly batched)."""

    P: np.ndarray
    scheme: str
    K: int
    iterations: np.ndarray | int = 0
    converged: np.ndarray | bool = True
    history: list = field(default_factory=list)
    state: IterState | None = None

    @property
    def N(self) -> int:
        return self.P.shape[-1] // self.K

    def block(self, k: int) -> np.ndarray:
        return self.P[..., k * self.N:(k + 1) * self.N]

    @property
    def per_user(self) -> list[np.ndarray]:
        return [self.block(k) for k in range(self.K)]


def stack_users(H_all) -> np.ndarray:
    H = np.asarray(H_all, dtype=complex)
    if H.ndim < 3:
        raise ValidationError(f"expected K blocks of shape M x N, got array of shape {H.shape}")
    return H


def concat_users(H: np.ndarray) -> np.ndarray:
    """``(..., K, M, N)`` blocks to the ``(..., M, K N)`` concatenation."""
    *lead, K, M, N = H.shape
    return np.moveaxis(H, -3, -2).reshape(*lead, M, K * N)


def _split_users(P: np.ndarray, K: int) -> np.ndarray:
    *lead, M, NK = P.shape
    return np.moveaxis(P.reshape(*lead, M, K, NK // K), -2, -3)


def _power(P: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(P) ** 2, axis=(-2, -1))


def _normalize_blocks(Pcheck: np.ndarray, K: int, rho: float, scheme: str) -> PrecoderOutput:
    Q, _ = qr_positive(_split_users(Pcheck, K), allow_rank_deficient=True)
    P = np.sqrt(rho / Pcheck.shape[-1]) * concat_users(Q)
    return PrecoderOutput(P=P, scheme=scheme, K=K)


def _check_power(rho: float, noise_var: float | None = None):
    if not rho > 0:
        raise ValidationError(f"transmit power must be positive, got {rho}")
    if noise_var is not None and not noise_var > 0:
        raise ValidationError(f"noise variance must be positive, got {noise_var}")


def mrt(Hq_all, rho: float) -> PrecoderOutput:
    """Maximum ratio transmission along each user's (quantized) subspace."""
    _check_power(rho)
    H = stack_users(Hq_all)
    return _normalize_blocks(concat_users(H), H.shape[-3], rho, "mrt")


def bd(Hq_all, rho: float) -> PrecoderOutput:
    """Block diagonalization: user ``k``'s block spans part of the null space of the other users' channels.

    The basis is fixed by projecting user ``k``'s own channel onto that null
    space and orthonormalizing, which makes the output deterministic.
    """
    _check_power(rho)
    H = stack_users(Hq_all)
    K, M, N = H.shape[-3:]
    if M < N * K:
        raise ConfigError(f"BD infeasible for M={M}, N={N}, K={K} (needs M >= N K)")
    blocks = np.empty_like(H)
    for k in range(K):
        own = H[..., k, :, :]
        if K > 1:
            Qo, _ = np.linalg.qr(concat_users(np.delete(H, k, axis=-3)))
            own = own - Qo @ (herm(Qo) @ own)
        blocks[..., k, :, :], _ = qr_positive(own, allow_rank_deficient=True)
    P = np.sqrt(rho / (N * K)) * concat_users(blocks)
    return PrecoderOutput(P=P, scheme="bd", K=K)


def mmse(G_all, rho: float, noise_var: float) -> PrecoderOutput:
    """Linear MMSE (regularized channel inversion) precoder for effective channels ``G_all``."""
    _check_power(rho, noise_var)
    G = stack_users(G_all)
    K, M, N = G.shape[-3:]
    Gc = concat_users(G)
    A = Gc @ herm(Gc) + (M * noise_var / rho) * np.eye(M)
    return _normalize_blocks(solve_hpd(A, Gc), K, rho, "mmse")


def rmmse(Hq_all, gamma: float, rho: float, noise_var: float, clamp: bool = False) -> PrecoderOutput:
    """Robust MMSE precoder.

    Same as :func:`mmse` on the quantized subspaces, except that the channel
    Gram matrix is replaced by the summed second-order approximation for
    distortion ``gamma``.
    """
    _check_power(rho, noise_var)
    Hq = stack_users(Hq_all)
    K, M, N = Hq.shape[-3:]
    gamma = check_gamma(gamma, M, N, clamp)
    A = second_order_sum(Hq, gamma) + (M * noise_var / rho) * np.eye(M)
    return _normalize_blocks(solve_hpd(A, concat_users(Hq)), K, rho, "rmmse")


def _own_blocks(HP: np.ndarray, K: int) -> np.ndarray:
    # HP: (..., K, N, K N) holding H_k^H P; return (..., K, N, N) holding H_k^H P_k
    *lead, _, N, NK = HP.shape
    HP4 = HP.reshape(*lead, K, N, K, N)
    return np.moveaxis(np.diagonal(HP4, axis1=-4, axis2=-2), -1, -3)


def _conditional_cov(H, P, delta, eta, noise_var):
    K, M, N = H.shape[-3:]
    HP = herm(H) @ P[..., None, :, :]
    phi = _power(P) / M
    F = delta**2 * HP @ herm(HP) + (eta**2 * phi + noise_var)[..., None, None, None] * np.eye(N)
    return F, _own_blocks(HP, K)


def _filters(H, P, delta, eta, noise_var):
    """Conditional MMSE receive filters ``D_k`` and MSE matrices for precoder ``P``."""
    F, HPk = _conditional_cov(H, P, delta, eta, noise_var)
    FinvHP = np.linalg.solve(F, HPk)  # F_k^{-1} H_k^H P_k
    D = delta * herm(FinvHP)  # F_k is Hermitian
    Mbar = np.eye(HPk.shape[-1]) - delta**2 * herm(HPk) @ FinvHP
    return D, 0.5 * (Mbar + herm(Mbar))


def _weights(Mbar, mu, iteration):
    lam, U = np.linalg.eigh(Mbar)
    if not np.all(np.isfinite(lam)):
        raise NumericalError(f"non-finite MSE matrix at iteration {iteration}", iteration=iteration)
    if np.any(lam < tol.MSE_EIG_FLOOR):
        log.info("flooring MSE eigenvalues at iteration %d (min %.3e)", iteration, lam.min())
        lam = np.maximum(lam, tol.MSE_EIG_FLOOR)
    return mu[:, None, None] * (U / lam[..., None, :]) @ herm(U)


def weighted_mse(H, P, D, W, delta, eta, noise_var):
    """Conditional weighted MSE ``sum_k tr(W_k Mbar_k(D_k, P))`` for arbitrary filters ``D``."""
    H = stack_users(H)
    F, HPk = _conditional_cov(H, P, delta, eta, noise_var)
    DP = D @ HPk
    Mk = D @ F @ herm(D) - delta * DP - delta * herm(DP) + np.eye(F.shape[-1])
    return np.real(np.einsum("...kij,...kji->...", W, Mk))


def _precoder_step(H, D, W, delta, eta, rho, noise_var):
    M = H.shape[-2]
    DhW = herm(D) @ W
    DhWD = DhW @ D
    A = concat_users(H @ DhW)  # Hq D^H W without forming block-diagonal matrices
    gram = np.sum(H @ DhWD @ herm(H), axis=-3)
    phi = np.real(np.trace(DhWD, axis1=-2, axis2=-1)).sum(axis=-1) / M
    trWDD = np.real(np.trace(W @ D @ herm(D), axis1=-2, axis2=-1)).sum(axis=-1)
    T = delta**2 * gram + (eta**2 * phi + noise_var / rho * trWDD)[..., None, None] * np.eye(M)
    Pbar = solve_hpd(0.5 * (T + herm(T)), delta * A)
    return np.sqrt(rho / _power(Pbar))[..., None, None] * Pbar


def wmmse_iterate(H_all, delta: float, eta: float, rho: float, noise_var: float, P_init=None,
                  mu=None, max_iter: int = 100, tol_rel: float = 1e-4, scheme: str = "wmmse",
                  track_objective: bool = False, callback=None) -> PrecoderOutput:
    """Weighted-MMSE block-coordinate iteration under the channel model ``delta * H + eta * O``.

    ``O`` is unknown i.i.d. CN(0, 1/M) error; ``delta = 1, eta = 0`` gives
    the conventional iteration on the channels ``H_all``. Each pass updates
    receive filters, weights ``mu_k Mbar_k^{-1}`` and the precoder, then
    rescales to full power. A batch entry stops updating once its relative
    Frobenius change falls below ``tol_rel``.

    ``history`` holds one dict per pass with the relative change (and, if
    ``track_objective``, the weighted MSE before/after the precoder update at
    fixed weights plus the weighted log-det rate surrogate). ``callback(it, P)``,
    if given, sees the precoder after every pass.
    """
    _check_power(rho, noise_var)
    if delta < 0 or eta < 0:
        raise ValidationError("delta and eta must be non-negative")
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    H = stack_users(H_all)
    K = H.shape[-3]
    lead = H.shape[:-3]
    mu = np.ones(K) if mu is None else np.asarray(mu, dtype=float)
    if mu.shape != (K,) or np.any(mu <= 0):
        raise ValidationError("mu must hold K positive weights")
    P = mrt(H, rho).P if P_init is None else np.array(P_init, dtype=complex)
    if not np.allclose(_power(P), rho, rtol=1e-9):
        raise ValidationError("P_init violates the power constraint")

    active = np.ones(lead, dtype=bool)
    iterations = np.zeros(lead, dtype=int)
    history = []
    for it in range(1, max_iter + 1):
        D, Mbar = _filters(H, P, delta, eta, noise_var)
        W = _weights(Mbar, mu, it)
        P_new = _precoder_step(H, D, W, delta, eta, rho, noise_var)
        if not np.all(np.isfinite(P_new)):
            raise NumericalError(f"non-finite precoder at iteration {it}", iteration=it)
        change = np.linalg.norm(P_new - P, axis=(-2, -1)) / np.linalg.norm(P, axis=(-2, -1))
        entry = {"iteration": it, "change": np.where(active, change, 0.0)}
        if track_objective:
            D_new, _ = _filters(H, P_new, delta, eta, noise_var)
            entry["objective_before"] = weighted_mse(H, P, D, W, delta, eta, noise_var)
            entry["objective_after"] = weighted_mse(H, P_new, D_new, W, delta, eta, noise_var)
            entry["rate_surrogate"] = -np.sum(mu * np.log2(np.linalg.det(Mbar).real), axis=-1)
        history.append(entry)
        iterations = np.where(active, it, iterations)
        P = np.where(active[..., None, None], P_new, P)
        active &= change >= tol_rel
        if callback is not None:
            callback(it, P)
        if not active.any():
            break
    D, Mbar = _filters(H, P, delta, eta, noise_var)
    W = _weights(Mbar, mu, max_iter)
    state = IterState(D=D, W=W, objective=weighted_mse(H, P, D, W, delta, eta, noise_var))
    converged = ~active
    if not lead:
        iterations, converged = int(iterations), bool(converged)
    return PrecoderOutput(P=P, scheme=scheme, K=K, iterations=iterations, converged=converged,
                          history=history, state=state)


def robust_wmmse(Hq_all, gamma: float, rho: float, noise_var: float, clamp: bool = False, **kwargs) -> PrecoderOutput:
    """Robust weighted-MMSE precoder from quantized subspaces and per-column distortion ``gamma``."""
    Hq = stack_users(Hq_all)
    M, N = Hq.shape[-2:]
    gamma = check_gamma(gamma, M, N, clamp)
    delta, eta = robust_scalars(M, N, gamma)
    return wmmse_iterate(Hq, delta, eta, rho, noise_var, scheme="rwmmse", **kwargs)


def one_step_distance(Hq_all, gamma: float, rho: float, noise_var: float) -> np.ndarray:
    """Per-user chordal distance between RMMSE and a single robust WMMSE pass from MRT.

    Diagnostic only: the two closed forms coincide for a suitable choice of
    filters and weights, which this does not try to construct.
    """
    Hq = stack_users(Hq_all)
    a = rmmse(Hq, gamma, rho, noise_var)
    b = robust_wmmse(Hq, gamma, rho, noise_var, max_iter=1)
    Qa, _ = qr_positive(_split_users(a.P, a.K), allow_rank_deficient=True)
    Qb, _ = qr_positive(_split_users(b.P, b.K), allow_rank_deficient=True)
    G = herm(Qa) @ Qb
    return Hq.shape[-1] - np.sum(np.abs(G) ** 2, axis=(-2, -1))
