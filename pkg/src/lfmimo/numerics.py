"""Dense complex linear-algebra primitives, special functions and seeded streams.

All matrices are ``numpy.ndarray`` objects of dtype ``complex128`` stored in
numpy's default row-major (C) order. Functions that accept a stack of
matrices operate on the last two axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tolerances as tol
from .errors import DomainError, NumericalError, ValidationError

__all__ = [
    "SeedStream",
    "complex_gaussian",
    "herm",
    "herm_evd",
    "qr_positive",
    "gamma_fn",
    "solve_hpd",
    "is_semi_unitary",
    "check_finite",
    "random_unitary",
    "orthonormalize",
]


@dataclass(frozen=True)
class SeedStream:
    """Deterministic, splittable source of random numbers.

    Two streams with the same ``(root_seed, stream_id, path)`` yield the
    same sequence. Distinct ids map to distinct ``SeedSequence`` spawn keys,
    which numpy guarantees to be statistically independent.
    """

    root_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for value in (self.root_seed, self.stream_id, *self.path):
            if not 0 <= int(value) < 2**64:
                raise ValidationError(f"seed component {value} is not a 64-bit unsigned integer")

    def child(self, index: int) -> "SeedStream":
        """Return an independent sub-stream labelled ``index``."""
        return SeedStream(self.root_seed, self.stream_id, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.root_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.PCG64(seq))


def complex_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws, real and imaginary parts N(0, variance/2)."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def herm(A: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(A, -1, -2))


def check_finite(A: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{name} contains non-finite entries")
    return A


def is_semi_unitary(Q: np.ndarray, atol: float = tol.SEMI_UNITARY_TOL) -> bool:
    """True when every matrix in ``Q`` (last two axes) has orthonormal columns."""
    n = Q.shape[-1]
    gram = herm(Q) @ Q
    return bool(np.max(np.abs(gram - np.eye(n)), initial=0.0) <= atol)


def herm_evd(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition ``A = U diag(lam) U^H`` of a Hermitian matrix.

    Returns
    -------
    eigvecs : ndarray, shape (n, n)
        Unitary matrix whose columns are eigenvectors.
    eigvals : ndarray, shape (n,)
        Real eigenvalues (ascending, as returned by LAPACK).
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"herm_evd expects a square matrix, got shape {A.shape}")
    check_finite(A, "herm_evd input")
    asym = np.max(np.abs(A - herm(A)), initial=0.0)
    if asym > tol.HERMITIAN_TOL * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise ValidationError(f"matrix is not Hermitian (max |A - A^H| = {asym:.3e})")
    try:
        eigvals, eigvecs = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return eigvecs, eigvals


def qr_positive(A: np.ndarray, allow_rank_deficient: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization with a real, non-negative diagonal in ``R``.

    Works on a single ``m x n`` matrix or on a stack ``(..., m, n)``.
    The phase ambiguity of complex QR is removed by rotating each column of
    ``Q`` so that the matching diagonal entry of ``R`` is real positive.

    If ``allow_rank_deficient`` is set, columns whose residual norm falls
    below :data:`tolerances.RANK_TOL` are replaced by an orthonormal
    completion with a zero diagonal entry in ``R``; ``A = Q R`` still holds.
    """
    A = np.asarray(A, dtype=complex)
    m, n = A.shape[-2:]
    if m < n:
        raise ValidationError(f"qr_positive needs m >= n, got {m}x{n}")
    check_finite(A, "qr_positive input")
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phase = np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)
    Q = Q * phase[..., None, :]
    R = np.conj(phase)[..., :, None] * R
    idx = np.arange(n)
    R[..., idx, idx] = R[..., idx, idx].real

    scale = np.maximum(np.linalg.norm(A, axis=-2).max(axis=-1, initial=0.0), 1.0)
    deficient = mag < tol.RANK_TOL * scale[..., None]
    if np.any(deficient):
        if not allow_rank_deficient:
            col = int(np.argwhere(deficient)[0][-1])
            raise ValidationError(f"rank-deficient input: column {col} has (near-)zero residual norm")
        Q, R = _complete_deficient(A, Q, R, deficient, scale)
    return Q, R


def orthonormalize(A: np.ndarray) -> np.ndarray:
    """``Q`` factor of :func:`qr_positive` for a stack of full-rank tall matrices.

    Uses column-wise Gram-Schmidt with one re-orthogonalization pass,
    vectorized over the leading axes. For the few-column matrices used as
    codewords this is several times faster than a batched LAPACK QR and
    returns the same factor to rounding error.
    """
    Q = np.array(A, dtype=complex)
    n = Q.shape[-1]
    for j in range(n):
        v = Q[..., j]
        for _ in range(2):
            for i in range(j):
                qi = Q[..., i]
                v -= np.einsum("...m,...m->...", qi.conj(), v)[..., None] * qi
        norm = np.linalg.norm(v, axis=-1)
        if np.any(norm < tol.RANK_TOL):
            raise ValidationError(f"rank-deficient input: column {j} has (near-)zero residual norm")
        Q[..., j] = v / norm[..., None]
    return Q


def _complete_deficient(A, Q, R, deficient, scale):
    # redo the flagged matrices by Gram-Schmidt, swapping in a completion vector
    # wherever a column has no new direction; R keeps the later columns'
    # components along that vector so that A = Q R stays exact
    Q = Q.copy()
    R = R.copy()
    m, n = Q.shape[-2:]
    flat_A = A.reshape(-1, m, n)
    flat_Q = Q.reshape(-1, m, n)
    flat_R = R.reshape(-1, n, n)
    flat_scale = np.broadcast_to(scale, deficient.shape[:-1]).reshape(-1)
    for b in np.flatnonzero(deficient.reshape(-1, n).any(axis=1)):
        q = np.zeros((m, n), dtype=complex)
        r = np.zeros((n, n), dtype=complex)
        for j in range(n):
            v = flat_A[b][:, j].copy()
            for _ in range(2):
                c = herm(q[:, :j]) @ v
                r[:j, j] += c
                v -= q[:, :j] @ c
            norm = np.linalg.norm(v)
            if norm < tol.RANK_TOL * flat_scale[b]:
                # deterministic completion: first unit vector with a usable residual
                for e in np.eye(m, dtype=complex):
                    v = e - q[:, :j] @ (herm(q[:, :j]) @ e)
                    if np.linalg.norm(v) > 1e-6:
                        break
                v = v - q[:, :j] @ (herm(q[:, :j]) @ v)
                norm, r[j, j] = np.linalg.norm(v), 0.0
            else:
                r[j, j] = norm
            q[:, j] = v / norm
        flat_Q[b], flat_R[b] = q, r
    return flat_Q.reshape(Q.shape), flat_R.reshape(R.shape)


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def solve_hpd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian positive-definite ``A`` (optionally stacked).

    Raises :class:`NumericalError` carrying the condition estimate when the
    smallest eigenvalue is below ``HPD_COND_TOL`` times the largest.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValidationError(f"solve_hpd expects square matrices, got shape {A.shape}")
    check_finite(A, "solve_hpd matrix")
    check_finite(B, "solve_hpd right-hand side")
    scale = np.maximum(np.max(np.abs(A), axis=(-2, -1)), 1.0)
    asym = np.max(np.abs(A - herm(A)), axis=(-2, -1))
    if np.any(asym > tol.HERMITIAN_TOL * scale):
        raise ValidationError(f"solve_hpd matrix is not Hermitian (max |A - A^H| = {asym.max():.3e})")
    eig = np.linalg.eigvalsh(A)
    lo, hi = eig[..., 0], eig[..., -1]
    bad = (hi <= 0) | (lo <= tol.HPD_COND_TOL * hi)
    if np.any(bad):
        with np.errstate(divide="ignore"):
            cond = float(np.max(np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)))
        raise NumericalError(f"matrix is not safely positive definite (condition ~ {cond:.3e})", condition=cond)
    vector_rhs = B.ndim == A.ndim - 1
    X = np.linalg.solve(A, B[..., None] if vector_rhs else B)
    return X[..., 0] if vector_rhs else X


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed ``n x n`` unitary matrix."""
    Q, _ = qr_positive(complex_gaussian(rng, (n, n)))
    return Q
