"""Repo-wide numerical tolerances.

Every module reads its thresholds from here so that a numerical audit only
has to touch one file.
"""

#: max-abs deviation of ``A - A^H`` accepted as Hermitian
HERMITIAN_TOL = 1e-10
#: ``Q^H Q - I`` max-abs deviation accepted as semi-unitary
SEMI_UNITARY_TOL = 1e-10
#: column norm below which a QR input column is treated as rank deficient
RANK_TOL = 1e-12
#: smallest-to-largest eigenvalue ratio accepted by the HPD solver
HPD_COND_TOL = 1e-12
#: floor applied to MSE-matrix eigenvalues before inversion
MSE_EIG_FLOOR = 1e-12
#: margin kept below the upper edge of the valid distortion range when clamping
GAMMA_CLAMP_MARGIN = 1e-9
#: largest supported number of feedback bits (2**B codewords held in memory)
MAX_FEEDBACK_BITS = 24
