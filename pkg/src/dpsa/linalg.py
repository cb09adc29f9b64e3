"""Dense linear-algebra kernels and subspace-distance metrics.

Sized for desk-scale problems (dimensions up to a few thousand, target
subspace up to a few dozen).  Factorizations are deterministic: QR uses a
positive-diagonal sign convention so the factor pair is unique, and the
Cholesky factor is upper-triangular with positive diagonal.

Tolerances are module constants; every kernel also accepts them as
keyword overrides.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    RankDeficient,
)
from .validation import check_matrix, check_symmetric

ORTHONORMALITY_TOL = 1e-10
RANK_RTOL = 1e-12
SYMMETRY_RTOL_EIG = 1e-10
SYMMETRY_RTOL_CHOL = 1e-12
PIVOT_RTOL = 1e-14


def qr_factor(v, rank_rtol: float = RANK_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization with positive diagonal on the triangular factor.

    Returns ``(q, r)`` with ``q`` a d-by-r orthonormal basis and ``r``
    upper-triangular such that ``q @ r`` reconstructs the input.  The sign
    convention makes the factorization unique, hence deterministic.

    Raises ``DimensionMismatch`` for wide inputs and ``RankDeficient`` when
    the smallest singular value is below ``rank_rtol`` times the largest.
    """
    v = check_matrix(v, "v")
    d, r = v.shape
    if d < r:
        raise DimensionMismatch(f"qr_factor needs rows >= cols, got {v.shape}")
    sv = np.linalg.svd(v, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= rank_rtol * sv[0]:
        raise RankDeficient(
            f"smallest singular value {sv[-1]:.3e} <= {rank_rtol:.1e} * {sv[0]:.3e}"
        )
    q, r_upper = np.linalg.qr(v)
    signs = np.sign(np.diag(r_upper))
    signs[signs == 0.0] = 1.0
    return q * signs, r_upper * signs[:, None]


def cholesky(k, sym_rtol: float = SYMMETRY_RTOL_CHOL, pivot_rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Upper-triangular R with ``R.T @ R == k`` and positive diagonal.

    Raises ``NotPositiveDefinite`` when a pivot falls at or below
    ``pivot_rtol * trace(k)``.
    """
    k = check_symmetric(k, sym_rtol, "k")
    n = k.shape[0]
    threshold = pivot_rtol * np.trace(k)
    r = np.zeros_like(k)
    for j in range(n):
        pivot = k[j, j] - r[:j, j] @ r[:j, j]
        if pivot <= threshold:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at column {j} is <= {threshold:.3e}"
            )
        r[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            r[j, j + 1:] = (k[j, j + 1:] - r[:j, j] @ r[:j, j + 1:]) / r[j, j]
    return r


def sym_eig(m, sym_rtol: float = SYMMETRY_RTOL_EIG) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns.
    """
    m = check_symmetric(m, sym_rtol, "m")
    w, u = np.linalg.eigh(m)
    return w[::-1].copy(), u[:, ::-1].copy()


def subspace_error(q_true, q_hat) -> float:
    """Mean squared sine of the principal angles between two subspaces.

    ``(1/r) * sum_i (1 - sigma_i^2)`` where the sigma are the singular
    values of ``q_true.T @ q_hat``; 0 for identical subspaces, 1 for
    orthogonal ones.  Both inputs must be d-by-r with orthonormal columns
    (not re-checked here; the metric is evaluated in inner loops).
    """
    q_true = check_matrix(q_true, "q_true")
    q_hat = check_matrix(q_hat, "q_hat")
    if q_true.shape != q_hat.shape:
        raise DimensionMismatch(
            f"subspace bases differ in shape: {q_true.shape} vs {q_hat.shape}"
        )
    c = q_true.T @ q_hat
    # sigma_i^2 are the eigenvalues of the symmetric r-by-r product C C^T
    cos2 = np.clip(np.linalg.eigvalsh(c @ c.T), 0.0, 1.0)
    err = float(np.mean(1.0 - cos2))
    return min(max(err, 0.0), 1.0)


def projection_distance(q_true, q_hat) -> float:
    """Spectral norm of the difference of the two orthogonal projectors.

    Equals the sine of the largest principal angle.  Computed as the
    largest singular value of the residual ``(I - Q Q^T) Q_hat``, which is
    cheap (d-by-r) and stays accurate for tiny angles where the cosine
    formulation would cancel.
    """
    q_true = check_matrix(q_true, "q_true")
    q_hat = check_matrix(q_hat, "q_hat")
    if q_true.shape != q_hat.shape:
        raise DimensionMismatch(
            f"subspace bases differ in shape: {q_true.shape} vs {q_hat.shape}"
        )
    residual = q_hat - q_true @ (q_true.T @ q_hat)
    sv = np.linalg.svd(residual, compute_uv=False)
    return min(1.0, float(sv[0]))


def spectral_norm(m) -> float:
    """Largest singular value; 0 for the zero matrix."""
    m = check_matrix(m, "m")
    return float(np.linalg.norm(m, 2))


def random_orthonormal(d: int, r: int, seed) -> np.ndarray:
    """Seeded random d-by-r orthonormal basis (QR of a Gaussian matrix)."""
    if d < r:
        raise DimensionMismatch(f"need d >= r, got d={d}, r={r}")
    g = np.random.default_rng(seed).standard_normal((d, r))
    q, _ = qr_factor(g)
    return q
