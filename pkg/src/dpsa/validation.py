"""Input validation helpers used at API boundaries.

Matrices are plain float64 numpy arrays throughout the package; these
helpers enforce the invariants (2-D, finite entries, expected structure)
once at the edges so the numerical kernels can stay unchecked.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotSymmetric, ShapeMismatch


def check_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be nonempty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def check_square(a, name: str = "matrix") -> np.ndarray:
    arr = check_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_symmetric(a, rtol: float, name: str = "matrix") -> np.ndarray:
    """Square and symmetric within ``rtol`` relative Frobenius error."""
    arr = check_square(a, name)
    scale = np.linalg.norm(arr)
    defect = np.linalg.norm(arr - arr.T)
    if defect > rtol * max(scale, 1e-300):
        raise NotSymmetric(
            f"{name} asymmetry {defect:.3e} exceeds {rtol:.1e} relative tolerance"
        )
    return arr


def check_orthonormal(q, tol: float = 1e-10, name: str = "basis") -> np.ndarray:
    """Tall matrix with orthonormal columns: ||Q^T Q - I||_F <= tol."""
    arr = check_matrix(q, name)
    d, r = arr.shape
    if d < r:
        raise DimensionMismatch(f"{name} must be tall, got shape {arr.shape}")
    defect = np.linalg.norm(arr.T @ arr - np.eye(r))
    if defect > tol:
        raise ValueError(
            f"{name} columns are not orthonormal: defect {defect:.3e} > {tol:.1e}"
        )
    return arr


def check_same_shape(mats, name: str = "matrices") -> list[np.ndarray]:
    """Validate a per-node list of equally shaped matrices."""
    if len(mats) == 0:
        raise ShapeMismatch(f"{name} must be a nonempty list")
    out = [check_matrix(m, f"{name}[{i}]") for i, m in enumerate(mats)]
    shape = out[0].shape
    for i, m in enumerate(out):
        if m.shape != shape:
            raise ShapeMismatch(
                f"{name}[{i}] has shape {m.shape}, expected {shape}"
            )
    return out
