"""Dense complex linear algebra helpers."""

from __future__ import annotations

import numpy as np


class NotHermitianError(ValueError):
    pass


class EigenConvergenceError(RuntimeError):
    pass


def hermiticity_defect(a: np.ndarray) -> float:
    """Largest |A[i, j] - conj(A[j, i])|."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)))


def is_hermitian(a: np.ndarray, rtol: float = 1e-12) -> bool:
    a = np.asarray(a)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    return hermiticity_defect(a) <= rtol * max(scale, np.finfo(float).tiny)


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def hermitian_eigensystem(a, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of a Hermitian matrix.

    Raises ``NotHermitianError`` when ``a`` is not Hermitian to ``rtol`` relative
    to its largest entry, and ``EigenConvergenceError`` if LAPACK fails or the
    decomposition does not reproduce ``a`` to working accuracy.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"matrix is not square: {m.shape}")
    if not is_hermitian(m, rtol):
        raise NotHermitianError(
            f"matrix is not Hermitian (defect {hermiticity_defect(m):.3e})"
        )
    # symmetrise so round-off in the input does not leak into the spectrum
    m = 0.5 * (m + m.conj().T)
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenConvergenceError(str(exc)) from exc

    norm = max(float(np.linalg.norm(m, 2)), 1.0)
    residual = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    if not np.all(np.isfinite(vals)) or np.max(residual) > 1e-10 * norm:
        raise EigenConvergenceError(f"eigen residual {np.max(residual):.3e} too large")
    return vals.real.copy(), vecs
