"""Dense complex linear algebra with explicit tolerance contracts.

Everything downstream diagonalizes, exponentiates or decomposes through the
three kernels here, so the checks live in one place.
"""
from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, DimensionError, NumericError

DEFAULT_DIM_CAP = 8192


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    eig_residual: float = 1e-10
    unitarity: float = 1e-10


_TOL = Tolerances()


def tolerances() -> Tolerances:
    return _TOL


def set_tolerance_scale(scale: float) -> None:
    """Multiply every tolerance by ``scale`` (the single global knob)."""
    global _TOL
    base = Tolerances()
    _TOL = replace(base, hermitian=base.hermitian * scale,
                   eig_residual=base.eig_residual * scale,
                   unitarity=base.unitarity * scale)


@contextmanager
def tolerance_scale(scale: float):
    global _TOL
    saved = _TOL
    set_tolerance_scale(scale)
    try:
        yield
    finally:
        _TOL = saved


def dim_cap() -> int:
    raw = os.environ.get("FLOQUET_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise DimensionError(f"FLOQUET_DIM_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise DimensionError("FLOQUET_DIM_CAP must be positive")
    return cap


def check_dim(dim: int, what: str = "matrix") -> None:
    cap = dim_cap()
    if dim > cap:
        raise DimensionError(f"{what} dimension {dim} exceeds cap {cap}")


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError("non-finite matrix entries")
    return A


def hermiticity_defect(A) -> float:
    A = np.asarray(A)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def is_hermitian(A, tol: float | None = None) -> bool:
    A = np.asarray(A)
    tol = _TOL.hermitian if tol is None else tol
    scale = max(1.0, float(np.linalg.norm(A)))
    return hermiticity_defect(A) <= tol * scale


def require_hermitian(A) -> np.ndarray:
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ContractViolation(f"Hermitian input must be square, got {A.shape}")
    if not is_hermitian(A):
        raise ContractViolation(
            f"matrix is not Hermitian (defect {hermiticity_defect(A):.3e})")
    return A


def hermitian_eigendecompose(A) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and a unitary eigenvector matrix of Hermitian ``A``."""
    A = require_hermitian(A)
    check_dim(A.shape[0])
    # symmetrize so LAPACK sees an exactly Hermitian array
    H = 0.5 * (A + A.conj().T)
    try:
        w, V = sla.eigh(H, driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigh failed to converge: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
        raise NumericError("eigh returned non-finite output")
    return w, V


def eig_residual(A, w, V) -> float:
    return float(np.linalg.norm(A @ V - V * w, 2)) if len(w) else 0.0


def matrix_exponential_i(A, t: float) -> np.ndarray:
    """exp(-i A t) for Hermitian ``A`` via its eigendecomposition."""
    w, V = hermitian_eigendecompose(A)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def singular_values(A) -> np.ndarray:
    A = _as_matrix(A)
    check_dim(max(A.shape))
    if A.size == 0:
        return np.zeros(0)
    try:
        s = sla.svd(A, compute_uv=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            s = sla.svd(A, compute_uv=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"SVD failed to converge: {exc}") from exc
    return np.sort(np.abs(s))[::-1]


def operator_norm(A) -> float:
    s = singular_values(A)
    return float(s[0]) if len(s) else 0.0


def unitarity_defect(U) -> float:
    U = np.asarray(U)
    D = U.conj().T @ U - np.eye(U.shape[1])
    # D is Hermitian, so its spectral norm is the largest |eigenvalue|
    return float(np.max(np.abs(np.linalg.eigvalsh(D)))) if D.size else 0.0


def require_unitary(U, tol: float) -> np.ndarray:
    U = _as_matrix(U)
    d = unitarity_defect(U)
    if d > tol:
        raise ContractViolation(f"matrix is not unitary (defect {d:.3e} > {tol:.1e})")
    return U
