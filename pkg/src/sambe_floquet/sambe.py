"""Truncated Floquet Hamiltonians on the Fourier lattice [L] = {-L+1, ..., L}.

Vectors are ordered (fourier x system): Fourier index l occupies row block
l + L - 1.  The diagonal block at l is H_0 - l*omega and block (l', l) is
H_{l'-l}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import (cutoff_for_accuracy, cutoff_lieb_robinson,  # noqa: F401  (re-exported)
                     cutoff_lieb_robinson_decaying, tail_bound, tail_sum)
from .errors import BoundaryError, DimensionError
from .hamiltonian import FourierHamiltonian, norm_bound
from .numerics import check_dim


@dataclass(frozen=True)
class SambeWindow:
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise DimensionError(f"cutoff L must be >= 1, got {self.L}")

    @property
    def fourier_dim(self) -> int:
        return 2 * self.L

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.L + 1, self.L + 1)

    def row(self, l: int) -> int:
        return l + self.L - 1

    def contains(self, l) -> bool | np.ndarray:
        return (l >= -self.L + 1) & (l <= self.L)

    def wrap(self, l):
        """(l mod [L]): representative of l modulo 2L inside the window."""
        return ((l + self.L - 1) % (2 * self.L)) - self.L + 1


@dataclass(frozen=True, eq=False)
class SambeOperator:
    window: SambeWindow
    system_dim: int
    matrix: np.ndarray
    boundary: str
    alpha_F: float
    omega: float
    M: int

    @property
    def L(self) -> int:
        return self.window.L

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def block(self, lp: int, l: int) -> np.ndarray:
        d = self.system_dim
        r, c = self.window.row(lp), self.window.row(l)
        return self.matrix[r * d:(r + 1) * d, c * d:(c + 1) * d]


def alpha_F(H: FourierHamiltonian, L: int) -> float:
    """Norm bound (2M+1) alpha + L omega of the truncated Floquet Hamiltonian."""
    return norm_bound(H) + L * H.omega


def build_floquet(H: FourierHamiltonian, L: int, boundary: str = "obc") -> SambeOperator:
    if boundary not in ("obc", "pbc"):
        raise ValueError(f"boundary must be 'obc' or 'pbc', got {boundary!r}")
    win = SambeWindow(L)
    d = H.dim
    M_present = max((abs(m) for m in H.present()), default=0)
    if boundary == "pbc" and 2 * L < 2 * M_present + 1:
        raise DimensionError(f"pbc needs 2L >= 2M+1 (L={L}, M={M_present}); wraparound would double-count")
    n = 2 * L * d
    check_dim(n, "Sambe operator")
    A = np.zeros((n, n), dtype=complex)
    for l in win.indices:
        c = win.row(l)
        for m in H.present():
            lp = l + m
            if boundary == "obc":
                if not win.contains(lp):
                    continue
            else:
                lp = win.wrap(lp)
            r = win.row(lp)
            A[r * d:(r + 1) * d, c * d:(c + 1) * d] += H.components[m]
        A[c * d:(c + 1) * d, c * d:(c + 1) * d] -= l * H.omega * np.eye(d)
    return SambeOperator(win, d, A, boundary, alpha_F(H, L), H.omega, H.M)


def fold_bz(x, omega: float):
    """Representative of x modulo omega in [-omega/2, omega/2)."""
    x = np.asarray(x, dtype=float)
    r = x - omega * np.floor(x / omega + 0.5)
    r = np.where(r >= omega / 2, r - omega, r)
    r = np.where(r < -omega / 2, r + omega, r)
    return float(r) if r.ndim == 0 else r


def bz_index(x, omega: float):
    """The l with x in BZ_l = [(-l - 1/2) omega, (-l + 1/2) omega)."""
    x = np.asarray(x, dtype=float)
    l = -np.floor(x / omega + 0.5).astype(int)
    return int(l) if l.ndim == 0 else l


def split_fourier(state: np.ndarray, window: SambeWindow, system_dim: int) -> np.ndarray:
    """Reshape a Sambe vector to (2L, system_dim) with row l + L - 1."""
    return np.asarray(state).reshape(window.fourier_dim, system_dim)


def shift_add(state: np.ndarray, l: int, window: SambeWindow, system_dim: int | None = None,
              strict: bool = True, return_lost: bool = False, tol: float = 1e-12):
    """Move the component at Fourier index l' to l' + l.

    In strict mode any weight pushed outside the window raises BoundaryError;
    otherwise it is dropped and the lost norm can be returned.
    """
    state = np.asarray(state)
    flat = state.ndim == 1
    if system_dim is None:
        system_dim = state.size // window.fourier_dim if flat else state.shape[1]
    blocks = split_fourier(state, window, system_dim)
    out = np.zeros_like(blocks)
    n = window.fourier_dim
    k = min(abs(l), n)
    if l >= 0:
        out[k:] = blocks[:n - k]
        lost_blocks = blocks[n - k:]
    else:
        out[:n - k] = blocks[k:]
        lost_blocks = blocks[:k]
    lost = float(np.linalg.norm(lost_blocks))
    if strict and lost > tol:
        raise BoundaryError(f"shift by {l} leaves the window [{window.L}]", lost)
    out = out.reshape(-1) if flat else out
    return (out, lost) if return_lost else out


def embed(state: np.ndarray, src: SambeWindow, dst: SambeWindow, system_dim: int) -> np.ndarray:
    """Copy a Sambe vector from window src into the (larger or smaller) window dst."""
    a = split_fourier(state, src, system_dim)
    out = np.zeros((dst.fourier_dim, system_dim), dtype=complex)
    for l in src.indices:
        if dst.contains(l):
            out[dst.row(l)] = a[src.row(l)]
    return out.reshape(-1)


def reference_cutoff(H: FourierHamiltonian, L: int) -> int:
    """Large window standing in for the infinite Sambe space: L + 3M*ceil(alpha T + 20).

    For decaying components the decay length zeta plays the role of M.
    """
    reach = math.ceil(H.mode.zeta) if H.is_decaying else max(H.M, 1)
    return L + 3 * reach * math.ceil(H.alphaT + 20)


def default_tail_bound(H: FourierHamiltonian, l: int) -> float:
    if H.is_decaying:
        return tail_bound(l, H.M, H.alphaT, "expdecay", zeta=H.mode.zeta)
    return tail_bound(l, H.M, H.alphaT, "exact")


__all__ = ["SambeWindow", "SambeOperator", "build_floquet", "alpha_F", "fold_bz", "bz_index",
           "shift_add", "embed", "split_fourier", "reference_cutoff", "tail_bound", "tail_sum",
           "cutoff_for_accuracy", "cutoff_lieb_robinson", "cutoff_lieb_robinson_decaying",
           "default_tail_bound"]
