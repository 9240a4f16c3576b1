"""Explicit block-encoding unitaries.

A block-encoding stores its ancilla registers as the most significant
tensor factors, so the encoded block is the top-left ``target_dim`` square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, DimensionError, NormalizationError, StructuralError
from .hamiltonian import FourierHamiltonian, PauliTerm, terms_matrix
from .numerics import check_dim, operator_norm, unitarity_defect
from .sambe import SambeWindow, alpha_F, build_floquet

_REL = 1e-12


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    unitary: np.ndarray
    ancilla_dims: tuple
    target_dim: int
    alpha: float
    label: str = ""
    queries: dict = field(default_factory=dict)

    @property
    def n_ancilla_dims(self) -> int:
        return int(np.prod(self.ancilla_dims, dtype=int)) if self.ancilla_dims else 1

    def block(self) -> np.ndarray:
        n = self.target_dim
        return self.unitary[:n, :n]


def householder_completion(a: np.ndarray) -> np.ndarray:
    """Real orthogonal (hence unitary) matrix whose first column is the unit vector ``a``."""
    a = np.asarray(a, dtype=float)
    a = a / np.linalg.norm(a)
    e0 = np.zeros_like(a)
    e0[0] = 1.0
    v = e0 - a
    nv = float(v @ v)
    if nv < 1e-30:
        return np.eye(len(a))
    return np.eye(len(a)) - 2.0 * np.outer(v, v) / nv


def controlled(U: np.ndarray) -> np.ndarray:
    """Control on a leading qubit: block-diag(I, U)."""
    return sla.block_diag(np.eye(U.shape[0]), U)


def _next_pow2(k: int) -> int:
    return 1 << max(0, math.ceil(math.log2(k))) if k > 1 else 1


def build_pauli_encoding(terms, alpha: float, n_qubits: int | None = None) -> BlockEncoding:
    """LCU encoding of sum_j c_j P_j with normalization ``alpha``.

    Coefficient phases go into the selected unitaries.  Spare normalization
    alpha - sum|c_j| is absorbed by a +I / -I pair that cancels in the block.
    """
    terms = [t for t in terms if abs(t.coefficient) > 0]
    if not terms:
        raise ContractViolation("cannot block-encode the zero operator with an LCU")
    n = terms[0].n_qubits if n_qubits is None else n_qubits
    d = 2**n
    lam = float(sum(abs(t.coefficient) for t in terms))
    if alpha < lam * (1 - _REL):
        raise NormalizationError(f"alpha = {alpha} is below the LCU 1-norm {lam}")
    target = terms_matrix(terms, n)
    if len(terms) == 1 and abs(alpha - lam) <= _REL * lam:
        t = terms[0]
        U = (t.coefficient / abs(t.coefficient)) * t.unit_matrix()
        return BlockEncoding(U, (), d, float(alpha), "pauli", {"terms": 1})
    weights = [abs(t.coefficient) / alpha for t in terms]
    unitaries = [(t.coefficient / abs(t.coefficient)) * t.unit_matrix() for t in terms]
    spare = max(0.0, 1.0 - sum(weights))
    if spare > 0:
        weights += [spare / 2, spare / 2]
        unitaries += [np.eye(d), -np.eye(d)]
    A = _next_pow2(len(weights))
    amps = np.zeros(A)
    amps[:len(weights)] = np.sqrt(weights)
    G = householder_completion(amps)
    blocks = unitaries + [np.eye(d)] * (A - len(unitaries))
    select = sla.block_diag(*blocks)
    U = _conjugate_leading(G, select)
    be = BlockEncoding(U, (A,), d, float(alpha), "pauli", {"terms": len(terms)})
    err, _ = verify_encoding(be, target, unitarity=False)
    if err > 1e-10 * alpha:
        raise StructuralError(f"LCU verification failed ({err:.2e})")
    return be


def verify_encoding(be: BlockEncoding, target, unitarity: bool = True) -> tuple[float, float]:
    """(||<0|U|0> alpha - target||, ||U^dag U - I||); the second is nan if skipped."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (be.target_dim, be.target_dim):
        raise StructuralError(f"target shape {target.shape} does not match block size {be.target_dim}")
    if be.unitary.shape[0] != be.n_ancilla_dims * be.target_dim:
        raise StructuralError("unitary size is not ancilla dim times target dim")
    err = operator_norm(be.block() * be.alpha - target)
    return float(err), unitarity_defect(be.unitary) if unitarity else math.nan


def shift_matrix(m: int, L: int) -> np.ndarray:
    """Wrapped Fourier shift |l> -> |(l + m) mod [L]> on the 2L-dim register."""
    win = SambeWindow(L)
    P = np.zeros((2 * L, 2 * L))
    for l in win.indices:
        P[win.row(win.wrap(l + m)), win.row(l)] = 1.0
    return P


def register_bits(alpha_F_value: float, omega: float) -> int:
    """b_F = 1 + ceil(log2(2 alpha_F / omega)): bits absorbing the normalization."""
    return 1 + math.ceil(math.log2(2 * alpha_F_value / omega))


def linear_potential_encoding(L: int, system_dim: int) -> BlockEncoding:
    """One-qubit rotation dilation of -sum_l l |l><l| / L (times identity on the system)."""
    win = SambeWindow(L)
    a = -win.indices / L
    s = np.sqrt(np.clip(1 - a * a, 0, None))
    F = 2 * L
    U = np.zeros((2 * F, 2 * F))
    idx = np.arange(F)
    U[idx, idx] = a
    U[idx, F + idx] = -s
    U[F + idx, idx] = s
    U[F + idx, F + idx] = a
    return BlockEncoding(np.kron(U, np.eye(system_dim)), (2,), F * system_dim, float(L), "linear_potential")


def _interleave(O: np.ndarray, A: int, d: int, P: np.ndarray) -> np.ndarray:
    """Operator on (a, f, sys) from O on (a, sys) and P on f."""
    F = P.shape[0]
    O4 = O.reshape(A, d, A, d)
    W = np.einsum("asbt,fg->afsbgt", O4, P)
    return W.reshape(A * F * d, A * F * d)


def _insert_identity(O: np.ndarray, first: int, rest: int, mid: int) -> np.ndarray:
    """Operator on (first, mid, rest) from O on (first, rest)."""
    O4 = O.reshape(first, rest, first, rest)
    W = np.einsum("arbs,xy->axrbys", O4, np.eye(mid))
    return W.reshape(first * mid * rest, first * mid * rest)


def _conjugate_leading(G: np.ndarray, W: np.ndarray) -> np.ndarray:
    """(G^dag x I) W (G x I) with G acting on the leading register."""
    k = G.shape[0]
    r = W.shape[0] // k
    W4 = W.reshape(k, r, k, r)
    out = np.einsum("ac,arbs,bd->crds", G.conj(), W4, G)
    return out.reshape(k * r, k * r)


def _pad_ancilla(be: BlockEncoding, A: int) -> np.ndarray:
    """Enlarge the ancilla register to dimension A, acting trivially on new states."""
    k = be.n_ancilla_dims
    n = k * be.target_dim
    U = np.eye(A * be.target_dim, dtype=complex)
    U[:n, :n] = be.unitary
    return U


def build_floquet_encoding(H: FourierHamiltonian, L: int, alpha_tilde: float | None = None) -> BlockEncoding:
    """Block-encoding of the wrapped truncated Floquet Hamiltonian.

    Registers, most significant first: combiner c (4), dilation qubit f' (2),
    component index g (2M+1), LCU ancilla a, then Fourier f (2L) and system.
    """
    if H.is_decaying:
        M = max(abs(m) for m in H.present())
    else:
        M = H.M
    S = build_floquet(H, L, "pbc")
    d = H.dim
    F = 2 * L
    aF = alpha_F(H, L)
    subs = {}
    for m in range(-M, M + 1):
        if m in H.components and np.any(H.components[m] != 0):
            terms = H.pauli_terms[m]
            lam = float(sum(abs(t.coefficient) for t in terms))
            subs[m] = build_pauli_encoding(terms, max(H.alpha_m[m], lam), H.n_qubits)
    Lam = float(sum(be.alpha for be in subs.values()))
    need = max(aF, Lam + L * H.omega)
    if alpha_tilde is None:
        alpha_tilde = need
    if alpha_tilde < aF:
        raise NormalizationError(f"alpha_tilde = {alpha_tilde} is below alpha_F = {aF}")
    if alpha_tilde < Lam + L * H.omega:
        raise NormalizationError(
            f"alpha_tilde = {alpha_tilde} is below sum of component normalizations + L omega = {Lam + L * H.omega}")
    A = max((be.n_ancilla_dims for be in subs.values()), default=1)
    G = 2 * M + 1
    total = 4 * 2 * G * A * F * d
    check_dim(total, "Floquet block-encoding")

    # O1 on (g, a, f, sys)
    inner = A * F * d
    select = np.zeros((G * inner, G * inner), dtype=complex)
    for gi, m in enumerate(range(-M, M + 1)):
        if m in subs:
            blk = _interleave(_pad_ancilla(subs[m], A), A, d, shift_matrix(m, L))
        else:
            blk = np.eye(inner)
        select[gi * inner:(gi + 1) * inner, gi * inner:(gi + 1) * inner] = blk
    amps = np.array([math.sqrt(subs[m].alpha / Lam) if m in subs else 0.0 for m in range(-M, M + 1)])
    # G_M maps the first g basis state to sum_m sqrt(alpha_m / Lambda) |m>
    O1 = _conjugate_leading(householder_completion(amps), select)

    # O2 on (f', f, sys) -> (f', g, a, f, sys)
    O2 = linear_potential_encoding(L, d).unitary
    O2 = _insert_identity(O2, 2, F * d, G * A)

    rest = 2 * G * inner
    O1x = np.kron(np.eye(2), O1)
    c_amps = np.array([math.sqrt(Lam / alpha_tilde), math.sqrt(L * H.omega / alpha_tilde),
                       math.sqrt(max(0.0, 1 - (Lam + L * H.omega) / alpha_tilde)), 0.0])
    mid = np.zeros((4 * rest, 4 * rest), dtype=complex)
    mid[:rest, :rest] = O1x
    mid[rest:2 * rest, rest:2 * rest] = O2
    I = np.eye(rest)
    mid[2 * rest:3 * rest, 3 * rest:] = I
    mid[3 * rest:, 2 * rest:3 * rest] = I
    U = _conjugate_leading(householder_completion(c_amps), mid)
    be = BlockEncoding(U, (4, 2, G, A), F * d, float(alpha_tilde), "floquet_pbc",
                       {"component_encodings": len(subs), "linear_potential": 1})
    err, _ = verify_encoding(be, S.matrix, unitarity=False)
    if err > 1e-10 * alpha_tilde:
        raise StructuralError(f"Floquet encoding verification failed ({err:.2e})")
    return be


__all__ = ["BlockEncoding", "build_pauli_encoding", "build_floquet_encoding", "verify_encoding",
           "householder_completion", "controlled", "register_bits", "shift_matrix",
           "linear_potential_encoding", "PauliTerm", "DimensionError"]
