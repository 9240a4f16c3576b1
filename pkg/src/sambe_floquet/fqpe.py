"""Spectral-level emulation of Floquet phase estimation.

Two algorithms are emulated.  The physical one estimates quasienergies from
the one-period propagator and returns physical Floquet states.  The Sambe one
runs phase estimation on the wrapped truncated Floquet Hamiltonian of an
enlarged window, post-selects Fourier zones, amplifies with a three-phase
singular-value sequence, and undoes the zone shift by integer arithmetic on
the register.

Register values are integers ``k`` meaning ``k / 2**b_prime`` in units of
omega.  Using omega units throughout makes the b-bit register of the Sambe
algorithm (which also carries ``b_F`` normalization bits) bit-for-bit the
same grid, because the normalization is a power of two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (approx_qsvt_error_bound, cutoff_for_accuracy, negative_part_norm,  # noqa: F401
                     residual_norm_deviation, tail_sum)
from .blockenc import householder_completion, register_bits
from .errors import ConfigurationError, ContractViolation, DimensionError, DomainError, PromiseViolation
from .hamiltonian import FourierHamiltonian
from .numerics import check_dim, hermitian_eigendecompose, unitarity_defect
from .sambe import SambeWindow, alpha_F, build_floquet, bz_index, fold_bz, shift_add
from .spectral import (central_eigenpairs, f3, floquet_operator, quasienergies_from_unitary,
                       reference_cutoff, sambe_spectrum, shifted_reference)

P_WINDOW = 8
QSVT_PHASES = (0.0, -math.pi / 2, -math.pi / 2)


# ------------------------------------------------------------ register semantics

@dataclass(frozen=True)
class RegisterModel:
    """Phase register: ``b_prime`` precision bits plus ``b_F`` normalization bits.

    ``nu`` set means the rounding promise is assumed (single-bin readout);
    ``nu=None`` selects the two-bin readout used without a promise.
    """

    b_prime: int
    b_F: int = 0
    nu: float | None = None

    def __post_init__(self):
        if self.b_prime < 1:
            raise DomainError(f"b_prime must be >= 1, got {self.b_prime}")
        if self.b_F < 0:
            raise DomainError("b_F must be >= 0")
        if self.nu is not None and not 0 < self.nu < 1:
            raise DomainError(f"nu must lie in (0, 1), got {self.nu}")

    @property
    def b(self) -> int:
        return self.b_prime + self.b_F

    @property
    def mode(self) -> str:
        return "no_promise" if self.nu is None else "with_promise"

    @classmethod
    def for_accuracy(cls, eps: float, b_F: int = 0, nu: float | None = None) -> "RegisterModel":
        return cls(precision_bits(eps), b_F, nu)


def precision_bits(eps: float) -> int:
    """Smallest b' >= 1 with 2^-b' <= eps."""
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    b = max(1, math.ceil(-math.log2(eps)))
    while 2.0 ** -(b - 1) <= eps and b > 1:
        b -= 1
    while 2.0 ** -b > eps:
        b += 1
    return b


@dataclass(frozen=True)
class Bin:
    k: int
    bits: int
    weight: float = 1.0

    @property
    def value(self) -> float:
        return self.k / 2**self.bits

    def label(self) -> str:
        return f"{self.k}/{2**self.bits}"


def qpe_register_map(value: float, model: RegisterModel) -> list[Bin]:
    """Bins written for a renormalized eigenvalue ``value`` in [-1/2, 1/2).

    Promise mode gives floor(2^b v)/2^b.  Otherwise the two neighbouring bins
    with probability weights (1 - f, f), f the fractional part of 2^b v.
    """
    if not -0.5 <= value < 0.5:
        raise DomainError(f"register value {value} outside [-1/2, 1/2)")
    return _bins(value, model.b, model.nu is not None)


def _bins(value: float, bits: int, promise: bool) -> list[Bin]:
    y = value * 2**bits
    k = math.floor(y)
    if promise:
        return [Bin(k, bits)]
    f = y - k
    return [Bin(k, bits, 1.0 - f), Bin(k + 1, bits, f)]


def forbidden_distance(values, nu: float, b_prime: int) -> np.ndarray:
    """Signed slack of each value to the forbidden zones; negative means inside."""
    y = np.asarray(values, dtype=float) * 2**b_prime
    r = y - np.floor(y)
    # zones are [x - nu/2, x + nu/2): inside iff r < nu/2 or r >= 1 - nu/2
    return np.minimum(r - nu / 2, (1 - nu / 2) - r) / 2**b_prime


def check_rounding_promise(values, nu: float, b_prime: int) -> tuple[bool, list]:
    """True iff no value (units of omega) falls in a width-nu zone around the b'-bit grid.

    Zones are half-open, so a value exactly at a right edge passes.  The
    second element lists (index, value) pairs that violate.
    """
    v = np.atleast_1d(np.asarray(values, dtype=float))
    y = v * 2**b_prime
    r = y - np.floor(y)
    bad = (r < nu / 2) | (r >= 1 - nu / 2)
    offending = [(int(i), float(v[i])) for i in np.flatnonzero(bad)]
    return (not offending), offending


def inherited_promise_check(H: FourierHamiltonian, L: int, l_range, nu: float, b_prime: int,
                            boundary: str = "obc") -> tuple[bool, list]:
    """Zone check for truncated eigenvalues lying in BZ_l for l in ``l_range``.

    Dividing by the power-of-two normalization maps the width-nu/2 zones at
    b' + b_F bits onto width-nu/2 zones of lambda/omega at b' bits, so the
    check runs on lambda/omega directly.  Failures are reported, not raised.
    """
    spec = sambe_spectrum(H, L, boundary)
    l_set = set(int(l) for l in l_range)
    bz = np.atleast_1d(bz_index(spec.values, H.omega))
    mask = np.array([int(l) in l_set for l in bz])
    vals = spec.values[mask] / H.omega
    ok, off = check_rounding_promise(vals, nu / 2, b_prime)
    return ok, [(int(bz[np.flatnonzero(mask)[i]]), x) for i, x in off]


def quantum_arithmetic(v: float, omega: float) -> tuple[int, float]:
    """Split v = remainder - l*omega with remainder in [-omega/2, omega/2)."""
    l = int(bz_index(v, omega))
    return l, float(v + l * omega)


def _split_bins(k: np.ndarray, b_prime: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer version of quantum_arithmetic on register integers."""
    half = 2 ** (b_prime - 1)
    l = -np.floor_divide(k + half, 2**b_prime)
    return l, k + l * 2**b_prime


# ------------------------------------------------------------ outcomes

@dataclass
class OutcomeEntry:
    k: int
    bits: int
    prob: float
    state: np.ndarray
    bz_index: int | None = None
    members: tuple = ()
    garbage: dict | None = None
    purity: float = 1.0

    @property
    def value(self) -> float:
        """Register value in units of omega."""
        return self.k / 2**self.bits

    def label(self) -> str:
        return f"{self.k}/{2**self.bits}"


@dataclass
class QpeOutcome:
    entries: list
    success_prob: float
    discarded_prob: float
    omega: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(e.prob for e in self.entries) + self.discarded_prob)

    def probabilities(self) -> dict:
        return {e.label(): e.prob for e in self.entries}

    def entry_for(self, value_omega: float, tol: float | None = None) -> OutcomeEntry | None:
        """Entry whose bin is closest (mod 1) to ``value_omega``."""
        if not self.entries:
            return None
        dist = [abs(fold_bz(e.value - value_omega, 1.0)) for e in self.entries]
        i = int(np.argmin(dist))
        if tol is not None and dist[i] > tol:
            return None
        return self.entries[i]

    def to_json(self, include_states: bool = False) -> dict:
        out = []
        for i, e in enumerate(self.entries):
            row = {"bin": e.label(), "prob": float(e.prob), "bz_index": e.bz_index,
                   "state_ref": f"state_{i}"}
            if e.garbage is not None:
                row["garbage"] = {str(l): float(w) for l, w in sorted(e.garbage.items())}
            if include_states:
                row["state"] = [[float(z.real), float(z.imag)] for z in np.asarray(e.state).ravel()]
            out.append(row)
        return {"entries": out, "success_prob": float(self.success_prob),
                "discarded_prob": float(self.discarded_prob),
                "diagnostics": _jsonable(self.diagnostics)}

    def sample(self, shots: int, seed: int = 0) -> dict:
        """Seeded measurement counts over entries (plus 'discarded')."""
        rng = np.random.default_rng(seed)
        labels = [e.label() for e in self.entries] + ["discarded"]
        p = np.array([e.prob for e in self.entries] + [self.discarded_prob])
        p = np.clip(p, 0, None)
        counts = rng.multinomial(shots, p / p.sum())
        return {lab: int(c) for lab, c in zip(labels, counts) if c}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _normalize_psi(psi, dim: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (dim,):
        raise DimensionError(f"initial state has size {psi.size}, expected {dim}")
    n = np.linalg.norm(psi)
    if abs(n - 1) > 1e-10:
        raise ContractViolation(f"initial state must be normalized (norm {n})")
    return psi


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude amplitude is real and positive."""
    v = np.asarray(v, dtype=complex)
    i = int(np.argmax(np.abs(v)))
    if abs(v[i]) == 0:
        return v
    return v * (abs(v[i]) / v[i])


# ------------------------------------------------------------ physical-state algorithm

def fqpe_physical(H: FourierHamiltonian, psi, eps: float, delta: float, nu: float | None = None,
                  t: float = 0.0, *, b_prime: int | None = None, promise: bool | None = None) -> QpeOutcome:
    """Estimate (eps_n)_b and return phi_n(t) for each register outcome.

    The one-period propagator comes from Sambe-space evolution with a
    Lieb-Robinson window certified at accuracy ``delta``.  With ``nu`` the
    rounding promise is checked and a single bin per eigenvalue is written;
    ``promise=False`` forces the two-bin readout.
    """
    psi = _normalize_psi(psi, H.dim)
    bp = precision_bits(eps) if b_prime is None else int(b_prime)
    promise = True if promise is None else promise
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    U_T = floquet_operator(H, "sambe", eps_lr=delta)
    spec = quasienergies_from_unitary(U_T, H.omega, tol=max(1e-8, 10 * delta), source="sambe_propagator")
    x = spec.values / H.omega
    if nu is not None:
        ok, off = check_rounding_promise(x, nu, bp)
        if not ok:
            raise PromiseViolation(f"{len(off)} quasienergies inside forbidden zones at b'={bp}, nu={nu}", off)
    c = spec.vectors.conj().T @ psi
    if t != 0:
        U_t = floquet_operator(H, "sambe", t, eps_lr=delta)
    else:
        U_t = np.eye(H.dim, dtype=complex)
    acc: dict[int, np.ndarray] = {}
    members: dict[int, list] = {}
    for n in range(len(x)):
        for b in _bins(float(x[n]), bp, promise):
            if b.weight == 0:
                continue
            phase = np.exp(1j * b.value * H.omega * t)
            vec = math.sqrt(b.weight) * c[n] * phase * (U_t @ spec.vectors[:, n])
            acc[b.k] = acc.get(b.k, 0) + vec
            members.setdefault(b.k, []).append(n)
    entries = []
    for k in sorted(acc):
        v = acc[k]
        p = float(np.vdot(v, v).real)
        if p <= 1e-28:
            continue
        entries.append(OutcomeEntry(k, bp, p, _fix_phase(v / math.sqrt(p)), None, tuple(members[k])))
    total = sum(e.prob for e in entries)
    diag = {"b_prime": bp, "mode": "with_promise" if promise else "no_promise",
            "quasienergies": spec.values.tolist(), "overlaps": (np.abs(c) ** 2).tolist(),
            "unitarity_defect": unitarity_defect(U_T)}
    return QpeOutcome(entries, float(total), max(0.0, 1.0 - total), H.omega, diag)


# ------------------------------------------------------------ initial Sambe state

def uniform_fourier_amplitudes(L: int, p: int = P_WINDOW) -> np.ndarray:
    """u_l = 1/sqrt(8L) for l in [4L], zero elsewhere in the window [pL]."""
    if p < 4:
        raise ConfigurationError("the enlarged window needs p >= 4")
    win = SambeWindow(p * L)
    u = np.zeros(win.fourier_dim)
    inside = (win.indices >= -4 * L + 1) & (win.indices <= 4 * L)
    u[inside] = 1.0 / math.sqrt(8 * L)
    return u


def build_initial_sambe_state(psi, L: int, p: int = P_WINDOW) -> np.ndarray:
    """(1/sqrt(8L)) sum_{l in [4L]} |l> x psi, as a vector on the window [pL]."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ContractViolation("initial state must be normalized")
    check_dim(2 * p * L * psi.size, "initial Sambe state")
    return np.kron(uniform_fourier_amplitudes(L, p), psi)


def uniform_state_unitary(L: int, p: int = P_WINDOW) -> np.ndarray:
    """Real orthogonal map |0>_f -> uniform superposition over [4L] (Householder)."""
    win = SambeWindow(p * L)
    u = uniform_fourier_amplitudes(L, p)
    # reorder so that row(0) is the first basis vector of the completion
    r0 = win.row(0)
    perm = np.r_[r0, np.delete(np.arange(win.fourier_dim), r0)]
    Q = householder_completion(u[perm])
    out = np.zeros_like(Q)
    out[np.ix_(perm, perm)] = Q
    return out


@dataclass
class InitialDecomposition:
    L: int
    residual_norm: float  # ||Psi_1||
    perp_norm: float  # ||P(BZ_{L+1}^{6L}) Psi_1||, about 1/2
    neg_norm: float  # ||Psi_neg||
    residual_bound: float  # bound on | ||Psi_1|| - 1/2 |
    neg_bound: float
    coherent: np.ndarray
    per_state: list

    @property
    def residual_deviation(self) -> float:
        return abs(self.residual_norm - 0.5)

    @property
    def passed(self) -> bool:
        return self.residual_deviation <= self.residual_bound and self.neg_norm <= self.neg_bound


def _shifted_block(pairs, ls, window: SambeWindow) -> np.ndarray:
    cols = [shifted_reference(pr, int(l), window) for l in ls for pr in pairs]
    return np.array(cols).T


def decompose_initial_state(psi, H: FourierHamiltonian, L: int, p: int = P_WINDOW) -> InitialDecomposition:
    """Split the initial Sambe state into coherent, high-zone and negligible parts.

    Exact Floquet eigenvectors come from a reference window much larger than
    [pL] and are shifted and restricted to [pL].
    """
    psi = _normalize_psi(psi, H.dim)
    win = SambeWindow(p * L)
    d = H.dim
    pairs = central_eigenpairs(sambe_spectrum(H, reference_cutoff(H, p * L), "obc"))
    phi0 = np.array([pr.at_time_zero() for pr in pairs]).T  # columns phi_n(0)
    c = np.linalg.solve(phi0, psi) if phi0.shape[0] == phi0.shape[1] else phi0.conj().T @ psi
    Psi0 = build_initial_sambe_state(psi, L, p)
    coh_ls = np.arange(-3 * L + 1, 3 * L + 1)
    high_ls = [l for l in range(-6 * L + 1, 6 * L + 1) if not (-L <= l <= L + 1)]
    B_coh = _shifted_block(pairs, coh_ls, win)  # columns ordered (l, n)
    coef = np.tile(c, len(coh_ls)) / math.sqrt(8 * L)
    coherent = B_coh @ coef
    Psi1 = Psi0 - coherent
    B_hi = _shifted_block(pairs, high_ls, win)
    # Loewdin orthonormalization: the shifted restrictions are orthonormal only up to tails
    Q, _ = np.linalg.qr(B_hi)
    perp = Q @ (Q.conj().T @ Psi1)
    neg = Psi1 - perp
    M_eff = _reach(H)
    coeff_l1 = float(np.sum(np.abs(c)))
    per_state = []
    for n in range(len(pairs)):
        # single-eigenstate decomposition: same construction with psi = phi_n(0)
        cn = np.zeros(len(pairs), dtype=complex)
        cn[n] = 1.0
        v0 = np.kron(uniform_fourier_amplitudes(L, p), phi0[:, n])
        r1 = v0 - B_coh @ (np.tile(cn, len(coh_ls)) / math.sqrt(8 * L))
        pp = Q @ (Q.conj().T @ r1)
        per_state.append({"n": n, "quasienergy": pairs[n].quasienergy,
                          "phi0_norm": float(np.linalg.norm(phi0[:, n])),
                          "residual_norm": float(np.linalg.norm(r1)),
                          "perp_norm": float(np.linalg.norm(pp)),
                          "neg_norm": float(np.linalg.norm(r1 - pp))})
    return InitialDecomposition(
        L, float(np.linalg.norm(Psi1)), float(np.linalg.norm(perp)), float(np.linalg.norm(neg)),
        coeff_l1 * residual_norm_deviation(L, M_eff, H.alphaT),
        negative_part_norm(L, M_eff, H.alphaT, coeff_l1), coherent, per_state)


def _reach(H: FourierHamiltonian) -> int:
    """Hopping range entering the L / (2M+1) decay rates."""
    return math.ceil(H.mode.zeta) if H.is_decaying else H.M


# ------------------------------------------------------------ generic dense QSVT

def phased_projector(P: np.ndarray, theta: float) -> np.ndarray:
    """R_P(theta) = e^{i theta} P + e^{-i theta} (I - P)."""
    I = np.eye(P.shape[0])
    return np.exp(1j * theta) * P + np.exp(-1j * theta) * (I - P)


def qsvt_sequence(U: np.ndarray, Pi_in: np.ndarray, Pi_out: np.ndarray, theta=QSVT_PHASES) -> np.ndarray:
    """Alternating sequence R_out(t1) U R_in(t2) U^dag R_out(t3) U ... (odd length)."""
    q = len(theta)
    if q % 2 == 0:
        raise DomainError("the phase list must have odd length")
    W = U
    for i in range(q - 1, 0, -1):
        if (q - 1 - i) % 2 == 0:
            W = phased_projector(Pi_out, theta[i]) @ W
            W = U.conj().T @ W
        else:
            W = phased_projector(Pi_in, theta[i]) @ W
            W = U @ W
    return phased_projector(Pi_out, theta[0]) @ W


@dataclass
class QsvtResult:
    matrix_block: np.ndarray  # Pi_out W Pi_in
    semantic_block: np.ndarray  # Wl f(S) Wr^dag
    singular_values: np.ndarray
    agreement: float


def qsvt_amplify(U: np.ndarray, Pi_in: np.ndarray, Pi_out: np.ndarray, theta=QSVT_PHASES) -> QsvtResult:
    """Apply f3 to the singular values of Pi_out U Pi_in in two independent ways."""
    W = qsvt_sequence(U, Pi_in, Pi_out, theta)
    blk = Pi_out @ W @ Pi_in
    A = Pi_out @ U @ Pi_in
    Wl, s, Wrh = np.linalg.svd(A)
    sem = (Wl * f3(s)) @ Wrh
    # the zero singular values contribute nothing since f3 is odd
    return QsvtResult(blk, sem, s, float(np.linalg.norm(blk - sem, 2)))


# ------------------------------------------------------------ Sambe-space algorithm

class SambeQpeEngine:
    """Phase estimation on the wrapped Floquet Hamiltonian of the window [pL].

    The joint (register, Sambe) state is stored as an (R, D) array whose
    columns are coordinates in the eigenbasis of the wrapped Hamiltonian and
    whose rows are the register values that can ever be occupied.  In that
    basis the phase-estimation unitary is one Householder reflection per
    column, sending register 0 to the bin (or two-bin superposition) of the
    corresponding eigenvalue.
    """

    def __init__(self, H: FourierHamiltonian, L: int, b_prime: int, promise: bool = True,
                 p: int = P_WINDOW):
        if p < 7:
            raise ConfigurationError("the enlarged window needs p >= 7")
        self.H, self.L, self.p, self.b_prime, self.promise = H, int(L), int(p), int(b_prime), bool(promise)
        self.d = H.dim
        self.window = SambeWindow(p * L)
        D = 2 * p * L * self.d
        check_dim(D, "enlarged Sambe window")
        S = build_floquet(H, p * L, "pbc")
        self.S = S
        self.alpha_F = S.alpha_F
        self.b_F = register_bits(S.alpha_F, H.omega)
        self.w, self.V = hermitian_eigendecompose(S.matrix)
        y = self.w / H.omega * 2**b_prime
        k1 = np.floor(y).astype(np.int64)
        if promise:
            k2 = k1
            a1, a2 = np.ones(D), np.zeros(D)
        else:
            f = y - k1
            k2 = k1 + 1
            a1, a2 = np.sqrt(1 - f), np.sqrt(f)
        vals = np.unique(np.concatenate([[0], k1, k2]))
        # register row 0 holds the value 0
        vals = np.concatenate([[0], vals[vals != 0]])
        self.reg_values = vals
        lookup = {int(v): i for i, v in enumerate(vals)}
        self.k1, self.k2 = k1, k2
        self.i1 = np.array([lookup[int(k)] for k in k1])
        self.i2 = np.array([lookup[int(k)] for k in k2])
        self.a1, self.a2 = a1, a2
        zone = np.atleast_1d(bz_index(vals / 2**b_prime, 1.0))
        self.good_rows = (zone >= -L + 1) & (zone <= L)
        self.u = uniform_fourier_amplitudes(L, p)
        self._cols = np.arange(D)

    @property
    def R(self) -> int:
        return len(self.reg_values)

    @property
    def D(self) -> int:
        return self.V.shape[0]

    @property
    def b(self) -> int:
        return self.b_prime + self.b_F

    # --- elementary operations on (R, D) states in eigen-coordinates
    def initial(self, psi) -> np.ndarray:
        X = np.zeros((self.R, self.D), dtype=complex)
        X[0] = self.V.conj().T @ np.kron(self.u, psi)
        return X

    def apply_qpe(self, X: np.ndarray) -> np.ndarray:
        """Hermitian, self-inverse phase-estimation reflection."""
        X = X.copy()
        cols = self._cols
        z1, z2 = self.i1 == 0, self.i2 == 0
        n1, n2 = ~z1, ~z2
        v0 = 1.0 - self.a1 * z1 - self.a2 * z2
        c1 = X[self.i1, cols]
        c2 = X[self.i2, cols]
        vx = v0 * X[0] - self.a1 * n1 * c1 - self.a2 * n2 * c2
        vn = v0 * v0 + self.a1**2 * n1 + self.a2**2 * n2
        coef = np.where(vn > 1e-28, 2 * vx / np.where(vn > 1e-28, vn, 1.0), 0.0)
        X[0] -= coef * v0
        X[self.i1[n1], cols[n1]] += coef[n1] * self.a1[n1]
        X[self.i2[n2], cols[n2]] += coef[n2] * self.a2[n2]
        return X

    def apply_good_phase(self, X: np.ndarray, theta: float) -> np.ndarray:
        ph = np.where(self.good_rows, np.exp(1j * theta), np.exp(-1j * theta))
        return X * ph[:, None]

    def apply_input_phase(self, X: np.ndarray, theta: float) -> np.ndarray:
        """U_uni R_0(theta) U_uni^dag: phase on the initial-state subspace."""
        comp = (self.V @ X[0]).reshape(-1, self.d)
        y = self.u @ comp
        comp = np.exp(-1j * theta) * comp + (np.exp(1j * theta) - np.exp(-1j * theta)) * np.outer(self.u, y)
        X = X * np.exp(-1j * theta)
        X[0] = self.V.conj().T @ comp.reshape(-1)
        return X

    def first_pass(self, psi) -> np.ndarray:
        return self.apply_qpe(self.initial(psi))

    def amplify(self, psi, theta=QSVT_PHASES) -> np.ndarray:
        q = len(theta)
        X = self.first_pass(psi)
        for i in range(q - 1, 0, -1):
            if (q - 1 - i) % 2 == 0:
                X = self.apply_qpe(self.apply_good_phase(X, theta[i]))
            else:
                X = self.apply_qpe(self.apply_input_phase(X, theta[i]))
        return self.apply_good_phase(X, theta[0])

    def good_part(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.good_rows[:, None], X, 0)

    # --- block singular values
    def gram(self) -> np.ndarray:
        """A^dag A for A = Pi_L U (U_uni|0> x I) restricted to the system input."""
        d = self.d
        cols = [self.good_part(self.first_pass(e)).reshape(-1) for e in np.eye(d)]
        B = np.array(cols).T
        return B.conj().T @ B

    def singular_values(self) -> np.ndarray:
        ev = np.linalg.eigvalsh(self.gram())
        return np.sqrt(np.clip(ev, 0, None))[::-1]

    def semantic_amplify(self, psi) -> np.ndarray:
        """Pi_L-part of the f3 singular-value transform, via the Gram matrix."""
        G = self.gram()
        ev, Wv = np.linalg.eigh(G)
        s = np.sqrt(np.clip(ev, 0, None))
        # f3(s)/s = 3 - 4 s^2 is a polynomial, so s = 0 needs no special case
        beta = Wv @ ((3 - 4 * s * s) * (Wv.conj().T @ psi))
        return self.good_part(self.first_pass(beta))

    # --- dense reference for small instances
    def dense_operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(U, Pi_in, Pi_out) as explicit matrices in (register, Sambe) coordinates."""
        R, D, d = self.R, self.D, self.d
        check_dim(R * D, "dense phase-estimation operator")
        Uq = np.zeros((R * D, R * D), dtype=complex)
        for j in range(D):
            t = np.zeros(R)
            t[self.i1[j]] += self.a1[j]
            t[self.i2[j]] += self.a2[j]
            v = -t
            v[0] += 1.0
            nv = v @ v
            Rj = np.eye(R) - (2 * np.outer(v, v) / nv if nv > 1e-28 else 0)
            P = np.outer(self.V[:, j], self.V[:, j].conj())
            Uq += np.kron(Rj, P)
        Uuni = np.kron(uniform_state_unitary(self.L, self.p), np.eye(d))
        U = Uq @ np.kron(np.eye(R), Uuni)
        e0 = np.zeros(R)
        e0[0] = 1
        f0 = np.zeros(self.window.fourier_dim)
        f0[self.window.row(0)] = 1
        Pi_in = np.kron(np.diag(e0), np.kron(np.diag(f0), np.eye(d)))
        Pi_out = np.kron(np.diag(self.good_rows.astype(float)), np.eye(D))
        return U, Pi_in, Pi_out

    # --- readout
    def to_computational(self, X: np.ndarray) -> np.ndarray:
        return X @ self.V.T

    def readout(self, X: np.ndarray, keep=None) -> tuple[list, float, float]:
        """Division by omega on each good register value, shift back, group by remainder.

        Returns (entries, kept probability, norm lost by shifting).
        """
        comp = self.to_computational(self.good_part(X))
        l_q, k_rem = _split_bins(self.reg_values, self.b_prime)
        groups: dict[int, list] = {}
        lost_sq = 0.0
        for r in np.flatnonzero(self.good_rows):
            vec = comp[r]
            nrm = np.linalg.norm(vec)
            if nrm < 1e-300:
                continue
            back, lost = shift_add(vec, int(-l_q[r]), self.window, self.d, strict=False, return_lost=True)
            lost_sq += lost**2
            groups.setdefault(int(k_rem[r]), []).append((int(l_q[r]), back))
        entries = []
        for k in sorted(groups):
            if keep is not None and not keep(k):
                continue
            parts = groups[k]
            mat = np.array([v for _, v in parts])  # (n_l, D)
            prob = float(np.sum(np.abs(mat) ** 2))
            if prob <= 1e-28:
                continue
            # reduced state of the Sambe register after tracing the quotient register
            _, sv, vh = np.linalg.svd(mat, full_matrices=False)
            top = vh[0]
            purity = float(np.sum(sv**4) / np.sum(sv**2) ** 2)
            garbage = {l: float(np.sum(np.abs(v) ** 2) / prob) for l, v in parts}
            entries.append(OutcomeEntry(k, self.b_prime, prob, _fix_phase(top), None,
                                        tuple(sorted(garbage)), garbage, purity))
        return entries, float(sum(e.prob for e in entries)), math.sqrt(lost_sq)

    def central_states(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues in BZ_0 and their eigenvectors (computational coordinates)."""
        z = np.atleast_1d(bz_index(self.w, self.H.omega))
        idx = np.flatnonzero(z == 0)
        return self.w[idx], self.V[:, idx]

    def garbage_norms(self) -> list:
        """p_i^n = sqrt(sum_l |p_i^{nl}|^2 / 2L) for each central eigenstate n."""
        z = np.atleast_1d(bz_index(self.w, self.H.omega))
        folded = fold_bz(self.w, self.H.omega)
        out = []
        cen = np.flatnonzero(z == 0)
        for n in cen:
            p0 = p1 = 0.0
            count = 0
            for l in range(-self.L + 1, self.L + 1):
                idx = np.flatnonzero(z == l)
                if not len(idx):
                    continue
                j = idx[np.argmin(np.abs(fold_bz(folded[idx] - folded[n], self.H.omega)))]
                p0 += self.a1[j] ** 2
                p1 += self.a2[j] ** 2
                count += 1
            p0, p1 = math.sqrt(p0 / (2 * self.L)), math.sqrt(p1 / (2 * self.L))
            out.append({"quasienergy": float(self.w[n]), "p0": p0, "p1": p1,
                        "sum_sq": p0 * p0 + p1 * p1, "zones": count})
        return out


def default_sambe_cutoff(H: FourierHamiltonian, accuracy: float) -> int:
    """Cutoff L at which truncated eigenvalues reach ``accuracy`` (units of omega)."""
    acc = min(max(accuracy, 1e-15), 0.5)
    return max(1, cutoff_for_accuracy(_reach(H), H.alphaT, acc))


def _run_sambe(H, psi, eps, delta, nu, L, b_prime, promise, p, check_matrix):
    psi = _normalize_psi(psi, H.dim)
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    bp = precision_bits(eps) if b_prime is None else int(b_prime)
    if L is None:
        acc = delta if nu is None else min(delta, nu / 2 ** (bp + 1))
        L = default_sambe_cutoff(H, acc)
    eng = SambeQpeEngine(H, L, bp, promise=promise, p=p)
    if nu is not None:
        ok, off = inherited_promise_check(H, p * L, range(-L + 1, L + 1), nu, bp, boundary="pbc")
        if not ok:
            raise PromiseViolation(f"{len(off)} truncated eigenvalues violate the inherited promise", off)
    first = eng.first_pass(psi)
    pre = float(np.sum(np.abs(eng.good_part(first)) ** 2))
    s = eng.singular_values()
    X = eng.amplify(psi)
    good = eng.good_part(X)
    post = float(np.sum(np.abs(good) ** 2))
    diag = {"L": L, "p": p, "b_prime": bp, "b_F": eng.b_F, "b": eng.b, "alpha_F": eng.alpha_F,
            "mode": "with_promise" if promise else "no_promise",
            "pre_qaa_success": pre, "post_qaa_success": post,
            "singular_values": s.tolist(), "delta_approx": float(np.max(np.abs(s - 0.5))),
            "amplified_weight_f3": float(np.sum(f3(s) ** 2) / len(s)),
            "tail_sum": tail_sum(L, _reach(H), H.alphaT), "register_rows": eng.R}
    if check_matrix:
        sem = eng.semantic_amplify(psi)
        diag["matrix_vs_semantic"] = float(np.linalg.norm(good - sem))
    return eng, X, diag


def fqpe_sambe(H: FourierHamiltonian, psi, eps: float, delta: float, nu: float | None = None, *,
               L: int | None = None, b_prime: int | None = None, p: int = P_WINDOW,
               check_matrix: bool = True, return_engine: bool = False):
    """Quasienergies with Sambe-space eigenvectors, post-selected and amplified.

    Entries carry remainder bins (units of omega), the dominant Sambe state
    after tracing the quotient register, and the quotient weights as
    ``garbage``.  Everything outside the kept zones is ``discarded_prob``.
    """
    eng, X, diag = _run_sambe(H, psi, eps, delta, nu, L, b_prime, True, p, check_matrix)
    entries, kept, lost = eng.readout(X)
    diag["shift_lost_norm"] = lost
    out = QpeOutcome(entries, kept, max(0.0, 1.0 - kept), H.omega, diag)
    return (out, eng) if return_engine else out


def fqpe_sambe_no_promise(H: FourierHamiltonian, psi, eps: float, delta: float, *,
                          L: int | None = None, b_prime: int | None = None, p: int = P_WINDOW,
                          check_matrix: bool = True, return_engine: bool = False):
    """Two-bin readout without a promise; remainders near the zone edge are discarded."""
    eng, X, diag = _run_sambe(H, psi, eps, delta, None, L, b_prime, False, p, check_matrix)
    bp = eng.b_prime
    half = 2 ** (bp - 1)
    margin = math.ceil(eps * 2**bp)

    def keep(k):
        return -half + margin <= k < half - margin

    entries, kept, lost = eng.readout(X, keep)
    diag["shift_lost_norm"] = lost
    diag["garbage_norms"] = eng.garbage_norms()
    diag["edge_margin_bins"] = margin
    out = QpeOutcome(entries, kept, max(0.0, 1.0 - kept), H.omega, diag)
    return (out, eng) if return_engine else out


# ------------------------------------------------------------ cost shapes

COST_LABEL = "asymptotic shape, not a gate count"


def _check_cost_params(params: dict, needed) -> dict:
    out = {}
    for k in needed:
        if k not in params:
            raise DomainError(f"cost formula needs parameter {k!r}")
        v = float(params[k])
        if k in ("eps", "delta", "nu", "gamma", "Delta") and not 0 < v <= 1:
            raise DomainError(f"{k} must lie in (0, 1], got {v}")
        if k in ("alphaT", "N") and v < 0:
            raise DomainError(f"{k} must be >= 0")
        out[k] = v
    return out


def cost_formulas(params: dict, which: str) -> dict:
    """Leading query-count expressions with all constants set to 1.

    ``which`` is one of thm3, thm4, thm4_no_promise, prep_physical,
    prep_sambe, prep_static.  Logs are natural.
    """
    w = which.lower()
    ln = math.log
    if w == "thm3":
        q = _check_cost_params(params, ("alphaT", "eps", "delta", "nu"))
        m = min(q["eps"], q["delta"]) * q["nu"]
        queries = (q["alphaT"] + ln(1 / m)) / m * ln(1 / q["delta"])
        terms = {"queries_O_Hm": queries}
    elif w in ("thm4", "thm4_no_promise"):
        q = _check_cost_params(params, ("alphaT", "N", "eps", "delta") + (("nu",) if w == "thm4" else ()))
        nu = q.get("nu", 1.0)
        en = q["eps"] * nu
        queries = (q["alphaT"] + q["N"] + ln(1 / (en * q["delta"]))) / en * ln(1 / q["delta"])
        terms = {"queries_O_Hm": queries}
    elif w == "prep_physical":
        q = _check_cost_params(params, ("alphaT", "gamma", "Delta", "delta"))
        g, D, dl = q["gamma"], q["Delta"], q["delta"]
        terms = {"queries_O_Hm": (q["alphaT"] + ln(1 / D)) / (g * D) * ln(1 / dl) * ln(1 / (g * dl)),
                 "queries_U_psi": ln(1 / dl) / g}
    elif w == "prep_sambe":
        q = _check_cost_params(params, ("alphaT", "N", "gamma", "Delta", "delta"))
        g, D, dl = q["gamma"], q["Delta"], q["delta"]
        terms = {"queries_O_Hm": (q["alphaT"] + q["N"] + ln(1 / (D * g * dl))) / (g * D)
                 * ln(1 / dl) * ln(1 / (g * dl)),
                 "queries_U_psi": ln(1 / dl) / g}
    elif w == "prep_static":
        q = _check_cost_params(params, ("gamma", "Delta", "delta"))
        g, D, dl = q["gamma"], q["Delta"], q["delta"]
        terms = {"queries_O_H": 1 / (g * D) * ln(1 / dl) * ln(1 / (g * dl)),
                 "queries_U_psi": ln(1 / dl) / g}
    else:
        raise DomainError(f"unknown cost formula {which!r}")
    return {"formula": w, "label": COST_LABEL, "params": dict(params), **terms}


__all__ = [
    "RegisterModel", "Bin", "precision_bits", "qpe_register_map", "check_rounding_promise",
    "forbidden_distance", "inherited_promise_check", "quantum_arithmetic", "OutcomeEntry", "QpeOutcome",
    "fqpe_physical", "build_initial_sambe_state", "uniform_state_unitary", "decompose_initial_state",
    "InitialDecomposition", "phased_projector", "qsvt_sequence", "qsvt_amplify", "QsvtResult",
    "SambeQpeEngine", "fqpe_sambe", "fqpe_sambe_no_promise", "approx_qsvt_error_bound",
    "cost_formulas", "default_sambe_cutoff", "COST_LABEL", "P_WINDOW", "QSVT_PHASES",
]
