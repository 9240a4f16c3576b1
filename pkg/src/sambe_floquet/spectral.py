"""Quasienergies and Floquet eigenstates by three independent routes.

* diagonalizing a truncated Floquet Hamiltonian (obc or pbc),
* diagonalizing a time-ordered product of short-time propagators,
* diagonalizing the one-period propagator assembled from Sambe-space
  time evolution.

The module also runs the residual and bound checks that compare them.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import bounds
from .errors import ConfigurationError, ContractViolation, StructuralError
from .hamiltonian import FourierHamiltonian, evaluate_many, to_config
from .numerics import check_dim, hermitian_eigendecompose, matrix_exponential_i, unitarity_defect
from .sambe import (SambeOperator, SambeWindow, build_floquet, bz_index, cutoff_lieb_robinson,
                    cutoff_lieb_robinson_decaying, default_tail_bound, embed, fold_bz,
                    reference_cutoff, shift_add)

ORACLE_STEPS = 100_000
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuasiSpectrum:
    """Eigenvalues with eigenvectors as columns, sorted as produced by ``source``."""

    values: np.ndarray
    vectors: np.ndarray
    omega: float
    source: str
    residuals: np.ndarray
    window: SambeWindow | None = None
    system_dim: int | None = None
    central: np.ndarray | None = None

    @property
    def bz(self) -> np.ndarray:
        return bz_index(self.values, self.omega)

    @property
    def folded(self) -> np.ndarray:
        return fold_bz(self.values, self.omega)

    def __len__(self) -> int:
        return len(self.values)

    def subset(self, mask) -> "QuasiSpectrum":
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        cen = None if self.central is None else self.central[idx]
        return QuasiSpectrum(self.values[idx], self.vectors[:, idx], self.omega, self.source,
                             self.residuals[idx], self.window, self.system_dim, cen)

    def central_part(self) -> "QuasiSpectrum":
        if self.central is None:
            return self
        sub = self.subset(self.central)
        order = np.argsort(sub.folded, kind="stable")
        return sub.subset(order)


@dataclass(frozen=True, eq=False)
class FloquetEigenpair:
    quasienergy: float  # folded into the central zone
    eigenvalue: float  # raw truncated eigenvalue
    bz_index: int
    components: np.ndarray  # shape (2L, system_dim), row l + L - 1
    window: SambeWindow

    def component(self, l: int) -> np.ndarray:
        if not self.window.contains(l):
            return np.zeros(self.components.shape[1], dtype=complex)
        return self.components[self.window.row(l)]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.components, axis=1)

    def at_time_zero(self) -> np.ndarray:
        return self.components.sum(axis=0)

    @property
    def sambe_vector(self) -> np.ndarray:
        return self.components.reshape(-1)


# ------------------------------------------------------------ propagators

def _discretized_propagator(H: FourierHamiltonian, t: float, L_steps: int) -> np.ndarray:
    if L_steps < 1:
        raise ContractViolation("L_steps must be >= 1")
    if set(H.present()) <= {0}:
        # constant integrand: the product collapses to one exponential
        return matrix_exponential_i(H.component(0), t)
    d = H.dim
    dt = t / L_steps
    chunk = max(1, min(L_steps, 2_000_000 // (d * d)))
    U = np.eye(d, dtype=complex)
    for start in range(0, L_steps, chunk):
        j = np.arange(start, min(start + chunk, L_steps))
        Hs = evaluate_many(H, (j + 0.5) * dt)
        w, V = np.linalg.eigh(Hs)
        steps = (V * np.exp(-1j * w * dt)[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))
        # pairwise reduction keeps later times on the left
        while len(steps) > 1:
            if len(steps) % 2:
                steps = np.concatenate([steps, np.eye(d, dtype=complex)[None]])
            steps = steps[1::2] @ steps[0::2]
        U = steps[0] @ U
    return U


def lr_cutoff_for(H: FourierHamiltonian, t: float, eps: float) -> int:
    at = H.alpha * abs(t)
    if H.is_decaying:
        return cutoff_lieb_robinson_decaying(H.mode.zeta, at, eps)
    return cutoff_lieb_robinson(H.M, at, eps)


def sambe_propagator(H: FourierHamiltonian, t: float, L_LR: int) -> np.ndarray:
    """U(t;0) = sum_l exp(-i l omega t) <l| exp(-i H_F^L t) |0>."""
    S = build_floquet(H, L_LR, "obc")
    d = H.dim
    w, V = hermitian_eigendecompose(S.matrix)
    r0 = S.window.row(0)
    col = (V * np.exp(-1j * w * t)) @ V[r0 * d:(r0 + 1) * d].conj().T  # (2L d, d)
    col = col.reshape(2 * L_LR, d, d)
    phases = np.exp(-1j * S.window.indices * H.omega * t)
    return np.einsum("l,lij->ij", phases, col)


def floquet_operator(H: FourierHamiltonian, method: str = "discretized", t: float | None = None,
                     *, L_steps: int = ORACLE_STEPS, L_LR: int | None = None,
                     eps_lr: float = 1e-10) -> np.ndarray:
    """Propagator U(t;0); t defaults to one period."""
    t = H.period if t is None else float(t)
    if method == "discretized":
        return _discretized_propagator(H, t, int(L_steps))
    if method == "sambe":
        L_LR = lr_cutoff_for(H, t, eps_lr) if L_LR is None else int(L_LR)
        return sambe_propagator(H, t, L_LR)
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ spectra

def quasienergies_from_unitary(U_T, omega: float, tol: float = 1e-8, source: str = "floquet_op") -> QuasiSpectrum:
    U_T = np.asarray(U_T, dtype=complex)
    defect = unitarity_defect(U_T)
    if defect > tol:
        raise ContractViolation(f"one-period propagator not unitary (defect {defect:.2e})")
    T = 2 * math.pi / omega
    # complex Schur form of a normal matrix is diagonal with orthonormal Schur vectors
    Tm, Z = sla.schur(U_T, output="complex")
    lam = np.diag(Tm)
    eps = fold_bz(-np.angle(lam) / T, omega)
    order = np.argsort(eps, kind="stable")
    eps, Z = eps[order], Z[:, order]
    res = np.linalg.norm(U_T @ Z - Z * np.exp(-1j * eps * T), axis=0)
    return QuasiSpectrum(eps, Z, omega, source, res, central=np.ones(len(eps), bool))


def diagonalize_sambe(S: SambeOperator) -> QuasiSpectrum:
    w, V = hermitian_eigendecompose(S.matrix)
    res = np.linalg.norm(S.matrix @ V - V * w, axis=0)
    bz = bz_index(w, S.omega)
    central = bz == 0
    if central.sum() != S.system_dim:
        # fall back to the eigenvectors most concentrated near l = 0
        blocks = np.abs(V.reshape(S.window.fourier_dim, S.system_dim, -1)) ** 2
        weight = blocks.sum(axis=1)
        mean_l = (S.window.indices[:, None] * weight).sum(axis=0)
        central = np.zeros(len(w), bool)
        central[np.argsort(np.abs(mean_l), kind="stable")[:S.system_dim]] = True
    return QuasiSpectrum(w, V, S.omega, f"sambe_{S.boundary}", res, S.window, S.system_dim, central)


def extract_eigenpair(spec: QuasiSpectrum, index: int) -> FloquetEigenpair:
    if spec.window is None:
        raise StructuralError("eigenpair extraction needs a Sambe spectrum")
    v = spec.vectors[:, index].reshape(spec.window.fourier_dim, spec.system_dim)
    lam = float(spec.values[index])
    return FloquetEigenpair(float(fold_bz(lam, spec.omega)), lam, int(bz_index(lam, spec.omega)),
                            v.copy(), spec.window)


def central_eigenpairs(spec: QuasiSpectrum) -> list[FloquetEigenpair]:
    c = spec.central_part()
    return [extract_eigenpair(c, i) for i in range(len(c))]


def reconstruct_physical(pair: FloquetEigenpair, H: FourierHamiltonian, t: float,
                         U_t: np.ndarray | None = None, method: str = "sambe") -> np.ndarray:
    """exp(i eps~ t) U(t;0) sum_l phi^l."""
    phi0 = pair.at_time_zero()
    if t == 0:
        return phi0
    if U_t is None:
        U_t = floquet_operator(H, method, t)
    return np.exp(1j * pair.eigenvalue * t) * (U_t @ phi0)


# ------------------------------------------------------------ matching

@dataclass(frozen=True)
class Matching:
    pairs: list  # (index_a, index_b, distance in units of omega)
    total: float

    @property
    def max_distance(self) -> float:
        return max((p[2] for p in self.pairs), default=0.0)


def _folded_values(x, omega):
    if isinstance(x, QuasiSpectrum):
        return np.asarray(x.central_part().folded)
    return fold_bz(np.asarray(x, dtype=float), omega)


def match_mod_omega(a, b, omega: float) -> Matching:
    """Greedy minimal-distance matching on the circle R / omega Z."""
    va, vb = np.atleast_1d(_folded_values(a, omega)), np.atleast_1d(_folded_values(b, omega))
    if len(va) != len(vb):
        raise StructuralError(f"spectra have different sizes ({len(va)} vs {len(vb)})")
    ia, ib = np.argsort(va, kind="stable"), np.argsort(vb, kind="stable")
    dist = np.abs(fold_bz(va[ia][:, None] - vb[ib][None, :], omega)) / omega
    cand = sorted((dist[i, j], i, j) for i in range(len(va)) for j in range(len(vb)))
    used_a, used_b, pairs = set(), set(), []
    for dd, i, j in cand:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((int(ia[i]), int(ib[j]), float(dd)))
    pairs.sort()
    return Matching(pairs, float(sum(p[2] for p in pairs)))


def projector_distance(Va: np.ndarray, Vb: np.ndarray) -> float:
    """Operator-norm distance between projectors onto the column spans."""
    Pa = Va @ Va.conj().T
    Pb = Vb @ Vb.conj().T
    return float(np.linalg.norm(Pa - Pb, 2))


# ------------------------------------------------------------ cached references

_CACHE: dict = {}


def _model_key(H: FourierHamiltonian) -> str:
    return json.dumps(to_config(H), sort_keys=True)


def _cached(kind, H, *args, build):
    key = (kind, _model_key(H)) + args
    if key not in _CACHE:
        if len(_CACHE) > 64:
            _CACHE.clear()
        _CACHE[key] = build()
    return _CACHE[key]


@dataclass(frozen=True, eq=False)
class OracleSpectrum:
    U_T: np.ndarray
    spectrum: QuasiSpectrum
    L_steps: int

    @property
    def quasienergies(self) -> np.ndarray:
        return self.spectrum.values

    @property
    def states(self) -> np.ndarray:
        return self.spectrum.vectors

    def error_budget(self, H: FourierHamiltonian) -> float:
        return H.alphaT ** 2 / self.L_steps


def oracle_spectrum(H: FourierHamiltonian, L_steps: int = ORACLE_STEPS) -> OracleSpectrum:
    """Quasienergies and phi_n(0) from the discretized one-period propagator."""
    def build():
        U = floquet_operator(H, "discretized", L_steps=L_steps)
        return OracleSpectrum(U, quasienergies_from_unitary(U, H.omega, source="floquet_op_discretized"), L_steps)
    return _cached("oracle", H, L_steps, build=build)


def sambe_spectrum(H: FourierHamiltonian, L: int, boundary: str = "obc") -> QuasiSpectrum:
    return _cached("sambe", H, L, boundary, build=lambda: diagonalize_sambe(build_floquet(H, L, boundary)))


def reference_spectrum(H: FourierHamiltonian, L: int) -> tuple[int, QuasiSpectrum]:
    L_big = reference_cutoff(H, L)
    return L_big, sambe_spectrum(H, L_big, "obc")


def reference_eigenpairs(H: FourierHamiltonian, L: int) -> list[FloquetEigenpair]:
    """Central-zone eigenpairs from the large reference window."""
    return central_eigenpairs(reference_spectrum(H, L)[1])


def shifted_reference(pair: FloquetEigenpair, l: int, window: SambeWindow) -> np.ndarray:
    """Phi_n^l restricted to ``window`` (the reference must be much larger)."""
    v = shift_add(pair.sambe_vector, l, pair.window, pair.components.shape[1], strict=False)
    return embed(v, pair.window, window, pair.components.shape[1])


# ------------------------------------------------------------ bound checks

@dataclass
class CheckRow:
    model_id: str
    check_id: str
    L: int
    measured: float
    bound: float
    passed: bool
    detail: str = ""


@dataclass
class BoundReport:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failing(self) -> list:
        return [r for r in self.rows if not r.passed]

    def by_check(self, check_id: str) -> list:
        return [r for r in self.rows if r.check_id == check_id]


ALL_CHECKS = ("thm2", "propA1", "prop1", "prop2", "propB1", "propB2", "propB3", "propC1", "propD1", "thmE1")
_SLACK = 1e-12


def _worst(model_id, check_id, L, pairs, detail=""):
    """Row for the (measured, bound) pair with the largest measured/bound ratio."""
    pairs = list(pairs)
    if not pairs:
        return CheckRow(model_id, check_id, L, 0.0, math.inf, True, "empty")
    def ratio(p):
        m, b = p[0], p[1]
        if b == 0:
            return math.inf if m > _SLACK else 0.0
        return m / b
    m, b, *rest = max(pairs, key=ratio)
    ok = all(mm <= bb + _SLACK for mm, bb, *_ in pairs)
    info = detail or (rest[0] if rest else "")
    return CheckRow(model_id, check_id, L, float(m), float(b), bool(ok), str(info))


def _check_thm2(H, L):
    L_big, ref = reference_spectrum(H, L)
    out = []
    for p in central_eigenpairs(ref):
        for l, nrm in zip(p.window.indices, p.norms()):
            out.append((nrm, default_tail_bound(H, int(l)), f"eps={p.quasienergy / H.omega:.6f},l={l}"))
    return out


def _check_propA1(H, L):
    spec = sambe_spectrum(H, L)
    out = []
    for i in range(len(spec)):
        p = extract_eigenpair(spec, i)
        e = abs(p.eigenvalue) / H.omega
        for l, nrm in zip(p.window.indices, p.norms()):
            out.append((nrm, bounds.tail_truncated(int(l), H.M, H.alphaT, e), f"eig={p.eigenvalue / H.omega:.6f},l={l}"))
    return out


def _check_prop1(H, L, oracle):
    spec = sambe_spectrum(H, L)
    b = bounds.eigenvalue_accuracy(L, H.M, H.alphaT)
    out = []
    for e in oracle.quasienergies:
        d = float(np.min(np.abs(spec.values - e))) / H.omega
        out.append((d, b, f"eps={e / H.omega:.6f}"))
    return out


def _check_prop2(H, L, oracle):
    spec = sambe_spectrum(H, L)
    out = []
    for lam in spec.values:
        if abs(lam) > H.omega:
            continue
        d = float(np.min(np.abs(fold_bz(oracle.quasienergies - lam, H.omega)))) / H.omega
        out.append((d, bounds.eigenvalue_soundness(L, H.M, H.alphaT, lam / H.omega), f"eig={lam / H.omega:.6f}"))
    return out


def _check_propB1_B3(H, L, oracle):
    spec = sambe_spectrum(H, L)
    T = H.period
    b1, b3 = [], []
    for i in range(len(spec)):
        p = extract_eigenpair(spec, i)
        e = p.eigenvalue / H.omega
        phi = p.at_time_zero()
        nrm = float(np.linalg.norm(phi))
        b3.append((abs(nrm - 1.0), bounds.norm_deviation(L, H.M, H.alphaT, e), f"eig={e:.6f}"))
        if nrm > 0:
            r = float(np.linalg.norm(oracle.U_T @ phi - np.exp(-1j * p.eigenvalue * T) * phi)) / nrm
            b1.append((r, bounds.evolution_residual(L, H.M, H.alphaT, e), f"eig={e:.6f}"))
    return b1, b3


def _block_norms(E: np.ndarray, nf: int, d: int) -> np.ndarray:
    B = E.reshape(nf, d, nf, d).transpose(0, 2, 1, 3)
    return np.linalg.norm(B, ord=2, axis=(2, 3))


def _check_propB2(H, L):
    T = H.period
    L_big = reference_cutoff(H, L)
    d = H.dim
    E_big = matrix_exponential_i(build_floquet(H, L_big).matrix, T)
    E_L = matrix_exponential_i(build_floquet(H, L).matrix, T)
    big, small = SambeWindow(L_big), SambeWindow(L)
    rows = [big.row(l) for l in small.indices]
    sub = E_big.reshape(2 * L_big, d, 2 * L_big, d)[rows][:, :, rows].reshape(2 * L * d, 2 * L * d)
    norms = _block_norms(sub - E_L, 2 * L, d)
    out = []
    for i, l in enumerate(small.indices):
        for j, lp in enumerate(small.indices):
            dist = bounds.lr_distance(int(l), int(lp), L)
            if H.is_decaying:
                zeta = H.mode.zeta
                z1 = 1.0 / (1.0 / zeta - 1.0 + math.exp(-1.0 / zeta))
                z2 = 1.0 / (1.0 - math.exp(-1.0 / zeta))
                bnd = 2 * math.exp(-dist / z1 + 2 * z2 * H.alphaT + 2 / z2)
            else:
                bnd = bounds.lieb_robinson(H.M, H.alphaT, dist)
            out.append((float(norms[i, j]), bnd, f"l={l},l'={lp}"))
    return out


def _check_propC1(H, L):
    if 2 * L < 2 * max((abs(m) for m in H.present()), default=0) + 1:
        return []
    P = build_floquet(H, L, "pbc").matrix
    win = SambeWindow(L)
    d = H.dim
    out = []
    for p in reference_eigenpairs(H, L):
        for l in win.indices:
            inside = shifted_reference(p, int(l), win)
            E = p.eigenvalue - l * H.omega
            # the wrapped truncation acts on the window only, as in the proof of the bound
            r = float(np.linalg.norm(P @ inside - E * inside))
            out.append((r / H.omega, bounds.pbc_residual(L, int(l), H.M, H.alphaT),
                        f"eps={p.quasienergy / H.omega:.6f},l={l}"))
    return out


def f3(x):
    return -4 * np.asarray(x) ** 3 + 3 * np.asarray(x)


def matrix_poly(H: np.ndarray, coeffs_fn, v: np.ndarray) -> np.ndarray:
    w, V = hermitian_eigendecompose(H)
    return V @ (coeffs_fn(w) * (V.conj().T @ v))


def approx_qsvt_experiment(H: np.ndarray, approx_vecs: np.ndarray, approx_vals: np.ndarray,
                           coeffs: np.ndarray, q: int = 3) -> tuple[float, float, float]:
    """Measure ||f_q(H) psi - f_q(H~) psi|| with psi = sum c_n phi~_n.

    Returns (measured difference, eta, bound).
    """
    approx_vals = np.clip(approx_vals, -1, 1)
    eta = float(np.max(np.linalg.norm(H @ approx_vecs - approx_vecs * approx_vals, axis=0)))
    psi = approx_vecs @ coeffs
    exact = matrix_poly(H, f3, psi)
    approx = approx_vecs @ (f3(approx_vals) * coeffs)
    diff = float(np.linalg.norm(exact - approx))
    return diff, eta, bounds.approx_qsvt_error_bound(q, eta, approx_vecs.shape[1])


def random_approx_qsvt_instance(rng: np.random.Generator, dim: int, n_max: int | None = None,
                                noise: float = 1e-3):
    """Random normalized H with orthonormal near-eigenvectors (seeded)."""
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = (A + A.conj().T) / 2
    H /= np.linalg.norm(H, 2)
    _, V = np.linalg.eigh(H)
    K = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    K = (K + K.conj().T) / 2
    Vt = sla.expm(1j * noise * K) @ V
    n_max = dim if n_max is None else n_max
    cols = rng.choice(dim, size=n_max, replace=False)
    Vt = Vt[:, np.sort(cols)]
    vals = np.real(np.einsum("in,ij,jn->n", Vt.conj(), H, Vt))
    c = rng.normal(size=n_max) + 1j * rng.normal(size=n_max)
    return H, Vt, vals, c / np.linalg.norm(c)


def _check_propD1(H, L, seed=0):
    """Approximate QSVT on the wrapped truncation, using shifted reference eigenvectors."""
    if 2 * L < 2 * max((abs(m) for m in H.present()), default=0) + 1:
        return []
    S = build_floquet(H, L, "pbc")
    Hn = S.matrix / S.alpha_F
    win = SambeWindow(L)
    vecs = []
    for p in reference_eigenpairs(H, L):
        for l in range(-(L // 2) + 1, L // 2 + 1):
            vecs.append(shifted_reference(p, l, win))
    X = np.array(vecs).T
    # Loewdin orthonormalization keeps the vectors as close as possible to the originals
    U, _, Vh = np.linalg.svd(X, full_matrices=False)
    X = U @ Vh
    vals = np.real(np.einsum("in,ij,jn->n", X.conj(), Hn, X))
    rng = np.random.default_rng(seed)
    c = rng.normal(size=X.shape[1]) + 1j * rng.normal(size=X.shape[1])
    diff, eta, bnd = approx_qsvt_experiment(Hn, X, vals, c / np.linalg.norm(c))
    return [(diff, bnd, f"eta={eta:.3e},n_max={X.shape[1]}")]


def verify_bounds(H: FourierHamiltonian, L: int, targets=ALL_CHECKS, *, oracle: OracleSpectrum | None = None,
                  model_id: str | None = None, L_steps: int = ORACLE_STEPS, seed: int = 0) -> BoundReport:
    """Evaluate each requested inequality at cutoff L; one row per check."""
    targets = list(targets)
    unknown = set(targets) - set(ALL_CHECKS)
    if unknown:
        raise ConfigurationError(f"unknown checks {sorted(unknown)}")
    check_dim(2 * reference_cutoff(H, L) * H.dim, "reference window")
    mid = model_id or H.name
    needs_oracle = {"prop1", "prop2", "propB1", "propB3"} & set(targets)
    if needs_oracle and oracle is None:
        oracle = oracle_spectrum(H, L_steps)
    rep = BoundReport()
    b1 = b3 = None
    for c in targets:
        if c == "thm2":
            if H.is_decaying:
                rep.skipped.append((c, "bounded-range bound does not apply to decaying components"))
                continue
            rep.rows.append(_worst(mid, c, L, _check_thm2(H, L)))
        elif c == "thmE1":
            if not H.is_decaying:
                rep.skipped.append((c, "needs a decaying-component model"))
                continue
            rep.rows.append(_worst(mid, c, L, _check_thm2(H, L)))
        elif c == "propA1":
            rep.rows.append(_worst(mid, c, L, _check_propA1(H, L)))
        elif c == "prop1":
            rep.rows.append(_worst(mid, c, L, _check_prop1(H, L, oracle)))
        elif c == "prop2":
            rep.rows.append(_worst(mid, c, L, _check_prop2(H, L, oracle)))
        elif c in ("propB1", "propB3"):
            if b1 is None:
                b1, b3 = _check_propB1_B3(H, L, oracle)
            rep.rows.append(_worst(mid, c, L, b1 if c == "propB1" else b3))
        elif c == "propB2":
            rep.rows.append(_worst(mid, c, L, _check_propB2(H, L)))
        elif c == "propC1":
            pairs = _check_propC1(H, L)
            if not pairs:
                rep.skipped.append((c, "window too small for the wrapped truncation"))
                continue
            rep.rows.append(_worst(mid, c, L, pairs))
        elif c == "propD1":
            pairs = _check_propD1(H, L, seed)
            if not pairs:
                rep.skipped.append((c, "window too small for the wrapped truncation"))
                continue
            rep.rows.append(_worst(mid, c, L, pairs))
    return rep
