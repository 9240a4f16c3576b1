"""Time-periodic Hamiltonians H(t) = sum_m H_m exp(-i m omega t).

Two model classes are supported: a bounded Fourier range |m| <= M, and
components whose norms decay as alpha*exp(-|m|/zeta).  Pauli strings are read
with the leftmost character acting on the most significant qubit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError, ValidationError
from .numerics import is_hermitian, operator_norm

MAX_BOUNDED_M = 8
ETA_MACHINE = 1e-14
_HERM_TOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    string: str

    def __post_init__(self):
        if not self.string or any(c not in PAULI for c in self.string):
            raise ValidationError(f"invalid Pauli string {self.string!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.string)

    def unit_matrix(self) -> np.ndarray:
        return pauli_matrix(self.string)

    def matrix(self) -> np.ndarray:
        return self.coefficient * self.unit_matrix()

    def adjoint(self) -> "PauliTerm":
        return PauliTerm(complex(np.conj(self.coefficient)), self.string)


def pauli_matrix(string: str) -> np.ndarray:
    return reduce(np.kron, (PAULI[c] for c in string))


def terms_matrix(terms, n_qubits: int) -> np.ndarray:
    out = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for t in terms:
        out += t.matrix()
    return out


def pauli_decompose(A: np.ndarray, tol: float = 1e-15) -> list[PauliTerm]:
    """Expand a 2^N x 2^N matrix in the Pauli basis, dropping negligible terms."""
    dim = A.shape[0]
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise ValidationError(f"matrix dimension {dim} is not a power of two")
    out = []
    for idx in np.ndindex(*(4,) * n):
        s = "".join("IXYZ"[i] for i in idx)
        c = np.trace(pauli_matrix(s) @ A) / dim
        if abs(c) > tol:
            out.append(PauliTerm(complex(c), s))
    return out


@dataclass(frozen=True)
class BoundedMode:
    M: int
    kind: str = field(default="bounded", init=False)


@dataclass(frozen=True)
class DecayingMode:
    alpha: float
    zeta: float
    kind: str = field(default="decaying", init=False)

    @property
    def M_eff(self) -> int:
        if self.alpha <= ETA_MACHINE:
            return 0
        return max(0, math.ceil(self.zeta * math.log(self.alpha / ETA_MACHINE)))


@dataclass(frozen=True, eq=False)
class FourierHamiltonian:
    """Immutable time-periodic Hamiltonian.

    ``components`` maps m to the dense H_m (absolute energy units); ``terms``
    optionally keeps the Pauli expansion used for block-encodings.
    """

    n_qubits: int
    period: float
    components: Mapping[int, np.ndarray]
    alpha_m: Mapping[int, float]
    mode: BoundedMode | DecayingMode
    terms: Mapping[int, tuple] = field(default_factory=dict)
    name: str = "model"

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.period

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def M(self) -> int:
        if isinstance(self.mode, BoundedMode):
            return self.mode.M
        return self.mode.M_eff

    @property
    def is_decaying(self) -> bool:
        return isinstance(self.mode, DecayingMode)

    @property
    def alpha(self) -> float:
        if self.is_decaying:
            return self.mode.alpha
        return max(self.alpha_m.values(), default=0.0)

    @property
    def alphaT(self) -> float:
        return self.alpha * self.period

    def component(self, m: int) -> np.ndarray:
        H = self.components.get(m)
        if H is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return H

    @cached_property
    def pauli_terms(self) -> dict[int, tuple]:
        out = {}
        for m, H in self.components.items():
            out[m] = tuple(self.terms[m]) if m in self.terms else tuple(pauli_decompose(H))
        return out

    def present(self) -> list[int]:
        return sorted(m for m, H in self.components.items() if np.any(H != 0))


def _validate(H: FourierHamiltonian) -> None:
    dim = H.dim
    if H.period <= 0 or not math.isfinite(H.period):
        raise ValidationError("period must be positive and finite")
    for m, Hm in H.components.items():
        if Hm.shape != (dim, dim):
            raise ValidationError(f"H_{m} has shape {Hm.shape}, expected {(dim, dim)}")
        if not np.all(np.isfinite(Hm)):
            raise ValidationError(f"H_{m} has non-finite entries")
    if isinstance(H.mode, BoundedMode):
        if not 0 <= H.mode.M <= MAX_BOUNDED_M:
            raise ValidationError(f"bounded mode requires 0 <= M <= {MAX_BOUNDED_M}")
        for m in H.components:
            if abs(m) > H.mode.M:
                raise ValidationError(f"component m={m} exceeds declared M={H.mode.M}")
    else:
        if H.mode.alpha <= 0 or H.mode.zeta <= 0:
            raise ValidationError("decaying mode requires alpha > 0 and zeta > 0")
    for m, Hm in H.components.items():
        partner = H.components.get(-m)
        if partner is None:
            raise ValidationError(f"H_{-m} missing although H_{m} is present")
        defect = float(np.max(np.abs(partner - Hm.conj().T)))
        if defect > _HERM_TOL * max(1.0, float(np.linalg.norm(Hm))):
            raise ValidationError(f"H_{-m} != H_{m}^dagger (defect {defect:.3e}); H(t) not Hermitian")
    for m, Hm in H.components.items():
        nrm = operator_norm(Hm)
        am = H.alpha_m.get(m)
        if am is None:
            raise ValidationError(f"alpha_m missing for m={m}")
        if am < nrm * (1 - 1e-12) - 1e-15:
            raise ValidationError(f"alpha_{m} = {am} is below ||H_{m}|| = {nrm}")
        if H.is_decaying:
            cap = H.mode.alpha * math.exp(-abs(m) / H.mode.zeta)
            if nrm > cap * (1 + 1e-12):
                raise ValidationError(
                    f"||H_{m}|| = {nrm} exceeds decay envelope alpha*exp(-|m|/zeta) = {cap}")


def from_matrices(components: Mapping[int, np.ndarray], period: float, *, M: int | None = None,
                  decaying: tuple[float, float] | None = None,
                  alpha_m: Mapping[int, float] | None = None,
                  terms: Mapping[int, list] | None = None,
                  name: str = "model") -> FourierHamiltonian:
    """Build and validate a model from dense components (absolute units).

    Missing negative-frequency partners are filled in as adjoints.
    """
    comps = {int(m): np.array(H, dtype=complex) for m, H in components.items()}
    terms = {int(m): tuple(t) for m, t in (terms or {}).items()}
    for m in list(comps):
        if -m not in comps:
            comps[-m] = comps[m].conj().T.copy()
            if m in terms:
                terms[-m] = tuple(t.adjoint() for t in terms[m])
    if not comps:
        raise ValidationError("at least one Fourier component is required")
    n = int(round(math.log2(next(iter(comps.values())).shape[0])))
    if decaying is not None:
        mode = DecayingMode(float(decaying[0]), float(decaying[1]))
        cut = mode.M_eff
        comps = {m: H for m, H in comps.items() if abs(m) <= cut}
        terms = {m: t for m, t in terms.items() if abs(m) <= cut}
    else:
        mode = BoundedMode(int(M) if M is not None else max(abs(m) for m in comps))
    am = {m: operator_norm(H) for m, H in comps.items()}
    if alpha_m:
        for m, v in alpha_m.items():
            am[int(m)] = float(v)
            if -int(m) not in alpha_m:
                am[-int(m)] = float(v)
    H = FourierHamiltonian(n_qubits=n, period=float(period), components=comps,
                           alpha_m=am, mode=mode, terms=terms, name=name)
    _validate(H)
    return H


# ---------------------------------------------------------------- parsing

_TOP_KEYS = {"n_qubits", "period", "units", "mode", "components", "alpha_m", "name"}


def _require(obj, key, path):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing key {key!r}", path)
    return obj[key]


def _as_float(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"expected a number, got {x!r}", path)
    if not math.isfinite(x):
        raise ParseError("expected a finite number", path)
    return float(x)


def _as_int(x, path):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"expected an integer, got {x!r}", path)
    return x


def _as_complex(x, path):
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(_as_float(x[0], path + "[0]"), _as_float(x[1], path + "[1]"))
    return complex(_as_float(x, path))


def parse_hamiltonian(config) -> FourierHamiltonian:
    """Parse a JSON document (str, path, or already-decoded dict)."""
    if isinstance(config, Path) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        config = Path(config).read_text()
    if isinstance(config, str):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ParseError("top level must be an object", "$")
    unknown = set(config) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", "$")

    n = _as_int(_require(config, "n_qubits", "$"), "$.n_qubits")
    if n < 1:
        raise ParseError("n_qubits must be >= 1", "$.n_qubits")
    period = _as_float(_require(config, "period", "$"), "$.period")
    if period <= 0:
        raise ParseError("period must be positive", "$.period")
    units = config.get("units", "absolute")
    if units not in ("omega", "absolute"):
        raise ParseError("units must be 'omega' or 'absolute'", "$.units")
    scale = 2 * math.pi / period if units == "omega" else 1.0

    mode_doc = _require(config, "mode", "$")
    if not isinstance(mode_doc, dict) or len(mode_doc) != 1:
        raise ParseError("mode must have exactly one of 'bounded', 'decaying'", "$.mode")
    kind, body = next(iter(mode_doc.items()))
    M = decaying = None
    if kind == "bounded":
        if set(body) - {"M"}:
            raise ParseError("unknown keys", "$.mode.bounded")
        M = _as_int(_require(body, "M", "$.mode.bounded"), "$.mode.bounded.M")
    elif kind == "decaying":
        if set(body) - {"alpha", "zeta"}:
            raise ParseError("unknown keys", "$.mode.decaying")
        decaying = (_as_float(_require(body, "alpha", "$.mode.decaying"), "$.mode.decaying.alpha") * scale,
                    _as_float(_require(body, "zeta", "$.mode.decaying"), "$.mode.decaying.zeta"))
    else:
        raise ParseError(f"unknown mode {kind!r}", "$.mode")

    comps_doc = _require(config, "components", "$")
    if not isinstance(comps_doc, list) or not comps_doc:
        raise ParseError("components must be a non-empty list", "$.components")
    comps, terms = {}, {}
    for i, c in enumerate(comps_doc):
        p = f"$.components[{i}]"
        if not isinstance(c, dict):
            raise ParseError("expected an object", p)
        if set(c) - {"m", "terms", "matrix"}:
            raise ParseError(f"unknown keys {sorted(set(c) - {'m', 'terms', 'matrix'})}", p)
        m = _as_int(_require(c, "m", p), p + ".m")
        if m in comps:
            raise ParseError(f"duplicate component m={m}", p)
        if "terms" in c:
            tl = []
            for j, t in enumerate(c["terms"]):
                tp = f"{p}.terms[{j}]"
                if not isinstance(t, dict) or set(t) - {"coeff", "pauli"}:
                    raise ParseError("term must be {coeff, pauli}", tp)
                s = _require(t, "pauli", tp)
                if not isinstance(s, str) or len(s) != n or any(ch not in PAULI for ch in s):
                    raise ParseError(f"pauli must be a length-{n} string over IXYZ", tp + ".pauli")
                tl.append(PauliTerm(_as_complex(_require(t, "coeff", tp), tp + ".coeff") * scale, s))
            terms[m] = tl
            comps[m] = terms_matrix(tl, n)
        elif "matrix" in c:
            rows = c["matrix"]
            try:
                A = np.array([[_as_complex(x, f"{p}.matrix") for x in row] for row in rows], dtype=complex)
            except TypeError as exc:
                raise ParseError("matrix must be a list of rows", p + ".matrix") from exc
            if A.shape != (2**n, 2**n):
                raise ParseError(f"matrix must be {2**n}x{2**n}", p + ".matrix")
            comps[m] = A * scale
        else:
            raise ParseError("component needs 'terms' or 'matrix'", p)

    alpha_m = None
    if "alpha_m" in config:
        doc = config["alpha_m"]
        if not isinstance(doc, dict):
            raise ParseError("alpha_m must be an object keyed by m", "$.alpha_m")
        alpha_m = {}
        for k, v in doc.items():
            try:
                mk = int(k)
            except ValueError as exc:
                raise ParseError(f"alpha_m key {k!r} is not an integer", "$.alpha_m") from exc
            alpha_m[mk] = _as_float(v, f"$.alpha_m.{k}") * scale
    return from_matrices(comps, period, M=M, decaying=decaying, alpha_m=alpha_m,
                         terms=terms, name=str(config.get("name", "model")))


def to_config(H: FourierHamiltonian) -> dict:
    """Serialize back to the JSON schema (absolute units, Pauli terms)."""
    mode = ({"bounded": {"M": H.mode.M}} if not H.is_decaying
            else {"decaying": {"alpha": H.mode.alpha, "zeta": H.mode.zeta}})
    comps = []
    for m in sorted(H.components):
        comps.append({"m": m, "terms": [{"coeff": [t.coefficient.real, t.coefficient.imag],
                                         "pauli": t.string} for t in H.pauli_terms[m]]})
    return {"name": H.name, "n_qubits": H.n_qubits, "period": H.period, "units": "absolute",
            "mode": mode, "components": comps,
            "alpha_m": {str(m): v for m, v in sorted(H.alpha_m.items())}}


# ---------------------------------------------------------------- evaluation

def evaluate_at(H: FourierHamiltonian, t: float) -> np.ndarray:
    # reduce t modulo T first so that H(t + T) reproduces H(t) to rounding
    t = math.fmod(t, H.period)
    out = np.zeros((H.dim, H.dim), dtype=complex)
    for m, Hm in H.components.items():
        out += Hm * np.exp(-1j * m * H.omega * t)
    return 0.5 * (out + out.conj().T)


def evaluate_many(H: FourierHamiltonian, times) -> np.ndarray:
    """Stack of H(t) for an array of times, shape (len(times), dim, dim)."""
    times = np.fmod(np.asarray(times, dtype=float), H.period)
    out = np.zeros((len(times), H.dim, H.dim), dtype=complex)
    for m, Hm in H.components.items():
        out += np.exp(-1j * m * H.omega * times)[:, None, None] * Hm
    return 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))


def norm_bound(H: FourierHamiltonian) -> float:
    """Upper bound on max_t ||H(t)||.

    Bounded mode gives (2M+1)*alpha.  Decaying mode sums the envelope
    alpha*exp(-|m|/zeta) over all integers, i.e. alpha*(2/(1-e^{-1/zeta}) - 1).
    """
    if H.is_decaying:
        return H.alpha * (2.0 / (1.0 - math.exp(-1.0 / H.mode.zeta)) - 1.0)
    return (2 * H.M + 1) * H.alpha


def sum_alpha(H: FourierHamiltonian) -> float:
    return float(sum(H.alpha_m.values()))


def is_hermitian_model(H: FourierHamiltonian, samples: int = 16) -> bool:
    return all(is_hermitian(evaluate_at(H, t)) for t in np.linspace(0, H.period, samples))
