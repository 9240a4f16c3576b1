"""Reference driven two-level models used by the tests and CLI examples."""
from __future__ import annotations

import math

import numpy as np

from .hamiltonian import FourierHamiltonian, PauliTerm, from_matrices, terms_matrix


def _model(terms_by_m, period, name, **kw) -> FourierHamiltonian:
    comps = {m: terms_matrix(t, 1) for m, t in terms_by_m.items()}
    return from_matrices(comps, period, terms=terms_by_m, name=name, **kw)


def static_sz(omega: float = 1.0, c: float | None = None) -> FourierHamiltonian:
    """H(t) = c*Z with c = omega/4 by default (M = 0)."""
    c = omega / 4 if c is None else c
    return _model({0: [PauliTerm(c, "Z")]}, 2 * math.pi / omega, "static_sz", M=0)


def rabi(omega: float = 1.0, delta: float = 0.15, drive: float = 0.125) -> FourierHamiltonian:
    """H_0 = delta*omega*Z, H_{+-1} = drive*omega*X (a cos(omega t) X drive)."""
    return _model({0: [PauliTerm(delta * omega, "Z")],
                   1: [PauliTerm(drive * omega, "X")],
                   -1: [PauliTerm(drive * omega, "X")]},
                  2 * math.pi / omega, "rabi", M=1)


def circular_drive(omega: float = 1.0, detuning: float = 0.7, rabi_freq: float = 0.4) -> FourierHamiltonian:
    """(d/2)Z + (W/2)(cos(wt) X + sin(wt) Y); H_1 = (W/4)(X + iY)."""
    d, w = detuning * omega, rabi_freq * omega
    return _model({0: [PauliTerm(d / 2, "Z")],
                   1: [PauliTerm(w / 4, "X"), PauliTerm(1j * w / 4, "Y")],
                   -1: [PauliTerm(w / 4, "X"), PauliTerm(-1j * w / 4, "Y")]},
                  2 * math.pi / omega, "circular_drive", M=1)


def circular_drive_quasienergies(omega: float = 1.0, detuning: float = 0.7,
                                 rabi_freq: float = 0.4) -> np.ndarray:
    """Exact quasienergies from the rotating frame, folded into [-omega/2, omega/2)."""
    d, w = detuning * omega, rabi_freq * omega
    Hrot = np.array([[(d - omega) / 2, w / 2], [w / 2, -(d - omega) / 2]])
    ev = np.linalg.eigvalsh(Hrot) + omega / 2
    return np.sort((ev + omega / 2) % omega - omega / 2)


def decaying_drive(omega: float = 1.0, amp: float = 0.2, zeta: float = 1.0) -> FourierHamiltonian:
    """H_0 = a*omega*Z, H_m = a*omega*exp(-|m|/zeta) X for m != 0, cut at M_eff."""
    from .hamiltonian import DecayingMode

    a = amp * omega
    cut = DecayingMode(a, zeta).M_eff
    terms = {0: [PauliTerm(a, "Z")]}
    for m in range(1, cut + 1):
        c = a * math.exp(-m / zeta)
        terms[m] = [PauliTerm(c, "X")]
        terms[-m] = [PauliTerm(c, "X")]
    return _model(terms, 2 * math.pi / omega, "decaying_drive", decaying=(a, zeta))


MODELS = {
    "static_sz": static_sz,
    "rabi": rabi,
    "circular_drive": circular_drive,
    "decaying_drive": decaying_drive,
}
