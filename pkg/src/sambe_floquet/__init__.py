"""Sambe-space tools for time-periodic Hamiltonians.

Truncated Floquet Hamiltonians with certified cutoffs, quasienergy solvers,
explicit block-encodings, and matrix-level emulation of Floquet phase
estimation and eigenstate preparation.
"""
from .fqpe import QpeOutcome, RegisterModel, fqpe_physical, fqpe_sambe, fqpe_sambe_no_promise
from .hamiltonian import FourierHamiltonian, PauliTerm, evaluate_at, norm_bound, parse_hamiltonian
from .prep import PrepResult, PrepSpec, prepare_eigenstate
from .sambe import (SambeOperator, SambeWindow, build_floquet, cutoff_for_accuracy,
                    cutoff_lieb_robinson, fold_bz, shift_add, tail_bound)
from .spectral import floquet_operator, oracle_spectrum, sambe_spectrum, verify_bounds

__all__ = [
    "FourierHamiltonian", "PauliTerm", "evaluate_at", "norm_bound", "parse_hamiltonian",
    "SambeOperator", "SambeWindow", "build_floquet", "cutoff_for_accuracy",
    "cutoff_lieb_robinson", "fold_bz", "shift_add", "tail_bound",
    "floquet_operator", "oracle_spectrum", "sambe_spectrum", "verify_bounds",
    "QpeOutcome", "RegisterModel", "fqpe_physical", "fqpe_sambe", "fqpe_sambe_no_promise",
    "PrepResult", "PrepSpec", "prepare_eigenstate",
]
