import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sambe_floquet import models
from sambe_floquet.bounds import cutoff_for_accuracy, eigenvalue_accuracy, tail_sum
from sambe_floquet.errors import ConfigurationError, ContractViolation, StructuralError
from sambe_floquet.hamiltonian import evaluate_at, from_matrices, pauli_matrix
from sambe_floquet.numerics import matrix_exponential_i, unitarity_defect
from sambe_floquet.sambe import build_floquet, fold_bz
from sambe_floquet.spectral import (ALL_CHECKS, central_eigenpairs, diagonalize_sambe, extract_eigenpair,
                                    floquet_operator, match_mod_omega, quasienergies_from_unitary,
                                    reconstruct_physical, sambe_spectrum, verify_bounds)


def ode_propagator(H, t):
    """Independent oracle: integrate i dU/dt = H(t) U with a high-order adaptive solver."""
    d = H.dim

    def rhs(s, y):
        return (-1j * evaluate_at(H, s) @ y.reshape(d, d)).reshape(-1)

    sol = solve_ivp(rhs, (0, t), np.eye(d, dtype=complex).reshape(-1), method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1].reshape(d, d)


def test_zero_hamiltonian_propagators():
    H = from_matrices({0: np.zeros((2, 2))}, 2 * math.pi)
    assert np.allclose(floquet_operator(H, "discretized", L_steps=7), np.eye(2))
    assert np.allclose(floquet_operator(H, "sambe"), np.eye(2))


def test_static_propagator_exact(static):
    U = floquet_operator(static, "discretized", L_steps=3)
    assert np.allclose(U, matrix_exponential_i(static.component(0), static.period), atol=1e-14)


def test_rabi_methods_agree(rabi):
    U_ode = ode_propagator(rabi, rabi.period)
    U_d = floquet_operator(rabi, "discretized", L_steps=100_000)
    U_s = floquet_operator(rabi, "sambe", eps_lr=1e-8)
    assert np.linalg.norm(U_d - U_s, 2) < 1e-6
    assert np.linalg.norm(U_d - U_ode, 2) < 1e-6
    assert np.linalg.norm(U_s - U_ode, 2) < 1e-7


def test_sambe_propagator_intermediate_time(rabi):
    t = 1.3
    assert np.linalg.norm(floquet_operator(rabi, "sambe", t) - ode_propagator(rabi, t), 2) < 1e-8


def test_quasienergy_examples():
    s = quasienergies_from_unitary(np.eye(3), 1.0)
    assert np.allclose(s.values, 0)
    T = 2 * math.pi
    U = matrix_exponential_i(0.25 * pauli_matrix("Z"), T)
    assert np.allclose(quasienergies_from_unitary(U, 1.0).values, [-0.25, 0.25])
    with pytest.raises(ContractViolation):
        quasienergies_from_unitary(np.diag([1.0, 0.5]), 1.0)


def test_circular_drive_analytic(circ):
    exact = models.circular_drive_quasienergies()
    U = ode_propagator(circ, circ.period)
    assert match_mod_omega(quasienergies_from_unitary(U, 1.0), exact, 1.0).max_distance < 1e-8
    L = cutoff_for_accuracy(circ.M, circ.alphaT, 1e-10)
    assert match_mod_omega(sambe_spectrum(circ, L), exact, 1.0).max_distance < 1e-8


def test_static_sambe_diagonalization(static):
    spec = diagonalize_sambe(build_floquet(static, 4))
    exp = np.sort([s * 0.25 - l for l in range(-3, 5) for s in (1, -1)])
    assert np.allclose(np.sort(spec.values), exp)
    assert np.allclose(np.sort(spec.central_part().values), [-0.25, 0.25])
    for p in central_eigenpairs(spec):
        n = p.norms()
        assert n[p.window.row(0)] == pytest.approx(1.0)
        assert np.isclose(np.sum(n**2), 1.0)


def test_rabi_sambe_vs_oracle(rabi, rabi_oracle):
    L = cutoff_for_accuracy(rabi.M, rabi.alphaT, 1e-8)
    spec = sambe_spectrum(rabi, L)
    assert match_mod_omega(spec, rabi_oracle.quasienergies, 1.0).max_distance <= 1e-7
    assert np.all(np.abs(spec.values) <= build_floquet(rabi, L).alpha_F)
    V = spec.vectors
    assert np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1])) < 1e-10


def test_eigenvector_consistency(rabi, rabi_oracle):
    L = 14
    spec = sambe_spectrum(rabi, L)
    for p in central_eigenpairs(spec):
        j = int(np.argmin(np.abs(fold_bz(rabi_oracle.quasienergies - p.quasienergy, 1.0))))
        ov = abs(np.vdot(rabi_oracle.states[:, j], p.at_time_zero()))
        assert ov >= 1 - tail_sum(L, rabi.M, rabi.alphaT)


def test_reconstruct_physical(rabi, static):
    spec = sambe_spectrum(rabi, 12)
    p = central_eigenpairs(spec)[0]
    assert np.allclose(reconstruct_physical(p, rabi, 0.0), p.components.sum(axis=0))
    # e^{i eps t} U(t) phi(0) must be T-periodic: at t = T it returns to phi(0)
    phiT = reconstruct_physical(p, rabi, rabi.period, U_t=ode_propagator(rabi, rabi.period))
    assert np.linalg.norm(phiT - p.at_time_zero()) < 1e-6
    q = central_eigenpairs(sambe_spectrum(static, 3))[0]
    v = reconstruct_physical(q, static, 0.7)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert abs(abs(np.vdot(q.at_time_zero(), v)) - 1) < 1e-12


def test_match_mod_omega():
    assert match_mod_omega([0.1, -0.2], [-0.2, 0.1], 1.0).max_distance == 0
    assert match_mod_omega([0.4], [-0.6], 1.0).max_distance < 1e-15
    with pytest.raises(StructuralError):
        match_mod_omega([0.1], [0.1, 0.2], 1.0)


def test_static_checks_trivial(static):
    rep = verify_bounds(static, 4, ["prop1", "prop2", "propB1", "propB3", "propB2"])
    assert rep.passed
    for r in rep.by_check("prop1") + rep.by_check("propB1"):
        assert r.measured <= 1e-10


def test_rabi_prop1_L12(rabi, rabi_oracle):
    rep = verify_bounds(rabi, 12, ["prop1"], oracle=rabi_oracle)
    (row,) = rep.rows
    assert row.bound == pytest.approx(eigenvalue_accuracy(12, 1, rabi.alphaT))
    assert row.passed


def test_rabi_propB2_corner(rabi):
    rep = verify_bounds(rabi, 8, ["propB2"])
    assert rep.passed


def test_all_checks_rabi(rabi, rabi_oracle):
    rep = verify_bounds(rabi, 10, ALL_CHECKS, oracle=rabi_oracle)
    assert rep.passed, rep.failing()
    assert [c for c, _ in rep.skipped] == ["thmE1"]


def test_unknown_check(rabi):
    with pytest.raises(ConfigurationError):
        verify_bounds(rabi, 4, ["bogus"])


def test_extract_eigenpair_normalized(rabi):
    spec = sambe_spectrum(rabi, 6)
    for i in range(len(spec)):
        assert np.sum(extract_eigenpair(spec, i).norms() ** 2) == pytest.approx(1.0, abs=1e-8)


def test_oracle_unitary(rabi_oracle):
    assert unitarity_defect(rabi_oracle.U_T) < 1e-10
