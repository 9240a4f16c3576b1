import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sambe_floquet import models
from sambe_floquet.bounds import cutoff_for_accuracy, tail_sum
from sambe_floquet.errors import ContractViolation, DimensionError, DomainError, PromiseViolation
from sambe_floquet.fqpe import (COST_LABEL, qsvt_sequence, RegisterModel, SambeQpeEngine, build_initial_sambe_state,
                                check_rounding_promise, cost_formulas, decompose_initial_state,
                                fqpe_physical, fqpe_sambe, fqpe_sambe_no_promise, inherited_promise_check,
                                precision_bits, qpe_register_map, qsvt_amplify, quantum_arithmetic,
                                uniform_state_unitary)
from sambe_floquet.sambe import SambeWindow, bz_index, fold_bz
from sambe_floquet.spectral import f3, sambe_spectrum

PLUS = np.array([1, 1]) / math.sqrt(2)


# ---------------------------------------------------------------- register semantics

def test_promise_examples():
    assert check_rounding_promise([0.125], 0.5, 2)[0]
    ok, off = check_rounding_promise([0.02], 0.5, 2)
    assert not ok and off == [(0, 0.02)]
    assert check_rounding_promise([0.0625], 0.5, 2)[0]
    assert not check_rounding_promise([-0.0625], 0.5, 2)[0]


def test_register_examples():
    m = RegisterModel(3, nu=0.1)
    assert [b.value for b in qpe_register_map(0.3, m)] == [0.25]
    assert [b.label() for b in qpe_register_map(-0.3, m)] == ["-3/8"]
    bins = qpe_register_map(0.24, RegisterModel(3))
    assert [b.label() for b in bins] == ["1/8", "2/8"]
    assert all(abs(b.value - 0.24) <= 0.125 for b in bins)
    assert sum(b.weight for b in bins) == pytest.approx(1)
    with pytest.raises(DomainError):
        qpe_register_map(0.5, m)
    assert RegisterModel(3, 4).b == 7 and RegisterModel(3).mode == "no_promise"


@given(st.floats(-0.5, 0.5, exclude_max=True), st.integers(1, 12))
def test_two_bin_property(v, b):
    bins = qpe_register_map(v, RegisterModel(b))
    assert len(bins) == 2 and bins[1].k == bins[0].k + 1
    assert all(abs(x.value - v) <= 2.0**-b + 1e-15 for x in bins)
    assert sum(x.weight for x in bins) == pytest.approx(1)
    assert bins[0].weight * bins[0].value + bins[1].weight * bins[1].value == pytest.approx(v, abs=1e-12)


@given(st.floats(1e-9, 0.999))
def test_precision_bits(eps):
    b = precision_bits(eps)
    assert 2.0**-b <= eps and (b == 1 or 2.0 ** -(b - 1) > eps)


@given(st.floats(-50, 50), st.floats(0.1, 5))
def test_quantum_arithmetic_property(v, w):
    l, r = quantum_arithmetic(v, w)
    assert -w / 2 <= r < w / 2 + 1e-12
    assert r - l * w == pytest.approx(v, abs=1e-9)


def test_quantum_arithmetic_examples():
    l, r = quantum_arithmetic(-2.8, 1.0)
    assert l == 3 and r == pytest.approx(0.2)
    assert quantum_arithmetic(0.2, 1.0) == (0, 0.2)
    assert quantum_arithmetic(-0.5, 1.0) == (0, -0.5)


def test_inherited_promise(static, rabi):
    # c/omega = 0.25 sits halfway between the 1-bit grid points 0 and 1/2
    assert inherited_promise_check(static, 5, range(-4, 6), 0.3, 1)[0]
    assert not inherited_promise_check(static, 5, range(-4, 6), 0.3, 2)[0]
    L = cutoff_for_accuracy(1, rabi.alphaT, 0.3 / 2**5)
    ok, off = inherited_promise_check(rabi, L, [0], 0.3, 4)
    assert ok, off
    ok, off = inherited_promise_check(rabi, 1, [0], 0.99, 4)
    assert not ok and off and all(isinstance(l, int) for l, _ in off)


# ---------------------------------------------------------------- physical algorithm

def test_physical_trivial(static):
    out = fqpe_physical(static, PLUS, 1e-3, 1e-3)
    assert out.probabilities() == pytest.approx({"-256/1024": 0.5, "256/1024": 0.5})
    assert np.allclose(out.entry_for(-0.25).state, [0, 1])
    assert np.allclose(out.entry_for(0.25).state, [1, 0])
    assert out.total == pytest.approx(1, abs=1e-10)


def test_physical_eigenstate_input(rabi, rabi_oracle):
    out = fqpe_physical(rabi, rabi_oracle.states[:, 1], 1e-3, 1e-6)
    probs = sorted(e.prob for e in out.entries)
    assert probs[-1] == pytest.approx(1, abs=1e-9) and sum(probs[:-1]) < 1e-12


def test_physical_rabi_overlaps(rabi, rabi_oracle):
    psi = np.array([1, 0], complex)
    out = fqpe_physical(rabi, psi, 1e-3, 1e-8)
    for n, e in enumerate(rabi_oracle.quasienergies):
        ent = out.entry_for(e, tol=2e-3)
        assert ent.prob == pytest.approx(abs(np.vdot(rabi_oracle.states[:, n], psi)) ** 2, abs=1e-8)
        assert abs(np.vdot(rabi_oracle.states[:, n], ent.state)) == pytest.approx(1, abs=1e-7)


def test_physical_time_dependent_state(rabi, rabi_oracle):
    from sambe_floquet.spectral import floquet_operator
    t = 1.3
    psi = rabi_oracle.states[:, 0]
    out = fqpe_physical(rabi, psi, 1e-3, 1e-8, t=t)
    U_t = floquet_operator(rabi, "sambe", t, eps_lr=1e-10)
    phi_t = U_t @ psi
    assert abs(np.vdot(phi_t, out.entries[0].state)) == pytest.approx(1, abs=1e-7)


def test_physical_promise_violation(static):
    with pytest.raises(PromiseViolation):
        fqpe_physical(static, PLUS, 0.25, 1e-3, nu=0.5)  # 0.25 is a 2-bit grid point
    out = fqpe_physical(static, PLUS, 0.5, 1e-3, nu=0.5, b_prime=1)
    assert out.probabilities() == pytest.approx({"-1/2": 0.5, "0/2": 0.5})


def test_input_validation(static):
    with pytest.raises(ContractViolation):
        fqpe_physical(static, [1, 1], 1e-3, 1e-3)
    with pytest.raises(DimensionError):
        fqpe_physical(static, [1, 0, 0], 1e-3, 1e-3)


def test_outcome_json_and_sampling(static):
    out = fqpe_physical(static, PLUS, 1e-3, 1e-3)
    doc = out.to_json()
    json.dumps(doc)
    assert [e["bin"] for e in doc["entries"]] == ["-256/1024", "256/1024"]
    assert out.sample(1000, seed=7) == out.sample(1000, seed=7)
    assert sum(out.sample(1000, seed=7).values()) == 1000


# ---------------------------------------------------------------- initial state and decomposition

def test_initial_state():
    psi = np.array([0.6, 0.8j])
    v = build_initial_sambe_state(psi, 1).reshape(16, 2)
    win = SambeWindow(8)
    assert np.linalg.norm(v) == pytest.approx(1)
    assert np.vdot(psi, v[win.row(0)]) == pytest.approx(1 / math.sqrt(8))
    inside = [win.row(l) for l in range(-3, 5)]
    assert np.allclose(np.linalg.norm(v[inside], axis=1), 1 / math.sqrt(8))
    assert np.allclose(np.delete(v, inside, axis=0), 0)


def test_uniform_unitary():
    Q = uniform_state_unitary(2)
    win = SambeWindow(16)
    assert np.allclose(Q.T @ Q, np.eye(32))
    u = Q[:, win.row(0)]
    assert np.allclose(u[[win.row(l) for l in range(-7, 9)]], 1 / 4)


def test_decomposition_static(static):
    dec = decompose_initial_state(PLUS, static, 2)
    assert dec.residual_deviation <= 1e-12
    assert dec.neg_norm <= 1e-12
    assert dec.perp_norm == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("L", [6, 10])
def test_decomposition_rabi(rabi, L):
    dec = decompose_initial_state(np.array([1, 0]), rabi, L)
    assert dec.passed, (dec.residual_deviation, dec.residual_bound, dec.neg_norm, dec.neg_bound)


# ---------------------------------------------------------------- QSVT

def test_f3_values():
    assert f3(0.5) == 1 and f3(0) == 0 and f3(1) == -1


def test_qsvt_generic(rng):
    n = 6
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    U, _ = np.linalg.qr(A)
    Pi_in = np.diag([1, 1, 0, 0, 0, 0]).astype(complex)
    Pi_out = np.diag([0, 1, 1, 1, 0, 0]).astype(complex)
    res = qsvt_amplify(U, Pi_in, Pi_out)
    assert res.agreement < 1e-12


def test_engine_against_dense(static, rabi):
    for H, L in ((static, 1), (rabi, 1)):
        eng = SambeQpeEngine(H, L, 3, promise=(H is static))
        U, Pi_in, Pi_out = eng.dense_operators()
        psi = np.array([0.6, 0.8])
        Vb = np.kron(np.eye(eng.R), eng.V)
        x0 = np.kron(np.eye(eng.R)[0], np.kron(np.eye(eng.window.fourier_dim)[eng.window.row(0)], psi))
        W = qsvt_sequence(U, Pi_in, Pi_out)
        engine = Vb @ eng.good_part(eng.amplify(psi)).reshape(-1)
        assert np.allclose(engine, Pi_out @ W @ x0, atol=1e-12)
        assert np.allclose(Vb @ eng.first_pass(psi).reshape(-1), U @ x0, atol=1e-12)


def test_sambe_trivial(static):
    out = fqpe_sambe(static, PLUS, 1e-3, 1e-3)
    d = out.diagnostics
    assert d["pre_qaa_success"] == pytest.approx(0.25, abs=1e-12)
    assert d["post_qaa_success"] == pytest.approx(1, abs=1e-12)
    assert d["matrix_vs_semantic"] < 1e-9
    assert out.probabilities() == pytest.approx({"-256/1024": 0.5, "256/1024": 0.5})
    for e in out.entries:
        blocks = np.abs(e.state.reshape(-1, 2)) ** 2
        win = SambeWindow(8 * d["L"])
        assert blocks[win.row(0)].sum() == pytest.approx(1)


def test_sambe_rabi_overlaps(rabi, rabi_oracle):
    psi = np.array([1, 0], complex)
    L = 12
    out = fqpe_sambe(rabi, psi, 1e-3, 1e-3, L=L)
    d = out.diagnostics
    ts = tail_sum(L, 1, rabi.alphaT)
    assert abs(d["delta_approx"]) <= 5 * ts
    assert d["post_qaa_success"] >= 1 - 10 * ts
    assert d["matrix_vs_semantic"] <= 1e-9
    for n, e in enumerate(rabi_oracle.quasienergies):
        ent = out.entry_for(e, tol=2e-3)
        assert ent.prob == pytest.approx(abs(np.vdot(rabi_oracle.states[:, n], psi)) ** 2, abs=1e-6)
    assert out.total == pytest.approx(1, abs=1e-10)


def test_promise_bins_stay_in_zone(rabi):
    eng = SambeQpeEngine(rabi, 4, 5)
    zone_vals = bz_index(eng.w, 1.0)
    zone_bins = bz_index(eng.k1 / 2**5, 1.0)
    ok, _ = check_rounding_promise(eng.w, 0.1, 5)
    if ok:
        assert np.array_equal(zone_vals, zone_bins)


def test_sambe_no_promise(static):
    out = fqpe_sambe_no_promise(static, PLUS, 1e-3, 1e-3)
    assert out.total == pytest.approx(1, abs=1e-9)
    for g in out.diagnostics["garbage_norms"]:
        assert g["sum_sq"] == pytest.approx(1, abs=1e-9)
    # promise-satisfying input: identical bins with zero second weight
    assert out.probabilities() == pytest.approx({"-256/1024": 0.5, "256/1024": 0.5})


def test_sambe_no_promise_edge():
    H = models.static_sz(c=0.2)  # 0.2 * 8 = 1.6: off the 3-bit grid
    out = fqpe_sambe_no_promise(H, PLUS, 0.125, 1e-3, b_prime=3)
    assert sorted(out.probabilities()) == ["-1/8", "-2/8", "1/8", "2/8"]
    for e in out.entries:
        assert min(abs(e.value - 0.2), abs(e.value + 0.2)) <= 2.0**-3
    assert out.probabilities()["1/8"] == pytest.approx(0.5 * 0.4)
    # a bin inside the edge margin is post-selected away
    edge = fqpe_sambe_no_promise(models.static_sz(c=0.3), PLUS, 0.125, 1e-3, b_prime=3)
    assert "3/8" not in edge.probabilities() and edge.discarded_prob > 0
    assert out.total == pytest.approx(1, abs=1e-9)


# ---------------------------------------------------------------- costs

def test_cost_thm3():
    c = cost_formulas({"alphaT": 1, "eps": 0.1, "delta": 0.1, "nu": 0.1}, "thm3")
    assert c["queries_O_Hm"] == pytest.approx((1 + math.log(100)) / 0.01 * math.log(10))
    assert c["label"] == COST_LABEL


def test_cost_nu_one_reduces():
    p = {"alphaT": 2, "N": 3, "eps": 0.01, "delta": 0.1}
    assert cost_formulas(dict(p, nu=1.0), "thm4")["queries_O_Hm"] == pytest.approx(
        cost_formulas(p, "thm4_no_promise")["queries_O_Hm"])


def test_cost_eps_scaling():
    p = {"alphaT": 1, "N": 1, "delta": 0.1}
    a = cost_formulas(dict(p, eps=1e-4), "thm4_no_promise")["queries_O_Hm"]
    b = cost_formulas(dict(p, eps=5e-5), "thm4_no_promise")["queries_O_Hm"]
    assert 2 <= b / a <= 2 * 1.1


def test_cost_errors():
    with pytest.raises(DomainError):
        cost_formulas({"alphaT": 1}, "thm3")
    with pytest.raises(DomainError):
        cost_formulas({}, "nope")
