"""Numbered acceptance criteria; a PASS/FAIL line per criterion is printed in the terminal summary."""
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sambe_floquet import models
from sambe_floquet.blockenc import build_floquet_encoding, build_pauli_encoding, verify_encoding
from sambe_floquet.bounds import cutoff_for_accuracy, eigenvalue_accuracy, tail_sum
from sambe_floquet.errors import GapViolation, NormalizationError, OverlapError
from sambe_floquet.fqpe import (SambeQpeEngine, decompose_initial_state, fqpe_physical, fqpe_sambe,
                                qpe_register_map, RegisterModel)
from sambe_floquet.hamiltonian import terms_matrix
from sambe_floquet.prep import PrepSpec, prepare_eigenstate
from sambe_floquet.sambe import alpha_F, build_floquet, bz_index, fold_bz
from sambe_floquet.spectral import (approx_qsvt_experiment, match_mod_omega, oracle_spectrum,
                                    random_approx_qsvt_instance, sambe_spectrum, verify_bounds)

ROOT = Path(__file__).resolve().parents[1]
acc = pytest.mark.acceptance
FP_SLACK = 1e-12


def _report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@acc(1, "truncation accuracy on the Rabi model, L = 4..24 and certified L at 1e-8")
def test_c1_truncation_accuracy(rabi, rabi_oracle):
    worst = 0.0
    for L in range(4, 25):
        cen = sambe_spectrum(rabi, L).central_part().values
        bound = eigenvalue_accuracy(L, rabi.M, rabi.alphaT)
        for v in cen:
            d = float(np.min(np.abs(fold_bz(rabi_oracle.quasienergies - v, rabi.omega)))) / rabi.omega
            worst = max(worst, d / bound)
    L = cutoff_for_accuracy(rabi.M, rabi.alphaT, 1e-8)
    err = match_mod_omega(sambe_spectrum(rabi, L), rabi_oracle.quasienergies, rabi.omega).max_distance
    _report(1, worst <= 1 and err <= 1e-7, f"max measured/bound {worst:.3e}; error at L={L}: {err:.3e}")


@acc(2, "Fourier tail decay: exact, truncated and decaying-component bounds")
def test_c2_tail_decay(rabi, circ, decay):
    bad = []
    for H in (rabi, circ):
        for L in (6, 12, 18):
            bad += verify_bounds(H, L, ["thm2", "propA1"]).failing()
    for L in (6, 12):
        rep = verify_bounds(decay, L, ["thmE1"])
        assert rep.rows
        bad += rep.failing()
    _report(2, not bad, f"{len(bad)} violations")


@acc(3, "three-method spectrum agreement on static, Rabi and circular-drive models")
def test_c3_three_methods(static, rabi, circ):
    worst = 0.0
    for H in (static, rabi, circ):
        o = oracle_spectrum(H)
        for L in (8, 16):
            tol = max(eigenvalue_accuracy(L, H.M, H.alphaT), 10 * H.alphaT**2 / o.L_steps)
            specs = [sambe_spectrum(H, L, "obc"), sambe_spectrum(H, L, "pbc"), o.quasienergies]
            for i in range(3):
                for j in range(i + 1, 3):
                    worst = max(worst, match_mod_omega(specs[i], specs[j], H.omega).max_distance / tol)
    exact = models.circular_drive_quasienergies()
    L = cutoff_for_accuracy(circ.M, circ.alphaT, 1e-10)
    an = max(match_mod_omega(sambe_spectrum(circ, L), exact, 1.0).max_distance,
             match_mod_omega(oracle_spectrum(circ).quasienergies, exact, 1.0).max_distance)
    _report(3, worst <= 1 and an <= 1e-8, f"max distance/tolerance {worst:.3e}; analytic error {an:.3e}")


@acc(4, "block-encoding certification and normalization threshold")
def test_c4_block_encodings(static, rabi, circ):
    worst_err, worst_def = 0.0, 0.0
    for H in (static, rabi, circ):
        for m in H.present():
            terms = H.pauli_terms[m]
            be = build_pauli_encoding(terms, max(H.alpha_m[m], sum(abs(t.coefficient) for t in terms)))
            e, d = verify_encoding(be, terms_matrix(terms, H.n_qubits))
            worst_err, worst_def = max(worst_err, e / be.alpha), max(worst_def, d)
        for L in (2, 8):
            aF = alpha_F(H, L)
            be = build_floquet_encoding(H, L, aF)
            e, d = verify_encoding(be, build_floquet(H, L, "pbc").matrix)
            worst_err, worst_def = max(worst_err, e / be.alpha), max(worst_def, d)
            with pytest.raises(NormalizationError):
                build_floquet_encoding(H, L, aF - 1e-6)
    _report(4, worst_err <= 1e-10 and worst_def <= 1e-10,
            f"max error/alpha {worst_err:.3e}; max unitarity defect {worst_def:.3e}")


@acc(5, "phase-estimation weights equal oracle overlaps for 10 random states")
def test_c5_weight_preservation(rabi, rabi_oracle):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        want = np.abs(rabi_oracle.states.conj().T @ psi) ** 2
        for out in (fqpe_physical(rabi, psi, 1e-3, 1e-8), fqpe_sambe(rabi, psi, 1e-3, 1e-3, L=24)):
            for n, e in enumerate(rabi_oracle.quasienergies):
                ent = out.entry_for(e / rabi.omega, tol=2e-3)
                got = 0.0 if ent is None else ent.prob
                worst = max(worst, abs(got - want[n]))
    _report(5, worst <= 1e-6, f"max probability deviation {worst:.3e}")


@acc(6, "initial-state decomposition: exact static case and Rabi bounds at L = 6, 10, 14")
def test_c6_decomposition(static, rabi):
    plus = np.array([1, 1]) / math.sqrt(2)
    d0 = decompose_initial_state(plus, static, 3)
    ok = d0.residual_deviation <= 1e-12 and d0.neg_norm <= 1e-12
    details = [f"static: |Psi1|-1/2 = {d0.residual_deviation:.1e}, Psi_neg = {d0.neg_norm:.1e}"]
    for L in (6, 10, 14):
        d = decompose_initial_state(np.array([1, 0]), rabi, L)
        ok &= d.passed
        details.append(f"L={L}: {d.residual_deviation:.1e}<={d.residual_bound:.1e}, {d.neg_norm:.1e}<={d.neg_bound:.1e}")
    _report(6, ok, "; ".join(details))


@acc(7, "post-selection and three-phase amplification")
def test_c7_post_selection(static, rabi):
    checks = []
    for H, L, psi in ((static, 2, np.array([1, 1]) / math.sqrt(2)), (rabi, 20, np.array([1, 0])),
                      (rabi, 28, np.array([0.6, 0.8j]))):
        out = fqpe_sambe(H, psi, 1e-3, 1e-3, L=L)
        dg = out.diagnostics
        ts = tail_sum(L, max(H.M, 0), H.alphaT)
        neg = decompose_initial_state(psi, H, L).neg_norm
        s = np.asarray(dg["singular_values"])
        # FP_SLACK absorbs rounding when a bound is met with equality (static model)
        checks += [dg["pre_qaa_success"] >= 0.25 - 10 * (neg + dg["delta_approx"]) - FP_SLACK,
                   float(np.max(np.abs(s - 0.5))) <= 5 * ts + FP_SLACK,
                   dg["post_qaa_success"] >= 1 - 10 * ts - FP_SLACK,
                   dg["matrix_vs_semantic"] <= 1e-9]
    _report(7, all(checks), f"{sum(checks)}/{len(checks)} sub-checks hold")


@acc(8, "register semantics: zone containment and two-bin distances")
def test_c8_register_semantics(static, rabi, circ):
    viol = 0
    for H in (static, rabi, circ):
        vals = sambe_spectrum(H, 8).values / H.omega
        for b in range(3, 7):
            eng = SambeQpeEngine(H, 1, b) if H is static else None
            k = np.floor(vals * 2**b)
            viol += int(np.sum(bz_index(k / 2**b, 1.0) != bz_index(vals, 1.0)))
            if eng is not None:
                viol += int(np.sum(bz_index(eng.k1 / 2**b, 1.0) != bz_index(eng.w / H.omega, 1.0)))
            for v in fold_bz(vals, 1.0):
                bins = qpe_register_map(float(v), RegisterModel(b))
                viol += sum(abs(x.value - v) > 2.0**-b for x in bins)
    _report(8, viol == 0, f"{viol} violations")


@acc(9, "approximate singular-value transform bound on 100 random instances")
def test_c9_approx_qsvt():
    rng = np.random.default_rng(99)
    viol = 0
    for i in range(100):
        dim = int(rng.integers(2, 17))
        n_max = int(rng.integers(1, dim + 1))
        H, V, vals, c = random_approx_qsvt_instance(rng, dim, n_max, noise=10 ** rng.uniform(-6, -1))
        diff, eta, bnd = approx_qsvt_experiment(H, V, vals, c)
        viol += diff > bnd
    _report(9, viol == 0, f"{viol} violations")


@acc(10, "Lieb-Robinson difference and evolution residual on the Rabi model")
def test_c10_lieb_robinson(rabi, rabi_oracle):
    bad, rows = [], 0
    for L in (4, 8, 12):
        rep = verify_bounds(rabi, L, ["propB1", "propB2", "propB3"], oracle=rabi_oracle)
        rows += len(rep.rows)
        bad += rep.failing()
    _report(10, not bad and rows == 9, f"{len(bad)} violations")


@acc(11, "eigenstate preparation contracts and rejections")
def test_c11_preparation(static, rabi, rabi_oracle):
    res = []
    plus = np.array([1, 1]) / math.sqrt(2)
    for kind in ("physical", "sambe"):
        res.append(prepare_eigenstate(static, plus, PrepSpec(-0.25, 0.4, 0.7, 1e-3, kind)))
    phi = rabi_oracle.states
    psi = math.sqrt(0.1) * phi[:, 0] + math.sqrt(0.9) * phi[:, 1]
    res.append(prepare_eigenstate(rabi, psi, PrepSpec(rabi_oracle.quasienergies[0], 0.25, 0.3, 1e-3)))
    res.append(prepare_eigenstate(rabi, np.array([1, 0]),
                                  PrepSpec(rabi_oracle.quasienergies[1], 0.25, 0.3, 1e-3, "sambe", L=16)))
    ok = all(r.fidelity >= 1 - 1e-3 and r.success_prob >= 1 - 1e-2 for r in res)
    with pytest.raises(GapViolation):
        prepare_eigenstate(rabi, psi, PrepSpec(rabi_oracle.quasienergies[0], 0.3, 0.3, 1e-3))
    with pytest.raises(OverlapError):
        prepare_eigenstate(rabi, psi, PrepSpec(rabi_oracle.quasienergies[0], 0.25, 0.5, 1e-3))
    _report(11, ok, "fidelities " + ", ".join(f"{r.fidelity:.6f}" for r in res))


DETERMINISM_RUNS = [
    ["spectrum", "--config", "configs/rabi.json", "--L", "10"],
    ["verify", "--config", "configs/rabi.json", "--checks", "thm2,prop1,propB2,propC1,propD1", "--L-sweep", "4:6"],
    ["fqpe", "--config", "configs/rabi.json", "--mode", "sambe", "--L", "8", "--psi", "random", "--seed", "5",
     "--shots", "500"],
    ["fqpe", "--config", "configs/trivial_sz.json", "--mode", "physical", "--states"],
    ["prepare", "--config", "configs/rabi.json", "--target", "0.14", "--gap", "0.25", "--gamma", "0.3",
     "--psi", "basis:0", "--states"],
    ["cost", "--which", "thm4", "--alphaT", "1", "--N", "1", "--delta", "0.01", "--nu", "0.5",
     "--eps-grid", "1e-4", "1e-1", "5"],
    ["sweep", "configs/static_sz.json", "configs/rabi.json", "--checks", "prop1,thm2", "--L-sweep", "4:6",
     "--jobs", "2"],
]


@acc(12, "determinism: repeated CLI runs give byte-identical artifacts")
def test_c12_determinism(tmp_path):
    def run_all(tag):
        outs = []
        for i, argv in enumerate(DETERMINISM_RUNS):
            dest = tmp_path / f"{tag}_{i}.out"
            r = subprocess.run([sys.executable, "-m", "sambe_floquet.cli", *argv, "--L-steps", "20000",
                                "--out", str(dest)] if argv[0] not in ("cost",) else
                               [sys.executable, "-m", "sambe_floquet.cli", *argv, "--out", str(dest)],
                               cwd=ROOT, capture_output=True, text=True)
            assert r.returncode == 0, (argv, r.stderr)
            outs.append(dest.read_bytes())
        return outs

    a, b = run_all("a"), run_all("b")
    same = [x == y for x, y in zip(a, b)]
    for blob, argv in zip(a, DETERMINISM_RUNS):
        if argv[0] in ("fqpe", "prepare"):
            json.loads(blob)
    _report(12, all(same), f"{sum(same)}/{len(same)} artifacts identical")
