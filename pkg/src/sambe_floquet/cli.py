"""Command-line front end.

Every subcommand reads a model from ``--config`` (either a bare Hamiltonian
document or an experiment document with a ``hamiltonian`` key) or from
``--model`` (a built-in example), and writes CSV or JSON to ``--out`` or
stdout.  Exit status: 0 success, 1 a bound check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import models
from .blockenc import build_floquet_encoding, build_pauli_encoding, verify_encoding
from .errors import FloquetError, ParseError
from .fqpe import cost_formulas, fqpe_physical, fqpe_sambe, fqpe_sambe_no_promise
from .hamiltonian import FourierHamiltonian, parse_hamiltonian, terms_matrix
from .prep import PrepSpec, prepare_eigenstate
from .sambe import build_floquet, default_tail_bound
from .spectral import (ALL_CHECKS, match_mod_omega, oracle_spectrum, reference_spectrum, sambe_spectrum,
                       central_eigenpairs, verify_bounds)

EXPERIMENT_KEYS = {"hamiltonian", "model_id", "params", "psi"}
PARAM_KEYS = {"L", "L_steps", "eps", "delta", "nu", "gap", "gamma", "b_prime", "seed", "t", "target",
              "kind", "mode", "method", "checks", "L_sweep", "alpha_tilde", "which"}


def fmt(x) -> str:
    """Floats with 17 significant digits; everything else via str."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    raise TypeError(f"not serializable: {type(x)}")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


# ------------------------------------------------------------ config handling

def load_experiment(args) -> tuple[FourierHamiltonian, str, dict, object]:
    """(model, model_id, params, psi spec) from --config / --model."""
    params: dict = {}
    psi = None
    if args.config:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}", str(path)) from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path)) from exc
        if isinstance(doc, dict) and "hamiltonian" in doc:
            unknown = set(doc) - EXPERIMENT_KEYS
            if unknown:
                raise ParseError(f"unknown keys {sorted(unknown)}", "$")
            ham = doc["hamiltonian"]
            if isinstance(ham, str):
                ham = (path.parent / ham).read_text()
            H = parse_hamiltonian(ham)
            params = doc.get("params", {}) or {}
            if not isinstance(params, dict):
                raise ParseError("params must be an object", "$.params")
            bad = set(params) - PARAM_KEYS
            if bad:
                raise ParseError(f"unknown keys {sorted(bad)}", "$.params")
            psi = doc.get("psi")
            mid = doc.get("model_id") or H.name or path.stem
        else:
            H = parse_hamiltonian(doc)
            mid = H.name or path.stem
    elif args.model:
        if args.model not in models.MODELS:
            raise ParseError(f"unknown built-in model {args.model!r}; choose from {sorted(models.MODELS)}")
        H = models.MODELS[args.model]()
        mid = args.model
    else:
        raise ParseError("one of --config or --model is required")
    return H, mid, params, psi


def param(args, params, name, default=None, cast=None):
    v = getattr(args, name, None)
    if v is None:
        v = params.get(name, default)
    if v is not None and cast is not None:
        try:
            v = cast(v)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad value for {name}: {v!r}") from exc
    return v


def parse_range(text: str) -> list[int]:
    """'a:b' (inclusive) or 'a:b:step' or a comma list."""
    text = str(text)
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            a, b = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0 or b < a:
                raise ValueError
            return list(range(a, b + 1, step))
        return [int(p) for p in text.split(",") if p]
    except ValueError as exc:
        raise ParseError(f"bad range {text!r}; use a:b, a:b:step or a comma list") from exc


def make_state(spec, dim: int, seed: int) -> np.ndarray:
    """Initial state from 'plus', 'basis:K', 'random' or an explicit amplitude list."""
    if spec is None or spec == "plus":
        return np.ones(dim, dtype=complex) / np.sqrt(dim)
    if isinstance(spec, str):
        if spec.startswith("basis:"):
            k = int(spec.split(":", 1)[1])
            if not 0 <= k < dim:
                raise ParseError(f"basis index {k} out of range for dimension {dim}", "psi")
            v = np.zeros(dim, dtype=complex)
            v[k] = 1
            return v
        if spec == "random":
            rng = np.random.default_rng(seed)
            v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            return v / np.linalg.norm(v)
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ParseError(f"cannot parse state {spec!r}", "psi") from exc
    try:
        amps = [complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a) for a in spec]
    except (TypeError, ValueError, IndexError) as exc:
        raise ParseError("state amplitudes must be numbers or [re, im] pairs", "psi") from exc
    v = np.array(amps, dtype=complex)
    if v.shape != (dim,):
        raise ParseError(f"state has {v.size} amplitudes, model dimension is {dim}", "psi")
    n = np.linalg.norm(v)
    if n == 0:
        raise ParseError("state is zero", "psi")
    return v / n


# ------------------------------------------------------------ subcommands

def cmd_spectrum(args):
    H, mid, params, _ = load_experiment(args)
    L = param(args, params, "L", 12, int)
    method = param(args, params, "method", "all")
    L_steps = param(args, params, "L_steps", 100_000, int)
    methods = ["sambe_obc", "sambe_pbc", "discretized"] if method == "all" else [method]
    vals = {}
    for m in methods:
        if m == "sambe_obc":
            vals[m] = sambe_spectrum(H, L, "obc").central_part().folded
        elif m == "sambe_pbc":
            vals[m] = sambe_spectrum(H, L, "pbc").central_part().folded
        elif m == "discretized":
            vals[m] = oracle_spectrum(H, L_steps).quasienergies
        else:
            raise ParseError(f"unknown method {m!r}", "method")
    rows = []
    for m in methods:
        for i, v in enumerate(np.sort(vals[m])):
            rows.append((mid, m, L, i, v))
    for i, a in enumerate(methods):
        for b in methods[i + 1:]:
            rows.append((mid, f"dist:{a}:{b}", L, -1, match_mod_omega(vals[a], vals[b], H.omega).max_distance))
    return write_csv(["model_id", "method", "L", "index", "value"], rows), 0


def _verify_rows(H, mid, Ls, checks, L_steps, seed):
    rows, failing, skipped = [], [], set()
    oracle = None
    if {"prop1", "prop2", "propB1", "propB3"} & set(checks):
        oracle = oracle_spectrum(H, L_steps)
    for L in Ls:
        rep = verify_bounds(H, L, checks, oracle=oracle, model_id=mid, L_steps=L_steps, seed=seed)
        for r in rep.rows:
            rows.append((r.model_id, r.check_id, r.L, r.measured, r.bound, r.passed))
            if not r.passed:
                failing.append(f"{r.model_id}/{r.check_id}/L={r.L}")
        skipped.update(f"{mid}/{c}: {why}" for c, why in rep.skipped)
    for s in sorted(skipped):
        print(f"skipped {s}", file=sys.stderr)
    return rows, failing


def _checks(args, params):
    raw = param(args, params, "checks", ",".join(ALL_CHECKS))
    checks = [c for c in (raw.split(",") if isinstance(raw, str) else raw) if c]
    bad = set(checks) - set(ALL_CHECKS)
    if bad:
        raise ParseError(f"unknown checks {sorted(bad)}", "checks")
    return checks


VERIFY_HEADER = ["model_id", "check_id", "L", "measured", "bound", "pass"]


def cmd_verify(args):
    H, mid, params, _ = load_experiment(args)
    checks = _checks(args, params)
    sweep = param(args, params, "L_sweep")
    Ls = parse_range(sweep) if sweep is not None else [param(args, params, "L", 8, int)]
    rows, failing = _verify_rows(H, mid, Ls, checks, param(args, params, "L_steps", 100_000, int),
                                 param(args, params, "seed", 0, int))
    if failing:
        print("failing checks: " + " ".join(failing), file=sys.stderr)
    return write_csv(VERIFY_HEADER, rows), 1 if failing else 0


def cmd_tails(args):
    H, mid, params, _ = load_experiment(args)
    L = param(args, params, "L", 8, int)
    _, spec = reference_spectrum(H, L)
    pairs = central_eigenpairs(spec)
    rows, fail = [], False
    for l in range(-L + 1, L + 1):
        meas = max(float(np.linalg.norm(p.component(l))) for p in pairs)
        bound = default_tail_bound(H, l)
        ok = meas <= bound + 1e-12
        fail |= not ok
        rows.append((mid, "tail", L, l, meas, bound, ok))
    return write_csv(["model_id", "check_id", "L", "l", "measured", "bound", "pass"], rows), 1 if fail else 0


def cmd_blockenc(args):
    H, mid, params, _ = load_experiment(args)
    L = param(args, params, "L", 2, int)
    at = param(args, params, "alpha_tilde", None, float)
    rows, fail = [], False
    for m in H.present():
        terms = H.pauli_terms[m]
        if not terms:
            continue
        lam = float(sum(abs(t.coefficient) for t in terms))
        be = build_pauli_encoding(terms, max(H.alpha_m[m], lam), H.n_qubits)
        err, defect = verify_encoding(be, terms_matrix(terms, H.n_qubits))
        ok = err <= 1e-10 * be.alpha and defect <= 1e-10
        fail |= not ok
        rows.append((mid, f"O_H[{m}]", L, be.alpha, err, defect, ok))
    be = build_floquet_encoding(H, L, at)
    err, defect = verify_encoding(be, build_floquet(H, L, "pbc").matrix)
    ok = err <= 1e-10 * be.alpha and defect <= 1e-10
    fail |= not ok
    rows.append((mid, "O_HF_pbc", L, be.alpha, err, defect, ok))
    return write_csv(["model_id", "encoding", "L", "alpha", "error", "unitarity_defect", "pass"], rows), \
        1 if fail else 0


def cmd_fqpe(args):
    H, mid, params, psi_spec = load_experiment(args)
    seed = param(args, params, "seed", 0, int)
    psi = make_state(args.psi if args.psi is not None else psi_spec, H.dim, seed)
    mode = param(args, params, "mode", "sambe")
    eps = param(args, params, "eps", 1e-3, float)
    delta = param(args, params, "delta", 1e-3, float)
    nu = param(args, params, "nu", None, float)
    L = param(args, params, "L", None, int)
    bp = param(args, params, "b_prime", None, int)
    if mode == "physical":
        out = fqpe_physical(H, psi, eps, delta, nu, param(args, params, "t", 0.0, float), b_prime=bp)
    elif mode == "sambe":
        out = fqpe_sambe(H, psi, eps, delta, nu, L=L, b_prime=bp)
    elif mode == "sambe_no_promise":
        out = fqpe_sambe_no_promise(H, psi, eps, delta, L=L, b_prime=bp)
    else:
        raise ParseError(f"unknown mode {mode!r}", "mode")
    doc = {"model_id": mid, "mode": mode, **out.to_json(include_states=args.states)}
    if args.shots:
        doc["samples"] = out.sample(args.shots, seed)
    return dump_json(doc), 0


def cmd_prepare(args):
    H, mid, params, psi_spec = load_experiment(args)
    seed = param(args, params, "seed", 0, int)
    psi = make_state(args.psi if args.psi is not None else psi_spec, H.dim, seed)
    target = param(args, params, "target", None, float)
    if target is None:
        raise ParseError("prepare needs --target (quasienergy)", "target")
    spec = PrepSpec(target, param(args, params, "gap", None, float), param(args, params, "gamma", None, float),
                    param(args, params, "delta", 1e-3, float), param(args, params, "kind", "physical"),
                    param(args, params, "t", 0.0, float), args.amplification, param(args, params, "L", None, int))
    res = prepare_eigenstate(H, psi, spec)
    doc = {"model_id": mid, **res.report}
    if args.states:
        doc["state"] = [[float(z.real), float(z.imag)] for z in res.state]
    return dump_json(doc), 0


def cmd_cost(args):
    which = args.which
    base = {k: getattr(args, k) for k in ("alphaT", "N", "eps", "delta", "nu", "gamma", "Delta")
            if getattr(args, k) is not None}
    if args.eps_grid:
        rows = []
        for e in np.geomspace(args.eps_grid[0], args.eps_grid[1], int(args.eps_grid[2])):
            rep = cost_formulas({**base, "eps": float(e)}, which)
            for k, v in rep.items():
                if k.startswith("queries"):
                    rows.append((which, float(e), k, v))
        return write_csv(["formula", "eps", "quantity", "value"], rows), 0
    return dump_json(cost_formulas(base, which)), 0


def _sweep_job(job):
    cfg, Ls, checks, L_steps, seed = job
    ns = argparse.Namespace(config=cfg, model=None)
    H, mid, _, _ = load_experiment(ns)
    return _verify_rows(H, mid, Ls, checks, L_steps, seed)


def cmd_sweep(args):
    checks = _checks(args, {})
    Ls = parse_range(args.L_sweep or "4:12")
    configs = sorted(args.configs)
    jobs = [(c, [L], checks, args.L_steps or 100_000, args.seed or 0) for c in configs for L in Ls]
    workers = args.jobs or os.cpu_count() or 1
    if workers == 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_job, jobs))
    rows, failing = [], []
    for r, f in results:
        rows.extend(r)
        failing.extend(f)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    if failing:
        print("failing checks: " + " ".join(sorted(failing)), file=sys.stderr)
    return write_csv(VERIFY_HEADER, rows), 1 if failing else 0


# ------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sambe-floquet", description="Sambe-space Floquet toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("--config", help="Hamiltonian or experiment JSON file")
            sp.add_argument("--model", help=f"built-in model: {', '.join(sorted(models.MODELS))}")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--L-steps", dest="L_steps", type=int)

    sp = sub.add_parser("spectrum", help="quasienergies by several methods")
    common(sp)
    sp.add_argument("--L", type=int)
    sp.add_argument("--method", choices=["all", "sambe_obc", "sambe_pbc", "discretized"])
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("verify", help="evaluate bound checks")
    common(sp)
    sp.add_argument("--L", type=int)
    sp.add_argument("--L-sweep", dest="L_sweep")
    sp.add_argument("--checks")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("tails", help="Fourier-component norms against the tail bound")
    common(sp)
    sp.add_argument("--L", type=int)
    sp.set_defaults(func=cmd_tails)

    sp = sub.add_parser("blockenc", help="build and verify block-encodings")
    common(sp)
    sp.add_argument("--L", type=int)
    sp.add_argument("--alpha-tilde", dest="alpha_tilde", type=float)
    sp.set_defaults(func=cmd_blockenc)

    sp = sub.add_parser("fqpe", help="emulate Floquet phase estimation")
    common(sp)
    sp.add_argument("--mode", choices=["physical", "sambe", "sambe_no_promise"])
    sp.add_argument("--eps", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--L", type=int)
    sp.add_argument("--b-prime", dest="b_prime", type=int)
    sp.add_argument("--psi", help="plus | basis:K | random | JSON amplitude list")
    sp.add_argument("--shots", type=int, default=0)
    sp.add_argument("--states", action="store_true", help="include post-measurement states")
    sp.set_defaults(func=cmd_fqpe)

    sp = sub.add_parser("prepare", help="Floquet eigenstate preparation")
    common(sp)
    sp.add_argument("--target", type=float)
    sp.add_argument("--gap", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--kind", choices=["physical", "sambe"])
    sp.add_argument("--t", type=float)
    sp.add_argument("--L", type=int)
    sp.add_argument("--psi")
    sp.add_argument("--amplification", choices=["fixed_point", "exact"], default="fixed_point")
    sp.add_argument("--states", action="store_true")
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("cost", help="query-count shapes (constants set to 1)")
    common(sp, model=False)
    sp.add_argument("--which", required=True,
                    choices=["thm3", "thm4", "thm4_no_promise", "prep_physical", "prep_sambe", "prep_static"])
    for k in ("alphaT", "N", "eps", "delta", "nu", "gamma", "Delta"):
        sp.add_argument(f"--{k}", type=float)
    sp.add_argument("--eps-grid", dest="eps_grid", type=float, nargs=3, metavar=("LO", "HI", "N"))
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("sweep", help="verify many configs over an L range in parallel")
    common(sp, model=False)
    sp.add_argument("configs", nargs="+")
    sp.add_argument("--L-sweep", dest="L_sweep")
    sp.add_argument("--checks")
    sp.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, status = args.func(args)
    except FloquetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
