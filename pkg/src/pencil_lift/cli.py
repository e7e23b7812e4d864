"""Command-line front end: JSON artifacts in, JSON reports out.

Exit codes partition outcomes: 0 means the mathematical expectation holds
(positive / feasible / all residuals within tolerance), 2 means a definite
negative (indefinite witness, infeasible completion, failed residual), 3
means undetermined (iteration budget exhausted or sampled-only positivity),
and 64 means unusable input. Reports are emitted on stdout as JSON with a
stable schema and the full flag configuration, so fixed flags give
byte-identical output.

The environment variable PENCIL_LIFT_THREADS, when set, caps the BLAS
thread pools. It must take effect before numpy spins them up, which is why
it is handled at the top of this module ahead of the numeric imports.
"""

from __future__ import annotations

import os

_threads = os.environ.get("PENCIL_LIFT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _threads

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import cpmaps, jordan, pencils, shiftspace
from .pencils import HatParams, hat, pencil_from_json, pencil_to_json

EXIT_PASS = 0
EXIT_NEGATIVE = 2
EXIT_UNDETERMINED = 3
EXIT_USAGE = 64

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    seed: int
    tol: float
    grid_radius: float
    grid_steps: int
    max_iter: int
    output_path: str | None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid_steps < 1:
            raise ValueError("grid-steps must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max-iter must be at least 1")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        tol=args.tol,
        grid_radius=getattr(args, "grid_radius", 8.0),
        grid_steps=getattr(args, "grid_steps", 33),
        max_iter=getattr(args, "max_iter", 10_000),
        output_path=getattr(args, "out", None),
    )


def _config_json(config: RunConfig) -> dict:
    return {
        "seed": config.seed,
        "tol": config.tol,
        "grid_radius": config.grid_radius,
        "grid_steps": config.grid_steps,
        "max_iter": config.max_iter,
        "out": config.output_path,
    }


def _emit(report: dict, config: RunConfig, write_out: bool = True) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if write_out and config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(text + "\n")


def _load_json_file(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{path} is not valid JSON: {exc}") from exc


def _load_pencil_file(path: str):
    """Accept a bare pencil object or a {"pencil":, "params":} wrapper."""
    obj = _load_json_file(path)
    params = None
    if isinstance(obj, dict) and "pencil" in obj:
        if "params" in obj:
            raw = obj["params"]
            try:
                params = HatParams(float(raw["c"]), float(raw["d"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise _UsageError(f"malformed params in {path}: {exc}") from exc
        obj = obj["pencil"]
    try:
        p = pencil_from_json(obj)
    except ValueError as exc:
        raise _UsageError(f"malformed pencil in {path}: {exc}") from exc
    return p, params


def _feasibility_json(outcome) -> dict:
    return {
        "kind": outcome.kind,
        "gap": outcome.gap,
        "iterations": outcome.iterations,
    }


def _positivity_json(verdict) -> dict:
    out = {"kind": verdict.kind}
    if verdict.kind == "NotPositive":
        out["alpha"] = verdict.alpha
        out["beta"] = verdict.beta
        out["value"] = verdict.value
    if verdict.feasibility is not None:
        out["feasibility"] = _feasibility_json(verdict.feasibility)
    return out


# ---------------------------------------------------------------------------
# pencil-check


def cmd_pencil_check(args) -> int:
    config = _config_from_args(args)
    p, file_params = _load_pencil_file(args.pencil_file)
    c = args.c if args.c is not None else (file_params.c if file_params else 1.0)
    d = args.d if args.d is not None else (file_params.d if file_params else 1.0)
    params = HatParams(c, d)
    q = hat(p, params)

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "pencil-check",
        "config": _config_json(config),
        "mode": args.mode,
        "params": {"c": params.c, "d": params.d},
    }
    negative = False
    undetermined = False
    if args.mode in ("positivity", "both"):
        verdict = pencils.positivity_check(
            q,
            grid_radius=config.grid_radius,
            grid_steps=config.grid_steps,
            seed=config.seed,
            tol=config.tol,
        )
        report["positivity"] = _positivity_json(verdict)
        negative = negative or verdict.kind == "NotPositive"
        undetermined = undetermined or verdict.kind == "SampledPositive"
    if args.mode in ("factor", "both"):
        outcome = pencils.factor_feasibility(
            q, max_iter=config.max_iter, tol=config.tol
        )
        report["feasibility"] = _feasibility_json(outcome)
        negative = negative or outcome.kind == "Infeasible"
        undetermined = undetermined or outcome.kind == "Undetermined"
    if negative:
        code = EXIT_NEGATIVE
    elif undetermined:
        code = EXIT_UNDETERMINED
    else:
        code = EXIT_PASS
    report["exit_code"] = code
    _emit(report, config)
    return code


# ---------------------------------------------------------------------------
# choi-demo


def cmd_choi_demo(args) -> int:
    config = _config_from_args(args)
    m = cpmaps.choi_map()
    basis = cpmaps.sym_basis(HatParams(1.0, 1.0))
    sample = cpmaps.is_positive_sampled(
        m, basis, trials=args.trials, seed=config.seed, tol=config.tol
    )
    C = cpmaps.choi_matrix(m, basis)
    eigs = [float(x) for x in np.linalg.eigvalsh(C)]
    verdict = cpmaps.is_cp(m, basis, tol=config.tol, max_iter=config.max_iter)
    if sample.positive and verdict.kind == "NotCP":
        code = EXIT_PASS
    elif verdict.kind == "Unknown":
        code = EXIT_UNDETERMINED
    else:
        code = EXIT_NEGATIVE
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "choi-demo",
        "config": _config_json(config),
        "trials": args.trials,
        "sampled_positive": sample.positive,
        "worst_sampled_min_eigenvalue": sample.worst_min_eig,
        "choi_eigenvalues": eigs,
        "choi_min_eigenvalue": eigs[0],
        "cp_verdict": verdict.kind,
        "feasibility": _feasibility_json(verdict.feasibility),
        "exit_code": code,
    }
    _emit(report, config)
    return code


# ---------------------------------------------------------------------------
# counterexample


def cmd_counterexample(args) -> int:
    config = _config_from_args(args)
    p, params = pencils.build_counterexample(tol=config.tol)
    spot_checks = []
    for cc, dd in (
        (params.c, params.d),
        (2.0 * params.c, 2.0 * params.d),
        (4.0 * params.c, params.d),
    ):
        q = hat(p, HatParams(cc, dd))
        outcome = pencils.factor_feasibility(
            q, max_iter=config.max_iter, tol=config.tol
        )
        spot_checks.append(
            {
                "c": cc,
                "d": dd,
                "kind": outcome.kind,
                "gap": outcome.gap,
                "iterations": outcome.iterations,
            }
        )
    artifact = {
        "pencil": pencil_to_json(p),
        "params": {"c": params.c, "d": params.d},
    }
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(json.dumps(artifact, indent=2, sort_keys=True) + "\n")
    code = EXIT_PASS if all(s["kind"] == "Infeasible" for s in spot_checks) else EXIT_NEGATIVE
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "counterexample",
        "config": _config_json(config),
        "params": {"c": params.c, "d": params.d},
        "pencil": pencil_to_json(p),
        "spot_checks": spot_checks,
        "exit_code": code,
    }
    _emit(report, config, write_out=False)
    return code


# ---------------------------------------------------------------------------
# shift-verify


def cmd_shift_verify(args) -> int:
    config = _config_from_args(args)
    if args.pencil:
        p, _ = _load_pencil_file(args.pencil)
    else:
        n = args.dim_h
        eye = np.eye(n)
        zero = np.zeros((n, n))
        p = pencils.QuadraticPencil(
            B00=eye, B10=zero, B01=zero, B11=zero, B20=zero, B02=zero, monic=True
        )
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "shift-verify",
        "config": _config_json(config),
        "K": args.K,
        "dim_h": p.dim,
    }
    try:
        sp = shiftspace.build(p, args.K, tol=min(config.tol, 1e-8))
    except ValueError as exc:
        report["error"] = str(exc)
        report["exit_code"] = EXIT_NEGATIVE
        _emit(report, config)
        return EXIT_NEGATIVE
    ver = shiftspace.verify_3isometry(sp, tol=config.tol)
    checks = list(ver.checks)
    worst = 0.0
    worst_site = None
    top = min(2, sp.K - 1)
    for nn in range(top + 1):
        for mm in range(top + 1):
            table = shiftspace.hereditary_value_lattice(sp, nn, mm)
            for (j, k), value in table.items():
                res = float(
                    np.linalg.norm(value - pencils.evaluate(p, j + nn, k + mm))
                )
                if res > worst:
                    worst = res
                    worst_site = (j, k)
    checks.append(
        shiftspace.SiteCheck(site=worst_site, check="lattice_vs_evaluate", residual=worst)
    )
    passed = ver.passed and worst <= config.tol
    code = EXIT_PASS if passed else EXIT_NEGATIVE
    full = shiftspace.ShiftReport(passed=passed, checks=tuple(checks))
    report.update(shiftspace.shift_report_to_json(full))
    report["exit_code"] = code
    _emit(report, config)
    return code


# ---------------------------------------------------------------------------
# jordan-verify


def _rotated_log_pair(U1: np.ndarray, U2: np.ndarray):
    """Principal log with the branch cut rotated into the largest spectral gap."""
    phases = np.sort(
        np.angle(np.concatenate([np.linalg.eigvals(U1), np.linalg.eigvals(U2)]))
    )
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2.0 * np.pi]]))
    widest = int(np.argmax(gaps))
    cut = phases[widest] + gaps[widest] / 2.0
    rho = np.pi - cut

    def g(z):
        return np.log(z * np.exp(1j * rho)) - 1j * rho

    def g_prime(z):
        return 1.0 / z

    return g, g_prime


def cmd_jordan_verify(args) -> int:
    config = _config_from_args(args)
    k = args.K
    params = HatParams(args.c if args.c is not None else 1.0,
                       args.d if args.d is not None else 1.0)
    base = jordan.random_commuting_unitaries(k, seed=config.seed)
    pair = jordan.build_jordan_pair(base, params)
    checks = []

    eye = np.eye(3 * k)
    worst = 0.0
    for n in range(6):
        for m in range(6):
            got = jordan.hereditary_value(pair.J1, pair.J2, eye, n, m)
            nc, md = n * params.c, m * params.d
            closed = np.array(
                [
                    [1.0, nc, md],
                    [nc, nc * nc + 1.0, nc * md],
                    [md, nc * md, md * md + 1.0],
                ]
            )
            expect = np.kron(closed, np.eye(k))
            worst = max(worst, float(np.linalg.norm(got - expect)))
    checks.append({"relation": "closed_form_powers", "residual": worst})

    membership = jordan.class_membership(pair.J1, pair.J2, params, tol=config.tol)
    checks.append(
        {
            "relation": "class_membership",
            "residual": max(c.residual for c in membership.checks),
        }
    )

    spec_u = jordan.joint_eigenvalues(base.U1, base.U2)
    spec_j = jordan.joint_eigenvalues(pair.J1, pair.J2)
    if len(spec_u.points) == len(spec_j.points) and all(
        3 * mu == mj for (_, _, mu), (_, _, mj) in zip(spec_u.points, spec_j.points)
    ):
        tripling = max(
            (
                max(abs(a1 - a2), abs(b1 - b2))
                for (a1, b1, _), (a2, b2, _) in zip(spec_u.points, spec_j.points)
            ),
            default=0.0,
        )
    else:
        tripling = 1.0  # structural mismatch; definitely above any sane tol
    checks.append({"relation": "joint_spectrum_tripling", "residual": float(tripling)})

    from scipy.linalg import expm

    g, g_prime = _rotated_log_pair(base.U1, base.U2)
    L1, L2 = jordan.apply_holomorphic(pair, g, g_prime)
    round_trip = max(
        float(np.linalg.norm(expm(L1) - pair.J1)),
        float(np.linalg.norm(expm(L2) - pair.J2)),
    )
    checks.append({"relation": "log_exp_round_trip", "residual": round_trip})

    passed = all(c["residual"] <= config.tol for c in checks)
    code = EXIT_PASS if passed else EXIT_NEGATIVE
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "jordan-verify",
        "config": _config_json(config),
        "k": k,
        "params": {"c": params.c, "d": params.d},
        "checks": checks,
        "passed": passed,
        "exit_code": code,
    }
    _emit(report, config)
    return code


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="pencil-lift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, tol_default, with_grid=False, with_iter=True):
        sp.add_argument("--tol", type=float, default=tol_default)
        sp.add_argument("--seed", type=int, default=0)
        if with_grid:
            sp.add_argument("--grid-radius", type=float, default=8.0)
            sp.add_argument("--grid-steps", type=int, default=33)
        if with_iter:
            sp.add_argument("--max-iter", type=int, default=10_000)

    pc = sub.add_parser("pencil-check", help="positivity and factorability of a pencil's hat")
    pc.add_argument("pencil_file")
    pc.add_argument("--mode", choices=("positivity", "factor", "both"), default="both")
    pc.add_argument("-c", type=float, default=None)
    pc.add_argument("-d", type=float, default=None)
    pc.add_argument("--out", default=None, help="also write the report here")
    common(pc, 1e-10, with_grid=True)
    pc.set_defaults(func=cmd_pencil_check)

    cd = sub.add_parser("choi-demo", help="positive but not completely positive contrast")
    cd.add_argument("--trials", type=int, default=10_000)
    cd.add_argument("--out", default=None, help="also write the report here")
    common(cd, 1e-9)
    cd.set_defaults(func=cmd_choi_demo)

    ce = sub.add_parser("counterexample", help="build the non-liftable monic pencil")
    ce.add_argument("--out", default=None, help="write the pencil artifact here")
    common(ce, 1e-10)
    ce.set_defaults(func=cmd_counterexample)

    sv = sub.add_parser("shift-verify", help="lattice shift pair verification")
    sv.add_argument("--pencil", default=None, help="pencil JSON (default: identity pencil)")
    sv.add_argument("-K", type=int, default=4)
    sv.add_argument("--dim-h", type=int, default=1)
    sv.add_argument("--out", default=None, help="also write the report here")
    common(sv, 1e-8, with_iter=False)
    sv.set_defaults(func=cmd_shift_verify)

    jv = sub.add_parser("jordan-verify", help="Jordan-type pair verification")
    jv.add_argument("-K", type=int, default=8, help="base unitary dimension")
    jv.add_argument("-c", type=float, default=None)
    jv.add_argument("-d", type=float, default=None)
    jv.add_argument("--out", default=None, help="also write the report here")
    common(jv, 1e-9, with_iter=False)
    jv.set_defaults(func=cmd_jordan_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
