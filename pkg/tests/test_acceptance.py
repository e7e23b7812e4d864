"""Acceptance suite. One test per criterion; each prints a PASS/FAIL line
with the measured numbers so a log scan shows the whole picture at once.
Budgets and tolerances are pinned in the assertions, not in flags."""

import io
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from pencil_lift import cli
from pencil_lift.cpmaps import choi_map, is_cp, is_positive_sampled, sym_basis
from pencil_lift.jordan import (
    build_jordan_pair,
    fit_pencil,
    hereditary_value,
    joint_eigenvalues,
    random_commuting_unitaries,
    sjordan_exp_check,
)
from pencil_lift.matrices import inv_sqrt
from pencil_lift.pencils import (
    FactorTriple,
    HatParams,
    QuadraticPencil,
    build_counterexample,
    evaluate,
    factor_feasibility,
    gram_to_factors,
    hat,
    monicize,
    pencil_from_factors,
    positivity_check,
    random_factor_triple,
    verify_factorization,
)
from pencil_lift.shiftspace import (
    build,
    fit_pencil_interior,
    hereditary_value_lattice,
    verify_3isometry,
    verify_pencil_transfer,
)

from test_jordan import _bounded_phase_pair

CHOI_MIN_EIG = -0.03934466291663162  # derived via the Jacobi oracle, frozen
COUNTEREXAMPLE_GAP = 0.1347276613  # derived via the BFGS distance oracle, frozen


def _report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="module")
def counterexample():
    return build_counterexample()


def _closed_form(n, m, c, d):
    nc, md = n * c, m * d
    return np.array(
        [
            [1.0, nc, md],
            [nc, nc * nc + 1.0, nc * md],
            [md, nc * md, md * md + 1.0],
        ]
    )


def _factorable_monic(n, r, params, seed):
    f = random_factor_triple(n, r, seed=seed)
    praw = pencil_from_factors(f)
    pad = (
        f.V1.conj().T @ f.V1 / params.c**2
        + f.V2.conj().T @ f.V2 / params.d**2
    )
    padded = QuadraticPencil(
        B00=praw.B00 + pad,
        B10=praw.B10,
        B01=praw.B01,
        B11=praw.B11,
        B20=praw.B20,
        B02=praw.B02,
    )
    pm = monicize(padded, 0.0)
    D = inv_sqrt(padded.B00)
    return pm, FactorTriple(V0=f.V0 @ D, V1=f.V1 @ D, V2=f.V2 @ D)


def test_criterion_1_jordan_closed_form():
    start = time.perf_counter()
    worst = 0.0
    kmax = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 33))
        kmax = max(kmax, k)
        c, d = rng.uniform(0.4, 2.5, size=2)
        pair = random_commuting_unitaries(k, seed=seed)
        J = build_jordan_pair(pair, HatParams(c, d))
        G = np.eye(3 * k)
        for n in range(6):
            for m in range(6):
                got = hereditary_value(J.J1, J.J2, G, n, m)
                expect = np.kron(_closed_form(n, m, c, d), np.eye(k))
                worst = max(worst, float(np.linalg.norm(got - expect)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10.0
    _report(1, ok, f"worst residual {worst:.2e} over 20 pairs (k up to {kmax}), {elapsed:.1f} s")
    assert worst <= 1e-10
    assert elapsed < 10.0


def test_criterion_2_choi_contrast():
    start = time.perf_counter()
    m = choi_map()
    basis = sym_basis(HatParams(1.0, 1.0))
    sample = is_positive_sampled(m, basis, trials=10_000, seed=0, tol=1e-9)
    verdict = is_cp(m, basis)
    min_eig = verdict.choi_psd.min_eigenvalue
    with redirect_stdout(io.StringIO()):
        exit_code = cli.main(["choi-demo", "--trials", "10000"])
    elapsed = time.perf_counter() - start
    ok = (
        sample.positive
        and sample.worst_min_eig >= -1e-9
        and min_eig < -1e-2
        and abs(min_eig - CHOI_MIN_EIG) < 1e-9
        and verdict.kind == "NotCP"
        and exit_code == 0
        and elapsed < 10.0
    )
    _report(
        2,
        ok,
        f"worst sampled min-eig {sample.worst_min_eig:.2e}, Choi min-eig "
        f"{min_eig:.6f}, {verdict.kind}, cli exit {exit_code}, {elapsed:.1f} s",
    )
    assert sample.positive and sample.worst_min_eig >= -1e-9
    assert min_eig < -1e-2
    assert abs(min_eig - CHOI_MIN_EIG) < 1e-9
    assert verdict.kind == "NotCP"
    assert exit_code == 0
    assert elapsed < 10.0


def test_criterion_3_counterexample_nonfactorable():
    start = time.perf_counter()
    p, params = build_counterexample()
    pos = positivity_check(hat(p, params))
    gaps = []
    iters = []
    kinds = []
    for c, d in (
        (params.c, params.d),
        (2.0 * params.c, 2.0 * params.d),
        (4.0 * params.c, params.d),
    ):
        out = factor_feasibility(hat(p, HatParams(c, d)), max_iter=10_000)
        kinds.append(out.kind)
        gaps.append(out.gap)
        iters.append(out.iterations)
    elapsed = time.perf_counter() - start
    gap_rel = abs(gaps[0] - COUNTEREXAMPLE_GAP) / COUNTEREXAMPLE_GAP
    ok = (
        p.monic
        and p.dim == 3
        and pos.kind != "NotPositive"
        and all(k == "Infeasible" for k in kinds)
        and all(g >= 1e-6 for g in gaps)
        and all(i <= 10_000 for i in iters)
        and gap_rel <= 0.20
        and elapsed < 60.0
    )
    _report(
        3,
        ok,
        f"positivity {pos.kind}, gaps {[f'{g:.4f}' for g in gaps]} "
        f"(fixture drift {100 * gap_rel:.2f}%), iterations {iters}, {elapsed:.1f} s",
    )
    assert p.monic and p.dim == 3
    assert pos.kind != "NotPositive"
    assert kinds == ["Infeasible"] * 3
    assert all(g >= 1e-6 for g in gaps)
    assert all(i <= 10_000 for i in iters)
    assert gap_rel <= 0.20
    assert elapsed < 60.0


def test_criterion_4_feasibility_soundness():
    start = time.perf_counter()
    kinds = []
    worst_iters = 0
    for trial in range(50):
        rng = np.random.default_rng(2000 + trial)
        n = int(rng.integers(1, 7))
        r = int(rng.integers(3 * n, 19))
        f = random_factor_triple(n, r, seed=1000 + trial)
        p = pencil_from_factors(f)
        out = factor_feasibility(p)
        kinds.append(out.kind)
        worst_iters = max(worst_iters, out.iterations)
        if out.kind == "Feasible":
            g = gram_to_factors(out.gram)
            assert verify_factorization(p, g, tol=1e-7)
    elapsed = time.perf_counter() - start
    n_feasible = kinds.count("Feasible")
    n_infeasible = kinds.count("Infeasible")
    ok = n_feasible == 50 and n_infeasible == 0 and elapsed < 60.0
    _report(
        4,
        ok,
        f"{n_feasible}/50 Feasible, {n_infeasible} false Infeasible, worst "
        f"{worst_iters} iterations, {elapsed:.1f} s",
    )
    assert n_feasible == 50
    assert n_infeasible == 0
    assert elapsed < 60.0


def test_criterion_5_shift_construction(counterexample):
    start = time.perf_counter()
    p, _ = counterexample
    sp = build(p, K=6, tol=1e-8)
    assert sp.dimH == 3
    report = verify_3isometry(sp, tol=1e-8)
    worst_check = max(c.residual for c in report.checks)
    worst_lattice = 0.0
    for n in range(3):
        for m in range(3):
            for (j, k), block in hereditary_value_lattice(sp, n, m).items():
                res = float(np.abs(block - evaluate(p, j + n, k + m)).max())
                worst_lattice = max(worst_lattice, res)
    elapsed = time.perf_counter() - start
    ok = report.passed and worst_check <= 1e-8 and worst_lattice <= 1e-12 and elapsed < 120.0
    _report(
        5,
        ok,
        f"3-isometry residual {worst_check:.2e}, lattice vs evaluate "
        f"{worst_lattice:.2e}, {elapsed:.1f} s",
    )
    assert report.passed
    assert worst_check <= 1e-8
    assert worst_lattice <= 1e-12
    assert elapsed < 120.0


def test_criterion_6_factorization_transfer():
    worst = 0.0
    worst_iso = 0.0
    for seed in range(10):
        rng = np.random.default_rng(3000 + seed)
        n = int(rng.integers(1, 4))
        r = int(rng.integers(3 * n, 12))
        c, d = rng.uniform(0.8, 1.6, size=2)
        params = HatParams(float(c), float(d))
        pm, fm = _factorable_monic(n, r, params, seed=4000 + seed)
        sp = build(pm, K=4, tol=1e-8)
        report = verify_pencil_transfer(sp, fm, params, tol=1e-8)
        assert report.passed
        worst = max(worst, max(ch.residual for ch in report.checks))
        worst_iso = max(worst_iso, report.residual("embedding_isometry"))
    ok = worst <= 1e-8 and worst_iso <= 1e-12
    _report(
        6,
        ok,
        f"worst transfer residual {worst:.2e}, worst embedding residual "
        f"{worst_iso:.2e} over 10 pencils",
    )
    assert worst <= 1e-8
    assert worst_iso <= 1e-12


def test_criterion_7_gamma_subtraction_stays_infeasible(counterexample):
    p, params = counterexample
    q = hat(p, params)
    delta = 0.1
    kinds = []
    min_gap = np.inf
    for seed in range(10):
        rng = np.random.default_rng(5000 + seed)
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        W = A.conj().T @ A
        Gamma = delta * W / float(np.linalg.eigvalsh(W)[-1])
        q2 = QuadraticPencil(
            B00=q.B00 - Gamma,
            B10=q.B10,
            B01=q.B01,
            B11=q.B11,
            B20=q.B20,
            B02=q.B02,
        )
        # the subtracted diagonal block is indefinite, which parks the
        # nearest-point pair on a cone face and slows the tail; a flatness
        # tolerance commensurate with the 0.14 gap keeps the verdict honest
        out = factor_feasibility(q2, max_iter=20_000, tol=1e-8)
        kinds.append(out.kind)
        min_gap = min(min_gap, out.gap)
    ok = all(k == "Infeasible" for k in kinds)
    _report(
        7,
        ok,
        f"{kinds.count('Infeasible')}/10 Infeasible after subtraction "
        f"(delta {delta}), smallest gap {min_gap:.4f}",
    )
    assert all(k == "Infeasible" for k in kinds)


def test_criterion_8_spectral_and_functional_calculus():
    from scipy.linalg import expm

    worst_triple = 0.0
    worst_round = 0.0
    worst_sjordan = 0.0
    for seed in range(10):
        rng = np.random.default_rng(6000 + seed)
        k = int(rng.integers(2, 9))
        base = _bounded_phase_pair(k, seed=seed)
        c, d = rng.uniform(0.5, 2.0, size=2)
        J = build_jordan_pair(base, HatParams(float(c), float(d)))

        spec_u = joint_eigenvalues(base.U1, base.U2)
        spec_j = joint_eigenvalues(J.J1, J.J2)
        assert len(spec_u.points) == len(spec_j.points)
        for (mu, nu, mult), (mj, nj, multj) in zip(spec_u.points, spec_j.points):
            assert multj == 3 * mult
            worst_triple = max(worst_triple, abs(mu - mj), abs(nu - nj))

        from pencil_lift.jordan import apply_holomorphic

        L1, L2 = apply_holomorphic(J, np.log, lambda z: 1.0 / z)
        worst_round = max(
            worst_round,
            float(np.abs(expm(L1) - J.J1).max()),
            float(np.abs(expm(L2) - J.J2).max()),
        )

        Z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        V, R = np.linalg.qr(Z)
        V = V * (np.diag(R) / np.abs(np.diag(R)))
        A1 = V @ np.diag(rng.uniform(-2, 2, size=k)) @ V.conj().T
        A2 = V @ np.diag(rng.uniform(-2, 2, size=k)) @ V.conj().T
        report = sjordan_exp_check(A1, A2, HatParams(float(c), float(d)), tol=1e-9)
        assert report.passed
        worst_sjordan = max(worst_sjordan, max(ch.residual for ch in report.checks))
    ok = worst_triple <= 1e-8 and worst_round <= 1e-10 and worst_sjordan <= 1e-9
    _report(
        8,
        ok,
        f"tripling {worst_triple:.2e}, exp-log round trip {worst_round:.2e}, "
        f"sjordan {worst_sjordan:.2e} over 10 pairs",
    )
    assert worst_triple <= 1e-8
    assert worst_round <= 1e-10
    assert worst_sjordan <= 1e-9


def test_criterion_9_fit_pencil_discrimination():
    fitted = 0
    rejected = 0
    interior_ok = 0
    for seed in range(10):
        rng = np.random.default_rng(7000 + seed)
        k = int(rng.integers(2, 6))
        c, d = rng.uniform(0.5, 2.0, size=2)
        base = random_commuting_unitaries(k, seed=8000 + seed)
        J = build_jordan_pair(base, HatParams(float(c), float(d)))
        G = np.eye(3 * k)
        p = fit_pencil(J.J1, J.J2, G)
        if p is not None:
            expect = np.kron(_closed_form(3, 2, c, d), np.eye(k))
            if np.abs(evaluate(p, 3, 2) - expect).max() < 1e-8:
                fitted += 1
        if fit_pencil(2.0 * J.J1, J.J2, G, tol=1e-3) is None:
            rejected += 1

        n = int(rng.integers(1, 3))
        r = int(rng.integers(3 * n, 10))
        params = HatParams(*(float(x) for x in rng.uniform(0.9, 1.5, size=2)))
        pm, _ = _factorable_monic(n, r, params, seed=9000 + seed)
        sp = build(pm, K=4, tol=1e-8)
        fits = fit_pencil_interior(sp)
        q = fits[(0, 0)]
        same = all(
            np.abs(q.coeffs()[key] - pm.coeffs()[key]).max() < 1e-9
            for key in ("00", "10", "01", "11", "20", "02")
        )
        if same and len(fits) == 9:
            interior_ok += 1
    ok = fitted == 10 and rejected == 10 and interior_ok == 10
    _report(
        9,
        ok,
        f"{fitted}/10 Jordan fits, {rejected}/10 scaled pairs rejected, "
        f"{interior_ok}/10 interior compressions recover the pencil",
    )
    assert fitted == 10
    assert rejected == 10
    assert interior_ok == 10
