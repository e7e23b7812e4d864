"""Lattice-truncated weighted space carrying a commuting pair of shifts.

Sites (j, k) range over the square [-K, K]^2 and each carries a copy of an
n-dimensional coefficient space. The Gram matrix is block diagonal with the
block at site (j, k) equal to evaluate(pencil, j, k); the shifts T and S move
coefficients to (j+1, k) and (j, k+1) with hard truncation at the boundary.
Powers of the shifts then reproduce the pencil at translated sites, which is
what the verification routines check, together with the transfer of a
factorization of the hat pencil onto the shift pair.

Lattice order is row major and stable: site (j, k) has flat index
(j + K) * (2K + 1) + (k + K), and dense matrices use that order blockwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .jordan import _fit_from_table
from .matrices import as_hermitian, as_matrix, psd_check, weighted_adjoint
from .pencils import (
    FactorTriple,
    HatParams,
    QuadraticPencil,
    evaluate,
    hat,
    pencil_from_json,
    pencil_to_json,
    verify_factorization,
)

DEFAULT_SIZE_CAP = 4096


@dataclass(frozen=True)
class ShiftSpace:
    pencil: QuadraticPencil
    K: int
    dimH: int
    gram: np.ndarray

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("truncation radius K must be at least 1")
        if self.dimH < 1:
            raise ValueError("coefficient dimension must be at least 1")
        side = 2 * self.K + 1
        N = self.dimH * side * side
        gram = as_hermitian(as_matrix(self.gram, rows=N, cols=N), tol=1e-8)
        object.__setattr__(self, "gram", gram)

    @property
    def side(self) -> int:
        return 2 * self.K + 1

    @property
    def size(self) -> int:
        return self.dimH * self.side * self.side

    def site_index(self, j: int, k: int) -> int:
        if abs(j) > self.K or abs(k) > self.K:
            raise ValueError(f"site ({j}, {k}) is outside the truncation")
        return (j + self.K) * self.side + (k + self.K)

    def gram_block(self, j: int, k: int) -> np.ndarray:
        n = self.dimH
        t = self.site_index(j, k) * n
        return self.gram[t : t + n, t : t + n]

    def sites(self):
        for j in range(-self.K, self.K + 1):
            for k in range(-self.K, self.K + 1):
                yield (j, k)


@dataclass(frozen=True)
class LatticeVector:
    """Finitely supported coefficient family over the lattice."""

    coefficients: dict[tuple[int, int], np.ndarray]


@dataclass(frozen=True)
class SiteCheck:
    site: tuple[int, int] | None
    check: str
    residual: float


@dataclass(frozen=True)
class ShiftReport:
    passed: bool
    checks: tuple[SiteCheck, ...]

    def residual(self, check: str) -> float:
        for entry in self.checks:
            if entry.check == check:
                return entry.residual
        raise KeyError(check)


def build(
    p: QuadraticPencil, K: int, tol: float, size_cap: int = DEFAULT_SIZE_CAP
) -> ShiftSpace:
    """Assemble the weighted lattice space for a pencil.

    Every Gram block must be positive definite; the first violating site is
    named in the error. The pencil must be monic so that the site (0, 0)
    block is the identity and the canonical embedding of the coefficient
    space is isometric.
    """
    if not p.monic:
        raise ValueError("shift space construction expects a monic pencil")
    if K < 1:
        raise ValueError("truncation radius K must be at least 1")
    n = p.dim
    side = 2 * K + 1
    N = n * side * side
    if N > size_cap:
        raise ValueError(
            f"dense realization of size {N} exceeds the cap {size_cap}; "
            "reduce K or the coefficient dimension"
        )
    gram = np.zeros((N, N), dtype=np.complex128)
    for j in range(-K, K + 1):
        for k in range(-K, K + 1):
            block = evaluate(p, j, k)
            verdict = psd_check(block, tol)
            if verdict.kind != "PositiveDefinite":
                raise ValueError(
                    f"Gram block at site ({j}, {k}) is not positive definite "
                    f"(min eigenvalue {verdict.min_eigenvalue:.3e})"
                )
            t = ((j + K) * side + (k + K)) * n
            gram[t : t + n, t : t + n] = block
    return ShiftSpace(pencil=p, K=K, dimH=n, gram=gram)


def apply_shift(sp: ShiftSpace, v: LatticeVector, which: str, power: int = 1) -> LatticeVector:
    """Relabel coefficients along one lattice direction.

    T moves (j, k) to (j + power, k); S moves it to (j, k + power). Shifting
    support off the truncation is an error rather than a silent loss.
    """
    if which not in ("T", "S"):
        raise ValueError("which must be 'T' or 'S'")
    if power < 1:
        raise ValueError("power must be a positive integer")
    dj, dk = (power, 0) if which == "T" else (0, power)
    out = {}
    for (j, k), h in v.coefficients.items():
        if abs(j) > sp.K or abs(k) > sp.K:
            raise ValueError(f"vector supported outside the truncation at site ({j}, {k})")
        if abs(j + dj) > sp.K or abs(k + dk) > sp.K:
            raise ValueError(
                f"shift overflows the truncation: site ({j}, {k}) maps to "
                f"({j + dj}, {k + dk})"
            )
        out[(j + dj, k + dk)] = np.asarray(h, dtype=np.complex128)
    return LatticeVector(coefficients=out)


def lattice_inner(sp: ShiftSpace, v: LatticeVector, w: LatticeVector) -> complex:
    """Weighted pairing <v, w> = sum over sites of w_site* B_site v_site."""
    total = 0.0 + 0.0j
    for site, hv in v.coefficients.items():
        hw = w.coefficients.get(site)
        if hw is None:
            continue
        j, k = site
        block = sp.gram_block(j, k)
        total += complex(np.conj(hw) @ (block @ np.asarray(hv, dtype=np.complex128)))
    return total


def dense_shifts(sp: ShiftSpace) -> tuple[np.ndarray, np.ndarray]:
    """Dense 0/1 matrices of T and S in the documented lattice order."""
    n = sp.dimH
    N = sp.size
    T = np.zeros((N, N))
    S = np.zeros((N, N))
    eye = np.eye(n)
    for j, k in sp.sites():
        s = sp.site_index(j, k) * n
        if j + 1 <= sp.K:
            t = sp.site_index(j + 1, k) * n
            T[t : t + n, s : s + n] = eye
        if k + 1 <= sp.K:
            t = sp.site_index(j, k + 1) * n
            S[t : t + n, s : s + n] = eye
    return T, S


def hereditary_value_lattice(
    sp: ShiftSpace, n: int, m: int, interior_margin: int = 0
) -> dict[tuple[int, int], np.ndarray]:
    """Per-site Gram pairing of T^n S^m, for sites where no truncation occurs.

    Computed honestly from the dense matrices as (T^n S^m)* G (T^n S^m) and
    then read off blockwise; for each returned site (j, k) the block equals
    evaluate(pencil, j + n, k + m) exactly, because the shifts permute Gram
    blocks without arithmetic.
    """
    if n < 0 or m < 0:
        raise ValueError("powers must be nonnegative")
    if n + interior_margin > sp.K or m + interior_margin > sp.K:
        raise ValueError(
            f"powers ({n}, {m}) with margin {interior_margin} exceed the "
            f"truncation radius {sp.K}"
        )
    T, S = dense_shifts(sp)
    P = np.linalg.matrix_power(T, n) @ np.linalg.matrix_power(S, m)
    W = P.T @ sp.gram @ P
    dim = sp.dimH
    out = {}
    jmax = sp.K - n - interior_margin
    kmax = sp.K - m - interior_margin
    for j in range(-jmax, jmax + 1):
        for k in range(-kmax, kmax + 1):
            t = sp.site_index(j, k) * dim
            out[(j, k)] = W[t : t + dim, t : t + dim]
    return out


def _interior_indices(sp: ShiftSpace, margin: int) -> np.ndarray:
    idx = []
    n = sp.dimH
    for j in range(-(sp.K - margin), sp.K - margin + 1):
        for k in range(-(sp.K - margin), sp.K - margin + 1):
            t = sp.site_index(j, k) * n
            idx.extend(range(t, t + n))
    return np.array(idx, dtype=int)


def verify_3isometry(sp: ShiftSpace, tol: float) -> ShiftReport:
    """Check the cubic shift identity on the truncation, two ways.

    (a) Third differences of the stored Gram blocks along each axis must
    vanish: this is the degree-2 statement at the level of the weight table
    itself, so a corrupted table is caught even though the shifts are exact
    relabelings. (b) Dense matrices for T and S are formed, their weighted
    adjoints taken with respect to the Gram, and the worst Rayleigh quotient
    of T#^3 T^3 - 3 T#^2 T^2 + 3 T# T - 1 over vectors supported three sites
    away from the boundary is measured (truncation corrupts the adjoint only
    near the boundary, so interior vectors see the untruncated identity).
    """
    if sp.K < 4:
        raise ValueError("verification needs truncation radius K >= 4")
    checks = []

    def block(j, k):
        return sp.gram_block(j, k)

    for axis, name in ((0, "third_difference_j"), (1, "third_difference_k")):
        worst = 0.0
        worst_site = None
        for j, k in sp.sites():
            if axis == 0:
                if j + 3 > sp.K:
                    continue
                stencil = (
                    block(j + 3, k)
                    - 3.0 * block(j + 2, k)
                    + 3.0 * block(j + 1, k)
                    - block(j, k)
                )
            else:
                if k + 3 > sp.K:
                    continue
                stencil = (
                    block(j, k + 3)
                    - 3.0 * block(j, k + 2)
                    + 3.0 * block(j, k + 1)
                    - block(j, k)
                )
            res = float(np.linalg.norm(stencil))
            if res > worst:
                worst = res
                worst_site = (j, k)
        checks.append(SiteCheck(site=worst_site, check=name, residual=worst))

    T, S = dense_shifts(sp)
    G = sp.gram
    idx = _interior_indices(sp, 3)
    Gpp = G[np.ix_(idx, idx)]
    eye = np.eye(sp.size)
    for M, name in ((T, "weighted_identity_T"), (S, "weighted_identity_S")):
        Madj = weighted_adjoint(M, G)
        expr = (
            np.linalg.matrix_power(Madj, 3) @ np.linalg.matrix_power(M, 3)
            - 3.0 * np.linalg.matrix_power(Madj, 2) @ np.linalg.matrix_power(M, 2)
            + 3.0 * Madj @ M
            - eye
        )
        GM = G @ expr
        H = (GM + GM.conj().T) / 2.0
        Hpp = H[np.ix_(idx, idx)]
        w = scipy.linalg.eigh(Hpp, Gpp, eigvals_only=True)
        residual = float(np.abs(w).max())
        checks.append(SiteCheck(site=None, check=name, residual=residual))

    passed = all(entry.residual <= tol for entry in checks)
    return ShiftReport(passed=passed, checks=tuple(checks))


def verify_pencil_transfer(
    sp: ShiftSpace, f: FactorTriple, params: HatParams, tol: float
) -> ShiftReport:
    """Transfer a factorization of the hat pencil onto the shift pair.

    The factor triple must factor hat(sp.pencil, params); that is checked
    first and is an error when it fails, not a report entry. The checks:

    - per-site coefficient identity: (V0 + jV1 + kV2)*(V0 + jV1 + kV2)
      equals the hat pencil at (j, k) on every lattice site;
    - aggregate pairing: for random lattice vectors the pairing induced by
      the site maps matches the blockwise quadratic form;
    - shifted values: for powers up to 2 the same identity holds at
      translated sites against the lattice hereditary values, with the
      parameter correction subtracted;
    - embedding: h -> h at site (0, 0) is a Gram isometry.
    """
    q = hat(sp.pencil, params)
    if not verify_factorization(q, f, tol=max(tol, 1e-8)):
        raise ValueError("factor triple does not factor the hat of the pencil")
    n = sp.dimH
    checks = []

    def site_map(j, k):
        return f.V0 + j * f.V1 + k * f.V2

    worst = 0.0
    worst_site = None
    for j, k in sp.sites():
        L = site_map(j, k)
        res = float(np.linalg.norm(L.conj().T @ L - evaluate(q, j, k)))
        if res > worst:
            worst = res
            worst_site = (j, k)
    checks.append(SiteCheck(site=worst_site, check="site_factor_identity", residual=worst))

    rng = np.random.default_rng(2)
    worst = 0.0
    for _trial in range(8):
        coeffs_x = {}
        coeffs_y = {}
        for j, k in sp.sites():
            coeffs_x[(j, k)] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            coeffs_y[(j, k)] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        lhs = 0.0 + 0.0j
        rhs = 0.0 + 0.0j
        for j, k in sp.sites():
            x = coeffs_x[(j, k)]
            y = coeffs_y[(j, k)]
            L = site_map(j, k)
            lhs += complex(np.conj(L @ y) @ (L @ x))
            rhs += complex(np.conj(y) @ (evaluate(q, j, k) @ x))
        worst = max(worst, abs(lhs - rhs))
    checks.append(SiteCheck(site=None, check="aggregate_pairing", residual=worst))

    corr = sp.pencil.B20 / params.c**2 + sp.pencil.B02 / params.d**2
    for nn in range(3):
        for mm in range(3):
            table = hereditary_value_lattice(sp, nn, mm, interior_margin=0)
            worst = 0.0
            worst_site = None
            for (j, k), value in table.items():
                L = site_map(j + nn, k + mm)
                res = float(np.linalg.norm(L.conj().T @ L - (value - corr)))
                if res > worst:
                    worst = res
                    worst_site = (j, k)
            checks.append(
                SiteCheck(
                    site=worst_site,
                    check=f"shifted_value_{nn}{mm}",
                    residual=worst,
                )
            )

    worst = 0.0
    B00 = evaluate(sp.pencil, 0, 0)
    for _trial in range(16):
        h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        norm_lattice = complex(np.conj(h) @ (B00 @ h)).real
        norm_plain = float(np.real(np.conj(h) @ h))
        worst = max(worst, abs(norm_lattice - norm_plain))
    checks.append(SiteCheck(site=None, check="embedding_isometry", residual=worst))

    passed = all(entry.residual <= tol for entry in checks)
    return ShiftReport(passed=passed, checks=tuple(checks))


def fit_pencil_interior(
    sp: ShiftSpace, interior_margin: int = 0, tol: float = 1e-9
) -> dict[tuple[int, int], QuadraticPencil]:
    """Per-site quadratic fits to the lattice power tables.

    For each interior site the eleven hereditary lattice values form a
    quadratic table in the powers, so the fit succeeds and returns the
    translated pencil: the constant term is evaluate(p, j, k), the linear
    coefficients pick up translation terms, and the three top-degree
    coefficients are site-independent copies of those of p. A site where
    the fit fails raises, since that contradicts the construction.
    """
    points = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2),
              (2, 1), (1, 2), (2, 2), (3, 0), (0, 3))
    if 3 + interior_margin > sp.K:
        raise ValueError(
            f"fit needs powers up to 3 plus margin {interior_margin}, "
            f"exceeding the truncation radius {sp.K}"
        )
    tables = {}
    for nn, mm in points:
        tables[(nn, mm)] = hereditary_value_lattice(sp, nn, mm, interior_margin=0)
    jmax = sp.K - 3 - interior_margin
    out = {}
    for j in range(-jmax, jmax + 1):
        for k in range(-jmax, jmax + 1):
            site_table = {pt: tables[pt][(j, k)] for pt in points}
            fitted = _fit_from_table(site_table, tol)
            if fitted is None:
                raise RuntimeError(
                    f"quadratic fit failed at site ({j}, {k}); "
                    "the lattice table is not degree 2"
                )
            out[(j, k)] = fitted
    return out


# ---------------------------------------------------------------------------
# JSON wire format


def shift_space_config_to_json(sp: ShiftSpace) -> dict:
    return {"pencil": pencil_to_json(sp.pencil), "K": sp.K, "dimH": sp.dimH}


def shift_space_config_from_json(obj, tol: float) -> ShiftSpace:
    if not isinstance(obj, dict):
        raise ValueError("shift space config JSON must be an object")
    try:
        p = pencil_from_json(obj["pencil"])
        K = int(obj["K"])
        dimH = int(obj["dimH"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed shift space config: {exc}") from exc
    if p.dim != dimH:
        raise ValueError("dimH does not match the pencil dimension")
    return build(p, K, tol)


def shift_report_to_json(report: ShiftReport) -> dict:
    return {
        "passed": report.passed,
        "checks": [
            {
                "site": list(entry.site) if entry.site is not None else None,
                "check": entry.check,
                "residual": entry.residual,
            }
            for entry in report.checks
        ],
    }
