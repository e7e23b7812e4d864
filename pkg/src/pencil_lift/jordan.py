"""Finite-dimensional Jordan-type models over commuting unitaries.

The central object is the pair of block matrices

    J1 = [[U1, c U1, 0 ],      J2 = [[U2, 0, d U2],
          [0,  U1,  0 ],             [0,  U2, 0  ],
          [0,  0,   U1]],            [0,  0,  U2 ]]

for commuting unitaries U1, U2 and positive parameters (c, d). The module
builds such pairs, checks membership through the nilpotent-part relations,
fits quadratic pencils to hereditary power tables of arbitrary commuting
pairs, computes joint spectra of commuting matrices, and applies holomorphic
functions blockwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .matrices import (
    as_hermitian,
    as_matrix,
    eig_hermitian,
    matrix_from_json,
    matrix_to_json,
    psd_check,
)
from .pencils import HatParams, QuadraticPencil, evaluate

_FIT_POINTS = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2))
_VALIDATION_POINTS = ((2, 1), (1, 2), (2, 2), (3, 0), (0, 3))


def _unit3(i: int, j: int) -> np.ndarray:
    E = np.zeros((3, 3))
    E[i, j] = 1.0
    return E


@dataclass(frozen=True)
class CommutingUnitaryPair:
    U1: np.ndarray
    U2: np.ndarray

    def __post_init__(self):
        U1 = as_matrix(self.U1)
        k = U1.shape[0]
        if U1.shape[1] != k:
            raise ValueError("U1 must be square")
        U2 = as_matrix(self.U2, rows=k, cols=k)
        eye = np.eye(k)
        for name, U in (("U1", U1), ("U2", U2)):
            defect = float(np.linalg.norm(U.conj().T @ U - eye))
            if defect > 1e-10:
                raise ValueError(f"{name} is not unitary (defect {defect:.3e})")
        comm = float(np.linalg.norm(U1 @ U2 - U2 @ U1))
        if comm > 1e-10:
            raise ValueError(f"unitaries do not commute (commutator norm {comm:.3e})")
        object.__setattr__(self, "U1", U1)
        object.__setattr__(self, "U2", U2)

    @property
    def dim(self) -> int:
        return self.U1.shape[0]


@dataclass(frozen=True)
class RelationResidual:
    relation: str
    residual: float


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    checks: tuple[RelationResidual, ...]

    def residual(self, relation: str) -> float:
        for check in self.checks:
            if check.relation == relation:
                return check.residual
        raise KeyError(relation)


@dataclass(frozen=True)
class JordanPair:
    base: CommutingUnitaryPair
    params: HatParams
    J1: np.ndarray
    J2: np.ndarray

    def __post_init__(self):
        k = self.base.dim
        J1 = as_matrix(self.J1, rows=3 * k, cols=3 * k)
        J2 = as_matrix(self.J2, rows=3 * k, cols=3 * k)
        object.__setattr__(self, "J1", J1)
        object.__setattr__(self, "J2", J2)
        report = class_membership(J1, J2, self.params, tol=1e-10)
        for check in report.checks:
            limit = 1e-12 if check.relation.startswith("block_pattern") else 1e-10
            if check.residual > limit:
                raise ValueError(
                    f"Jordan pair invariant '{check.relation}' fails "
                    f"(residual {check.residual:.3e})"
                )

    @property
    def k(self) -> int:
        return self.base.dim


@dataclass(frozen=True)
class JointSpectrum:
    """Joint eigenvalue pairs of two commuting matrices with multiplicities."""

    points: tuple[tuple[complex, complex, int], ...]

    @property
    def total_multiplicity(self) -> int:
        return sum(mult for _, _, mult in self.points)


def random_commuting_unitaries(k: int, seed: int) -> CommutingUnitaryPair:
    """Draw U_i = V D_i V* for Haar-ish V and random diagonal phases D_i."""
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    V, R = np.linalg.qr(Z)
    V = V * (np.diag(R) / np.abs(np.diag(R)))
    phases1 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=k))
    phases2 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=k))
    U1 = V @ np.diag(phases1) @ V.conj().T
    U2 = V @ np.diag(phases2) @ V.conj().T
    return CommutingUnitaryPair(U1=U1, U2=U2)


def build_jordan_pair(base: CommutingUnitaryPair, params: HatParams) -> JordanPair:
    eye3 = np.eye(3)
    J1 = np.kron(eye3, base.U1) + np.kron(_unit3(0, 1), params.c * base.U1)
    J2 = np.kron(eye3, base.U2) + np.kron(_unit3(0, 2), params.d * base.U2)
    return JordanPair(base=base, params=params, J1=J1, J2=J2)


def _power(T: np.ndarray, n: int) -> np.ndarray:
    if n < 0:
        try:
            return np.linalg.matrix_power(T, n)
        except np.linalg.LinAlgError as exc:
            raise ValueError("negative power requires an invertible matrix") from exc
    return np.linalg.matrix_power(T, n)


def hereditary_value(
    T1: np.ndarray, T2: np.ndarray, G: np.ndarray, n: int, m: int
) -> np.ndarray:
    """The weighted power value (T1^n T2^m)* G (T1^n T2^m)."""
    T1 = as_matrix(T1)
    dim = T1.shape[0]
    T2 = as_matrix(T2, rows=dim, cols=dim)
    comm = float(np.linalg.norm(T1 @ T2 - T2 @ T1))
    if comm > 1e-9:
        raise ValueError(f"matrices do not commute (commutator norm {comm:.3e})")
    G = as_hermitian(as_matrix(G, rows=dim, cols=dim))
    if psd_check(G, 1e-12).kind != "PositiveDefinite":
        raise ValueError("weight matrix must be positive definite")
    P = _power(T1, n) @ _power(T2, m)
    return as_hermitian(P.conj().T @ G @ P, tol=1e-8)


def _fit_from_table(values: dict[tuple[int, int], np.ndarray], tol: float):
    """Fit the six quadratic coefficients to a table of hereditary values.

    The table must contain the six interpolation points and the five
    validation points. Returns the pencil, or None when any validation
    residual exceeds tol in Frobenius norm.
    """
    V = values
    B00 = V[(0, 0)]
    B20 = (V[(2, 0)] - 2.0 * V[(1, 0)] + V[(0, 0)]) / 2.0
    B10 = (4.0 * V[(1, 0)] - 3.0 * V[(0, 0)] - V[(2, 0)]) / 2.0
    B02 = (V[(0, 2)] - 2.0 * V[(0, 1)] + V[(0, 0)]) / 2.0
    B01 = (4.0 * V[(0, 1)] - 3.0 * V[(0, 0)] - V[(0, 2)]) / 2.0
    B11 = V[(1, 1)] - B00 - B10 - B01 - B20 - B02
    pencil = QuadraticPencil(B00=B00, B10=B10, B01=B01, B11=B11, B20=B20, B02=B02)
    for n, m in _VALIDATION_POINTS:
        residual = float(np.linalg.norm(V[(n, m)] - evaluate(pencil, n, m)))
        if residual > tol:
            return None
    return pencil


def fit_pencil(T1: np.ndarray, T2: np.ndarray, G: np.ndarray, tol: float = 1e-9):
    """Fit a quadratic pencil to the hereditary values of a commuting pair.

    Coefficients are interpolated from the values at the six base exponents;
    the fit is then validated against five further exponents. Returns None
    when validation fails, which is how a pair reveals that its power table
    is not quadratic.
    """
    table = {}
    for n, m in _FIT_POINTS + _VALIDATION_POINTS:
        table[(n, m)] = hereditary_value(T1, T2, G, n, m)
    return _fit_from_table(table, tol)


def class_membership(
    J1: np.ndarray, J2: np.ndarray, params: HatParams, tol: float = 1e-10
) -> MembershipReport:
    """Residuals of the block pattern and nilpotent-part relations.

    The nilpotent parts are N_i = J_i - diag block; products of distinct
    N's and squares must vanish. The range-projection match and the defect
    resolution of the identity hold for the parameter-normalized parts
    N1/c and N2/d, which is how unequal c, d enter the same model.
    """
    J1 = as_matrix(J1)
    dim = J1.shape[0]
    if dim % 3 != 0:
        raise ValueError("block matrices must have dimension divisible by 3")
    J2 = as_matrix(J2, rows=dim, cols=dim)
    k = dim // 3
    U1 = J1[:k, :k]
    U2 = J2[:k, :k]
    eye3 = np.eye(3)
    eyek = np.eye(k)
    pattern1 = np.kron(eye3, U1) + np.kron(_unit3(0, 1), params.c * U1)
    pattern2 = np.kron(eye3, U2) + np.kron(_unit3(0, 2), params.d * U2)
    N1 = J1 - np.kron(eye3, U1)
    N2 = J2 - np.kron(eye3, U2)
    M1 = N1 / params.c
    M2 = N2 / params.d
    norm = np.linalg.norm
    checks = (
        RelationResidual("block_pattern_1", float(norm(J1 - pattern1))),
        RelationResidual("block_pattern_2", float(norm(J2 - pattern2))),
        RelationResidual("diagonal_unitary_1", float(norm(U1.conj().T @ U1 - eyek))),
        RelationResidual("diagonal_unitary_2", float(norm(U2.conj().T @ U2 - eyek))),
        RelationResidual("commutation", float(norm(J1 @ J2 - J2 @ J1))),
        RelationResidual("nilpotent_square_1", float(norm(N1 @ N1))),
        RelationResidual("nilpotent_square_2", float(norm(N2 @ N2))),
        RelationResidual("nilpotent_product_12", float(norm(N1 @ N2))),
        RelationResidual("nilpotent_product_21", float(norm(N2 @ N1))),
        RelationResidual("nilpotent_cross_adjoint_12", float(norm(N1 @ N2.conj().T))),
        RelationResidual("nilpotent_cross_adjoint_21", float(norm(N2 @ N1.conj().T))),
        RelationResidual(
            "normalized_range_projections_match",
            float(norm(M1 @ M1.conj().T - M2 @ M2.conj().T)),
        ),
        RelationResidual(
            "normalized_defect_resolution",
            float(
                norm(
                    M1 @ M1.conj().T
                    + M1.conj().T @ M1
                    + M2.conj().T @ M2
                    - np.eye(dim)
                )
            ),
        ),
    )
    passed = all(check.residual <= tol for check in checks)
    return MembershipReport(passed=passed, checks=checks)


class _SplitAmbiguous(Exception):
    pass


def _greedy_clusters(values: np.ndarray, radius: float) -> list[list[int]]:
    """Single-linkage clusters: indices chained through gaps of at most radius."""
    n = len(values)
    unused = set(range(n))
    clusters = []
    while unused:
        seed_idx = min(unused)
        unused.discard(seed_idx)
        members = [seed_idx]
        frontier = [seed_idx]
        while frontier:
            i = frontier.pop()
            near = [j for j in unused if abs(values[j] - values[i]) <= radius]
            for j in near:
                unused.discard(j)
                members.append(j)
                frontier.append(j)
        clusters.append(sorted(members))
    return clusters


def _spectral_split(mats: list[np.ndarray], radius: float) -> list[list[np.ndarray]]:
    """Split a commuting family along the eigenvalue clusters of mats[0].

    Each returned family is the compression of the whole input family to the
    invariant subspace belonging to one cluster.
    """
    M = mats[0]
    if M.shape[0] == 1:
        return [mats]
    T, _ = schur(M, output="complex")
    d = np.diag(T)
    clusters = _greedy_clusters(d, radius)
    if len(clusters) == 1:
        return [mats]
    families = []
    for idx in clusters:
        idx_set = set(idx)

        def _pick(z, d=d, idx_set=idx_set):
            return int(np.argmin(np.abs(d - z))) in idx_set

        _, Zs, sdim = schur(M, output="complex", sort=_pick)
        if sdim != len(idx):
            raise _SplitAmbiguous
        Q = Zs[:, :sdim]
        families.append([Q.conj().T @ X @ Q for X in mats])
    return families


def joint_eigenvalues(T1: np.ndarray, T2: np.ndarray, tol: float = 1e-8) -> JointSpectrum:
    """Joint eigenvalue pairs of a commuting pair, with multiplicities.

    A Schur decomposition of T1 + theta*T2 for a random unimodular theta
    groups the spectrum; each group's invariant subspace is refined along
    the individual eigenvalues of T1 and then T2. Coordinates are reported
    as trace means over the final subspaces, which stays accurate even for
    defective blocks (the first-order splittings of a perturbed Jordan block
    cancel in the mean). A group whose refinement exposes two genuinely
    different pairs means theta folded distinct joint eigenvalues together;
    a fresh theta is drawn, up to 8 retries.
    """
    T1 = as_matrix(T1)
    dim = T1.shape[0]
    T2 = as_matrix(T2, rows=dim, cols=dim)
    comm = float(np.linalg.norm(T1 @ T2 - T2 @ T1))
    if comm > tol:
        raise ValueError(f"matrices do not commute (commutator norm {comm:.3e})")
    rng = np.random.default_rng(7)
    for _attempt in range(9):
        theta = np.exp(2j * np.pi * rng.uniform())
        A = T1 + theta * T2
        Ts, _ = schur(A, output="complex")
        diag = np.diag(Ts)
        scale = max(1.0, float(np.abs(diag).max()))
        radius = max(tol, 1e-8) * scale
        refine_radius = max(1e4 * radius, 3e-4 * scale)
        try:
            groups = _spectral_split([A, T1, T2], radius)
            points = []
            collision = False
            for group in groups:
                _, M1, M2 = group
                leaves = []
                for fam1 in _spectral_split([M1, M2], refine_radius):
                    for fam2 in _spectral_split([fam1[1], fam1[0]], refine_radius):
                        M2f, M1f = fam2
                        size = M1f.shape[0]
                        mu = complex(np.trace(M1f) / size)
                        nu = complex(np.trace(M2f) / size)
                        leaves.append((mu, nu, size))
                if len(leaves) > 1:
                    collision = True
                    break
                points.extend(leaves)
            if collision:
                continue
        except _SplitAmbiguous:
            continue
        points.sort(key=lambda p: (p[0].real, p[0].imag, p[1].real, p[1].imag))
        total = sum(p[2] for p in points)
        if total != dim:
            raise RuntimeError("joint spectrum multiplicities do not sum to the dimension")
        return JointSpectrum(points=tuple(points))
    raise RuntimeError("joint eigenvalues failed to separate after 8 retries")


def _apply_spectral(U: np.ndarray, g) -> np.ndarray:
    """g(U) for a unitary U through its Schur (diagonal) form."""
    T, Z = schur(U, output="complex")
    off = T - np.diag(np.diag(T))
    if float(np.linalg.norm(off)) > 1e-8:
        raise ValueError("spectral function application requires a unitary base")
    values = np.array([g(z) for z in np.diag(T)], dtype=np.complex128)
    return Z @ np.diag(values) @ Z.conj().T


def apply_holomorphic(J: JordanPair, g, g_prime) -> tuple[np.ndarray, np.ndarray]:
    """Apply a holomorphic function blockwise to a Jordan-type pair.

    Returns the pair

        [[g(U1), c U1 g'(U1), 0], ...],   [[g(U2), 0, d U2 g'(U2)], ...]

    with g evaluated spectrally on the unitary bases. The caller supplies
    g and its derivative as scalar functions defined on the unit circle
    (respecting any branch cuts away from the spectra).
    """
    for name, U in (("U1", J.base.U1), ("U2", J.base.U2)):
        defect = float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])))
        if defect > 1e-10:
            raise ValueError(f"{name} is not unitary (defect {defect:.3e})")
    eye3 = np.eye(3)
    gU1 = _apply_spectral(J.base.U1, g)
    gU2 = _apply_spectral(J.base.U2, g)
    gpU1 = _apply_spectral(J.base.U1, g_prime)
    gpU2 = _apply_spectral(J.base.U2, g_prime)
    M1 = np.kron(eye3, gU1) + np.kron(_unit3(0, 1), J.params.c * J.base.U1 @ gpU1)
    M2 = np.kron(eye3, gU2) + np.kron(_unit3(0, 2), J.params.d * J.base.U2 @ gpU2)
    return M1, M2


def sjordan_exp_check(
    A1: np.ndarray, A2: np.ndarray, params: HatParams, tol: float = 1e-9
) -> MembershipReport:
    """Exponentiate self-adjoint Jordan-type blocks and check the image class.

    Builds the blocks [[A1, -ic, 0], [0, A1, 0], [0, 0, A1]] (and the A2
    analog with -id in the corner), exponentiates i times them two ways
    (the exact nilpotent expansion and a general matrix exponential), and
    verifies the results satisfy the unitary-model relations with base
    exp(iA_k). The two exponentiation routes are compared explicitly, so a
    bug in the closed form cannot hide.
    """
    A1 = as_hermitian(A1)
    k = A1.shape[0]
    A2 = as_hermitian(as_matrix(A2, rows=k, cols=k))
    comm = float(np.linalg.norm(A1 @ A2 - A2 @ A1))
    if comm > tol:
        raise ValueError(f"matrices do not commute (commutator norm {comm:.3e})")
    from scipy.linalg import expm

    eye3 = np.eye(3)
    eyek = np.eye(k)

    def unitary_exp(A):
        w, V = eig_hermitian(A)
        return V @ np.diag(np.exp(1j * w)) @ V.conj().T

    U1 = unitary_exp(A1)
    U2 = unitary_exp(A2)
    R1 = np.kron(eye3, U1) + np.kron(_unit3(0, 1), params.c * U1)
    R2 = np.kron(eye3, U2) + np.kron(_unit3(0, 2), params.d * U2)
    S1 = np.kron(eye3, A1) + np.kron(_unit3(0, 1), -1j * params.c * eyek)
    S2 = np.kron(eye3, A2) + np.kron(_unit3(0, 2), -1j * params.d * eyek)
    r1 = float(np.linalg.norm(R1 - expm(1j * S1)))
    r2 = float(np.linalg.norm(R2 - expm(1j * S2)))
    membership = class_membership(R1, R2, params, tol=tol)
    checks = (
        RelationResidual("exp_route_match_1", r1),
        RelationResidual("exp_route_match_2", r2),
    ) + membership.checks
    passed = r1 <= tol and r2 <= tol and membership.passed
    return MembershipReport(passed=passed, checks=checks)


# ---------------------------------------------------------------------------
# JSON wire format


def jordan_pair_to_json(J: JordanPair) -> dict:
    return {
        "k": J.k,
        "params": {"c": J.params.c, "d": J.params.d},
        "U1": matrix_to_json(J.base.U1),
        "U2": matrix_to_json(J.base.U2),
    }


def jordan_pair_from_json(obj) -> JordanPair:
    if not isinstance(obj, dict):
        raise ValueError("Jordan pair JSON must be an object")
    try:
        k = int(obj["k"])
        params = HatParams(float(obj["params"]["c"]), float(obj["params"]["d"]))
        U1 = matrix_from_json(obj["U1"])
        U2 = matrix_from_json(obj["U2"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed Jordan pair JSON: {exc}") from exc
    if U1.shape[0] != k:
        raise ValueError("field 'k' does not match the unitary dimension")
    base = CommutingUnitaryPair(U1=U1, U2=U2)
    return build_jordan_pair(base, params)


def membership_to_json(report: MembershipReport) -> dict:
    return {
        "passed": report.passed,
        "checks": [
            {"relation": check.relation, "residual": check.residual}
            for check in report.checks
        ],
    }
