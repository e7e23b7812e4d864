"""Linear maps on 3 x 3 complex symmetric matrices.

The six-element coefficient basis of Sym_3 is parameterized by (c, d):

    B00 = E11,          B10 = c(E12 + E21),   B01 = d(E13 + E31),
    B11 = cd(E23 + E32), B20 = c^2 E22,       B02 = d^2 E33.

A map is stored through its images on that basis. Because a map on Sym_3
pins the Choi matrix's off-diagonal blocks only up to skew-Hermitian parts,
``choi_matrix`` returns the canonical symmetrized representative (skew parts
zero) and the decisive complete-positivity test is the semidefinite
feasibility search of ``pencils.factor_feasibility``, which ranges over that
skew freedom. ``psd_check`` of the canonical representative stays available
as a fast sufficient certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import (
    DEFAULT_TOL,
    PsdVerdict,
    as_hermitian,
    as_matrix,
    gram_factor,
    matrix_from_json,
    matrix_to_json,
    psd_check,
)
from .pencils import (
    FeasibilityOutcome,
    HatParams,
    QuadraticPencil,
    factor_feasibility,
)

BASIS_KEYS = ("00", "10", "01", "11", "20", "02")


@dataclass(frozen=True)
class SymBasis:
    params: HatParams
    elements: dict[str, np.ndarray]


@dataclass(frozen=True)
class LinearMapSym3:
    """A linear map out of Sym_3, given by its six basis images."""

    target_dim: int
    images: dict[str, np.ndarray]

    def __post_init__(self):
        imgs = {}
        for key in BASIS_KEYS:
            if key not in self.images:
                raise ValueError(f"map is missing the image for basis element '{key}'")
            img = as_hermitian(self.images[key])
            if img.shape[0] != self.target_dim:
                raise ValueError(
                    f"image '{key}' has dimension {img.shape[0]}, expected {self.target_dim}"
                )
            imgs[key] = img
        object.__setattr__(self, "images", imgs)


@dataclass(frozen=True)
class CpVerdict:
    kind: str  # "CP" | "NotCP" | "Unknown"
    feasibility: FeasibilityOutcome
    choi_psd: PsdVerdict


@dataclass(frozen=True)
class PositivitySample:
    positive: bool
    worst_min_eig: float
    worst_input: np.ndarray


def sym_basis(params: HatParams) -> SymBasis:
    c, d = params.c, params.d
    E = [[np.zeros((3, 3)) for _ in range(3)] for _ in range(3)]
    for i in range(3):
        for j in range(3):
            E[i][j] = np.zeros((3, 3))
            E[i][j][i, j] = 1.0
    elements = {
        "00": E[0][0],
        "10": c * (E[0][1] + E[1][0]),
        "01": d * (E[0][2] + E[2][0]),
        "11": c * d * (E[1][2] + E[2][1]),
        "20": c * c * E[1][1],
        "02": d * d * E[2][2],
    }
    return SymBasis(params=params, elements=elements)


def choi_map() -> LinearMapSym3:
    """The positive, not completely positive map A -> (2/3)diag shifts - (1/3)A.

    Stored through its images on the c = d = 1 basis; images on other bases
    follow by linearity through ``apply``.
    """

    def phi(A: np.ndarray) -> np.ndarray:
        a = np.diag(A)
        shifted = np.diag([a[0] + a[1], a[1] + a[2], a[2] + a[0]])
        return (2.0 / 3.0) * shifted - (1.0 / 3.0) * A

    basis = sym_basis(HatParams(1.0, 1.0))
    return LinearMapSym3(target_dim=3, images={k: phi(v) for k, v in basis.elements.items()})


def _coordinates(A: np.ndarray, basis: SymBasis, tol: float) -> dict[str, complex]:
    """Read the six basis coordinates of a complex symmetric 3 x 3 matrix.

    The basis elements have disjoint supports, so coordinates are entrywise
    ratios. Raises when A is not symmetric, naming the violating entry.
    """
    A = as_matrix(A, rows=3, cols=3)
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(A[i, j] - A[j, i]) > tol:
                raise ValueError(
                    f"input is not complex symmetric: entry ({i}, {j}) = {A[i, j]} "
                    f"but entry ({j}, {i}) = {A[j, i]}"
                )
    c, d = basis.params.c, basis.params.d
    sym = 0.5 * (A + A.T)
    return {
        "00": sym[0, 0],
        "10": sym[0, 1] / c,
        "01": sym[0, 2] / d,
        "11": sym[1, 2] / (c * d),
        "20": sym[1, 1] / (c * c),
        "02": sym[2, 2] / (d * d),
    }


def apply(m: LinearMapSym3, A: np.ndarray, basis: SymBasis, tol: float = 1e-10) -> np.ndarray:
    """Apply the map to a complex symmetric matrix by basis decomposition."""
    coords = _coordinates(A, basis, tol)
    out = np.zeros((m.target_dim, m.target_dim), dtype=np.complex128)
    for key in BASIS_KEYS:
        out = out + coords[key] * m.images[key]
    return out


def choi_matrix(m: LinearMapSym3, basis: SymBasis) -> np.ndarray:
    """Canonical symmetrized Choi matrix (phi(E_ij))_{ij} of the map.

    Diagonal blocks are the images of E11, E22, E33 recovered from the basis
    normalization; off-diagonal blocks carry the Hermitian data
    phi(E_ij + E_ji)/2 with the undetermined skew parts set to zero.
    """
    n = m.target_dim
    c, d = basis.params.c, basis.params.d
    blocks = [[None] * 3 for _ in range(3)]
    blocks[0][0] = m.images["00"]
    blocks[1][1] = m.images["20"] / (c * c)
    blocks[2][2] = m.images["02"] / (d * d)
    blocks[0][1] = m.images["10"] / (2.0 * c)
    blocks[0][2] = m.images["01"] / (2.0 * d)
    blocks[1][2] = m.images["11"] / (2.0 * c * d)
    C = np.zeros((3 * n, 3 * n), dtype=np.complex128)
    for a in range(3):
        for b in range(a, 3):
            C[a * n : (a + 1) * n, b * n : (b + 1) * n] = blocks[a][b]
            if b > a:
                C[b * n : (b + 1) * n, a * n : (a + 1) * n] = blocks[a][b].conj().T
    return as_hermitian(C)


def pencil_from_map(m: LinearMapSym3, basis: SymBasis) -> QuadraticPencil:
    """The canonical quadratic pencil whose coefficients are the basis images.

    Evaluating it at (alpha, beta) gives the image of the rank-one-patterned
    symmetric matrix with border (1, alpha*c, beta*d). Not monic in general.
    The basis argument fixes which coefficient family the images represent;
    the coefficients themselves are the stored images.
    """
    del basis  # images are already expressed against the caller's basis
    return QuadraticPencil(
        B00=m.images["00"],
        B10=m.images["10"],
        B01=m.images["01"],
        B11=m.images["11"],
        B20=m.images["20"],
        B02=m.images["02"],
    )


def is_cp(
    m: LinearMapSym3,
    basis: SymBasis,
    tol: float = DEFAULT_TOL,
    max_iter: int = 10_000,
) -> CpVerdict:
    """Decide complete positivity on the operator system Sym_3.

    The decisive test is feasibility of the pencil completion problem, which
    searches over the skew freedom of the Choi blocks. The PSD verdict on the
    canonical symmetrized Choi matrix is reported alongside as the fast
    sufficient check.
    """
    fast = psd_check(choi_matrix(m, basis), tol)
    outcome = factor_feasibility(pencil_from_map(m, basis), max_iter=max_iter, tol=tol)
    if outcome.kind == "Feasible":
        kind = "CP"
    elif outcome.kind == "Infeasible":
        kind = "NotCP"
    else:
        kind = "Unknown"
    return CpVerdict(kind=kind, feasibility=outcome, choi_psd=fast)


def is_positive_sampled(
    m: LinearMapSym3,
    basis: SymBasis,
    trials: int = 10_000,
    seed: int = 0,
    tol: float = 1e-9,
) -> PositivitySample:
    """Sampled positivity: worst output eigenvalue over random PSD inputs.

    Inputs alternate between rank-two sums v v^T + w w^T and Wishart-style
    A A^T draws. A PSD matrix that is complex symmetric is necessarily real,
    so real samplers cover the whole admissible input set.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    worst = np.inf
    worst_input = None
    for trial in range(trials):
        if trial % 2 == 0:
            v = rng.standard_normal(3)
            w = rng.standard_normal(3)
            A = np.outer(v, v) + np.outer(w, w)
        else:
            B = rng.standard_normal((3, 3))
            A = B @ B.T
        out = apply(m, A, basis, tol)
        low = float(np.linalg.eigvalsh(as_hermitian(out, tol=1e-8))[0])
        if low < worst:
            worst = low
            worst_input = A
    return PositivitySample(positive=bool(worst >= -tol), worst_min_eig=worst, worst_input=worst_input)


def kraus_from_choi(C: np.ndarray, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Kraus operators of a PSD Choi matrix: C = sum of vec outer products.

    Each Gram factor row of length 3n is reshaped into a 3 x n operator V_i
    so that sum_i V_i* E_ab V_i reproduces block (a, b) of C. The
    reproduction is verified on all nine block units before returning.
    """
    Ch = as_hermitian(C)
    if Ch.shape[0] % 3 != 0:
        raise ValueError("Choi matrix size must be a multiple of 3")
    n = Ch.shape[0] // 3
    Y = gram_factor(Ch, tol)  # raises with a witness when C is indefinite
    kraus = [row.reshape(3, n) for row in Y]
    for a in range(3):
        for b in range(3):
            total = np.zeros((n, n), dtype=np.complex128)
            for V in kraus:
                total += np.outer(V[a].conj(), V[b])
            block = Ch[a * n : (a + 1) * n, b * n : (b + 1) * n]
            if np.linalg.norm(total - block) > 1e-8:
                raise RuntimeError(
                    f"Kraus reconstruction failed on unit E_{a + 1}{b + 1} "
                    f"(residual {np.linalg.norm(total - block):.3e})"
                )
    return kraus


# ---------------------------------------------------------------------------
# JSON wire format


def map_to_json(m: LinearMapSym3, basis: SymBasis) -> dict:
    return {
        "target_dim": m.target_dim,
        "params": {"c": basis.params.c, "d": basis.params.d},
        "images": {key: matrix_to_json(m.images[key]) for key in BASIS_KEYS},
    }


def map_from_json(obj) -> tuple[LinearMapSym3, SymBasis]:
    if not isinstance(obj, dict):
        raise ValueError("map JSON must be an object")
    try:
        target_dim = int(obj["target_dim"])
        params = HatParams(float(obj["params"]["c"]), float(obj["params"]["d"]))
        raw = obj["images"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed map JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("map JSON field 'images' must be an object")
    images = {}
    for key in BASIS_KEYS:
        if key not in raw:
            raise ValueError(f"map JSON is missing image '{key}'")
        images[key] = matrix_from_json(raw[key])
    return LinearMapSym3(target_dim=target_dim, images=images), sym_basis(params)
