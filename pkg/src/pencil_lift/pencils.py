"""Two-variable matrix quadratic pencils.

A pencil is the coefficient family B_ij (0 <= i+j <= 2) of

    Q(alpha, beta) = B00 + alpha*B10 + beta*B01 + alpha*beta*B11
                     + alpha^2*B20 + beta^2*B02,

with index i pairing with alpha and index j with beta. The module covers
evaluation, the hat modification Q - (1/c^2)B20 - (1/d^2)B02, positivity
testing over the real plane, factorization of Q as

    Q(alpha, beta) = (V0 + alpha*V1 + beta*V2)* (V0 + alpha*V1 + beta*V2)

phrased as a semidefinite completion problem solved by Dykstra alternating
projections, and the counterexample pipeline that produces a monic pencil
which is pointwise PSD on all of R^2 yet admits no such factorization.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .matrices import (
    DEFAULT_TOL,
    as_hermitian,
    as_matrix,
    eig_hermitian,
    inv_sqrt,
    gram_factor,
    matrix_from_json,
    matrix_to_json,
    psd_check,
)

MONIC_TOL = 1e-12

# Smallest parameter value the c = d search will return; pencils without any
# quadratic coefficients are admissible at every scale and get the floor.
PARAM_FLOOR = 1e-6


@dataclass(frozen=True)
class HatParams:
    c: float
    d: float

    def __post_init__(self):
        if not (self.c > 0 and self.d > 0):
            raise ValueError(f"hat parameters must be positive, got c={self.c}, d={self.d}")


@dataclass(frozen=True)
class QuadraticPencil:
    """Coefficient family of a matrix-valued two-variable quadratic pencil."""

    B00: np.ndarray
    B10: np.ndarray
    B01: np.ndarray
    B11: np.ndarray
    B20: np.ndarray
    B02: np.ndarray
    monic: bool = False

    def __post_init__(self):
        n = None
        for name in ("B00", "B10", "B01", "B11", "B20", "B02"):
            m = as_hermitian(getattr(self, name))
            if n is None:
                n = m.shape[0]
            elif m.shape[0] != n:
                raise ValueError(f"coefficient {name} has dimension {m.shape[0]}, expected {n}")
            object.__setattr__(self, name, m)
        if self.monic and np.linalg.norm(self.B00 - np.eye(n)) > MONIC_TOL:
            raise ValueError("monic flag set but B00 is not the identity")

    @property
    def dim(self) -> int:
        return self.B00.shape[0]

    def coeffs(self) -> dict[str, np.ndarray]:
        return {
            "00": self.B00,
            "10": self.B10,
            "01": self.B01,
            "11": self.B11,
            "20": self.B20,
            "02": self.B02,
        }


@dataclass(frozen=True)
class FactorTriple:
    """Operators V0, V1, V2 with a common target space realizing a factorization."""

    V0: np.ndarray
    V1: np.ndarray
    V2: np.ndarray

    def __post_init__(self):
        for name in ("V0", "V1", "V2"):
            object.__setattr__(self, name, as_matrix(getattr(self, name)))
        if not (self.V0.shape == self.V1.shape == self.V2.shape):
            raise ValueError("factor blocks must share one shape")

    @property
    def source_dim(self) -> int:
        return self.V0.shape[1]

    @property
    def target_dim(self) -> int:
        return self.V0.shape[0]


@dataclass(frozen=True)
class FeasibilityOutcome:
    kind: str  # "Feasible" | "Infeasible" | "Undetermined"
    gram: np.ndarray | None
    gap: float
    iterations: int


@dataclass(frozen=True)
class PositivityVerdict:
    kind: str  # "CertifiedPositive" | "NotPositive" | "SampledPositive"
    alpha: float | None = None
    beta: float | None = None
    x: np.ndarray | None = None
    value: float | None = None
    feasibility: FeasibilityOutcome | None = None


def evaluate(p: QuadraticPencil, alpha: float, beta: float) -> np.ndarray:
    a, b = float(alpha), float(beta)
    return (
        p.B00
        + a * p.B10
        + b * p.B01
        + (a * b) * p.B11
        + (a * a) * p.B20
        + (b * b) * p.B02
    )


def hat(p: QuadraticPencil, params: HatParams) -> QuadraticPencil:
    """Subtract the class correction (1/c^2)B20 + (1/d^2)B02 from the constant term."""
    B00 = p.B00 - p.B20 / params.c**2 - p.B02 / params.d**2
    monic = bool(np.linalg.norm(B00 - np.eye(p.dim)) <= MONIC_TOL)
    return replace(p, B00=B00, monic=monic)


def scalar_quadratic_nonneg(
    a: float, b1: float, b2: float, p: float, r: float, s: float, tol: float = DEFAULT_TOL
) -> bool:
    """Exact nonnegativity of q = a + 2*b1*x + 2*b2*y + p*x^2 + 2*r*x*y + s*y^2 on R^2.

    Nonnegative iff the quadratic form [[p, r], [r, s]] is PSD, the linear
    part lies in its range, and the value at the minimizer clears -tol.
    """
    A = np.array([[p, r], [r, s]], dtype=float)
    b = np.array([b1, b2], dtype=float)
    w, V = np.linalg.eigh(A)
    if w[0] < -tol:
        return False
    cutoff = max(tol, 1e-14 * max(1.0, float(w[-1])))
    coords = V.T @ b
    null = w <= cutoff
    if np.any(np.abs(coords[null]) > tol * (1.0 + np.linalg.norm(b))):
        return False
    pinv_coords = np.where(null, 0.0, coords / np.where(null, 1.0, w))
    return bool(a - coords @ pinv_coords >= -tol)


def _rayleigh_coeffs(p: QuadraticPencil, x: np.ndarray) -> tuple[float, ...]:
    """Scalars (a, b1, b2, pq, r, s) of the direction quadratic <Q(.,.)x, x>."""

    def form(B):
        return float(np.real(x.conj() @ (B @ x)))

    return (
        form(p.B00),
        0.5 * form(p.B10),
        0.5 * form(p.B01),
        form(p.B20),
        0.5 * form(p.B11),
        form(p.B02),
    )


def _direction_witness_point(
    a: float, b1: float, b2: float, pq: float, r: float, s: float, tol: float
) -> tuple[float, float] | None:
    """A point where the direction quadratic dips below -tol, if one is findable."""
    A = np.array([[pq, r], [r, s]], dtype=float)
    b = np.array([b1, b2], dtype=float)

    def q(pt):
        return a + 2.0 * b @ pt + pt @ A @ pt

    w, V = np.linalg.eigh(A)
    candidates = []
    if w[0] >= -tol:
        # PSD quadratic part: either an interior minimizer or escape along a
        # null direction carrying a linear slope.
        cutoff = max(tol, 1e-14 * max(1.0, float(w[-1])))
        coords = V.T @ b
        null = w <= cutoff
        pinv_coords = np.where(null, 0.0, coords / np.where(null, 1.0, w))
        candidates.append(-(V @ pinv_coords))
        for k in np.nonzero(null)[0]:
            u = V[:, k]
            if abs(b @ u) > 0:
                base = -(V @ pinv_coords)
                for t in 2.0 ** np.arange(0, 80):
                    pt = base - t * np.sign(b @ u) * u
                    if q(pt) < -tol:
                        return float(pt[0]), float(pt[1])
    else:
        # Indefinite quadratic part: march along the negative-curvature axis.
        u = V[:, 0]
        if b @ u > 0:
            u = -u
        for t in 2.0 ** np.arange(0, 80):
            pt = t * u
            if q(pt) < -tol:
                return float(pt[0]), float(pt[1])
    for pt in candidates:
        if q(pt) < -tol:
            return float(pt[0]), float(pt[1])
    return None


def positivity_check(
    p: QuadraticPencil,
    grid_radius: float = 8.0,
    grid_steps: int = 33,
    n_directions: int = 64,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> PositivityVerdict:
    """Three-valued positivity test of Q(alpha, beta) >= 0 over the real plane.

    A grid scan and per-direction exact quadratic tests hunt for violations
    (NotPositive comes with a re-checkable witness). If no violation shows up,
    a successful factorization upgrades the verdict to CertifiedPositive;
    otherwise the result stays SampledPositive, which is all finite sampling
    can honestly claim.
    """
    if grid_steps < 1 or n_directions < 1:
        raise ValueError("grid_steps and n_directions must be at least 1")
    axis = np.linspace(-grid_radius, grid_radius, grid_steps)
    for alpha in axis:
        for beta in axis:
            verdict = psd_check(evaluate(p, alpha, beta), tol)
            if verdict.kind == "Indefinite":
                return PositivityVerdict(
                    "NotPositive",
                    alpha=float(alpha),
                    beta=float(beta),
                    x=verdict.witness,
                    value=verdict.min_eigenvalue,
                )
    rng = np.random.default_rng(seed)
    for _ in range(n_directions):
        x = rng.standard_normal(p.dim) + 1j * rng.standard_normal(p.dim)
        x /= np.linalg.norm(x)
        coeffs = _rayleigh_coeffs(p, x)
        if not scalar_quadratic_nonneg(*coeffs, tol=tol):
            point = _direction_witness_point(*coeffs, tol=tol)
            if point is None:
                continue
            alpha, beta = point
            value = float(np.real(x.conj() @ (evaluate(p, alpha, beta) @ x)))
            if value < -0.5 * tol:
                return PositivityVerdict("NotPositive", alpha=alpha, beta=beta, x=x, value=value)
    outcome = factor_feasibility(p)
    if outcome.kind == "Feasible":
        return PositivityVerdict("CertifiedPositive", feasibility=outcome)
    return PositivityVerdict("SampledPositive", feasibility=outcome)


# ---------------------------------------------------------------------------
# Factorization as semidefinite completion


def _affine_targets(p: QuadraticPencil):
    diag = (p.B00, p.B20, p.B02)
    offd = {(0, 1): 0.5 * p.B10, (0, 2): 0.5 * p.B01, (1, 2): 0.5 * p.B11}
    return diag, offd


def _project_affine(G: np.ndarray, p: QuadraticPencil) -> np.ndarray:
    """Orthogonal projection onto the constraint set of the completion problem.

    Diagonal blocks and the Hermitian parts of the off-diagonal blocks are
    pinned by the pencil coefficients; the skew parts of the off-diagonal
    blocks are the free coordinates and pass through untouched.
    """
    n = p.dim
    diag, offd = _affine_targets(p)
    X = G.copy()
    for k in range(3):
        X[k * n : (k + 1) * n, k * n : (k + 1) * n] = diag[k]
    for (a, b), H in offd.items():
        blk = G[a * n : (a + 1) * n, b * n : (b + 1) * n]
        skew = 0.5 * (blk - blk.conj().T)
        X[a * n : (a + 1) * n, b * n : (b + 1) * n] = H + skew
        X[b * n : (b + 1) * n, a * n : (a + 1) * n] = (H + skew).conj().T
    return X


def _project_psd(G: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(G)
    Y = (V * np.maximum(w, 0.0)) @ V.conj().T
    return 0.5 * (Y + Y.conj().T)


def factor_feasibility(
    p: QuadraticPencil,
    max_iter: int = 10_000,
    tol: float = DEFAULT_TOL,
    infeas_threshold: float = 1e-6,
) -> FeasibilityOutcome:
    """Decide whether the pencil factors, via Dykstra alternating projections.

    The pencil factors exactly when some PSD 3n x 3n matrix G meets the block
    constraints G00 = B00, G11 = B20, G22 = B02 and Gab + Gba equal to B10,
    B01, B11 for (a,b) = (0,1), (0,2), (1,2). Dykstra projections alternate
    between the PSD cone (eigenvalue clipping, with the correction term) and
    that affine set; the terminal gap between the two iterates converges to
    the distance between the sets. A gap at or below tol certifies a feasible
    point; a gap that stabilizes above infeas_threshold (relative spread of
    the trailing 50 gaps below tol) certifies infeasibility at working
    precision; running out of iterations is reported as Undetermined.
    """
    X = _project_affine(np.zeros((3 * p.dim, 3 * p.dim), dtype=np.complex128), p)
    correction = np.zeros_like(X)
    window: deque[float] = deque(maxlen=50)
    gap = np.inf
    for it in range(1, max_iter + 1):
        Z = X + correction
        Y = _project_psd(Z)
        correction = Z - Y
        X = _project_affine(Y, p)
        gap = float(np.linalg.norm(Y - X))
        if gap <= tol:
            return FeasibilityOutcome("Feasible", gram=Y, gap=gap, iterations=it)
        window.append(gap)
        if (
            len(window) == window.maxlen
            and gap > infeas_threshold
            and max(window) - min(window) <= tol * gap
        ):
            return FeasibilityOutcome("Infeasible", gram=None, gap=gap, iterations=it)
    return FeasibilityOutcome("Undetermined", gram=None, gap=gap, iterations=max_iter)


def gram_to_factors(G: np.ndarray, tol: float = DEFAULT_TOL) -> FactorTriple:
    """Split a PSD completion G = Y*Y into the three factor blocks."""
    Gh = as_hermitian(G, tol=1e-8)
    if Gh.shape[0] % 3 != 0:
        raise ValueError("completion matrix size must be a multiple of 3")
    n = Gh.shape[0] // 3
    Y = gram_factor(Gh, tol)
    return FactorTriple(V0=Y[:, :n], V1=Y[:, n : 2 * n], V2=Y[:, 2 * n :])


def verify_factorization(p: QuadraticPencil, f: FactorTriple, tol: float = DEFAULT_TOL) -> bool:
    """Check the six coefficient identities of a factorization, each in Frobenius norm."""
    if f.source_dim != p.dim:
        raise ValueError("factor source dimension does not match the pencil")
    pairs = [
        (f.V0.conj().T @ f.V0, p.B00),
        (f.V0.conj().T @ f.V1 + f.V1.conj().T @ f.V0, p.B10),
        (f.V0.conj().T @ f.V2 + f.V2.conj().T @ f.V0, p.B01),
        (f.V1.conj().T @ f.V2 + f.V2.conj().T @ f.V1, p.B11),
        (f.V1.conj().T @ f.V1, p.B20),
        (f.V2.conj().T @ f.V2, p.B02),
    ]
    return all(np.linalg.norm(lhs - rhs) <= tol for lhs, rhs in pairs)


def pencil_from_factors(f: FactorTriple) -> QuadraticPencil:
    """Expand (V0 + a*V1 + b*V2)*(V0 + a*V1 + b*V2) into its coefficient family."""
    return QuadraticPencil(
        B00=f.V0.conj().T @ f.V0,
        B10=f.V0.conj().T @ f.V1 + f.V1.conj().T @ f.V0,
        B01=f.V0.conj().T @ f.V2 + f.V2.conj().T @ f.V0,
        B11=f.V1.conj().T @ f.V2 + f.V2.conj().T @ f.V1,
        B20=f.V1.conj().T @ f.V1,
        B02=f.V2.conj().T @ f.V2,
    )


def random_factor_triple(n: int, target_dim: int, seed: int) -> FactorTriple:
    """Random factor triple with source dimension n mapping into C^target_dim."""
    rng = np.random.default_rng(seed)

    def block():
        return (rng.standard_normal((target_dim, n)) + 1j * rng.standard_normal((target_dim, n))) / np.sqrt(
            2.0 * target_dim
        )

    return FactorTriple(V0=block(), V1=block(), V2=block())


# ---------------------------------------------------------------------------
# Monicization and the counterexample pipeline


def monicize(p: QuadraticPencil, epsilon: float, tol: float = DEFAULT_TOL) -> QuadraticPencil:
    """Shift the constant term by epsilon*I and renormalize the pencil to be monic.

    With D = (B00 + eps*I)^{-1/2}, every coefficient is conjugated by D, which
    is a congruence, so pointwise positivity verdicts are preserved.
    """
    base = p.B00 + float(epsilon) * np.eye(p.dim)
    D = inv_sqrt(base, tol)
    B00 = D @ base @ D
    if np.linalg.norm(B00 - np.eye(p.dim)) > 1e-9:
        raise RuntimeError("monicization failed to normalize the constant term")
    return QuadraticPencil(
        B00=np.eye(p.dim),
        B10=D @ p.B10 @ D,
        B01=D @ p.B01 @ D,
        B11=D @ p.B11 @ D,
        B20=D @ p.B20 @ D,
        B02=D @ p.B02 @ D,
        monic=True,
    )


def _grid_min_eig(p: QuadraticPencil, grid_radius: float, grid_steps: int) -> float:
    axis = np.linspace(-grid_radius, grid_radius, grid_steps)
    best = np.inf
    for alpha in axis:
        for beta in axis:
            w = np.linalg.eigvalsh(evaluate(p, alpha, beta))
            if w[0] < best:
                best = float(w[0])
    return best


def suggest_cd(
    p: QuadraticPencil,
    grid_radius: float = 8.0,
    grid_steps: int = 33,
    tol: float = DEFAULT_TOL,
) -> HatParams | None:
    """Smallest c = d making delta*I - (1/c^2)B02 - (1/d^2)B20 positive semidefinite.

    delta is the grid minimum of the smallest eigenvalue of the pencil; when
    it is not safely positive there is no admissible parameter to suggest and
    the search reports none. The c = d search doubles out of a small floor and
    then bisects.
    """
    if not p.monic:
        raise ValueError("suggest_cd expects a monic pencil")
    delta = _grid_min_eig(p, grid_radius, grid_steps)
    if delta <= tol:
        return None
    M = p.B02 + p.B20
    eye = np.eye(p.dim)

    def admissible(c: float) -> bool:
        return psd_check(delta * eye - M / c**2, tol).kind != "Indefinite"

    c = PARAM_FLOOR
    if admissible(c):
        return HatParams(c, c)
    while not admissible(c):
        c *= 2.0
        if c > 2.0**200:  # pragma: no cover - requires a non-finite pencil
            return None
    lo, hi = c / 2.0, c
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return HatParams(hi, hi)


def build_counterexample(tol: float = DEFAULT_TOL) -> tuple[QuadraticPencil, HatParams]:
    """Monic dimension-3 pencil that is globally PSD but does not factor.

    Pipeline: start from the pencil of the positive-but-not-completely-positive
    map on symmetric 3 x 3 matrices, add an epsilon ridge sized from the
    (negative) bottom eigenvalue of its symmetrized Choi matrix, monicize, and
    pick hat parameters from the grid search. The returned parameters are kept
    on the globally safe side of the congruence lower bound
    eps / lambda_max(B00 + eps*I) <= min_eig Q(alpha, beta), which holds on
    all of R^2, not just on the grid. Infeasibility of the hat pencil is spot
    checked for the returned parameters and two scaled-up variants before
    returning; the whole pipeline is deterministic.
    """
    from . import cpmaps  # deferred: cpmaps depends on this module

    m = cpmaps.choi_map()
    basis = cpmaps.sym_basis(HatParams(1.0, 1.0))
    p0 = cpmaps.pencil_from_map(m, basis)
    choi = cpmaps.choi_matrix(m, basis)
    lam_min = float(eig_hermitian(choi)[0][0])
    if lam_min >= 0:
        raise RuntimeError("expected a negative Choi eigenvalue for the base map")
    eps = 0.5 * abs(lam_min)
    monic = monicize(p0, eps, tol)
    params = suggest_cd(monic, grid_radius=8.0, grid_steps=161, tol=tol)
    if params is None:
        raise RuntimeError("no admissible hat parameters found for the counterexample pencil")
    delta_global = eps / float(eig_hermitian(p0.B00 + eps * np.eye(p0.dim))[0][-1])
    corr = (monic.B20 + monic.B02) / params.c**2
    lam_corr = float(eig_hermitian(corr)[0][-1])
    if lam_corr > delta_global:
        pad = float(np.sqrt(lam_corr / delta_global)) * (1.0 + 1e-9)
        params = HatParams(params.c * pad, params.d * pad)
    for c, d in [(params.c, params.d), (2 * params.c, 2 * params.d), (4 * params.c, params.d)]:
        outcome = factor_feasibility(hat(monic, HatParams(c, d)), max_iter=10_000, tol=tol)
        if outcome.kind != "Infeasible":
            raise RuntimeError(
                f"counterexample spot check at (c, d) = ({c:.6g}, {d:.6g}) "
                f"returned {outcome.kind} with gap {outcome.gap:.3e}"
            )
    return monic, params


# ---------------------------------------------------------------------------
# JSON wire format


def pencil_to_json(p: QuadraticPencil) -> dict:
    return {
        "dim": p.dim,
        "monic": bool(p.monic),
        "B": {key: matrix_to_json(val) for key, val in p.coeffs().items()},
    }


def pencil_from_json(obj) -> QuadraticPencil:
    if not isinstance(obj, dict):
        raise ValueError("pencil JSON must be an object")
    try:
        dim = int(obj["dim"])
        blocks = obj["B"]
        monic = bool(obj["monic"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed pencil JSON: {exc}") from exc
    if not isinstance(blocks, dict):
        raise ValueError("pencil JSON field 'B' must be an object")
    coeffs = {}
    for key in ("00", "10", "01", "11", "20", "02"):
        if key not in blocks:
            raise ValueError(f"pencil JSON is missing coefficient '{key}'")
        m = matrix_from_json(blocks[key])
        if m.shape != (dim, dim):
            raise ValueError(f"coefficient '{key}' has shape {m.shape}, expected ({dim}, {dim})")
        coeffs[key] = m
    return QuadraticPencil(
        B00=coeffs["00"],
        B10=coeffs["10"],
        B01=coeffs["01"],
        B11=coeffs["11"],
        B20=coeffs["20"],
        B02=coeffs["02"],
        monic=monic,
    )


def feasibility_to_json(outcome: FeasibilityOutcome) -> dict:
    out = {"kind": outcome.kind, "gap": outcome.gap, "iterations": outcome.iterations}
    if outcome.gram is not None:
        out["gram"] = matrix_to_json(outcome.gram)
    return out
