"""Dense complex-matrix substrate shared by every other module.

Matrices are plain numpy arrays of complex128. Hermitian inputs are
symmetrized once at the door (``as_hermitian``) and every routine after
that is allowed to assume exact Hermiticity. The JSON wire format for a
matrix is ``{"rows": n, "cols": m, "data": [[re, im], ...]}`` with the
entries flattened in row-major order; all modules share it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-10


class EigenConvergenceError(RuntimeError):
    """Eigen-iteration failed to converge (carries the LAPACK diagnostic)."""


class IndefiniteMatrixError(ValueError):
    """A PSD-only operation received an indefinite matrix.

    ``witness`` is a unit vector with a strictly negative Rayleigh
    quotient for the offending matrix, re-evaluable by the caller.
    """

    def __init__(self, message: str, witness: np.ndarray, rayleigh: float):
        super().__init__(message)
        self.witness = witness
        self.rayleigh = rayleigh


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validate ``data`` as a finite complex matrix and return it as complex128."""
    m = np.asarray(data, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"expected {cols} cols, got {m.shape[1]}")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def as_hermitian(data, tol: float = 1e-12) -> np.ndarray:
    """Symmetrize ``data`` to an exactly Hermitian matrix.

    The deviation ``||M - M*||_F`` must stay below ``tol * (1 + ||M||_F)``;
    anything larger is a caller bug, not roundoff, and raises.
    """
    m = as_matrix(data)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"Hermitian matrix must be square, got shape {m.shape}")
    dev = np.linalg.norm(m - m.conj().T)
    if dev > tol * (1.0 + np.linalg.norm(m)):
        raise ValueError(f"matrix is not Hermitian within tolerance (deviation {dev:.3e})")
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class PsdVerdict:
    kind: str  # "PositiveDefinite" | "PositiveSemidefinite" | "Indefinite"
    min_eigenvalue: float
    witness: np.ndarray | None = None  # unit vector attaining the minimal Rayleigh quotient


def eig_hermitian(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` ascending and ``V`` unitary,
    so that ``M = V @ diag(w) @ V*``.
    """
    H = as_hermitian(M)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails here
        raise EigenConvergenceError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return w, V


def psd_check(M: np.ndarray, tol: float = DEFAULT_TOL) -> PsdVerdict:
    """Three-way positive-semidefiniteness verdict with a re-evaluable witness.

    Indefinite iff the smallest eigenvalue is below ``-tol``, PositiveDefinite
    iff it is above ``tol``, PositiveSemidefinite in between.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    w, V = eig_hermitian(M)
    lo = float(w[0])
    if lo < -tol:
        return PsdVerdict("Indefinite", lo, witness=V[:, 0].copy())
    if lo > tol:
        return PsdVerdict("PositiveDefinite", lo)
    return PsdVerdict("PositiveSemidefinite", lo)


def gram_factor(M: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Factor a PSD matrix as ``M = Y* Y`` with ``Y`` of full row rank.

    Eigenvalues at or below ``tol * max(1, lambda_max)`` count as zero, so the
    number of rows of ``Y`` is the numerical rank of ``M``.
    """
    w, V = eig_hermitian(M)
    if w[0] < -tol:
        raise IndefiniteMatrixError(
            f"gram_factor needs a PSD matrix (min eigenvalue {w[0]:.3e})",
            witness=V[:, 0].copy(),
            rayleigh=float(w[0]),
        )
    cutoff = tol * max(1.0, float(w[-1]))
    keep = w > cutoff
    Y = np.sqrt(w[keep])[:, None] * V[:, keep].conj().T
    return Y


def inv_sqrt(M: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Inverse square root of a positive-definite matrix."""
    w, V = eig_hermitian(M)
    if w[0] <= tol:
        raise IndefiniteMatrixError(
            f"inv_sqrt needs a positive-definite matrix (min eigenvalue {w[0]:.3e})",
            witness=V[:, 0].copy(),
            rayleigh=float(w[0]),
        )
    R = (V * (1.0 / np.sqrt(w))) @ V.conj().T
    return 0.5 * (R + R.conj().T)


def weighted_adjoint(A: np.ndarray, G: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Adjoint of ``A`` with respect to the inner product ``<x, y>_G = y* G x``.

    Returns ``A# = G^{-1} A* G``, which satisfies ``<Ax, y>_G = <x, A# y>_G``.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("weighted_adjoint expects a square matrix")
    Gh = as_hermitian(G)
    if Gh.shape[0] != A.shape[0]:
        raise ValueError("Gram matrix dimension does not match the operator")
    w, V = eig_hermitian(Gh)
    if w[0] <= tol * max(1.0, float(w[-1])):
        raise IndefiniteMatrixError(
            f"Gram matrix must be positive definite (min eigenvalue {w[0]:.3e})",
            witness=V[:, 0].copy(),
            rayleigh=float(w[0]),
        )
    return np.linalg.solve(Gh, A.conj().T @ Gh)


# ---------------------------------------------------------------------------
# JSON wire format


def matrix_to_json(M: np.ndarray) -> dict:
    m = as_matrix(M)
    data = [[float(z.real), float(z.imag)] for z in m.ravel(order="C")]
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": data}


def matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ValueError("matrix JSON must be an object")
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if rows <= 0 or cols <= 0:
        raise ValueError("matrix dimensions must be positive")
    if not isinstance(data, list) or len(data) != rows * cols:
        raise ValueError(f"matrix data must hold {rows * cols} [re, im] pairs")
    flat = np.empty(rows * cols, dtype=np.complex128)
    for i, pair in enumerate(data):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ValueError(f"entry {i} is not an [re, im] pair")
        flat[i] = complex(float(pair[0]), float(pair[1]))
    return as_matrix(flat.reshape(rows, cols))
