"""Dense symmetric linear algebra used by every detection statistic.

Matrices are plain ``numpy`` arrays. A "basis" is an ``n x R`` array with
orthonormal columns; ``R`` may be zero (an ``n x 0`` array), in which case the
orthogonal complement is the whole space.

Complement quantities never materialize ``V_perp``; they go through
``I - V V^T`` instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, EigenSolverError

__all__ = [
    "Tolerances",
    "TOLERANCES",
    "EigenDecomp",
    "UEVTResult",
    "as_symmetric",
    "as_basis",
    "empty_basis",
    "orthonormalize",
    "sym_eig",
    "uevt",
    "spectral_norm",
    "proj_residual_norm",
    "proj_residual_trace",
    "subspace_distance_sq",
]


@dataclass
class Tolerances:
    orthonormal: float = 1e-8
    reconstruction_rtol: float = 1e-6
    symmetry_rtol: float = 1e-10
    sign_zero: float = 1e-12


# Module-wide defaults; mutate fields to override.
TOLERANCES = Tolerances()


class EigenDecomp(NamedTuple):
    values: np.ndarray  # descending
    vectors: np.ndarray  # column i pairs with values[i]


class UEVTResult(NamedTuple):
    approx: np.ndarray
    rank: int
    basis: np.ndarray
    values: np.ndarray


def as_symmetric(m, check=True) -> np.ndarray:
    """Return ``m`` as a float symmetric matrix.

    Raises DimensionError for non-square input and, when ``check`` is set, for
    input whose asymmetry exceeds the configured relative tolerance. The
    returned array is exactly symmetric.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    if check:
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > TOLERANCES.symmetry_rtol * scale:
            raise DimensionError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def empty_basis(n: int) -> np.ndarray:
    return np.zeros((n, 0))


def as_basis(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise DimensionError(f"basis must be 2-D, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"basis has {v.shape[0]} rows, expected {n}")
    if v.shape[1] > v.shape[0]:
        raise DimensionError("basis has more columns than rows")
    return v


def orthonormalize(x, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the column space of ``x`` (numerical rank via SVD)."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] == 0:
        return empty_basis(x.shape[0])
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return empty_basis(x.shape[0])
    keep = s > tol * s[0]
    return u[:, keep]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # first entry above the zero tolerance is made nonnegative
    big = np.abs(vectors) > TOLERANCES.sign_zero
    first = np.argmax(big, axis=0)
    cols = np.arange(vectors.shape[1])
    flip = vectors[first, cols] < 0
    vectors[:, flip] *= -1.0
    return vectors


def sym_eig(m) -> EigenDecomp:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = as_symmetric(m)
    try:
        values, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver did not converge: {exc}") from exc
    values = values[::-1].copy()
    vectors = _fix_signs(vectors[:, ::-1].copy())
    return EigenDecomp(values, vectors)


def uevt(g, h: float) -> UEVTResult:
    """Universal eigenvalue thresholding.

    Keeps the eigenpairs of ``g`` whose eigenvalue is strictly greater than
    ``h`` and returns the low-rank reconstruction, its rank, the retained
    eigenvectors and eigenvalues.
    """
    if np.isnan(h):
        raise ValueError("threshold must not be NaN")
    values, vectors = sym_eig(g)
    keep = values > h
    kept_values = values[keep]
    basis = vectors[:, keep]
    approx = (basis * kept_values) @ basis.T
    return UEVTResult(0.5 * (approx + approx.T), int(keep.sum()), basis, kept_values)


def spectral_norm(m) -> float:
    values, _ = sym_eig(m)
    return float(np.abs(values).max())


def _check_pair(basis, m):
    m = np.asarray(m, dtype=float)
    basis = as_basis(basis)
    if basis.shape[0] != m.shape[0]:
        raise DimensionError(
            f"basis dimension {basis.shape[0]} does not match matrix dimension {m.shape[0]}"
        )
    return basis, m


def proj_residual_norm(basis, m) -> float:
    """``||V_perp^T m||_2`` computed as ``||(I - V V^T) m||_2``."""
    basis, m = _check_pair(basis, m)
    resid = m - basis @ (basis.T @ m)
    if not resid.any():
        return 0.0
    return float(np.linalg.norm(resid, 2))


def proj_residual_trace(basis, m) -> float:
    """``tr(V_perp V_perp^T m) = tr(m) - tr(V^T m V)``."""
    basis, m = _check_pair(basis, m)
    return float(np.trace(m) - np.einsum("ij,ik,kj->", basis, m, basis))


def subspace_distance_sq(u, v) -> float:
    """``||U U^T - V V^T||_F^2`` via ``R_u + R_v - 2 ||U^T V||_F^2``."""
    u = as_basis(u)
    v = as_basis(v)
    if u.shape[0] != v.shape[0]:
        raise DimensionError(f"ambient dimensions differ: {u.shape[0]} vs {v.shape[0]}")
    cross = u.T @ v
    d = u.shape[1] + v.shape[1] - 2.0 * float(np.sum(cross * cross))
    # guard tiny negative values from cancellation
    return max(d, 0.0)
