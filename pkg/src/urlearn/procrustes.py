"""Row-orthonormal projections from a view space into the shared space.

The projection solving min ||P X - V||_F over row-orthonormal P is
realized as the least-squares map V X^T (X X^T)^+ followed by its polar
factor, which restores exact row orthonormality. On consistent systems
(V = R X with R row-orthonormal) the residual vanishes, and when X has
orthonormal rows the construction coincides with the classical
SVD solution of the orthogonal Procrustes problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, StructuralError
from .features import _freeze

RANK_TOL = 1e-10
ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class Projection:
    """A D x M map with orthonormal rows (P P^T = I within 1e-8)."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise StructuralError("projection must be a matrix")
        if mat.shape[0] > mat.shape[1]:
            raise StructuralError(
                f"projection is {mat.shape[0]} x {mat.shape[1]}; target dimension "
                "cannot exceed source dimension"
            )
        if not np.all(np.isfinite(mat)):
            raise StructuralError("projection contains non-finite entries")
        gram = mat @ mat.T
        if np.max(np.abs(gram - np.eye(mat.shape[0]))) > ORTHO_TOL:
            raise StructuralError("projection rows are not orthonormal within 1e-8")
        object.__setattr__(self, "matrix", _freeze(mat))

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]


def solve_rotation(x: np.ndarray, v: np.ndarray) -> Projection:
    """Best row-orthonormal map sending the columns of X near those of V.

    X is M x N, V is D x N with D <= M and D <= N. Raises a degeneracy
    error when the cross matrix X^T V has rank below D, in which case the
    optimal map is not unique.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if x.ndim != 2 or v.ndim != 2:
        raise StructuralError("solve_rotation expects two matrices")
    m, n = x.shape
    d, n_v = v.shape
    if n != n_v:
        raise StructuralError(f"X has {n} columns but V has {n_v}")
    if d > m or d > n:
        raise StructuralError(
            f"shared dimension {d} must not exceed source dimension {m} or "
            f"sample count {n}"
        )
    cross = v @ x.T
    sv = np.linalg.svd(cross, compute_uv=False)
    if sv.size < d or sv[d - 1] < RANK_TOL:
        raise DegeneracyError(
            f"cross matrix X^T V has rank < {d}; rotation is ambiguous"
        )
    ls = cross @ np.linalg.pinv(x @ x.T, hermitian=True)
    left, spectrum, right = np.linalg.svd(ls, full_matrices=False)
    if spectrum[-1] < RANK_TOL:
        raise DegeneracyError("least-squares map is rank deficient; rotation is ambiguous")
    return Projection(left @ right)


def project(p: Projection, x: np.ndarray) -> np.ndarray:
    """Apply the projection to columns of X (linear, column count preserved)."""
    x = np.asarray(x, dtype=np.float64)
    lead = x.shape[0]
    if lead != p.source_dim:
        raise StructuralError(
            f"projection expects {p.source_dim} rows, got {lead}"
        )
    return p.matrix @ x
