"""Kernelized domain adaptation for projected prototypes.

Joint feature matching and instance reweighting: a Gaussian kernel over
the pooled source and target columns feeds a generalized eigenproblem
that minimizes the kernel-embedded maximum mean discrepancy between the
blocks while keeping unit centered variance, with an iteratively
reweighted row-sparsity penalty on the source rows of the transform.
New points enter the adapted space through their kernel vector against
the training columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, StructuralError
from .features import _freeze

EPS = 1e-12
RIDGE = 1e-9


@dataclass(frozen=True)
class TjmParams:
    kernel_bandwidth: float | None = None   # None: median heuristic
    trade_off: float = 1.0                  # weight of the row-sparsity penalty
    out_dim: int | None = None              # None: min(D, n-1)
    iterations: int = 10

    def __post_init__(self):
        if self.kernel_bandwidth is not None and self.kernel_bandwidth <= 0:
            raise StructuralError("kernel bandwidth must be positive")
        if self.trade_off < 0:
            raise StructuralError("trade_off must be >= 0")
        if self.out_dim is not None and self.out_dim < 1:
            raise StructuralError("out_dim must be >= 1")
        if self.iterations < 1:
            raise StructuralError("iterations must be >= 1")


@dataclass(frozen=True)
class AdaptationResult:
    """Adapted embeddings plus everything needed to map new points."""

    adapted_source: np.ndarray      # D' x N_s
    adapted_prototypes: np.ndarray  # D' x C_u
    transform: np.ndarray           # n x D'
    kernel: np.ndarray              # n x n Gaussian kernel of training columns
    mmd_before: float
    mmd_after: float
    train_columns: np.ndarray       # D x n columns the kernel was built on
    bandwidth: float

    def __post_init__(self):
        for name in (
            "adapted_source",
            "adapted_prototypes",
            "transform",
            "kernel",
            "train_columns",
        ):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Map new column(s) into the adapted space via their kernel vector."""
        x = np.asarray(x, dtype=np.float64)
        vector_in = x.ndim == 1
        if vector_in:
            x = x[:, None]
        if x.shape[0] != self.train_columns.shape[0]:
            raise StructuralError(
                f"expected {self.train_columns.shape[0]}-dimensional columns, "
                f"got {x.shape[0]}"
            )
        k = _gaussian_kernel(self.train_columns, x, self.bandwidth)
        z = self.transform.T @ k
        return z[:, 0] if vector_in else z


def _sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x2 = np.sum(x**2, axis=0)[:, None]
    y2 = np.sum(y**2, axis=0)[None, :]
    return np.maximum(x2 + y2 - 2.0 * x.T @ y, 0.0)


def _gaussian_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-_sq_dists(x, y) / (2.0 * bandwidth**2))


def median_bandwidth(columns: np.ndarray) -> float:
    """Median pairwise distance of the columns; 1.0 when all coincide."""
    d2 = _sq_dists(columns, columns)
    iu = np.triu_indices(columns.shape[1], k=1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(np.sqrt(d2[iu])))
    return med if med > 0 else 1.0


def mmd(x: np.ndarray, y: np.ndarray, bandwidth: float | None = None) -> float:
    """Squared Gaussian-kernel maximum mean discrepancy between column samples.

    Biased (V-statistic) estimate, hence always >= 0 and symmetric. With
    bandwidth None the median heuristic over the pooled columns is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise StructuralError("mmd expects two matrices with equal row dimension")
    if bandwidth is None:
        bandwidth = median_bandwidth(np.hstack([x, y]))
    k_xx = _gaussian_kernel(x, x, bandwidth)
    k_yy = _gaussian_kernel(y, y, bandwidth)
    k_xy = _gaussian_kernel(x, y, bandwidth)
    return float(max(k_xx.mean() + k_yy.mean() - 2.0 * k_xy.mean(), 0.0))


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of each eigenvector positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def tjm_adapt(
    v_a: np.ndarray,
    v_b_hat: np.ndarray,
    params: TjmParams | None = None,
    extra_target: np.ndarray | None = None,
) -> AdaptationResult:
    """Align projected prototypes with the source embedding distribution.

    v_a holds the N_s source columns, v_b_hat the C_u prototype columns.
    Optional extra_target columns (for transductive runs) join the
    target block during matching but are dropped from the result. The
    reported mmd_before / mmd_after compare source against prototypes in
    the raw and the adapted space.
    """
    params = params or TjmParams()
    v_a = np.asarray(v_a, dtype=np.float64)
    v_b_hat = np.asarray(v_b_hat, dtype=np.float64)
    if v_a.ndim != 2 or v_b_hat.ndim != 2 or v_a.shape[0] != v_b_hat.shape[0]:
        raise StructuralError("source and prototype blocks need equal row dimension")
    if v_a.shape[1] < 1 or v_b_hat.shape[1] < 1:
        raise StructuralError("both blocks need at least one column")
    blocks = [v_a, v_b_hat]
    if extra_target is not None:
        extra_target = np.asarray(extra_target, dtype=np.float64)
        if extra_target.shape[0] != v_a.shape[0]:
            raise StructuralError("extra target columns have the wrong row dimension")
        blocks.append(extra_target)
    columns = np.hstack(blocks)
    n_s = v_a.shape[1]
    n_proto = v_b_hat.shape[1]
    n = columns.shape[1]
    n_t = n - n_s

    dim = params.out_dim if params.out_dim is not None else min(v_a.shape[0], n - 1)
    if dim > n:
        raise DegeneracyError(f"out_dim {dim} exceeds the available spectrum ({n})")

    bandwidth = params.kernel_bandwidth or median_bandwidth(columns)
    k = _gaussian_kernel(columns, columns, bandwidth)

    # kernel-embedded mean-discrepancy coefficients, Frobenius-normalized
    e = np.concatenate([np.full(n_s, 1.0 / n_s), np.full(n_t, -1.0 / n_t)])
    m_coef = np.outer(e, e)
    m_coef /= np.linalg.norm(m_coef)
    h_center = np.eye(n) - np.full((n, n), 1.0 / n)

    kmk = k @ m_coef @ k
    kmk = 0.5 * (kmk + kmk.T)
    khk = k @ h_center @ k
    khk = 0.5 * (khk + khk.T)
    constraint = khk + RIDGE * np.eye(n)

    weights = np.ones(n)
    transform = None
    for _ in range(params.iterations):
        lhs = kmk + params.trade_off * np.diag(weights)
        lhs = 0.5 * (lhs + lhs.T)
        try:
            eigvals, eigvecs = scipy.linalg.eigh(lhs, constraint)
        except scipy.linalg.LinAlgError as exc:
            raise DegeneracyError(f"generalized eigensolver failed: {exc}") from exc
        transform = _fix_signs(eigvecs[:, :dim])
        row_norms = np.sqrt(np.sum(transform[:n_s] ** 2, axis=1) + EPS)
        weights = np.ones(n)
        weights[:n_s] = 1.0 / (2.0 * row_norms)

    z = transform.T @ k
    adapted_source = z[:, :n_s]
    adapted_prototypes = z[:, n_s : n_s + n_proto]
    return AdaptationResult(
        adapted_source=adapted_source,
        adapted_prototypes=adapted_prototypes,
        transform=transform,
        kernel=k,
        mmd_before=mmd(v_a, v_b_hat),
        mmd_after=mmd(adapted_source, adapted_prototypes),
        train_columns=columns,
        bandwidth=bandwidth,
    )
