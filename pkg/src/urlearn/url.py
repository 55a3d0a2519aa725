"""Joint non-negative factorization of two views onto a shared coefficient
space, coupled by a Jensen-Shannon divergence between pairwise sample
affinities.

Given non-negative view matrices A (M1 x N) and B (M2 x N) holding one
sample per column, the solver finds U (M1 x D), W (M2 x D) and a shared
V (D x N) minimizing

    ||A - U V||_F^2 + ||B - W V||_F^2 + eta * JSD,

where JSD = 0.5 KL(P_A || Q) + 0.5 KL(P_B || Q). P_A and P_B are fixed
pairwise affinity distributions computed from the columns of A and B; Q
is a student-t affinity over the columns of V, recomputed as V moves.
All three factors are driven by multiplicative updates, which preserve
non-negativity and keep the total loss non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bundles
from .errors import StructuralError
from .features import _freeze

EPS = 1e-12
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric pairwise distribution: zero diagonal, off-diagonal sum 1."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise StructuralError("affinity matrix must be square")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise StructuralError("affinities must be finite and non-negative")
        if np.any(np.diag(vals) != 0):
            raise StructuralError("affinity diagonal must be zero")
        if np.max(np.abs(vals - vals.T)) > 1e-12:
            raise StructuralError("affinity matrix must be symmetric within 1e-12")
        if abs(vals.sum() - 1.0) > 1e-9:
            raise StructuralError(
                f"off-diagonal affinities sum to {vals.sum():.12f}, expected 1"
            )
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LossBreakdown:
    recon_a: float
    recon_b: float
    jsd: float
    total: float


@dataclass(frozen=True)
class UrlModel:
    """Fitted factor triple with its optimization trace."""

    u: np.ndarray
    w: np.ndarray
    v: np.ndarray
    eta: float
    loss_trace: list[LossBreakdown]
    converged: bool
    iterations: int

    def __post_init__(self):
        for name in ("u", "w", "v"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    seed: int = 0


def _check_view(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise StructuralError(f"{name} must be a matrix")
    if not np.all(np.isfinite(m)):
        raise StructuralError(f"{name} contains non-finite entries")
    if np.any(m < 0):
        raise StructuralError(f"{name} contains negative entries")
    return m


def pairwise_affinities(m: np.ndarray) -> AffinityMatrix:
    """Pairwise sample distribution from the columns of a non-negative matrix.

    Each column is rescaled to the probability simplex; pairs are
    compared by the symmetrized cross-entropy distance

        d(i, j) = 0.5 * (H(m_i, m_j) + H(m_j, m_i)),
        H(p, q) = -sum_k p_k log(q_k + eps),

    mapped to similarities g = exp(-d / tau) with tau the median
    off-diagonal distance, and normalized over all ordered pairs.
    """
    m = _check_view(m, "affinity input")
    n = m.shape[1]
    if n < 2:
        raise StructuralError("need at least 2 columns for pairwise affinities")
    sums = m.sum(axis=0)
    if np.any(sums <= 0):
        bad = int(np.argmax(sums <= 0))
        raise StructuralError(f"column {bad} is all zero, cannot normalize")
    p = m / sums
    logp = np.log(p + EPS)
    cross = -(p.T @ logp)               # cross[i, j] = H(p_i, p_j)
    d = 0.5 * (cross + cross.T)
    off = ~np.eye(n, dtype=bool)
    tau = float(np.median(d[off]))
    if tau <= 0:
        tau = 1.0
    g = np.exp(-d / tau)
    np.fill_diagonal(g, 0.0)
    return AffinityMatrix(g / g.sum())


def q_matrix(v: np.ndarray) -> AffinityMatrix:
    """Student-t affinity of the columns of V: q_ij ~ (1 + ||v_i - v_j||^2)^-1."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] < 2:
        raise StructuralError("q_matrix needs a D x N matrix with N >= 2")
    w = _t_kernel(v)
    return AffinityMatrix(w / w.sum())


def _t_kernel(v: np.ndarray) -> np.ndarray:
    """Unnormalized student-t weights with a zero diagonal (exactly symmetric)."""
    g = v.T @ v
    g = 0.5 * (g + g.T)
    sq = np.diag(g)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * g, 0.0)
    w = 1.0 / (1.0 + d2)
    np.fill_diagonal(w, 0.0)
    return w


def jsd_penalty(p_a: AffinityMatrix, p_b: AffinityMatrix, q: AffinityMatrix) -> float:
    """0.5 KL(P_A || Q) + 0.5 KL(P_B || Q) over off-diagonal pairs."""
    if p_a.n != p_b.n or p_a.n != q.n:
        raise StructuralError("affinity shapes differ")
    return _jsd_raw(p_a.values, p_b.values, q.values)


def _jsd_raw(pa: np.ndarray, pb: np.ndarray, q: np.ndarray) -> float:
    logq = np.log(q + EPS)
    kl_a = np.sum(pa * (np.log(pa + EPS) - logq))
    kl_b = np.sum(pb * (np.log(pb + EPS) - logq))
    return float(0.5 * (kl_a + kl_b))


def objective(a, b, u, w, v, eta: float) -> LossBreakdown:
    """Loss of a factor triple: both reconstruction terms plus eta * JSD."""
    a = _check_view(a, "A")
    b = _check_view(b, "B")
    if a.shape[1] != b.shape[1]:
        raise StructuralError("A and B must have the same number of columns")
    return _objective_cached(
        a, b, u, w, v, eta, pairwise_affinities(a).values, pairwise_affinities(b).values
    )


def _objective_cached(a, b, u, w, v, eta, pa, pb) -> LossBreakdown:
    if u.shape != (a.shape[0], v.shape[0]) or w.shape != (b.shape[0], v.shape[0]):
        raise StructuralError("factor shapes incompatible with the views")
    recon_a = float(np.sum((a - u @ v) ** 2))
    recon_b = float(np.sum((b - w @ v) ** 2))
    wq = _t_kernel(v)
    jsd = _jsd_raw(pa, pb, wq / wq.sum())
    return LossBreakdown(recon_a, recon_b, jsd, recon_a + recon_b + eta * jsd)


def jsd_gradient(
    v: np.ndarray, p_a: AffinityMatrix, p_b: AffinityMatrix, eta: float
) -> np.ndarray:
    """Gradient of eta * JSD with respect to V, through the student-t Q.

    Column i is 2 eta * sum_j (p_A_ij + p_B_ij - 2 q_ij)(v_i - v_j)
    (1 + ||v_i - v_j||^2)^-1 with Q recomputed from V.
    """
    v = np.asarray(v, dtype=np.float64)
    wq = _t_kernel(v)
    q = wq / wq.sum()
    c = (p_a.values + p_b.values - 2.0 * q) * wq
    np.fill_diagonal(c, 0.0)
    return 2.0 * eta * (v * c.sum(axis=1)[None, :] - v @ c)


def update_u(a: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multiplicative basis update: U <- U * (A V^T) / (U V V^T)."""
    return u * (a @ v.T) / np.maximum(u @ (v @ v.T), EPS)


def update_w(b: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multiplicative basis update: W <- W * (B V^T) / (W V V^T)."""
    return w * (b @ v.T) / np.maximum(w @ (v @ v.T), EPS)


def update_v(
    a: np.ndarray,
    b: np.ndarray,
    u: np.ndarray,
    w: np.ndarray,
    v: np.ndarray,
    p_a: AffinityMatrix,
    p_b: AffinityMatrix,
    eta: float,
) -> np.ndarray:
    """Multiplicative update of the shared coefficients.

    V_ij <- V_ij * (U^T A + W^T B + Ups)_ij / (U^T U V + W^T W V + Gam)_ij,
    where for sample j and neighbor k, with t_jk = (1 + ||v_j - v_k||^2)^-1
    and q the student-t affinity of the incoming V:

        Ups_ij = eta * sum_k ((p_A_jk + p_B_jk) V_ik + 2 q_jk V_ij) t_jk
        Gam_ij = eta * sum_k ((p_A_jk + p_B_jk) V_ij + 2 q_jk V_ik) t_jk

    The split puts the attractive affinity terms in the numerator and the
    repulsive ones in the denominator, so non-negativity is preserved.
    """
    num = u.T @ a + w.T @ b
    den = (u.T @ u) @ v + (w.T @ w) @ v
    if eta != 0.0:
        pa, pb = p_a.values, p_b.values
        wq = _t_kernel(v)
        q = wq / wq.sum()
        s = (pa + pb) * wq
        t2 = 2.0 * q * wq
        num = num + eta * (v @ s + v * t2.sum(axis=1)[None, :])
        den = den + eta * (v * s.sum(axis=1)[None, :] + v @ t2)
    return v * num / np.maximum(den, EPS)


def d_high(m1: int, m2: int) -> int:
    """Larger default basis count: half the summed view dimensions."""
    return int(round((m1 + m2) / 2))


def d_low(m1: int, m2: int) -> int:
    """Smaller default basis count: a quarter of the summed view dimensions."""
    return int(round((m1 + m2) / 4))


def fit(
    a: np.ndarray,
    b: np.ndarray,
    d: int,
    eta: float,
    config: FitConfig | None = None,
) -> UrlModel:
    """Run the coupled multiplicative updates from a seeded uniform start.

    Factors are initialized uniformly on (0, 1); each iteration updates
    U, W, then V, and records the loss. Iteration stops when the
    relative drop of the total falls below `tol` or after `max_iter`
    sweeps. The result is a pure function of the inputs and the seed.
    """
    config = config or FitConfig()
    a = _check_view(a, "A")
    b = _check_view(b, "B")
    m1, n = a.shape
    m2, n_b = b.shape
    if n != n_b:
        raise StructuralError(f"A has {n} columns but B has {n_b}")
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise StructuralError(f"basis count d must be a positive integer, got {d!r}")
    if d >= min(m1, n) or d >= min(m2, n):
        raise StructuralError(
            f"basis count d={d} must satisfy d < min({m1}, {n}) and d < min({m2}, {n})"
        )
    if eta < 0:
        raise StructuralError(f"eta must be >= 0, got {eta}")

    rng = np.random.default_rng(config.seed)
    u = rng.uniform(size=(m1, d))
    w = rng.uniform(size=(m2, d))
    v = rng.uniform(size=(d, n))
    p_a = pairwise_affinities(a)
    p_b = pairwise_affinities(b)
    pa, pb = p_a.values, p_b.values

    trace = [_objective_cached(a, b, u, w, v, eta, pa, pb)]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        u = update_u(a, u, v)
        w = update_w(b, w, v)
        v = update_v(a, b, u, w, v, p_a, p_b, eta)
        loss = _objective_cached(a, b, u, w, v, eta, pa, pb)
        trace.append(loss)
        prev = trace[-2].total
        if abs(loss.total - prev) / max(prev, EPS) < config.tol:
            converged = True
            break
    return UrlModel(
        u=u,
        w=w,
        v=v,
        eta=eta,
        loss_trace=trace,
        converged=converged,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# serialization


def _trace_matrix(trace: list[LossBreakdown]) -> np.ndarray:
    return np.array([[t.recon_a, t.recon_b, t.jsd, t.total] for t in trace]).reshape(
        len(trace), 4
    )


def save_model(
    model: UrlModel,
    path,
    projections: dict[str, np.ndarray] | None = None,
    config: dict | None = None,
) -> None:
    """Write the factor triple, loss trace and optional projections."""
    matrices = {
        "u": model.u,
        "w": model.w,
        "v": model.v,
        "loss_trace": _trace_matrix(model.loss_trace),
    }
    for name, mat in (projections or {}).items():
        matrices[f"proj_{name}"] = mat
    meta = {
        "kind": "url_model",
        "eta": model.eta,
        "converged": model.converged,
        "iterations": model.iterations,
        "config": config or {},
    }
    bundles.write_bundle(path, matrices, meta)


def load_model(path) -> tuple[UrlModel, dict[str, np.ndarray]]:
    """Read a model bundle back as (model, projections-by-name)."""
    matrices, meta = bundles.read_bundle(path)
    if meta.get("kind") != "url_model":
        raise StructuralError(f"{path}: bundle is not a fitted model")
    trace = [LossBreakdown(*row) for row in matrices["loss_trace"]]
    model = UrlModel(
        u=matrices["u"],
        w=matrices["w"],
        v=matrices["v"],
        eta=float(meta["eta"]),
        loss_trace=trace,
        converged=bool(meta["converged"]),
        iterations=int(meta["iterations"]),
    )
    projections = {
        name[len("proj_") :]: mat
        for name, mat in matrices.items()
        if name.startswith("proj_")
    }
    return model, projections


def trace_to_csv(model: UrlModel, path) -> None:
    """Export the loss trace as iteration,recon_A,recon_B,jsd,total rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,recon_A,recon_B,jsd,total\n")
        for i, t in enumerate(model.loss_trace):
            fh.write(
                f"{i},{t.recon_a:.17g},{t.recon_b:.17g},{t.jsd:.17g},{t.total:.17g}\n"
            )
