"""Prototype galleries, nearest-prototype prediction, evaluation, and
leave-one-hop-away cross-validation over the full pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import gmil, url
from .adapt import AdaptationResult, TjmParams, tjm_adapt
from .errors import DegeneracyError, StructuralError
from .features import FeatureBagCorpus, SemanticTable, Video, _freeze
from .procrustes import Projection, project, solve_rotation


@dataclass(frozen=True)
class PrototypeGallery:
    """Class-level prototype columns for unseen labels."""

    prototypes: np.ndarray
    labels: list[int]
    adapted: bool = False

    def __post_init__(self):
        protos = np.asarray(self.prototypes, dtype=np.float64)
        if protos.ndim != 2:
            raise StructuralError("prototypes must be a matrix")
        if protos.shape[1] != len(self.labels):
            raise StructuralError(
                f"{protos.shape[1]} prototype columns for {len(self.labels)} labels"
            )
        if len(set(self.labels)) != len(self.labels):
            raise StructuralError("gallery labels must be distinct")
        object.__setattr__(self, "prototypes", _freeze(protos))
        object.__setattr__(self, "labels", [int(l) for l in self.labels])


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class: dict[int, float]
    confusion: dict[int, dict[int, int]]
    split: str = ""
    seed: int = 0
    hyperparams: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "confusion": {
                str(t): {str(p): c for p, c in sorted(row.items())}
                for t, row in sorted(self.confusion.items())
            },
            "split": self.split,
            "seed": self.seed,
            "hyperparams": self.hyperparams,
        }


def build_gallery(
    p_b: Projection,
    semantics: SemanticTable,
    labels: list[int],
    seen_labels: set[int] | list[int] = (),
) -> PrototypeGallery:
    """Project semantic columns into the shared space as unseen prototypes."""
    if len(labels) != len(semantics.class_names):
        raise StructuralError(
            f"{len(labels)} labels for {len(semantics.class_names)} semantic columns"
        )
    clash = set(labels) & set(seen_labels)
    if clash:
        raise StructuralError(f"gallery labels collide with seen labels: {sorted(clash)}")
    return PrototypeGallery(project(p_b, semantics.embeddings), list(labels))


def predict(
    p_a: Projection,
    a_hat: gmil.EmbeddingVector,
    gallery: PrototypeGallery,
) -> int:
    """Label of the prototype nearest to the projected embedding.

    Works for plain and adapted galleries alike since both hold
    prototypes in the shared-space coordinates. Ties break toward the
    lowest label id.
    """
    if len(gallery.labels) == 0:
        raise StructuralError("gallery is empty")
    z = p_a.matrix @ a_hat.values
    diffs = gallery.prototypes - z[:, None]
    d2 = np.sum(diffs**2, axis=0)
    labels = np.array(gallery.labels)
    best = np.lexsort((labels, d2))[0]
    return int(labels[best])


def anchor_prototypes(adaptation: AdaptationResult, v_a: np.ndarray) -> np.ndarray:
    """Express adapted prototypes in the source's shared-space coordinates.

    The matched embedding lives in an arbitrarily rotated and whitened
    basis; nearest-prototype queries, however, arrive as raw projected
    embeddings. Fitting the similarity transform (rotation, scale,
    translation) that carries the adapted source block back onto its
    original coordinates, and applying it to the adapted prototypes,
    keeps the relative correction while making both sides comparable.
    A neutral adaptation therefore leaves prototypes essentially where
    they started.
    """
    z_s = adaptation.adapted_source
    if z_s.shape[0] < v_a.shape[0]:
        raise DegeneracyError(
            f"adapted dimension {z_s.shape[0]} is too small to re-anchor into "
            f"{v_a.shape[0]} shared dimensions"
        )
    mu_z = z_s.mean(axis=1, keepdims=True)
    mu_v = v_a.mean(axis=1, keepdims=True)
    rot = solve_rotation(z_s - mu_z, v_a - mu_v)
    mapped = project(rot, z_s - mu_z)
    denom = float(np.sum(mapped * mapped))
    scale = float(np.sum(mapped * (v_a - mu_v))) / denom if denom > 0 else 1.0
    return scale * project(rot, adaptation.adapted_prototypes - mu_z) + mu_v


def evaluate(
    predictions: list[int],
    truth: list[int],
    split: str = "",
    seed: int = 0,
    hyperparams: dict | None = None,
) -> EvalReport:
    """Overall and per-class accuracy plus confusion counts."""
    if len(predictions) != len(truth):
        raise StructuralError(
            f"{len(predictions)} predictions for {len(truth)} ground-truth labels"
        )
    if not predictions:
        raise StructuralError("nothing to evaluate")
    correct = sum(int(p == t) for p, t in zip(predictions, truth))
    confusion: dict[int, dict[int, int]] = {}
    for p, t in zip(predictions, truth):
        row = confusion.setdefault(int(t), {})
        row[int(p)] = row.get(int(p), 0) + 1
    per_class = {
        t: row.get(t, 0) / sum(row.values()) for t, row in confusion.items()
    }
    return EvalReport(
        accuracy=correct / len(truth),
        per_class=per_class,
        confusion=confusion,
        split=split,
        seed=seed,
        hyperparams=hyperparams or {},
    )


# ---------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True)
class PipelineConfig:
    h: int = 5
    k_nn: int = 200
    d: int | str = "auto"          # int, "auto", "low", or "high"
    eta: float = 1.0
    tjm: TjmParams = field(default_factory=TjmParams)
    adapt_enabled: bool = True
    transductive: bool = False
    max_iter: int = url.DEFAULT_MAX_ITER
    tol: float = url.DEFAULT_TOL
    seed: int = 0


def resolve_d(d: int | str, m1: int, m2: int, n: int, n_seen_classes: int) -> int:
    """Turn a basis-count mode into a feasible integer.

    The "low"/"high" modes take a quarter / half of the summed view
    dimensions; "auto" takes the low value. All modes are clamped so the
    factorization precondition d < min(M1, M2, N) holds and so the
    semantic view, which has one distinct column per seen class, keeps
    full cross rank for the projection step.
    """
    cap = min(m1, m2, n) - 1
    if cap < 1:
        raise StructuralError("views too small to choose a basis count")
    if isinstance(d, (int, np.integer)):
        return int(d)
    if d == "high":
        raw = url.d_high(m1, m2)
    elif d in ("low", "auto"):
        raw = url.d_low(m1, m2)
    else:
        raise StructuralError(f"unknown basis-count mode {d!r}")
    return max(1, min(raw, cap, n_seen_classes))


@dataclass(frozen=True)
class PipelineResult:
    report: EvalReport
    bags: gmil.BagModel
    a: np.ndarray
    model: url.UrlModel
    p_a: Projection
    p_b: Projection
    gallery: PrototypeGallery
    adaptation: AdaptationResult | None


def semantic_columns_for(corpus: FeatureBagCorpus, semantics: SemanticTable) -> np.ndarray:
    """Per-video semantic matrix: column i is the embedding of video i's class."""
    table = semantics.subset(corpus.class_names)
    return table.embeddings[:, [v.label - 1 for v in corpus.videos]]


def view_scale(a: np.ndarray) -> float:
    """Factor bringing a view to unit RMS column norm.

    The odds-ratio embeddings carry an arbitrary bandwidth-dependent
    scale while semantic columns are unit vectors; without balancing,
    the joint factorization and the adaptation kernel would be dominated
    by whichever view happens to be larger.
    """
    norm = np.linalg.norm(a)
    return float(np.sqrt(a.shape[1]) / norm) if norm > 0 else 1.0


def run_pipeline(
    seen: FeatureBagCorpus,
    unseen: FeatureBagCorpus,
    semantics: SemanticTable,
    cfg: PipelineConfig | None = None,
    split: str = "",
) -> PipelineResult:
    """Encode, factorize, project, adapt, and classify unseen videos.

    `semantics` must cover both corpora's class names. Unseen classes
    receive labels n_seen + 1 .. n_seen + n_unseen in the report.
    """
    cfg = cfg or PipelineConfig()
    bags = gmil.build_bags(seen, cfg.h, cfg.k_nn, cfg.seed)
    a_raw = gmil.embed_corpus(bags, seen)
    scale = view_scale(a_raw)
    a = scale * a_raw
    b = semantic_columns_for(seen, semantics)
    d = resolve_d(cfg.d, a.shape[0], b.shape[0], a.shape[1], seen.n_classes)
    model = url.fit(
        a, b, d, cfg.eta, url.FitConfig(cfg.max_iter, cfg.tol, cfg.seed)
    )
    p_a = solve_rotation(a, model.v)
    p_b = solve_rotation(b, model.v)

    n_seen = seen.n_classes
    unseen_labels = [n_seen + i for i in range(1, unseen.n_classes + 1)]
    gallery = build_gallery(
        p_b,
        semantics.subset(unseen.class_names),
        unseen_labels,
        seen_labels=range(1, n_seen + 1),
    )

    test_embeddings = [
        gmil.EmbeddingVector(scale * e.values, e.source_length)
        for e in (gmil.embed_video(bags, v.frames) for v in unseen.videos)
    ]
    adaptation = None
    if cfg.adapt_enabled:
        v_a = project(p_a, a)
        extra = None
        if cfg.transductive:
            extra = p_a.matrix @ np.column_stack([e.values for e in test_embeddings])
        adaptation = tjm_adapt(v_a, gallery.prototypes, cfg.tjm, extra_target=extra)
        gallery = PrototypeGallery(
            anchor_prototypes(adaptation, v_a), gallery.labels, adapted=True
        )

    predictions = [predict(p_a, e, gallery) for e in test_embeddings]
    truth = [n_seen + v.label for v in unseen.videos]
    report = evaluate(
        predictions,
        truth,
        split=split,
        seed=cfg.seed,
        hyperparams={
            "h": cfg.h,
            "k_nn": cfg.k_nn,
            "d": d,
            "eta": cfg.eta,
            "tjm_lambda": cfg.tjm.trade_off,
            "adapt": cfg.adapt_enabled,
            "transductive": cfg.transductive,
        },
    )
    return PipelineResult(report, bags, a, model, p_a, p_b, gallery, adaptation)


# ---------------------------------------------------------------------------
# leave-one-hop-away cross-validation


def make_hops(semantics: SemanticTable, n_hops: int, seed: int = 0) -> list[list[int]]:
    """Group classes into hops by clustering their semantic embeddings."""
    if len(semantics.class_names) < n_hops:
        raise StructuralError(
            f"cannot form {n_hops} hops from {len(semantics.class_names)} classes"
        )
    rng = np.random.default_rng(seed)
    points = semantics.embeddings.T
    _, assign = gmil._kmeans(points, n_hops, rng)
    hops = [[] for _ in range(n_hops)]
    for idx, hop in enumerate(assign):
        hops[int(hop)].append(idx + 1)
    if any(not hop for hop in hops):
        raise StructuralError("hop clustering produced an empty hop")
    return hops


def _subcorpus(corpus: FeatureBagCorpus, classes: list[int]) -> FeatureBagCorpus:
    """Corpus restricted to `classes`, relabeled by their position."""
    relabel = {c: i + 1 for i, c in enumerate(classes)}
    videos = [
        Video(v.frames, relabel[v.label]) for v in corpus.videos if v.label in relabel
    ]
    names = [corpus.class_names[c - 1] for c in classes]
    return FeatureBagCorpus(videos, names, corpus.d_feat)


def cross_validate(
    corpus: FeatureBagCorpus,
    semantics: SemanticTable,
    hops: list[list[int]],
    eta_grid: list[float],
    tjm_grid: list[float],
    config: PipelineConfig | None = None,
    n_train_hops: int = 3,
):
    """Hold out one hop as unseen, train on the furthest hops, grid-search.

    Hop distance is the Euclidean distance between mean semantic
    embeddings. Returns (best_eta, best_tjm_params, fold_reports) where
    fold_reports covers every grid point and fold; the best point has the
    highest mean validation accuracy, ties broken toward smaller eta,
    then smaller trade-off.
    """
    config = config or PipelineConfig()
    if len(hops) < 5:
        raise StructuralError(f"need at least 5 hops, got {len(hops)}")
    if not eta_grid or not tjm_grid:
        raise StructuralError("hyperparameter grids must be nonempty")
    table = semantics.subset(corpus.class_names)
    means = {
        i: table.embeddings[:, [c - 1 for c in hop]].mean(axis=1)
        for i, hop in enumerate(hops)
    }

    fold_reports: list[EvalReport] = []
    scores: dict[tuple[float, float], list[float]] = {
        (eta, lam): [] for eta in eta_grid for lam in tjm_grid
    }
    for fold, val_hop in enumerate(hops):
        others = [i for i in range(len(hops)) if i != fold]
        others.sort(key=lambda i: (-np.linalg.norm(means[fold] - means[i]), i))
        train_classes = sorted(c for i in others[:n_train_hops] for c in hops[i])
        val_classes = sorted(val_hop)
        seen = _subcorpus(corpus, train_classes)
        unseen = _subcorpus(corpus, val_classes)
        for eta in eta_grid:
            for lam in tjm_grid:
                cfg = replace(
                    config, eta=eta, tjm=replace(config.tjm, trade_off=lam)
                )
                result = run_pipeline(
                    seen, unseen, semantics, cfg, split=f"fold_{fold}"
                )
                report = replace(
                    result.report,
                    hyperparams={
                        **result.report.hyperparams,
                        "fold": fold,
                        "eta": eta,
                        "tjm_lambda": lam,
                    },
                )
                fold_reports.append(report)
                scores[(eta, lam)].append(report.accuracy)

    def rank(point):
        eta, lam = point
        return (-float(np.mean(scores[point])), eta, lam)

    best_eta, best_lam = min(scores, key=rank)
    best_tjm = replace(config.tjm, trade_off=best_lam)
    return best_eta, best_tjm, fold_reports


# ---------------------------------------------------------------------------
# CCA baseline (test-harness comparison, not part of the main pipeline)


@dataclass(frozen=True)
class CcaModel:
    w_a: np.ndarray
    w_b: np.ndarray
    mean_a: np.ndarray
    mean_b: np.ndarray

    def project_a(self, x: np.ndarray) -> np.ndarray:
        return self.w_a.T @ (x - self.mean_a[:, None])

    def project_b(self, x: np.ndarray) -> np.ndarray:
        return self.w_b.T @ (x - self.mean_b[:, None])


def _inv_sqrt(c: np.ndarray, ridge: float) -> np.ndarray:
    c = c + ridge * np.trace(c) / c.shape[0] * np.eye(c.shape[0])
    vals, vecs = np.linalg.eigh(c)
    vals = np.maximum(vals, 1e-12)
    return vecs @ np.diag(vals**-0.5) @ vecs.T

def cca_fit(a: np.ndarray, b: np.ndarray, d: int, ridge: float = 1e-6) -> CcaModel:
    """Classical two-view CCA via whitened cross-covariance SVD."""
    n = a.shape[1]
    mean_a = a.mean(axis=1)
    mean_b = b.mean(axis=1)
    ac = a - mean_a[:, None]
    bc = b - mean_b[:, None]
    r_a = _inv_sqrt(ac @ ac.T / n, ridge)
    r_b = _inv_sqrt(bc @ bc.T / n, ridge)
    left, _, right_t = np.linalg.svd(r_a @ (ac @ bc.T / n) @ r_b)
    k = min(d, left.shape[1], right_t.shape[0])
    return CcaModel(
        w_a=r_a @ left[:, :k],
        w_b=r_b @ right_t[:k].T,
        mean_a=mean_a,
        mean_b=mean_b,
    )


def run_cca_pipeline(
    seen: FeatureBagCorpus,
    unseen: FeatureBagCorpus,
    semantics: SemanticTable,
    cfg: PipelineConfig | None = None,
    split: str = "cca",
) -> EvalReport:
    """Same encode / project / adapt / classify flow with CCA projections."""
    cfg = cfg or PipelineConfig()
    bags = gmil.build_bags(seen, cfg.h, cfg.k_nn, cfg.seed)
    a_raw = gmil.embed_corpus(bags, seen)
    scale = view_scale(a_raw)
    a = scale * a_raw
    b = semantic_columns_for(seen, semantics)
    d = resolve_d(cfg.d, a.shape[0], b.shape[0], a.shape[1], seen.n_classes)
    cca = cca_fit(a, b, d)

    n_seen = seen.n_classes
    unseen_table = semantics.subset(unseen.class_names)
    prototypes = cca.project_b(unseen_table.embeddings)
    labels = [n_seen + i for i in range(1, unseen.n_classes + 1)]

    test_cols = scale * np.column_stack(
        [gmil.embed_video(bags, v.frames).values for v in unseen.videos]
    )
    queries = cca.project_a(test_cols)
    gallery = PrototypeGallery(prototypes, labels)
    if cfg.adapt_enabled:
        v_a = cca.project_a(a)
        adaptation = tjm_adapt(v_a, prototypes, cfg.tjm)
        gallery = PrototypeGallery(
            anchor_prototypes(adaptation, v_a), labels, adapted=True
        )

    predictions = []
    label_arr = np.array(gallery.labels)
    for j in range(queries.shape[1]):
        d2 = np.sum((gallery.prototypes - queries[:, j : j + 1]) ** 2, axis=0)
        predictions.append(int(label_arr[np.lexsort((label_arr, d2))[0]]))
    truth = [n_seen + v.label for v in unseen.videos]
    return evaluate(
        predictions, truth, split=split, seed=cfg.seed, hyperparams={"baseline": "cca"}
    )
