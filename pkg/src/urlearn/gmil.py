"""Multiple-instance video encoding.

Frames of each class are clustered into H bags; a video is then encoded
as the mean, over its frames, of per-bag odds-ratio scores from a local
nearest-neighbor density surrogate. The result is a fixed-length,
element-wise non-negative vector of dimension n_classes * H, suitable as
input to non-negative factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bundles
from .errors import StructuralError
from .features import FeatureBagCorpus, _freeze

KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 100
SIGMA_SAMPLE = 2000


@dataclass(frozen=True)
class Bag:
    """One cluster of frame descriptors belonging to a single class."""

    class_id: int
    centroid: np.ndarray   # (D,)
    members: np.ndarray    # (n_members, D)


@dataclass(frozen=True)
class BagModel:
    """Per-class bag clusters plus the scoring bandwidth.

    Bags are ordered class-major: index (c-1)*h + j addresses bag j of
    class c, so embeddings from different calls line up entry by entry.
    """

    bags: list[Bag]
    n_classes: int
    h: int
    k_nn: int
    sigma: float
    d_feat: int

    def __post_init__(self):
        if len(self.bags) != self.n_classes * self.h:
            raise StructuralError(
                f"expected {self.n_classes * self.h} bags, got {len(self.bags)}"
            )
        for idx, bag in enumerate(self.bags):
            if bag.members.shape[0] < 1:
                raise StructuralError(f"bag {idx} has no members")
            mean = bag.members.mean(axis=0)
            if not np.allclose(mean, bag.centroid, atol=1e-8):
                raise StructuralError(f"bag {idx} centroid is not its member mean")
        # flat member index used by the embedding scorer
        members = np.vstack([b.members for b in self.bags])
        owner = np.concatenate(
            [np.full(b.members.shape[0], i) for i, b in enumerate(self.bags)]
        )
        object.__setattr__(self, "_members", _freeze(members))
        object.__setattr__(self, "_owner", owner)

    @property
    def embedding_dim(self) -> int:
        return self.n_classes * self.h

    def stacked_members(self) -> np.ndarray:
        return self._members


@dataclass(frozen=True)
class EmbeddingVector:
    """Non-negative fixed-length encoding of one video."""

    values: np.ndarray
    source_length: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise StructuralError("embedding values must be a vector")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise StructuralError("embedding values must be finite and non-negative")
        object.__setattr__(self, "values", _freeze(vals))


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n_points x n_centers)."""
    p2 = np.sum(points**2, axis=1)[:, None]
    c2 = np.sum(centers**2, axis=1)[None, :]
    return np.maximum(p2 + c2 - 2.0 * points @ centers.T, 0.0)


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator):
    """Lloyd iterations with k-means++ seeding; returns (centroids, labels).

    Empty clusters are reseeded at the point currently farthest from its
    centroid. With fewer distinct points than k some clusters may stay
    empty; callers handle that case.
    """
    n = points.shape[0]
    first = int(rng.integers(n))
    centers = [points[first]]
    d2 = _sq_dists(points, points[first][None, :])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(points[idx])
        d2 = np.minimum(d2, _sq_dists(points, points[idx][None, :])[:, 0])
    centroids = np.array(centers)

    labels = np.zeros(n, dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        dist2 = _sq_dists(points, centroids)
        labels = np.argmin(dist2, axis=1)
        assigned = dist2[np.arange(n), labels]
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            steal = int(np.argmax(assigned))
            if assigned[steal] <= 0:
                break
            labels[steal] = j
            assigned[steal] = -1.0
        new_centroids = centroids.copy()
        for j in range(k):
            mask = labels == j
            if mask.any():
                new_centroids[j] = points[mask].mean(axis=0)
        shift = np.linalg.norm(new_centroids - centroids)
        scale = max(np.linalg.norm(centroids), 1e-12)
        centroids = new_centroids
        if shift / scale < KMEANS_TOL:
            break
    dist2 = _sq_dists(points, centroids)
    labels = np.argmin(dist2, axis=1)
    return centroids, labels


def _median_member_distance(members: np.ndarray, rng: np.random.Generator) -> float:
    sample = members
    if members.shape[0] > SIGMA_SAMPLE:
        picks = rng.choice(members.shape[0], size=SIGMA_SAMPLE, replace=False)
        sample = members[picks]
    d2 = _sq_dists(sample, sample)
    iu = np.triu_indices(sample.shape[0], k=1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(np.sqrt(d2[iu])))
    return med if med > 0 else 1.0


def build_bags(
    corpus: FeatureBagCorpus, h: int, k_nn: int, seed: int = 0
) -> BagModel:
    """Cluster each class's pooled frames into exactly h bags.

    Classes whose k-means leaves fewer than h non-empty clusters (fewer
    distinct frames than h) are padded by duplicating their largest bag,
    keeping the embedding dimension fixed at n_classes * h.
    """
    if h < 1:
        raise StructuralError(f"h must be >= 1, got {h}")
    if k_nn < 1:
        raise StructuralError(f"k_nn must be >= 1, got {k_nn}")
    rng = np.random.default_rng(seed)
    bags: list[Bag] = []
    for label in range(1, corpus.n_classes + 1):
        points = corpus.frames_of_class(label)
        if points.shape[0] == 0:
            raise StructuralError(
                f"class {label} ({corpus.class_names[label - 1]!r}) has no frames"
            )
        _, assign = _kmeans(points, h, rng)
        class_bags = []
        for j in range(h):
            members = points[assign == j]
            if members.shape[0] == 0:
                continue
            class_bags.append(
                Bag(label, _freeze(members.mean(axis=0)), _freeze(members))
            )
        class_bags.sort(key=lambda b: -b.members.shape[0])
        while len(class_bags) < h:
            largest = class_bags[0]
            class_bags.append(Bag(label, largest.centroid, largest.members))
        bags.extend(class_bags[:h])
    members = np.vstack([b.members for b in bags])
    sigma = _median_member_distance(members, rng)
    return BagModel(
        bags=bags,
        n_classes=corpus.n_classes,
        h=h,
        k_nn=k_nn,
        sigma=sigma,
        d_feat=corpus.d_feat,
    )


def embed_video(model: BagModel, frames: np.ndarray) -> EmbeddingVector:
    """Encode a (D x L) frame matrix against the bag model.

    For every frame the k_nn globally nearest member descriptors are
    retrieved; a bag scores max(0, (d_bg^2 - d_b^2) / (2 sigma^2)) where
    d_b is the distance to its nearest retrieved member (bags without a
    retrieved member fall back to the background distance d_bg, the
    (k_nn+1)-th neighbor). Scores are averaged over frames, so the
    embedding is invariant to frame order and duplication.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] != model.d_feat:
        raise StructuralError(
            f"frames must be {model.d_feat} x L, got shape {frames.shape}"
        )
    n_frames = frames.shape[1]
    if n_frames < 1:
        raise StructuralError("video has no frames")
    members = model.stacked_members()
    owner = model._owner
    n_members = members.shape[0]
    k = min(model.k_nn, n_members - 1)
    dim = model.embedding_dim
    denom = 2.0 * model.sigma**2
    d2 = _sq_dists(frames.T, members)
    order = np.argsort(d2, axis=1, kind="stable")
    totals = np.zeros(dim)
    for l in range(n_frames):
        idx = order[l]
        bg2 = d2[l, idx[k]]
        bag_d2 = np.full(dim, bg2)
        retrieved = idx[:k]
        np.minimum.at(bag_d2, owner[retrieved], d2[l, retrieved])
        totals += np.maximum(0.0, (bg2 - bag_d2) / denom)
    return EmbeddingVector(values=totals / n_frames, source_length=n_frames)


def kernel(x: EmbeddingVector, x2: EmbeddingVector) -> float:
    """Inner product of two embeddings (symmetric, PSD by construction)."""
    if x.values.shape != x2.values.shape:
        raise StructuralError(
            f"embedding lengths differ: {x.values.shape[0]} vs {x2.values.shape[0]}"
        )
    return float(x.values @ x2.values)


def embed_corpus(model: BagModel, corpus: FeatureBagCorpus) -> np.ndarray:
    """Stack per-video embeddings as columns, preserving corpus order."""
    cols = [embed_video(model, video.frames).values for video in corpus.videos]
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# serialization (shares the bundle container documented in bundles.py)


def save_bag_model(model: BagModel, path, config: dict | None = None) -> None:
    matrices = {"centroids": np.vstack([b.centroid for b in model.bags])}
    for i, bag in enumerate(model.bags):
        matrices[f"members_{i:04d}"] = bag.members
    meta = {
        "kind": "bag_model",
        "class_ids": [b.class_id for b in model.bags],
        "n_classes": model.n_classes,
        "h": model.h,
        "k_nn": model.k_nn,
        "sigma": model.sigma,
        "d_feat": model.d_feat,
        "config": config or {},
    }
    bundles.write_bundle(path, matrices, meta)


def load_bag_model(path) -> BagModel:
    matrices, meta = bundles.read_bundle(path)
    if meta.get("kind") != "bag_model":
        raise StructuralError(f"{path}: bundle is not a bag model")
    centroids = matrices["centroids"]
    bags = [
        Bag(int(cid), centroids[i], matrices[f"members_{i:04d}"])
        for i, cid in enumerate(meta["class_ids"])
    ]
    return BagModel(
        bags=bags,
        n_classes=int(meta["n_classes"]),
        h=int(meta["h"]),
        k_nn=int(meta["k_nn"]),
        sigma=float(meta["sigma"]),
        d_feat=int(meta["d_feat"]),
    )
