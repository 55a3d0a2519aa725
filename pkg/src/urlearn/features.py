"""Corpora of per-frame video descriptors, semantic label tables, and
synthetic data generation.

A corpus holds labelled videos; each video is a (D x L) matrix with one
descriptor column per frame. Semantic tables map class names to
unit-norm embedding columns.

File formats
------------
Binary corpus: magic ``URLC``, u32 version=1, u32 video count, u32
descriptor dimension D, then per video: u32 label (1-based), u32 frame
count L, and L*D little-endian float64 values written frame by frame.

CSV corpus: one row per frame, ``video_id,label,f_1,...,f_D``; video
order follows first appearance.

Word vectors: plain text, one token per line followed by its
whitespace-separated float components.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingTokenError, ParseError, StructuralError

CORPUS_MAGIC = b"URLC"
CORPUS_VERSION = 1
UNIT_NORM_TOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Video:
    """One labelled video: descriptor matrix (D x L) and a 1-based class id."""

    frames: np.ndarray
    label: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class FeatureBagCorpus:
    """Immutable set of labelled videos sharing one descriptor dimension."""

    videos: list[Video]
    class_names: list[str]
    d_feat: int

    def __post_init__(self):
        if len(self.class_names) < 1:
            raise StructuralError("corpus needs at least one class name")
        if self.d_feat < 1:
            raise StructuralError("descriptor dimension must be >= 1")
        frozen = []
        for vi, video in enumerate(self.videos, start=1):
            frames = np.asarray(video.frames, dtype=np.float64)
            if frames.ndim != 2 or frames.shape[0] != self.d_feat:
                raise StructuralError(
                    f"video {vi}: frames must be a {self.d_feat} x L matrix, "
                    f"got shape {frames.shape}"
                )
            if frames.shape[1] < 1:
                raise StructuralError(f"video {vi}: has no frames")
            if not np.all(np.isfinite(frames)):
                raise StructuralError(f"video {vi}: non-finite descriptor entries")
            if not 1 <= video.label <= len(self.class_names):
                raise StructuralError(
                    f"video {vi}: label {video.label} outside 1..{len(self.class_names)}"
                )
            frozen.append(Video(_freeze(frames), int(video.label)))
        object.__setattr__(self, "videos", frozen)
        object.__setattr__(self, "class_names", list(self.class_names))

    @property
    def n_videos(self) -> int:
        return len(self.videos)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def frames_of_class(self, label: int) -> np.ndarray:
        """Pooled frames of one class as a (n_frames x D) row matrix."""
        cols = [v.frames.T for v in self.videos if v.label == label]
        if not cols:
            return np.zeros((0, self.d_feat))
        return np.vstack(cols)

    def labels(self) -> list[int]:
        return [v.label for v in self.videos]


@dataclass(frozen=True)
class SemanticTable:
    """Unit-norm semantic embedding columns, one per class name."""

    embeddings: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2:
            raise StructuralError("semantic embeddings must be a matrix")
        if emb.shape[1] != len(self.class_names):
            raise StructuralError(
                f"semantic table has {emb.shape[1]} columns for "
                f"{len(self.class_names)} class names"
            )
        if not np.all(np.isfinite(emb)):
            raise StructuralError("semantic embeddings contain non-finite entries")
        norms = np.linalg.norm(emb, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise StructuralError(
                f"semantic column {bad} ({self.class_names[bad]!r}) has norm "
                f"{norms[bad]:.12f}, expected 1"
            )
        object.__setattr__(self, "embeddings", _freeze(emb))
        object.__setattr__(self, "class_names", list(self.class_names))

    @property
    def dim(self) -> int:
        return self.embeddings.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.class_names.index(name)
        except ValueError:
            raise StructuralError(f"class {name!r} not in semantic table") from None
        return self.embeddings[:, idx]

    def subset(self, names: list[str]) -> "SemanticTable":
        cols = np.column_stack([self.column(n) for n in names])
        return SemanticTable(cols, list(names))


# ---------------------------------------------------------------------------
# corpus file I/O


def save_corpus(corpus: FeatureBagCorpus, path, fmt: str = "binary") -> None:
    """Write a corpus in the binary or CSV layout (binary round-trips bit-exactly)."""
    if fmt == "binary":
        parts = [
            CORPUS_MAGIC,
            struct.pack("<III", CORPUS_VERSION, corpus.n_videos, corpus.d_feat),
        ]
        for video in corpus.videos:
            parts.append(struct.pack("<II", video.label, video.n_frames))
            parts.append(video.frames.T.astype("<f8").tobytes(order="C"))
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for vid, video in enumerate(corpus.videos):
                for frame in video.frames.T:
                    values = ",".join(f"{x:.17g}" for x in frame)
                    fh.write(f"{vid},{video.label},{values}\n")
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")


def _load_corpus_binary(path) -> FeatureBagCorpus:
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise ParseError(f"{path}: byte {pos}: truncated while reading {what}")
        out = data[pos : pos + n]
        pos += n
        return out

    if take(4, "magic") != CORPUS_MAGIC:
        raise ParseError(f"{path}: byte 0: bad magic, not a binary corpus")
    version, n_videos, d_feat = struct.unpack("<III", take(12, "header"))
    if version != CORPUS_VERSION:
        raise ParseError(f"{path}: byte 4: unsupported corpus version {version}")
    if n_videos == 0:
        raise StructuralError(f"{path}: corpus holds no videos")
    if d_feat == 0:
        raise StructuralError(f"{path}: descriptor dimension is zero")
    videos = []
    for vi in range(1, n_videos + 1):
        label, n_frames = struct.unpack("<II", take(8, f"video {vi} header"))
        if label < 1:
            raise StructuralError(f"{path}: video {vi}: label must be >= 1")
        if n_frames < 1:
            raise StructuralError(f"{path}: video {vi}: has no frames")
        raw = take(8 * n_frames * d_feat, f"video {vi} frames")
        frames = np.frombuffer(raw, dtype="<f8").reshape(n_frames, d_feat).T
        videos.append(Video(frames.copy(), label))
    if pos != len(data):
        raise ParseError(f"{path}: byte {pos}: trailing bytes after last video")
    n_classes = max(v.label for v in videos)
    names = [f"class_{c}" for c in range(1, n_classes + 1)]
    return FeatureBagCorpus(videos, names, d_feat)


def _load_corpus_csv(path) -> FeatureBagCorpus:
    order: list[str] = []
    frames_by_video: dict[str, list[np.ndarray]] = {}
    label_by_video: dict[str, int] = {}
    d_feat = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 3:
                raise ParseError(
                    f"{path}: line {lineno}: expected video_id,label,features"
                )
            vid = fields[0]
            try:
                label = int(fields[1])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: label {fields[1]!r} is not an integer"
                ) from None
            try:
                values = np.array([float(x) for x in fields[2:]])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: non-numeric feature value"
                ) from None
            if label < 1:
                raise StructuralError(f"{path}: line {lineno}: label must be >= 1")
            if d_feat is None:
                d_feat = values.size
            if vid not in frames_by_video:
                order.append(vid)
                frames_by_video[vid] = []
                label_by_video[vid] = label
            elif label_by_video[vid] != label:
                raise StructuralError(
                    f"{path}: line {lineno}: video {vid!r} changes label "
                    f"{label_by_video[vid]} -> {label}"
                )
            if values.size != d_feat:
                video_no = order.index(vid) + 1
                frame_no = len(frames_by_video[vid]) + 1
                raise StructuralError(
                    f"{path}: line {lineno}: dimension mismatch at video "
                    f"{video_no}, frame {frame_no}: got {values.size}, expected {d_feat}"
                )
            frames_by_video[vid].append(values)
    if not order:
        raise StructuralError(f"{path}: corpus holds no videos")
    videos = [
        Video(np.vstack(frames_by_video[vid]).T, label_by_video[vid]) for vid in order
    ]
    n_classes = max(v.label for v in videos)
    names = [f"class_{c}" for c in range(1, n_classes + 1)]
    return FeatureBagCorpus(videos, names, d_feat)


def load_corpus(path, fmt: str) -> FeatureBagCorpus:
    """Load a corpus from the binary or CSV layout, preserving video order."""
    if fmt == "binary":
        return _load_corpus_binary(path)
    if fmt == "csv":
        return _load_corpus_csv(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


# ---------------------------------------------------------------------------
# word vectors

_TOKEN_SPLIT = re.compile(r"[\s_]+")


def load_word_vectors(path, class_names: list[str]) -> SemanticTable:
    """Build a semantic table by accumulating per-token vectors.

    Class names are split on whitespace and underscores; the vectors of
    found tokens are summed and the sum normalized to unit length.
    Tokens absent from the file are skipped; a class with no covered
    token at all is an error.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(f"{path}: line {lineno}: token without vector")
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: non-numeric vector component"
                ) from None
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ParseError(
                    f"{path}: line {lineno}: vector has {vec.size} components, "
                    f"expected {dim}"
                )
            vectors[parts[0]] = vec
    if dim is None:
        raise StructuralError(f"{path}: word-vector file holds no tokens")
    columns = []
    for name in class_names:
        tokens = [t for t in _TOKEN_SPLIT.split(name.strip()) if t]
        found = [vectors[t] for t in tokens if t in vectors]
        if not found:
            raise MissingTokenError(
                f"class {name!r}: no token of {tokens} found in {path}"
            )
        total = np.sum(found, axis=0)
        norm = np.linalg.norm(total)
        if norm <= 0:
            raise StructuralError(f"class {name!r}: accumulated vector has zero norm")
        columns.append(total / norm)
    return SemanticTable(np.column_stack(columns), list(class_names))


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic generator (pure function of the seed)."""

    c_seen: int = 8
    c_unseen: int = 4
    h_true: int = 2
    d_feat: int = 20
    l_sem: int = 16
    frames_per_video: tuple[int, int] = (8, 16)
    videos_per_class: int = 10
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        counts = {
            "c_seen": self.c_seen,
            "c_unseen": self.c_unseen,
            "h_true": self.h_true,
            "d_feat": self.d_feat,
            "l_sem": self.l_sem,
            "videos_per_class": self.videos_per_class,
        }
        for key, value in counts.items():
            if value < 1:
                raise ValueError(f"{key} must be >= 1, got {value}")
        lo, hi = self.frames_per_video
        if lo < 1 or hi < lo:
            raise ValueError(f"invalid frames_per_video range ({lo}, {hi})")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")


@dataclass(frozen=True)
class GeneratorTruth:
    """Latent quantities behind a synthetic draw, for oracle checks."""

    seen_centroids: np.ndarray      # (C_seen, H, D)
    unseen_centroids: np.ndarray    # (C_unseen, H, D)
    combo_weights: np.ndarray       # (C_unseen, C_seen), rows on the simplex
    semantic_map: np.ndarray        # (L_sem, C_seen)
    spec: SyntheticSpec = field(repr=False, default=None)


@dataclass(frozen=True)
class SynthesisResult:
    seen: FeatureBagCorpus
    unseen: FeatureBagCorpus
    semantics: SemanticTable
    truth: GeneratorTruth


def _videos_for_class(rng, centroids, spec) -> list[np.ndarray]:
    lo, hi = spec.frames_per_video
    out = []
    for _ in range(spec.videos_per_class):
        n_frames = int(rng.integers(lo, hi + 1))
        picks = rng.integers(0, centroids.shape[0], size=n_frames)
        frames = centroids[picks].T.copy()
        if spec.noise > 0:
            frames = frames + spec.noise * rng.standard_normal(frames.shape)
        out.append(np.clip(frames, 0.0, None))
    return out


def _semantic_column(rng, semantic_map, weights, noise) -> np.ndarray:
    raw = semantic_map @ weights
    col = raw + noise * rng.standard_normal(raw.shape) if noise > 0 else raw.copy()
    col = np.clip(col, 0.0, None)
    norm = np.linalg.norm(col)
    if norm <= 1e-12:
        col = raw
        norm = np.linalg.norm(col)
    return col / norm


def synthesize_corpus(spec: SyntheticSpec) -> SynthesisResult:
    """Draw seen and unseen corpora whose latent structure is shared.

    Each seen class owns ``h_true`` non-negative centroid blocks; frames
    are noisy copies of a per-frame block choice, clipped at zero.
    Unseen class centroids are sparse convex combinations of the seen
    centroids, and every semantic column is the unit-normalized image of
    the same combination weights under one fixed non-negative map, so
    the visual and semantic views agree about which classes compose
    which. The whole draw is a pure function of the spec.
    """
    rng = np.random.default_rng(spec.seed)
    seen_centroids = rng.uniform(0.5, 1.5, size=(spec.c_seen, spec.h_true, spec.d_feat))
    semantic_map = rng.uniform(0.0, 1.0, size=(spec.l_sem, spec.c_seen))

    support = min(2, spec.c_seen)
    combo = np.zeros((spec.c_unseen, spec.c_seen))
    for u in range(spec.c_unseen):
        picks = rng.choice(spec.c_seen, size=support, replace=False)
        raw = rng.uniform(0.5, 1.0, size=support)
        combo[u, picks] = raw / raw.sum()
    unseen_centroids = np.einsum("uc,chd->uhd", combo, seen_centroids)

    seen_videos = []
    for c in range(spec.c_seen):
        for frames in _videos_for_class(rng, seen_centroids[c], spec):
            seen_videos.append(Video(frames, c + 1))
    unseen_videos = []
    for u in range(spec.c_unseen):
        for frames in _videos_for_class(rng, unseen_centroids[u], spec):
            unseen_videos.append(Video(frames, u + 1))

    seen_names = [f"seen{c:02d}" for c in range(1, spec.c_seen + 1)]
    unseen_names = [f"unseen{u:02d}" for u in range(1, spec.c_unseen + 1)]
    columns = []
    for c in range(spec.c_seen):
        weights = np.zeros(spec.c_seen)
        weights[c] = 1.0
        columns.append(_semantic_column(rng, semantic_map, weights, spec.noise))
    for u in range(spec.c_unseen):
        columns.append(_semantic_column(rng, semantic_map, combo[u], spec.noise))

    semantics = SemanticTable(np.column_stack(columns), seen_names + unseen_names)
    truth = GeneratorTruth(
        seen_centroids=_freeze(seen_centroids),
        unseen_centroids=_freeze(unseen_centroids),
        combo_weights=_freeze(combo),
        semantic_map=_freeze(semantic_map),
        spec=spec,
    )
    return SynthesisResult(
        seen=FeatureBagCorpus(seen_videos, seen_names, spec.d_feat),
        unseen=FeatureBagCorpus(unseen_videos, unseen_names, spec.d_feat),
        semantics=semantics,
        truth=truth,
    )


@dataclass(frozen=True)
class PlantedFactors:
    """Exactly factorizable two-view instance with its ground-truth factors."""

    a: np.ndarray
    b: np.ndarray
    u: np.ndarray
    w: np.ndarray
    v: np.ndarray


def synthesize_planted(m1: int, m2: int, n: int, d: int, seed: int = 0) -> PlantedFactors:
    """Draw non-negative factors and return the exact products A = U V, B = W V."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=(m1, d))
    w = rng.uniform(0.0, 1.0, size=(m2, d))
    v = rng.uniform(0.0, 1.0, size=(d, n))
    return PlantedFactors(
        a=_freeze(u @ v), b=_freeze(w @ v), u=_freeze(u), w=_freeze(w), v=_freeze(v)
    )
