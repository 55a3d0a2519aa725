"""Universal-representation pipeline for recognizing unseen action classes.

Videos are encoded as non-negative bag-level odds-ratio vectors, jointly
factorized with semantic label embeddings onto a shared coefficient
space under a Jensen-Shannon affinity coupling, projected by
row-orthonormal maps, optionally domain-adapted, and classified by
nearest prototype.
"""

from .adapt import AdaptationResult, TjmParams, mmd, tjm_adapt
from .errors import (
    ConfigError,
    DegeneracyError,
    MissingTokenError,
    ParseError,
    StructuralError,
    UrlearnError,
)
from .features import (
    FeatureBagCorpus,
    GeneratorTruth,
    PlantedFactors,
    SemanticTable,
    SynthesisResult,
    SyntheticSpec,
    Video,
    load_corpus,
    load_word_vectors,
    save_corpus,
    synthesize_corpus,
    synthesize_planted,
)
from .gmil import (
    Bag,
    BagModel,
    EmbeddingVector,
    build_bags,
    embed_corpus,
    embed_video,
    kernel,
    load_bag_model,
    save_bag_model,
)
from .procrustes import Projection, project, solve_rotation
from .recognize import (
    EvalReport,
    PipelineConfig,
    PipelineResult,
    PrototypeGallery,
    build_gallery,
    cross_validate,
    evaluate,
    make_hops,
    predict,
    run_cca_pipeline,
    run_pipeline,
)
from .url import (
    AffinityMatrix,
    FitConfig,
    LossBreakdown,
    UrlModel,
    fit,
    jsd_gradient,
    jsd_penalty,
    objective,
    pairwise_affinities,
    q_matrix,
    update_u,
    update_v,
    update_w,
)

__version__ = "0.1.0"
