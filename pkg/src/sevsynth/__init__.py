"""Severity-labeled training-triple synthesis and metric evaluation toolkit."""

from .corpus import IdfTable, ParallelPair, TokenizedSentence, build_idf, load_corpus, load_parallel, tfidf_weight, tokenize
from .edit_script import OpKind, OpOrigin, Perturbation, Proposal, add_random_drops, apply_ops, extract_edit_ops
from .embed_index import (
    EmbeddingFormatError,
    EmbeddingIndex,
    NeighborSet,
    knn,
    load_embeddings,
    margin_score,
    select_neighbor,
    write_embeddings,
)
from .evalkit import (
    RescaleBounds,
    ScoredSegments,
    bounds_from_samples,
    kendall_tau_b,
    rescale,
    spearman_rho,
    student_t_sf,
    williams_test,
)
from .pipeline import (
    PipelineConfig,
    PipelineError,
    TrainingTriple,
    ValidationError,
    run_emit_dataset,
    run_label,
    run_synthesize,
)
from .rng import derive_rng
from .severity import (
    MASK_TOKEN,
    MaskProbabilityProvider,
    MaskQuery,
    OracleFileProvider,
    OracleLookupError,
    SeverityConfig,
    SeverityLabel,
    SeverityLevel,
    StubProvider,
    op_fingerprint,
    score_sample,
    severity_delete,
    severity_insert_replace,
)
from .synthesis import (
    MAX_OPS_PER_SAMPLE,
    SampleKind,
    SyntheticSample,
    draw_partner,
    make_in_batch_negative,
    make_positive,
    sample_perturbation_subset,
    synthesize_negative,
)

__version__ = "0.1.0"
