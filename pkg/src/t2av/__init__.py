"""Reference kernels and evaluation metrics for video-aligned
text-to-audio models: embedding-set I/O, Gaussian Frechet distances,
alignment mechanism kernels, and a synthetic directional benchmark."""

from .errors import (
    T2avError,
    DataError,
    FormatError,
    BadMagicError,
    VersionMismatchError,
    TruncatedPayloadError,
    NonFiniteValueError,
    NumericalError,
)
from .embedset import (
    EmbeddingSet,
    ProjectionSpec,
    Pair,
    PairManifest,
    read_embeddings,
    write_embeddings,
    select_rows,
    select_clips,
    project,
    shift_segments,
    average_sets,
)
from .gaussian_stats import (
    GaussianStats,
    fit,
    merge,
    fit_partitioned,
    sym_eig,
    psd_sqrt,
    frechet,
)
from .metrics import (
    MetricReport,
    format_table,
    frechet_sets,
    favd,
    fatd,
    favtd,
    inception_score,
    paired_kl,
)
from .mechanism import (
    FeatureSeq,
    VCLAPConfig,
    AttentionConfig,
    LatentSpec,
    DiffusionSchedule,
    FusionParams,
    temporal_self_attention,
    attention_weights,
    multi_head_stack,
    dual_residual_fusion,
    vclap_logits,
    vclap_loss,
    vclap_grad,
    vclap_grad_check,
    ddpm_forward,
    ddpm_loss,
)
from .simbench import (
    PopulationSpec,
    ValidationRow,
    ValidationReport,
    gen_population,
    run_visual_validation,
    run_temporal_validation,
)

__version__ = "0.1.0"
