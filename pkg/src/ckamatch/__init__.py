"""Training-free cross-modal embedding alignment toolkit."""

from .assignment import PermutationMap, brute_force_lap, solve_lap_max
from .baselines import (
    LinearMap,
    fit_linear_map,
    linear_map_scores,
    load_linear_map,
    relative_scores,
    save_linear_map,
)
from .errors import (
    CkamatchError,
    DegenerateBandwidthError,
    DegenerateKernelError,
    DegenerateVectorError,
    FormatError,
    IdLookupError,
    InputError,
    NumericalError,
    SizeError,
    StorageError,
    UnsupportedSpecError,
    ValidationError,
)
from .evaluation import (
    Corpus,
    EvalReport,
    ablation_grid,
    classify,
    matching_accuracy,
    noise_sweep,
    run_benchmark,
    shuffle_curve,
    size_sweep,
    topk_accuracy,
)
from .kernels import KernelMatrix, KernelSpec, center, cka, gram, hsic, normalized_centered
from .local_cka import (
    LocalCkaCache,
    ScoreMatrix,
    build_cache,
    load_score_matrix,
    local_cka_score,
    local_cka_trace_linear,
    match_by_scores,
    naive_local_cka_score,
    retrieve_topk,
    save_score_matrix,
    score_matrix,
)
from .preprocess import (
    AnchorSelection,
    StretchTransform,
    apply_stretch,
    fit_stretch,
    l2_normalize,
    select_anchors,
)
from .qap import QapConfig, QapResult, qap_match, solve_seeded_qap
from .store import (
    EmbeddingSet,
    PairingManifest,
    align_by_manifest,
    concat_columns,
    load_embeddings,
    load_manifest,
    save_embeddings,
    save_manifest,
)
from .synth import SynthSpec, generate, permute_columns, shuffle_fraction

__version__ = "0.1.0"
