"""Instruction recommendation engine.

Recommends actions from a registered instruction set for a user-selected
trigger object: structured reasoning through a pluggable model backend, a
reasoning-template library with threshold-gated retrieval and novelty-gated
evolution, and a token-prefix-tree constrained decoder that can only ever
emit registered instructions.
"""

from .backend import (
    BackendRequest,
    HttpBackend,
    MockBackend,
    MockScript,
    Mode,
    ScriptEntry,
    serialize_request,
)
from .embedding import (
    DEFAULT_DIM,
    Embedder,
    EmbeddingVector,
    HashedBagEmbedder,
    cosine_similarity,
)
from .evaluation import (
    EvalSample,
    MetricReport,
    SweepRow,
    compute_metrics,
    delta_sweep,
    load_eval_samples,
    sweep_to_csv,
)
from .exceptions import EngineError
from .pipeline import ExportReport, RecommendationPipeline, export_sft_dataset
from .templates import (
    AdmissionRecord,
    AdmissionResult,
    DistillationLogEntry,
    RetrievalConfig,
    RetrievalHit,
    Template,
    TemplateLibrary,
    embedding_text,
    load_distillation_log,
)
from .tokenizer import (
    SpecialTokenIds,
    Vocabulary,
    build_vocabulary,
    tokenize_library,
)
from .trie import (
    InstructionTrie,
    TrieHolder,
    TrieNode,
    build_trie,
    mask_logits,
)
from .types import (
    EOS_TOKEN,
    MAX_RECOMMENDATIONS,
    REASONING_CLOSE,
    REASONING_OPEN,
    Instruction,
    Modality,
    Prompt,
    ReasoningStage,
    ReasoningStep,
    ReasoningTrace,
    RecommendationResult,
    Trigger,
)

__version__ = "0.1.0"

__all__ = [
    "BackendRequest",
    "HttpBackend",
    "MockBackend",
    "MockScript",
    "Mode",
    "ScriptEntry",
    "serialize_request",
    "DEFAULT_DIM",
    "Embedder",
    "EmbeddingVector",
    "HashedBagEmbedder",
    "cosine_similarity",
    "EvalSample",
    "MetricReport",
    "SweepRow",
    "compute_metrics",
    "delta_sweep",
    "load_eval_samples",
    "sweep_to_csv",
    "EngineError",
    "ExportReport",
    "RecommendationPipeline",
    "export_sft_dataset",
    "AdmissionRecord",
    "AdmissionResult",
    "DistillationLogEntry",
    "RetrievalConfig",
    "RetrievalHit",
    "Template",
    "TemplateLibrary",
    "embedding_text",
    "load_distillation_log",
    "SpecialTokenIds",
    "Vocabulary",
    "build_vocabulary",
    "tokenize_library",
    "InstructionTrie",
    "TrieHolder",
    "TrieNode",
    "build_trie",
    "mask_logits",
    "EOS_TOKEN",
    "MAX_RECOMMENDATIONS",
    "REASONING_CLOSE",
    "REASONING_OPEN",
    "Instruction",
    "Modality",
    "Prompt",
    "ReasoningStage",
    "ReasoningStep",
    "ReasoningTrace",
    "RecommendationResult",
    "Trigger",
]
