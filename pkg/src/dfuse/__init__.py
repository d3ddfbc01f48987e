"""Desk-scale teacher-student dual-encoder refinement with weight-space fusion.

The pipeline: generate a synthetic corpus with planted video-text
correspondence, pretrain a teacher on single-frame pairs, train a student on
labeled pairs plus teacher-distilled soft targets over unlabeled data, blend
teacher and student weights, and evaluate zero-shot retrieval and
classification with diagnostic exports.
"""

from .checkpointio import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import (
    Corpus,
    CorpusRecord,
    SynthConfig,
    build_corpus,
    gen_corpus,
    load_corpus,
    prompt_feature,
)
from .encoder import (
    EmbeddingBatch,
    EncoderConfig,
    ParamVector,
    encode_text,
    encode_text_batch,
    encode_video,
    encode_video_batch,
    init_params,
    sample_frame_indices,
)
from .errors import (
    CheckpointChecksumError,
    CheckpointFormatError,
    CheckpointLayoutError,
    CheckpointMagicError,
    CorpusFormatError,
    CorpusRecordError,
    DegenerateEmbeddingError,
    DfuseError,
    TrainingDivergedError,
    UsageError,
    ValidationError,
)
from .evaluation import (
    DEFAULT_TEMPLATE,
    EvalReport,
    PromptSet,
    RankList,
    build_prompt_set,
    class_embeddings,
    classify_zero_shot,
    delta_table,
    evaluate_model,
    median_rank,
    per_class_delta,
    rank_distribution,
    recall_at_k,
    retrieval_ranks,
    topk_accuracy,
)
from .fusion import FusionConfig, fuse_weights, sweep_alpha
from .gradcheck import finite_difference_grad, run_gradcheck
from .losses import (
    LossConfig,
    PseudoLabelBatch,
    contrastive_loss,
    distillation_grad_logits,
    distillation_loss,
    total_loss,
    total_loss_grad,
)
from .numerics import l2_normalize_rows, logsumexp, similarity_matrix, softmax_rows
from .training import (
    CheckpointRecord,
    OptimizerState,
    TrainConfig,
    adamw_step,
    init_optimizer_state,
    make_pseudo_labels,
    pretrain_teacher,
    train_student,
    validation_loss,
)

__version__ = "0.1.0"
