"""Deterministic training loops: AdamW, teacher pretraining, student training.

Teacher pretraining runs contrastive-only on single-frame pairs and returns
the final weights. Student training starts from the teacher weights, combines
the contrastive loss on labeled batches with teacher-distillation on
unlabeled batches, and returns the checkpoint with the lowest labeled
validation loss. Everything is seeded; identical inputs give bit-identical
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import (
    EmbeddingBatch,
    EncoderConfig,
    ParamVector,
    encode_text_batch,
    encode_video_batch,
    init_params,
)
from .errors import TrainingDivergedError, UsageError
from .losses import LossConfig, PseudoLabelBatch, contrastive_loss, total_loss_grad
from .numerics import similarity_matrix

_LABELED_STREAM = 101
_UNLABELED_VIDEO_STREAM = 102
_UNLABELED_TEXT_STREAM = 103


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-5
    batch_size_labeled: int = 32
    batch_size_unlabeled: int = 32
    max_steps: int = 2000
    eval_every: int = 100
    seed: int = 0
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    distill_on_labeled: bool = False  # also distill on labeled batches

    def __post_init__(self):
        if not np.isfinite(self.lr) or self.lr <= 0:
            raise UsageError(f"lr must be positive, got {self.lr}")
        if self.batch_size_labeled < 2 or self.batch_size_unlabeled < 2:
            raise UsageError("batch sizes must be >= 2")
        if self.max_steps < 1:
            raise UsageError("max_steps must be >= 1")
        if self.eval_every < 1:
            raise UsageError("eval_every must be >= 1")
        if self.weight_decay < 0:
            raise UsageError("weight_decay must be >= 0")
        b1, b2 = self.betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise UsageError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise UsageError("eps must be positive")


@dataclass(eq=False)
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def init_optimizer_state(params: ParamVector) -> OptimizerState:
    return OptimizerState(np.zeros_like(params.values), np.zeros_like(params.values), 0)


def adamw_step(
    params: ParamVector, grad: ParamVector, state: OptimizerState, cfg: TrainConfig
):
    """One AdamW update with bias correction and decoupled weight decay.

    Pure: returns new ``(params, state)`` without touching the inputs.
    """
    if not params.same_layout(grad):
        raise UsageError("gradient layout does not match parameter layout")
    if state.m.shape != params.values.shape:
        raise UsageError("optimizer state shape does not match parameters")
    b1, b2 = cfg.betas
    t = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grad.values
    v = b2 * state.v + (1.0 - b2) * grad.values * grad.values
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    update = cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.eps))
    new_values = params.values * (1.0 - cfg.lr * cfg.weight_decay) - update
    return ParamVector(new_values, params.layout), OptimizerState(m, v, t)


class _IndexBatcher:
    """Constant-size minibatches from reshuffled permutations (drops remainders)."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        if batch_size > n:
            raise UsageError(f"batch size {batch_size} exceeds population {n}")
        self._n = n
        self._batch = batch_size
        self._rng = rng
        self._perm = rng.permutation(n)
        self._pos = 0

    def next_batch(self) -> np.ndarray:
        if self._pos + self._batch > self._n:
            self._perm = self._rng.permutation(self._n)
            self._pos = 0
        out = self._perm[self._pos:self._pos + self._batch]
        self._pos += self._batch
        return out


def make_pseudo_labels(
    teacher: ParamVector, videos, texts, enc_cfg: EncoderConfig, sigma: float
) -> PseudoLabelBatch:
    """Teacher similarity logits over one unlabeled batch of candidate pairs."""
    if len(videos) != len(texts):
        raise UsageError(f"batch has {len(videos)} videos but {len(texts)} texts")
    if len(videos) < 2:
        raise UsageError("pseudo labels need batch size >= 2 (no negatives otherwise)")
    x_v = encode_video_batch(teacher, videos, enc_cfg)
    x_t = encode_text_batch(teacher, texts, enc_cfg)
    return PseudoLabelBatch(similarity_matrix(x_v, x_t, sigma))


def validation_loss(params, videos, texts, enc_cfg, sigma: float) -> float:
    """Contrastive-only loss over a full held-out split, in corpus order."""
    z_v = encode_video_batch(params, videos, enc_cfg)
    z_t = encode_text_batch(params, texts, enc_cfg)
    value, _ = contrastive_loss(EmbeddingBatch(z_v, z_t), LossConfig(sigma=sigma, lambda_=0.0))
    return value


def _log_line(log, step: int, train_loss: float, val_loss: float) -> None:
    if log is not None:
        log(f"{step}\t{train_loss:.6f}\t{val_loss:.6f}")


def pretrain_teacher(corpus, enc_cfg: EncoderConfig, train_cfg: TrainConfig,
                     sigma: float = 0.05, log=None) -> ParamVector:
    """Contrastive-only pretraining on single-frame pairs; returns final weights.

    Stands in for a large pretrained image-text model: the corpus is expected
    to hold T=1 video records paired with texts. The distillation weight is
    forced to zero no matter what the caller configured elsewhere.
    """
    train_videos, train_texts = corpus.paired("labeled-train")
    val_videos, val_texts = corpus.paired("labeled-val")
    if len(train_videos) == 0:
        raise UsageError("pretraining corpus has no labeled-train pairs")
    if len(val_videos) == 0:
        raise UsageError("pretraining corpus has no labeled-val pairs")
    if len(train_videos) < 2 * train_cfg.batch_size_labeled:
        raise UsageError("labeled-train split must hold at least two batches")

    loss_cfg = LossConfig(sigma=sigma, lambda_=0.0)
    params = init_params(enc_cfg)
    state = init_optimizer_state(params)
    batcher = _IndexBatcher(
        len(train_videos), train_cfg.batch_size_labeled,
        np.random.default_rng([train_cfg.seed, _LABELED_STREAM]),
    )
    _log_line(log, 0, float("nan"),
              validation_loss(params, val_videos, val_texts, enc_cfg, sigma))
    for step in range(1, train_cfg.max_steps + 1):
        idx = batcher.next_batch()
        loss, grad = total_loss_grad(
            params, [train_videos[i] for i in idx], train_texts[idx],
            None, None, None, loss_cfg, enc_cfg,
        )
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss {loss} at step {step}")
        params, state = adamw_step(params, grad, state, train_cfg)
        if step % train_cfg.eval_every == 0 or step == train_cfg.max_steps:
            _log_line(log, step, loss,
                      validation_loss(params, val_videos, val_texts, enc_cfg, sigma))
    return params


@dataclass(eq=False)
class CheckpointRecord:
    """Best-validation snapshot of a training run plus its configuration."""

    params: ParamVector
    step: int
    val_loss: float
    enc_cfg: EncoderConfig
    loss_cfg: LossConfig
    train_cfg: TrainConfig

    def __post_init__(self):
        if not np.isfinite(self.val_loss):
            raise UsageError(f"checkpoint val_loss must be finite, got {self.val_loss}")


def train_student(
    teacher: ParamVector,
    corpus,
    enc_cfg: EncoderConfig,
    loss_cfg: LossConfig,
    train_cfg: TrainConfig,
    log=None,
) -> CheckpointRecord:
    """Train a student from teacher init; select by labeled validation loss.

    Each step draws one labeled batch and one unlabeled batch (seeded
    shuffling), encodes the unlabeled batch with the frozen teacher to get
    soft targets, takes one combined gradient step, and every ``eval_every``
    steps evaluates the contrastive loss on the labeled validation split.
    The returned record holds the parameters with the minimum validation
    loss over all evaluations, including the step-0 one.
    """
    train_videos, train_texts = corpus.paired("labeled-train")
    val_videos, val_texts = corpus.paired("labeled-val")
    if len(train_videos) == 0 or len(val_videos) == 0:
        raise UsageError("student training needs non-empty labeled-train and labeled-val splits")
    if len(train_videos) < 2 * train_cfg.batch_size_labeled:
        raise UsageError(
            f"labeled-train split has {len(train_videos)} pairs; "
            f"needs >= {2 * train_cfg.batch_size_labeled}"
        )
    unlabeled_videos, unlabeled_texts = corpus.unpaired("unlabeled")
    use_distill = loss_cfg.lambda_ != 0.0 and len(unlabeled_videos) > 0

    student = teacher.copy()
    state = init_optimizer_state(student)
    labeled_batcher = _IndexBatcher(
        len(train_videos), train_cfg.batch_size_labeled,
        np.random.default_rng([train_cfg.seed, _LABELED_STREAM]),
    )
    if use_distill:
        video_batcher = _IndexBatcher(
            len(unlabeled_videos), train_cfg.batch_size_unlabeled,
            np.random.default_rng([train_cfg.seed, _UNLABELED_VIDEO_STREAM]),
        )
        text_batcher = _IndexBatcher(
            len(unlabeled_texts), train_cfg.batch_size_unlabeled,
            np.random.default_rng([train_cfg.seed, _UNLABELED_TEXT_STREAM]),
        )

    def snapshot(step, val):
        return CheckpointRecord(student.copy(), step, val, enc_cfg, loss_cfg, train_cfg)

    val0 = validation_loss(student, val_videos, val_texts, enc_cfg, loss_cfg.sigma)
    _log_line(log, 0, float("nan"), val0)
    best = snapshot(0, val0)

    for step in range(1, train_cfg.max_steps + 1):
        idx = labeled_batcher.next_batch()
        lv = [train_videos[i] for i in idx]
        lt = train_texts[idx]
        uv = ut = pseudo = labeled_pseudo = None
        if use_distill:
            uv = [unlabeled_videos[i] for i in video_batcher.next_batch()]
            ut = unlabeled_texts[text_batcher.next_batch()]
            pseudo = make_pseudo_labels(teacher, uv, ut, enc_cfg, loss_cfg.sigma)
            if train_cfg.distill_on_labeled:
                labeled_pseudo = make_pseudo_labels(teacher, lv, lt, enc_cfg, loss_cfg.sigma)
        loss, grad = total_loss_grad(
            student, lv, lt, uv, ut, pseudo, loss_cfg, enc_cfg, labeled_pseudo=labeled_pseudo
        )
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss {loss} at step {step}")
        student, state = adamw_step(student, grad, state, train_cfg)
        if step % train_cfg.eval_every == 0 or step == train_cfg.max_steps:
            val = validation_loss(student, val_videos, val_texts, enc_cfg, loss_cfg.sigma)
            _log_line(log, step, loss, val)
            if val < best.val_loss:
                best = snapshot(step, val)
    return best
