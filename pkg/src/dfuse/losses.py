"""Training objective: bidirectional contrastive and distillation losses.

The contrastive part is a symmetric InfoNCE over a labeled batch (diagonal
entries of the similarity matrix are the positives). The distillation part is
the cross-entropy of the student's row/column softmax scores against the
teacher's, computed on unlabeled batches. The total is
``contrastive + lambda * distillation`` and has a hand-derived analytic
gradient; gradient correctness is pinned by finite differences elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import (
    EmbeddingBatch,
    EncoderConfig,
    ParamVector,
    TowerCache,
    text_forward,
    video_forward,
)
from .errors import UsageError
from .numerics import (
    as_matrix,
    log_softmax_rows,
    matmul,
    similarity_matrix,
    softmax_rows,
)


@dataclass(frozen=True)
class LossConfig:
    sigma: float = 0.05     # softmax temperature
    lambda_: float = 0.999  # weight on the distillation term

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise UsageError(f"sigma must be positive and finite, got {self.sigma}")
        if not np.isfinite(self.lambda_) or self.lambda_ < 0:
            raise UsageError(f"lambda must be >= 0 and finite, got {self.lambda_}")


@dataclass(eq=False)
class PseudoLabelBatch:
    """Teacher similarity logits over one unlabeled batch, already temperature-scaled."""

    teacher_logits: np.ndarray

    def __post_init__(self):
        self.teacher_logits = as_matrix(self.teacher_logits, "teacher logits")
        if self.teacher_logits.shape[0] != self.teacher_logits.shape[1]:
            raise UsageError(
                f"teacher logits must be square, got {self.teacher_logits.shape}"
            )

    @property
    def batch_size(self) -> int:
        return int(self.teacher_logits.shape[0])


def contrastive_loss(batch: EmbeddingBatch, cfg: LossConfig):
    """Symmetric InfoNCE on a labeled batch.

    Returns ``(total, (video_to_text, text_to_video))``, each term the mean
    negative log-softmax of the diagonal, so both are >= 0.
    """
    b = batch.batch_size
    if b < 2:
        raise UsageError("contrastive loss needs batch size >= 2 (at least one negative)")
    s = similarity_matrix(batch.z_v, batch.z_t, cfg.sigma)
    l_v2t = -float(np.einsum("ii->", log_softmax_rows(s))) / b
    l_t2v = -float(np.einsum("ii->", log_softmax_rows(s.T))) / b
    return l_v2t + l_t2v, (l_v2t, l_t2v)


def distillation_loss(student: EmbeddingBatch, pseudo: PseudoLabelBatch, cfg: LossConfig):
    """Cross-entropy of student scores against teacher soft targets, both directions.

    Row softmaxes give the video-to-text direction, column softmaxes the
    text-to-video direction; each term is bounded below by the matching
    teacher entropy (Gibbs inequality).
    """
    b = student.batch_size
    if b != pseudo.batch_size:
        raise UsageError(
            f"student batch size {b} does not match teacher logits {pseudo.batch_size}"
        )
    s = similarity_matrix(student.z_v, student.z_t, cfg.sigma)
    x = pseudo.teacher_logits
    l_v2t = -float(np.einsum("ij,ij->", softmax_rows(x), log_softmax_rows(s))) / b
    l_t2v = -float(np.einsum("ij,ij->", softmax_rows(x.T), log_softmax_rows(s.T))) / b
    return l_v2t + l_t2v, (l_v2t, l_t2v)


def total_loss(
    labeled: EmbeddingBatch,
    student_unlabeled: EmbeddingBatch | None,
    pseudo: PseudoLabelBatch | None,
    cfg: LossConfig,
) -> float:
    """Contrastive loss plus lambda times the distillation loss.

    ``student_unlabeled`` and ``pseudo`` may both be None (no distillation
    data), in which case the distillation term is zero.
    """
    value, _ = contrastive_loss(labeled, cfg)
    if (student_unlabeled is None) != (pseudo is None):
        raise UsageError("student_unlabeled and pseudo must be given together")
    if student_unlabeled is not None:
        distill, _ = distillation_loss(student_unlabeled, pseudo, cfg)
        value = value + cfg.lambda_ * distill
    return value


def contrastive_grad_logits(s: np.ndarray) -> np.ndarray:
    """Gradient of the batch-mean contrastive loss w.r.t. the logits matrix."""
    s = as_matrix(s, "logits")
    b = s.shape[0]
    eye = np.eye(b)
    g_rows = (softmax_rows(s) - eye) / b
    g_cols = ((softmax_rows(s.T) - eye) / b).T
    return g_rows + g_cols


def distillation_grad_logits(student_logits: np.ndarray, teacher_logits: np.ndarray) -> np.ndarray:
    """Gradient of the batch-mean distillation loss w.r.t. the student logits.

    Softmax-difference identity: (Q - P) / B summed over both directions, so
    the gradient vanishes exactly when the student matches the teacher.
    """
    s = as_matrix(student_logits, "student logits")
    x = as_matrix(teacher_logits, "teacher logits")
    if s.shape != x.shape or s.shape[0] != s.shape[1]:
        raise UsageError(f"logit shapes must be equal and square, got {s.shape} vs {x.shape}")
    b = s.shape[0]
    g_rows = (softmax_rows(s) - softmax_rows(x)) / b
    g_cols = ((softmax_rows(s.T) - softmax_rows(x.T)) / b).T
    return g_rows + g_cols


def _embedding_grad_backward(
    grads: dict, params: ParamVector, prefix: str, cache: TowerCache, dz: np.ndarray, n_pool: int
) -> None:
    """Backprop dz (w.r.t. unit embeddings) through normalize, pooling, tower."""
    # L2 normalization: du = (g - (g . z) z) / ||u||
    dots = np.einsum("ij,ij->i", dz, cache.z)
    dpooled = (dz - dots[:, None] * cache.z) / cache.norms[:, None]
    if n_pool > 1:
        du = np.repeat(dpooled / n_pool, n_pool, axis=0)
    else:
        du = dpooled
    w2 = params.tensor(prefix + ".w2")
    grads[prefix + ".b2"] += np.einsum("ij->j", du)
    grads[prefix + ".w2"] += np.einsum("ij,ik->jk", du, cache.h)
    dh = matmul(du, w2)
    da = dh * (1.0 - cache.h * cache.h)
    grads[prefix + ".b1"] += np.einsum("ij->j", da)
    grads[prefix + ".w1"] += np.einsum("ij,ik->jk", da, cache.x)


def total_loss_grad(
    params: ParamVector,
    labeled_videos: Sequence,
    labeled_texts,
    unlabeled_videos: Sequence | None,
    unlabeled_texts,
    pseudo: PseudoLabelBatch | None,
    cfg: LossConfig,
    enc_cfg: EncoderConfig,
    labeled_pseudo: PseudoLabelBatch | None = None,
):
    """Loss and analytic gradient of the combined objective w.r.t. ``params``.

    Encodes the raw inputs with ``params``, evaluates the same loss functions
    as ``total_loss`` (the returned loss is bit-identical to calling them on
    the same embeddings), and backpropagates through the softmax blocks,
    similarity, normalization, pooling, and both towers. ``labeled_pseudo``
    optionally adds a distillation term on the labeled batch as well.

    Returns ``(loss, grad)`` with ``grad.layout == params.layout``.
    """
    cache_vl = video_forward(params, labeled_videos, enc_cfg)
    cache_tl = text_forward(params, labeled_texts, enc_cfg)
    labeled = EmbeddingBatch(cache_vl.z, cache_tl.z)

    if (unlabeled_videos is None) != (pseudo is None):
        raise UsageError("unlabeled inputs and pseudo labels must be given together")
    student_u = None
    cache_vu = cache_tu = None
    if unlabeled_videos is not None:
        cache_vu = video_forward(params, unlabeled_videos, enc_cfg)
        cache_tu = text_forward(params, unlabeled_texts, enc_cfg)
        student_u = EmbeddingBatch(cache_vu.z, cache_tu.z)

    loss = total_loss(labeled, student_u, pseudo, cfg)
    if labeled_pseudo is not None:
        extra, _ = distillation_loss(labeled, labeled_pseudo, cfg)
        loss = loss + cfg.lambda_ * extra

    grads = {name: np.zeros(shape) for name, shape in params.layout}

    s_l = similarity_matrix(labeled.z_v, labeled.z_t, cfg.sigma)
    g_l = contrastive_grad_logits(s_l)
    if labeled_pseudo is not None:
        g_l = g_l + cfg.lambda_ * distillation_grad_logits(s_l, labeled_pseudo.teacher_logits)
    _embedding_grad_backward(
        grads, params, "video", cache_vl, matmul(g_l, labeled.z_t) / cfg.sigma, enc_cfg.n_frames
    )
    _embedding_grad_backward(
        grads, params, "text", cache_tl, matmul(g_l.T, labeled.z_v) / cfg.sigma, 1
    )

    if student_u is not None and cfg.lambda_ != 0.0:
        s_u = similarity_matrix(student_u.z_v, student_u.z_t, cfg.sigma)
        g_u = cfg.lambda_ * distillation_grad_logits(s_u, pseudo.teacher_logits)
        _embedding_grad_backward(
            grads, params, "video", cache_vu, matmul(g_u, student_u.z_t) / cfg.sigma, enc_cfg.n_frames
        )
        _embedding_grad_backward(
            grads, params, "text", cache_tu, matmul(g_u.T, student_u.z_v) / cfg.sigma, 1
        )

    flat = np.concatenate([grads[name].ravel() for name, _ in params.layout])
    return loss, ParamVector(flat, params.layout)
