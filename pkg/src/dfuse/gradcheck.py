"""Finite-difference verification of the analytic gradient.

The checker builds small random training instances (labeled batch, unlabeled
batch, teacher pseudo-labels), evaluates the analytic gradient of the
combined objective, and compares every coordinate against central finite
differences of the forward loss. The forward pass is shared; the backward
path under test is not.

Per-coordinate relative error uses a floor on the denominator:
|a - n| / max(|a|, |n|, 1e-2). Gradients here are O(0.1..10), so real
backprop mistakes land far above any tolerance, while finite-difference
noise (~1e-7 absolute at h=1e-5) stays orders of magnitude below it.
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
from .losses import LossConfig, total_loss, total_loss_grad
from .training import make_pseudo_labels

DEFAULT_TOLERANCE = 1e-4
_REL_ERR_FLOOR = 1e-2


def finite_difference_grad(loss_fn, params: ParamVector, h: float = 1e-5) -> ParamVector:
    """Central differences of ``loss_fn`` around ``params``, coordinate by coordinate."""
    base = params.values
    grad = np.zeros_like(base)
    for i in range(base.size):
        plus = base.copy()
        plus[i] += h
        minus = base.copy()
        minus[i] -= h
        grad[i] = (
            loss_fn(ParamVector(plus, params.layout))
            - loss_fn(ParamVector(minus, params.layout))
        ) / (2.0 * h)
    return ParamVector(grad, params.layout)


def relative_errors(analytic: ParamVector, numeric: ParamVector) -> np.ndarray:
    a = analytic.values
    n = numeric.values
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), _REL_ERR_FLOOR)
    return np.abs(a - n) / denom


@dataclass(frozen=True)
class GradCheckTrial:
    index: int
    n_params: int
    sigma: float
    lambda_: float
    max_rel_err: float
    max_abs_err: float

    def passed(self, tol: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_rel_err < tol


def _random_instance(trial: int, seed: int):
    rng = np.random.default_rng([seed, trial])
    dv, dt, hidden, embed = (int(d) for d in rng.integers(2, 9, size=4))
    n_frames = int(rng.integers(1, 5))
    enc_cfg = EncoderConfig(
        input_dim_video=dv, input_dim_text=dt, hidden_dim=hidden,
        embed_dim=embed, n_frames=n_frames, seed=int(rng.integers(0, 2**31)),
    )
    b = 4
    labeled_videos = [
        rng.standard_normal((int(rng.integers(1, 7)), dv)) for _ in range(b)
    ]
    labeled_texts = rng.standard_normal((b, dt))
    unlabeled_videos = [
        rng.standard_normal((int(rng.integers(1, 7)), dv)) for _ in range(b)
    ]
    unlabeled_texts = rng.standard_normal((b, dt))
    sigma = float(np.exp(rng.uniform(np.log(0.05), 0.0)))
    # Cycle the distillation weight through off, the working default, and random.
    lambda_ = (0.0, 0.999, float(rng.uniform(0.1, 2.0)))[trial % 3]
    cfg = LossConfig(sigma=sigma, lambda_=lambda_)
    params = init_params(enc_cfg)
    teacher = init_params(EncoderConfig(
        input_dim_video=dv, input_dim_text=dt, hidden_dim=hidden,
        embed_dim=embed, n_frames=n_frames, seed=int(rng.integers(0, 2**31)),
    ))
    pseudo = make_pseudo_labels(teacher, unlabeled_videos, unlabeled_texts, enc_cfg, sigma)
    return enc_cfg, cfg, params, labeled_videos, labeled_texts, unlabeled_videos, unlabeled_texts, pseudo


def run_trial(trial: int, seed: int, h: float = 1e-5) -> GradCheckTrial:
    (enc_cfg, cfg, params, lv, lt, uv, ut, pseudo) = _random_instance(trial, seed)

    def loss_fn(pv: ParamVector) -> float:
        # Forward-only evaluation; the backward path under test never runs here.
        labeled = EmbeddingBatch(
            encode_video_batch(pv, lv, enc_cfg), encode_text_batch(pv, lt, enc_cfg)
        )
        student_u = EmbeddingBatch(
            encode_video_batch(pv, uv, enc_cfg), encode_text_batch(pv, ut, enc_cfg)
        )
        return total_loss(labeled, student_u, pseudo, cfg)

    _, analytic = total_loss_grad(params, lv, lt, uv, ut, pseudo, cfg, enc_cfg)
    numeric = finite_difference_grad(loss_fn, params, h=h)
    errs = relative_errors(analytic, numeric)
    abs_err = np.abs(analytic.values - numeric.values)
    return GradCheckTrial(
        index=trial, n_params=params.n_params, sigma=cfg.sigma, lambda_=cfg.lambda_,
        max_rel_err=float(errs.max()), max_abs_err=float(abs_err.max()),
    )


def run_gradcheck(trials: int = 20, seed: int = 20240, h: float = 1e-5) -> list[GradCheckTrial]:
    """Random-instance gradient check; every trial should pass ``DEFAULT_TOLERANCE``."""
    return [run_trial(t, seed, h=h) for t in range(trials)]
