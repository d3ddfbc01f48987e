"""Dual-encoder model: frame sampling, two small projection towers, pooling.

Each tower is affine -> tanh -> affine. Videos pass a fixed number of
uniformly sampled frames through the video tower, mean-pool the per-frame
outputs, and L2-normalize; texts are single feature vectors through the text
tower. Teacher and student share this architecture, so their flat parameter
vectors always have identical layouts (the prerequisite for weight fusion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateEmbeddingError, UsageError
from .numerics import ZERO_NORM_THRESHOLD, row_norms


@dataclass(frozen=True)
class EncoderConfig:
    input_dim_video: int
    input_dim_text: int
    hidden_dim: int
    embed_dim: int
    n_frames: int = 4  # uniform temporal samples per video
    seed: int = 0

    def __post_init__(self):
        for field in ("input_dim_video", "input_dim_text", "hidden_dim", "embed_dim", "n_frames"):
            if int(getattr(self, field)) < 1:
                raise UsageError(f"EncoderConfig.{field} must be >= 1")


@dataclass(eq=False)
class ParamVector:
    """All encoder weights as one flat float64 array plus a named layout.

    Treated as immutable by every consumer; call ``copy()`` before mutating.
    """

    values: np.ndarray
    layout: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        total = sum(int(np.prod(shape)) for _, shape in self.layout)
        if total != self.values.size:
            raise UsageError(
                f"layout declares {total} values but {self.values.size} were given"
            )
        offsets = {}
        pos = 0
        for name, shape in self.layout:
            size = int(np.prod(shape))
            offsets[name] = (pos, tuple(shape))
            pos += size
        self._offsets = offsets

    def tensor(self, name: str) -> np.ndarray:
        """View of one named tensor, reshaped; shares memory with ``values``."""
        try:
            pos, shape = self._offsets[name]
        except KeyError:
            raise UsageError(f"no tensor named {name!r} in layout") from None
        size = int(np.prod(shape))
        return self.values[pos:pos + size].reshape(shape)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def same_layout(self, other: "ParamVector") -> bool:
        return self.layout == other.layout

    @property
    def n_params(self) -> int:
        return int(self.values.size)


def _tensor_specs(cfg: EncoderConfig):
    # (name, shape, fan_in); fan_in drives the init bound for weight and bias.
    return (
        ("video.w1", (cfg.hidden_dim, cfg.input_dim_video), cfg.input_dim_video),
        ("video.b1", (cfg.hidden_dim,), cfg.input_dim_video),
        ("video.w2", (cfg.embed_dim, cfg.hidden_dim), cfg.hidden_dim),
        ("video.b2", (cfg.embed_dim,), cfg.hidden_dim),
        ("text.w1", (cfg.hidden_dim, cfg.input_dim_text), cfg.input_dim_text),
        ("text.b1", (cfg.hidden_dim,), cfg.input_dim_text),
        ("text.w2", (cfg.embed_dim, cfg.hidden_dim), cfg.hidden_dim),
        ("text.b2", (cfg.embed_dim,), cfg.hidden_dim),
    )


def param_layout(cfg: EncoderConfig) -> tuple[tuple[str, tuple[int, ...]], ...]:
    return tuple((name, shape) for name, shape, _ in _tensor_specs(cfg))


def init_params(cfg: EncoderConfig) -> ParamVector:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor."""
    rng = np.random.default_rng(cfg.seed)
    chunks = []
    for _, shape, fan_in in _tensor_specs(cfg):
        bound = 1.0 / math.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=int(np.prod(shape))))
    return ParamVector(np.concatenate(chunks), param_layout(cfg))


def sample_frame_indices(t: int, n: int) -> np.ndarray:
    """Centers of n equal temporal segments: index_i = floor((i + 0.5) * t / n).

    Indices repeat when t < n, so short clips are still usable.
    """
    if t < 1 or n < 1:
        raise UsageError(f"frame sampling needs t >= 1 and n >= 1, got t={t}, n={n}")
    # Integer form of floor((i + 0.5) * t / n); exact, no float rounding.
    return np.array([((2 * i + 1) * t) // (2 * n) for i in range(n)], dtype=np.intp)


class TowerCache(NamedTuple):
    """Forward-pass intermediates needed by analytic backprop."""

    x: np.ndarray       # tower input rows
    h: np.ndarray       # tanh activations
    pooled: np.ndarray  # pre-normalization embeddings (pooled for video)
    norms: np.ndarray
    z: np.ndarray       # unit-norm embeddings


def _affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,kj->ik", x, w, optimize=False) + b


def _tower_apply(params: ParamVector, prefix: str, x: np.ndarray):
    h = np.tanh(_affine(x, params.tensor(prefix + ".w1"), params.tensor(prefix + ".b1")))
    u = _affine(h, params.tensor(prefix + ".w2"), params.tensor(prefix + ".b2"))
    return u, h


def _normalize_with_cache(x, h, pooled) -> TowerCache:
    norms = row_norms(pooled)
    bad = np.flatnonzero(norms < ZERO_NORM_THRESHOLD)
    if bad.size:
        raise DegenerateEmbeddingError(
            f"pooled embedding {int(bad[0])} has norm {norms[bad[0]]:.3e}"
        )
    return TowerCache(x, h, pooled, norms, pooled / norms[:, None])


def _check_stack(stack, dim: int, index: int) -> np.ndarray:
    arr = np.asarray(stack, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise UsageError(f"frame stack {index} must be (T, dim) with T >= 1")
    if arr.shape[1] != dim:
        raise UsageError(
            f"frame stack {index} has dim {arr.shape[1]}, encoder expects {dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"frame stack {index} contains non-finite entries")
    return arr


def video_forward(params: ParamVector, stacks: Sequence, cfg: EncoderConfig) -> TowerCache:
    """Encode a batch of frame stacks; returns embeddings plus backprop cache."""
    if len(stacks) == 0:
        raise UsageError("empty video batch")
    selected = []
    for i, stack in enumerate(stacks):
        arr = _check_stack(stack, cfg.input_dim_video, i)
        idx = sample_frame_indices(arr.shape[0], cfg.n_frames)
        selected.append(arr[idx])
    frames = np.concatenate(selected, axis=0)  # (B * n_frames, d_v)
    u, h = _tower_apply(params, "video", frames)
    b = len(stacks)
    pooled = np.einsum("bne->be", u.reshape(b, cfg.n_frames, cfg.embed_dim)) / cfg.n_frames
    return _normalize_with_cache(frames, h, pooled)


def text_forward(params: ParamVector, features, cfg: EncoderConfig) -> TowerCache:
    """Encode a batch of raw text feature vectors; returns embeddings plus cache."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] < 1:
        raise UsageError("text batch must be (B, dim) with B >= 1")
    if x.shape[1] != cfg.input_dim_text:
        raise UsageError(
            f"text features have dim {x.shape[1]}, encoder expects {cfg.input_dim_text}"
        )
    if not np.all(np.isfinite(x)):
        raise UsageError("text features contain non-finite entries")
    u, h = _tower_apply(params, "text", x)
    return _normalize_with_cache(x, h, u)


def encode_video(params: ParamVector, frames, cfg: EncoderConfig) -> np.ndarray:
    """Unit-norm embedding of one video (a (T, input_dim_video) frame stack)."""
    return video_forward(params, [frames], cfg).z[0]


def encode_text(params: ParamVector, feature, cfg: EncoderConfig) -> np.ndarray:
    """Unit-norm embedding of one raw text feature vector."""
    return text_forward(params, np.asarray(feature, dtype=np.float64)[None, :], cfg).z[0]


def encode_video_batch(params: ParamVector, stacks: Sequence, cfg: EncoderConfig) -> np.ndarray:
    return video_forward(params, stacks, cfg).z


def encode_text_batch(params: ParamVector, features, cfg: EncoderConfig) -> np.ndarray:
    return text_forward(params, features, cfg).z


@dataclass(eq=False)
class EmbeddingBatch:
    """Paired unit-norm embeddings; row i of z_v corresponds to row i of z_t."""

    z_v: np.ndarray
    z_t: np.ndarray

    def __post_init__(self):
        self.z_v = np.asarray(self.z_v, dtype=np.float64)
        self.z_t = np.asarray(self.z_t, dtype=np.float64)
        if self.z_v.ndim != 2 or self.z_t.ndim != 2:
            raise UsageError("embedding batches must be 2-D")
        if self.z_v.shape[0] != self.z_t.shape[0]:
            raise UsageError(
                f"batch size mismatch: {self.z_v.shape[0]} videos vs {self.z_t.shape[0]} texts"
            )
        for name, m in (("z_v", self.z_v), ("z_t", self.z_t)):
            if not np.all(np.isfinite(m)):
                raise UsageError(f"{name} contains non-finite entries")
            if m.shape[0] and np.max(np.abs(row_norms(m) - 1.0)) > 1e-6:
                raise UsageError(f"{name} rows are not unit-norm")

    @property
    def batch_size(self) -> int:
        return int(self.z_v.shape[0])
