"""Synthetic corpora with planted video-text correspondence.

Every record derives from one of ``n_concepts`` unit latent concept vectors.
A paired video and text share a per-pair latent (the concept plus a small
jitter, renormalized), then pass through fixed random linear maps into the
video and text feature spaces with i.i.d. gaussian feature noise. The jitter
makes the true counterpart of a query identifiable among same-concept
records, which is what retrieval measures; the concept id is the class label
for zero-shot classification.

All randomness is keyed by (seed, stream, index), so two corpora generated
with the same seed share their concepts and feature maps regardless of split
sizes or frames per video. That is how a single-frame pretraining corpus and
a multi-frame video corpus end up in the same planted world.

File format: JSON Lines. The first line is a header carrying the full
generation config; each further line is one record with inline feature
arrays. Floats round-trip exactly through ``repr``.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass
from io import StringIO
from pathlib import Path

import numpy as np

from .errors import CorpusFormatError, CorpusRecordError, UsageError
from .fileio import atomic_write_text

SPLITS = ("labeled-train", "labeled-val", "unlabeled", "eval")
PAIRED_SPLITS = ("labeled-train", "labeled-val", "eval")
FORMAT_TAG = "dfuse-corpus-v1"

_STREAM_CONCEPTS = 0
_STREAM_MAP_VIDEO = 1
_STREAM_MAP_TEXT = 2
_STREAM_PAIR = 3
_STREAM_UNLABELED_VIDEO = 4
_STREAM_UNLABELED_TEXT = 5
_STREAM_PROMPT = 6
_STREAM_MAP_VIDEO_SHIFT = 7


@dataclass(frozen=True)
class SynthConfig:
    n_concepts: int = 64
    latent_dim: int = 16
    d_v: int = 32
    d_t: int = 32
    frames_per_video: int = 8
    noise_sigma: float = 0.05     # feature noise scale
    concept_jitter: float = 0.5   # expected norm of the per-pair latent offset
    prompt_jitter: float = 0.25   # expected norm of the per-prompt latent offset
    video_domain_shift: float = 0.4  # rotates the video feature map away from the shared base
    n_labeled_train: int = 512
    n_labeled_val: int = 128
    n_unlabeled: int = 4096
    n_eval: int = 512
    seed: int = 0
    identity_maps: bool = False   # debug: feature maps = identity (needs d_v = d_t = latent_dim)

    def __post_init__(self):
        if self.n_concepts < 2:
            raise UsageError("n_concepts must be >= 2")
        for field in ("latent_dim", "d_v", "d_t", "frames_per_video"):
            if int(getattr(self, field)) < 1:
                raise UsageError(f"SynthConfig.{field} must be >= 1")
        for field in ("noise_sigma", "concept_jitter", "prompt_jitter", "video_domain_shift"):
            if getattr(self, field) < 0:
                raise UsageError(f"SynthConfig.{field} must be >= 0")
        for field in ("n_labeled_train", "n_labeled_val", "n_unlabeled", "n_eval"):
            if int(getattr(self, field)) < 0:
                raise UsageError(f"SynthConfig.{field} must be >= 0")
        if self.identity_maps and not (self.d_v == self.d_t == self.latent_dim):
            raise UsageError("identity_maps requires d_v = d_t = latent_dim")
        if self.identity_maps and self.video_domain_shift != 0.0:
            raise UsageError("identity_maps is incompatible with a video domain shift")


@dataclass(eq=False)
class CorpusRecord:
    id: str
    kind: str    # "video" | "text"
    split: str
    concept_id: int
    features: np.ndarray  # video: (T, d_v); text: (d_t,)
    class_name: str | None = None
    pair_index: int | None = None


def class_name_for(concept_id: int, n_concepts: int) -> str:
    width = len(str(n_concepts - 1))
    return f"concept_{concept_id:0{width}d}"


def _unit(v: np.ndarray) -> np.ndarray:
    return v / math.sqrt(float(np.einsum("i,i->", v, v)))


def concept_vectors(cfg: SynthConfig) -> np.ndarray:
    """Unit-norm latent anchors, one per concept; depend only on the seed."""
    rng = np.random.default_rng([cfg.seed, _STREAM_CONCEPTS])
    raw = rng.standard_normal((cfg.n_concepts, cfg.latent_dim))
    norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
    return raw / norms[:, None]


def video_feature_map(cfg: SynthConfig) -> np.ndarray:
    """Latent-to-video-feature map; seeded by (seed, stream) only.

    ``video_domain_shift`` blends in an independent map (variance preserved),
    moving the video domain away from the shared base while leaving concepts
    and the text map untouched. A model pretrained at shift 0 sees these
    videos as out-of-domain.
    """
    if cfg.identity_maps:
        return np.eye(cfg.d_v)
    rng = np.random.default_rng([cfg.seed, _STREAM_MAP_VIDEO])
    base = rng.standard_normal((cfg.d_v, cfg.latent_dim)) / math.sqrt(cfg.latent_dim)
    s = cfg.video_domain_shift
    if s == 0.0:
        return base
    shift_rng = np.random.default_rng([cfg.seed, _STREAM_MAP_VIDEO_SHIFT])
    other = shift_rng.standard_normal((cfg.d_v, cfg.latent_dim)) / math.sqrt(cfg.latent_dim)
    return (base + s * other) / math.sqrt(1.0 + s * s)


def text_feature_map(cfg: SynthConfig) -> np.ndarray:
    if cfg.identity_maps:
        return np.eye(cfg.d_t)
    rng = np.random.default_rng([cfg.seed, _STREAM_MAP_TEXT])
    return rng.standard_normal((cfg.d_t, cfg.latent_dim)) / math.sqrt(cfg.latent_dim)


def _jittered_latent(base: np.ndarray, scale: float, rng: np.random.Generator) -> np.ndarray:
    offset = rng.standard_normal(base.shape[0]) * (scale / math.sqrt(base.shape[0]))
    return _unit(base + offset)


def _video_features(latent, a_v, cfg, rng) -> np.ndarray:
    base = np.einsum("ij,j->i", a_v, latent)
    noise = rng.standard_normal((cfg.frames_per_video, cfg.d_v)) * cfg.noise_sigma
    return base[None, :] + noise


def _text_features(latent, a_t, cfg, rng) -> np.ndarray:
    base = np.einsum("ij,j->i", a_t, latent)
    return base + rng.standard_normal(cfg.d_t) * cfg.noise_sigma


def build_corpus(cfg: SynthConfig) -> "Corpus":
    """Generate all records in memory, deterministically from the seed."""
    concepts = concept_vectors(cfg)
    a_v = video_feature_map(cfg)
    a_t = text_feature_map(cfg)
    records: list[CorpusRecord] = []

    paired_counts = {
        "labeled-train": cfg.n_labeled_train,
        "labeled-val": cfg.n_labeled_val,
        "eval": cfg.n_eval,
    }
    for split_idx, split in enumerate(PAIRED_SPLITS):
        for i in range(paired_counts[split]):
            concept = i % cfg.n_concepts
            rng = np.random.default_rng([cfg.seed, _STREAM_PAIR, split_idx, i])
            latent = _jittered_latent(concepts[concept], cfg.concept_jitter, rng)
            video = _video_features(latent, a_v, cfg, rng)
            text = _text_features(latent, a_t, cfg, rng)
            cls = class_name_for(concept, cfg.n_concepts) if split == "eval" else None
            records.append(CorpusRecord(
                id=f"vid-{split}-{i:05d}", kind="video", split=split,
                concept_id=concept, features=video, class_name=cls, pair_index=i,
            ))
            records.append(CorpusRecord(
                id=f"txt-{split}-{i:05d}", kind="text", split=split,
                concept_id=concept, features=text, pair_index=i,
            ))

    for i in range(cfg.n_unlabeled):
        concept = i % cfg.n_concepts
        rng = np.random.default_rng([cfg.seed, _STREAM_UNLABELED_VIDEO, i])
        latent = _jittered_latent(concepts[concept], cfg.concept_jitter, rng)
        records.append(CorpusRecord(
            id=f"vid-unlabeled-{i:05d}", kind="video", split="unlabeled",
            concept_id=concept, features=_video_features(latent, a_v, cfg, rng),
        ))
    for i in range(cfg.n_unlabeled):
        concept = i % cfg.n_concepts
        rng = np.random.default_rng([cfg.seed, _STREAM_UNLABELED_TEXT, i])
        latent = _jittered_latent(concepts[concept], cfg.concept_jitter, rng)
        records.append(CorpusRecord(
            id=f"txt-unlabeled-{i:05d}", kind="text", split="unlabeled",
            concept_id=concept, features=_text_features(latent, a_t, cfg, rng),
        ))
    return Corpus(cfg, records)


def corpus_to_jsonl(corpus: "Corpus") -> str:
    out = StringIO()
    header = {"record": "header", "format": FORMAT_TAG, "synth": asdict(corpus.synth)}
    out.write(json.dumps(header) + "\n")
    for rec in corpus.records:
        payload = {
            "record": "item",
            "id": rec.id,
            "kind": rec.kind,
            "split": rec.split,
            "concept_id": rec.concept_id,
            "pair_index": rec.pair_index,
            "class_name": rec.class_name,
            "features": rec.features.tolist(),
        }
        out.write(json.dumps(payload) + "\n")
    return out.getvalue()


def gen_corpus(cfg: SynthConfig, path) -> "Corpus":
    """Generate and write a corpus file; returns the in-memory corpus."""
    corpus = build_corpus(cfg)
    atomic_write_text(path, corpus_to_jsonl(corpus))
    return corpus


class Corpus:
    """Loaded corpus: generation config plus validated records, indexed by split."""

    def __init__(self, synth: SynthConfig, records: list[CorpusRecord]):
        self.synth = synth
        self.records = records
        self._by_split: dict[str, dict[str, list[CorpusRecord]]] = {
            split: {"video": [], "text": []} for split in SPLITS
        }
        for rec in records:
            self._by_split[rec.split][rec.kind].append(rec)
        self._pairs: dict[str, tuple[list[np.ndarray], np.ndarray]] = {}

    def videos(self, split: str) -> list[CorpusRecord]:
        self._check_split(split)
        return self._by_split[split]["video"]

    def texts(self, split: str) -> list[CorpusRecord]:
        self._check_split(split)
        return self._by_split[split]["text"]

    def paired(self, split: str):
        """Aligned (video stacks, text feature matrix) ordered by pair index."""
        if split not in PAIRED_SPLITS:
            raise UsageError(f"split {split!r} holds no aligned pairs")
        if split not in self._pairs:
            vids = sorted(self.videos(split), key=lambda r: r.pair_index)
            txts = sorted(self.texts(split), key=lambda r: r.pair_index)
            stacks = [r.features for r in vids]
            texts = (
                np.stack([r.features for r in txts])
                if txts else np.zeros((0, self.synth.d_t))
            )
            self._pairs[split] = (stacks, texts)
        return self._pairs[split]

    def unpaired(self, split: str):
        """(video stacks, text feature matrix) with no alignment between them."""
        self._check_split(split)
        stacks = [r.features for r in self.videos(split)]
        txts = self.texts(split)
        texts = np.stack([r.features for r in txts]) if txts else np.zeros((0, self.synth.d_t))
        return stacks, texts

    def _check_split(self, split: str) -> None:
        if split not in SPLITS:
            raise UsageError(f"unknown split {split!r}; expected one of {SPLITS}")


def _validate_record(rec: CorpusRecord, synth: SynthConfig) -> None:
    if rec.kind not in ("video", "text"):
        raise CorpusRecordError(f"record {rec.id!r}: unknown kind {rec.kind!r}")
    if rec.split not in SPLITS:
        raise CorpusRecordError(f"record {rec.id!r}: unknown split {rec.split!r}")
    if rec.concept_id < 0:
        raise CorpusRecordError(f"record {rec.id!r}: negative concept_id")
    if not np.all(np.isfinite(rec.features)):
        raise CorpusRecordError(f"record {rec.id!r}: non-finite features")
    if rec.kind == "video":
        if rec.features.ndim != 2 or rec.features.shape[0] < 1:
            raise CorpusRecordError(f"record {rec.id!r}: video features must be (T, d_v), T >= 1")
        if rec.features.shape[1] != synth.d_v:
            raise CorpusRecordError(
                f"record {rec.id!r}: video feature dim {rec.features.shape[1]} != d_v {synth.d_v}"
            )
    else:
        if rec.features.ndim != 1 or rec.features.shape[0] != synth.d_t:
            raise CorpusRecordError(
                f"record {rec.id!r}: text features must be a d_t={synth.d_t} vector"
            )
    if rec.split in PAIRED_SPLITS and rec.pair_index is None:
        raise CorpusRecordError(f"record {rec.id!r}: paired split needs a pair_index")


def _validate_pairing(corpus: Corpus) -> None:
    for split in PAIRED_SPLITS:
        videos = {r.pair_index: r for r in corpus.videos(split)}
        texts = {r.pair_index: r for r in corpus.texts(split)}
        if len(videos) != len(corpus.videos(split)) or len(texts) != len(corpus.texts(split)):
            raise CorpusRecordError(f"split {split!r}: duplicate pair_index")
        if videos.keys() != texts.keys():
            raise CorpusRecordError(f"split {split!r}: unmatched video/text pair indices")
        for idx, vid in videos.items():
            if vid.concept_id != texts[idx].concept_id:
                raise CorpusRecordError(
                    f"pair {idx} in split {split!r}: concept mismatch "
                    f"({vid.id!r} vs {texts[idx].id!r})"
                )


def load_corpus(path) -> Corpus:
    """Parse and validate a corpus file.

    Parse failures name the line; invariant violations name the record id.
    """
    path = Path(path)
    records: list[CorpusRecord] = []
    synth = None
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if synth is None:
                if payload.get("record") != "header" or payload.get("format") != FORMAT_TAG:
                    raise CorpusFormatError(f"{path}: line {lineno}: missing corpus header")
                try:
                    synth = SynthConfig(**payload["synth"])
                except (TypeError, KeyError, UsageError) as exc:
                    raise CorpusFormatError(
                        f"{path}: line {lineno}: bad generation config: {exc}"
                    ) from exc
                continue
            if payload.get("record") != "item":
                raise CorpusFormatError(f"{path}: line {lineno}: expected an item record")
            try:
                rec = CorpusRecord(
                    id=payload["id"],
                    kind=payload["kind"],
                    split=payload["split"],
                    concept_id=int(payload["concept_id"]),
                    features=np.asarray(payload["features"], dtype=np.float64),
                    class_name=payload.get("class_name"),
                    pair_index=payload.get("pair_index"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: malformed record: {exc}") from exc
            if rec.id in seen_ids:
                raise CorpusRecordError(f"record {rec.id!r}: duplicate id")
            seen_ids.add(rec.id)
            _validate_record(rec, synth)
            records.append(rec)
    if synth is None:
        raise CorpusFormatError(f"{path}: line 1: empty file, missing corpus header")
    corpus = Corpus(synth, records)
    _validate_pairing(corpus)
    return corpus


def prompt_feature_fn(synth: SynthConfig):
    """Factory for the class-prompt feature generator.

    Desk-scale stand-in for a text pipeline: the latent of a formatted prompt
    is the class concept nudged by a jitter keyed on the prompt wording, then
    mapped into text-feature space. Deterministic in (seed, prompt text,
    class).
    """
    concepts = concept_vectors(synth)
    a_t = text_feature_map(synth)

    def feature(prompt_text: str, class_idx: int) -> np.ndarray:
        if not 0 <= class_idx < synth.n_concepts:
            raise UsageError(f"class index {class_idx} out of range")
        text_key = zlib.crc32(prompt_text.encode("utf-8"))
        rng = np.random.default_rng([synth.seed, _STREAM_PROMPT, text_key, class_idx])
        latent = _jittered_latent(concepts[class_idx], synth.prompt_jitter, rng)
        return np.einsum("ij,j->i", a_t, latent)

    return feature


def prompt_feature(synth: SynthConfig, prompt_text: str, class_idx: int) -> np.ndarray:
    return prompt_feature_fn(synth)(prompt_text, class_idx)
