"""Zero-shot evaluation: prompt classification, retrieval metrics, diagnostics.

Classification embeds each class through one or more prompt templates,
averages the unit-norm template embeddings, renormalizes, and picks the class
with the highest dot product against the video embedding (ties broken by
ascending class index). Retrieval ranks use a pessimistic tie policy: gallery
items tied with the true item count as ranked ahead of it, so reported
metrics never flatter the model. The even-count median returns the lower
middle element, keeping median ranks integral.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, class_name_for, prompt_feature_fn
from .encoder import (
    EncoderConfig,
    ParamVector,
    encode_text_batch,
    encode_video,
    encode_video_batch,
)
from .errors import UsageError
from .numerics import as_matrix, l2_normalize_rows

DEFAULT_TEMPLATE = "a video of a person {c}"
RECALL_KS = (1, 5, 10)


@dataclass(frozen=True)
class PromptSet:
    """Prompt templates plus a per-(class, template) raw text-feature source."""

    templates: tuple[str, ...]
    classes: tuple[str, ...]
    features: Callable[[int, int], np.ndarray]  # (class_idx, template_idx) -> vector

    def __post_init__(self):
        if len(self.templates) < 1:
            raise UsageError("prompt set needs at least one template")
        if len(self.classes) < 2:
            raise UsageError("prompt set needs at least two classes")
        for t in self.templates:
            if t.count("{c}") != 1:
                raise UsageError(f"template {t!r} must contain the placeholder {{c}} exactly once")


def build_prompt_set(synth, templates: Sequence[str] = (DEFAULT_TEMPLATE,)) -> PromptSet:
    """Prompt set over a synthetic corpus's concept classes."""
    classes = tuple(class_name_for(k, synth.n_concepts) for k in range(synth.n_concepts))
    templates = tuple(templates)
    raw = prompt_feature_fn(synth)

    def features(class_idx: int, template_idx: int) -> np.ndarray:
        text = templates[template_idx].format(c=classes[class_idx])
        return raw(text, class_idx)

    return PromptSet(templates, classes, features)


def class_embeddings(params: ParamVector, prompts: PromptSet, enc_cfg: EncoderConfig) -> np.ndarray:
    """One unit-norm embedding per class: normalized mean of template embeddings."""
    rows = []
    n_templates = len(prompts.templates)
    for c in range(len(prompts.classes)):
        feats = np.stack([prompts.features(c, j) for j in range(n_templates)])
        z = encode_text_batch(params, feats, enc_cfg)
        rows.append(np.einsum("te->e", z) / n_templates)
    return l2_normalize_rows(np.stack(rows))


def ranked_classes(scores: np.ndarray) -> np.ndarray:
    """Row-wise class order, best first; exact ties keep ascending class index."""
    scores = as_matrix(scores, "class scores")
    return np.argsort(-scores, axis=1, kind="stable")


def classify_zero_shot(
    params: ParamVector, frames, prompts: PromptSet, enc_cfg: EncoderConfig, k: int
) -> list[str]:
    """Top-k class names for one video, by similarity to the class embeddings."""
    if not 1 <= k <= len(prompts.classes):
        raise UsageError(f"k must be in [1, {len(prompts.classes)}], got {k}")
    z = encode_video(params, frames, enc_cfg)
    cls = class_embeddings(params, prompts, enc_cfg)
    order = ranked_classes(np.einsum("ce,e->c", cls, z)[None, :])[0]
    return [prompts.classes[i] for i in order[:k]]


def topk_accuracy(predictions: Sequence[Sequence[int]], labels: Sequence[int], k: int) -> float:
    """Fraction of items whose label appears among the first k predictions."""
    if len(predictions) != len(labels):
        raise UsageError(f"{len(predictions)} prediction lists vs {len(labels)} labels")
    if k < 1:
        raise UsageError("k must be >= 1")
    hits = sum(1 for ranked, label in zip(predictions, labels) if label in list(ranked)[:k])
    return hits / len(labels)


@dataclass(eq=False)
class RankList:
    """Rank of the true gallery item for each query; 1 is best."""

    ranks: np.ndarray
    gallery_size: int

    def __post_init__(self):
        self.ranks = np.asarray(self.ranks, dtype=np.int64)
        if self.ranks.ndim != 1:
            raise UsageError("ranks must be a 1-D sequence")
        if self.ranks.size and (self.ranks.min() < 1 or self.ranks.max() > self.gallery_size):
            raise UsageError(
                f"ranks must lie in [1, {self.gallery_size}], "
                f"got [{self.ranks.min()}, {self.ranks.max()}]"
            )

    def __len__(self) -> int:
        return int(self.ranks.size)


def retrieval_ranks(query_emb, gallery_emb, true_index) -> RankList:
    """Rank of each query's true gallery item under dot-product similarity.

    Pessimistic ties: rank = 1 + #{g != true : sim(q, g) >= sim(q, true)}.
    """
    q = as_matrix(query_emb, "query embeddings")
    g = as_matrix(gallery_emb, "gallery embeddings")
    if g.shape[0] == 0:
        raise UsageError("gallery is empty")
    if q.shape[1] != g.shape[1]:
        raise UsageError(f"embedding dims differ: {q.shape[1]} vs {g.shape[1]}")
    true_index = np.asarray(true_index, dtype=np.int64)
    if true_index.shape != (q.shape[0],):
        raise UsageError("true_index must give one gallery index per query")
    if true_index.size and (true_index.min() < 0 or true_index.max() >= g.shape[0]):
        raise UsageError("true_index out of gallery range")
    sims = np.einsum("qe,ge->qg", q, g)
    s_true = sims[np.arange(q.shape[0]), true_index]
    ranks = np.einsum("qg->q", (sims >= s_true[:, None]).astype(np.int64))
    return RankList(ranks, gallery_size=int(g.shape[0]))


def recall_at_k(ranks: RankList, k: int) -> float:
    if k < 1:
        raise UsageError("k must be >= 1")
    if len(ranks) == 0:
        raise UsageError("empty rank list")
    return float(np.count_nonzero(ranks.ranks <= k)) / len(ranks)


def median_rank(ranks: RankList) -> int:
    """Median of the ranks; even counts return the lower middle element."""
    if len(ranks) == 0:
        raise UsageError("empty rank list")
    ordered = np.sort(ranks.ranks)
    return int(ordered[(len(ordered) - 1) // 2])


@dataclass(eq=False)
class EvalReport:
    """Metric bundle for one model on one corpus, plus per-query detail."""

    top1: float
    top5: float
    recall_at: dict[int, float]
    mdr: int
    per_class_acc: dict[str, float]
    per_class_count: dict[str, int]
    rank_list: RankList

    def __post_init__(self):
        fractions = [self.top1, self.top5, *self.recall_at.values(), *self.per_class_acc.values()]
        if any(not 0.0 <= f <= 1.0 for f in fractions):
            raise UsageError("report fractions must lie in [0, 1]")
        if self.top5 < self.top1:
            raise UsageError("top5 must be >= top1")
        ks = sorted(self.recall_at)
        if any(self.recall_at[a] > self.recall_at[b] for a, b in zip(ks, ks[1:])):
            raise UsageError("recall must be non-decreasing in k")
        if self.mdr < 1:
            raise UsageError("median rank must be >= 1")
        if set(self.per_class_acc) != set(self.per_class_count):
            raise UsageError("per-class accuracy and count keys must match")


def evaluate_model(
    params: ParamVector, corpus: Corpus, enc_cfg: EncoderConfig, prompts: PromptSet
) -> EvalReport:
    """Full zero-shot evaluation on the corpus eval split.

    Text-to-video retrieval over the aligned eval pairs plus prompt-based
    classification of the eval videos against the prompt classes.
    """
    videos, texts = corpus.paired("eval")
    if len(videos) == 0:
        raise UsageError("corpus has no eval pairs")
    gallery = encode_video_batch(params, videos, enc_cfg)
    queries = encode_text_batch(params, texts, enc_cfg)
    ranks = retrieval_ranks(queries, gallery, np.arange(len(videos)))
    recall = {k: recall_at_k(ranks, k) for k in RECALL_KS}
    mdr = median_rank(ranks)

    class_index = {name: i for i, name in enumerate(prompts.classes)}
    labels = []
    for rec in sorted(corpus.videos("eval"), key=lambda r: r.pair_index):
        if rec.class_name is None or rec.class_name not in class_index:
            raise UsageError(f"eval video {rec.id!r} has no usable class_name")
        labels.append(class_index[rec.class_name])
    cls_emb = class_embeddings(params, prompts, enc_cfg)
    order = ranked_classes(np.einsum("be,ce->bc", gallery, cls_emb))
    top1 = topk_accuracy(order, labels, 1)
    top5 = topk_accuracy(order, labels, min(5, len(prompts.classes)))

    per_acc: dict[str, float] = {}
    per_count: dict[str, int] = {}
    labels_arr = np.asarray(labels)
    for name, idx in class_index.items():
        mask = labels_arr == idx
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        per_acc[name] = float(np.count_nonzero(order[mask, 0] == idx)) / count
        per_count[name] = count

    return EvalReport(
        top1=top1, top5=top5, recall_at=recall, mdr=mdr,
        per_class_acc=per_acc, per_class_count=per_count, rank_list=ranks,
    )


def delta_table(
    acc_a: Mapping[str, float], acc_b: Mapping[str, float], limit: int | None = None
) -> list[tuple[str, float]]:
    """Per-class differences a - b, sorted descending (ties by class name).

    With ``limit``, keeps only the top and bottom ``limit`` rows, mirroring
    the largest-gains / largest-losses view.
    """
    if set(acc_a) != set(acc_b):
        raise UsageError("class sets differ between the two reports")
    rows = sorted(
        ((name, acc_a[name] - acc_b[name]) for name in acc_a),
        key=lambda kv: (-kv[1], kv[0]),
    )
    if limit is not None and 2 * limit < len(rows):
        rows = rows[:limit] + rows[-limit:]
    return rows


def per_class_delta(
    report_a: EvalReport, report_b: EvalReport, limit: int | None = None
) -> list[tuple[str, float]]:
    return delta_table(report_a.per_class_acc, report_b.per_class_acc, limit=limit)


def rank_distribution(ranks_a: RankList, ranks_b: RankList) -> np.ndarray:
    """(position, sorted rank of a, sorted rank of b) rows for plotting.

    Each model's ranks are sorted independently, so a curve below another
    means better ranks at every cutoff.
    """
    if len(ranks_a) != len(ranks_b):
        raise UsageError(f"query counts differ: {len(ranks_a)} vs {len(ranks_b)}")
    a = np.sort(ranks_a.ranks)
    b = np.sort(ranks_b.ranks)
    pos = np.arange(1, len(a) + 1, dtype=np.int64)
    return np.stack([pos, a, b], axis=1)


# --- report serialization -------------------------------------------------

SUMMARY_METRICS = ("top1", "top5", "r_at_1", "r_at_5", "r_at_10", "mdr")


def report_summary(report: EvalReport) -> dict:
    """Flat metric dict in the canonical column order."""
    return {
        "top1": report.top1,
        "top5": report.top5,
        "r_at_1": report.recall_at[1],
        "r_at_5": report.recall_at[5],
        "r_at_10": report.recall_at[10],
        "mdr": report.mdr,
    }


def report_table(report: EvalReport) -> str:
    """Human-readable tab-separated metric table."""
    lines = ["metric\tvalue"]
    for key, value in report_summary(report).items():
        lines.append(f"{key}\t{value!r}")
    lines.append(f"n_queries\t{len(report.rank_list)}")
    lines.append(f"gallery_size\t{report.rank_list.gallery_size}")
    return "\n".join(lines) + "\n"


def report_records(report: EvalReport) -> list[dict]:
    """Machine-readable line-delimited mirror of the full report."""
    records = [{
        "record": "summary",
        **report_summary(report),
        "n_queries": len(report.rank_list),
        "gallery_size": report.rank_list.gallery_size,
    }]
    for name in sorted(report.per_class_acc):
        records.append({
            "record": "per_class",
            "class": name,
            "accuracy": report.per_class_acc[name],
            "count": report.per_class_count[name],
        })
    records.append({
        "record": "ranks",
        "gallery_size": report.rank_list.gallery_size,
        "ranks": report.rank_list.ranks.tolist(),
    })
    return records


def report_jsonl(report: EvalReport) -> str:
    return "".join(json.dumps(rec) + "\n" for rec in report_records(report))


@dataclass(eq=False)
class ParsedReport:
    """Subset of an EvalReport recovered from its line-delimited mirror."""

    summary: dict
    per_class_acc: dict[str, float]
    per_class_count: dict[str, int]
    rank_list: RankList


def parse_report_records(lines) -> ParsedReport:
    summary = None
    per_acc: dict[str, float] = {}
    per_count: dict[str, int] = {}
    ranks = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UsageError(f"report line {lineno}: invalid JSON ({exc.msg})") from exc
        kind = payload.get("record")
        if kind == "summary":
            summary = payload
        elif kind == "per_class":
            per_acc[payload["class"]] = payload["accuracy"]
            per_count[payload["class"]] = payload["count"]
        elif kind == "ranks":
            ranks = RankList(np.asarray(payload["ranks"]), payload["gallery_size"])
    if summary is None or ranks is None:
        raise UsageError("report is missing its summary or ranks record")
    return ParsedReport(summary, per_acc, per_count, ranks)


def delta_tsv(rows: Sequence[tuple[str, float, float, float]]) -> str:
    lines = ["class\tacc_a\tacc_b\tdelta"]
    for name, a, b, d in rows:
        lines.append(f"{name}\t{a!r}\t{b!r}\t{d!r}")
    return "\n".join(lines) + "\n"


def rank_distribution_tsv(table: np.ndarray) -> str:
    lines = ["position\trank_a\trank_b"]
    for pos, ra, rb in table:
        lines.append(f"{pos}\t{ra}\t{rb}")
    return "\n".join(lines) + "\n"
