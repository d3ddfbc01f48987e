"""Command-line pipeline driver.

Subcommands cover corpus generation, teacher pretraining, student training,
weight fusion, alpha sweeps, zero-shot evaluation, diagnostic exports, and
gradient checking. Every option resolves as:

    command default < config file (key = value lines) < DFUSE_SEED (seed only) < flag

Each run that writes files also writes a ``<output>.manifest.json`` with the
resolved configuration and SHA-256 checksums of its inputs. Exit codes:
0 success, 1 usage error, 2 runtime or validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .checkpointio import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import Corpus, SynthConfig, gen_corpus, load_corpus
from .encoder import EncoderConfig
from .errors import DfuseError, UsageError, ValidationError
from .evaluation import (
    DEFAULT_TEMPLATE,
    SUMMARY_METRICS,
    EvalReport,
    build_prompt_set,
    delta_table,
    delta_tsv,
    evaluate_model,
    parse_report_records,
    rank_distribution,
    rank_distribution_tsv,
    report_jsonl,
    report_summary,
    report_table,
)
from .fileio import atomic_write_text, sha256_file
from .fusion import FusionConfig, fuse_weights, sweep_alpha
from .gradcheck import DEFAULT_TOLERANCE, run_gradcheck
from .losses import LossConfig
from .training import TrainConfig, pretrain_teacher, train_student, validation_loss

SEED_ENV_VAR = "DFUSE_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage problems are exit 1
        raise UsageError(message)


@dataclass(frozen=True)
class _Opt:
    name: str          # attribute / dict key (may end in _ to dodge keywords)
    kind: str          # int | float | str | bool
    default: object = None
    help: str = ""
    required: bool = False

    @property
    def key(self) -> str:
        return self.name.rstrip("_")

    @property
    def flag(self) -> str:
        return "--" + self.key.replace("_", "-")


def _convert(opt: _Opt, raw: str):
    try:
        if opt.kind == "int":
            return int(raw)
        if opt.kind == "float":
            return float(raw)
        if opt.kind == "bool":
            lowered = raw.strip().lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(f"expected true/false, got {raw!r}")
        return raw
    except ValueError as exc:
        raise UsageError(f"bad value for {opt.key}: {exc}") from exc


def _parse_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}: line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def _resolve(opts: list[_Opt], ns: argparse.Namespace) -> dict:
    values = {o.name: o.default for o in opts}
    by_key = {o.key: o for o in opts}
    file_vals: dict[str, str] = {}
    if ns.config is not None:
        file_vals = _parse_config_file(ns.config)
        for key, raw in file_vals.items():
            if key not in by_key:
                raise UsageError(f"unknown config key {key!r} for this command")
            values[by_key[key].name] = _convert(by_key[key], raw)
    if "seed" in by_key and getattr(ns, "seed") is None and "seed" not in file_vals:
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            values["seed"] = _convert(by_key["seed"], env)
    for o in opts:
        raw = getattr(ns, o.name)
        if raw is not None:
            values[o.name] = _convert(o, raw)
    for o in opts:
        if o.required and values[o.name] is None:
            raise UsageError(f"missing required option {o.flag}")
    values["config_file"] = ns.config
    return values


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _write_manifest(anchor: Path, command: str, values: dict, inputs: list[Path],
                    outputs: list[str]) -> None:
    payload = {
        "command": command,
        # user-facing keys: internal names may carry a keyword-dodging underscore
        "config": {k.rstrip("_"): v for k, v in sorted(values.items())},
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": outputs,
    }
    atomic_write_text(str(anchor) + ".manifest.json",
                      json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_corpus_for(enc_cfg: EncoderConfig, path: Path) -> Corpus:
    corpus = load_corpus(path)
    if corpus.synth.d_v != enc_cfg.input_dim_video or corpus.synth.d_t != enc_cfg.input_dim_text:
        raise UsageError(
            f"corpus feature dims ({corpus.synth.d_v}, {corpus.synth.d_t}) do not match "
            f"the checkpoint encoder ({enc_cfg.input_dim_video}, {enc_cfg.input_dim_text})"
        )
    return corpus


def _templates(values: dict) -> list[str]:
    return [t for t in values["templates"].split("|") if t]


def _parse_alphas(raw: str) -> list[float]:
    try:
        alphas = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad alpha list {raw!r}: {exc}") from exc
    if not alphas:
        raise UsageError("alpha list is empty")
    return alphas


# --- command implementations ----------------------------------------------

_ENC_OPTS = [
    _Opt("hidden_dim", "int", 32, "tower hidden width"),
    _Opt("embed_dim", "int", 16, "shared embedding dimension"),
    _Opt("n_frames", "int", 4, "frames sampled per video"),
]

_TRAIN_OPTS = [
    _Opt("batch_size_labeled", "int", 32, "labeled batch size"),
    _Opt("batch_size_unlabeled", "int", 32, "unlabeled batch size"),
    _Opt("eval_every", "int", 100, "validation cadence in steps"),
    _Opt("weight_decay", "float", 0.01, "AdamW decoupled weight decay"),
]


def _cmd_gen_corpus(values: dict) -> int:
    cfg = SynthConfig(
        n_concepts=values["n_concepts"], latent_dim=values["latent_dim"],
        d_v=values["d_v"], d_t=values["d_t"], frames_per_video=values["frames_per_video"],
        noise_sigma=values["noise_sigma"], concept_jitter=values["concept_jitter"],
        prompt_jitter=values["prompt_jitter"],
        video_domain_shift=values["video_domain_shift"],
        n_labeled_train=values["n_labeled_train"],
        n_labeled_val=values["n_labeled_val"], n_unlabeled=values["n_unlabeled"],
        n_eval=values["n_eval"], seed=values["seed"], identity_maps=values["identity_maps"],
    )
    out = Path(values["out"])
    corpus = gen_corpus(cfg, out)
    _write_manifest(out, "gen-corpus", values, [], [out.name])
    print(f"wrote {out} with {len(corpus.records)} records")
    return 0


def _cmd_pretrain_teacher(values: dict) -> int:
    corpus = load_corpus(_require_file(values["corpus"], "corpus file"))
    enc_cfg = EncoderConfig(
        input_dim_video=corpus.synth.d_v, input_dim_text=corpus.synth.d_t,
        hidden_dim=values["hidden_dim"], embed_dim=values["embed_dim"],
        n_frames=values["n_frames"], seed=values["seed"],
    )
    train_cfg = TrainConfig(
        lr=values["lr"], batch_size_labeled=values["batch_size_labeled"],
        batch_size_unlabeled=values["batch_size_unlabeled"],
        max_steps=values["max_steps"], eval_every=values["eval_every"],
        seed=values["seed"], weight_decay=values["weight_decay"],
    )
    params = pretrain_teacher(corpus, enc_cfg, train_cfg, sigma=values["sigma"], log=print)
    val_videos, val_texts = corpus.paired("labeled-val")
    final_val = validation_loss(params, val_videos, val_texts, enc_cfg, values["sigma"])
    out = Path(values["out"])
    save_checkpoint(out, Checkpoint(
        enc_cfg, LossConfig(sigma=values["sigma"], lambda_=0.0),
        params, step=train_cfg.max_steps, val_loss=final_val,
    ))
    _write_manifest(out, "pretrain-teacher", values, [Path(values["corpus"])], [out.name])
    print(f"wrote {out} (final val loss {final_val:.6f})")
    return 0


def _cmd_train_student(values: dict) -> int:
    teacher = load_checkpoint(_require_file(values["teacher"], "teacher checkpoint"))
    corpus = _load_corpus_for(teacher.enc_cfg, _require_file(values["corpus"], "corpus file"))
    loss_cfg = LossConfig(sigma=values["sigma"], lambda_=values["lambda_"])
    train_cfg = TrainConfig(
        lr=values["lr"], batch_size_labeled=values["batch_size_labeled"],
        batch_size_unlabeled=values["batch_size_unlabeled"],
        max_steps=values["max_steps"], eval_every=values["eval_every"],
        seed=values["seed"], weight_decay=values["weight_decay"],
        distill_on_labeled=values["distill_on_labeled"],
    )
    record = train_student(teacher.params, corpus, teacher.enc_cfg, loss_cfg, train_cfg, log=print)
    out = Path(values["out"])
    save_checkpoint(out, Checkpoint(
        teacher.enc_cfg, loss_cfg, record.params, record.step, record.val_loss,
    ))
    _write_manifest(out, "train-student", values,
                    [Path(values["teacher"]), Path(values["corpus"])], [out.name])
    print(f"wrote {out} (best step {record.step}, val loss {record.val_loss:.6f})")
    return 0


def _same_architecture(a: EncoderConfig, b: EncoderConfig) -> bool:
    return (
        a.input_dim_video == b.input_dim_video and a.input_dim_text == b.input_dim_text
        and a.hidden_dim == b.hidden_dim and a.embed_dim == b.embed_dim
        and a.n_frames == b.n_frames
    )


def _cmd_fuse(values: dict) -> int:
    teacher = load_checkpoint(_require_file(values["teacher"], "teacher checkpoint"))
    student = load_checkpoint(_require_file(values["student"], "student checkpoint"))
    if not _same_architecture(teacher.enc_cfg, student.enc_cfg):
        raise UsageError("teacher and student encoder architectures differ; cannot fuse")
    fused = fuse_weights(teacher.params, student.params, FusionConfig(alpha=values["alpha"]))
    out = Path(values["out"])
    # A fused model carries no validation history of its own.
    save_checkpoint(out, Checkpoint(
        teacher.enc_cfg, student.loss_cfg, fused, step=0, val_loss=float("nan"),
    ))
    _write_manifest(out, "fuse", values,
                    [Path(values["teacher"]), Path(values["student"])], [out.name])
    print(f"wrote {out} (alpha {values['alpha']})")
    return 0


def _metric_row(alpha: float, report: EvalReport) -> dict:
    return {"alpha": alpha, **report_summary(report)}


def _sweep_tsv(rows: list[dict]) -> str:
    lines = ["alpha\t" + "\t".join(SUMMARY_METRICS)]
    for row in rows:
        cells = [repr(row["alpha"])] + [repr(row[m]) for m in SUMMARY_METRICS]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _sweep_summary(rows: list[dict]) -> dict:
    by_alpha = {row["alpha"]: row for row in rows}
    best_alpha = {}
    interior = {}
    has_endpoints = 0.0 in by_alpha and 1.0 in by_alpha
    for metric in SUMMARY_METRICS:
        prefer_low = metric == "mdr"
        ordered = sorted(rows, key=lambda r: (r[metric] if prefer_low else -r[metric]))
        best_alpha[metric] = ordered[0]["alpha"]
        if has_endpoints:
            t_val, s_val = by_alpha[0.0][metric], by_alpha[1.0][metric]
            if prefer_low:
                interior[metric] = any(
                    r[metric] < min(t_val, s_val) for r in rows if r["alpha"] not in (0.0, 1.0)
                )
            else:
                interior[metric] = any(
                    r[metric] > max(t_val, s_val) for r in rows if r["alpha"] not in (0.0, 1.0)
                )
        else:
            interior[metric] = None
    return {
        "record": "summary",
        "alphas": [row["alpha"] for row in rows],
        "best_alpha": best_alpha,
        "interior_beats_endpoints": interior,
    }


def _impact_tsv(rows: list[dict], impact_alpha: float) -> str:
    by_alpha = {row["alpha"]: row for row in rows}
    teacher, student, fused = by_alpha[0.0], by_alpha[1.0], by_alpha[impact_alpha]
    lines = ["model\talpha\t" + "\t".join(SUMMARY_METRICS)]
    for label, row in (("teacher", teacher), ("student", student), ("fused", fused)):
        cells = [label, repr(row["alpha"])] + [repr(row[m]) for m in SUMMARY_METRICS]
        lines.append("\t".join(cells))
    delta_cells = ["delta", "-"] + [repr(fused[m] - teacher[m]) for m in SUMMARY_METRICS]
    lines.append("\t".join(delta_cells))
    return "\n".join(lines) + "\n"


def _cmd_sweep_alpha(values: dict) -> int:
    teacher = load_checkpoint(_require_file(values["teacher"], "teacher checkpoint"))
    student = load_checkpoint(_require_file(values["student"], "student checkpoint"))
    if not _same_architecture(teacher.enc_cfg, student.enc_cfg):
        raise UsageError("teacher and student encoder architectures differ; cannot fuse")
    corpus = _load_corpus_for(teacher.enc_cfg, _require_file(values["corpus"], "corpus file"))
    prompts = build_prompt_set(corpus.synth, _templates(values))
    alphas = _parse_alphas(values["alphas"])

    def evaluate(params):
        return evaluate_model(params, corpus, teacher.enc_cfg, prompts)

    rows = [_metric_row(a, rep) for a, rep in sweep_alpha(teacher.params, student.params, alphas, evaluate)]
    stem = Path(values["out"])
    outputs = [stem.name + ".tsv", stem.name + ".jsonl"]
    atomic_write_text(str(stem) + ".tsv", _sweep_tsv(rows))
    jsonl = "".join(json.dumps({"record": "alpha_row", **row}) + "\n" for row in rows)
    jsonl += json.dumps(_sweep_summary(rows)) + "\n"
    atomic_write_text(str(stem) + ".jsonl", jsonl)
    impact_alpha = values["impact_alpha"]
    if {0.0, 1.0, impact_alpha} <= set(r["alpha"] for r in rows):
        atomic_write_text(str(stem) + ".impact.tsv", _impact_tsv(rows, impact_alpha))
        outputs.append(stem.name + ".impact.tsv")
    _write_manifest(stem, "sweep-alpha", values,
                    [Path(values["teacher"]), Path(values["student"]), Path(values["corpus"])],
                    outputs)
    print(f"wrote {stem}.tsv with {len(rows)} rows")
    return 0


def _run_eval(values: dict, command: str, printed: tuple[str, ...]) -> int:
    ckpt = load_checkpoint(_require_file(values["ckpt"], "checkpoint"))
    corpus = _load_corpus_for(ckpt.enc_cfg, _require_file(values["corpus"], "corpus file"))
    prompts = build_prompt_set(corpus.synth, _templates(values))
    report = evaluate_model(ckpt.params, corpus, ckpt.enc_cfg, prompts)
    stem = Path(values["out"])
    atomic_write_text(str(stem) + ".tsv", report_table(report))
    atomic_write_text(str(stem) + ".jsonl", report_jsonl(report))
    _write_manifest(stem, command, values,
                    [Path(values["ckpt"]), Path(values["corpus"])],
                    [stem.name + ".tsv", stem.name + ".jsonl"])
    summary = report_summary(report)
    for metric in printed:
        print(f"{metric}\t{summary[metric]!r}")
    return 0


def _cmd_eval_retrieval(values: dict) -> int:
    return _run_eval(values, "eval-retrieval", ("r_at_1", "r_at_5", "r_at_10", "mdr"))


def _cmd_eval_classify(values: dict) -> int:
    return _run_eval(values, "eval-classify", ("top1", "top5"))


def _read_report(path) -> object:
    with open(_require_file(path, "report file"), "r", encoding="utf-8") as fh:
        return parse_report_records(fh)


def _cmd_report_class_delta(values: dict) -> int:
    a = _read_report(values["report_a"])
    b = _read_report(values["report_b"])
    limit = values["limit"] if values["limit"] > 0 else None
    rows = delta_table(a.per_class_acc, b.per_class_acc, limit=limit)
    table = [(name, a.per_class_acc[name], b.per_class_acc[name], d) for name, d in rows]
    out = Path(values["out"])
    atomic_write_text(out, delta_tsv(table))
    _write_manifest(out, "report-class-delta", values,
                    [Path(values["report_a"]), Path(values["report_b"])], [out.name])
    print(f"wrote {out} with {len(table)} rows")
    return 0


def _cmd_report_rank_dist(values: dict) -> int:
    a = _read_report(values["report_a"])
    b = _read_report(values["report_b"])
    table = rank_distribution(a.rank_list, b.rank_list)
    out = Path(values["out"])
    atomic_write_text(out, rank_distribution_tsv(table))
    _write_manifest(out, "report-rank-dist", values,
                    [Path(values["report_a"]), Path(values["report_b"])], [out.name])
    print(f"wrote {out} with {table.shape[0]} rows")
    return 0


def _cmd_gradcheck(values: dict) -> int:
    results = run_gradcheck(trials=values["trials"], seed=values["seed"])
    for r in results:
        status = "ok" if r.passed() else "FAIL"
        print(
            f"trial {r.index:02d}  params={r.n_params:4d}  sigma={r.sigma:.4f}  "
            f"lambda={r.lambda_:.4f}  max_rel_err={r.max_rel_err:.3e}  {status}"
        )
    worst = max(r.max_rel_err for r in results)
    failed = [r.index for r in results if not r.passed()]
    print(f"{len(results)} trials, worst relative error {worst:.3e}, tolerance {DEFAULT_TOLERANCE:.0e}")
    if failed:
        raise ValidationError(f"gradient check failed on trials {failed}")
    return 0


_COMMANDS: dict[str, tuple] = {
    "gen-corpus": (_cmd_gen_corpus, "generate a planted synthetic corpus", [
        _Opt("n_concepts", "int", 64, "number of latent concepts"),
        _Opt("latent_dim", "int", 16, "latent concept dimension"),
        _Opt("d_v", "int", 32, "video feature dimension"),
        _Opt("d_t", "int", 32, "text feature dimension"),
        _Opt("frames_per_video", "int", 8, "frames per video record"),
        _Opt("noise_sigma", "float", 0.05, "feature noise scale"),
        _Opt("concept_jitter", "float", 0.5, "per-pair latent offset norm"),
        _Opt("prompt_jitter", "float", 0.25, "per-prompt latent offset norm"),
        _Opt("video_domain_shift", "float", 0.4, "video-map rotation away from the base domain"),
        _Opt("n_labeled_train", "int", 512, "labeled training pairs"),
        _Opt("n_labeled_val", "int", 128, "labeled validation pairs"),
        _Opt("n_unlabeled", "int", 4096, "unlabeled videos and texts"),
        _Opt("n_eval", "int", 512, "held-out evaluation pairs"),
        _Opt("identity_maps", "bool", False, "use identity feature maps (debug)"),
        _Opt("seed", "int", 0, "generation seed"),
        _Opt("out", "str", None, "output corpus path", True),
    ]),
    "pretrain-teacher": (_cmd_pretrain_teacher, "contrastive pretraining on single-frame pairs", [
        *_ENC_OPTS,
        _Opt("lr", "float", 3e-3, "AdamW learning rate for pretraining"),
        _Opt("max_steps", "int", 1500, "optimization steps"),
        *_TRAIN_OPTS,
        _Opt("sigma", "float", 0.05, "softmax temperature"),
        _Opt("seed", "int", 0, "init and shuffling seed"),
        _Opt("corpus", "str", None, "single-frame corpus path", True),
        _Opt("out", "str", None, "output checkpoint path", True),
    ]),
    "train-student": (_cmd_train_student, "train a student from teacher init", [
        _Opt("sigma", "float", 0.05, "softmax temperature"),
        _Opt("lambda_", "float", 0.999, "distillation weight"),
        _Opt("lr", "float", 3e-5, "AdamW learning rate"),
        _Opt("max_steps", "int", 2000, "optimization steps"),
        *_TRAIN_OPTS,
        _Opt("distill_on_labeled", "bool", False, "also distill on labeled batches"),
        _Opt("seed", "int", 0, "shuffling seed"),
        _Opt("teacher", "str", None, "teacher checkpoint path", True),
        _Opt("corpus", "str", None, "video corpus path", True),
        _Opt("out", "str", None, "output checkpoint path", True),
    ]),
    "fuse": (_cmd_fuse, "blend teacher and student weights", [
        _Opt("alpha", "float", 0.4, "student weight in [0, 1]"),
        _Opt("teacher", "str", None, "teacher checkpoint path", True),
        _Opt("student", "str", None, "student checkpoint path", True),
        _Opt("out", "str", None, "output checkpoint path", True),
    ]),
    "sweep-alpha": (_cmd_sweep_alpha, "evaluate fused models across alphas", [
        _Opt("alphas", "str", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
             "comma-separated alpha values"),
        _Opt("impact_alpha", "float", 0.4, "alpha for the impact table"),
        _Opt("templates", "str", DEFAULT_TEMPLATE, "prompt templates, | separated"),
        _Opt("teacher", "str", None, "teacher checkpoint path", True),
        _Opt("student", "str", None, "student checkpoint path", True),
        _Opt("corpus", "str", None, "evaluation corpus path", True),
        _Opt("out", "str", None, "output stem", True),
    ]),
    "eval-retrieval": (_cmd_eval_retrieval, "text-to-video retrieval evaluation", [
        _Opt("templates", "str", DEFAULT_TEMPLATE, "prompt templates, | separated"),
        _Opt("ckpt", "str", None, "model checkpoint path", True),
        _Opt("corpus", "str", None, "evaluation corpus path", True),
        _Opt("out", "str", None, "output stem", True),
    ]),
    "eval-classify": (_cmd_eval_classify, "prompt-based zero-shot classification", [
        _Opt("templates", "str", DEFAULT_TEMPLATE, "prompt templates, | separated"),
        _Opt("ckpt", "str", None, "model checkpoint path", True),
        _Opt("corpus", "str", None, "evaluation corpus path", True),
        _Opt("out", "str", None, "output stem", True),
    ]),
    "report-class-delta": (_cmd_report_class_delta, "per-class accuracy differences", [
        _Opt("limit", "int", 0, "keep top/bottom N rows (0 = all)"),
        _Opt("report_a", "str", None, "first report .jsonl", True),
        _Opt("report_b", "str", None, "second report .jsonl", True),
        _Opt("out", "str", None, "output tsv path", True),
    ]),
    "report-rank-dist": (_cmd_report_rank_dist, "sorted rank distribution export", [
        _Opt("report_a", "str", None, "first report .jsonl", True),
        _Opt("report_b", "str", None, "second report .jsonl", True),
        _Opt("out", "str", None, "output tsv path", True),
    ]),
    "gradcheck": (_cmd_gradcheck, "finite-difference gradient verification", [
        _Opt("trials", "int", 20, "number of random instances"),
        _Opt("seed", "int", 20240, "instance seed"),
    ]),
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="dfuse", description="teacher-student dual-encoder pipeline")
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text, opts) in _COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="key = value config file")
        for o in opts:
            cmd.add_argument(o.flag, dest=o.name, default=None, metavar=o.kind.upper(),
                             help=o.help + (" (required)" if o.required else f" [{o.default}]"))
    return parser


def cli_dispatch(argv) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(list(argv))
        if ns.command is None:
            parser.print_usage(sys.stderr)
            return 1
        runner, _, opts = _COMMANDS[ns.command]
        return runner(_resolve(opts, ns))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


def main() -> int:
    return cli_dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
