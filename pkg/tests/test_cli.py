import json

import numpy as np
import pytest

from dfuse.checkpointio import load_checkpoint
from dfuse.cli import cli_dispatch
from dfuse.corpus import load_corpus
from dfuse.evaluation import parse_report_records
from dfuse.fileio import sha256_file

TINY_CORPUS_ARGS = [
    "--n-concepts", "4", "--latent-dim", "6", "--d-v", "8", "--d-t", "8",
    "--frames-per-video", "3", "--n-labeled-train", "24", "--n-labeled-val", "8",
    "--n-unlabeled", "16", "--n-eval", "16",
]


def gen_tiny_corpus(path, seed="5", extra=()):
    args = ["gen-corpus", *TINY_CORPUS_ARGS, "--out", str(path), *extra]
    if seed is not None:
        args += ["--seed", seed]
    assert cli_dispatch(args) == 0
    return path


class TestDispatchBasics:
    def test_unknown_subcommand(self, capsys):
        assert cli_dispatch(["frobnicate"]) == 1
        assert "invalid choice" in capsys.readouterr().err

    def test_no_subcommand(self, capsys):
        assert cli_dispatch([]) == 1

    def test_help_exits_zero(self, capsys):
        assert cli_dispatch(["--help"]) == 0
        assert "gen-corpus" in capsys.readouterr().out

    def test_missing_required_option(self, capsys):
        assert cli_dispatch(["gen-corpus"]) == 1
        assert "--out" in capsys.readouterr().err

    def test_missing_config_file_names_path(self, capsys, tmp_path):
        code = cli_dispatch(["gen-corpus", "--config", str(tmp_path / "nope.cfg")])
        assert code == 1
        assert str(tmp_path / "nope.cfg") in capsys.readouterr().err


class TestConfigResolution:
    def test_config_file_supplies_values(self, tmp_path):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text(
            "# corpus shape\n"
            "n_concepts = 4\nlatent_dim = 6\nd_v = 8\nd_t = 8\n"
            "frames_per_video = 3\nn_labeled_train = 24\nn_labeled_val = 8\n"
            "n_unlabeled = 16\nn_eval = 16\nseed = 5\n"
            f"out = {tmp_path / 'corpus.jsonl'}\n"
        )
        assert cli_dispatch(["gen-corpus", "--config", str(cfg)]) == 0
        corpus = load_corpus(tmp_path / "corpus.jsonl")
        assert corpus.synth.n_concepts == 4 and corpus.synth.seed == 5

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("seed = 5\n")
        a = gen_tiny_corpus(tmp_path / "a.jsonl", seed="5")
        args = ["gen-corpus", *TINY_CORPUS_ARGS, "--config", str(cfg),
                "--seed", "9", "--out", str(tmp_path / "b.jsonl")]
        assert cli_dispatch(args) == 0
        assert load_corpus(tmp_path / "b.jsonl").synth.seed == 9
        assert sha256_file(a) != sha256_file(tmp_path / "b.jsonl")

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("mystery_knob = 3\n")
        assert cli_dispatch(["gen-corpus", "--config", str(cfg), "--out", "x"]) == 1
        assert "mystery_knob" in capsys.readouterr().err

    def test_malformed_config_line(self, tmp_path, capsys):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("seed 5\n")
        assert cli_dispatch(["gen-corpus", "--config", str(cfg), "--out", "x"]) == 1
        assert "line 1" in capsys.readouterr().err

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DFUSE_SEED", "21")
        implicit = gen_tiny_corpus(tmp_path / "env.jsonl", seed=None)

        monkeypatch.delenv("DFUSE_SEED")
        explicit = gen_tiny_corpus(tmp_path / "flag.jsonl", seed="21")
        assert sha256_file(implicit) == sha256_file(explicit)

    def test_flag_beats_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DFUSE_SEED", "21")
        path = gen_tiny_corpus(tmp_path / "c.jsonl", seed="5")
        assert load_corpus(path).synth.seed == 5

    def test_bad_typed_value(self, capsys):
        assert cli_dispatch(["gen-corpus", "--seed", "not-a-number", "--out", "x"]) == 1
        assert "seed" in capsys.readouterr().err


@pytest.fixture(scope="module")
def mini_pipeline(tmp_path_factory):
    """End-to-end CLI run at miniature scale; shared by the CLI tests."""
    root = tmp_path_factory.mktemp("mini")
    images = root / "images.jsonl"
    videos = root / "videos.jsonl"
    args = ["gen-corpus", *TINY_CORPUS_ARGS, "--frames-per-video", "1",
            "--video-domain-shift", "0", "--n-labeled-train", "48",
            "--n-unlabeled", "0", "--seed", "5", "--out", str(images)]
    assert cli_dispatch(args) == 0
    gen_tiny_corpus(videos, seed="5")
    assert cli_dispatch([
        "pretrain-teacher", "--corpus", str(images), "--hidden-dim", "10",
        "--embed-dim", "6", "--lr", "1e-2", "--max-steps", "30",
        "--batch-size-labeled", "8", "--batch-size-unlabeled", "8",
        "--eval-every", "10", "--seed", "5", "--out", str(root / "teacher.ckpt"),
    ]) == 0
    assert cli_dispatch([
        "train-student", "--teacher", str(root / "teacher.ckpt"),
        "--corpus", str(videos), "--max-steps", "20", "--eval-every", "5",
        "--batch-size-labeled", "4", "--batch-size-unlabeled", "4",
        "--lr", "1e-3", "--seed", "5", "--out", str(root / "student.ckpt"),
    ]) == 0
    return root, images, videos


class TestPipelineCommands:
    def test_manifests_written_with_checksums(self, mini_pipeline):
        root, images, videos = mini_pipeline
        manifest = json.loads((root / "teacher.ckpt.manifest.json").read_text())
        assert manifest["command"] == "pretrain-teacher"
        assert manifest["inputs"][str(images)] == sha256_file(images)
        assert manifest["outputs"] == ["teacher.ckpt"]
        assert manifest["config"]["seed"] == 5

    def test_student_checkpoint_loads(self, mini_pipeline):
        root, _, _ = mini_pipeline
        ckpt = load_checkpoint(root / "student.ckpt")
        assert ckpt.loss_cfg.lambda_ == 0.999
        assert np.isfinite(ckpt.val_loss)

    def test_fuse_endpoints_through_cli(self, mini_pipeline):
        root, _, videos = mini_pipeline
        for alpha, reference in (("0", "teacher.ckpt"), ("1", "student.ckpt")):
            fused_path = root / f"fused{alpha}.ckpt"
            assert cli_dispatch([
                "fuse", "--teacher", str(root / "teacher.ckpt"),
                "--student", str(root / "student.ckpt"),
                "--alpha", alpha, "--out", str(fused_path),
            ]) == 0
            assert cli_dispatch([
                "eval-retrieval", "--ckpt", str(fused_path), "--corpus", str(videos),
                "--out", str(root / f"rep_fused{alpha}"),
            ]) == 0
            assert cli_dispatch([
                "eval-retrieval", "--ckpt", str(root / reference), "--corpus", str(videos),
                "--out", str(root / f"rep_{reference.split('.')[0]}"),
            ]) == 0
            fused_rep = (root / f"rep_fused{alpha}.jsonl").read_bytes()
            ref_rep = (root / f"rep_{reference.split('.')[0]}.jsonl").read_bytes()
            assert fused_rep == ref_rep

    def test_fuse_alpha_out_of_range(self, mini_pipeline, capsys):
        root, _, _ = mini_pipeline
        code = cli_dispatch([
            "fuse", "--teacher", str(root / "teacher.ckpt"),
            "--student", str(root / "student.ckpt"),
            "--alpha", "1.5", "--out", str(root / "bad.ckpt"),
        ])
        assert code == 1

    def test_eval_classify_and_reports(self, mini_pipeline):
        root, _, videos = mini_pipeline
        assert cli_dispatch([
            "eval-classify", "--ckpt", str(root / "teacher.ckpt"),
            "--corpus", str(videos), "--out", str(root / "cls_teacher"),
        ]) == 0
        assert cli_dispatch([
            "eval-classify", "--ckpt", str(root / "student.ckpt"),
            "--corpus", str(videos), "--out", str(root / "cls_student"),
        ]) == 0
        with open(root / "cls_teacher.jsonl") as fh:
            parsed = parse_report_records(fh)
        assert parsed.summary["top5"] >= parsed.summary["top1"]

        assert cli_dispatch([
            "report-class-delta", "--report-a", str(root / "cls_student.jsonl"),
            "--report-b", str(root / "cls_teacher.jsonl"),
            "--out", str(root / "delta.tsv"),
        ]) == 0
        lines = (root / "delta.tsv").read_text().strip().split("\n")
        assert lines[0] == "class\tacc_a\tacc_b\tdelta"
        assert len(lines) == 5  # 4 classes

        assert cli_dispatch([
            "report-rank-dist", "--report-a", str(root / "cls_student.jsonl"),
            "--report-b", str(root / "cls_teacher.jsonl"),
            "--out", str(root / "dist.tsv"),
        ]) == 0
        rows = (root / "dist.tsv").read_text().strip().split("\n")[1:]
        ranks_a = [int(r.split("\t")[1]) for r in rows]
        assert ranks_a == sorted(ranks_a)

    def test_sweep_alpha_outputs(self, mini_pipeline):
        root, _, videos = mini_pipeline
        assert cli_dispatch([
            "sweep-alpha", "--teacher", str(root / "teacher.ckpt"),
            "--student", str(root / "student.ckpt"), "--corpus", str(videos),
            "--alphas", "0,0.4,1.0", "--out", str(root / "sweep"),
        ]) == 0
        lines = (root / "sweep.tsv").read_text().strip().split("\n")
        assert lines[0].startswith("alpha\ttop1")
        assert len(lines) == 4
        records = [json.loads(l) for l in (root / "sweep.jsonl").read_text().splitlines()]
        assert records[-1]["record"] == "summary"
        assert "interior_beats_endpoints" in records[-1]
        impact = (root / "sweep.impact.tsv").read_text().strip().split("\n")
        assert [row.split("\t")[0] for row in impact] == \
            ["model", "teacher", "student", "fused", "delta"]

    def test_corrupted_checkpoint_is_runtime_failure(self, mini_pipeline, capsys):
        root, _, videos = mini_pipeline
        bad = root / "corrupt.ckpt"
        data = bytearray((root / "teacher.ckpt").read_bytes())
        data[-10] ^= 0xFF
        bad.write_bytes(bytes(data))
        code = cli_dispatch([
            "eval-retrieval", "--ckpt", str(bad), "--corpus", str(videos),
            "--out", str(root / "rep_bad"),
        ])
        assert code == 2
        assert "checksum" in capsys.readouterr().err

    def test_missing_corpus_is_usage_error(self, mini_pipeline, capsys):
        root, _, _ = mini_pipeline
        code = cli_dispatch([
            "eval-retrieval", "--ckpt", str(root / "teacher.ckpt"),
            "--corpus", str(root / "missing.jsonl"), "--out", str(root / "rep"),
        ])
        assert code == 1

    def test_dimension_mismatch_is_usage_error(self, mini_pipeline, tmp_path, capsys):
        root, _, _ = mini_pipeline
        other_corpus = tmp_path / "other.jsonl"
        args = ["gen-corpus", "--n-concepts", "4", "--latent-dim", "6",
                "--d-v", "9", "--d-t", "9", "--n-labeled-train", "8",
                "--n-labeled-val", "4", "--n-unlabeled", "0", "--n-eval", "8",
                "--seed", "5", "--out", str(other_corpus)]
        assert cli_dispatch(args) == 0
        code = cli_dispatch([
            "eval-retrieval", "--ckpt", str(root / "teacher.ckpt"),
            "--corpus", str(other_corpus), "--out", str(root / "rep_dim"),
        ])
        assert code == 1
        assert "dims" in capsys.readouterr().err


class TestGradcheckCommand:
    def test_small_run_passes(self, capsys):
        assert cli_dispatch(["gradcheck", "--trials", "3", "--seed", "2"]) == 0
        out = capsys.readouterr().out
        assert out.count("ok") == 3

    def test_failure_is_runtime_error(self, monkeypatch, capsys):
        import dfuse.cli as cli
        from dfuse.gradcheck import GradCheckTrial

        fake = [GradCheckTrial(index=0, n_params=10, sigma=0.1, lambda_=0.5,
                               max_rel_err=0.5, max_abs_err=0.5)]
        monkeypatch.setattr(cli, "run_gradcheck", lambda **kw: fake)
        assert cli_dispatch(["gradcheck", "--trials", "1"]) == 2
        assert "failed" in capsys.readouterr().err


class TestAuxiliaryOutputs:
    def test_delta_limit_truncates(self, mini_pipeline):
        root, _, _ = mini_pipeline
        assert cli_dispatch([
            "report-class-delta", "--report-a", str(root / "cls_student.jsonl"),
            "--report-b", str(root / "cls_teacher.jsonl"), "--limit", "1",
            "--out", str(root / "delta_limited.tsv"),
        ]) == 0
        lines = (root / "delta_limited.tsv").read_text().strip().split("\n")
        assert len(lines) == 3  # header + top 1 + bottom 1

    def test_every_writing_command_leaves_a_manifest(self, mini_pipeline):
        root, images, videos = mini_pipeline
        for anchor in (images, videos, root / "teacher.ckpt", root / "student.ckpt"):
            manifest = anchor.parent / (anchor.name + ".manifest.json")
            assert manifest.is_file()
            payload = json.loads(manifest.read_text())
            assert set(payload) == {"command", "config", "inputs", "outputs"}


class TestModuleEntryPoint:
    def test_python_dash_m(self):
        import subprocess
        import sys

        proc = subprocess.run(
            [sys.executable, "-m", "dfuse", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "gen-corpus" in proc.stdout

    def test_console_script(self):
        import shutil
        import subprocess

        exe = shutil.which("dfuse")
        if exe is None:
            pytest.skip("console script not on PATH")
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
