"""End-to-end command-line behavior: run directories, manifests, config
precedence, reproducibility, and the analysis CSV contracts."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from curriseq.cli import main

TINY_TRAIN = [
    "train",
    "--task", "synth-copy",
    "--synth-size", "30",
    "--synth-vocab", "6",
    "--synth-max-len", "6",
    "--dev-size", "10",
    "--embed-dim", "8",
    "--hidden-dim", "8",
    "--layers", "1",
    "--max-updates", "12",
    "--token-budget", "64",
    "--eval-interval", "6",
    "--warmup", "5",
    "--seed", "7",
]


def run_train(tmp_path, name, extra=()):
    out = tmp_path / name
    code = main(TINY_TRAIN + list(extra) + ["--out-dir", str(out)])
    assert code == 0
    return out


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestTrainCommand:
    def test_run_directory_contents(self, tmp_path):
        out = run_train(tmp_path, "run")
        assert (out / "manifest.json").exists()
        assert (out / "train_log.csv").exists()
        assert (out / "checkpoint_final.ckpt").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seed"] == 7
        assert manifest["finished"] is not None
        assert manifest["corpus_hashes"]["train"]
        rows = read_csv(out / "train_log.csv")
        assert rows[0] == ["step", "learning_rate", "train_loss", "dev_metric",
                           "unique_trigrams", "wall_time"]
        assert len(rows) == 3  # evals at steps 6 and 12

    def test_existing_run_dir_rejected(self, tmp_path):
        out = run_train(tmp_path, "run")
        code = main(TINY_TRAIN + ["--out-dir", str(out)])
        assert code != 0

    def test_soft_gamma_one_matches_baseline_checkpoint_hash(self, tmp_path):
        base = run_train(tmp_path, "base", ["--curriculum", "none"])
        soft = run_train(
            tmp_path, "soft",
            ["--curriculum", "tc-soft", "--gamma0", "1.0", "--curriculum-steps", "6"],
        )
        a = json.loads((base / "manifest.json").read_text())["final_checkpoint_sha256"]
        b = json.loads((soft / "manifest.json").read_text())["final_checkpoint_sha256"]
        assert a == b

    def test_subsample_hash_deterministic(self, tmp_path):
        extra = ["--subsample", "0.5"]
        a = run_train(tmp_path, "a", extra)
        b = run_train(tmp_path, "b", extra)
        ha = json.loads((a / "manifest.json").read_text())["corpus_hashes"]["train"]
        hb = json.loads((b / "manifest.json").read_text())["corpus_hashes"]["train"]
        assert ha == hb

    def test_train_log_reproducible_outside_wall_time(self, tmp_path):
        a = run_train(tmp_path, "a")
        b = run_train(tmp_path, "b")
        rows_a, rows_b = read_csv(a / "train_log.csv"), read_csv(b / "train_log.csv")
        strip = lambda rows: [r[:-1] for r in rows]  # wall_time is the last column
        assert strip(rows_a) == strip(rows_b)

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"train": {"max_updates": 9}, "seed": 3}))
        # strip the --seed and --max-updates flag pairs so the file can win
        base, skip = [], False
        for tok in TINY_TRAIN:
            if skip:
                skip = False
            elif tok in ("--seed", "--max-updates"):
                skip = True
            else:
                base.append(tok)
        out = tmp_path / "run"
        code = main(base + ["--config", str(cfg_file), "--out-dir", str(out)])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["train"]["max_updates"] == 9  # file beats default
        assert manifest["seed"] == 3
        out2 = tmp_path / "run2"
        code = main(
            base + ["--config", str(cfg_file), "--max-updates", "4", "--out-dir", str(out2)]
        )
        assert code == 0
        manifest2 = json.loads((out2 / "manifest.json").read_text())
        assert manifest2["config"]["train"]["max_updates"] == 4  # flag beats file

    def test_invalid_config_nonzero_exit(self, tmp_path, capsys):
        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"train": {"maximum_updates": 9}}))
        code = main(TINY_TRAIN + ["--config", str(cfg_file), "--out-dir", str(tmp_path / "x")])
        assert code != 0
        assert "train.maximum_updates" in capsys.readouterr().err

    def test_invalid_curriculum_value(self, tmp_path, capsys):
        code = main(TINY_TRAIN + ["--gamma0", "1.5", "--curriculum", "tc-soft",
                                  "--out-dir", str(tmp_path / "x")])
        assert code != 0
        assert "gamma0" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_memorized_pair_scores_100(self, tmp_path):
        out = tmp_path / "run"
        code = main([
            "train", "--task", "synth-copy", "--synth-size", "1", "--synth-vocab", "4",
            "--synth-max-len", "4", "--dev-size", "0", "--embed-dim", "6",
            "--hidden-dim", "12", "--layers", "1", "--max-updates", "1000",
            "--token-budget", "32", "--eval-interval", "0", "--warmup", "10",
            "--peak-lr", "0.01", "--label-smoothing", "0.0",
            "--seed", "0", "--out-dir", str(out),
        ])
        assert code == 0
        result = tmp_path / "eval.json"
        code = main([
            "evaluate", "--checkpoint", str(out / "checkpoint_final.ckpt"),
            "--task", "synth-copy", "--synth-size", "1", "--synth-vocab", "4",
            "--synth-max-len", "4", "--dev-size", "0", "--seed", "0",
            "--metric", "bleu", "--beam", "2", "--out", str(result),
        ])
        assert code == 0
        payload = json.loads(result.read_text())
        assert payload["value"] == pytest.approx(100.0)
        assert payload["sentences"][0]["hypothesis"] == payload["sentences"][0]["reference"]

    def test_beam_rerun_identical(self, tmp_path):
        out = run_train(tmp_path, "run")
        values = []
        for name in ("e1.json", "e2.json"):
            path = tmp_path / name
            code = main([
                "evaluate", "--checkpoint", str(out / "checkpoint_final.ckpt"),
                "--task", "synth-copy", "--synth-size", "30", "--synth-vocab", "6",
                "--synth-max-len", "6", "--dev-size", "0", "--seed", "7",
                "--metric", "bleu", "--beam", "1", "--bleu-smooth", "--out", str(path),
            ])
            assert code == 0
            values.append(json.loads(path.read_text())["value"])
        assert values[0] == values[1]

    def test_perplexity_metric(self, tmp_path):
        out = run_train(tmp_path, "run")
        result = tmp_path / "ppl.json"
        code = main([
            "evaluate", "--checkpoint", str(out / "checkpoint_final.ckpt"),
            "--task", "synth-copy", "--synth-size", "30", "--synth-vocab", "6",
            "--synth-max-len", "6", "--dev-size", "0", "--seed", "7",
            "--metric", "perplexity", "--out", str(result),
        ])
        assert code == 0
        assert json.loads(result.read_text())["value"] > 0

    def test_vocab_mismatch_errors(self, tmp_path, capsys):
        out = run_train(tmp_path, "run")
        code = main([
            "evaluate", "--checkpoint", str(out / "checkpoint_final.ckpt"),
            "--task", "synth-copy", "--synth-size", "500", "--synth-vocab", "11",
            "--synth-max-len", "6", "--dev-size", "0", "--seed", "19",
            "--metric", "bleu", "--out", str(tmp_path / "x.json"),
        ])
        assert code != 0
        assert "vocab" in capsys.readouterr().err.lower()


class TestScheduleDump:
    def test_hard_initial_row(self, tmp_path):
        out = tmp_path / "schedule.csv"
        code = main([
            "schedule-dump", "--curriculum", "tc-hard", "--length", "10",
            "--curriculum-steps", "100", "--step-stride", "100", "--out", str(out),
        ])
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["i", "t", "l", "weight"]
        first = [r for r in rows[1:] if r[0] == "0"]
        assert [float(r[3]) for r in first] == [1.0] + [0.0] * 9

    def test_soft_final_row_all_ones(self, tmp_path):
        out = tmp_path / "schedule.csv"
        main([
            "schedule-dump", "--curriculum", "tc-soft", "--length", "6",
            "--curriculum-steps", "40", "--step-stride", "10", "--out", str(out),
        ])
        rows = read_csv(out)
        last = [r for r in rows[1:] if r[0] == "40"]
        assert all(float(r[3]) == 1.0 for r in last)

    def test_soft_tail_weight_value(self, tmp_path):
        out = tmp_path / "schedule.csv"
        main([
            "schedule-dump", "--curriculum", "tc-soft", "--length", "30",
            "--curriculum-steps", "50", "--step-stride", "50", "--out", str(out),
        ])
        rows = read_csv(out)
        tail = [r for r in rows[1:] if r[0] == "0" and r[1] == "30"]
        assert float(tail[0][3]) == pytest.approx(0.7**25, rel=1e-12)

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["schedule-dump", "--curriculum", "tc-soft", "--length", "12",
                "--curriculum-steps", "64"]
        main(args + ["--out", str(a)])
        main(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


DIVERSITY_ARGS = [
    "analyze-diversity",
    "--task", "synth-copy", "--synth-size", "24", "--synth-vocab", "8",
    "--synth-max-len", "8", "--dev-size", "0",
    "--curriculum-steps", "16", "--token-budget", "64", "--seed", "5",
]


class TestAnalyzeDiversity:
    def test_horizon_zero_all_counts_zero(self, tmp_path):
        out = tmp_path / "d.csv"
        code = main(DIVERSITY_ARGS + ["--curriculum", "tc-hard", "--curriculum", "none",
                                      "--horizon-fraction", "0.0", "--out", str(out)])
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["step", "unique_trigrams", "method"]
        assert all(r[1] == "0" for r in rows[1:])

    def test_full_targets_dominate_prefixes(self, tmp_path):
        out = tmp_path / "d.csv"
        code = main(DIVERSITY_ARGS + ["--curriculum", "none", "--curriculum", "tc-hard",
                                      "--horizon-fraction", "1.0", "--out", str(out)])
        assert code == 0
        rows = read_csv(out)[1:]
        by_method = {}
        for step, count, method in rows:
            by_method.setdefault(method, {})[int(step)] = int(count)
        for step, count in by_method["tc-hard"].items():
            assert count <= by_method["none"][step]

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = DIVERSITY_ARGS + ["--curriculum", "tc-hard", "--horizon-fraction", "0.5"]
        main(args + ["--out", str(a)])
        main(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestAnalyzeErrors:
    def test_row_count_contract_and_perfect_model(self, tmp_path):
        run = tmp_path / "run"
        code = main([
            "train", "--task", "synth-copy", "--synth-size", "1", "--synth-vocab", "4",
            "--synth-max-len", "4", "--dev-size", "0", "--embed-dim", "6",
            "--hidden-dim", "12", "--layers", "1", "--max-updates", "1000",
            "--token-budget", "32", "--eval-interval", "0", "--warmup", "10",
            "--peak-lr", "0.01", "--label-smoothing", "0.0",
            "--seed", "0", "--out-dir", str(run),
        ])
        assert code == 0
        out = tmp_path / "errors"
        code = main([
            "analyze-errors", "--checkpoint", str(run / "checkpoint_final.ckpt"),
            "--task", "synth-copy", "--synth-size", "1", "--synth-vocab", "4",
            "--synth-max-len", "4", "--dev-size", "0", "--seed", "0",
            "--beam", "2", "--partitions", "4", "--length-filters", "1:,3:",
            "--out-dir", str(out),
        ])
        assert code == 0
        rows = read_csv(out / "errors_positional.csv")[1:]
        assert len(rows) == 4 * 2  # partitions x filters
        assert all(float(r[2]) == 0.0 for r in rows)
        tail = read_csv(out / "errors_tail.csv")[1:]
        assert len(tail) == 2
        assert all(float(r[1]) == 0.0 for r in tail)


class TestTuneLength:
    def _write_log(self, path, rows):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "dev_metric"])
            writer.writerows(rows)

    def test_monotone_bleu_log(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        self._write_log(log, [(100, 10.0), (200, 25.0), (300, 30.0)])
        assert main(["tune-length", "--log", str(log)]) == 0
        assert capsys.readouterr().out.strip() == "200"

    def test_constant_log(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        self._write_log(log, [(50, 4.0), (60, 4.0)])
        assert main(["tune-length", "--log", str(log)]) == 0
        assert capsys.readouterr().out.strip() == "50"

    def test_perplexity_mode(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        self._write_log(log, [(1, 100.0), (2, 60.0), (3, 40.0)])
        assert main(["tune-length", "--log", str(log), "--metric-mode", "lower"]) == 0
        assert capsys.readouterr().out.strip() == "3"

    def test_missing_column_nonzero(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        with open(log, "w", newline="") as f:
            csv.writer(f).writerows([["step", "loss"], [1, 2.0]])
        assert main(["tune-length", "--log", str(log)]) != 0
        assert "dev_metric" in capsys.readouterr().err


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "curriseq.cli", "--version"], capture_output=True, text=True
    )
    # -m invocation works regardless of PATH; the console script wraps main()
    assert proc.returncode == 0 or "curriseq" in proc.stdout + proc.stderr


class TestDecoderOnlyCli:
    def test_lm_train_and_perplexity_json(self, tmp_path):
        out = tmp_path / "lm"
        code = main([
            "train", "--task", "synth-copy", "--synth-size", "40", "--synth-vocab", "6",
            "--synth-max-len", "6", "--dev-size", "10", "--mode", "decoder-only",
            "--embed-dim", "8", "--hidden-dim", "10", "--layers", "1",
            "--max-updates", "15", "--token-budget", "64", "--eval-interval", "15",
            "--warmup", "5", "--dev-metric", "perplexity",
            "--seed", "4", "--out-dir", str(out),
        ])
        assert code == 0
        result = tmp_path / "ppl.json"
        code = main([
            "evaluate", "--checkpoint", str(out / "checkpoint_final.ckpt"),
            "--task", "synth-copy", "--synth-size", "40", "--synth-vocab", "6",
            "--synth-max-len", "6", "--dev-size", "0", "--seed", "4",
            "--metric", "perplexity", "--out", str(result),
        ])
        assert code == 0
        value = json.loads(result.read_text())["value"]
        assert value > 0.0 and np.isfinite(value)
