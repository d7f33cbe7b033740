"""Command-line entry point: training, evaluation, schedule inspection,
curriculum-length tuning, and the diversity/error analyses.

Configuration precedence is command-line flags > JSON config file > built-in
defaults; the fully resolved configuration lands in the run manifest.  Every
command is reproducible given identical inputs and seed: CSV and JSON outputs
are byte-stable, with wall-clock values confined to the manifest and the
wall_time column of the training log.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__, analysis
from . import checkpoint as ckpt
from . import data as data_mod
from . import decoding, metrics
from . import model as model_mod
from . import trainer as trainer_mod
from .curriculum import Curriculum, CurriculumConfig, estimate_curriculum_length
from .data import EOS, RESERVED, ParallelCorpus, SamplePair, Vocab

SYNTH_TASKS = {"synth-copy": "copy", "synth-reverse": "reverse", "synth-digits": "digits-to-words"}


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "task": {
        "name": "synth-copy",
        "train_src": None,
        "train_tgt": None,
        "dev_src": None,
        "dev_tgt": None,
        "synth_size": 2000,
        "synth_vocab": 20,
        "synth_max_len": 12,
        "dev_size": 200,
        "max_length": 50,
        "min_freq": 1,
        "char_level": False,
        "subsample": None,
    },
    "model": {
        "embed_dim": 64,
        "hidden_dim": 64,
        "layers": 2,
        "mode": "encoder-decoder",
        "label_smoothing": 0.1,
        "dropout": 0.0,
        "max_len": 64,
    },
    "train": {
        "max_updates": 1000,
        "peak_lr": 5e-4,
        # Synthetic tasks scale warmup down by 20x unless set explicitly
        # (see README).
        "warmup": 8000,
        "token_budget": 4096,
        "eval_interval": 100,
        "weight_decay": 1e-4,
        "clip_norm": None,
        "checkpoint_interval": 0,
        "dev_metric": "accuracy",
    },
    "curriculum": {
        "variant": "none",
        "lambda0": 0.1,
        "gamma0": 0.7,
        "alpha0": 25.0,
        "total_updates": None,  # defaults to max_updates // 2
        "range_lo": 0.9,
        "range_hi": 1.0,
        "sc_c0": 0.01,
        "sc_total_updates": None,
        "sc_baby_steps": 4,
        "sc_method": "unc",
    },
    "seed": 0,
}

# (argparse dest, config section, key)
_FLAG_MAP = [
    ("task", "task", "name"),
    ("train_src", "task", "train_src"),
    ("train_tgt", "task", "train_tgt"),
    ("dev_src", "task", "dev_src"),
    ("dev_tgt", "task", "dev_tgt"),
    ("synth_size", "task", "synth_size"),
    ("synth_vocab", "task", "synth_vocab"),
    ("synth_max_len", "task", "synth_max_len"),
    ("dev_size", "task", "dev_size"),
    ("max_length", "task", "max_length"),
    ("min_freq", "task", "min_freq"),
    ("subsample", "task", "subsample"),
    ("embed_dim", "model", "embed_dim"),
    ("hidden_dim", "model", "hidden_dim"),
    ("layers", "model", "layers"),
    ("mode", "model", "mode"),
    ("label_smoothing", "model", "label_smoothing"),
    ("dropout", "model", "dropout"),
    ("max_len", "model", "max_len"),
    ("max_updates", "train", "max_updates"),
    ("peak_lr", "train", "peak_lr"),
    ("warmup", "train", "warmup"),
    ("token_budget", "train", "token_budget"),
    ("eval_interval", "train", "eval_interval"),
    ("weight_decay", "train", "weight_decay"),
    ("clip_norm", "train", "clip_norm"),
    ("checkpoint_interval", "train", "checkpoint_interval"),
    ("dev_metric", "train", "dev_metric"),
    ("curriculum", "curriculum", "variant"),
    ("lambda0", "curriculum", "lambda0"),
    ("gamma0", "curriculum", "gamma0"),
    ("alpha0", "curriculum", "alpha0"),
    ("curriculum_steps", "curriculum", "total_updates"),
    ("range_lo", "curriculum", "range_lo"),
    ("range_hi", "curriculum", "range_hi"),
    ("sc_c0", "curriculum", "sc_c0"),
    ("sc_steps", "curriculum", "sc_total_updates"),
    ("sc_baby_steps", "curriculum", "sc_baby_steps"),
    ("sc_method", "curriculum", "sc_method"),
    ("seed", None, "seed"),
]


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            loaded = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path}: invalid JSON ({e})") from e
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    for section, values in loaded.items():
        if section == "seed":
            continue
        if section not in DEFAULTS:
            raise ConfigError(f"config file {path}: unknown section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config file {path}: section {section!r} must be an object")
        for key in values:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"config file {path}: unknown key {section}.{key}")
    return loaded


def resolve_config(args) -> dict:
    """Apply precedence: flags > config file > defaults."""
    resolved = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        loaded = _load_config_file(args.config)
        for section, values in loaded.items():
            if section == "seed":
                resolved["seed"] = values
            else:
                resolved[section].update(values)
    for dest, section, key in _FLAG_MAP:
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest == "curriculum" and isinstance(value, list):
            continue  # repeatable form (analyze-diversity); applied per method
        if section is None:
            resolved[key] = value
        else:
            resolved[section][key] = value
    if getattr(args, "char_level", False):
        resolved["task"]["char_level"] = True

    # Documented scale-down of the reference warmup for synthetic tasks.
    if (
        resolved["task"]["name"] in SYNTH_TASKS
        and getattr(args, "warmup", None) is None
        and resolved["train"]["warmup"] == DEFAULTS["train"]["warmup"]
    ):
        resolved["train"]["warmup"] = DEFAULTS["train"]["warmup"] // 20
    if resolved["curriculum"]["total_updates"] is None:
        resolved["curriculum"]["total_updates"] = max(1, resolved["train"]["max_updates"] // 2)
    return resolved


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(json.dumps(resolved, sort_keys=True).encode()).hexdigest()[:12]


def _curriculum_config(resolved, seed) -> CurriculumConfig:
    c = resolved["curriculum"]
    return CurriculumConfig(
        variant=c["variant"],
        lambda0=c["lambda0"],
        gamma0=c["gamma0"],
        alpha0=c["alpha0"],
        total_updates=c["total_updates"],
        range_bounds=(c["range_lo"], c["range_hi"]),
        sc_c0=c["sc_c0"],
        sc_total_updates=c["sc_total_updates"],
        sc_baby_steps=c["sc_baby_steps"],
        sc_method=c["sc_method"],
        seed=seed,
    )


def build_corpora(resolved) -> tuple[ParallelCorpus, ParallelCorpus | None]:
    """Training and dev corpora per the task section; dev shares train vocab."""
    t = resolved["task"]
    seed = resolved["seed"]
    if t["name"] in SYNTH_TASKS:
        kind = SYNTH_TASKS[t["name"]]
        train = data_mod.synth_task(kind, t["synth_size"], t["synth_vocab"], t["synth_max_len"], seed)
        dev = None
        if t["dev_size"]:
            raw = data_mod.synth_task(kind, t["dev_size"], t["synth_vocab"], t["synth_max_len"], seed + 1)
            dev = reencode(raw, train.src_vocab, train.tgt_vocab)
    elif t["name"] == "files":
        if not t["train_src"] or not t["train_tgt"]:
            raise ConfigError("files task needs --train-src and --train-tgt")
        train = data_mod.load_parallel_corpus(
            t["train_src"], t["train_tgt"], t["max_length"], t["min_freq"], t["char_level"]
        )
        dev = None
        if t["dev_src"] and t["dev_tgt"]:
            raw = data_mod.load_parallel_corpus(
                t["dev_src"], t["dev_tgt"], t["max_length"], 1, t["char_level"]
            )
            dev = reencode(raw, train.src_vocab, train.tgt_vocab)
    else:
        raise ConfigError(f"unknown task {t['name']!r}")
    if t["subsample"] is not None:
        train = data_mod.subsample(train, t["subsample"], seed)
    return train, dev


def reencode(corpus: ParallelCorpus, src_vocab: Vocab, tgt_vocab: Vocab) -> ParallelCorpus:
    """Re-tokenize a corpus through different vocabularies (OOV becomes unk)."""
    pairs = [
        SamplePair(
            src_vocab.encode(corpus.src_vocab.decode(p.source)),
            tgt_vocab.encode(corpus.tgt_vocab.decode(p.target[:-1])) + [EOS],
        )
        for p in corpus.pairs
    ]
    return ParallelCorpus(pairs, src_vocab, tgt_vocab)


def _model_config(resolved, train_corpus) -> model_mod.ModelConfig:
    m = resolved["model"]
    return model_mod.ModelConfig(
        src_vocab=len(train_corpus.src_vocab),
        tgt_vocab=len(train_corpus.tgt_vocab),
        embed_dim=m["embed_dim"],
        hidden_dim=m["hidden_dim"],
        layers=m["layers"],
        mode=m["mode"],
        label_smoothing=m["label_smoothing"],
        dropout=m["dropout"],
        seed=resolved["seed"],
        max_len=m["max_len"],
    )


def _make_run_dir(out_dir, cfg_hash) -> Path:
    if out_dir:
        path = Path(out_dir)
    else:
        path = Path("runs") / f"{time.strftime('%Y%m%d-%H%M%S')}-{cfg_hash}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.mkdir(exist_ok=False)  # exclusive: concurrent runs must not collide
    return path


def _write_manifest(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    resolved = resolve_config(args)
    train_corpus, dev_corpus = build_corpora(resolved)
    cfg_hash = config_hash(resolved)
    run_dir = _make_run_dir(args.out_dir, cfg_hash)

    manifest = {
        "command": "train",
        "manifest_schema": 1,
        "toolkit_version": __version__,
        "seed": resolved["seed"],
        "config": resolved,
        "config_hash": cfg_hash,
        "corpus_hashes": {
            "train": train_corpus.content_hash(),
            "dev": dev_corpus.content_hash() if dev_corpus else None,
        },
        "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "finished": None,
    }
    _write_manifest(run_dir / "manifest.json", manifest)

    model_config = _model_config(resolved, train_corpus)
    tr = resolved["train"]
    train_config = trainer_mod.TrainConfig(
        max_updates=tr["max_updates"],
        curriculum=_curriculum_config(resolved, resolved["seed"]),
        peak_lr=tr["peak_lr"],
        warmup=tr["warmup"],
        token_budget=tr["token_budget"],
        eval_interval=tr["eval_interval"] if dev_corpus else 0,
        seed=resolved["seed"],
        weight_decay=tr["weight_decay"],
        clip_norm=tr["clip_norm"],
        checkpoint_dir=str(run_dir),
        checkpoint_interval=tr["checkpoint_interval"],
        dev_metric=tr["dev_metric"],
    )
    meta = {
        "src_vocab": train_corpus.src_vocab.id_to_token,
        "tgt_vocab": train_corpus.tgt_vocab.id_to_token,
        "task": resolved["task"]["name"],
    }
    try:
        result = trainer_mod.train(
            model_config, train_corpus, train_config, dev_corpus, checkpoint_meta=meta
        )
    except trainer_mod.TrainingDiverged as e:
        manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        manifest["diverged_at"] = e.step
        _write_manifest(run_dir / "manifest.json", manifest)
        print(f"error: {e}", file=sys.stderr)
        return 1

    _write_csv(
        run_dir / "train_log.csv",
        trainer_mod.TrainLogRecord.FIELDS,
        [r.row() for r in result.records],
    )
    final = run_dir / "checkpoint_final.ckpt"
    manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    manifest["final_checkpoint_sha256"] = ckpt.file_hash(final)
    _write_manifest(run_dir / "manifest.json", manifest)
    last = result.records[-1].dev_metric if result.records else float("nan")
    print(f"run dir: {run_dir}")
    print(f"final checkpoint: {final} sha256={manifest['final_checkpoint_sha256']}")
    print(f"updates: {result.state.update_count}  last dev {train_config.dev_metric}: {last}")
    return 0


def _corpus_for_checkpoint(args, config, meta) -> ParallelCorpus:
    """Rebuild an evaluation corpus tokenized with the checkpoint's vocab."""
    src_tokens, tgt_tokens = meta.get("src_vocab"), meta.get("tgt_vocab")
    if not src_tokens or not tgt_tokens:
        raise ConfigError("checkpoint carries no vocabulary metadata")
    if list(src_tokens[:4]) != list(RESERVED) or list(tgt_tokens[:4]) != list(RESERVED):
        raise ConfigError("checkpoint vocabulary is malformed")
    src_vocab, tgt_vocab = Vocab(src_tokens[4:]), Vocab(tgt_tokens[4:])
    resolved = resolve_config(args)
    t = resolved["task"]
    if t["name"] in SYNTH_TASKS:
        raw = data_mod.synth_task(
            SYNTH_TASKS[t["name"]],
            t["dev_size"] or t["synth_size"],
            t["synth_vocab"],
            t["synth_max_len"],
            resolved["seed"],
        )
        if (
            raw.src_vocab.id_to_token != src_vocab.id_to_token
            or raw.tgt_vocab.id_to_token != tgt_vocab.id_to_token
        ):
            raise ConfigError("synthetic task vocabulary does not match the checkpoint")
        return raw
    if t["name"] == "files":
        if not t["train_src"] or not t["train_tgt"]:
            raise ConfigError("files task needs --train-src and --train-tgt")
        raw = data_mod.load_parallel_corpus(
            t["train_src"], t["train_tgt"], t["max_length"], 1, t["char_level"]
        )
        return reencode(raw, src_vocab, tgt_vocab)
    raise ConfigError(f"unknown task {t['name']!r}")


def cmd_evaluate(args) -> int:
    config, params, _extra, meta = ckpt.load_checkpoint(args.checkpoint)
    corpus = _corpus_for_checkpoint(args, config, meta)
    tgt_vocab = Vocab(meta["tgt_vocab"][4:])
    references = [p.target[:-1] for p in corpus.pairs]

    if args.metric == "perplexity":
        value = metrics.perplexity(params, config, corpus.pairs)
        hypotheses = []
    else:
        hypotheses = decoding.translate_corpus(
            params,
            config,
            [p.source for p in corpus.pairs],
            args.beam,
            config.max_len,
            args.length_penalty,
        )
        if args.metric == "accuracy":
            value = metrics.token_accuracy(hypotheses, references)
        else:
            value = metrics.bleu(hypotheses, references, smooth=args.bleu_smooth)

    payload = {
        "metric": args.metric,
        "value": value,
        "beam": args.beam,
        "length_penalty": args.length_penalty,
        "checkpoint": str(args.checkpoint),
        "sentences": [
            {
                "hypothesis": " ".join(tgt_vocab.decode(hyp)),
                "reference": " ".join(tgt_vocab.decode(ref)),
            }
            for hyp, ref in zip(hypotheses, references)
        ],
    }
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"{args.metric}: {value}")
    return 0


def cmd_schedule_dump(args) -> int:
    resolved = resolve_config(args)
    cfg = _curriculum_config(resolved, resolved["seed"])
    if cfg.variant == "ablation-lowloss":
        raise ConfigError("schedule dump cannot evaluate the loss-based ablation")
    curriculum = Curriculum(cfg)
    total = cfg.total_updates
    stride = args.step_stride or max(1, total // 20)
    steps = sorted(set(range(0, total + 1, stride)) | {total})
    rows = []
    for i in steps:
        w = curriculum.weight_vector(args.length, i)
        rows.extend((i, t + 1, args.length, _fmt(w.weights[t])) for t in range(args.length))
    _write_csv(args.out, ("i", "t", "l", "weight"), rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_analyze_diversity(args) -> int:
    resolved = resolve_config(args)
    if not args.curriculum:
        raise ConfigError("need at least one --curriculum method")
    corpus, _ = build_corpora(resolved)
    total = resolved["curriculum"]["total_updates"]
    steps = int(args.horizon_fraction * total)
    rows = []
    for variant in args.curriculum:
        base = _curriculum_config(resolved, resolved["seed"])
        cfg = dataclasses.replace(base, variant=variant)
        trace = analysis.diversity_trace(
            corpus, cfg, steps, resolved["train"]["token_budget"], resolved["seed"]
        )
        rows.extend((step, count, variant) for step, count in trace)
    _write_csv(args.out, ("step", "unique_trigrams", "method"), rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_analyze_errors(args) -> int:
    config, params, _extra, meta = ckpt.load_checkpoint(args.checkpoint)
    corpus = _corpus_for_checkpoint(args, config, meta)
    filters = analysis.parse_length_filters(args.length_filters)
    positional_rows, tail_rows, _ = analysis.error_analysis(
        params,
        config,
        corpus.pairs,
        args.beam,
        args.length_penalty,
        args.partitions,
        filters,
        args.tail_fraction,
    )
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "errors_positional.csv",
        ("filter", "partition", "error_rate"),
        [(f, p, _fmt(r)) for f, p, r in positional_rows],
    )
    _write_csv(
        out_dir / "errors_tail.csv",
        ("filter", "tail_error_rate", "sentences"),
        [(f, _fmt(r), n) for f, r, n in tail_rows],
    )
    print(f"wrote {len(positional_rows)} positional rows to {out_dir}")
    return 0


def cmd_tune_length(args) -> int:
    with open(args.log, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or args.metric_column not in reader.fieldnames:
            raise ConfigError(f"log {args.log} has no {args.metric_column!r} column")
        history = [
            (int(row["step"]), float(row[args.metric_column]))
            for row in reader
        ]
    length = estimate_curriculum_length(history, args.target_fraction, args.metric_mode)
    print(length)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _corpus_flags(p):
    p.add_argument("--task", choices=list(SYNTH_TASKS) + ["files"], default=None)
    p.add_argument("--train-src", dest="train_src", default=None)
    p.add_argument("--train-tgt", dest="train_tgt", default=None)
    p.add_argument("--dev-src", dest="dev_src", default=None)
    p.add_argument("--dev-tgt", dest="dev_tgt", default=None)
    p.add_argument("--synth-size", dest="synth_size", type=int, default=None)
    p.add_argument("--synth-vocab", dest="synth_vocab", type=int, default=None)
    p.add_argument("--synth-max-len", dest="synth_max_len", type=int, default=None)
    p.add_argument("--dev-size", dest="dev_size", type=int, default=None)
    p.add_argument("--max-length", dest="max_length", type=int, default=None)
    p.add_argument("--min-freq", dest="min_freq", type=int, default=None)
    p.add_argument("--char-level", dest="char_level", action="store_true")
    p.add_argument("--subsample", type=float, default=None)


def _curriculum_flags(p, repeatable=False):
    if repeatable:
        p.add_argument("--curriculum", action="append", default=None)
    else:
        p.add_argument("--curriculum", default=None)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--gamma0", type=float, default=None)
    p.add_argument("--alpha0", type=float, default=None)
    p.add_argument("--curriculum-steps", dest="curriculum_steps", type=int, default=None)
    p.add_argument("--range-lo", dest="range_lo", type=float, default=None)
    p.add_argument("--range-hi", dest="range_hi", type=float, default=None)
    p.add_argument("--sc-c0", dest="sc_c0", type=float, default=None)
    p.add_argument("--sc-steps", dest="sc_steps", type=int, default=None)
    p.add_argument("--sc-baby-steps", dest="sc_baby_steps", type=int, default=None)
    p.add_argument("--sc-method", dest="sc_method", choices=("unc", "rsqrt"), default=None)


def _common_flags(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON config file")


def _model_train_flags(p):
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--mode", choices=("encoder-decoder", "decoder-only"), default=None)
    p.add_argument("--label-smoothing", dest="label_smoothing", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--max-len", dest="max_len", type=int, default=None)
    p.add_argument("--max-updates", dest="max_updates", type=int, default=None)
    p.add_argument("--peak-lr", dest="peak_lr", type=float, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--token-budget", dest="token_budget", type=int, default=None)
    p.add_argument("--eval-interval", dest="eval_interval", type=int, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--clip-norm", dest="clip_norm", type=float, default=None)
    p.add_argument("--checkpoint-interval", dest="checkpoint_interval", type=int, default=None)
    p.add_argument("--dev-metric", dest="dev_metric",
                   choices=("accuracy", "bleu", "perplexity"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curriseq",
        description="Token-wise curriculum training for tiny sequence models.",
    )
    parser.add_argument("--version", action="version", version=f"curriseq {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="train a model, writing a run directory")
    _corpus_flags(p)
    _curriculum_flags(p)
    _model_train_flags(p)
    _common_flags(p)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    _corpus_flags(p)
    _common_flags(p)
    p.add_argument("--metric", choices=("bleu", "perplexity", "accuracy"), default="bleu")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--length-penalty", dest="length_penalty", type=float, default=1.0)
    p.add_argument("--bleu-smooth", dest="bleu_smooth", action="store_true")
    p.add_argument("--out", default="eval.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule-dump", help="dump the (i, t) weight grid as CSV")
    _curriculum_flags(p)
    _common_flags(p)
    p.add_argument("--length", type=int, required=True, help="target sentence length")
    p.add_argument("--step-stride", dest="step_stride", type=int, default=None)
    p.add_argument("--out", default="schedule.csv")
    p.set_defaults(func=cmd_schedule_dump)

    p = sub.add_parser("analyze-diversity", help="unique-trigram growth per method")
    _corpus_flags(p)
    _curriculum_flags(p, repeatable=True)
    _model_train_flags(p)
    _common_flags(p)
    p.add_argument("--horizon-fraction", dest="horizon_fraction", type=float, default=0.25)
    p.add_argument("--out", default="diversity.csv")
    p.set_defaults(func=cmd_analyze_diversity)

    p = sub.add_parser("analyze-errors", help="positional/tail error rates of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _corpus_flags(p)
    _common_flags(p)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--length-penalty", dest="length_penalty", type=float, default=1.0)
    p.add_argument("--partitions", type=int, default=10)
    p.add_argument("--length-filters", dest="length_filters", default="1:")
    p.add_argument("--tail-fraction", dest="tail_fraction", type=float, default=0.2)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.set_defaults(func=cmd_analyze_errors)

    p = sub.add_parser("tune-length", help="estimate curriculum length from a baseline log")
    p.add_argument("--log", required=True)
    p.add_argument("--metric-column", dest="metric_column", default="dev_metric")
    p.add_argument("--metric-mode", dest="metric_mode", choices=("higher", "lower"),
                   default="higher")
    p.add_argument("--target-fraction", dest="target_fraction", type=float, default=0.7)
    p.set_defaults(func=cmd_tune_length)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
