"""The optimization loop: Adam with inverse-square-root warmup, per-step
curriculum weight injection, divergence guarding, checkpointing, and metric
logging.

The curriculum step index passed to the weight functions is the optimizer
update count: it starts at 0 and increments once per batch.  Sentence-level
selections are refreshed at epoch boundaries (an epoch is one pass over the
currently selected subset).
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import model as model_mod
from .checkpoint import save_checkpoint
from .curriculum import Curriculum, CurriculumConfig
from .data import ParallelCorpus, batch_by_tokens
from .decoding import greedy_decode_corpus
from .metrics import DiversityCounter, bleu, perplexity, token_accuracy
from .model import ModelConfig

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Loss was non-finite for several consecutive steps."""

    def __init__(self, step, checkpoint_path=None):
        self.step = step
        self.checkpoint_path = checkpoint_path
        where = f"; last good checkpoint at {checkpoint_path}" if checkpoint_path else ""
        super().__init__(f"training diverged at step {step}{where}")


class OptimizerError(RuntimeError):
    """Non-finite gradient reached the optimizer."""


@dataclass
class TrainConfig:
    max_updates: int
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    peak_lr: float = 5e-4
    warmup: int = 8000
    token_budget: int = 4096
    eval_interval: int = 0
    seed: int = 0
    weight_decay: float = 1e-4
    adam_eps: float = 1e-8
    clip_norm: float | None = None
    checkpoint_dir: str | None = None
    checkpoint_interval: int = 0
    dev_metric: str = "accuracy"  # accuracy | bleu | perplexity

    def __post_init__(self):
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")
        if self.peak_lr <= 0:
            raise ValueError("peak learning rate must be positive")
        if self.max_updates < 1:
            raise ValueError("max_updates must be >= 1")
        if self.dev_metric not in ("accuracy", "bleu", "perplexity"):
            raise ValueError(f"unknown dev metric {self.dev_metric!r}")


@dataclass
class TrainLogRecord:
    step: int
    learning_rate: float
    train_loss: float  # mean weighted loss since the previous record
    dev_metric: float
    unique_trigrams: int
    wall_time: float

    FIELDS = ("step", "learning_rate", "train_loss", "dev_metric", "unique_trigrams", "wall_time")

    def row(self):
        return [self.step, repr(self.learning_rate), repr(self.train_loss),
                repr(self.dev_metric), self.unique_trigrams, f"{self.wall_time:.3f}"]


def lr_schedule(step: int, warmup: int, peak: float) -> float:
    """Linear warmup to ``peak``, then inverse-square-root decay."""
    if step < 1:
        raise ValueError("step must be >= 1")
    if step <= warmup:
        return peak * step / warmup
    return peak * math.sqrt(warmup / step)


@dataclass
class AdamState:
    """First/second moment estimates with beta = (0.9, 0.98)."""

    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8

    @classmethod
    def init(cls, params, eps: float = 1e-8) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t.data) for k, t in params.items()},
            v={k: np.zeros_like(t.data) for k, t in params.items()},
            eps=eps,
        )


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0) -> None:
    """Bias-corrected Adam update with decoupled weight decay, in place."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, tensor in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for tensor {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if weight_decay:
            update = update + weight_decay * tensor.data
        tensor.data = tensor.data - lr * update


@dataclass
class TrainerState:
    """Everything needed to resume a run bit-identically (dropout off)."""

    params: dict
    opt: AdamState
    update_count: int


@dataclass
class TrainResult:
    params: dict
    records: list[TrainLogRecord]
    state: TrainerState
    diversity: DiversityCounter
    losses: list[float]


class _BatchStream:
    """Deterministic epoch-by-epoch batch supply with SC gating."""

    def __init__(self, corpus, token_budget, seed, curriculum: Curriculum):
        self.corpus = corpus
        self.token_budget = token_budget
        self.seed = seed
        self.curriculum = curriculum
        self.epoch = 0
        self.pending = deque()

    def next(self, i: int):
        if not self.pending:
            subset = self.curriculum.selected_indices(i)
            self.pending.extend(
                batch_by_tokens(self.corpus, self.token_budget, self.seed, self.epoch, subset)
            )
            self.epoch += 1
        return self.pending.popleft()


def evaluate_dev(params, config: ModelConfig, pairs, metric: str) -> float:
    """Unweighted dev metric on full sentences (never the curriculum loss)."""
    if metric == "perplexity":
        return perplexity(params, config, pairs)
    references = [p.target[:-1] for p in pairs]  # EOS stripped
    hypotheses = greedy_decode_corpus(params, config, [p.source for p in pairs], config.max_len)
    if metric == "accuracy":
        return token_accuracy(hypotheses, references)
    return bleu(hypotheses, references, smooth=True)


def _batch_weights(curriculum, batch, i, token_losses):
    weights = []
    for row, corpus_idx in enumerate(batch.indices):
        losses = None if token_losses is None else token_losses[row]
        weights.append(
            curriculum.weight_vector(
                int(batch.tgt_lengths[row]), i, key=int(corpus_idx), token_losses=losses
            )
        )
    return weights


def _count_consumed(diversity, curriculum, corpus, batch, i):
    for row, corpus_idx in enumerate(batch.indices):
        pair = corpus.pairs[int(corpus_idx)]
        diversity.add(pair.source, tag="src")
        diversity.add(
            curriculum.consumed_target(pair.target, i, weights=batch.weights[row]), tag="tgt"
        )


def train(
    model_config: ModelConfig,
    corpus: ParallelCorpus,
    cfg: TrainConfig,
    dev_corpus: ParallelCorpus | None = None,
    state: TrainerState | None = None,
    checkpoint_meta: dict | None = None,
) -> TrainResult:
    """Run the training loop; returns final parameters and the log records.

    Passing ``state`` resumes a run: the batch stream is replayed to the
    recorded update count, so the continuation consumes exactly the batches
    the uninterrupted run would have.
    """
    if cfg.eval_interval and dev_corpus is None:
        raise ValueError("eval_interval set but no dev corpus provided")
    curriculum = Curriculum(cfg.curriculum, corpus)
    if state is None:
        fresh = model_mod.init_params(model_config)
        state = TrainerState(fresh, AdamState.init(fresh, eps=cfg.adam_eps), 0)
    params, opt = state.params, state.opt

    stream = _BatchStream(corpus, cfg.token_budget, cfg.seed, curriculum)
    for k in range(state.update_count):
        stream.next(k)

    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    def write_checkpoint(name):
        if not ckpt_dir:
            return None
        path = ckpt_dir / name
        extra = {f"adam.m/{k}": v for k, v in opt.m.items()}
        extra.update({f"adam.v/{k}": v for k, v in opt.v.items()})
        extra["meta"] = dict(checkpoint_meta or {}, update_count=opt.step, adam_eps=opt.eps)
        save_checkpoint(path, model_config, params, extra)
        return path

    dropout_rng = (
        np.random.default_rng(cfg.seed + 17) if model_config.dropout > 0.0 else None
    )
    diversity = DiversityCounter()
    records: list[TrainLogRecord] = []
    losses: list[float] = []
    started = time.perf_counter()
    nonfinite_streak = 0
    window_loss, window_n = 0.0, 0

    for i in range(state.update_count, cfg.max_updates):
        batch = stream.next(i)
        token_losses = (
            model_mod.per_token_losses(params, model_config, batch)
            if curriculum.needs_token_losses
            else None
        )
        batch.weights = _batch_weights(curriculum, batch, i, token_losses)

        for tensor in params.values():
            tensor.zero_grad()
        loss, _ = model_mod.weighted_teacher_forcing_loss(
            params, model_config, batch, batch.weights, dropout_rng=dropout_rng
        )
        loss_value = loss.item()
        if not math.isfinite(loss_value):
            nonfinite_streak += 1
            log.warning("non-finite loss at step %d (streak %d)", i + 1, nonfinite_streak)
            if nonfinite_streak >= 3:
                path = write_checkpoint("checkpoint_aborted.ckpt")
                raise TrainingDiverged(i + 1, path)
            continue  # skip the update; parameters stay at the last good state
        nonfinite_streak = 0

        ad.backward(loss)
        grads = {
            k: t.grad if t.grad is not None else np.zeros_like(t.data)
            for k, t in params.items()
        }
        if cfg.clip_norm is not None:
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > cfg.clip_norm:
                log.info("step %d: clipping gradient norm %.4f to %.4f", i + 1, norm, cfg.clip_norm)
                factor = cfg.clip_norm / norm
                grads = {k: g * factor for k, g in grads.items()}
        lr = lr_schedule(i + 1, cfg.warmup, cfg.peak_lr)
        adam_step(params, grads, opt, lr, cfg.weight_decay)
        state.update_count = i + 1

        _count_consumed(diversity, curriculum, corpus, batch, i)
        losses.append(loss_value)
        window_loss += loss_value
        window_n += 1

        step = i + 1
        if cfg.eval_interval and (step % cfg.eval_interval == 0 or step == cfg.max_updates):
            metric = evaluate_dev(params, model_config, dev_corpus.pairs, cfg.dev_metric)
            records.append(
                TrainLogRecord(
                    step=step,
                    learning_rate=lr,
                    train_loss=window_loss / max(window_n, 1),
                    dev_metric=metric,
                    unique_trigrams=diversity.count,
                    wall_time=time.perf_counter() - started,
                )
            )
            window_loss, window_n = 0.0, 0
        if cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0:
            write_checkpoint("checkpoint_last.ckpt")

    write_checkpoint("checkpoint_final.ckpt")
    return TrainResult(params, records, state, diversity, losses)
