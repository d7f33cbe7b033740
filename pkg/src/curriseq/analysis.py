"""Diagnostics behind the analysis commands: per-method unique-trigram
growth over training consumption, and positional/tail error analyses of a
decoded corpus."""

from __future__ import annotations

import numpy as np

from .curriculum import Curriculum, CurriculumConfig
from .data import ParallelCorpus
from .decoding import translate_corpus
from .metrics import DiversityCounter, positional_error_rate, tail_error_rate
from .model import ModelConfig
from .trainer import _BatchStream


def diversity_trace(
    corpus: ParallelCorpus,
    config: CurriculumConfig,
    steps: int,
    token_budget: int,
    seed: int,
) -> list[tuple[int, int]]:
    """Cumulative unique-trigram counts over ``steps`` simulated updates.

    Replays the exact batch consumption the trainer would perform under this
    curriculum (sentence gating included) without touching a model, counting
    full sources plus the consumed part of each target.  The loss-based
    ablation has no model here and is not supported.
    """
    if config.variant == "ablation-lowloss":
        raise ValueError("diversity trace cannot evaluate the loss-based ablation")
    curriculum = Curriculum(config, corpus)
    stream = _BatchStream(corpus, token_budget, seed, curriculum)
    counter = DiversityCounter()
    trace = [(0, 0)]
    for i in range(steps):
        batch = stream.next(i)
        for corpus_idx in batch.indices:
            pair = corpus.pairs[int(corpus_idx)]
            counter.add(pair.source, tag="src")
            weights = curriculum.weight_vector(len(pair.target), i, key=int(corpus_idx))
            counter.add(curriculum.consumed_target(pair.target, i, weights=weights), tag="tgt")
        trace.append((i + 1, counter.count))
    return trace


def parse_length_filters(spec: str) -> list[tuple[str, int | None, int | None]]:
    """Parse "1:,101:" style bounds into (label, min_len, max_len) triples."""
    filters = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ValueError(f"length filter {part!r} must look like 'lo:hi', 'lo:' or ':hi'")
        lo_s, hi_s = part.split(":", 1)
        lo = int(lo_s) if lo_s else None
        hi = int(hi_s) if hi_s else None
        filters.append((part, lo, hi))
    if not filters:
        raise ValueError("no length filters given")
    return filters


def error_analysis(
    params,
    config: ModelConfig,
    pairs,
    beam_size: int,
    penalty: float,
    partitions: int,
    length_filters,
    tail_fraction: float = 0.2,
):
    """Beam-decode the pairs and compute per-partition and tail error rates.

    Returns (positional_rows, tail_rows, hypotheses); positional rows are
    (filter_label, partition, error_rate) with exactly ``partitions`` rows per
    filter.
    """
    references = [p.target[:-1] for p in pairs]
    hypotheses = translate_corpus(
        params, config, [p.source for p in pairs], beam_size, config.max_len, penalty
    )
    positional_rows, tail_rows = [], []
    for label, lo, hi in length_filters:
        keep = [
            k
            for k, ref in enumerate(references)
            if (lo is None or len(ref) >= lo) and (hi is None or len(ref) <= hi)
        ]
        sub_h = [hypotheses[k] for k in keep]
        sub_r = [references[k] for k in keep]
        if not keep:
            rates = np.zeros(partitions)
            tail = float("nan")
        else:
            rates = positional_error_rate(sub_h, sub_r, partitions)
            tail = tail_error_rate(sub_h, sub_r, tail_fraction)
        positional_rows.extend((label, p + 1, float(rates[p])) for p in range(partitions))
        tail_rows.append((label, tail, len(keep)))
    return positional_rows, tail_rows, hypotheses
