"""Evaluation metrics and training diagnostics: corpus BLEU, perplexity,
unique-trigram diversity, and positional error accumulation.
"""

from __future__ import annotations

import logging
import math
from collections import Counter

import numpy as np

from .data import Batch
from .model import ModelConfig, per_token_losses

log = logging.getLogger(__name__)


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1))


def bleu(hypotheses, references, max_n: int = 4, smooth: bool = False) -> float:
    """Corpus-level BLEU in [0, 100]: geometric mean of clipped n-gram
    precisions times the brevity penalty.

    Without smoothing any empty precision zeroes the score; with smoothing,
    precisions for n >= 2 get add-one counts.
    """
    if not hypotheses:
        raise ValueError("no hypotheses to score")
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    match = np.zeros(max_n)
    guess = np.zeros(max_n)
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            hyp_counts = _ngram_counts(hyp, n)
            clipped = hyp_counts & _ngram_counts(ref, n)
            guess[n - 1] += sum(hyp_counts.values())
            match[n - 1] += sum(clipped.values())
    log_precisions = []
    for n in range(max_n):
        m, g = match[n], guess[n]
        if smooth and n > 0:
            m, g = m + 1.0, g + 1.0
        if m == 0 or g == 0:
            return 0.0
        log_precisions.append(math.log(m / g))
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(sum(log_precisions) / max_n)


def perplexity(params, config: ModelConfig, pairs) -> float:
    """exp(total token NLL / total token count), teacher-forced, unweighted."""
    sources = [p.source for p in pairs]
    targets = [p.target for p in pairs]
    batch = Batch(
        src=_pad(sources),
        tgt=_pad(targets),
        src_lengths=np.array([len(s) for s in sources]),
        tgt_lengths=np.array([len(t) for t in targets]),
        indices=np.arange(len(pairs)),
    )
    nlls = per_token_losses(params, config, batch)
    total = sum(float(v.sum()) for v in nlls)
    count = sum(v.size for v in nlls)
    return math.exp(total / count)


def _pad(seqs):
    width = max(len(s) for s in seqs)
    out = np.zeros((len(seqs), width), dtype=np.int64)
    for row, s in enumerate(seqs):
        out[row, : len(s)] = s
    return out


class DiversityCounter:
    """Cumulative set of unique trigrams in training-consumed token sequences.

    ``tag`` keeps source- and target-side windows distinct when both sides
    share integer ids.
    """

    def __init__(self):
        self._seen = set()

    def add(self, sequence, tag=None) -> int:
        seq = list(sequence)
        for k in range(len(seq) - 2):
            self._seen.add((tag, seq[k], seq[k + 1], seq[k + 2]))
        return len(self._seen)

    @property
    def count(self) -> int:
        return len(self._seen)


def positional_comparisons(hypotheses, references):
    """Per-sentence boolean error arrays aligned to reference positions.

    Position t is an error when the hypothesis token there differs; past the
    hypothesis end everything is an error.  Empty references are skipped (and
    logged); the second return value counts them.
    """
    comparisons, skipped = [], 0
    for hyp, ref in zip(hypotheses, references):
        if len(ref) == 0:
            skipped += 1
            continue
        err = np.array(
            [t >= len(hyp) or hyp[t] != ref[t] for t in range(len(ref))], dtype=bool
        )
        comparisons.append(err)
    if skipped:
        log.warning("positional comparison skipped %d empty references", skipped)
    return comparisons, skipped


def positional_error_rate(hypotheses, references, partitions: int = 10) -> np.ndarray:
    """Mean error rate in each of ``partitions`` relative reference segments.

    Each reference splits into contiguous segments [floor(p*l/P), floor((p+1)*l/P));
    a sentence contributes a segment's error fraction only when the segment is
    nonempty, and partitions no sentence reaches report 0.
    """
    if partitions < 1:
        raise ValueError("partitions must be >= 1")
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference counts differ")
    comparisons, _ = positional_comparisons(hypotheses, references)
    sums = np.zeros(partitions)
    counts = np.zeros(partitions)
    for err in comparisons:
        length = err.size
        for p in range(partitions):
            lo, hi = length * p // partitions, length * (p + 1) // partitions
            if hi > lo:
                sums[p] += err[lo:hi].mean()
                counts[p] += 1
    return np.divide(sums, counts, out=np.zeros(partitions), where=counts > 0)


def tail_error_rate(
    hypotheses,
    references,
    fraction: float = 0.2,
    min_len: int | None = None,
    max_len: int | None = None,
) -> float:
    """Average error rate over the last ceil(fraction * l) reference tokens,
    over sentences whose reference length passes the filter."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    kept_h, kept_r = [], []
    for hyp, ref in zip(hypotheses, references):
        if min_len is not None and len(ref) < min_len:
            continue
        if max_len is not None and len(ref) > max_len:
            continue
        kept_h.append(hyp)
        kept_r.append(ref)
    comparisons, _ = positional_comparisons(kept_h, kept_r)
    if not comparisons:
        raise ValueError("no sentence passes the length filter")
    rates = [err[err.size - math.ceil(fraction * err.size) :].mean() for err in comparisons]
    return float(np.mean(rates))


def token_accuracy(hypotheses, references) -> float:
    """Micro-averaged position-match accuracy against the references."""
    comparisons, _ = positional_comparisons(hypotheses, references)
    if not comparisons:
        raise ValueError("nothing to score")
    errors = sum(int(err.sum()) for err in comparisons)
    total = sum(err.size for err in comparisons)
    return 1.0 - errors / total
