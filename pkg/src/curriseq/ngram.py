"""Interpolated n-gram language model with additive smoothing.

Backs the uncertainty difficulty measure: sentences are scored by the average
log-probability their own training corpus assigns them under a 4-gram model.
Contexts are left-padded with a start sentinel; each order is add-alpha
smoothed and the orders are mixed with uniform interpolation weights.
"""

from __future__ import annotations

import math
from collections import Counter

START = -1  # context padding sentinel, never a real token id


class NGramModel:
    """Uniform-interpolation n-gram model over integer token sequences."""

    def __init__(self, order: int = 4, alpha: float = 0.1):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.order = order
        self.alpha = alpha
        self.vocab_size = 0
        self._ngram_counts = [Counter() for _ in range(order)]
        self._context_counts = [Counter() for _ in range(order)]

    def fit(self, sequences: list[list[int]], vocab_size: int) -> "NGramModel":
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        for seq in sequences:
            padded = [START] * (self.order - 1) + list(seq)
            for pos in range(self.order - 1, len(padded)):
                for n in range(1, self.order + 1):
                    ctx = tuple(padded[pos - n + 1 : pos])
                    self._ngram_counts[n - 1][ctx + (padded[pos],)] += 1
                    self._context_counts[n - 1][ctx] += 1
        return self

    def token_prob(self, context: tuple[int, ...], token: int) -> float:
        """Interpolated probability of ``token`` after ``context`` (order-1 items)."""
        if self.vocab_size == 0:
            raise RuntimeError("model not fitted")
        mix = 0.0
        for n in range(1, self.order + 1):
            ctx = tuple(context[len(context) - (n - 1) :]) if n > 1 else ()
            num = self._ngram_counts[n - 1][ctx + (token,)] + self.alpha
            den = self._context_counts[n - 1][ctx] + self.alpha * self.vocab_size
            mix += num / den
        return mix / self.order

    def log_prob(self, sequence: list[int]) -> float:
        """Total natural-log probability of a sequence."""
        padded = [START] * (self.order - 1) + list(sequence)
        total = 0.0
        for pos in range(self.order - 1, len(padded)):
            ctx = tuple(padded[pos - self.order + 1 : pos])
            total += math.log(self.token_prob(ctx, padded[pos]))
        return total

    def perplexity(self, sequence: list[int]) -> float:
        """Per-word perplexity exp(-log p / n)."""
        if not sequence:
            raise ValueError("cannot score an empty sequence")
        return math.exp(-self.log_prob(sequence) / len(sequence))
