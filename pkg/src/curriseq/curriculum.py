"""Curriculum schedules: token-wise hard/soft weights, ablation selectors,
sentence-level baselines, their composition, and curriculum-length estimation.

Token-wise schedules produce a per-token WeightVector for a target sentence of
length ``l`` at optimizer update ``i``; updates past the curriculum length
``total_updates`` always yield all-ones weights (standard training resumes).
Sentence-level schedules gate which sentences may enter a batch at update
``i``.  All functions are pure given their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import ngram

VARIANTS = (
    "none",
    "tc-hard",
    "tc-soft",
    "ablation-random",
    "ablation-lowloss",
    "ablation-range",
    "sc-rsqrt",
    "sc-unc",
    "tc-soft+sc",
)


@dataclass(frozen=True)
class WeightVector:
    """Per-token loss weights for one sentence at one training step.

    ``binary`` vectors contain only {0, 1} and normalize the sentence loss by
    their popcount; soft vectors start at weight 1 and normalize by length.
    """

    weights: np.ndarray
    binary: bool

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weight vector must be a nonempty 1-D array")
        if w.min() < 0.0 or w.max() > 1.0:
            raise ValueError("weights must lie in [0, 1]")
        if self.binary:
            if not np.all((w == 0.0) | (w == 1.0)):
                raise ValueError("binary weight vector may contain only 0 and 1")
            if w.sum() == 0:
                raise ValueError("binary weight vector must select at least one token")
        elif w[0] != 1.0:
            raise ValueError("soft weight vector must give the first token weight 1")

    def __len__(self):
        return self.weights.size

    @property
    def normalizer(self) -> float:
        """Loss denominator: popcount for binary masks, length otherwise."""
        return float(self.weights.sum()) if self.binary else float(self.weights.size)


@dataclass
class CurriculumConfig:
    """Variant tag plus every schedule hyperparameter.

    Defaults: lambda0=0.1, gamma0=0.7, alpha0=25.  ``total_updates`` is the curriculum length I;
    ``sc_total_updates`` is the sentence-level length T (defaults to I).
    """

    variant: str = "none"
    lambda0: float = 0.1
    gamma0: float = 0.7
    alpha0: float = 25.0
    total_updates: int = 1
    range_bounds: tuple[float, float] = (0.9, 1.0)
    sc_c0: float = 0.01
    sc_total_updates: int | None = None
    sc_baby_steps: int = 4
    sc_method: str = "unc"  # SC half of tc-soft+sc: "unc" or "rsqrt"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown curriculum variant {self.variant!r}")
        if not 0.0 < self.lambda0 < 1.0:
            raise ValueError("lambda0 must lie in (0, 1)")
        if not 0.0 <= self.gamma0 <= 1.0:
            raise ValueError("gamma0 must lie in [0, 1]")
        if self.alpha0 <= 0.0:
            raise ValueError("alpha0 must be positive")
        if self.total_updates < 1:
            raise ValueError("total_updates must be >= 1")
        if not 0.0 < self.sc_c0 <= 1.0:
            raise ValueError("sc_c0 must lie in (0, 1]")
        lo, hi = self.range_bounds
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("range_bounds must satisfy 0 <= lo < hi <= 1")
        if self.sc_method not in ("unc", "rsqrt"):
            raise ValueError("sc_method must be 'unc' or 'rsqrt'")

    @property
    def sc_updates(self) -> int:
        return self.total_updates if self.sc_total_updates is None else self.sc_total_updates


def hard_subseq_length(length: int, i: int, total_updates: int, lambda0: float) -> int:
    """Prefix length at update ``i``: floor(l * (lambda0 + (i/I)(1 - lambda0))).

    Clamped to [1, length] so the selected set is never empty; returns the full
    length once the curriculum is over (i >= I).
    """
    if length < 1 or total_updates < 1 or i < 0 or not 0.0 < lambda0 < 1.0:
        raise ValueError("need length >= 1, I >= 1, i >= 0, 0 < lambda0 < 1")
    if i >= total_updates:
        return length
    raw = math.floor(length * (lambda0 + (i / total_updates) * (1.0 - lambda0)))
    return min(max(raw, 1), length)


def hard_weight_vector(length: int, i: int, total_updates: int, lambda0: float) -> WeightVector:
    """Binary mask selecting the leading prefix of the target sentence."""
    k = hard_subseq_length(length, i, total_updates, lambda0)
    w = np.zeros(length)
    w[:k] = 1.0
    return WeightVector(w, binary=True)


def soft_decay_factor(i: int, total_updates: int, gamma0: float) -> float:
    """Decay base gamma_i = gamma0 + (i/I)(1 - gamma0), saturating at 1."""
    if total_updates < 1 or not 0.0 <= gamma0 <= 1.0:
        raise ValueError("need I >= 1 and 0 <= gamma0 <= 1")
    if i >= total_updates:
        return 1.0
    return gamma0 + (i / total_updates) * (1.0 - gamma0)


def soft_power_factor(t: int, length: int, alpha0: float) -> float:
    """Per-position exponent alpha0 * (t-1)/(l-1); zero for the first token.

    A length-1 sentence has no decay to apply, so its single exponent is 0
    (the t=1 rule extended).
    """
    if not 1 <= t <= length:
        raise ValueError("need 1 <= t <= length")
    if length == 1:
        return 0.0
    return alpha0 * (t - 1) / (length - 1)


def soft_weight_vector(
    length: int, i: int, total_updates: int, gamma0: float, alpha0: float
) -> WeightVector:
    """Geometric decay weights w_t = gamma_i ** alpha_{t,l}; all ones at i >= I."""
    gamma_i = soft_decay_factor(i, total_updates, gamma0)
    powers = np.array([soft_power_factor(t, length, alpha0) for t in range(1, length + 1)])
    return WeightVector(gamma_i**powers, binary=False)


def ones_weight_vector(length: int) -> WeightVector:
    """The no-curriculum weight vector (plain mean token loss)."""
    return WeightVector(np.ones(length), binary=False)


def ablation_weight_vector(
    strategy: str,
    length: int,
    i: int,
    total_updates: int,
    lambda0: float,
    *,
    rng: np.random.Generator | None = None,
    token_losses: np.ndarray | None = None,
    range_bounds: tuple[float, float] | None = None,
) -> WeightVector:
    """Binary masks with the hard schedule's popcount but alternative placement.

    random   -- a uniform subset of positions (needs ``rng``)
    lowloss  -- the contiguous window with minimum mean token loss
                (needs ``token_losses``; leftmost window on ties)
    range    -- a window anchored at ``range_bounds`` (fractions of the
                sentence), grown symmetrically by the same linear schedule and
                spilled to the other side at a sentence boundary
    """
    k = hard_subseq_length(length, i, total_updates, lambda0)
    w = np.zeros(length)
    if strategy == "random":
        if rng is None:
            raise ValueError("random ablation needs an rng stream")
        w[rng.choice(length, size=k, replace=False)] = 1.0
    elif strategy == "lowloss":
        if token_losses is None:
            raise ValueError("lowloss ablation needs the sentence's token losses")
        losses = np.asarray(token_losses, dtype=np.float64)
        if losses.size != length:
            raise ValueError("token loss vector length mismatch")
        means = [losses[s : s + k].mean() for s in range(length - k + 1)]
        start = int(np.argmin(means))
        w[start : start + k] = 1.0
    elif strategy == "range":
        if range_bounds is None:
            raise ValueError("range ablation needs range bounds")
        start, end = _range_window(length, k, total_updates, lambda0, range_bounds)
        w[start:end] = 1.0
    else:
        raise ValueError(f"unknown ablation strategy {strategy!r}")
    return WeightVector(w, binary=True)


def _range_window(length, k, total_updates, lambda0, bounds):
    """Window of size k anchored at the initial relative range.

    The initial window starts at floor(lo * length) with the i=0 schedule
    length; the extra tokens of later steps are split evenly between the two
    sides, and growth past a sentence boundary spills to the other side so the
    popcount always matches the hard schedule.
    """
    lo, _hi = bounds
    k0 = hard_subseq_length(length, 0, total_updates, lambda0)
    start0 = min(math.floor(lo * length), length - k0)
    extra = k - k0
    start = start0 - extra // 2
    end = start0 + k0 + (extra - extra // 2)
    if end > length:
        start -= end - length
        end = length
    if start < 0:
        end += -start
        start = 0
    return start, min(end, length)


def sc_sqrt_competence(i: int, total_updates: int, c0: float) -> float:
    """Square-root competence c(i) = min(1, sqrt(i (1 - c0^2)/T + c0^2)).

    Saturates to exactly 1 at i >= T (the float expression lands a few ulp
    short of 1 there, which would leave sentences permanently unselected).
    """
    if total_updates < 1 or not 0.0 < c0 <= 1.0:
        raise ValueError("need T >= 1 and 0 < c0 <= 1")
    if i >= total_updates:
        return 1.0
    return min(1.0, math.sqrt(i * (1.0 - c0 * c0) / total_updates + c0 * c0))


def sc_rsqrt_schedule(
    i: int, total_updates: int, c0: float, difficulty: np.ndarray
) -> np.ndarray:
    """Indices of sentences whose difficulty percentile is within competence.

    Sentences are ranked ascending by difficulty (stable, so index order
    breaks ties); the selected count is floor(c(i) * n), clamped to at least
    one sentence so training never starves.
    """
    difficulty = np.asarray(difficulty)
    n = difficulty.size
    if n == 0:
        raise ValueError("empty corpus")
    c = sc_sqrt_competence(i, total_updates, c0)
    count = min(n, max(1, math.floor(c * n)))
    order = np.argsort(difficulty, kind="stable")
    return np.sort(order[:count])


def rarity_difficulty(sentences: list[list[int]]) -> np.ndarray:
    """Word-rarity difficulty: -sum_w log(relative unigram frequency of w)."""
    counts: dict[int, int] = {}
    total = 0
    for sent in sentences:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
            total += 1
    logfreq = {tok: math.log(c / total) for tok, c in counts.items()}
    return np.array([-sum(logfreq[tok] for tok in sent) for sent in sentences])


def sc_uncertainty_baby_steps(
    source_sentences: list[list[int]],
    target_sentences: list[list[int]],
    src_vocab_size: int,
    tgt_vocab_size: int,
    step_count: int = 4,
    order: int = 4,
) -> list[np.ndarray]:
    """Difficulty buckets for the uncertainty baseline.

    Per-sentence difficulty is the joint source+target per-word perplexity
    under interpolated ``order``-gram LMs fitted to the corpus itself.
    Sentences are sorted ascending and split into ``step_count`` near-equal
    buckets; bucket k (0-based) unlocks at update k*I/steps, cumulatively.
    """
    n = len(source_sentences)
    if n != len(target_sentences):
        raise ValueError("source/target sentence counts differ")
    if n < step_count:
        raise ValueError(f"corpus of {n} sentences is smaller than {step_count} buckets")
    src_lm = ngram.NGramModel(order=order).fit(source_sentences, src_vocab_size)
    tgt_lm = ngram.NGramModel(order=order).fit(target_sentences, tgt_vocab_size)
    difficulty = np.array(
        [
            math.exp(
                -(src_lm.log_prob(s) + tgt_lm.log_prob(t)) / (len(s) + len(t))
            )
            for s, t in zip(source_sentences, target_sentences)
        ]
    )
    ranked = np.argsort(difficulty, kind="stable")
    return [np.sort(b) for b in np.array_split(ranked, step_count)]


def unlocked_bucket_count(i: int, total_updates: int, step_count: int) -> int:
    """Buckets available at update i: bucket k needs i >= k*I/steps (exact ints)."""
    k = sum(1 for j in range(step_count) if i * step_count >= j * total_updates)
    return max(1, min(step_count, k))


def estimate_curriculum_length(
    history: list[tuple[int, float]], target_fraction: float = 0.7, mode: str = "higher"
) -> int:
    """Curriculum length from a baseline run's metric history.

    higher-better metrics (BLEU): first step reaching target_fraction * final.
    lower-better metrics (perplexity): first step reaching
    (1 - target_fraction) * initial + target_fraction * final.
    """
    if not history:
        raise ValueError("metric history is empty")
    if mode not in ("higher", "lower"):
        raise ValueError("mode must be 'higher' or 'lower'")
    steps = [s for s, _ in history]
    values = [v for _, v in history]
    final = values[-1]
    if mode == "higher":
        threshold = target_fraction * final
        for s, v in zip(steps, values):
            if v >= threshold:
                return s
        best = max(values) / final if final else float("inf")
    else:
        threshold = (1.0 - target_fraction) * values[0] + target_fraction * final
        for s, v in zip(steps, values):
            if v <= threshold:
                return s
        best = min(values) / final if final else float("inf")
    raise ValueError(
        f"metric never reached the target threshold; closest achieved fraction {best:.4f}"
    )


class Curriculum:
    """Per-step sentence gating and weight generation for one training run.

    Sentence-level state (difficulty scores, buckets) is computed once from
    the corpus; after that every query is pure in (i, sentence index, length).
    """

    def __init__(self, config: CurriculumConfig, corpus=None):
        self.config = config
        self._difficulty = None
        self._buckets = None
        if config.variant in ("sc-rsqrt", "sc-unc", "tc-soft+sc"):
            if corpus is None:
                raise ValueError(f"variant {config.variant} needs the training corpus")
            self._prepare_sentence_level(corpus)

    def _prepare_sentence_level(self, corpus):
        cfg = self.config
        method = cfg.sc_method if cfg.variant == "tc-soft+sc" else cfg.variant[3:]
        sources = [p.source for p in corpus.pairs]
        targets = [p.target for p in corpus.pairs]
        if method == "rsqrt":
            self._difficulty = rarity_difficulty(sources)
        else:
            self._buckets = sc_uncertainty_baby_steps(
                sources,
                targets,
                len(corpus.src_vocab),
                len(corpus.tgt_vocab),
                step_count=cfg.sc_baby_steps,
            )

    @property
    def gates_sentences(self) -> bool:
        return self.config.variant in ("sc-rsqrt", "sc-unc", "tc-soft+sc")

    @property
    def needs_token_losses(self) -> bool:
        return self.config.variant == "ablation-lowloss"

    def selected_indices(self, i: int) -> np.ndarray | None:
        """Sentence indices allowed into batches at update i (None = all)."""
        if not self.gates_sentences:
            return None
        cfg = self.config
        if self._difficulty is not None:
            return sc_rsqrt_schedule(i, cfg.sc_updates, cfg.sc_c0, self._difficulty)
        k = unlocked_bucket_count(i, cfg.sc_updates, cfg.sc_baby_steps)
        return np.sort(np.concatenate(self._buckets[:k]))

    def weight_vector(
        self, length: int, i: int, *, key: int = 0, token_losses=None
    ) -> WeightVector:
        """Loss weights for one sentence of ``length`` target tokens at update i.

        ``key`` (the sentence's corpus index) seeds the counter-based RNG
        stream of the random ablation so weights are reproducible regardless
        of call order.
        """
        cfg = self.config
        v = cfg.variant
        if v == "none" or v in ("sc-rsqrt", "sc-unc"):
            return ones_weight_vector(length)
        if v == "tc-hard":
            return hard_weight_vector(length, i, cfg.total_updates, cfg.lambda0)
        if v in ("tc-soft", "tc-soft+sc"):
            return soft_weight_vector(length, i, cfg.total_updates, cfg.gamma0, cfg.alpha0)
        if v == "ablation-random":
            rng = np.random.default_rng((cfg.seed, i, key))
            return ablation_weight_vector(
                "random", length, i, cfg.total_updates, cfg.lambda0, rng=rng
            )
        if v == "ablation-lowloss":
            return ablation_weight_vector(
                "lowloss", length, i, cfg.total_updates, cfg.lambda0, token_losses=token_losses
            )
        if v == "ablation-range":
            return ablation_weight_vector(
                "range", length, i, cfg.total_updates, cfg.lambda0,
                range_bounds=cfg.range_bounds,
            )
        raise AssertionError(f"unhandled variant {v}")

    def consumed_target(self, target: list[int], i: int, weights=None) -> list[int]:
        """The portion of a target sentence the diversity analysis counts.

        Binary variants consume the selected positions in order (a prefix for
        tc-hard); soft and baseline variants place weight on every token and
        consume the full sentence.  ``weights`` short-circuits recomputation
        when the trainer already built the step's WeightVector.
        """
        if weights is None:
            cfg = self.config
            if cfg.variant == "tc-hard":
                k = hard_subseq_length(len(target), i, cfg.total_updates, cfg.lambda0)
                return target[:k]
            if cfg.variant in ("ablation-random", "ablation-range"):
                weights = self.weight_vector(len(target), i)
            else:
                return list(target)
        if not weights.binary:
            return list(target)
        return [tok for tok, keep in zip(target, weights.weights) if keep]


def saturated(config: CurriculumConfig, i: int) -> bool:
    """True once every schedule in the config has reached standard training."""
    if config.variant == "none":
        return True
    token_done = i >= config.total_updates
    if config.variant in ("sc-rsqrt", "sc-unc"):
        return i >= config.sc_updates
    if config.variant == "tc-soft+sc":
        return token_done and i >= config.sc_updates
    return token_done


def degenerate_to_baseline(config: CurriculumConfig) -> CurriculumConfig:
    """The equivalent all-ones config (used by identity tests)."""
    return replace(config, variant="none")
