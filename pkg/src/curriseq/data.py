"""Corpus ingestion, vocabularies, deterministic token batching, subsampling,
and synthetic desk-scale tasks.

Text is whitespace-tokenized (optionally per character); targets always end
with the end-of-sequence id.  Batching shuffles per (seed, epoch), buckets by
target length to bound padding, and packs greedily under a token budget, so
two runs with the same seed see the exact same batch sequence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")

_DIGIT_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine")


class DataError(ValueError):
    """Corpus or batching precondition violated."""


class Vocab:
    """Bidirectional token/id map with reserved pad, bos, eos, unk ids."""

    def __init__(self, tokens: list[str]):
        self.id_to_token = list(RESERVED) + list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("duplicate token in vocabulary")

    @classmethod
    def from_sentences(cls, sentences: list[list[str]], min_freq: int = 1) -> "Vocab":
        """Frequency-then-lexicographic vocabulary; rare tokens map to unk."""
        counts: dict[str, int] = {}
        for sent in sentences:
            for tok in sent:
                counts[tok] = counts.get(tok, 0) + 1
        kept = [t for t, c in counts.items() if c >= min_freq and t not in RESERVED]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls(kept)

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]


@dataclass(frozen=True)
class SamplePair:
    """One parallel example; the target ends with EOS."""

    source: list[int]
    target: list[int]


class ParallelCorpus:
    """Immutable list of SamplePairs plus the vocabularies that produced them."""

    def __init__(self, pairs: list[SamplePair], src_vocab: Vocab, tgt_vocab: Vocab,
                 dropped_overlength: int = 0):
        if not pairs:
            raise DataError("corpus has no sentence pairs")
        for k, p in enumerate(pairs):
            if not p.source or not p.target:
                raise DataError(f"pair {k} has an empty sentence")
            if p.target[-1] != EOS:
                raise DataError(f"pair {k}: target does not end with <eos>")
            if max(p.source) >= len(src_vocab) or max(p.target) >= len(tgt_vocab):
                raise DataError(f"pair {k}: token id outside vocabulary")
        self.pairs = pairs
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.dropped_overlength = dropped_overlength

    def __len__(self):
        return len(self.pairs)

    def content_hash(self) -> str:
        """Stable hash of token ids and vocabularies."""
        h = hashlib.sha256()
        for v in (self.src_vocab, self.tgt_vocab):
            h.update("\x1f".join(v.id_to_token).encode())
        for p in self.pairs:
            h.update(np.asarray(p.source, dtype=np.int64).tobytes())
            h.update(b"|")
            h.update(np.asarray(p.target, dtype=np.int64).tobytes())
        return h.hexdigest()


def tokenize(line: str, char_level: bool = False) -> list[str]:
    if char_level:
        return list(line.strip())
    return line.split()


def load_parallel_corpus(
    source_path,
    target_path,
    max_length: int,
    min_freq: int = 1,
    char_level: bool = False,
) -> ParallelCorpus:
    """Read a line-aligned pair of UTF-8 text files.

    Pairs whose source or target exceeds ``max_length`` tokens (before the
    EOS marker) are dropped; the count is kept on ``dropped_overlength``.
    """
    with open(source_path, encoding="utf-8") as f:
        src_lines = f.read().splitlines()
    with open(target_path, encoding="utf-8") as f:
        tgt_lines = f.read().splitlines()
    if not src_lines or not tgt_lines:
        raise DataError("empty corpus file")
    if len(src_lines) != len(tgt_lines):
        raise DataError(
            f"line counts differ: {len(src_lines)} source vs {len(tgt_lines)} target"
        )
    src_tok, tgt_tok, dropped = [], [], 0
    for s, t in zip(src_lines, tgt_lines):
        st, tt = tokenize(s, char_level), tokenize(t, char_level)
        if not st or not tt:
            raise DataError("empty sentence in corpus")
        if len(st) > max_length or len(tt) > max_length:
            dropped += 1
            continue
        src_tok.append(st)
        tgt_tok.append(tt)
    if not src_tok:
        raise DataError("every pair exceeded the length cap")
    src_vocab = Vocab.from_sentences(src_tok, min_freq)
    tgt_vocab = Vocab.from_sentences(tgt_tok, min_freq)
    pairs = [
        SamplePair(src_vocab.encode(s), tgt_vocab.encode(t) + [EOS])
        for s, t in zip(src_tok, tgt_tok)
    ]
    return ParallelCorpus(pairs, src_vocab, tgt_vocab, dropped_overlength=dropped)


def save_parallel_files(corpus: ParallelCorpus, source_path, target_path) -> None:
    """Write the corpus back out as plain text, one sentence per line."""
    with open(source_path, "w", encoding="utf-8") as f:
        for p in corpus.pairs:
            f.write(" ".join(corpus.src_vocab.decode(p.source)) + "\n")
    with open(target_path, "w", encoding="utf-8") as f:
        for p in corpus.pairs:
            f.write(" ".join(corpus.tgt_vocab.decode(p.target[:-1])) + "\n")


@dataclass
class Batch:
    """Padded matrices for one optimizer step."""

    src: np.ndarray  # (B, S) int64, PAD-filled
    tgt: np.ndarray  # (B, T) int64, PAD-filled; rows end with EOS before padding
    src_lengths: np.ndarray
    tgt_lengths: np.ndarray
    indices: np.ndarray  # corpus positions of the rows
    weights: list = field(default_factory=list)  # per-sentence WeightVectors

    def __len__(self):
        return self.src.shape[0]


def _pad_batch(corpus, chosen):
    pairs = [corpus.pairs[j] for j in chosen]
    slen = np.array([len(p.source) for p in pairs])
    tlen = np.array([len(p.target) for p in pairs])
    src = np.full((len(pairs), slen.max()), PAD, dtype=np.int64)
    tgt = np.full((len(pairs), tlen.max()), PAD, dtype=np.int64)
    for r, p in enumerate(pairs):
        src[r, : slen[r]] = p.source
        tgt[r, : tlen[r]] = p.target
    return Batch(src, tgt, slen, tlen, np.asarray(chosen, dtype=np.int64))


def batch_by_tokens(
    corpus: ParallelCorpus,
    token_budget: int,
    seed: int,
    epoch: int,
    subset=None,
) -> list[Batch]:
    """Token-budgeted batches covering ``subset`` (default: all) exactly once.

    Order is shuffled per (seed, epoch), then stably sorted by target length
    so batches pad little; the resulting batch order is shuffled again.
    """
    indices = list(range(len(corpus))) if subset is None else [int(j) for j in subset]
    if not indices:
        raise DataError("cannot batch an empty sentence subset")
    lengths = {j: len(corpus.pairs[j].target) for j in indices}
    longest = max(lengths.values())
    if token_budget < longest:
        raise DataError(
            f"token budget {token_budget} below longest target length {longest}"
        )
    rng = np.random.default_rng((seed, epoch))
    shuffled = [indices[k] for k in rng.permutation(len(indices))]
    shuffled.sort(key=lambda j: lengths[j])  # stable: keeps shuffle within a length

    groups, current, current_tokens = [], [], 0
    for j in shuffled:
        t = lengths[j]
        if current and current_tokens + t > token_budget:
            groups.append(current)
            current, current_tokens = [], 0
        current.append(j)
        current_tokens += t
    if current:
        groups.append(current)
    order = rng.permutation(len(groups))
    return [_pad_batch(corpus, groups[k]) for k in order]


def subsample(corpus: ParallelCorpus, fraction: float, seed: int) -> ParallelCorpus:
    """Uniform without-replacement subset of floor(fraction * n) pairs.

    Keeps the original pair order and shares the vocabularies, so the result
    is a strict subset of the input corpus.
    """
    if not 0.0 < fraction <= 1.0:
        raise DataError("fraction must lie in (0, 1]")
    n = len(corpus)
    k = int(fraction * n)
    if k == 0:
        raise DataError(f"fraction {fraction} of {n} pairs selects nothing")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    pairs = [corpus.pairs[int(j)] for j in chosen]
    return ParallelCorpus(pairs, corpus.src_vocab, corpus.tgt_vocab)


def synth_task(
    kind: str, n: int, vocab_size: int, max_length: int, seed: int
) -> ParallelCorpus:
    """Deterministic synthetic parallel corpora.

    copy            target repeats the source tokens
    reverse         target is the source reversed
    digits-to-words source is a digit sequence, target its spelled-out form
    """
    if n < 1:
        raise DataError("need at least one pair")
    rng = np.random.default_rng(seed)
    src_tok, tgt_tok = [], []
    if kind in ("copy", "reverse"):
        if vocab_size < 1:
            raise DataError("vocab_size must be >= 1")
        alphabet = [f"t{k}" for k in range(vocab_size)]
        for _ in range(n):
            length = int(rng.integers(1, max_length + 1))
            sent = [alphabet[k] for k in rng.integers(0, vocab_size, size=length)]
            src_tok.append(sent)
            tgt_tok.append(sent[::-1] if kind == "reverse" else list(sent))
    elif kind == "digits-to-words":
        for _ in range(n):
            length = int(rng.integers(1, max_length + 1))
            digits = rng.integers(0, 10, size=length)
            src_tok.append([str(d) for d in digits])
            tgt_tok.append([_DIGIT_WORDS[d] for d in digits])
    else:
        raise DataError(f"unknown synthetic task {kind!r}")
    src_vocab = Vocab.from_sentences(src_tok)
    tgt_vocab = Vocab.from_sentences(tgt_tok)
    pairs = [
        SamplePair(src_vocab.encode(s), tgt_vocab.encode(t) + [EOS])
        for s, t in zip(src_tok, tgt_tok)
    ]
    return ParallelCorpus(pairs, src_vocab, tgt_vocab)
