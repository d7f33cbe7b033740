"""Beam-search decoding with length penalty, plus a batched greedy decoder.

A hypothesis's score is its cumulative log-probability (including the EOS
emission when one occurs) divided by the length penalty

    lp(n) = ((5 + n) / 6) ** penalty        (GNMT form, the default)
    lp(n) = n ** penalty                    (plain length normalization)

where n counts generated tokens.  Hypotheses still alive at ``max_len`` are
finalized as-is, without an EOS.  With beam size 1 the search reduces exactly
to the greedy argmax chain, and with a beam at least as large as the number
of partial hypotheses nothing is ever pruned, so the search is exhaustive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BOS, EOS
from .model import DecoderSession, ModelConfig, encode_batch, param_arrays


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]  # generated tokens; ends with EOS unless truncated
    log_prob: float
    score: float  # log_prob / lp(len(tokens))


def length_penalty(n: int, penalty: float, form: str = "gnmt") -> float:
    if form == "gnmt":
        return ((5.0 + n) / 6.0) ** penalty
    if form == "simple":
        return float(n) ** penalty
    raise ValueError(f"unknown length penalty form {form!r}")


def beam_search(
    scorer,
    beam_size: int,
    max_len: int,
    penalty: float = 1.0,
    penalty_form: str = "gnmt",
    nbest: int = 1,
    row: int = 0,
) -> list[Hypothesis]:
    """Generic beam search over a stepwise scorer.

    The scorer provides ``begin(rows)``, ``step(state, tokens) ->
    (logprobs, state)`` and ``select(state, idx)``; ``DecoderSession``
    implements this protocol, and tests drive it with table-based models.
    Returns the ``nbest`` best finished hypotheses by penalized score.
    """
    if beam_size < 1 or max_len < 1:
        raise ValueError("beam size and max length must be >= 1")
    state = scorer.begin(np.array([row]))
    live_tokens = [()]
    live_logp = np.zeros(1)
    last = np.array([BOS], dtype=np.int64)
    done: list[Hypothesis] = []

    def finalize(tokens, logp):
        done.append(
            Hypothesis(tokens, logp, logp / length_penalty(len(tokens), penalty, penalty_form))
        )

    stopped = False
    for _ in range(max_len):
        logprobs, state = scorer.step(state, last)
        vocab = logprobs.shape[1]
        flat = (live_logp[:, None] + logprobs).reshape(-1)
        take = min(flat.size, 2 * beam_size)  # headroom so EOS exits do not starve the beam
        best = np.argpartition(-flat, take - 1)[:take] if take < flat.size else np.arange(flat.size)
        best = best[np.argsort(-flat[best], kind="stable")]

        next_tokens, next_parents, next_logp = [], [], []
        for rank, idx in enumerate(best):
            parent, tok = divmod(int(idx), vocab)
            if tok == EOS:
                # An EOS exit only counts when it is beam-competitive.
                if rank < beam_size:
                    finalize(live_tokens[parent] + (EOS,), float(flat[idx]))
            elif len(next_tokens) < beam_size:
                next_tokens.append(live_tokens[parent] + (tok,))
                next_parents.append(parent)
                next_logp.append(float(flat[idx]))
        if len(done) >= beam_size or not next_tokens:
            stopped = True
            break
        state = scorer.select(state, np.array(next_parents))
        live_tokens = next_tokens
        live_logp = np.array(next_logp)
        last = np.array([toks[-1] for toks in live_tokens], dtype=np.int64)

    if not stopped:  # ran out of length: finalize the unfinished survivors as-is
        for toks, lp in zip(live_tokens, live_logp):
            finalize(toks, float(lp))

    if not done:
        raise RuntimeError("beam search produced no hypotheses")
    done.sort(key=lambda h: (-h.score, h.tokens))
    return done[:nbest]


def translate_corpus(
    params,
    config: ModelConfig,
    sources,
    beam_size: int,
    max_len: int,
    penalty: float = 1.0,
    penalty_form: str = "gnmt",
) -> list[list[int]]:
    """Beam-decode every source sentence; returns token lists without EOS."""
    arrays = param_arrays(params)
    outputs = []
    for source in sources:
        if config.mode == "encoder-decoder":
            src = np.asarray(source, dtype=np.int64)[None, :]
            session = DecoderSession(
                params, config, encode_batch(arrays, config, src), np.array([len(source)])
            )
        else:
            session = DecoderSession(params, config)
        best = beam_search(session, beam_size, max_len, penalty, penalty_form)[0]
        tokens = list(best.tokens)
        if tokens and tokens[-1] == EOS:
            tokens = tokens[:-1]
        outputs.append(tokens)
    return outputs


def greedy_decode_corpus(params, config: ModelConfig, sources, max_len: int) -> list[list[int]]:
    """Batched greedy decoding (argmax chain); returns token lists without EOS.

    Equivalent to beam size 1, but steps every sentence in one batch.
    """
    n = len(sources)
    if config.mode == "encoder-decoder":
        src_lens = np.array([len(s) for s in sources])
        src = np.zeros((n, int(src_lens.max())), dtype=np.int64)
        for row, s in enumerate(sources):
            src[row, : len(s)] = s
        session = DecoderSession(
            params, config, encode_batch(param_arrays(params), config, src), src_lens
        )
    else:
        session = DecoderSession(params, config)
    state = session.begin(np.arange(n))
    last = np.full(n, BOS, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    outputs: list[list[int]] = [[] for _ in range(n)]
    for _ in range(max_len):
        logprobs, state = session.step(state, last)
        picks = logprobs.argmax(axis=1)
        for row in range(n):
            if not alive[row]:
                continue
            tok = int(picks[row])
            if tok == EOS:
                alive[row] = False
            else:
                outputs[row].append(tok)
        last = np.where(alive, picks, EOS).astype(np.int64)
        if not alive.any():
            break
    return outputs
