"""Tiny autoregressive sequence model: GRU encoder-decoder with single-head
scaled dot-product attention, or a decoder-only stack for language modeling.

Two evaluation paths share one parameter layout:

* the tape path (`weighted_teacher_forcing_loss`) builds an autodiff graph
  for training;
* the numpy path (`encode`, `token_log_probs`, `sequence_log_probs`,
  `DecoderSession`) runs the same arithmetic without a tape for decoding,
  metrics, and finite-difference oracles.

The decoder starts from zero hidden state; all source information flows
through attention, so padded source positions (masked out of the softmax)
never influence the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .curriculum import WeightVector
from .data import BOS, PAD

ENCODER_DECODER = "encoder-decoder"
DECODER_ONLY = "decoder-only"

_ATTN_MASK = -1e9  # additive score for padded source positions


@dataclass
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    embed_dim: int = 64
    hidden_dim: int = 64
    layers: int = 2
    mode: str = ENCODER_DECODER
    label_smoothing: float = 0.1
    dropout: float = 0.0
    seed: int = 0
    max_len: int = 256

    def __post_init__(self):
        if self.mode not in (ENCODER_DECODER, DECODER_ONLY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if min(self.embed_dim, self.hidden_dim, self.layers, self.tgt_vocab) < 1:
            raise ValueError("widths, layer count and target vocab must be positive")
        if self.mode == ENCODER_DECODER and self.src_vocab < 1:
            raise ValueError("encoder-decoder mode needs a source vocabulary")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label smoothing must lie in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")

    def to_dict(self) -> dict:
        return {
            "src_vocab": self.src_vocab,
            "tgt_vocab": self.tgt_vocab,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "layers": self.layers,
            "mode": self.mode,
            "label_smoothing": self.label_smoothing,
            "dropout": self.dropout,
            "seed": self.seed,
            "max_len": self.max_len,
        }


def param_shapes(config: ModelConfig) -> dict[str, tuple]:
    """Name -> shape map; iteration order fixes the init draw order.

    Each GRU cell packs its three gates (reset, update, candidate) into one
    input matrix, one recurrent matrix, and two bias rows.
    """
    e, h = config.embed_dim, config.hidden_dim
    shapes: dict[str, tuple] = {}
    if config.mode == ENCODER_DECODER:
        shapes["src_embed"] = (config.src_vocab, e)
    shapes["tgt_embed"] = (config.tgt_vocab, e)
    stacks = ("enc", "dec") if config.mode == ENCODER_DECODER else ("dec",)
    for stack in stacks:
        for layer in range(config.layers):
            inp = e if layer == 0 else h
            shapes[f"{stack}{layer}.w_x"] = (inp, 3 * h)
            shapes[f"{stack}{layer}.w_h"] = (h, 3 * h)
            shapes[f"{stack}{layer}.b_x"] = (3 * h,)
            shapes[f"{stack}{layer}.b_h"] = (3 * h,)
    comb_in = 2 * h if config.mode == ENCODER_DECODER else h
    shapes["comb.w"] = (comb_in, h)
    shapes["comb.b"] = (h,)
    shapes["proj.w"] = (h, config.tgt_vocab)
    shapes["proj.b"] = (config.tgt_vocab,)
    return shapes


def init_params(config: ModelConfig) -> dict[str, ad.Tensor]:
    """Seed-deterministic parameters; biases and the output projection start
    at zero, so an untrained model predicts the uniform distribution."""
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.startswith("proj.") or name.endswith(("b_x", "b_h", "comb.b")):
            values = np.zeros(shape)
        else:
            values = rng.normal(0.0, 0.1, size=shape)
        params[name] = ad.parameter(values)
    return params


def param_arrays(params) -> dict[str, np.ndarray]:
    return {k: t.data for k, t in params.items()}


# ---------------------------------------------------------------------------
# tape path (training)
# ---------------------------------------------------------------------------


def _gru_cell(params, prefix, x, h):
    gx = ad.matmul(x, params[f"{prefix}.w_x"]) + params[f"{prefix}.b_x"]
    gh = ad.matmul(h, params[f"{prefix}.w_h"]) + params[f"{prefix}.b_h"]
    hid = h.data.shape[-1]
    r = ad.sigmoid(ad.narrow(gx, 0, hid) + ad.narrow(gh, 0, hid))
    z = ad.sigmoid(ad.narrow(gx, hid, 2 * hid) + ad.narrow(gh, hid, 2 * hid))
    n = ad.tanh(ad.narrow(gx, 2 * hid, 3 * hid) + ad.mul(r, ad.narrow(gh, 2 * hid, 3 * hid)))
    return ad.add(ad.mul(1.0 - z, n), ad.mul(z, h))


def _run_stack(params, stack, config, x, states):
    for layer in range(config.layers):
        states[layer] = _gru_cell(params, f"{stack}{layer}", x, states[layer])
        x = states[layer]
    return x


def _encode_tape(params, config, src):
    batch, src_len = src.shape
    states = [ad.constant(np.zeros((batch, config.hidden_dim))) for _ in range(config.layers)]
    top = []
    for s in range(src_len):
        x = ad.gather_rows(params["src_embed"], src[:, s])
        top.append(_run_stack(params, "enc", config, x, states))
    return ad.stack(top, axis=1)  # (B, S, h)


def _attend(enc_states, mask_add, h_t):
    batch, _, hid = enc_states.data.shape
    q = ad.reshape(h_t, (batch, hid, 1))
    scores = ad.reshape(ad.matmul(enc_states, q), (batch, -1))
    scores = ad.scale(scores, 1.0 / math.sqrt(hid)) + mask_add
    attn = ad.softmax(scores, axis=-1)
    ctx = ad.matmul(ad.transpose_last2(enc_states), ad.reshape(attn, (batch, -1, 1)))
    return ad.reshape(ctx, (batch, hid))


def source_mask_bias(src_lengths, width) -> np.ndarray:
    valid = np.arange(width)[None, :] < np.asarray(src_lengths)[:, None]
    return np.where(valid, 0.0, _ATTN_MASK)


class _RawWeights:
    """Plain weight array accepted by the loss (length-normalized)."""

    def __init__(self, weights):
        self.weights = weights
        self.normalizer = float(weights.size)

    def __len__(self):
        return self.weights.size


def _coerce_weights(w, true_len):
    """Accept a WeightVector or any array of weights in [0, 1]."""
    if not isinstance(w, WeightVector):
        arr = np.asarray(w, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("weights must form a nonempty 1-D vector")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("weights must lie in [0, 1]")
        w = _RawWeights(arr)
    if len(w) != true_len:
        raise ValueError(f"weight vector length {len(w)} != sentence length {true_len}")
    return w


def weighted_teacher_forcing_loss(
    params,
    config: ModelConfig,
    batch,
    weight_vectors: list[WeightVector],
    label_smoothing: float | None = None,
    dropout_rng: np.random.Generator | None = None,
):
    """Mean over sentences of the weighted per-token cross-entropy.

    Sentence s contributes sum_t w_t * loss_t / norm, where norm is the
    popcount of a binary weight vector and the sentence length otherwise.
    Returns the scalar loss tensor and the raw per-token negative
    log-likelihood rows (label smoothing only affects the scalar).
    """
    eps = config.label_smoothing if label_smoothing is None else label_smoothing
    tgt = batch.tgt
    n_sent, tgt_len = tgt.shape
    if len(weight_vectors) != n_sent:
        raise ValueError(f"{len(weight_vectors)} weight vectors for {n_sent} sentences")
    weight_vectors = [
        _coerce_weights(w, int(n)) for w, n in zip(weight_vectors, batch.tgt_lengths)
    ]

    dec_in = np.full_like(tgt, PAD)
    dec_in[:, 0] = BOS
    dec_in[:, 1:] = tgt[:, :-1]

    if config.mode == ENCODER_DECODER:
        enc_states = _encode_tape(params, config, batch.src)
        mask_add = ad.constant(source_mask_bias(batch.src_lengths, batch.src.shape[1]))

    states = [ad.constant(np.zeros((n_sent, config.hidden_dim))) for _ in range(config.layers)]
    nll_steps, smooth_steps = [], []
    vocab = config.tgt_vocab
    for t in range(tgt_len):
        x = ad.gather_rows(params["tgt_embed"], dec_in[:, t])
        h_t = _run_stack(params, "dec", config, x, states)
        if config.mode == ENCODER_DECODER:
            ctx = _attend(enc_states, mask_add, h_t)
            comb_in = ad.concat([h_t, ctx], axis=1)
        else:
            comb_in = h_t
        combined = ad.tanh(ad.matmul(comb_in, params["comb.w"]) + params["comb.b"])
        if config.dropout > 0.0 and dropout_rng is not None:
            keep = dropout_rng.random(combined.data.shape) >= config.dropout
            combined = ad.mul(combined, ad.constant(keep / (1.0 - config.dropout)))
        logits = ad.matmul(combined, params["proj.w"]) + params["proj.b"]
        logp = ad.log_softmax(logits, axis=-1)
        nll_steps.append(ad.scale(ad.take_along(logp, tgt[:, t]), -1.0))
        if eps > 0.0:
            smooth_steps.append(ad.scale(ad.reduce_sum(logp, axis=1), -1.0 / vocab))

    nll = ad.stack(nll_steps, axis=1)  # (B, T)
    token_loss = nll
    if eps > 0.0:
        token_loss = ad.scale(nll, 1.0 - eps) + ad.scale(ad.stack(smooth_steps, axis=1), eps)

    weight_matrix = np.zeros((n_sent, tgt_len))
    inv_norm = np.zeros(n_sent)
    for row, w in enumerate(weight_vectors):
        weight_matrix[row, : len(w)] = w.weights
        inv_norm[row] = 1.0 / w.normalizer
    weighted = ad.reduce_sum(ad.mul(token_loss, ad.constant(weight_matrix)), axis=1)
    per_sentence = ad.mul(weighted, ad.constant(inv_norm))
    loss = ad.scale(ad.reduce_sum(per_sentence), 1.0 / n_sent)

    token_nlls = [nll.data[row, : int(n)].copy() for row, n in enumerate(batch.tgt_lengths)]
    return loss, token_nlls


# ---------------------------------------------------------------------------
# numpy path (inference and oracles)
# ---------------------------------------------------------------------------


def _np_gru_cell(arrays, prefix, x, h):
    gx = x @ arrays[f"{prefix}.w_x"] + arrays[f"{prefix}.b_x"]
    gh = h @ arrays[f"{prefix}.w_h"] + arrays[f"{prefix}.b_h"]
    hid = h.shape[-1]
    r = _np_sigmoid(gx[..., :hid] + gh[..., :hid])
    z = _np_sigmoid(gx[..., hid : 2 * hid] + gh[..., hid : 2 * hid])
    n = np.tanh(gx[..., 2 * hid :] + r * gh[..., 2 * hid :])
    return (1.0 - z) * n + z * h


def _np_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _np_log_softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _np_stack_step(arrays, stack, layers, x, states):
    for layer in range(layers):
        states[layer] = _np_gru_cell(arrays, f"{stack}{layer}", x, states[layer])
        x = states[layer]
    return x


def encode_batch(arrays, config: ModelConfig, src: np.ndarray) -> np.ndarray:
    """Encoder states for a padded (B, S) id matrix -> (B, S, h)."""
    batch, src_len = src.shape
    states = [np.zeros((batch, config.hidden_dim)) for _ in range(config.layers)]
    top = []
    for s in range(src_len):
        x = arrays["src_embed"][src[:, s]]
        top.append(_np_stack_step(arrays, "enc", config.layers, x, states))
    return np.stack(top, axis=1)


def encode(params, config: ModelConfig, source_ids) -> np.ndarray:
    """Per-position encoder states (m, h) for one source sentence."""
    if config.mode != ENCODER_DECODER:
        raise ValueError("encode is only defined for encoder-decoder mode")
    ids = np.asarray(source_ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot encode an empty source sentence")
    if ids.min() < 0 or ids.max() >= config.src_vocab:
        raise ValueError(f"source token id outside vocabulary of {config.src_vocab}")
    return encode_batch(param_arrays(params), config, ids[None, :])[0]


class DecoderSession:
    """Incremental decoder evaluation with cached recurrent state.

    ``enc_states`` is a (B, S, h) bank with ``src_lengths`` masking; each
    hypothesis carries the row it attends to, so one session serves both
    batched greedy decoding (one hypothesis per row) and beam search (many
    hypotheses on one row).  Decoder-only configs ignore the bank entirely.
    """

    def __init__(self, params, config: ModelConfig, enc_states=None, src_lengths=None):
        self.arrays = param_arrays(params)
        self.config = config
        if config.mode == ENCODER_DECODER:
            if enc_states is None or src_lengths is None:
                raise ValueError("encoder-decoder session needs encoder states and lengths")
            self.enc = enc_states
            self.mask = source_mask_bias(src_lengths, enc_states.shape[1])
        else:
            self.enc = None

    def begin(self, rows) -> dict:
        rows = np.asarray(rows, dtype=np.int64)
        n = rows.size
        return {
            "h": [np.zeros((n, self.config.hidden_dim)) for _ in range(self.config.layers)],
            "rows": rows,
        }

    def select(self, state, idx) -> dict:
        idx = np.asarray(idx, dtype=np.int64)
        return {"h": [h[idx] for h in state["h"]], "rows": state["rows"][idx]}

    def step(self, state, tokens):
        """Consume one token per hypothesis; return (log-probs (n, V), state)."""
        arrays, config = self.arrays, self.config
        tokens = np.asarray(tokens, dtype=np.int64)
        x = arrays["tgt_embed"][tokens]
        new_states = [h.copy() for h in state["h"]]
        h_t = _np_stack_step(arrays, "dec", config.layers, x, new_states)
        if self.enc is not None:
            enc = self.enc[state["rows"]]
            scores = np.einsum("nsh,nh->ns", enc, h_t) / math.sqrt(config.hidden_dim)
            scores += self.mask[state["rows"]]
            attn = np.exp(scores - scores.max(axis=1, keepdims=True))
            attn /= attn.sum(axis=1, keepdims=True)
            ctx = np.einsum("ns,nsh->nh", attn, enc)
            comb_in = np.concatenate([h_t, ctx], axis=1)
        else:
            comb_in = h_t
        combined = np.tanh(comb_in @ arrays["comb.w"] + arrays["comb.b"])
        logits = combined @ arrays["proj.w"] + arrays["proj.b"]
        return _np_log_softmax(logits), {"h": new_states, "rows": state["rows"]}


def token_log_probs(params, config: ModelConfig, prefix, enc_states=None) -> np.ndarray:
    """log p(. | prefix, source) over the target vocabulary.

    The prefix must start with BOS; in decoder-only mode the encoder-state
    argument is ignored, so passing it (or not) cannot change the output.
    """
    prefix = list(prefix)
    if not prefix or prefix[0] != BOS:
        raise ValueError("prefix must start with the begin-of-sequence id")
    if len(prefix) > config.max_len:
        raise ValueError(f"prefix of {len(prefix)} tokens exceeds max_len {config.max_len}")
    if config.mode == ENCODER_DECODER:
        if enc_states is None:
            raise ValueError("encoder-decoder mode needs encoder states")
        session = DecoderSession(
            params, config, enc_states[None, :, :], np.array([enc_states.shape[0]])
        )
    else:
        session = DecoderSession(params, config)
    state = session.begin(np.zeros(1, dtype=np.int64))
    for tok in prefix:
        logp, state = session.step(state, np.array([tok]))
    return logp[0]


def sequence_log_probs(params, config: ModelConfig, sources, targets) -> list[np.ndarray]:
    """Teacher-forced per-position log-prob rows, one (len_t, V) array per pair."""
    n = len(targets)
    if config.mode == ENCODER_DECODER and len(sources) != n:
        raise ValueError("source/target counts differ")
    tgt_lens = np.array([len(t) for t in targets])
    tgt_width = int(tgt_lens.max())
    dec_in = np.full((n, tgt_width), PAD, dtype=np.int64)
    for row, t in enumerate(targets):
        dec_in[row, 0] = BOS
        dec_in[row, 1 : len(t)] = t[:-1]
    arrays = param_arrays(params)
    if config.mode == ENCODER_DECODER:
        src_lens = np.array([len(s) for s in sources])
        src = np.full((n, int(src_lens.max())), PAD, dtype=np.int64)
        for row, s in enumerate(sources):
            src[row, : len(s)] = s
        session = DecoderSession(params, config, encode_batch(arrays, config, src), src_lens)
    else:
        session = DecoderSession(params, config)
    state = session.begin(np.arange(n))
    rows = np.empty((n, tgt_width, config.tgt_vocab))
    for t in range(tgt_width):
        logp, state = session.step(state, dec_in[:, t])
        rows[:, t, :] = logp
    return [rows[row, : int(tgt_lens[row])] for row in range(n)]


def loss_eval(
    params, config: ModelConfig, batch, weight_vectors, label_smoothing: float | None = None
) -> float:
    """The training loss recomputed on the numpy path (no tape).

    Serves as the independent evaluation route for finite-difference checks
    of the tape gradients.
    """
    eps = config.label_smoothing if label_smoothing is None else label_smoothing
    sources = [batch.src[row, : int(n)] for row, n in enumerate(batch.src_lengths)]
    targets = [batch.tgt[row, : int(n)] for row, n in enumerate(batch.tgt_lengths)]
    weight_vectors = [
        _coerce_weights(w, int(n)) for w, n in zip(weight_vectors, batch.tgt_lengths)
    ]
    rows = sequence_log_probs(params, config, sources, targets)
    total = 0.0
    for logp, target, w in zip(rows, targets, weight_vectors):
        nll = -logp[np.arange(len(target)), target]
        token_loss = nll
        if eps > 0.0:
            token_loss = (1.0 - eps) * nll + eps * (-logp.mean(axis=1))
        total += float((w.weights * token_loss).sum() / w.normalizer)
    return total / len(targets)


def per_token_losses(params, config: ModelConfig, batch) -> list[np.ndarray]:
    """Raw teacher-forced NLL per target position (numpy path)."""
    sources = [batch.src[row, : int(n)] for row, n in enumerate(batch.src_lengths)]
    targets = [batch.tgt[row, : int(n)] for row, n in enumerate(batch.tgt_lengths)]
    rows = sequence_log_probs(params, config, sources, targets)
    return [
        -logp[np.arange(len(target)), target] for logp, target in zip(rows, targets)
    ]
