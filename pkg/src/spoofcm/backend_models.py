"""Tiny trainable back ends and the three ways of handling varied-length input.

``trim_pad``
    pad or randomly trim to K frames, convolve, flatten, one dense layer.
``chunked``
    cut the trial into fixed-size chunks, score each with a trim/pad style
    network and average the chunk scores.
``pool_mean`` / ``pool_attention``
    convolve the whole trial and pool the hidden sequence over time.

Parameters live in a flat ``dict`` of named float64 arrays; names carry a
module prefix (``conv0.w``, ``head.b``, ...) used for parameter counting and
for the manifest format.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor, as_tensor
from .nn_core import (GRUParams, attention_pool, cosine_scores, glorot_uniform, mean_pool,
                      recurrent_layer)

TRIM_PAD = "trim_pad"
CHUNKED = "chunked"
POOL_MEAN = "pool_mean"
POOL_ATTENTION = "pool_attention"
STRATEGIES = (TRIM_PAD, CHUNKED, POOL_MEAN, POOL_ATTENTION)

SIGMOID_HEAD = "sigmoid"
COSINE_HEAD = "cosine"


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    strategy: str = POOL_MEAN
    trim_len: int = 750
    chunk_len: int = 100
    chunk_shift: int = 100
    conv_widths: tuple = (32, 32)
    kernel: int = 3
    stride: int = 2
    recurrent: bool = False
    recurrent_layers: int = 2
    attention_dim: int | None = None
    compress_input: bool = False
    compress_dim: int = 60
    embed_dim: int = 64
    num_classes: int = 2
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        object.__setattr__(self, "conv_widths", tuple(self.conv_widths))
        if min(self.trim_len, self.chunk_len, self.chunk_shift) < 1:
            raise ValueError("trim_len, chunk_len and chunk_shift must be >= 1")
        if self.recurrent and self.hidden % 2:
            raise ValueError("hidden width must be even when the recurrent layer is on")

    @property
    def hidden(self) -> int:
        return self.conv_widths[-1]

    @property
    def stride_product(self) -> int:
        return self.stride ** len(self.conv_widths)

    @property
    def att_dim(self) -> int:
        return self.attention_dim or max(1, self.hidden // 2)

    @property
    def fixed_len(self) -> int | None:
        if self.strategy == TRIM_PAD:
            return self.trim_len
        if self.strategy == CHUNKED:
            return self.chunk_len
        return None

    def hidden_length(self, n_frames: int) -> int:
        for _ in self.conv_widths:
            n_frames = math.ceil(n_frames / self.stride)
        return n_frames

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        return cls(**d)


def prepare_fixed_input(x, k: int, rng=None) -> np.ndarray:
    """Zero-pad short trials to ``k`` frames; take a random window from long ones."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n <= k:
        out = np.zeros((k, x.shape[1]))
        out[:n] = x
        return out
    start = int(rng.integers(0, n - k + 1)) if rng is not None else 0
    return x[start:start + k].copy()


def split_chunks(x, chunk_len: int, shift: int) -> list:
    """Fixed-size chunks; the tail (or a short trial) is padded by repeating its last frame."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    count = 1 if n <= chunk_len else math.ceil((n - chunk_len) / shift) + 1
    chunks = []
    for m in range(count):
        piece = x[m * shift:m * shift + chunk_len]
        if piece.shape[0] < chunk_len:
            fill = np.repeat(piece[-1:], chunk_len - piece.shape[0], axis=0)
            piece = np.concatenate([piece, fill])
        chunks.append(piece)
    return chunks


def chunk_and_score(x, chunk_len: int, shift: int, scorer) -> float:
    """Average of ``scorer(chunk)`` over the chunks of one trial."""
    chunks = split_chunks(x, chunk_len, shift)
    return float(np.mean([scorer(c) for c in chunks]))


def init_spectrogram_compression(filterbank) -> dict:
    """Compression layer initialised with a linear filter bank, zero bias."""
    fb = np.asarray(filterbank, dtype=np.float64)
    if fb.ndim != 2:
        raise ShapeMismatch(f"filter bank must be 2-d, got shape {fb.shape}")
    return {"compress.w": fb.copy(), "compress.b": np.zeros(fb.shape[0])}


def init_params(cfg: BackendConfig, input_dim: int, head: str, rng,
                filterbank=None) -> dict:
    """Glorot-uniform initialisation in a fixed, documented order."""
    params = {}
    d = input_dim
    if cfg.compress_input:
        if filterbank is None:
            w = glorot_uniform(rng, (cfg.compress_dim, input_dim))
            params.update({"compress.w": w, "compress.b": np.zeros(cfg.compress_dim)})
        else:
            fb = np.asarray(filterbank)
            if fb.shape != (cfg.compress_dim, input_dim):
                raise ShapeMismatch(
                    f"filter bank {fb.shape} != ({cfg.compress_dim}, {input_dim})")
            params.update(init_spectrogram_compression(fb))
        d = cfg.compress_dim

    for i, width in enumerate(cfg.conv_widths):
        fan_in = cfg.kernel * d
        params[f"conv{i}.w"] = glorot_uniform(rng, (fan_in, width), fan_in, width)
        params[f"conv{i}.b"] = np.zeros(width)
        d = width

    if cfg.recurrent:
        half = cfg.hidden // 2
        for layer in range(cfg.recurrent_layers):
            for direction in ("fwd", "bwd"):
                prefix = f"rnn.l{layer}.{direction}"
                params[f"{prefix}.w_in"] = glorot_uniform(rng, (3 * half, cfg.hidden))
                params[f"{prefix}.w_rec"] = glorot_uniform(rng, (3 * half, half))
                params[f"{prefix}.bias"] = np.zeros(3 * half)

    if cfg.strategy == POOL_ATTENTION:
        params["att.w"] = glorot_uniform(rng, (cfg.att_dim, cfg.hidden))
        params["att.b"] = np.zeros(cfg.att_dim)
        params["att.u"] = glorot_uniform(rng, (cfg.att_dim,), cfg.att_dim, 1)

    if cfg.fixed_len is not None:
        flat = cfg.hidden_length(cfg.fixed_len) * cfg.hidden
        params["flatten.w"] = glorot_uniform(rng, (cfg.hidden, flat))
        params["flatten.b"] = np.zeros(cfg.hidden)

    if head == SIGMOID_HEAD:
        params["head.w"] = glorot_uniform(rng, (cfg.hidden,), cfg.hidden, 1)
        params["head.b"] = np.zeros(())
    elif head == COSINE_HEAD:
        params["proj.w"] = glorot_uniform(rng, (cfg.embed_dim, cfg.hidden))
        params["proj.b"] = np.zeros(cfg.embed_dim)
        params["classes.c"] = glorot_uniform(rng, (cfg.num_classes, cfg.embed_dim))
    else:
        raise ValueError(f"unknown head {head!r}")
    return params


def parameter_counts(params: dict) -> dict:
    """Number of scalars per module prefix, plus ``total``."""
    counts = {}
    for name, value in params.items():
        module = name.split(".")[0]
        counts[module] = counts.get(module, 0) + int(np.size(value))
    counts["total"] = sum(counts.values())
    return counts


def _conv_stack(h, cfg: BackendConfig, p):
    for i in range(len(cfg.conv_widths)):
        n = h.shape[0]
        out_len = math.ceil(n / cfg.stride)
        pad = max((out_len - 1) * cfg.stride + cfg.kernel - n, 0)
        cols = ag.unfold_time(h, cfg.kernel, cfg.stride, pad // 2, pad - pad // 2)
        h = ag.leaky_relu(cols @ p[f"conv{i}.w"] + p[f"conv{i}.b"], cfg.leaky_slope)
    return h


def _gru_layers(cfg, p):
    layers = []
    for layer in range(cfg.recurrent_layers):
        pair = []
        for direction in ("fwd", "bwd"):
            prefix = f"rnn.l{layer}.{direction}"
            pair.append(GRUParams(p[f"{prefix}.w_in"], p[f"{prefix}.w_rec"], p[f"{prefix}.bias"]))
        layers.append(tuple(pair))
    return layers


def hidden_sequence(x, cfg: BackendConfig, params) -> Tensor:
    """Feature matrix -> hidden sequence of width D_h (before pooling)."""
    p = {k: as_tensor(v) for k, v in params.items()}
    h = as_tensor(x)
    if h.ndim != 2:
        raise ShapeMismatch(f"expected an N x D matrix, got shape {h.shape}")
    if cfg.compress_input:
        if h.shape[1] != p["compress.w"].shape[1]:
            raise ShapeMismatch(
                f"input width {h.shape[1]} != compression width {p['compress.w'].shape[1]}")
        h = h @ ag.transpose(p["compress.w"]) + p["compress.b"]
    expected = p["conv0.w"].shape[0] // cfg.kernel
    if h.shape[1] != expected:
        raise ShapeMismatch(f"feature width {h.shape[1]} != expected {expected}")
    h = _conv_stack(h, cfg, p)
    if cfg.recurrent:
        h = recurrent_layer(h, _gru_layers(cfg, p))
    return h


def backend_forward(x, cfg: BackendConfig, params) -> Tensor:
    """Map one fixed-size or varied-length input to the utterance embedding o_j.

    For ``trim_pad`` and ``chunked`` the caller supplies an input that already
    has the fixed length (see :func:`prepare_fixed_input`, :func:`split_chunks`).
    """
    p = {k: as_tensor(v) for k, v in params.items()}
    h = hidden_sequence(x, cfg, p)
    if cfg.strategy == POOL_MEAN:
        return mean_pool(h)
    if cfg.strategy == POOL_ATTENTION:
        o, _ = attention_pool(h, p["att.w"], p["att.b"], p["att.u"])
        return o
    if h.shape[0] != cfg.hidden_length(cfg.fixed_len):
        raise ShapeMismatch(
            f"{cfg.strategy} expects {cfg.fixed_len} input frames, got {as_tensor(x).shape[0]}")
    flat = h.reshape(-1)
    return p["flatten.w"] @ flat + p["flatten.b"]


def head_forward(o, params, head: str):
    """Sigmoid head -> scalar logit; cosine head -> per-class cosines."""
    p = {k: as_tensor(v) for k, v in params.items()}
    if head == SIGMOID_HEAD:
        return o @ p["head.w"] + p["head.b"]
    emb = p["proj.w"] @ o + p["proj.b"]
    return cosine_scores(emb, p["classes.c"])


def model_inputs(x, cfg: BackendConfig, rng=None) -> list:
    """The list of back-end inputs for one trial under the configured strategy."""
    if cfg.strategy == TRIM_PAD:
        return [prepare_fixed_input(x, cfg.trim_len, rng)]
    if cfg.strategy == CHUNKED:
        return split_chunks(x, cfg.chunk_len, cfg.chunk_shift)
    return [np.asarray(x, dtype=np.float64)]


def model_outputs(x, cfg: BackendConfig, params, head: str, rng=None) -> list:
    """Head outputs (one per chunk for ``chunked``, otherwise one) for a trial."""
    return [head_forward(backend_forward(inp, cfg, params), params, head)
            for inp in model_inputs(x, cfg, rng)]
