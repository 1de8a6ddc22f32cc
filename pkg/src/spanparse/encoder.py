"""Stacked multi-head self-attention sentence encoder."""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor

UNK, START, STOP = "<UNK>", "<START>", "<STOP>"


class SentenceTooLong(ValueError):
    pass


class ExternalShapeMismatch(ValueError):
    pass


@dataclasses.dataclass
class EncoderConfig:
    d_model: int = 128
    d_k: int = 128
    d_v: int = 128
    h: int = 8
    num_layers: int = 2
    d_ff: int = 256
    max_len: int = 300
    d_ext: int = 0  # width of external context vectors; 0 disables them

    def __post_init__(self):
        for field in ("d_model", "d_k", "d_v", "h", "d_ff", "max_len"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")
        if self.num_layers < 0 or self.d_ext < 0:
            raise ValueError("num_layers and d_ext must be non-negative")
        if self.d_k % self.h or self.d_v % self.h:
            raise ValueError("d_k and d_v must be divisible by h")
        if self.d_model % 2:
            raise ValueError("d_model must be even")

    @property
    def head_k(self):
        return self.d_k // self.h

    @property
    def head_v(self):
        return self.d_v // self.h


class WordVocab:
    """Token -> row of the embedding table; rows 0-2 are UNK, START, STOP."""

    def __init__(self, words=()):
        self.words = [UNK, START, STOP]
        self._index = {w: i for i, w in enumerate(self.words)}
        for w in words:
            if w not in self._index:
                self._index[w] = len(self.words)
                self.words.append(w)

    def index(self, word):
        return self._index.get(word, 0)

    def __len__(self):
        return len(self.words)

    def __eq__(self, other):
        return isinstance(other, WordVocab) and self.words == other.words


def _uniform(rng, shape, limit):
    return rng.uniform(-limit, limit, size=shape)


def _glorot(rng, fan_in, fan_out):
    return _uniform(rng, (fan_in, fan_out), math.sqrt(6.0 / (fan_in + fan_out)))


def init_encoder_params(config: EncoderConfig, vocab_size: int, rng) -> dict:
    """Fresh encoder weights keyed by their serialized names."""
    d = config.d_model
    p = {
        "enc.embed": _uniform(rng, (vocab_size, d), 0.1),
        "enc.position": _uniform(rng, (config.max_len + 2, d), 0.1),
    }
    if config.d_ext:
        p["enc.ext_proj"] = _glorot(rng, config.d_ext, d)
    for k in range(config.num_layers):
        pre = f"enc.layer{k}"
        for i in range(config.h):
            p[f"{pre}.head{i}.wq"] = _glorot(rng, d, config.head_k)
            p[f"{pre}.head{i}.wk"] = _glorot(rng, d, config.head_k)
            p[f"{pre}.head{i}.wv"] = _glorot(rng, d, config.head_v)
            p[f"{pre}.head{i}.wo"] = _glorot(rng, config.head_v, d)
        p[f"{pre}.ln1.gain"] = np.ones((1, d))
        p[f"{pre}.ln1.bias"] = np.zeros((1, d))
        p[f"{pre}.ff.w1"] = _glorot(rng, d, config.d_ff)
        p[f"{pre}.ff.b1"] = np.zeros((1, config.d_ff))
        p[f"{pre}.ff.w2"] = _glorot(rng, config.d_ff, d)
        p[f"{pre}.ff.b2"] = np.zeros((1, d))
        p[f"{pre}.ln2.gain"] = np.ones((1, d))
        p[f"{pre}.ln2.bias"] = np.zeros((1, d))
    return {name: T.parameter(v, name) for name, v in p.items()}


def embed_sentence(word_ids, params: dict, config: EncoderConfig,
                   external_vectors: Optional[np.ndarray] = None) -> Tensor:
    """Rows START, w_1..w_L, STOP; each is token embedding plus its position row."""
    n = len(word_ids)
    if n > config.max_len:
        raise SentenceTooLong(f"sentence of {n} tokens exceeds max_len={config.max_len}")
    ids = [1] + list(word_ids) + [2]
    x = T.take_rows(params["enc.embed"], ids)
    if external_vectors is not None:
        ext = np.asarray(external_vectors, dtype=np.float64)
        if not config.d_ext or ext.shape != (n, config.d_ext):
            raise ExternalShapeMismatch(
                f"external vectors of shape {ext.shape}, expected ({n}, {config.d_ext})")
        padded = np.zeros((n + 2, config.d_ext))
        padded[1:n + 1] = ext
        x = T.add(x, T.matmul(T.constant(padded), params["enc.ext_proj"]))
    pos = T.take_rows(params["enc.position"], range(n + 2))
    return T.add(x, pos)


def single_head(x: Tensor, wq: Tensor, wk: Tensor, wv: Tensor) -> Tensor:
    q = T.matmul(x, wq)
    k = T.matmul(x, wk)
    v = T.matmul(x, wv)
    logits = T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(wq.cols))
    return T.matmul(T.softmax_rows(logits), v)


def multi_head(x: Tensor, params: dict, layer: int, h: int) -> Tensor:
    """Sum over heads of each head's output mapped back to d_model by its own W_O."""
    pre = f"enc.layer{layer}"
    out = None
    for i in range(h):
        head = single_head(x, params[f"{pre}.head{i}.wq"], params[f"{pre}.head{i}.wk"],
                           params[f"{pre}.head{i}.wv"])
        projected = T.matmul(head, params[f"{pre}.head{i}.wo"])
        out = projected if out is None else T.add(out, projected)
    return out


def feed_forward(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    hidden = T.relu(T.add_row(T.matmul(x, w1), b1))
    return T.add_row(T.matmul(hidden, w2), b2)


def encode(word_ids, params: dict, config: EncoderConfig,
           external_vectors=None) -> Tensor:
    x = embed_sentence(word_ids, params, config, external_vectors)
    for k in range(config.num_layers):
        pre = f"enc.layer{k}"
        x = T.layer_norm(T.add(x, multi_head(x, params, k, config.h)),
                         params[f"{pre}.ln1.gain"], params[f"{pre}.ln1.bias"])
        ff = feed_forward(x, params[f"{pre}.ff.w1"], params[f"{pre}.ff.b1"],
                          params[f"{pre}.ff.w2"], params[f"{pre}.ff.b2"])
        x = T.layer_norm(T.add(x, ff), params[f"{pre}.ln2.gain"], params[f"{pre}.ln2.bias"])
    return x
