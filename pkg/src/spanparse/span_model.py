"""Span representations, label scores and the POS tagging head."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .treebank import LabelVocab


@dataclasses.dataclass
class Chart:
    """Span scores ``scores[i, j, l]`` for 0 <= i < j <= n; cells with i >= j are unused."""

    scores: np.ndarray
    labels: LabelVocab | None = None

    @property
    def n(self):
        return self.scores.shape[0] - 1

    @property
    def num_labels(self):
        return self.scores.shape[2]

    def label_name(self, idx):
        if self.labels is not None:
            return self.labels.label(idx)
        return None if idx == 0 else f"L{idx}"

    def label_index(self, label, default=None):
        if self.labels is not None:
            return self.labels.index(label, default)
        if label is None:
            return 0
        if isinstance(label, str) and label.startswith("L") and label[1:].isdigit():
            idx = int(label[1:])
            if 0 < idx < self.num_labels:
                return idx
        if default is None:
            raise KeyError(label)
        return default

    def dump(self) -> str:
        """Debug listing, one ``i j label score`` line per span and label."""
        lines = []
        for i in range(self.n):
            for j in range(i + 1, self.n + 1):
                for l in range(self.num_labels):
                    name = self.label_name(l)
                    lines.append(f"{i} {j} {'<empty>' if name is None else name} "
                                 f"{float(self.scores[i, j, l])!r}")
        return "\n".join(lines) + "\n"


def span_indices(n):
    """Fencepost pairs (i, j), i < j, in the row order used by the score matrix."""
    return [(i, j) for i in range(n) for j in range(i + 1, n + 1)]


def init_scorer_params(d_model: int, d_hidden: int, num_labels: int, num_tags: int, rng) -> dict:
    limit1 = np.sqrt(6.0 / (d_model + d_hidden))
    limit2 = np.sqrt(6.0 / (d_hidden + num_labels))
    limit3 = np.sqrt(6.0 / (d_model + num_tags))
    p = {
        "span.m1": rng.uniform(-limit1, limit1, (d_model, d_hidden)),
        "span.c1": np.zeros((1, d_hidden)),
        "span.ln.gain": np.ones((1, d_hidden)),
        "span.ln.bias": np.zeros((1, d_hidden)),
        "span.m2": rng.uniform(-limit2, limit2, (d_hidden, num_labels)),
        "pos.w": rng.uniform(-limit3, limit3, (d_model, num_tags)),
        "pos.b": np.zeros((1, num_tags)),
    }
    return {name: T.parameter(v, name) for name, v in p.items()}


def fencepost_matrix(y: Tensor) -> Tensor:
    """Row t holds the forward half of Y[t] and the backward half of Y[t+1]."""
    n2, d = y.shape
    half = d // 2
    fwd = T.take_rows(T.take_cols(y, 0, half), range(0, n2 - 1))
    bwd = T.take_rows(T.take_cols(y, half, d), range(1, n2))
    return T.concat_cols([fwd, bwd])


def span_vectors(y: Tensor, spans) -> Tensor:
    """Stack of span vectors, one row per (i, j) in ``spans``."""
    n = y.rows - 2
    for i, j in spans:
        if not 0 <= i < j <= n:
            raise IndexError(f"span ({i}, {j}) outside a sentence of length {n}")
    f = fencepost_matrix(y)
    starts = [i for i, _ in spans]
    ends = [j for _, j in spans]
    return T.sub(T.take_rows(f, ends), T.take_rows(f, starts))


def span_vector(y, i, j) -> np.ndarray:
    return span_vectors(y if isinstance(y, Tensor) else T.constant(y), [(i, j)]).value[0]


def score_spans(v: Tensor, params: dict) -> Tensor:
    """Label scores M2 relu(LN(M1 v + c1)) for every row of ``v``; no output bias."""
    hidden = T.add_row(T.matmul(v, params["span.m1"]), params["span.c1"])
    hidden = T.relu(T.layer_norm(hidden, params["span.ln.gain"], params["span.ln.bias"]))
    return T.matmul(hidden, params["span.m2"])


def score_span(v, params: dict) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(1, -1)
    return score_spans(T.constant(v), params).value[0]


def score_chart(y: Tensor, params: dict, labels: LabelVocab | None = None):
    """Score all spans of an encoded sentence.

    Returns the differentiable (num_spans x |L|) score matrix, rows ordered
    as :func:`span_indices`, and the dense :class:`Chart` with the empty
    label column fixed at zero.
    """
    n = y.rows - 2
    if n < 1:
        raise ValueError("cannot score an empty sentence")
    spans = span_indices(n)
    scores = score_spans(span_vectors(y, spans), params)
    num_labels = scores.cols
    dense = np.zeros((n + 1, n + 1, num_labels))
    ii = np.array([i for i, _ in spans])
    jj = np.array([j for _, j in spans])
    dense[ii, jj] = scores.value
    dense[:, :, 0] = 0.0
    return scores, Chart(dense, labels)


def pos_logits(y: Tensor, params: dict) -> Tensor:
    """Tag logits for word rows 1..n; START and STOP are skipped."""
    n = y.rows - 2
    words = T.take_rows(y, range(1, n + 1))
    return T.add_row(T.matmul(words, params["pos.w"]), params["pos.b"])
