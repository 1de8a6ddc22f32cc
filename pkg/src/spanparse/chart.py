"""Exact CKY-style decoding over span charts and the structured hinge loss.

Every span (i, j) of the binary tree built by the decoder takes its best
label, where the empty label (index 0) stands for "no constituent" and the
whole-sentence span must carry a real label.  Ties are broken by the
smallest split point and then by the lowest label index.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .span_model import Chart
from .treebank import (UNARY_SEP, Internal, LabeledSpan, Leaf, expand_unaries, leaves,
                       tree_to_spans)


class SpanOutOfRange(ValueError):
    pass


class UnknownLabel(KeyError):
    pass


class EmptyLabelVocab(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclasses.dataclass
class ScoredTree:
    tree: Internal
    score: float
    cells: list  # binary chart cells (LabeledSpan), empty-labeled ones included
    delta: float = 0.0
    objective: float | None = None  # score + delta, as optimized

    def __post_init__(self):
        if self.objective is None:
            self.objective = self.score + self.delta


def _gold_spans(chart: Chart, tree):
    spans = tree_to_spans(tree)
    n = spans[0].j
    if n != chart.n:
        raise LengthMismatch(f"tree over {n} words, chart over {chart.n}")
    return spans


def tree_score(chart: Chart, tree, strict: bool = False) -> float:
    """Sum of chart scores over the labeled spans of ``tree``.

    Labels missing from the chart's vocabulary raise :class:`UnknownLabel`
    in strict mode and otherwise score 0 like the empty label.
    """
    total = 0.0
    for i, j, label in tree_to_spans(tree):
        if not 0 <= i < j <= chart.n:
            raise SpanOutOfRange(f"span ({i}, {j}) outside chart of length {chart.n}")
        idx = chart.label_index(label, -1)
        if idx < 0:
            if strict:
                raise UnknownLabel(label)
            continue
        total += chart.scores[i, j, idx]
    return float(total)


def _best_labels(scores):
    """Best label and its score per span; the root span excludes the empty label."""
    n = scores.shape[0] - 1
    if scores.shape[2] < 2:
        raise EmptyLabelVocab("no non-empty label available for the root span")
    label = np.argmax(scores, axis=2)
    value = np.take_along_axis(scores, label[:, :, None], axis=2)[:, :, 0]
    root = 1 + int(np.argmax(scores[0, n, 1:]))
    label[0, n] = root
    value[0, n] = scores[0, n, root]
    return label, value


def _cky(scores):
    n = scores.shape[0] - 1
    if n < 1:
        raise ValueError("cannot decode an empty sentence")
    label, value = _best_labels(scores)
    best = np.zeros((n + 1, n + 1))
    split = np.zeros((n + 1, n + 1), dtype=int)
    for i in range(n):
        best[i, i + 1] = value[i, i + 1]
    for length in range(2, n + 1):
        for i in range(0, n - length + 1):
            j = i + length
            candidates = best[i, i + 1:j] + best[i + 1:j, j]
            k = int(np.argmax(candidates))
            split[i, j] = i + 1 + k
            best[i, j] = value[i, j] + candidates[k]

    cells = []

    def backtrack(i, j):
        cells.append((i, j, int(label[i, j])))
        if j - i > 1:
            k = split[i, j]
            backtrack(i, k)
            backtrack(k, j)

    backtrack(0, n)
    return float(best[0, n]), cells


def _build_tree(cells, chart: Chart, words, tags, sep=UNARY_SEP):
    it = iter(cells)

    def build():
        i, j, l = next(it)
        if j - i == 1:
            children = [Leaf(words[i], tags[i])]
        else:
            children = build() + build()
        name = chart.label_name(l)
        if name is None:
            return children
        return [expand_unaries(Internal(name, tuple(children)), sep)]

    (root,) = build()
    return root


def _as_spans(chart: Chart, cells):
    return [LabeledSpan(i, j, chart.label_name(l)) for i, j, l in cells]


def cky_decode(chart: Chart, words=None, tags=None) -> ScoredTree:
    """Highest-scoring tree under ``chart``.

    ``words``/``tags`` fill the leaves; they default to placeholders.
    """
    n = chart.n
    words = list(words) if words is not None else [f"w{i}" for i in range(n)]
    tags = list(tags) if tags is not None else ["X"] * n
    score, cells = _cky(chart.scores)
    return ScoredTree(_build_tree(cells, chart, words, tags), score, _as_spans(chart, cells))


def hamming_delta(pred_spans, gold_spans) -> float:
    """Number of predicted span slots whose label differs from gold's.

    ``pred_spans`` are the decoder's binary cells (empty labels included);
    gold spans not listed are treated as carrying the empty label.
    """
    pred_spans = list(pred_spans)
    gold_spans = list(gold_spans)
    if pred_spans and gold_spans:
        n_pred = max(s.j for s in pred_spans)
        n_gold = max(s.j for s in gold_spans)
        if n_pred != n_gold:
            raise LengthMismatch(f"spans over {n_pred} and {n_gold} words")
    gold = {(s.i, s.j): s.label for s in gold_spans}
    return float(sum(1 for s in pred_spans if gold.get((s.i, s.j)) != s.label))


def augment_chart(chart: Chart, gold_tree) -> np.ndarray:
    """Scores plus one for every label that disagrees with gold at that span."""
    n = chart.n
    aug = chart.scores.copy()
    for i in range(n):
        aug[i, i + 1:, :] += 1.0
        aug[i, i + 1:, 0] -= 1.0  # empty label is correct unless gold brackets the span
    for i, j, label in _gold_spans(chart, gold_tree):
        aug[i, j, 0] += 1.0
        idx = chart.label_index(label, -1)
        if idx > 0:
            aug[i, j, idx] -= 1.0
    return aug


def loss_augmented_decode(chart: Chart, gold_tree, words=None, tags=None) -> ScoredTree:
    """argmax over trees of S(T) + Delta(T, gold), solved on the augmented chart."""
    gold_leaves = list(leaves(gold_tree))
    words = words if words is not None else [l.word for l in gold_leaves]
    tags = tags if tags is not None else [l.pos for l in gold_leaves]
    aug = augment_chart(chart, gold_tree)
    objective, cells = _cky(aug)
    spans = _as_spans(chart, cells)
    delta = hamming_delta(spans, _gold_spans(chart, gold_tree))
    tree = _build_tree(cells, chart, words, tags)
    return ScoredTree(tree, objective - delta, spans, delta, objective)


def hinge_loss(chart: Chart, gold_tree) -> float:
    """max(0, max_T [S(T) + Delta(T, gold)] - S(gold))."""
    pred = loss_augmented_decode(chart, gold_tree)
    return max(0.0, pred.objective - tree_score(chart, gold_tree))


def hinge_terms(chart: Chart, gold_tree):
    """Loss value plus the score-matrix coefficients of its gradient.

    The returned coefficient array has shape (n+1, n+1, |L|): +1 on the
    loss-augmented prediction's labeled cells, -1 on gold's, all zero when
    the loss is clipped at 0.
    """
    pred = loss_augmented_decode(chart, gold_tree)
    gold_score = tree_score(chart, gold_tree)
    loss = max(0.0, pred.objective - gold_score)
    coef = np.zeros_like(chart.scores)
    if loss > 0:
        for i, j, label in pred.cells:
            if label is not None:
                coef[i, j, chart.label_index(label)] += 1.0
        for i, j, label in tree_to_spans(gold_tree):
            idx = chart.label_index(label, -1)
            if idx > 0:
                coef[i, j, idx] -= 1.0
    return loss, coef, pred
