"""The parser: encoder + span scorer + chart decoder behind one object."""

from __future__ import annotations

import numpy as np

from . import chart as C
from . import encoder as E
from . import span_model as S
from . import tensor as T
from .treebank import LabelVocab, Sentence, leaves, sentence_of

DEFAULT_D_HIDDEN = 250


class MissingGoldTags(UserWarning):
    pass


class TagVocab:
    """POS tag <-> index, with an unknown-tag row at 0 that is never predicted."""

    def __init__(self, tags=()):
        self.tags = [E.UNK]
        self._index = {E.UNK: 0}
        for t in tags:
            if t not in self._index:
                self._index[t] = len(self.tags)
                self.tags.append(t)

    def index(self, tag):
        return self._index.get(tag, 0)

    def __len__(self):
        return len(self.tags)

    def __eq__(self, other):
        return isinstance(other, TagVocab) and self.tags == other.tags


class Parser:
    def __init__(self, config: E.EncoderConfig, words: E.WordVocab, labels: LabelVocab,
                 tags: TagVocab, d_hidden: int = DEFAULT_D_HIDDEN, seed: int = 0,
                 params: dict | None = None):
        self.config = config
        self.words = words
        self.labels = labels
        self.tags = tags
        self.d_hidden = d_hidden
        if params is None:
            rng = np.random.default_rng(seed)
            params = E.init_encoder_params(config, len(words), rng)
            params.update(S.init_scorer_params(config.d_model, d_hidden, len(labels),
                                               len(tags), rng))
        self.params = params

    @classmethod
    def from_treebank(cls, trees, config: E.EncoderConfig, d_hidden=DEFAULT_D_HIDDEN, seed=0):
        """Build vocabularies from training trees only and initialize weights."""
        words, tags = [], []
        for t in trees:
            for leaf in leaves(t):
                words.append(leaf.word)
                tags.append(leaf.pos)
        return cls(config, E.WordVocab(sorted(set(words))), LabelVocab.from_trees(trees),
                   TagVocab(sorted(set(tags))), d_hidden, seed)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def encode(self, words, vectors=None):
        ids = [self.words.index(w) for w in words]
        return E.encode(ids, self.params, self.config, vectors)

    def forward(self, words, vectors=None):
        """Encoder output, differentiable span-score matrix and dense chart."""
        y = self.encode(words, vectors)
        scores, chart = S.score_chart(y, self.params, self.labels)
        return y, scores, chart

    def chart(self, words, vectors=None) -> S.Chart:
        return self.forward(words, vectors)[2]

    def predict_tags(self, y):
        logits = S.pos_logits(y, self.params).value
        if len(self.tags) > 1:
            idx = 1 + np.argmax(logits[:, 1:], axis=1)
        else:
            idx = np.zeros(logits.shape[0], dtype=int)
        return [self.tags.tags[k] for k in idx]

    def parse(self, words, vectors=None):
        """Best tree for a tokenized sentence, leaves tagged by the POS head."""
        words = list(words)
        Sentence(words)
        y, _, chart = self.forward(words, vectors)
        return C.cky_decode(chart, words, self.predict_tags(y)).tree

    def loss(self, gold_tree, vectors=None, pos_weight=1.0, pos_tags=None):
        """Differentiable hinge + pos_weight * tagging loss for one gold tree.

        Tagging targets are ``pos_tags`` if given, else the tree's leaf tags.
        Returns (loss tensor, hinge value, tagging value).
        """
        sent = sentence_of(gold_tree)
        y, scores, chart = self.forward(sent.words, vectors)
        hinge, coef, _ = C.hinge_terms(chart, gold_tree)
        spans = S.span_indices(chart.n)
        ii = np.array([i for i, _ in spans])
        jj = np.array([j for _, j in spans])
        total = T.masked_sum(scores, coef[ii, jj])
        if hinge > 0:
            # loss-augmented objective is S(pred) + Delta - S(gold); add the constant Delta part
            total = T.add(total, T.constant([[hinge - total.item()]]))
        pos_value = 0.0
        if pos_weight:
            targets = [self.tags.index(t) for t in (pos_tags or sent.pos_tags)]
            pos = T.cross_entropy(S.pos_logits(y, self.params), targets)
            pos_value = pos.item()
            total = T.add(total, T.scale(pos, pos_weight))
        return total, hinge, pos_value
