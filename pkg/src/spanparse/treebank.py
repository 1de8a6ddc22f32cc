"""Bracketed treebank I/O, span extraction and corpus utilities."""

from __future__ import annotations

import collections
import dataclasses
import random
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union

UNARY_SEP = "⋄"


class TreebankError(ValueError):
    pass


class UnbalancedParens(TreebankError):
    def __init__(self, line):
        super().__init__(f"unbalanced parentheses at line {line}")
        self.line = line


class EmptyNode(TreebankError):
    def __init__(self, position):
        super().__init__(f"empty node at {position}")
        self.position = position


class LeafWithoutTag(TreebankError):
    def __init__(self, position):
        super().__init__(f"word without a part-of-speech tag at {position}")
        self.position = position


class NoRootSpan(TreebankError):
    """A tree with no internal node above its preterminals."""


class SeparatorInLabel(TreebankError):
    pass


class CountsExceedCorpus(TreebankError):
    pass


@dataclasses.dataclass(frozen=True)
class Sentence:
    words: tuple
    pos_tags: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if self.pos_tags is not None:
            object.__setattr__(self, "pos_tags", tuple(self.pos_tags))
        if not self.words:
            raise ValueError("sentence must contain at least one word")
        if self.pos_tags is not None and len(self.pos_tags) != len(self.words):
            raise ValueError("pos_tags and words differ in length")
        for w in self.words:
            if not w or any(c.isspace() for c in w):
                raise ValueError(f"invalid token {w!r}")

    def __len__(self):
        return len(self.words)


@dataclasses.dataclass(frozen=True)
class Leaf:
    word: str
    pos: str


@dataclasses.dataclass(frozen=True)
class Internal:
    label: str
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError(f"internal node {self.label!r} has no children")


ParseTree = Union[Internal, Leaf]


class LabeledSpan(NamedTuple):
    i: int
    j: int
    label: Optional[str]  # None is the empty label


def leaves(tree: ParseTree) -> Iterator[Leaf]:
    if isinstance(tree, Leaf):
        yield tree
    else:
        for child in tree.children:
            yield from leaves(child)


def sentence_of(tree: ParseTree) -> Sentence:
    ls = list(leaves(tree))
    return Sentence(tuple(l.word for l in ls), tuple(l.pos for l in ls))


def internal_nodes(tree: ParseTree) -> Iterator[Internal]:
    if isinstance(tree, Internal):
        yield tree
        for child in tree.children:
            yield from internal_nodes(child)


# ---------------------------------------------------------------------------
# Reading and writing

def _escape(token):
    return token.replace("(", "-LRB-").replace(")", "-RRB-")


def _unescape(token):
    return token.replace("-LRB-", "(").replace("-RRB-", ")")


def _tokenize(text):
    """Yield (token, line, column); tokens are '(', ')' or atoms."""
    line, col = 1, 0
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 0
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c in "()":
            yield c, line, col
            i += 1
            col += 1
            continue
        start = i
        while i < n and not text[i].isspace() and text[i] not in "()":
            i += 1
        yield text[start:i], line, col
        col += i - start


def parse_bracketed(text: str) -> list:
    """Parse every top-level s-expression in ``text`` into a tree.

    An unlabeled outer wrapper such as ``( (S ...) )`` is stripped.
    """
    tokens = list(_tokenize(text))
    trees = []
    pos = 0

    def parse_node(k):
        # tokens[k] == "("
        open_line = tokens[k][1]
        k += 1
        if k >= len(tokens):
            raise UnbalancedParens(open_line)
        tok, line, col = tokens[k]
        if tok == ")":
            raise EmptyNode(f"line {line}, column {col}")
        label = None
        if tok != "(":
            label = tok
            k += 1
        children = []
        words = []
        while True:
            if k >= len(tokens):
                raise UnbalancedParens(open_line)
            tok, line, col = tokens[k]
            if tok == ")":
                k += 1
                break
            if tok == "(":
                child, k = parse_node(k)
                children.append(child)
            else:
                words.append((tok, line, col))
                k += 1
        if label is None:
            # unlabeled wrapper
            if words:
                raise LeafWithoutTag(f"line {words[0][1]}, column {words[0][2]}")
            if not children:
                raise EmptyNode(f"line {open_line}")
            return ("wrapper", children), k
        if words and children:
            raise LeafWithoutTag(f"line {words[0][1]}, column {words[0][2]}")
        if words:
            if len(words) > 1:
                raise LeafWithoutTag(f"line {words[1][1]}, column {words[1][2]}")
            return Leaf(_unescape(words[0][0]), label), k
        if not children:
            raise EmptyNode(f"line {line}, column {col}")
        for c in children:
            if isinstance(c, tuple):
                raise EmptyNode(f"unlabeled node inside {label!r} at line {line}")
        return Internal(label, tuple(children)), k

    while pos < len(tokens):
        tok, line, col = tokens[pos]
        if tok == ")":
            raise UnbalancedParens(line)
        if tok != "(":
            raise LeafWithoutTag(f"line {line}, column {col}")
        node, pos = parse_node(pos)
        if isinstance(node, tuple):
            inner = node[1]
            if len(inner) != 1 or isinstance(inner[0], tuple):
                raise EmptyNode(f"wrapper at line {line} must hold exactly one tree")
            node = inner[0]
        if isinstance(node, Leaf):
            raise NoRootSpan(f"tree at line {line} has no constituent above its word")
        trees.append(node)
    return trees


def write_bracketed(tree: ParseTree) -> str:
    if isinstance(tree, Leaf):
        return f"({tree.pos} {_escape(tree.word)})"
    return "({} {})".format(tree.label, " ".join(write_bracketed(c) for c in tree.children))


def read_treebank(path) -> list:
    with open(path, encoding="utf-8") as f:
        return parse_bracketed(f.read())


def write_treebank(path, trees: Iterable[ParseTree]):
    with open(path, "w", encoding="utf-8") as f:
        for t in trees:
            f.write(write_bracketed(t) + "\n")


# ---------------------------------------------------------------------------
# Unary chains and spans

def collapse_unaries(tree: ParseTree, sep: str = UNARY_SEP) -> ParseTree:
    """Merge chains of single-child internal nodes into one joined label."""
    if isinstance(tree, Leaf):
        return tree
    labels = [tree.label]
    node = tree
    while len(node.children) == 1 and isinstance(node.children[0], Internal):
        node = node.children[0]
        labels.append(node.label)
    for label in labels:
        if sep in label:
            raise SeparatorInLabel(f"label {label!r} contains separator {sep!r}")
    children = tuple(collapse_unaries(c, sep) for c in node.children)
    return Internal(sep.join(labels), children)


def expand_unaries(tree: ParseTree, sep: str = UNARY_SEP) -> ParseTree:
    if isinstance(tree, Leaf):
        return tree
    children = tuple(expand_unaries(c, sep) for c in tree.children)
    parts = tree.label.split(sep)
    node = Internal(parts[-1], children)
    for label in reversed(parts[:-1]):
        node = Internal(label, (node,))
    return node


def tree_to_spans(tree: ParseTree, sep: str = UNARY_SEP, collapse: bool = True) -> list:
    """Labeled spans of the internal nodes of ``tree``, preterminals excluded.

    With ``collapse`` unary chains yield a single span with a joined label;
    otherwise every node in a chain yields its own span (evalb style).
    Spans are listed in pre-order.
    """
    if collapse:
        tree = collapse_unaries(tree, sep)
    spans = []

    def walk(node, start):
        if isinstance(node, Leaf):
            return start + 1
        k = len(spans)
        spans.append(None)
        end = start
        for c in node.children:
            end = walk(c, end)
        spans[k] = LabeledSpan(start, end, node.label)
        return end

    walk(tree, 0)
    return spans


# ---------------------------------------------------------------------------
# Vocabularies and statistics

class LabelVocab:
    """Bidirectional label <-> index map with the empty label at index 0."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels = [None]
        self._index = {None: 0}
        for label in labels:
            self.add(label)

    @classmethod
    def from_trees(cls, trees, sep=UNARY_SEP):
        labels = set()
        for t in trees:
            labels.update(s.label for s in tree_to_spans(t, sep))
        return cls(sorted(labels))

    def add(self, label):
        if label not in self._index:
            self._index[label] = len(self._labels)
            self._labels.append(label)
        return self._index[label]

    def index(self, label, default=None):
        if default is None:
            return self._index[label]
        return self._index.get(label, default)

    def __contains__(self, label):
        return label in self._index

    def label(self, idx):
        return self._labels[idx]

    @property
    def labels(self):
        return list(self._labels)

    def __len__(self):
        return len(self._labels)

    def __eq__(self, other):
        return isinstance(other, LabelVocab) and self._labels == other._labels

    def __repr__(self):
        return f"LabelVocab({self._labels[1:]!r})"


@dataclasses.dataclass
class TreebankStats:
    label_counts: collections.Counter = dataclasses.field(default_factory=collections.Counter)
    pos_counts: collections.Counter = dataclasses.field(default_factory=collections.Counter)
    sentences: int = 0
    tokens: int = 0
    max_length: int = 0

    @property
    def mean_length(self):
        return self.tokens / self.sentences if self.sentences else 0.0

    def __add__(self, other):
        return TreebankStats(
            self.label_counts + other.label_counts,
            self.pos_counts + other.pos_counts,
            self.sentences + other.sentences,
            self.tokens + other.tokens,
            max(self.max_length, other.max_length),
        )


def compute_stats(corpus: Iterable[ParseTree]) -> TreebankStats:
    stats = TreebankStats()
    for tree in corpus:
        n = 0
        for leaf in leaves(tree):
            stats.pos_counts[leaf.pos] += 1
            n += 1
        for node in internal_nodes(tree):
            stats.label_counts[node.label] += 1
        stats.sentences += 1
        stats.tokens += n
        stats.max_length = max(stats.max_length, n)
    return stats


def split_corpus(corpus: Sequence, train_count: int, dev_count: int, seed: int = 0,
                 shuffle: bool = False):
    """Split off a dev set from the tail of the training portion.

    In the default mode order is preserved: the first ``train_count`` trees
    train and the following ``dev_count`` trees form dev. ``shuffle``
    permutes the corpus with ``seed`` first.
    """
    if train_count < 0 or dev_count < 0 or train_count + dev_count > len(corpus):
        raise CountsExceedCorpus(
            f"{train_count} + {dev_count} trees requested from a corpus of {len(corpus)}")
    items = list(corpus)
    if shuffle:
        random.Random(seed).shuffle(items)
    return items[:train_count], items[train_count:train_count + dev_count]
