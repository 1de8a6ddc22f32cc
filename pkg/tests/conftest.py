import random

import numpy as np
import pytest

from spanparse.encoder import EncoderConfig
from spanparse.treebank import Internal, Leaf, parse_bracketed

SAMPLE_TREE = "(S (NP (Nr Nam)) (VP (Vv kể) (PP (Cs về) (NP (Nc con) (N mèo)))) (PU .))"

LABELS = ["S", "NP", "VP", "PP", "AP"]
TAGS = ["N", "V", "A", "P", "PU"]
WORDS = ["a", "bé", "cá", "đi", "x(y", "mèo", "con", "."]


def random_tree(rng: random.Random, max_words=8, labels=LABELS, unary_p=0.2):
    """Random tree over 1..max_words words; every tree has a labeled root."""
    n = rng.randint(1, max_words)

    def build(width, depth):
        if width == 1 and (depth > 0 and rng.random() < 0.5):
            return Leaf(rng.choice(WORDS), rng.choice(TAGS))
        if width == 1:
            child = Leaf(rng.choice(WORDS), rng.choice(TAGS))
            node = Internal(rng.choice(labels), (child,))
        else:
            parts = []
            rest = width
            while rest:
                k = rng.randint(1, rest if len(parts) else max(1, rest - 1))
                parts.append(k)
                rest -= k
            node = Internal(rng.choice(labels), tuple(build(k, depth + 1) for k in parts))
        if rng.random() < unary_p:
            node = Internal(rng.choice(labels), (node,))
        return node

    return build(n, 0)


@pytest.fixture
def sample_tree():
    return parse_bracketed(SAMPLE_TREE)[0]


@pytest.fixture
def tiny_config():
    return EncoderConfig(d_model=8, d_k=8, d_v=8, h=2, num_layers=1, d_ff=8, max_len=20)


def dyadic_chart(rng: np.random.Generator, n, num_labels, denom=8, span=4):
    """Chart with entries in multiples of 1/denom so sums are exact and ties common."""
    scores = rng.integers(-span * denom, span * denom + 1, size=(n + 1, n + 1, num_labels)) / denom
    scores[:, :, 0] = 0.0
    return scores


# acceptance results, echoed in the terminal summary so they show without -s
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
