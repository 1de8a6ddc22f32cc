"""Margin training with an auxiliary tagging loss, plus checkpoints."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import struct
import sys
import time
import warnings

import numpy as np

from . import tensor as T
from .encoder import EncoderConfig, WordVocab
from .evalb import evaluate_corpus
from .model import DEFAULT_D_HIDDEN, MissingGoldTags, Parser, TagVocab
from .treebank import LabelVocab, Sentence, sentence_of

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CSPCK"
CHECKPOINT_VERSION = 1


class EmptyCorpus(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


class VersionError(ValueError):
    pass


@dataclasses.dataclass
class TrainConfig:
    max_epochs: int = 150
    batch_size: int = 150
    sub_batch_max_tokens: int = 1500
    learning_rate: float = 1e-3
    pos_loss_weight: float = 1.0
    seed: int = 0
    patience: int = 10
    checkpoint: str | None = None

    def __post_init__(self):
        for field in ("max_epochs", "batch_size", "sub_batch_max_tokens", "patience"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")
        if self.learning_rate <= 0 or self.pos_loss_weight < 0:
            raise ValueError("learning_rate must be positive and pos_loss_weight non-negative")


class Adam:
    def __init__(self, params: dict, lr=1e-3, betas=(0.9, 0.998), eps=1e-9):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            p.value -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def total_loss(sentence: Sentence, gold_tree, parser: Parser, pos_weight=1.0, vectors=None):
    """Hinge loss plus ``pos_weight`` times mean per-token tag cross-entropy."""
    if sentence.pos_tags is None and pos_weight:
        warnings.warn("no gold tags; tagging loss disabled", MissingGoldTags, stacklevel=2)
        pos_weight = 0.0
    loss, _, _ = parser.loss(gold_tree, vectors, pos_weight, sentence.pos_tags)
    return loss


def sub_batches(indices, lengths, max_tokens):
    """Greedy consecutive groups whose (length + 2) totals stay within ``max_tokens``."""
    groups, current, used = [], [], 0
    for k in indices:
        cost = lengths[k] + 2
        if current and used + cost > max_tokens:
            groups.append(current)
            current, used = [], 0
        current.append(k)
        used += cost
    if current:
        groups.append(current)
    return groups


@dataclasses.dataclass
class Checkpoint:
    parser: Parser
    train_config: TrainConfig
    epoch: int = 0
    dev_f1: float = 0.0
    trace: list = dataclasses.field(default_factory=list)  # mean train loss per epoch


def parse_corpus(parser: Parser, sentences, vectors=None):
    vectors = vectors or [None] * len(sentences)
    return [parser.parse(words, v) for words, v in zip(sentences, vectors)]


def evaluate_parser(parser: Parser, trees, vectors=None):
    sents = [sentence_of(t).words for t in trees]
    return evaluate_corpus(parse_corpus(parser, sents, vectors), trees)


def train(train_trees, dev_trees, config: TrainConfig, encoder_config: EncoderConfig | None = None,
          d_hidden: int = DEFAULT_D_HIDDEN, parser: Parser | None = None,
          train_vectors=None, dev_vectors=None, out=sys.stdout) -> Checkpoint:
    """Train a parser and return the checkpoint with the best dev F1."""
    train_trees = list(train_trees)
    dev_trees = list(dev_trees)
    if not train_trees:
        raise EmptyCorpus("training corpus is empty")
    if parser is None:
        parser = Parser.from_treebank(train_trees, encoder_config or EncoderConfig(),
                                      d_hidden, config.seed)
    sents = [sentence_of(t) for t in train_trees]
    lengths = [len(s) for s in sents]
    usable = []
    for k, n in enumerate(lengths):
        if n + 2 > config.sub_batch_max_tokens:
            log.warning("skipping training sentence %d: %d tokens exceed sub-batch limit", k, n)
        else:
            usable.append(k)
    if not usable:
        raise EmptyCorpus("no training sentence fits in a sub-batch")
    train_vectors = train_vectors or [None] * len(train_trees)
    dev_vectors = dev_vectors or [None] * len(dev_trees)

    rng = np.random.default_rng(config.seed)
    opt = Adam(parser.params, lr=config.learning_rate)
    best = Checkpoint(parser, config, 0, -1.0)
    best_values = None
    best_pos = -1.0
    since_best = 0
    csv_rows = []

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = [usable[k] for k in rng.permutation(len(usable))]
        epoch_loss = 0.0
        for b in range(0, len(order), config.batch_size):
            batch = order[b:b + config.batch_size]
            parser.zero_grad()
            for group in sub_batches(batch, lengths, config.sub_batch_max_tokens):
                summed = None
                for k in group:
                    loss = total_loss(sents[k], train_trees[k], parser,
                                      config.pos_loss_weight, train_vectors[k])
                    summed = loss if summed is None else T.add(summed, loss)
                value = summed.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
                epoch_loss += value
                T.backward(summed)
            opt.step()
        train_loss = epoch_loss / len(order)
        if dev_trees:
            report = evaluate_parser(parser, dev_trees, dev_vectors)
            dev_f1, dev_pos = report.f1, report.pos_accuracy
        else:
            dev_f1 = dev_pos = 0.0
        seconds = time.perf_counter() - t0
        print(f"epoch={epoch} train_loss={train_loss:.6f} dev_f1={dev_f1:.2f} "
              f"seconds={seconds:.2f}", file=out, flush=True)
        csv_rows.append((epoch, train_loss, dev_f1, seconds))

        # dev F1 decides; tagging accuracy breaks ties
        if (dev_f1, dev_pos) > (best.dev_f1, best_pos):
            best = Checkpoint(parser, config, epoch, dev_f1)
            best_pos = dev_pos
            best_values = {k: p.value.copy() for k, p in parser.params.items()}
            since_best = 0
        else:
            since_best += 1
        if since_best >= config.patience:
            break

    for k, v in best_values.items():
        parser.params[k].value = v
    best.dev_f1 = max(best.dev_f1, 0.0)
    if config.checkpoint:
        save_checkpoint(config.checkpoint, best)
        with open(str(config.checkpoint) + ".log.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "dev_f1", "seconds"])
            w.writerows(csv_rows)
    best.trace = [r[1] for r in csv_rows]
    return best


# ---------------------------------------------------------------------------
# Checkpoints: magic, version byte, JSON header length + header, parameter container

def dump_checkpoint(ckpt: Checkpoint) -> bytes:
    p = ckpt.parser
    header = {
        "encoder": dataclasses.asdict(p.config),
        "d_hidden": p.d_hidden,
        "train": dataclasses.asdict(ckpt.train_config),
        "words": p.words.words,
        "labels": p.labels.labels[1:],
        "tags": p.tags.tags[1:],
        "epoch": ckpt.epoch,
        "dev_f1": ckpt.dev_f1,
    }
    raw = json.dumps(header, ensure_ascii=False).encode("utf-8")
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(bytes([CHECKPOINT_VERSION]))
    out.write(struct.pack("<I", len(raw)))
    out.write(raw)
    out.write(T.dump_params(p.params))
    return out.getvalue()


def load_checkpoint_bytes(data: bytes) -> Checkpoint:
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise VersionError("not a parser checkpoint (bad magic bytes)")
    k = len(CHECKPOINT_MAGIC)
    if len(data) <= k or data[k] != CHECKPOINT_VERSION:
        raise VersionError(f"unsupported checkpoint version {data[k] if len(data) > k else None}")
    k += 1
    (size,) = struct.unpack_from("<I", data, k)
    k += 4
    header = json.loads(data[k:k + size].decode("utf-8"))
    values = T.load_params(data[k + size:])
    parser = Parser(EncoderConfig(**header["encoder"]), WordVocab(header["words"][3:]), LabelVocab(header["labels"]),
                    TagVocab(header["tags"]), header["d_hidden"],
                    params={name: T.parameter(v, name) for name, v in values.items()})
    return Checkpoint(parser, TrainConfig(**header["train"]), header["epoch"], header["dev_f1"])


def save_checkpoint(path, ckpt: Checkpoint):
    with open(path, "wb") as f:
        f.write(dump_checkpoint(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        return load_checkpoint_bytes(f.read())
