"""Command-line interface: train, parse, eval, stats, split, config."""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import logging
import os
import sys

import numpy as np

from . import evalb
from .encoder import EncoderConfig
from .model import DEFAULT_D_HIDDEN
from .training import (TrainConfig, TrainingDiverged, load_checkpoint, save_checkpoint,
                       train)
from .treebank import (TreebankError, compute_stats, parse_bracketed, read_treebank,
                       sentence_of, split_corpus, write_bracketed, write_treebank)

log = logging.getLogger("spanparse")


class ConfigError(ValueError):
    pass


def _defaults():
    out = {}
    for cls in (TrainConfig, EncoderConfig):
        for f in dataclasses.fields(cls):
            if f.name != "checkpoint":
                out[f.name] = f.default
    out["d_hidden"] = DEFAULT_D_HIDDEN
    return out


DEFAULTS = _defaults()


def _coerce(key, raw):
    kind = type(DEFAULTS[key])
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (x.strip() for x in line.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def resolve_config(path, args) -> dict:
    values = dict(DEFAULTS)
    if path:
        values.update(read_config(path))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def read_vectors(path) -> list:
    """Per-sentence blocks: a ``n d`` header then ``n`` rows of ``d`` floats."""
    blocks = []
    width = None
    with open(path, encoding="utf-8") as f:
        lines = [l for l in (x.strip() for x in f) if l]
    k = 0
    while k < len(lines):
        try:
            n, d = (int(x) for x in lines[k].split())
        except ValueError:
            raise ConfigError(f"{path}: bad block header {lines[k]!r}") from None
        if width is not None and d != width:
            raise ConfigError(f"{path}: vector width changes from {width} to {d}")
        width = d
        rows = lines[k + 1:k + 1 + n]
        if len(rows) != n:
            raise ConfigError(f"{path}: truncated block {len(blocks)}")
        block = np.array([[float(x) for x in r.split()] for r in rows]).reshape(n, d)
        blocks.append(block)
        k += 1 + n
    return blocks


def write_vectors(path, blocks):
    with open(path, "w", encoding="utf-8") as f:
        for b in blocks:
            b = np.atleast_2d(b)
            f.write(f"{b.shape[0]} {b.shape[1]}\n")
            for row in b:
                f.write(" ".join(repr(float(x)) for x in row) + "\n")


def _check_vectors(blocks, trees, path):
    if len(blocks) != len(trees):
        raise ConfigError(f"{path}: {len(blocks)} blocks for {len(trees)} sentences")
    for k, (b, t) in enumerate(zip(blocks, trees)):
        if b.shape[0] != len(sentence_of(t)):
            raise ConfigError(f"{path}: block {k} has {b.shape[0]} rows, sentence has "
                              f"{len(sentence_of(t))} words")


def _read_trees(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    return read_treebank(path)


# ---------------------------------------------------------------------------
# Commands

def cmd_train(args):
    values = resolve_config(args.config, args)
    train_trees = _read_trees(args.train)
    dev_trees = _read_trees(args.dev)
    train_vectors = dev_vectors = None
    d_ext = values["d_ext"]
    if args.vectors:
        train_vectors = read_vectors(args.vectors)
        _check_vectors(train_vectors, train_trees, args.vectors)
        if train_vectors:
            d_ext = train_vectors[0].shape[1]
        dev_vectors = read_vectors(args.dev_vectors) if args.dev_vectors else None
        if dev_vectors is None and dev_trees:
            raise ConfigError("--dev-vectors is required with --vectors")
        if dev_vectors is not None:
            _check_vectors(dev_vectors, dev_trees, args.dev_vectors)
    values["d_ext"] = d_ext
    tc = TrainConfig(**{f.name: values[f.name] for f in dataclasses.fields(TrainConfig)
                        if f.name != "checkpoint"}, checkpoint=args.out)
    ec = EncoderConfig(**{f.name: values[f.name] for f in dataclasses.fields(EncoderConfig)})
    ckpt = train(train_trees, dev_trees, tc, ec, values["d_hidden"],
                 train_vectors=train_vectors, dev_vectors=dev_vectors, out=sys.stderr)
    print(f"best epoch {ckpt.epoch}, dev F1 {ckpt.dev_f1:.2f}, saved to {args.out}",
          file=sys.stderr)
    return 0


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_parse(args):
    parser = load_checkpoint(args.model).parser
    if args.input == "-":
        lines = sys.stdin.read().splitlines()
    else:
        with open(args.input, encoding="utf-8") as f:
            lines = f.read().splitlines()
    sentences = [l.split() for l in lines]
    vectors = [None] * len(sentences)
    if args.vectors:
        blocks = read_vectors(args.vectors)
        nonempty = [k for k, s in enumerate(sentences) if s]
        if len(blocks) != len(nonempty):
            raise ConfigError(f"{args.vectors}: {len(blocks)} blocks for {len(nonempty)} sentences")
        for k, b in zip(nonempty, blocks):
            vectors[k] = b

    def run(item):
        words, vec = item
        return write_bracketed(parser.parse(words, vec)) if words else ""

    for line in _map(run, list(zip(sentences, vectors)), args.threads):
        print(line)
    return 0


def cmd_eval(args):
    gold = _read_trees(args.gold)
    pred = _read_trees(args.pred)
    report = evalb.evaluate_corpus(pred, gold, args.ignore_root, args.delete_punct)
    print(report.format_table())
    if args.per_label:
        with open(args.per_label, "w", encoding="utf-8") as f:
            f.write(report.to_csv())
    return 0


def cmd_stats(args):
    stats = compute_stats(_read_trees(args.input))
    print(f"{'label':<16}{'count':>8}")
    for label, c in sorted(stats.label_counts.items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"{label:<16}{c:>8}")
    print(f"sentences={stats.sentences} tokens={stats.tokens} "
          f"mean_length={stats.mean_length:.2f} max_length={stats.max_length}")
    if args.pos:
        print(f"{'tag':<16}{'count':>8}")
        for tag, c in sorted(stats.pos_counts.items(), key=lambda kv: (-kv[1], kv[0])):
            print(f"{tag:<16}{c:>8}")
    return 0


def cmd_split(args):
    trees = _read_trees(args.input)
    tr, dev = split_corpus(trees, args.train, args.dev, args.seed, args.shuffle)
    out_train = args.out_train or args.input + ".train"
    out_dev = args.out_dev or args.input + ".dev"
    write_treebank(out_train, tr)
    write_treebank(out_dev, dev)
    print(f"{len(tr)} trees -> {out_train}\n{len(dev)} trees -> {out_dev}")
    return 0


def cmd_config(args):
    for key, value in DEFAULTS.items():
        print(f"{key} = {value}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="spanparse", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a parser")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--vectors", help="external vectors for the training sentences")
    p.add_argument("--dev-vectors", help="external vectors for the dev sentences")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", required=True, help="checkpoint path")
    for key, default in DEFAULTS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=type(default), default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("parse", help="parse tokenized sentences, one per line")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="file or - for standard input")
    p.add_argument("--vectors")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("eval", help="labeled bracket scores of predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--per-label", help="write per-label CSV here")
    p.add_argument("--ignore-root", action="store_true")
    p.add_argument("--delete-punct", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("stats", help="constituent label statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--pos", action="store_true", help="also list POS tag counts")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("split", help="split a treebank into train and dev")
    p.add_argument("--input", required=True)
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--dev", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--out-train")
    p.add_argument("--out-dev")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("config", help="show configuration keys")
    p.add_argument("--dump-defaults", action="store_true", required=True)
    p.set_defaults(fn=cmd_config)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.fn(args)
    except TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ConfigError, TreebankError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
