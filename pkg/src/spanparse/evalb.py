"""Labeled bracket scoring in the evalb style, micro-averaged over a corpus."""

from __future__ import annotations

import collections
import csv
import dataclasses
import io
from decimal import ROUND_HALF_UP, Decimal

from .treebank import Leaf, leaves

PUNCT_TAGS = frozenset({"PU", ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$"})


class LengthMismatch(ValueError):
    pass


class TokenMismatch(ValueError):
    def __init__(self, index, detail=""):
        super().__init__(f"sentence {index}: words differ between prediction and gold {detail}")
        self.index = index


def round_half_up(x, places=2):
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def f1_score(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def prf(matched, predicted, gold):
    """Precision, recall and F1 as percentages; empty denominators give 0."""
    p = 100.0 * matched / predicted if predicted else 0.0
    r = 100.0 * matched / gold if gold else 0.0
    return p, r, f1_score(p, r)


def brackets(tree, ignore_root=False, delete_punct=False, punct_tags=PUNCT_TAGS):
    """Multiset of (i, j, label) for every non-preterminal node, unary chains unfolded."""
    spans = collections.Counter()

    def walk(node, start, top):
        if isinstance(node, Leaf):
            return start + (0 if delete_punct and node.pos in punct_tags else 1)
        end = start
        for child in node.children:
            end = walk(child, end, False)
        if end > start and not (top and ignore_root):
            spans[start, end, node.label] += 1
        return end

    walk(tree, 0, True)
    return spans


@dataclasses.dataclass
class Counts:
    matched: int = 0
    predicted: int = 0
    gold: int = 0

    def __iadd__(self, other):
        self.matched += other.matched
        self.predicted += other.predicted
        self.gold += other.gold
        return self

    @property
    def prf(self):
        return prf(self.matched, self.predicted, self.gold)


def match_brackets(pred, gold, index=0, ignore_root=False, delete_punct=False):
    """Return (total Counts, {label: Counts}) for one sentence pair."""
    pw = [l.word for l in leaves(pred)]
    gw = [l.word for l in leaves(gold)]
    if pw != gw:
        raise TokenMismatch(index, f"({len(pw)} vs {len(gw)} tokens)")
    pb = brackets(pred, ignore_root, delete_punct)
    gb = brackets(gold, ignore_root, delete_punct)
    common = pb & gb
    per_label = collections.defaultdict(Counts)
    for (_, _, label), c in pb.items():
        per_label[label].predicted += c
    for (_, _, label), c in gb.items():
        per_label[label].gold += c
    for (_, _, label), c in common.items():
        per_label[label].matched += c
    total = Counts(sum(common.values()), sum(pb.values()), sum(gb.values()))
    return total, dict(per_label)


@dataclasses.dataclass
class EvalReport:
    total: Counts = dataclasses.field(default_factory=Counts)
    per_label: dict = dataclasses.field(default_factory=dict)
    pos_correct: int = 0
    pos_total: int = 0
    sentences: int = 0
    exact_match: int = 0

    @property
    def precision(self):
        return self.total.prf[0]

    @property
    def recall(self):
        return self.total.prf[1]

    @property
    def f1(self):
        return self.total.prf[2]

    @property
    def pos_accuracy(self):
        return 100.0 * self.pos_correct / self.pos_total if self.pos_total else 0.0

    def rows(self):
        """(label, T_G, T_P, T_C, P, R, F1) per label, then a TOTAL row."""
        out = []
        for label in sorted(self.per_label):
            c = self.per_label[label]
            out.append((label, c.gold, c.predicted, c.matched, *c.prf))
        out.append(("TOTAL", self.total.gold, self.total.predicted, self.total.matched,
                    *self.total.prf))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "T_G", "T_P", "T_C", "P", "R", "F1"])
        for label, g, p, c, pr, rc, f in self.rows():
            w.writerow([label, g, p, c, f"{round_half_up(pr):.2f}", f"{round_half_up(rc):.2f}",
                        f"{round_half_up(f):.2f}"])
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"{'label':<16}{'gold':>7}{'pred':>7}{'match':>7}{'P':>9}{'R':>9}{'F1':>9}"]
        for label, g, p, c, pr, rc, f in self.rows():
            lines.append(f"{label:<16}{g:>7}{p:>7}{c:>7}{round_half_up(pr):>9.2f}"
                         f"{round_half_up(rc):>9.2f}{round_half_up(f):>9.2f}")
        lines.append(f"sentences={self.sentences} exact_match={self.exact_match} "
                     f"pos_accuracy={round_half_up(self.pos_accuracy):.2f}")
        return "\n".join(lines)


def pos_accuracy(pred_tags, gold_tags):
    if len(pred_tags) != len(gold_tags):
        raise LengthMismatch("tag sequences differ in length")
    if not gold_tags:
        return 0.0
    return 100.0 * sum(p == g for p, g in zip(pred_tags, gold_tags)) / len(gold_tags)


def evaluate_corpus(pred_trees, gold_trees, ignore_root=False, delete_punct=False) -> EvalReport:
    pred_trees = list(pred_trees)
    gold_trees = list(gold_trees)
    if len(pred_trees) != len(gold_trees):
        raise LengthMismatch(f"{len(pred_trees)} predicted vs {len(gold_trees)} gold trees")
    report = EvalReport()
    for k, (pred, gold) in enumerate(zip(pred_trees, gold_trees)):
        total, per_label = match_brackets(pred, gold, k, ignore_root, delete_punct)
        report.total += total
        for label, c in per_label.items():
            report.per_label.setdefault(label, Counts())
            report.per_label[label] += c
        pt = [l.pos for l in leaves(pred)]
        gt = [l.pos for l in leaves(gold)]
        report.pos_correct += sum(p == g for p, g in zip(pt, gt))
        report.pos_total += len(gt)
        report.sentences += 1
        report.exact_match += int(total.matched == total.predicted == total.gold)
    return report
