"""A small hand-written grammar for generating toy treebanks.

Used to sanity-check that the parser can fit a corpus; the trees mimic
Vietnamese-style tags with ten constituent labels.
"""

from __future__ import annotations

import random

from .treebank import Internal, Leaf

LEXICON = {
    "Nr": ["Nam", "Lan", "Hà_Nội", "Huế"],
    "Nc": ["con", "cái", "chiếc", "quyển"],
    "N": ["mèo", "chó", "sách", "nhà", "xe", "bàn"],
    "Vv": ["kể", "đọc", "thấy", "mua", "đi", "ăn"],
    "A": ["đẹp", "lớn", "nhỏ", "mới"],
    "R": ["rất", "đã", "sẽ", "không"],
    "Cs": ["về", "trong", "với", "cho"],
    "C": ["rằng", "nếu", "khi"],
    "M": ["hai", "ba", "năm", "mười"],
    "P": ["tôi", "nó", "họ"],
    "W": ["ai", "gì"],
    "E": ["à", "hả"],
    "PU": [".", "!"],
}

LABELS = ("S", "SQ", "NP", "VP", "PP", "AP", "ADVP", "SBAR", "QP", "WHNP")


class Grammar:
    def __init__(self, rng: random.Random, max_depth=4):
        self.rng = rng
        self.max_depth = max_depth

    def word(self, tag):
        return Leaf(self.rng.choice(LEXICON[tag]), tag)

    def pick(self, options, depth):
        # deeper expansions fall back to the first (shortest) option
        if depth >= self.max_depth:
            return options[0]
        return self.rng.choice(options)

    def NP(self, depth):
        form = self.pick(["Nr", "P", "Nc N", "QP Nc N", "Nc N AP", "N PP"], depth)
        return Internal("NP", self.expand(form, depth))

    def QP(self, depth):
        return Internal("QP", self.expand(self.pick(["M", "R M"], depth), depth))

    def WHNP(self, depth):
        return Internal("WHNP", self.expand(self.pick(["W", "W N"], depth), depth))

    def AP(self, depth):
        return Internal("AP", self.expand(self.pick(["A", "R A", "ADVP A"], depth), depth))

    def ADVP(self, depth):
        return Internal("ADVP", (self.word("R"),))

    def PP(self, depth):
        return Internal("PP", self.expand("Cs NP", depth))

    def VP(self, depth):
        forms = ["Vv NP", "Vv", "Vv PP", "Vv AP", "ADVP Vv NP", "Vv SBAR", "Vv NP PP"]
        return Internal("VP", self.expand(self.pick(forms, depth), depth))

    def SBAR(self, depth):
        return Internal("SBAR", (self.word("C"), self.S(depth + 1, top=False)))

    def S(self, depth, top=True):
        form = self.pick(["NP VP", "VP", "NP VP", "NP ADVP VP"], depth)
        children = list(self.expand(form, depth))
        if top:
            children.append(self.word("PU"))
        return Internal("S", tuple(children))

    def SQ(self, depth):
        form = self.rng.choice(["NP VP E", "WHNP VP"])
        return Internal("SQ", self.expand(form, depth) + (Leaf("?", "PU"),))

    def expand(self, form, depth):
        out = []
        for sym in form.split():
            if sym in LEXICON:
                out.append(self.word(sym))
            else:
                out.append(getattr(self, sym)(depth + 1))
        return tuple(out)

    def sentence(self):
        return self.SQ(0) if self.rng.random() < 0.2 else self.S(0)


def generate_treebank(count: int, seed: int = 0, min_len: int = 3, max_len: int = 14) -> list:
    """``count`` distinct random trees with word counts in [min_len, max_len]."""
    from .treebank import leaves, write_bracketed

    rng = random.Random(seed)
    g = Grammar(rng)
    trees, seen = [], set()
    while len(trees) < count:
        t = g.sentence()
        n = sum(1 for _ in leaves(t))
        key = write_bracketed(t)
        if min_len <= n <= max_len and key not in seen:
            seen.add(key)
            trees.append(t)
    return trees
