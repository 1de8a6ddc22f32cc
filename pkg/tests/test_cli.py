import pytest

from conftest import SAMPLE_TREE
from spanparse import cli
from spanparse.synthetic import generate_treebank
from spanparse.treebank import parse_bracketed, read_treebank, sentence_of, write_treebank

SMALL = ["--d-model", "8", "--d-k", "8", "--d-v", "8", "--h", "2", "--num-layers", "1",
         "--d-ff", "8", "--d-hidden", "8"]


@pytest.fixture(scope="module")
def model(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    write_treebank(tmp / "train.txt", generate_treebank(8, seed=4))
    code = cli.main(["train", "--train", str(tmp / "train.txt"), "--dev", str(tmp / "train.txt"),
                     "--out", str(tmp / "m.ckpt"), "--max-epochs", "1", *SMALL])
    assert code == 0
    return tmp


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestTrain:
    def test_one_epoch_line(self, model):
        rows = (model / "m.ckpt.log.csv").read_text().splitlines()
        assert len(rows) == 2 and rows[1].startswith("1,")

    def test_epoch_line_on_stderr(self, tmp_path, capsys):
        write_treebank(tmp_path / "t.txt", generate_treebank(2, seed=4))
        code, out, err = run(capsys, "train", "--train", str(tmp_path / "t.txt"), "--dev",
                             str(tmp_path / "t.txt"), "--out", str(tmp_path / "m"),
                             "--max-epochs", "1", *SMALL)
        assert code == 0 and out == ""
        assert sum(l.startswith("epoch=") for l in err.splitlines()) == 1

    def test_missing_file(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.txt")
        code, _, err = run(capsys, "train", "--train", missing, "--dev", missing,
                           "--out", str(tmp_path / "m"))
        assert code == 1 and missing in err

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nmax_epochs = 7\nlearning_rate = 0.01  # inline\n")
        args = cli.build_parser().parse_args(["train", "--train", "a", "--dev", "b", "--out", "c",
                                              "--max-epochs", "3"])
        values = cli.resolve_config(str(cfg), args)
        assert values["max_epochs"] == 3 and values["learning_rate"] == 0.01
        assert values["batch_size"] == 150

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("warp_speed = 9\n")
        with pytest.raises(cli.ConfigError, match="warp_speed"):
            cli.read_config(cfg)

    def test_vectors(self, tmp_path, capsys):
        import numpy as np
        trees = generate_treebank(3, seed=4)
        write_treebank(tmp_path / "t.txt", trees)
        rng = np.random.default_rng(0)
        blocks = [rng.normal(size=(len(sentence_of(t)), 4)) for t in trees]
        cli.write_vectors(tmp_path / "v.txt", blocks)
        back = cli.read_vectors(tmp_path / "v.txt")
        assert all(np.array_equal(a, b) for a, b in zip(blocks, back))
        code, _, _ = run(capsys, "train", "--train", str(tmp_path / "t.txt"), "--dev",
                         str(tmp_path / "t.txt"), "--vectors", str(tmp_path / "v.txt"),
                         "--dev-vectors", str(tmp_path / "v.txt"), "--out", str(tmp_path / "m"),
                         "--max-epochs", "1", *SMALL)
        assert code == 0
        from spanparse.training import load_checkpoint
        assert load_checkpoint(tmp_path / "m").parser.config.d_ext == 4


class TestParse:
    def test_single_word(self, model, tmp_path, capsys):
        (tmp_path / "in.txt").write_text("mèo\n\nmèo con\n")
        code, out, _ = run(capsys, "parse", "--model", str(model / "m.ckpt"),
                           "--input", str(tmp_path / "in.txt"), "--threads", "1")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 3 and lines[1] == ""
        tree = parse_bracketed(lines[0])[0]
        leaf = tree
        while hasattr(leaf, "children"):
            (leaf,) = leaf.children
        assert leaf.word == "mèo"

    def test_deterministic_across_threads(self, model, tmp_path, capsys):
        (tmp_path / "in.txt").write_text("Nam đọc sách .\nhọ mua xe !\nai kể ?\n")
        _, a, _ = run(capsys, "parse", "--model", str(model / "m.ckpt"),
                      "--input", str(tmp_path / "in.txt"), "--threads", "1")
        _, b, _ = run(capsys, "parse", "--model", str(model / "m.ckpt"),
                      "--input", str(tmp_path / "in.txt"), "--threads", "3")
        assert a == b and len(a.splitlines()) == 3


class TestEval:
    def test_self(self, tmp_path, capsys):
        (tmp_path / "g.txt").write_text(SAMPLE_TREE + "\n")
        code, out, _ = run(capsys, "eval", "--gold", str(tmp_path / "g.txt"), "--pred",
                           str(tmp_path / "g.txt"), "--per-label", str(tmp_path / "l.csv"))
        assert code == 0
        assert out.splitlines()[-2].split()[-3:] == ["100.00", "100.00", "100.00"]
        assert (tmp_path / "l.csv").read_text().splitlines()[-1] == "TOTAL,5,5,5,100.00,100.00,100.00"

    def test_crafted_counts(self, tmp_path, capsys):
        # 114 exact, 199 with an extra predicted bracket, 227 with a missed gold bracket
        same = "(S (a a) (b b))"
        extra = "(S (X (a a) (b b)) (c c))"
        flat = "(S (a a) (b b) (c c))"
        gold = [same] * 114 + [flat] * 199 + [extra] * 227
        pred = [same] * 114 + [extra] * 199 + [flat] * 227
        (tmp_path / "g.txt").write_text("\n".join(gold) + "\n")
        (tmp_path / "p.txt").write_text("\n".join(pred) + "\n")
        code, out, _ = run(capsys, "eval", "--gold", str(tmp_path / "g.txt"),
                           "--pred", str(tmp_path / "p.txt"))
        total = [l for l in out.splitlines() if l.startswith("TOTAL")][0].split()
        assert code == 0 and total[1:] == ["767", "739", "540", "73.07", "70.40", "71.71"]

    def test_short_prediction(self, tmp_path, capsys):
        (tmp_path / "g.txt").write_text(SAMPLE_TREE + "\n" + SAMPLE_TREE + "\n")
        (tmp_path / "p.txt").write_text(SAMPLE_TREE + "\n")
        code, _, err = run(capsys, "eval", "--gold", str(tmp_path / "g.txt"),
                           "--pred", str(tmp_path / "p.txt"))
        assert code == 1 and "gold" in err


class TestStatsSplitConfig:
    def test_stats_sample_tree(self, tmp_path, capsys):
        (tmp_path / "f.txt").write_text(SAMPLE_TREE + "\n")
        code, out, _ = run(capsys, "stats", "--input", str(tmp_path / "f.txt"))
        counts = dict(l.split() for l in out.splitlines()[1:5])
        assert code == 0 and counts == {"NP": "2", "PP": "1", "S": "1", "VP": "1"}

    def test_stats_empty(self, tmp_path, capsys):
        (tmp_path / "e.txt").write_text("")
        code, out, _ = run(capsys, "stats", "--input", str(tmp_path / "e.txt"))
        assert code == 0 and "sentences=0 tokens=0" in out

    def test_split_tail_cut(self, tmp_path, capsys):
        trees = [f"(S (N w{k}))" for k in range(9146)]
        (tmp_path / "all.txt").write_text("\n".join(trees) + "\n")
        code, out, _ = run(capsys, "split", "--input", str(tmp_path / "all.txt"),
                           "--train", "8636", "--dev", "510")
        train = read_treebank(tmp_path / "all.txt.train")
        dev = read_treebank(tmp_path / "all.txt.dev")
        assert code == 0 and (len(train), len(dev)) == (8636, 510)
        assert dev[0].children[0].word == "w8636"
        code, _, _ = run(capsys, "split", "--input", str(tmp_path / "all.txt"),
                         "--train", "9000", "--dev", "510")
        assert code == 1

    def test_dump_defaults(self, capsys):
        code, out, _ = run(capsys, "config", "--dump-defaults")
        values = dict(l.split(" = ") for l in out.splitlines())
        assert code == 0 and values["max_epochs"] == "150" and values["batch_size"] == "150"
        assert set(values) == set(cli.DEFAULTS)
