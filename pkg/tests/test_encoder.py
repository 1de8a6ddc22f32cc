import numpy as np
import pytest

from oracles import loop_feed_forward, loop_single_head
from spanparse import encoder as E
from spanparse import tensor as T


def make(config, vocab=10, seed=0):
    return E.init_encoder_params(config, vocab, np.random.default_rng(seed))


class TestConfig:
    def test_defaults(self):
        c = E.EncoderConfig()
        assert (c.num_layers, c.h, c.d_model, c.d_ff) == (2, 8, 128, 256)
        assert c.head_k == 16

    @pytest.mark.parametrize("kw", [dict(d_k=7, h=2), dict(d_model=7), dict(h=0), dict(num_layers=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            E.EncoderConfig(**{**dict(d_model=8, d_k=8, d_v=8, h=2), **kw})


class TestEmbed:
    def test_one_word(self, tiny_config):
        p = make(tiny_config)
        assert E.embed_sentence([5], p, tiny_config).shape == (3, 8)

    def test_position_distinguishes(self, tiny_config):
        x = E.embed_sentence([5, 5], make(tiny_config), tiny_config).value
        assert not np.array_equal(x[1], x[2])

    def test_zero_table_gives_positions(self, tiny_config):
        p = make(tiny_config)
        p["enc.embed"].value[:] = 0
        x = E.embed_sentence([4, 5, 6], p, tiny_config).value
        assert np.array_equal(x, p["enc.position"].value[:5])

    def test_start_stop_rows(self, tiny_config):
        p = make(tiny_config)
        x = E.embed_sentence([4], p, tiny_config).value
        pos, emb = p["enc.position"].value, p["enc.embed"].value
        assert np.array_equal(x[0], emb[1] + pos[0]) and np.array_equal(x[2], emb[2] + pos[2])

    def test_unknown_word_maps_to_unk(self):
        v = E.WordVocab(["a", "b"])
        assert v.index("zzz") == 0 and v.index("a") == 3

    def test_too_long(self, tiny_config):
        with pytest.raises(E.SentenceTooLong):
            E.embed_sentence([3] * 21, make(tiny_config), tiny_config)

    def test_external_vectors(self):
        c = E.EncoderConfig(d_model=8, d_k=8, d_v=8, h=2, num_layers=1, d_ff=8, d_ext=3)
        p = make(c)
        ext = np.random.default_rng(1).normal(size=(2, 3))
        base = E.embed_sentence([4, 5], p, c).value
        x = E.embed_sentence([4, 5], p, c, ext).value
        np.testing.assert_allclose(x[1:3] - base[1:3], ext @ p["enc.ext_proj"].value, atol=1e-14)
        assert np.array_equal(x[0], base[0])
        with pytest.raises(E.ExternalShapeMismatch):
            E.embed_sentence([4, 5], p, c, np.ones((3, 3)))


class TestAttention:
    def weights(self, rng, d=8, dk=4, dv=4):
        return [T.parameter(rng.normal(size=s)) for s in [(d, dk), (d, dk), (d, dv)]]

    def test_single_token(self):
        rng = np.random.default_rng(0)
        x = T.constant(rng.normal(size=(1, 8)))
        wq, wk, wv = self.weights(rng)
        np.testing.assert_allclose(E.single_head(x, wq, wk, wv).value, x.value @ wv.value, atol=1e-15)

    def test_zero_query_is_uniform(self):
        rng = np.random.default_rng(1)
        x = T.constant(rng.normal(size=(5, 8)))
        wq, wk, wv = self.weights(rng)
        wq.value[:] = 0
        out = E.single_head(x, wq, wk, wv).value
        np.testing.assert_allclose(out, np.tile((x.value @ wv.value).mean(axis=0), (5, 1)), atol=1e-14)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 8))
        wq, wk, wv = self.weights(rng)
        out = E.single_head(T.constant(x), wq, wk, wv).value
        np.testing.assert_allclose(out, loop_single_head(x, wq.value, wk.value, wv.value), atol=1e-12)

    def test_attention_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        x = T.constant(rng.normal(size=(6, 8)))
        wq, wk, _ = self.weights(rng)
        logits = T.matmul(T.matmul(x, wq), T.transpose(T.matmul(x, wk)))
        np.testing.assert_allclose(T.softmax_rows(logits).value.sum(axis=1), 1, atol=1e-12)

    def test_single_head_reduces(self):
        c = E.EncoderConfig(d_model=8, d_k=4, d_v=4, h=1, num_layers=1, d_ff=8)
        p = make(c)
        x = T.constant(np.random.default_rng(4).normal(size=(3, 8)))
        pre = "enc.layer0.head0"
        expected = E.single_head(x, p[pre + ".wq"], p[pre + ".wk"], p[pre + ".wv"]).value @ p[pre + ".wo"].value
        np.testing.assert_allclose(E.multi_head(x, p, 0, 1).value, expected, atol=1e-14)

    def test_identical_heads(self):
        c = E.EncoderConfig(d_model=8, d_k=8, d_v=8, h=2, num_layers=1, d_ff=8)
        p = make(c)
        for name in ("wq", "wk", "wv", "wo"):
            p[f"enc.layer0.head1.{name}"].value = p[f"enc.layer0.head0.{name}"].value.copy()
        x = T.constant(np.random.default_rng(5).normal(size=(3, 8)))
        pre = "enc.layer0.head0"
        one = E.single_head(x, p[pre + ".wq"], p[pre + ".wk"], p[pre + ".wv"]).value @ p[pre + ".wo"].value
        np.testing.assert_allclose(E.multi_head(x, p, 0, 2).value, 2 * one, atol=1e-13)

    def test_permutation_equivariance(self):
        c = E.EncoderConfig(d_model=8, d_k=8, d_v=8, h=2, num_layers=1, d_ff=8)
        p = make(c)
        x = np.random.default_rng(6).normal(size=(5, 8))
        perm = [3, 0, 4, 1, 2]
        a = E.multi_head(T.constant(x), p, 0, 2).value
        b = E.multi_head(T.constant(x[perm]), p, 0, 2).value
        np.testing.assert_allclose(b, a[perm], atol=1e-13)

    def test_encode_permutation_sensitive(self, tiny_config):
        p = make(tiny_config)
        a = E.encode([3, 4, 5], p, tiny_config).value
        b = E.encode([5, 4, 3], p, tiny_config).value
        assert not np.allclose(a[1:4][::-1], b[1:4])


class TestFeedForward:
    def test_zero_weights(self):
        x = T.constant(np.random.default_rng(0).normal(size=(3, 4)))
        b2 = T.constant([[1.0, 2.0, 3.0, 4.0]])
        out = E.feed_forward(x, T.constant(np.zeros((4, 6))), T.constant(np.zeros((1, 6))),
                             T.constant(np.zeros((6, 4))), b2).value
        np.testing.assert_array_equal(out, np.tile(b2.value, (3, 1)))

    def test_position_wise_and_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 4))
        w = [rng.normal(size=s) for s in [(4, 6), (1, 6), (6, 4), (1, 4)]]
        out = E.feed_forward(T.constant(x), *map(T.constant, w)).value
        np.testing.assert_allclose(out, loop_feed_forward(x, *w), atol=1e-12)
        perm = [4, 2, 0, 1, 3]
        np.testing.assert_allclose(E.feed_forward(T.constant(x[perm]), *map(T.constant, w)).value,
                                   out[perm], atol=1e-14)


class TestEncode:
    def test_no_layers_is_embedding(self):
        c = E.EncoderConfig(d_model=8, d_k=8, d_v=8, h=2, num_layers=0, d_ff=8)
        p = make(c)
        assert np.array_equal(E.encode([3, 4], p, c).value, E.embed_sentence([3, 4], p, c).value)

    def test_deterministic_and_shape(self, tiny_config):
        p = make(tiny_config)
        a, b = E.encode([3, 4, 5], p, tiny_config).value, E.encode([3, 4, 5], p, tiny_config).value
        assert a.shape == (5, 8) and np.array_equal(a, b)

    def test_gradient_check(self, tiny_config):
        p = make(tiny_config, vocab=6)
        readout = np.random.default_rng(9).normal(size=(5, 8))
        f = lambda: T.masked_sum(E.encode([3, 4, 5], p, tiny_config), readout)
        for name, err in T.gradient_check(f, p).items():
            assert err <= 1e-4, name


class TestHeadEquivalence:
    def test_sum_of_projected_heads_equals_concat(self):
        c = E.EncoderConfig(d_model=8, d_k=8, d_v=8, h=2, num_layers=1, d_ff=8)
        rng = np.random.default_rng(10)
        p = make(c)
        x = T.constant(rng.normal(size=(4, 8)))
        heads = [E.single_head(x, *(p[f"enc.layer0.head{i}.{n}"] for n in ("wq", "wk", "wv"))).value
                 for i in range(2)]
        block = np.vstack([p[f"enc.layer0.head{i}.wo"].value for i in range(2)])
        np.testing.assert_allclose(E.multi_head(x, p, 0, 2).value, np.hstack(heads) @ block, atol=1e-10)
