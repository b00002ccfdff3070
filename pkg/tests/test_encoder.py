import numpy as np
import pytest

from relperceiver import tensor as T
from relperceiver.encoder import EmptyInput, PerceiverEncoder, benchmark_complexity, cross_attend
from relperceiver.nn import EmptyKeySet, MultiHeadAttention
from relperceiver.tensor import Tensor

from oracles import cross_attention_loop


def weights(attn):
    return (attn.q_proj.weight.data, attn.k_proj.weight.data, attn.v_proj.weight.data,
            attn.o_proj.weight.data)


def test_cross_attend_matches_loop():
    rng = np.random.default_rng(0)
    for _ in range(10):
        d, k, n, h = 8, int(rng.integers(1, 5)), int(rng.integers(1, 10)), int(rng.choice([1, 2, 4]))
        attn = MultiHeadAttention(d, rng, heads=h)
        z0, x = rng.normal(size=(k, d)), rng.normal(size=(n, d))
        got = cross_attend(Tensor(z0), Tensor(x), attn).data
        assert np.allclose(got, cross_attention_loop(z0, x, *weights(attn), h), atol=1e-12)


def test_masked_keys_equal_truncated_input():
    rng = np.random.default_rng(1)
    attn = MultiHeadAttention(8, rng, heads=2)
    z0 = Tensor(rng.normal(size=(3, 8)))
    x = rng.normal(size=(2, 6, 8))
    mask = np.array([[True] * 6, [True, True, True, False, False, False]])
    out = cross_attend(z0, Tensor(x), attn, mask).data
    short = cross_attend(z0, Tensor(x[1, :3]), attn).data
    assert np.allclose(out[1], short, atol=1e-12)


def test_fully_masked_row_returns_latents():
    rng = np.random.default_rng(2)
    attn = MultiHeadAttention(8, rng, heads=2)
    z0 = rng.normal(size=(3, 8))
    out = cross_attend(Tensor(z0), Tensor(rng.normal(size=(1, 4, 8))), attn,
                       np.zeros((1, 4), bool)).data
    assert np.allclose(out[0], z0)


def test_empty_inputs():
    rng = np.random.default_rng(3)
    attn = MultiHeadAttention(4, rng, heads=1)
    with pytest.raises(EmptyInput):
        cross_attend(Tensor(np.zeros((2, 4))), Tensor(np.zeros((0, 4))), attn)
    with pytest.raises(EmptyKeySet):
        attn(Tensor(np.zeros((1, 2, 4))), Tensor(np.zeros((1, 0, 4))))


def test_token_order_invariance():
    rng = np.random.default_rng(4)
    enc = PerceiverEncoder(8, rng, num_latents=4, layers=2, heads=2)
    xs, xt = rng.normal(size=(5, 8)), rng.normal(size=(3, 8))
    a = enc(Tensor(xs), Tensor(xt)).Z.data
    b = enc(Tensor(xs[::-1].copy()), Tensor(xt[[2, 0, 1]])).Z.data
    assert np.allclose(a, b, atol=1e-12)


def test_empty_temporal_branch_uses_initial_latents():
    rng = np.random.default_rng(5)
    enc = PerceiverEncoder(8, rng, num_latents=4, layers=0, heads=2)
    xs = rng.normal(size=(1, 5, 8))
    z = enc(Tensor(xs), Tensor(np.zeros((1, 0, 8)))).Z.data[0]
    zs = cross_attend(enc.latents_struct, Tensor(xs[0]), enc.cross_struct).data
    assert np.allclose(z, zs + enc.latents_temp.data)
    with pytest.raises(EmptyInput):
        enc(Tensor(np.zeros((1, 0, 8))), Tensor(xs))


def test_latent_shape_independent_of_input_size():
    rng = np.random.default_rng(6)
    enc = PerceiverEncoder(8, rng, num_latents=4, layers=1, heads=2)
    for n in (1, 7, 40):
        assert enc(Tensor(rng.normal(size=(2, n, 8))), Tensor(rng.normal(size=(2, 3, 8)))).Z.shape == (2, 4, 8)


def test_full_self_attention_keeps_tokens():
    rng = np.random.default_rng(7)
    enc = PerceiverEncoder(8, rng, num_latents=4, layers=2, heads=2, full_self_attention=True)
    st = enc(Tensor(rng.normal(size=(2, 5, 8))), Tensor(rng.normal(size=(2, 3, 8))),
             np.ones((2, 5), bool), np.array([[True] * 3, [True, False, False]]))
    assert st.Z.shape == (2, 8, 8) and st.branch == "tokens"
    assert st.mask[1].tolist() == [True] * 6 + [False, False]


def test_benchmark_rows():
    rows, exps = benchmark_complexity(sizes=(16, 32), num_latents=4, layers=1, dim=8, repeats=1)
    assert [(r["N_g"], r["mode"]) for r in rows] == [(16, "CA"), (16, "SA"), (32, "CA"), (32, "SA")]
    assert set(exps) == {"CA", "SA"}
    assert all(r["mean_ms"] > 0 for r in rows)
