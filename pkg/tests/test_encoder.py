import numpy as np
import pytest

from ospace.encoder import (
    EncoderConfig,
    EncoderWeights,
    encode,
    encode_backward,
    encode_batch,
    init_encoder,
    pad_features,
)
from ospace.layers import Dense


def _random_encoder(rng, input_dim=6, widths=(5, 4), max_people=8):
    cfg = EncoderConfig(input_dim=input_dim, max_people=max_people,
                        layer_widths=widths)
    return init_encoder(cfg, rng)


def _mlp(weights, x):
    for layer in weights.layers:
        x = np.maximum(x @ layer.W + layer.b, 0.0)
    return x


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(layer_widths=())
    with pytest.raises(ValueError):
        EncoderConfig(layer_widths=(8, 0))
    with pytest.raises(ValueError):
        EncoderConfig(max_people=0)
    assert EncoderConfig().output_dim == 1024


def test_single_person_equals_plain_mlp():
    rng = np.random.default_rng(0)
    w = _random_encoder(rng)
    f = rng.standard_normal((1, 6))
    assert np.array_equal(encode(f, w), _mlp(w, f[0]))


def test_permutation_invariance_bit_exact():
    rng = np.random.default_rng(1)
    w = _random_encoder(rng)
    for _ in range(50):
        p = rng.integers(2, 8)
        f = rng.standard_normal((p, 6))
        perm = rng.permutation(p)
        assert encode(f, w).tobytes() == encode(f[perm], w).tobytes()


def test_padding_capacity_does_not_change_output():
    rng = np.random.default_rng(2)
    cfg_small = EncoderConfig(input_dim=6, max_people=3, layer_widths=(5, 4))
    w_small = init_encoder(cfg_small, np.random.default_rng(7))
    w_large = EncoderWeights(
        EncoderConfig(input_dim=6, max_people=25, layer_widths=(5, 4)),
        [Dense(l.W.copy(), l.b.copy()) for l in w_small.layers],
    )
    f = rng.standard_normal((3, 6))
    assert encode(f, w_small).tobytes() == encode(f, w_large).tobytes()


def test_batched_encode_matches_single():
    rng = np.random.default_rng(3)
    w = _random_encoder(rng)
    sets = [rng.standard_normal((int(rng.integers(1, 7)), 6)) for _ in range(9)]
    batch, mask = pad_features(sets)
    pooled, _ = encode_batch(batch, mask, w)
    for i, f in enumerate(sets):
        # matmul over a differently shaped batch may land on another BLAS
        # kernel, so agreement is to rounding, not to the bit
        assert np.allclose(pooled[i], encode(f, w), rtol=1e-12, atol=1e-14)


def test_empty_set_rejected():
    w = _random_encoder(np.random.default_rng(4))
    with pytest.raises(ValueError):
        encode(np.zeros((0, 6)), w)


def test_oversized_set_rejected():
    w = _random_encoder(np.random.default_rng(5), max_people=3)
    with pytest.raises(ValueError):
        encode(np.zeros((4, 6)), w)


def test_identity_layer_pools_elementwise_max():
    cfg = EncoderConfig(input_dim=4, max_people=5, layer_widths=(4,))
    w = EncoderWeights(cfg, [Dense(np.eye(4), np.zeros(4))])
    f = np.array([[0.1, 0.9, 0.2, 0.0],
                  [0.5, 0.3, 0.2, 0.7]])
    assert np.array_equal(encode(f, w), np.maximum(f[0], f[1]))


def test_backward_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(6)
    w = _random_encoder(rng)
    f = rng.standard_normal((3, 6))
    grads, in_grad = encode_backward(f, w, np.zeros(4))
    assert all(np.all(gw == 0) and np.all(gb == 0) for gw, gb in grads)
    assert np.all(in_grad == 0)


def test_backward_does_not_touch_weight_buffers():
    rng = np.random.default_rng(7)
    w = _random_encoder(rng)
    f = rng.standard_normal((2, 6))
    encode_backward(f, w, rng.standard_normal(4))
    assert all(np.all(l.grad_W == 0) and np.all(l.grad_b == 0) for l in w.layers)


def test_tie_breaks_to_lowest_person_index():
    rng = np.random.default_rng(8)
    w = _random_encoder(rng)
    row = rng.standard_normal(6)
    f = np.stack([row, row])  # identical persons, every dimension ties
    _, in_grad = encode_backward(f, w, np.ones(4))
    assert np.any(in_grad[0] != 0)
    assert np.all(in_grad[1] == 0)


def _numeric_input_grad(f, w, upstream, h=1e-6):
    num = np.zeros_like(f)
    for i in range(f.shape[0]):
        for j in range(f.shape[1]):
            fp = f.copy()
            fp[i, j] += h
            fm = f.copy()
            fm[i, j] -= h
            num[i, j] = (upstream @ encode(fp, w) - upstream @ encode(fm, w)) / (2 * h)
    return num


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 20:
        w = _random_encoder(rng)
        p = int(rng.integers(1, 5))
        f = rng.standard_normal((p, 6))
        pooled, (xs, _, _, _) = encode_batch(f[None], np.ones((1, p), bool), w)
        # stay away from ReLU kinks and pooling ties, where the derivative jumps
        pre = [x @ l.W + l.b for x, l in zip(xs, w.layers)]
        if min(np.abs(z).min() for z in pre) < 1e-4:
            continue
        if p > 1:
            per = np.maximum(xs[-1] @ w.layers[-1].W + w.layers[-1].b, 0.0)
            top2 = np.sort(per, axis=0)[-2:]
            if np.min(top2[1] - top2[0]) < 1e-4:
                continue
        upstream = rng.standard_normal(4)
        _, analytic = encode_backward(f, w, upstream)
        numeric = _numeric_input_grad(f, w, upstream)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-4
        checked += 1


def test_lipschitz_no_blowup():
    rng = np.random.default_rng(10)
    w = _random_encoder(rng)
    f = rng.standard_normal((4, 6))
    base = encode(f, w)
    bound = np.prod([np.linalg.norm(l.W, 2) for l in w.layers])
    for eps in (1e-3, 1e-5):
        f2 = f.copy()
        f2[2, 3] += eps
        delta = np.linalg.norm(encode(f2, w) - base)
        assert delta <= bound * eps * (1 + 1e-9)
