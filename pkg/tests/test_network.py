import math

import numpy as np
import pytest

from dpnet.network import (
    CHECKPOINT_MAGIC,
    FeedForwardModel,
    backward,
    forward,
    forward_batch,
    init_model,
    load_checkpoint,
    save_checkpoint,
)


def naive_forward(model, x):
    """Plain per-layer loop oracle."""
    h = np.asarray(x, dtype=float)
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        s = w @ h + b
        if l < last:
            h = np.maximum(s, 0.0) if model.activation == "relu" else np.tanh(s)
        else:
            h = s
    return h


def flatten_params(model):
    return np.concatenate([a.ravel() for a in model.weights + model.biases])


def set_params(model, vec):
    pos = 0
    for arr in model.weights + model.biases:
        arr[...] = vec[pos : pos + arr.size].reshape(arr.shape)
        pos += arr.size


def test_identity_single_layer():
    model = FeedForwardModel((2, 2), [np.eye(2)], [np.zeros(2)], "relu")
    assert np.allclose(forward(model, [1.0, 2.0]), [1.0, 2.0], atol=1e-15)


def test_forward_matches_naive_oracle():
    rng = np.random.default_rng(5)
    for trial in range(20):
        act = "relu" if trial % 2 == 0 else "tanh"
        model = init_model((2, 16, 3), int(rng.integers(1e6)), act)
        for _ in range(5):
            x = rng.normal(0, 3, 2)
            assert np.allclose(forward(model, x), naive_forward(model, x), atol=1e-12)


def test_forward_batch_matches_single():
    model = init_model((3, 8, 8, 4), 17, "tanh")
    X = np.random.default_rng(2).normal(0, 2, (9, 3))
    Z = forward_batch(model, X)
    assert Z.shape == (9, 4)
    for i in range(9):
        assert np.allclose(Z[i], forward(model, X[i]), atol=1e-12)


def test_dimension_errors():
    model = init_model((2, 4, 3), 0)
    with pytest.raises(ValueError):
        forward(model, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        forward(model, [math.inf, 0.0])
    with pytest.raises(ValueError):
        forward_batch(model, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        backward(model, [1.0, 2.0], [0.1, 0.2])  # dL_dz length 2, K = 3


def test_init_model_seeded_and_scaled():
    a = init_model((64, 256, 3), 42)
    b = init_model((64, 256, 3), 42)
    c = init_model((64, 256, 3), 43)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights))
    assert all(np.all(bias == 0.0) for bias in a.biases)
    # He scale on a large layer: sample std close to sqrt(2 / fan_in)
    assert a.weights[0].std() == pytest.approx(math.sqrt(2.0 / 64), rel=0.05)


def test_init_model_rejects_bad_sizes():
    with pytest.raises(ValueError):
        init_model((2,), 0)
    with pytest.raises(ValueError):
        init_model((2, 0, 3), 0)
    with pytest.raises(ValueError):
        init_model((2, 4, 1), 0)  # single logit is useless


def test_backward_matches_finite_differences():
    # scalar head L = v . z exercises the full parameter chain
    h = 1e-5
    worst = 0.0
    for trial in range(20):
        rng = np.random.default_rng(300 + trial)
        act = "relu" if trial % 2 == 0 else "tanh"
        model = init_model((2, 8, 3), int(rng.integers(1e6)), act)
        x = rng.normal(0, 2, 2)
        v = rng.normal(0, 1, 3)
        grads = backward(model, x, v)
        analytic = np.concatenate([g.ravel() for g in grads.weights + grads.biases])
        theta = flatten_params(model)
        fd = np.zeros_like(theta)
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += h
            down[i] -= h
            set_params(model, up)
            f_up = float(v @ forward(model, x))
            set_params(model, down)
            f_down = float(v @ forward(model, x))
            fd[i] = (f_up - f_down) / (2 * h)
        set_params(model, theta)
        scale = np.maximum(1e-6, np.maximum(np.abs(analytic), np.abs(fd)))
        worst = max(worst, float(np.max(np.abs(analytic - fd) / scale)))
    assert worst <= 1e-4


def test_checkpoint_roundtrip_bitwise(tmp_path):
    model = init_model((2, 32, 32, 3), 9, "relu")
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.layer_sizes == model.layer_sizes
    assert loaded.activation == model.activation
    for a, b in zip(model.weights + model.biases, loaded.weights + loaded.biases):
        assert np.array_equal(a, b)
    x = np.array([0.4, -1.1])
    assert np.array_equal(forward(model, x), forward(loaded, x))
    # identical bytes when saved again
    save_checkpoint(loaded, tmp_path / "again.ckpt")
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_header_format(tmp_path):
    model = init_model((2, 4, 3), 1, "tanh")
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    head = path.read_bytes().split(b"\n", 3)
    assert head[0] == CHECKPOINT_MAGIC.encode()
    assert head[1] == b"2,4,3"
    assert head[2] == b"tanh"


def test_checkpoint_rejects_corruption(tmp_path):
    model = init_model((2, 4, 3), 1)
    good = tmp_path / "good.ckpt"
    save_checkpoint(model, good)
    raw = good.read_bytes()

    bad_magic = tmp_path / "bad_magic.ckpt"
    bad_magic.write_bytes(b"x" + raw[1:])
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(bad_magic)

    truncated = tmp_path / "trunc.ckpt"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="bytes"):
        load_checkpoint(truncated)

    bad_sizes = tmp_path / "sizes.ckpt"
    bad_sizes.write_bytes(b"dpnet-v1\n2,banana,3\nrelu\n" + raw.split(b"\n", 3)[3])
    with pytest.raises(ValueError, match="layer sizes"):
        load_checkpoint(bad_sizes)

    bad_act = tmp_path / "act.ckpt"
    bad_act.write_bytes(raw.replace(b"\nrelu\n", b"\nswish\n"))
    with pytest.raises(ValueError, match="activation"):
        load_checkpoint(bad_act)

    payload = raw.split(b"\n", 3)[3]
    nan_blob = np.frombuffer(payload, dtype="<f8").copy()
    nan_blob[0] = np.nan
    poisoned = tmp_path / "nan.ckpt"
    poisoned.write_bytes(b"dpnet-v1\n2,4,3\nrelu\n" + nan_blob.tobytes())
    with pytest.raises(ValueError, match="non-finite"):
        load_checkpoint(poisoned)


def test_model_copy_is_independent():
    model = init_model((2, 4, 3), 3)
    dup = model.copy()
    dup.weights[0][0, 0] += 1.0
    assert model.weights[0][0, 0] != dup.weights[0][0, 0]
