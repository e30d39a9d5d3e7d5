import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edcnet.errors import FormatError, NumericalError, ShapeMismatchError, TruncatedFileError, VersionError
from edcnet.loss import LossConfig, composite_loss
from edcnet.nn import (
    Model,
    ModelConfig,
    conv1d_backward,
    conv1d_forward,
    count_params,
    dense_backward,
    dense_forward,
    interp_backward,
    interp_upsample,
    load_params,
    param_shapes,
    preset,
    relu,
    relu_backward,
    save_params,
    sigmoid,
    sigmoid_backward,
)
from edcnet.nn.model import read_checkpoint, write_checkpoint

from gradcheck import numeric_grad, rel_error

GRAD_CFG = ModelConfig(hidden=(8,), channels=(4, 4, 4), latent_length=5, edc_length=20, dtype="float64", seed=3)


# dense

def test_dense_identity():
    x = np.array([1.5, -2.0, 3.0])
    np.testing.assert_array_equal(dense_forward(x, np.eye(3), np.zeros(3)), x)


def test_dense_hand_example():
    y = dense_forward(np.array([1.0, 2.0]), np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([0.0, 1.0]))
    np.testing.assert_array_equal(y, [3.0, 3.0])


def test_dense_shape_error_names_shapes():
    with pytest.raises(ShapeMismatchError, match=r"\(3,\).*\(2, 2\)"):
        dense_forward(np.ones(3), np.ones((2, 2)), np.ones(2))


def test_dense_gradients(rng):
    x, W, b = rng.normal(size=(3, 5)), rng.normal(size=(4, 5)), rng.normal(size=4)
    gy = rng.normal(size=(3, 4))
    f = lambda: float(np.sum(dense_forward(x, W, b) * gy))
    gx, gW, gb = dense_backward(x, W, gy)
    for a, v in ((gx, x), (gW, W), (gb, b)):
        assert rel_error(a, numeric_grad(f, v)) < 1e-6


# conv

def test_conv_delta_kernel_identity():
    x = np.array([[1.0, -2.0, 3.0, 4.0]])
    np.testing.assert_array_equal(conv1d_forward(x, np.array([[[0.0, 1.0, 0.0]]]), np.zeros(1)), x)


def test_conv_box_kernel():
    y = conv1d_forward(np.array([[1.0, 2.0, 3.0]]), np.ones((1, 1, 3)), np.zeros(1))
    np.testing.assert_array_equal(y, [[3.0, 6.0, 5.0]])


def test_conv_matches_direct_loop(rng):
    x, K, b = rng.normal(size=(3, 11)), rng.normal(size=(2, 3, 5)), rng.normal(size=2)
    xp = np.pad(x, ((0, 0), (2, 2)))
    want = np.array([[sum(K[o, c, j] * xp[c, t + j] for c in range(3) for j in range(5)) + b[o]
                      for t in range(11)] for o in range(2)])
    np.testing.assert_allclose(conv1d_forward(x, K, b), want, rtol=1e-12)


def test_conv_rejects_even_kernel_and_mismatch():
    with pytest.raises(ShapeMismatchError):
        conv1d_forward(np.ones((1, 4)), np.ones((1, 1, 4)), np.zeros(1))
    with pytest.raises(ShapeMismatchError):
        conv1d_forward(np.ones((2, 4)), np.ones((1, 1, 3)), np.zeros(1))


@pytest.mark.parametrize("batched", [False, True])
def test_conv_gradients(rng, batched):
    shape = (2, 3, 9) if batched else (3, 9)
    x, K, b = rng.normal(size=shape), rng.normal(size=(4, 3, 5)), rng.normal(size=4)
    gy = rng.normal(size=shape[:-2] + (4, 9))
    f = lambda: float(np.sum(conv1d_forward(x, K, b) * gy))
    gx, gK, gb = conv1d_backward(x, K, gy)
    for a, v in ((gx, x), (gK, K), (gb, b)):
        assert rel_error(a, numeric_grad(f, v)) < 1e-6


# interpolation

def test_interp_midpoint_and_identity():
    np.testing.assert_array_equal(interp_upsample(np.array([0.0, 1.0]), 3), [0.0, 0.5, 1.0])
    x = np.random.default_rng(0).normal(size=(2, 6))
    np.testing.assert_array_equal(interp_upsample(x, 6), x)


@given(st.integers(2, 30), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_interp_endpoints_and_coordinates(t_in, extra, seed):
    t_out = t_in + extra
    if t_out < 2:
        return
    x = np.random.default_rng(seed).normal(size=t_in)
    y = interp_upsample(x, t_out)
    assert y[0] == x[0] and y[-1] == pytest.approx(x[-1], abs=1e-12)
    src = np.arange(t_out) * (t_in - 1) / (t_out - 1)
    np.testing.assert_allclose(y, np.interp(src, np.arange(t_in), x), atol=1e-12)


def test_interp_errors():
    with pytest.raises(ValueError):
        interp_upsample(np.ones(3), 1)
    with pytest.raises(ValueError):
        interp_upsample(np.ones(5), 3)


def test_interp_gradient(rng):
    x = rng.normal(size=(3, 7))
    gy = rng.normal(size=(3, 20))
    f = lambda: float(np.sum(interp_upsample(x, 20) * gy))
    assert rel_error(interp_backward(gy, 7), numeric_grad(f, x)) < 1e-6


# activations

def test_activation_values():
    assert sigmoid(np.array(0.0)) == 0.5
    np.testing.assert_array_equal(relu(np.array([-1.0, 2.0])), [0.0, 2.0])


@given(st.floats(-1e4, 1e4))
def test_sigmoid_strictly_inside_unit_interval(v):
    for dtype in (np.float32, np.float64):
        y = sigmoid(np.array([v], dtype=dtype))
        assert 0.0 < y[0] < 1.0


def test_activation_gradients(rng):
    x = rng.normal(size=50)
    x[np.abs(x) < 1e-3] = 0.5  # keep relu away from its kink
    gy = rng.normal(size=50)
    f = lambda: float(np.sum(sigmoid(x) * gy))
    assert rel_error(sigmoid_backward(sigmoid(x), gy), numeric_grad(f, x)) < 1e-6
    f = lambda: float(np.sum(relu(x) * gy))
    assert rel_error(relu_backward(x, gy), numeric_grad(f, x)) < 1e-6


# model

def test_param_count_hand_count():
    enc = (16 * 256 + 256) + (256 * 512 + 512) + (512 * 64 * 125 + 64 * 125)
    dec = (64 * 64 * 5 + 64) + (32 * 64 * 5 + 32) + (24 * 32 * 5 + 24)
    assert count_params(preset("desk")) == enc + dec == 4_274_616
    assert 8.5e6 < count_params(preset("paper9m")) < 9.5e6


def test_model_deterministic():
    x = np.random.default_rng(0).uniform(size=(3, 16))
    a = Model(preset("tiny")).forward(x)
    b = Model(preset("tiny")).forward(x)
    assert a.tobytes() == b.tobytes()


@given(hidden=st.lists(st.integers(1, 12), min_size=0, max_size=2),
       channels=st.tuples(*[st.integers(1, 6)] * 3),
       quarter=st.integers(2, 8), seed=st.integers(0, 1000))
def test_output_shape_and_range(hidden, channels, quarter, seed):
    L = 4 * quarter + seed % 4
    cfg = ModelConfig(hidden=tuple(hidden), channels=channels, latent_length=2 + seed % (L // 4 - 1),
                      edc_length=L, seed=seed)
    x = np.random.default_rng(seed).uniform(-0.5, 1.5, size=(2, 16))
    y = Model(cfg).forward(x)
    assert y.shape == (2, 24, L)
    assert np.all((y > 0) & (y < 1))
    assert Model(cfg).forward(x[0]).shape == (24, L)


def test_end_to_end_gradient():
    model = Model(GRAD_CFG)
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(2, 16))
    target = np.sort(rng.uniform(1e-3, 1, size=(2, 24, 20)), axis=-1)[..., ::-1]
    cfg = LossConfig(k=5)

    def f():
        return composite_loss(model.forward(x), target, cfg)[0]

    _, g = composite_loss(model.forward(x), target, cfg)
    grads = model.backward(g)
    assert list(grads) == list(param_shapes(GRAD_CFG))
    for name, p in model.params.items():
        err = rel_error(grads[name], numeric_grad(f, p))
        assert err < 1e-3, (name, err)


def test_nan_activation_names_layer():
    model = Model(GRAD_CFG)
    model.params["decoder.1.bias"][0] = np.nan
    with pytest.raises(NumericalError, match="decoder.1"):
        model.forward(np.zeros(16))


def test_backward_before_forward():
    with pytest.raises(RuntimeError):
        Model(GRAD_CFG).backward(np.zeros((24, 20)))


def test_wrong_feature_count():
    with pytest.raises(ShapeMismatchError):
        Model(GRAD_CFG).forward(np.zeros(15))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(channels=(4, 4))
    with pytest.raises(ValueError):
        ModelConfig(kernel_size=4)
    with pytest.raises(ValueError):
        ModelConfig(latent_length=300)
    with pytest.raises(ValueError):
        preset("nope")


# checkpoints

def test_checkpoint_round_trip(tmp_path):
    model = Model(preset("tiny", seed=4))
    x = np.random.default_rng(0).uniform(size=(2, 16))
    before = model.forward(x)
    save_params(model, tmp_path / "m.ckpt", extra={"note": "x"})
    loaded, extra, rest = load_params(tmp_path / "m.ckpt", with_extras=True)
    assert extra == {"note": "x"} and rest == {}
    assert loaded.config == model.config
    for k in model.params:
        assert loaded.params[k].tobytes() == model.params[k].tobytes()
    assert loaded.forward(x).tobytes() == before.tobytes()


def test_checkpoint_header_carries_config(tmp_path):
    save_params(Model(GRAD_CFG), tmp_path / "m.ckpt")
    raw = (tmp_path / "m.ckpt").read_bytes()
    assert raw[:8] == b"EDCCKPT1"
    header, arrays = read_checkpoint(tmp_path / "m.ckpt")
    assert header["config"] == GRAD_CFG.to_dict() and header["seed"] == 3
    assert [a["name"] for a in header["arrays"]] == [f"param/{k}" for k in param_shapes(GRAD_CFG)]


def test_checkpoint_errors(tmp_path):
    p = tmp_path / "m.ckpt"
    save_params(Model(GRAD_CFG), p)
    good = p.read_bytes()

    p.write_bytes(b"XXXXXXXX" + good[8:])
    with pytest.raises(FormatError):
        load_params(p)

    p.write_bytes(good[:16] + b"{not json" + good[25:])
    with pytest.raises(FormatError):
        load_params(p)

    p.write_bytes(good[:-8])
    with pytest.raises(TruncatedFileError):
        load_params(p)

    header, arrays = read_checkpoint_from_bytes(good, tmp_path)
    header["format_version"] = 99
    write_raw(tmp_path / "v.ckpt", header, arrays)
    with pytest.raises(VersionError):
        load_params(tmp_path / "v.ckpt")

    header, arrays = read_checkpoint_from_bytes(good, tmp_path)
    arrays["param/encoder.0.weight"] = arrays["param/encoder.0.weight"][:, :3]
    write_checkpoint(tmp_path / "s.ckpt", {k: v for k, v in header.items() if k != "arrays"}, arrays)
    with pytest.raises(ShapeMismatchError):
        load_params(tmp_path / "s.ckpt")


def read_checkpoint_from_bytes(raw, tmp_path):
    q = tmp_path / "copy.ckpt"
    q.write_bytes(raw)
    return read_checkpoint(q)


def write_raw(path, header, arrays):
    """Write a checkpoint without letting the writer fix the version field."""
    import json
    import struct

    header = dict(header)
    header["arrays"] = [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()]
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(b"EDCCKPT1" + struct.pack("<Q", len(blob)) + blob)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())
