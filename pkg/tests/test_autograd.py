import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from metascreen import DomainError
from metascreen.autograd import Adam, AdamState, Tape, Tensor, adam_step, backward, no_grad, ops
from metascreen.autograd.checkpoint import dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from metascreen.autograd.init import glorot_uniform, param_rng, recurrent_uniform

finite = st.floats(-10, 10, allow_nan=False)


def test_softmax_equal_logits_uniform():
    np.testing.assert_allclose(ops.softmax(Tensor([1.0, 1.0, 1.0])).data, [1 / 3] * 3, rtol=0, atol=1e-15)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(-50, 50)))
def test_softmax_rows_sum_to_one(x):
    out = ops.softmax(Tensor(x), axis=-1).data
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, rtol=0, atol=1e-12)
    assert (out >= 0).all()


@given(st.integers(1, 3), st.integers(1, 3), st.integers(3, 7), st.integers(3, 7), st.integers(0, 2**31))
def test_conv_identity_kernel_keeps_image(n, c, h, w, seed):
    x = np.random.default_rng(seed).normal(size=(n, c, h, w))
    k = np.zeros((c, c, 3, 3))
    for i in range(c):
        k[i, i, 1, 1] = 1.0
    np.testing.assert_array_equal(ops.conv2d(Tensor(x), Tensor(k), stride=1, padding=1).data, x)


@given(arrays(np.float64, st.tuples(st.just(3), st.integers(1, 5)), elements=finite))
def test_matmul_identity(x):
    np.testing.assert_array_equal(ops.matmul(Tensor(np.eye(3)), Tensor(x)).data, x)


def test_conv2d_against_direct_sum():
    rng = np.random.default_rng(0)
    x, k = rng.normal(size=(2, 3, 6, 5)), rng.normal(size=(4, 3, 3, 2))
    out = ops.conv2d(Tensor(x), Tensor(k), stride=2, padding=1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros(out.shape)
    for i in range(out.shape[2]):
        for j in range(out.shape[3]):
            patch = xp[:, :, 2 * i:2 * i + 3, 2 * j:2 * j + 2]
            ref[:, :, i, j] = np.einsum("nchw,ochw->no", patch, k)
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_max_pool_floor_mode():
    x = np.arange(25, dtype=float).reshape(1, 1, 5, 5)
    out = ops.max_pool2d(Tensor(x), 2).data
    np.testing.assert_array_equal(out[0, 0], [[6, 8], [16, 18]])


def test_layer_norm_zero_mean_unit_variance():
    x = np.random.default_rng(1).normal(3, 2, size=(4, 10))
    out = ops.layer_norm(Tensor(x)).data
    np.testing.assert_allclose(out.mean(axis=-1), 0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=-1), 1, rtol=1e-4)


@pytest.mark.parametrize("pred,target,expected", [([1.0, 0.0], [0.0, 0.0], 0.5), ([2.0], [-2.0], 16.0)])
def test_mse_examples(pred, target, expected):
    assert ops.mse_loss(Tensor(pred), Tensor(target)).item() == expected


@given(arrays(np.float64, st.integers(1, 8), elements=finite))
def test_mse_of_equal_is_zero(x):
    assert ops.mse_loss(Tensor(x), Tensor(x)).item() == 0.0


@pytest.mark.parametrize(
    "fn,args",
    [
        (ops.add, (np.ones((2, 3)), np.ones((4,)))),
        (ops.matmul, (np.ones((2, 3)), np.ones((2, 3)))),
        (ops.mse_loss, (np.ones(2), np.ones(3))),
        (ops.concat, ([np.ones((2, 3)), np.ones((3, 2))],)),
        (ops.conv2d, (np.ones((1, 2, 4, 4)), np.ones((1, 3, 3, 3)))),
        (ops.linear, (np.ones((2, 3)), np.ones((4, 5)))),
    ],
)
def test_shape_mismatch_is_domain_error_naming_shapes(fn, args):
    with pytest.raises(DomainError) as err:
        fn(*[a if isinstance(a, list) else Tensor(a) for a in args])
    assert "(" in str(err.value)


def test_backward_power_rule():
    x = Tensor(3.0, requires_grad=True)
    with Tape() as tape:
        loss = x * x
        backward(loss, tape)
    assert x.grad == 6.0


def test_backward_mse_grad():
    w = Tensor([1.0], requires_grad=True)
    with Tape() as tape:
        backward(ops.mse_loss(w, Tensor([0.0])), tape)
    assert w.grad.tolist() == [2.0]


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
        with pytest.raises(DomainError):
            backward(y, tape)


def test_backward_visits_each_node_once_and_resets_tape():
    x = Tensor(np.arange(3.0), requires_grad=True)
    with Tape() as tape:
        a = ops.tanh(x)
        b = ops.mul(a, a)  # a used twice
        c = ops.sum_(ops.add(b, a))
        assert len(tape) == 4
        visited = backward(c, tape)
        assert visited == 4
        assert len(tape) == 0
    t = np.tanh(np.arange(3.0))
    np.testing.assert_allclose(x.grad, (2 * t + 1) * (1 - t * t))


def test_tape_topological_order():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = ops.relu(ops.add(x, 1.0))
        z = ops.sum_(ops.mul(y, x))
        seen = {id(x)}
        for node in tape.nodes:
            assert all(id(i) in seen or not i.requires_grad for i in node.inputs)
            seen.update(id(o) for o in node.outputs)
        backward(z, tape)


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape, no_grad():
        y = ops.mul(x, x)
        assert len(tape) == 0
        assert not y.requires_grad


def test_adam_zero_grad_leaves_params():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.zeros(2)
    s = AdamState.for_param(p)
    adam_step([p], [s])
    assert p.data.tolist() == [1.0, -2.0]
    assert s.step_count == 1


def test_adam_first_step_magnitude_is_lr():
    p = Tensor(np.array([0.5]), requires_grad=True)
    p.grad = np.array([1.0])
    s = AdamState.for_param(p)
    adam_step([p], [s])
    # m_hat / sqrt(v_hat) = 1 exactly, so the step is lr / (1 + eps)
    assert abs((0.5 - p.data[0]) - 1e-3 / (1 + 1e-8)) < 1e-15


@given(st.floats(-5, 5).filter(lambda g: abs(g) > 1e-3))
def test_adam_moves_against_constant_gradient(g):
    p = Tensor(np.array([0.0]), requires_grad=True)
    s = AdamState.for_param(p)
    for _ in range(50):
        p.grad = np.array([g])
        adam_step([p], [s])
    assert np.sign(p.data[0]) == -np.sign(g)
    assert s.step_count == 50


def test_adam_missing_grad():
    p = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(DomainError):
        adam_step([p], [AdamState.for_param(p)])


def test_adam_wrapper_matches_function():
    rng = np.random.default_rng(2)
    a = Tensor(rng.normal(size=3), requires_grad=True)
    b = Tensor(a.data.copy(), requires_grad=True)
    opt = Adam([a], lr=0.01)
    state = AdamState.for_param(b, lr=0.01)
    for _ in range(5):
        g = rng.normal(size=3)
        a.grad, b.grad = g.copy(), g.copy()
        opt.step()
        adam_step([b], [state])
    np.testing.assert_array_equal(a.data, b.data)
    opt.zero_grad()
    assert a.grad is None


def test_init_is_keyed_by_name_and_seed():
    a = glorot_uniform(0, "w", (4, 5), 4, 5)
    assert np.array_equal(a, glorot_uniform(0, "w", (4, 5), 4, 5))
    assert not np.array_equal(a, glorot_uniform(0, "v", (4, 5), 4, 5))
    assert not np.array_equal(a, glorot_uniform(1, "w", (4, 5), 4, 5))
    assert np.abs(a).max() <= np.sqrt(6 / 9)
    assert np.abs(recurrent_uniform(0, "r", (3, 12), 3)).max() <= 1 / np.sqrt(3)
    assert param_rng(0, "x").random() == param_rng(0, "x").random()


@given(st.dictionaries(st.text("abc._", min_size=1, max_size=8),
                       arrays(np.float64, st.tuples(st.integers(0, 3), st.integers(1, 3)),
                              elements=st.floats(allow_nan=False)), max_size=4))
def test_checkpoint_round_trip(params):
    config = {"family": "cnn", "nested": {"x": [1, 2]}}
    cfg, out = loads_checkpoint(dumps_checkpoint(config, params))
    assert cfg == config
    assert sorted(out) == sorted(params)
    for k in params:
        assert out[k].shape == params[k].shape
        assert out[k].tobytes() == params[k].astype("<f8").tobytes()


def test_checkpoint_layout_and_corruption(tmp_path):
    blob = dumps_checkpoint({"a": 1}, {"w": np.array([[1.0, 2.0]])})
    assert blob[:4] == b"MSCK"
    assert int.from_bytes(blob[4:6], "little") == 1
    save_checkpoint(tmp_path / "c.ckpt", {"a": 1}, {"w": np.array([[1.0, 2.0]])})
    assert (tmp_path / "c.ckpt").read_bytes() == blob
    assert load_checkpoint(tmp_path / "c.ckpt")[0] == {"a": 1}
    for bad in (b"XXXX" + blob[4:], blob[:-3], blob + b"\0"):
        with pytest.raises(DomainError):
            loads_checkpoint(bad)
