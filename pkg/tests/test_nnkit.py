import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sentrewrite import nnkit as nn
from sentrewrite.nnkit.checkpoint import MAGIC
from sentrewrite.nnkit.gradcheck import check_gradients

finite = st.floats(-5, 5, allow_nan=False)


def _param(rng, *shape):
    return nn.Parameter(rng.normal(size=shape))


class TestSoftmax:
    def test_two_way_example(self):
        p = nn.softmax(np.array([0.0, np.tanh(1.0)])).numpy()
        np.testing.assert_allclose(p, [0.3183, 0.6817], atol=1e-4)

    def test_masked_entries_get_zero(self):
        p = nn.softmax(np.array([1.0, 2.0, 3.0]), mask=[False, True, False]).numpy()
        assert p[1] == 0.0 and p.sum() == pytest.approx(1.0)
        lp = nn.log_softmax(np.array([1.0, 2.0, 3.0]), mask=[False, True, False]).numpy()
        assert lp[1] == -np.inf

    def test_all_masked(self):
        with pytest.raises(nn.NoAdmissibleAction, match="no admissible action"):
            nn.softmax(np.zeros(3), mask=[True, True, True])

    def test_mask_shape(self):
        with pytest.raises(nn.ShapeError):
            nn.softmax(np.zeros(3), mask=[True, False])

    def test_large_scores_are_stable(self):
        p = nn.softmax(np.array([1000.0, 1000.0])).numpy()
        np.testing.assert_allclose(p, [0.5, 0.5])

    @given(arrays(float, st.integers(1, 8), elements=finite))
    def test_sums_to_one(self, x):
        p = nn.softmax(x).numpy()
        assert p.sum() == pytest.approx(1.0, abs=1e-12) and (p >= 0).all()
        np.testing.assert_allclose(np.exp(nn.log_softmax(x).numpy()), p, atol=1e-12)

    def test_masked_log_softmax_gradient_ignores_blocked(self):
        x = nn.Parameter(np.array([0.5, -1.0, 2.0]))
        nn.backward(nn.getitem(nn.log_softmax(x, mask=[False, True, False]), 0))
        assert x.grad[1] == 0.0 and np.isfinite(x.grad).all()


class TestBackward:
    def test_product_rule(self):
        a, b = nn.Parameter(np.array(3.0)), nn.Parameter(np.array(4.0))
        nn.backward(a * b + a)
        assert a.grad == 5.0 and b.grad == 3.0

    def test_broadcast_gradient_is_summed(self):
        w = nn.Parameter(np.ones(3))
        nn.backward(nn.tsum(nn.Tensor(np.ones((2, 3))) * w))
        np.testing.assert_array_equal(w.grad, [2.0, 2.0, 2.0])

    def test_reused_node_accumulates(self):
        x = nn.Parameter(np.array(2.0))
        y = x * x
        nn.backward(y + y)
        assert x.grad == 8.0

    def test_non_scalar_loss(self):
        with pytest.raises(nn.ShapeError):
            nn.backward(nn.Parameter(np.ones(2)) * 1.0)

    def test_no_grad_builds_no_graph(self):
        x = nn.Parameter(np.array(1.0))
        with nn.no_grad():
            y = x * 2.0
        assert not y.requires_grad

    def test_matmul_shape_error(self):
        with pytest.raises(nn.ShapeError):
            nn.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_float64_default(self):
        assert nn.Parameter(np.ones(2, dtype=np.float32)).data.dtype == np.float64


class TestGradcheck:
    """Backprop against central differences, one block per op family."""

    @pytest.mark.parametrize("seed", range(5))
    def test_elementwise_and_reductions(self, seed):
        rng = nn.make_rng(seed)
        a, b = _param(rng, 3, 4), _param(rng, 3, 4)
        fn = lambda: nn.tsum(nn.tanh(a) * nn.sigmoid(b) + nn.square(a - b) / (nn.exp(b) + 1.0))
        assert check_gradients(fn, [a, b]) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_matmul_concat_stack(self, seed):
        rng = nn.make_rng(seed)
        a, b, c = _param(rng, 2, 3), _param(rng, 3, 4), _param(rng, 2, 4)
        fn = lambda: nn.mean(nn.relu(nn.concat([nn.matmul(a, b), c], axis=0)) +
                             nn.stack([c, c * 2.0]).sum(axis=0).mean())
        assert check_gradients(fn, [a, b, c]) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_softmax_family(self, seed):
        rng = nn.make_rng(seed)
        x, w = _param(rng, 5), nn.Tensor(rng.normal(size=5))
        mask = [False, False, True, False, False]
        fn = lambda: nn.tsum(nn.softmax(x, mask=mask) * w) + nn.getitem(nn.log_softmax(x), 2)
        assert check_gradients(fn, [x]) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_lstm_cell(self, seed):
        rng = nn.make_rng(seed)
        x, h, c = _param(rng, 2, 3), _param(rng, 2, 4), _param(rng, 2, 4)
        wx, wh, b = _param(rng, 3, 16), _param(rng, 4, 16), _param(rng, 16)

        def fn():
            h1, c1 = nn.lstm_cell(x, h, c, wx, wh, b)
            return nn.tsum(h1 * 1.5) + nn.tsum(nn.square(c1))
        assert check_gradients(fn, [x, h, c, wx, wh, b]) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_layer_norm_and_embedding(self, seed):
        rng = nn.make_rng(seed)
        table, g, bias = _param(rng, 6, 4), _param(rng, 4), _param(rng, 4)
        w = nn.Tensor(rng.normal(size=(3, 4)))
        fn = lambda: nn.tsum(nn.layer_norm(nn.embedding_lookup(table, [1, 4, 1]), g, bias) * w)
        assert check_gradients(fn, [table, g, bias]) < 1e-5


class TestAdam:
    def test_first_step_magnitude(self):
        p = nn.Parameter(np.array([1.0, -2.0]))
        p.grad = np.array([0.3, -7.0])
        nn.adam_step({"p": p}, {}, lr=0.1)
        np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-7)

    def test_state_keyed_by_mapping_key(self):
        p = nn.Parameter(np.zeros(1), name="same")
        q = nn.Parameter(np.zeros(1), name="same")
        opt = nn.Adam({"a": p, "b": q})
        p.grad, q.grad = np.ones(1), -np.ones(1)
        opt.step(0.01)
        assert set(opt.states) == {"a", "b"}
        assert p.data[0] < 0 < q.data[0]

    def test_zero_lr_is_exact_noop(self):
        p = nn.Parameter(np.array([0.123456789]))
        before = p.data.tobytes()
        p.grad = np.array([5.0])
        nn.adam_step([p], {}, lr=0.0)
        assert p.data.tobytes() == before

    def test_minimizes_quadratic(self):
        x = nn.Parameter(np.array([3.0, -4.0]))
        opt = nn.Adam({"x": x})
        for _ in range(500):
            opt.zero_grad()
            nn.backward(nn.tsum(nn.square(x)))
            opt.step(0.05)
        assert np.abs(x.data).max() < 1e-2


class TestClipping:
    def test_scales_to_threshold(self):
        p, q = nn.Parameter(np.zeros(1)), nn.Parameter(np.zeros(1))
        p.grad, q.grad = np.array([3.0]), np.array([4.0])
        assert nn.clip_global_norm([p, q], 2.0) == pytest.approx(5.0)
        assert nn.global_grad_norm([p, q]) == pytest.approx(2.0)
        np.testing.assert_allclose([p.grad[0], q.grad[0]], [1.2, 1.6])

    def test_small_norm_untouched(self):
        p = nn.Parameter(np.zeros(2))
        p.grad = np.array([0.5, 0.5])
        nn.clip_global_norm([p], 2.0)
        np.testing.assert_array_equal(p.grad, [0.5, 0.5])

    @given(arrays(float, 4, elements=st.floats(-1e3, 1e3, allow_nan=False)))
    def test_norm_bound(self, g):
        p = nn.Parameter(np.zeros(4))
        p.grad = g.copy()
        nn.clip_global_norm([p], 2.0)
        assert nn.global_grad_norm([p]) <= 2.0 + 1e-9


class TestSchedule:
    def test_defaults(self):
        assert nn.lr_at(10000) == pytest.approx(2e-5)
        assert nn.lr_at(1) == pytest.approx(2e-9)
        assert nn.lr_at(40000) == pytest.approx(1e-5)

    def test_peak_at_warmup(self):
        s = nn.LrSchedule(base=1.0, warmup=100)
        vals = [nn.lr_at(t, s) for t in range(1, 400)]
        assert int(np.argmax(vals)) + 1 == 100

    def test_invalid(self):
        with pytest.raises(ValueError):
            nn.lr_at(0)
        with pytest.raises(ValueError):
            nn.LrSchedule(warmup=0)


class TestCheckpoint:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        rng = nn.make_rng(0)
        tensors = {"w": rng.normal(size=(3, 2)), "b": np.array([np.pi]),
                   "h": rng.normal(size=4).astype(np.float32)}
        nn.save_checkpoint(tmp_path / "m.ckpt", tensors, {"kind": "test"})
        blob = (tmp_path / "m.ckpt").read_bytes()
        assert blob.startswith(MAGIC)
        back, meta = nn.load_checkpoint(tmp_path / "m.ckpt")
        assert meta == {"kind": "test"}
        for k, v in tensors.items():
            assert back[k].dtype == v.dtype and back[k].tobytes() == v.tobytes()

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"not a checkpoint at all")
        with pytest.raises(nn.CheckpointError, match="bad magic"):
            nn.load_checkpoint(tmp_path / "x")

    def test_module_state_roundtrip(self, tmp_path):
        m = nn.Module()
        m.add_param("w", np.arange(6.0).reshape(2, 3))
        nn.save_checkpoint(tmp_path / "m.ckpt", m.state_dict())
        m2 = nn.Module()
        m2.add_param("w", np.zeros((2, 3)))
        m2.load_state_dict(nn.load_checkpoint(tmp_path / "m.ckpt")[0])
        np.testing.assert_array_equal(m2.state_dict()["w"], m.state_dict()["w"])

    def test_strict_mismatch(self):
        m = nn.Module()
        m.add_param("w", np.zeros(2))
        with pytest.raises(KeyError, match="state mismatch"):
            m.load_state_dict({"v": np.zeros(2)})


class TestRng:
    def test_keyed_streams_are_reproducible(self):
        assert nn.make_rng(3, 1, 2).random() == nn.make_rng(3, 1, 2).random()
        assert nn.make_rng(3, 1, 2).random() != nn.make_rng(3, 2, 1).random()

    def test_split(self):
        seeds = nn.split(7, 4)
        assert seeds == nn.split(7, 4) and len(set(seeds)) == 4


def test_shared_module_listed_once():
    child = nn.Module()
    child.add_param("w", np.zeros(2))
    parent = nn.Module()
    parent.add_module("a", child)
    parent.add_module("b", child)
    assert list(parent.named_parameters()) == ["a.w"]
