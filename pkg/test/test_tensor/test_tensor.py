import numpy as np
import pytest

from mman.src import ops
from mman.src.module import Parameter
from mman.src.tensor import Tensor, is_grad_enabled, no_grad


class TestTensor:
    def test_integer_input_is_promoted(self):
        t = Tensor([1, 2, 3])
        assert t.dtype == np.float64

    def test_float32_is_kept(self):
        t = Tensor(np.zeros(3, dtype=np.float32))
        assert t.dtype == np.float32

    def test_backward_through_arithmetic(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        y = ((x * x) - 2.0 * x + 1.0).sum()
        y.backward()
        np.testing.assert_allclose(x.grad, 2 * x.data - 2)

    def test_shared_node_gradients_add(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        y = x * x + x
        y.backward()
        assert x.grad == pytest.approx(7.0)

    def test_backward_accumulates_without_zero_grad(self):
        x = Tensor(np.array([1.0, -1.0]), requires_grad=True)
        (x * 2.0).sum().backward()
        (x * 2.0).sum().backward()
        np.testing.assert_allclose(x.grad, [4.0, 4.0])
        x.zero_grad()
        assert x.grad is None

    def test_division_and_log(self):
        x = Tensor(np.array([2.0, 4.0]), requires_grad=True)
        (x.log() / Tensor(np.array([2.0, 2.0]))).sum().backward()
        np.testing.assert_allclose(x.grad, 0.5 / x.data)

    def test_backward_needs_a_scalar(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ValueError) as ve:
            (x * 2.0).backward()
        assert "scalar" in str(ve.value)

    def test_backward_needs_grad(self):
        with pytest.raises(ValueError):
            Tensor(1.0).backward()

    def test_detach_cuts_the_graph(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        y = (x.detach() * x).sum()
        y.backward()
        np.testing.assert_allclose(x.grad, [1.0, 2.0])

    def test_item_of_a_vector_fails(self):
        with pytest.raises(ValueError):
            Tensor(np.ones(2)).item()

    def test_mean_over_axes(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        x.mean(axis=1).sum().backward()
        np.testing.assert_allclose(x.grad, np.full((2, 3), 1 / 3))

    def test_clip_blocks_gradient_outside(self):
        x = Tensor(np.array([-1.0, 0.5, 2.0]), requires_grad=True)
        x.clip(0.0, 1.0).sum().backward()
        np.testing.assert_allclose(x.grad, [0.0, 1.0, 0.0])


class TestNoGrad:
    def test_no_graph_inside(self):
        x = Parameter(np.ones((1, 1, 2, 2)))
        with no_grad():
            assert not is_grad_enabled()
            y = ops.sigmoid(x)
        assert is_grad_enabled()
        assert not y.requires_grad
        assert y.creator is None

    def test_flag_restored_after_error(self):
        with pytest.raises(RuntimeError):
            with no_grad():
                raise RuntimeError("boom")
        assert is_grad_enabled()


class TestOps:
    def test_conv_identity_kernel(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        w = Tensor(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(ops.conv2d(x, w).data, x.data)

    def test_conv_output_extent(self):
        x = Tensor(np.zeros((1, 2, 16, 16)))
        w = Tensor(np.zeros((5, 2, 4, 4)))
        assert ops.conv2d(x, w, stride=2, padding=1).shape == (1, 5, 8, 8)

    def test_conv_channel_mismatch(self):
        with pytest.raises(ValueError) as ve:
            ops.conv2d(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 2, 3, 3))))
        assert "channel mismatch" in str(ve.value)

    def test_conv_kernel_larger_than_input(self):
        with pytest.raises(ValueError):
            ops.conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 4, 4))))

    def test_deconv_is_the_adjoint_of_conv(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(1, 2, 8, 8))
        y = rng.normal(size=(1, 3, 4, 4))
        w = rng.normal(size=(3, 2, 4, 4))
        conv = ops.conv2d(Tensor(x), Tensor(w), stride=2, padding=1).data
        deconv = ops.deconv2d(Tensor(y), Tensor(w), stride=2, padding=1).data
        assert float((conv * y).sum()) == pytest.approx(float((x * deconv).sum()), rel=1e-10)

    def test_deconv_doubles_the_extent(self):
        out = ops.deconv2d(Tensor(np.zeros((1, 4, 5, 5))), Tensor(np.zeros((4, 2, 4, 4))), stride=2, padding=1)
        assert out.shape == (1, 2, 10, 10)

    def test_softmax_sums_to_one(self):
        x = Tensor(np.random.default_rng(1).normal(size=(2, 5, 3, 3)) * 50)
        np.testing.assert_allclose(ops.softmax_over_channels(x).data.sum(axis=1), 1.0)

    def test_instance_norm_normalizes_each_plane(self):
        x = Tensor(np.random.default_rng(2).normal(3.0, 2.0, size=(1, 2, 6, 6)))
        out = ops.instance_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2))).data
        np.testing.assert_allclose(out.mean(axis=(2, 3)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=(2, 3)), 1.0, atol=1e-3)

    def test_resize_keeps_constant_maps(self):
        x = Tensor(np.full((1, 1, 5, 7), 2.5))
        np.testing.assert_allclose(ops.resize_bilinear(x, size=(9, 3)).data, 2.5)

    def test_resize_needs_scale_or_size(self):
        with pytest.raises(ValueError):
            ops.resize_bilinear(Tensor(np.zeros((1, 1, 2, 2))))

    def test_dropout_is_identity_in_inference(self):
        x = Tensor(np.ones((1, 1, 4, 4)))
        assert ops.dropout(x, 0.5, training=False) is x

    def test_dropout_keeps_the_expectation(self):
        x = Tensor(np.ones((1, 1, 200, 200)))
        out = ops.dropout(x, 0.5, training=True, rng=np.random.default_rng(3)).data
        assert set(np.unique(out)) <= {0.0, 2.0}
        assert out.mean() == pytest.approx(1.0, abs=0.02)

    def test_unknown_activation(self):
        with pytest.raises(KeyError):
            ops.activation(Tensor(np.zeros(2)), "tanh")


_activation_cases = [
    ("leaky_relu", -1.0, -0.2),
    ("leaky_relu", 2.0, 2.0),
    ("sigmoid", 0.0, 0.5),
]


@pytest.mark.parametrize("kind, value, expected", _activation_cases)
def test_activation_values(kind, value, expected):
    out = ops.activation(Tensor(np.array([value])), kind)
    assert float(out.data[0]) == pytest.approx(expected, abs=1e-15)


_scaled_extent_cases = [
    (256, 0.8, 205),
    (256, 1.0, 256),
    (256, 1.2, 307),
    (64, 0.75, 48),
]


@pytest.mark.parametrize("extent, scale, expected", _scaled_extent_cases)
def test_scaled_extent(extent, scale, expected):
    assert ops.scaled_extent(extent, scale) == expected


def test_resize_by_scale_uses_the_rounded_extent():
    out = ops.resize_bilinear(Tensor(np.zeros((1, 1, 256, 256))), scale=0.8)
    assert out.shape == (1, 1, 205, 205)


class TestDeconvShapes:
    def test_impulse_response_is_the_kernel_interior(self):
        weight = np.arange(16.0).reshape(1, 1, 4, 4)
        out = ops.deconv2d(Tensor(np.ones((1, 1, 1, 1))), Tensor(weight), stride=2, padding=1).data
        np.testing.assert_array_equal(out[0, 0], weight[0, 0, 1:3, 1:3])

    def test_four_deconvs_take_16_to_256(self):
        x = Tensor(np.zeros((1, 7, 16, 16)))
        for _ in range(4):
            x = ops.deconv2d(x, Tensor(np.zeros((7, 7, 4, 4))), stride=2, padding=1)
        assert x.shape == (1, 7, 256, 256)
