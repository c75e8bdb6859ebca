import numpy as np
import pytest

from mman.config import TrainConfig
from mman.src.module import Parameter
from mman.training.optimizer import Adam, AdamState, adam_step, lr_at


class TestAdam:
    def test_first_step_moves_by_lr_against_the_gradient_sign(self):
        param = Parameter(np.zeros(4))
        grad = np.array([3.0, -0.5, 1e-3, -20.0])
        adam_step({"w": param}, {"w": grad}, AdamState(), lr=0.01)
        np.testing.assert_allclose(param.data, -0.01 * np.sign(grad), rtol=1e-4)

    def test_decay_only_touches_flagged_parameters(self):
        decayed = Parameter(np.ones(3), decay=True)
        plain = Parameter(np.ones(3))
        params = {"weight": decayed, "gamma": plain}
        adam_step(params, {"weight": np.zeros(3), "gamma": np.zeros(3)}, AdamState(), lr=0.01, weight_decay=0.1)
        assert np.all(decayed.data < 1.0)
        np.testing.assert_array_equal(plain.data, 1.0)

    def test_missing_gradient_counts_as_zero(self):
        param = Parameter(np.full(2, 5.0))
        state = adam_step({"w": param}, {}, AdamState(), lr=0.1)
        np.testing.assert_array_equal(param.data, 5.0)
        assert state.step == 1

    def test_state_accumulates(self):
        param = Parameter(np.zeros(1))
        state = AdamState()
        for _ in range(3):
            adam_step({"w": param}, {"w": np.ones(1)}, state, lr=0.1)
        assert state.step == 3
        assert state.m["w"][0] == pytest.approx(1 - 0.9 ** 3)
        assert param.data[0] == pytest.approx(-0.3, rel=1e-4)

    def test_gradient_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step({"w": Parameter(np.zeros(3))}, {"w": np.zeros(2)}, AdamState(), lr=0.1)

    def test_nonpositive_learning_rate(self):
        with pytest.raises(ValueError):
            adam_step({"w": Parameter(np.zeros(3))}, {}, AdamState(), lr=0.0)

    def test_keeps_parameter_dtype(self):
        param = Parameter(np.zeros(3, dtype=np.float32))
        adam_step({"w": param}, {"w": np.ones(3)}, AdamState(), lr=0.1)
        assert param.dtype == np.float32

    def test_optimizer_reads_parameter_gradients(self):
        param = Parameter(np.zeros(2))
        param.grad = np.array([1.0, -1.0])
        optimizer = Adam({"w": param})
        optimizer.step(0.5)
        np.testing.assert_allclose(param.data, [-0.5, 0.5], rtol=1e-6)
        optimizer.zero_grad()
        assert param.grad is None

    def test_from_config(self):
        config = TrainConfig(beta1=0.5, weight_decay=0.0)
        optimizer = Adam.from_config({}, config)
        assert optimizer.beta1 == 0.5
        assert optimizer.weight_decay == 0.0

    def test_state_copy_is_independent(self):
        state = AdamState({"w": np.zeros(2)}, {"w": np.zeros(2)}, 4)
        clone = state.copy()
        clone.m["w"][0] = 1.0
        assert state.m["w"][0] == 0.0
        assert clone.step == 4


class TestSchedule:
    config = TrainConfig(lr=0.0002, epochs=30, decay_epoch=15)

    @pytest.mark.parametrize("epoch, expected", [(0, 0.0002), (14, 0.0002), (15, 0.00002), (29, 0.00002)])
    def test_step_schedule(self, epoch, expected):
        assert lr_at(epoch, self.config) == pytest.approx(expected)

    @pytest.mark.parametrize("epoch", [-1, 30])
    def test_out_of_range_epoch(self, epoch):
        with pytest.raises(ValueError):
            lr_at(epoch, self.config)

    def test_decay_epoch_must_fall_inside_the_run(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=10, decay_epoch=10)
