import numpy as np
import pytest

from dlsvm.errors import DomainError, ShapeError
from dlsvm.optim import Schedule, SgdState, linear_decay, sgd_momentum_step


class TestLinearDecay:
    def test_endpoints_and_midpoint(self):
        schedule = Schedule(0.1, 0.0, 300)
        assert linear_decay(schedule, 0) == pytest.approx(0.1)
        assert linear_decay(schedule, 300) == pytest.approx(0.0)
        assert linear_decay(schedule, 150) == pytest.approx(0.05)

    def test_clamped_after_the_end(self):
        assert Schedule(1.0, 0.0, 10)(25) == 0.0

    def test_increasing_schedule(self):
        assert Schedule(0.0, 2.0, 4)(1) == pytest.approx(0.5)

    def test_needs_a_step(self):
        with pytest.raises(DomainError):
            Schedule(0.1, 0.0, 0)


class TestSgdMomentum:
    def test_without_momentum_is_gradient_descent(self, rng):
        theta = rng.standard_normal(4)
        start = theta.copy()
        g = rng.standard_normal(4)
        sgd_momentum_step([theta], [g], SgdState.zeros_like([theta], momentum=0.0), lr=0.3)
        np.testing.assert_allclose(theta, start - 0.3 * g)

    def test_velocity_accumulates(self):
        theta = np.zeros(1)
        state = SgdState.zeros_like([theta], momentum=0.9)
        sgd_momentum_step([theta], [np.ones(1)], state, lr=0.1)
        np.testing.assert_allclose(state.velocity[0], [-0.1])
        sgd_momentum_step([theta], [np.ones(1)], state, lr=0.1)
        np.testing.assert_allclose(state.velocity[0], [-0.19])
        np.testing.assert_allclose(theta, [-0.29])
        assert state.step == 2

    def test_zero_lr_decays_velocity(self):
        theta = np.array([1.0, 2.0])
        state = SgdState(velocity=[np.zeros(2)], momentum=0.9)
        state.velocity[0][:] = [1.0, -1.0]
        sgd_momentum_step([theta], [np.ones(2)], state, lr=0.0)
        np.testing.assert_allclose(state.velocity[0], [0.9, -0.9])
        np.testing.assert_allclose(theta, [1.9, 1.1])

    def test_shape_mismatch(self):
        theta = np.zeros(3)
        with pytest.raises(ShapeError):
            sgd_momentum_step([theta], [np.zeros(2)], SgdState.zeros_like([theta]), lr=0.1)

    def test_momentum_range(self):
        with pytest.raises(DomainError):
            SgdState.zeros_like([np.zeros(1)], momentum=1.0)

    @pytest.mark.parametrize("momentum", [0.0, 0.5, 0.9, 0.95])
    def test_converges_on_a_quadratic(self, momentum):
        # f(theta) = 1/2 theta^2, gradient theta
        theta = np.array([1.0])
        state = SgdState.zeros_like([theta], momentum=momentum)
        for _ in range(2000):
            sgd_momentum_step([theta], [theta.copy()], state, lr=0.1)
        assert abs(theta[0]) < 1e-6

    def test_parameter_partitioning_does_not_matter(self, rng):
        whole = rng.standard_normal(6)
        parts = [whole[:2].copy(), whole[2:].copy()]
        whole_state = SgdState.zeros_like([whole], momentum=0.9)
        parts_state = SgdState.zeros_like(parts, momentum=0.9)
        for _ in range(5):
            g = rng.standard_normal(6)
            sgd_momentum_step([whole], [g], whole_state, lr=0.05)
            sgd_momentum_step(parts, [g[:2], g[2:]], parts_state, lr=0.05)
        np.testing.assert_array_equal(np.concatenate(parts), whole)
