import numpy as np
import pytest

from dgae.flows import (
    apply_flows,
    coupling_forward,
    coupling_inverse,
    flow_channel_map,
    init_flows,
    invert_flows,
)
from dgae.tensor import Tensor
from tests.oracles import numerical_logdet


def make_flows(channels=1, channel_dim=4, steps=2, seed=0, split=None,
               randomize=0.0):
    params = init_flows(channels, channel_dim, steps,
                        np.random.default_rng(seed), split=split)
    if randomize:
        rng = np.random.default_rng(seed + 1)
        for steps_k in params.steps:
            for step in steps_k:
                for net in (step.scale, step.shift):
                    net.w2.data = randomize * rng.standard_normal(net.w2.data.shape)
                    net.b2.data = randomize * rng.standard_normal(net.b2.data.shape)
    return params


def constant_coupling(channel_dim, split, scale_value, shift_value):
    """A coupling step whose networks output constants (zero hidden path)."""
    params = init_flows(1, channel_dim, 1, np.random.default_rng(0), split=split)
    step = params.steps[0][0]
    step.scale.w1.data = np.zeros_like(step.scale.w1.data)
    step.shift.w1.data = np.zeros_like(step.shift.w1.data)
    step.scale.b2.data = np.full_like(step.scale.b2.data, scale_value)
    step.shift.b2.data = np.full_like(step.shift.b2.data, shift_value)
    return step


class TestCoupling:
    def test_identity_at_initialization(self):
        params = make_flows(channels=2, channel_dim=4, steps=2)
        z = Tensor(np.random.default_rng(1).standard_normal((5, 8)))
        out, logdet = apply_flows(z, params)
        assert np.array_equal(out.data, z.data)
        assert np.array_equal(logdet.data, np.zeros((5, 1)))

    def test_hand_evaluated_scale_and_shift(self):
        step = constant_coupling(2, 1, np.log(2.0), 0.5)
        out, logdet = coupling_forward(Tensor(np.array([[1.0, 1.0]])), step, 1)
        assert np.allclose(out.data, [[1.0, 2.5]], atol=1e-12)
        assert abs(logdet.data[0, 0] - np.log(2.0)) < 1e-12

    def test_logdet_ignores_moving_coordinates(self):
        params = make_flows(channel_dim=6, steps=1, randomize=0.7)
        step = params.steps[0][0]
        rng = np.random.default_rng(2)
        fixed = rng.standard_normal(3)
        a = np.concatenate([fixed, rng.standard_normal(3)])[None, :]
        b = np.concatenate([fixed, rng.standard_normal(3)])[None, :]
        _, ld_a = coupling_forward(Tensor(a), step, 3)
        _, ld_b = coupling_forward(Tensor(b), step, 3)
        assert np.array_equal(ld_a.data, ld_b.data)

    def test_constant_shift_inverse_subtracts(self):
        step = constant_coupling(3, 1, 0.0, 2.5)
        z = np.array([[1.0, 4.0, -1.0]])
        out, _ = coupling_forward(Tensor(z), step, 1)
        assert np.allclose(out.data, [[1.0, 6.5, 1.5]])
        assert np.allclose(coupling_inverse(out.data, step, 1), z, atol=1e-12)

    def test_split_validation(self):
        step = constant_coupling(4, 2, 0.0, 0.0)
        with pytest.raises(ValueError):
            coupling_forward(Tensor(np.zeros((1, 4))), step, 4)
        with pytest.raises(ValueError):
            init_flows(1, 4, 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            init_flows(1, 4, 1, np.random.default_rng(0), split=4)


class TestRoundTrip:
    @pytest.mark.parametrize("channel_dim", [2, 4, 8, 16])
    def test_inverse_of_forward(self, channel_dim):
        params = make_flows(channel_dim=channel_dim, steps=3, randomize=0.8,
                            seed=channel_dim)
        z = np.random.default_rng(3).standard_normal((1000, channel_dim))
        out, _ = apply_flows(Tensor(z), params)
        back = invert_flows(out.data, params)
        assert np.abs(back - z).max() < 1e-9

    @pytest.mark.parametrize("channel_dim", [2, 8])
    def test_forward_of_inverse(self, channel_dim):
        params = make_flows(channel_dim=channel_dim, steps=2, randomize=0.8,
                            seed=channel_dim + 40)
        target = np.random.default_rng(4).standard_normal((500, channel_dim))
        pre = invert_flows(target, params)
        out, _ = apply_flows(Tensor(pre), params)
        assert np.abs(out.data - target).max() < 1e-9


class TestLogDet:
    @pytest.mark.parametrize("channel_dim", [2, 4, 8])
    def test_matches_numerical_jacobian_of_whole_channel_map(self, channel_dim):
        params = make_flows(channel_dim=channel_dim, steps=3, randomize=0.6,
                            seed=channel_dim + 7)
        forward = flow_channel_map(params, 0)
        rng = np.random.default_rng(5)
        rows = rng.standard_normal((4, channel_dim))
        _, logdet = apply_flows(Tensor(rows), params)
        for i in range(rows.shape[0]):
            reference = numerical_logdet(forward, rows[i])
            rel = abs(logdet.data[i, 0] - reference) / (abs(reference) + 1e-8)
            assert rel < 1e-5

    def test_zero_steps_means_identity(self):
        z = Tensor(np.random.default_rng(6).standard_normal((7, 6)))
        out, logdet = apply_flows(z, None)
        assert out is z
        assert np.array_equal(logdet.data, np.zeros((7, 1)))


class TestChannelSeparability:
    def test_perturbing_one_channel_leaves_others_unchanged(self):
        params = make_flows(channels=3, channel_dim=4, steps=2, randomize=0.5)
        rng = np.random.default_rng(7)
        z = rng.standard_normal((6, 12))
        base, _ = apply_flows(Tensor(z), params)
        bumped = z.copy()
        bumped[:, 4:8] += rng.standard_normal((6, 4))  # channel 1 only
        moved, _ = apply_flows(Tensor(bumped), params)
        assert np.array_equal(moved.data[:, 0:4], base.data[:, 0:4])
        assert np.array_equal(moved.data[:, 8:12], base.data[:, 8:12])
        assert not np.array_equal(moved.data[:, 4:8], base.data[:, 4:8])

    def test_width_mismatch_rejected(self):
        params = make_flows(channels=2, channel_dim=4)
        with pytest.raises(ValueError):
            apply_flows(Tensor(np.zeros((3, 10))), params)
