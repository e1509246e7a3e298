"""Tests for parameter layouts, the ResNet forward passes and masked fields."""

import numpy as np
import pytest

from deephvi.config import Activation, NetworkArch
from deephvi.exceptions import LayoutError
from deephvi.modules.autodiff import Tape, as_array, seed_input
from deephvi.modules.network import (
    INPUT_BLOCK,
    ConstraintMask,
    ParamLayout,
    ParamVector,
    block_forward,
    evaluate_field,
    init_params,
    param_count,
    resnet_forward,
)


def _field(theta, mask, points):
    values, _ = evaluate_field(theta, mask, points)
    return values


def _zero_outputs(theta):
    values = theta.values.copy()
    for e in theta.layout.entries:
        if e.role == "a":
            values[e.start:e.stop] = 0.0
    return theta.with_values(values)


class TestLayout:
    def test_default_parameter_counts(self):
        assert param_count(NetworkArch.plain()) == 20_600
        assert param_count(NetworkArch.block()) == 15_100

    def test_entries_tile_the_vector(self):
        layout = ParamLayout.for_arch(NetworkArch.block())
        offset = 0
        for e in layout.entries:
            assert e.start == offset
            assert e.size == int(np.prod(e.shape))
            offset = e.stop
        assert offset == layout.total

    def test_block_indices(self, tiny_block):
        layout = ParamLayout.for_arch(tiny_block)
        input_size = sum(e.size for e in layout.entries if e.block == INPUT_BLOCK)
        block_size = sum(e.size for e in layout.entries if e.block == 2)
        idx = layout.block_indices(INPUT_BLOCK, 2)
        assert idx.size == input_size + block_size
        assert len(set(idx.tolist())) == idx.size
        assert layout.blocks == [0, 1, 2, 3]

    def test_unknown_block_and_tensor(self, tiny_block):
        layout = ParamLayout.for_arch(tiny_block)
        with pytest.raises(LayoutError):
            layout.block_indices(9)
        with pytest.raises(LayoutError):
            layout.entry(1, 5, "W")

    def test_wrong_length_is_rejected(self, tiny_plain):
        with pytest.raises(LayoutError):
            ParamVector(tiny_plain, np.zeros(param_count(tiny_plain) + 1))


class TestInit:
    def test_deterministic_in_seed(self, tiny_block):
        a = init_params(tiny_block, seed=11)
        b = init_params(tiny_block, seed=11)
        c = init_params(tiny_block, seed=12)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_uniform_fan_in_bounds(self, tiny_block):
        theta = init_params(tiny_block, seed=5)
        for e in theta.layout.entries:
            chunk = theta.values[e.start:e.stop]
            assert np.all(np.abs(chunk) <= 1.0 / np.sqrt(e.fan_in))


class TestForward:
    def test_kind_mismatch(self, tiny_plain, tiny_block):
        tape = Tape()
        x = seed_input(np.array([[0.1, 0.2]]), tape)
        with pytest.raises(LayoutError):
            resnet_forward(init_params(tiny_block, 0).bind(tape), x)
        with pytest.raises(LayoutError):
            block_forward(init_params(tiny_plain, 0).bind(tape), x)

    def test_input_count_mismatch(self, tiny_plain):
        tape = Tape()
        x, _ = seed_input(np.array([[0.1, 0.2]]), tape)
        with pytest.raises(LayoutError):
            resnet_forward(init_params(tiny_plain, 0).bind(tape), (x,))

    def test_plain_forward_matches_numpy(self, tiny_plain):
        theta = init_params(tiny_plain, seed=2)
        pts = np.array([[0.1, 0.9], [0.5, 0.5], [0.8, 0.3]])
        tape = Tape()
        out = resnet_forward(theta.bind(tape), seed_input(pts, tape))

        h = pts @ theta.tensor(0, 0, "V").T
        for layer in range(1, tiny_plain.depth + 1):
            h = h + np.tanh(h @ theta.tensor(0, layer, "W").T + theta.tensor(0, layer, "b"))
        expected = h @ theta.tensor(0, 0, "a")
        for i in range(2):
            np.testing.assert_allclose(as_array(out[i].value), expected[:, i], rtol=1e-12)

    def test_block_output_is_sum_over_blocks(self, tiny_block):
        theta = init_params(tiny_block, seed=4)
        mask = ConstraintMask("one", ("1", "1"))
        pts = np.array([[0.2, 0.7], [0.6, 0.1]])
        full = _field(theta, mask, pts)

        parts = []
        for keep in (1, 2, 3):
            values = theta.values.copy()
            for e in theta.layout.entries:
                if e.role == "a" and e.block != keep:
                    values[e.start:e.stop] = 0.0
            parts.append(_field(theta.with_values(values), mask, pts))
        np.testing.assert_allclose(full, sum(parts), rtol=1e-12, atol=1e-14)

    def test_relu_power_network_runs(self):
        arch = NetworkArch.plain(activation=Activation.RELU_POWER, depth=2, width=4)
        values, grads = evaluate_field(
            init_params(arch, 1), ConstraintMask("one", ("1", "1")), np.array([[0.3, 0.4]])
        )
        assert values.shape == (1, 2)
        assert grads.shape == (1, 2, 2)
        assert np.all(np.isfinite(grads))


class TestMaskedField:
    def test_bilateral_mask_vanishes_on_dirichlet_edge(self, bilateral, tiny_theta):
        pts = np.column_stack([np.full(5, 4.0), np.linspace(0.0, 4.0, 5)])
        np.testing.assert_allclose(_field(tiny_theta, bilateral.mask, pts), 0.0, atol=1e-14)

    def test_compliance_mask_vanishes_on_both_clamped_edges(self, compliance, tiny_theta):
        ys = np.linspace(0.0, 1.0, 4)
        pts = np.concatenate(
            [np.column_stack([np.zeros(4), ys]), np.column_stack([np.ones(4), ys])]
        )
        np.testing.assert_allclose(_field(tiny_theta, compliance.mask, pts), 0.0, atol=1e-14)

    @pytest.mark.parametrize("seed", range(10))
    def test_constraints_hold_exactly_for_random_parameters(self, bilateral, compliance, tiny_theta, seed):
        theta = tiny_theta.with_values(np.random.default_rng(seed).normal(size=tiny_theta.values.size))
        sweep = np.linspace(0.0, 1.0, 1000)

        clamped = np.column_stack([np.full(1000, 4.0), 4.0 * sweep])
        assert np.max(np.abs(_field(theta, bilateral.mask, clamped))) <= 1e-14
        contact = np.column_stack([4.0 * sweep, np.zeros(1000)])
        assert np.max(np.abs(_field(theta, bilateral.mask, contact)[:, 1])) <= 1e-14

        for x in (0.0, 1.0):
            edge = np.column_stack([np.full(1000, x), sweep])
            assert np.max(np.abs(_field(theta, compliance.mask, edge))) <= 1e-14

    def test_zero_output_weights_give_zero_field(self, compliance, tiny_theta):
        values, grads = evaluate_field(
            _zero_outputs(tiny_theta), compliance.mask, np.array([[0.3, 0.6], [0.9, 0.2]])
        )
        np.testing.assert_array_equal(values, 0.0)
        np.testing.assert_array_equal(grads, 0.0)

    def test_jacobian_matches_central_differences(self, bilateral, tiny_theta):
        pts = np.array([[1.0, 2.0], [2.5, 0.5], [3.3, 3.1]])
        _, grads = evaluate_field(tiny_theta, bilateral.mask, pts)
        h = 1e-6
        for k in range(2):
            shift = np.zeros(2)
            shift[k] = h
            fd = (_field(tiny_theta, bilateral.mask, pts + shift)
                  - _field(tiny_theta, bilateral.mask, pts - shift)) / (2 * h)
            np.testing.assert_allclose(grads[:, :, k], fd, rtol=1e-5, atol=1e-7)

    def test_chunking_does_not_change_values(self, compliance, tiny_theta):
        pts = np.random.default_rng(0).random((10, 2))
        a = evaluate_field(tiny_theta, compliance.mask, pts, chunk=3)
        b = evaluate_field(tiny_theta, compliance.mask, pts)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-14)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-14)

    def test_mask_jacobian(self, bilateral):
        b, jac = bilateral.mask.evaluate(np.array([[2.0, 1.0]]))
        np.testing.assert_allclose(b, [[0.5, 0.25]])
        np.testing.assert_allclose(jac[0], [[-0.25, 0.0], [-1.0 / 8.0, 2.0 / 8.0]])
