"""Tests for the training algorithms, using stub losses where only the bookkeeping matters."""

import itertools
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from deephvi.config import Activation, Algorithm, NetworkArch, SampleSizes, TrainConfig, default_config
from deephvi.exceptions import ContractViolation, NonFiniteLossError
from deephvi.modules.evaluation import midpoint_reference, relative_error
from deephvi.modules.loss import EnergyBreakdown
from deephvi.modules.network import INPUT_BLOCK, init_params
from deephvi.modules.trainer import RunRecord, Trainer, select_level, smoothed, train
from deephvi.utils import load_checkpoint


def ones_gradient(theta, spec, batch):
    return EnergyBreakdown.of(1.0, 0.0, 0.0), np.ones_like(theta.values)


def scripted_levels(values):
    """Level-energy stub returning the given totals in order."""
    it = iter(values)

    def level_energy(theta, spec, batch):
        return EnergyBreakdown.of(next(it), 0.0, 0.0)

    return level_energy


class TestSelectLevel:
    @pytest.mark.parametrize(
        "losses,expected",
        [
            ([3.0, 1.0, 2.0], 2),
            ([0.5, 0.5, 0.9], 1),
            ([np.inf, 2.0], 2),
            ([-1.0], 1),
        ],
    )
    def test_argmin_one_based(self, losses, expected):
        assert select_level(losses) == expected

    def test_nan_is_rejected(self):
        with pytest.raises(ContractViolation):
            select_level([1.0, np.nan])

    def test_empty_is_rejected(self):
        with pytest.raises(ContractViolation):
            select_level([])


class TestBlockwise:
    def test_sweeps_visit_blocks_in_order(self, tiny_block_config):
        trainer = Trainer(tiny_block_config, gradient_fn=ones_gradient)
        _, record = trainer.train()
        assert record.steps == 3 + 2 * 3 * 2
        assert [s.level for s in record.selections] == [1, 2, 3, 1, 2, 3]
        assert [s.sweep for s in record.selections] == [1, 1, 1, 2, 2, 2]
        blocks = [e.block for e in record.epochs]
        assert blocks[:3] == [None] * 3
        assert blocks[3:] == [1, 1, 2, 2, 3, 3, 1, 1, 2, 2, 3, 3]

    def test_total_epoch_cap_truncates_mid_sweep(self, tiny_block_config):
        cfg = tiny_block_config.model_copy(update={"total_epochs": 8})
        _, record = Trainer(cfg, gradient_fn=ones_gradient).train()
        assert record.steps == 8
        assert [e.block for e in record.epochs[3:]] == [1, 1, 2, 2, 3]

    def test_only_selected_block_moves(self, tiny_block_config):
        cfg = tiny_block_config.model_copy(update={"epoch_int": 0, "total_epochs": 2})
        theta, _ = Trainer(cfg, gradient_fn=ones_gradient).train()
        start = init_params(cfg.arch, cfg.seed)
        layout = start.layout
        moved = layout.block_indices(INPUT_BLOCK, 1)
        frozen = layout.block_indices(2, 3)
        np.testing.assert_array_equal(theta.values[frozen], start.values[frozen])
        assert np.all(theta.values[moved] != start.values[moved])

    def test_plain_network_is_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig(algorithm=Algorithm.BLOCKWISE, arch=NetworkArch.plain())


class TestAdaptiveMultigrid:
    def test_selects_cheapest_level_each_sweep(self, tiny_block_config):
        cfg = tiny_block_config.model_copy(
            update={"algorithm": Algorithm.MULTIGRID, "epoch_re": 2, "epoch_b": 2}
        )
        trainer = Trainer(
            cfg,
            gradient_fn=ones_gradient,
            level_energy_fn=scripted_levels([3.0, 1.0, 2.0, 0.5, 0.5, 0.9]),
        )
        _, record = trainer.train()
        assert [s.level for s in record.selections] == [2, 1]
        assert record.selections[0].losses == [3.0, 1.0, 2.0]
        assert record.selections[0].epoch == 3
        assert record.steps == 3 + 2 * 2
        assert [e.block for e in record.epochs[3:]] == [2, 2, 1, 1]

    def test_refinement_batches_come_from_selected_lattice(self, tiny_block_config):
        cfg = tiny_block_config.model_copy(
            update={"algorithm": Algorithm.MULTIGRID, "epoch_int": 0, "epoch_re": 1, "epoch_b": 3}
        )
        seen = []

        def recording_gradient(theta, spec, batch):
            seen.append(batch.domain.copy())
            return ones_gradient(theta, spec, batch)

        Trainer(
            cfg,
            gradient_fn=recording_gradient,
            level_energy_fn=scripted_levels([5.0, 4.0, 1.0]),
        ).train()
        step = 4 * cfg.grid_step
        for domain in seen:
            ratio = domain / step
            np.testing.assert_allclose(ratio, np.round(ratio), atol=1e-9)


class TestBasic:
    def test_nonfinite_loss_aborts_with_partial_record(self, tiny_block_config):
        cfg = tiny_block_config.model_copy(update={"algorithm": Algorithm.BASIC, "epochs": 10})
        counter = itertools.count(1)

        def failing(theta, spec, batch):
            total = np.nan if next(counter) == 3 else 1.0
            return EnergyBreakdown.of(total, 0.0, 0.0), np.zeros_like(theta.values)

        trainer = Trainer(cfg, gradient_fn=failing)
        with pytest.raises(NonFiniteLossError) as info:
            trainer.train()
        assert info.value.epoch == 3
        assert info.value.record.steps == 2
        assert info.value.record.status == "failed"

    def test_checkpoints_and_final_file(self, tiny_block_config, tmp_path):
        cfg = tiny_block_config.model_copy(
            update={"algorithm": Algorithm.BASIC, "epochs": 5, "checkpoint_every": 2}
        )
        theta, record = Trainer(
            cfg, checkpoint_dir=tmp_path / "checkpoints", gradient_fn=ones_gradient
        ).train()
        names = [Path(p).name for p in record.checkpoints]
        assert names == ["ckpt_000002.hvi", "ckpt_000004.hvi", "ckpt_000005.hvi"]
        assert record.final_checkpoint == str(tmp_path / "final.hvi")
        arch, values, metadata = load_checkpoint(tmp_path / "final.hvi")
        assert arch == cfg.arch
        np.testing.assert_array_equal(values, theta.values)
        assert metadata["epoch"] == 5

    @pytest.mark.slow
    def test_real_energy_run_is_reproducible(self, tiny_plain):
        cfg = TrainConfig(
            problem="normal-compliance",
            arch=tiny_plain,
            epochs=4,
            sizes=SampleSizes(domain=16, traction=8, contact=8),
            seed=99,
        )
        theta_a, record_a = Trainer(cfg).train()
        theta_b, record_b = train(cfg)
        np.testing.assert_array_equal(theta_a.values, theta_b.values)
        assert [e.breakdown.total for e in record_a.epochs] == [
            e.breakdown.total for e in record_b.epochs
        ]
        assert record_a.status == "completed"

    def test_workers_do_not_change_the_trajectory(self, tiny_plain):
        base = TrainConfig(
            problem="bilateral",
            arch=tiny_plain,
            epochs=3,
            sizes=SampleSizes(domain=12, traction=6, contact=6),
            seed=5,
        )
        theta_a, _ = Trainer(base).train()
        theta_b, _ = Trainer(base.model_copy(update={"workers": 3})).train()
        np.testing.assert_allclose(theta_a.values, theta_b.values, rtol=1e-9, atol=1e-12)


def test_run_record_serialization(tiny_block_config):
    _, record = Trainer(
        tiny_block_config.model_copy(update={"algorithm": Algorithm.MULTIGRID, "epoch_re": 1, "epoch_b": 1}),
        gradient_fn=ones_gradient,
        level_energy_fn=scripted_levels([2.0, 1.0, 3.0]),
    ).train()
    restored = RunRecord.from_dict(record.to_dict())
    assert restored.steps == record.steps
    assert restored.selections[0].level == 2
    assert restored.final_loss == record.final_loss


def test_smoothed():
    np.testing.assert_allclose(smoothed([1.0, 2.0, 3.0, 4.0], 2), [1.5, 2.5, 3.5])
    np.testing.assert_allclose(smoothed([1.0], 3), [1.0])


@pytest.mark.slow
def test_manufactured_run_converges_to_exact_field(manufactured):
    cfg = TrainConfig(problem="manufactured", arch=NetworkArch.plain(depth=4, width=16), epochs=5000, seed=0)
    theta, record = Trainer(cfg, manufactured).train()
    report = relative_error(theta, manufactured, midpoint_reference(manufactured, n=64))
    assert record.steps == 5000
    assert report.relative_error < 0.1


@pytest.mark.slow
def test_compliance_loss_trend_dominates_noise(compliance):
    cfg = default_config("normal-compliance").model_copy(
        update={
            "arch": NetworkArch.plain(Activation.RELU_POWER, depth=4, width=16),
            "epochs": 2000,
        }
    )
    _, record = Trainer(cfg, compliance).train()
    trend = smoothed([e.breakdown.total for e in record.epochs], 100)
    band = np.std(trend[-200:])
    assert trend[0] - trend[-1] > 10 * band
