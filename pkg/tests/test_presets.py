"""Tests for configuration models and preset management."""

import json

import pytest
from pydantic import ValidationError

from deephvi.config import (
    BUILTIN_PRESETS,
    Activation,
    Algorithm,
    ExperimentPreset,
    NetworkArch,
    NetworkKind,
    TrainConfig,
    default_config,
)
from deephvi.exceptions import UnknownPresetError
from deephvi.modules.preset_manager import PresetManager


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.epochs == 50_000
        assert cfg.sizes.domain == 1024
        assert cfg.sizes.traction == 256
        assert cfg.adam.lr == 1e-3
        assert cfg.arch.kind == NetworkKind.PLAIN

    def test_unknown_fields_are_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig.model_validate({"epochz": 3})

    def test_negative_epochs_are_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig(epochs=-1)

    @pytest.mark.parametrize("algorithm", [Algorithm.BLOCKWISE, Algorithm.MULTIGRID])
    def test_refinement_needs_block_network(self, algorithm):
        with pytest.raises(ValidationError):
            TrainConfig(algorithm=algorithm, arch=NetworkArch.plain())

    def test_scaled_budgets(self):
        cfg = BUILTIN_PRESETS["bilateral-blockwise"].config.scaled(0.01)
        assert (cfg.epoch_int, cfg.epoch_b, cfg.total_epochs, cfg.epoch_re) == (90, 10, 500, 9)
        assert cfg.planned_epochs() == 500
        assert BUILTIN_PRESETS["compliance-multigrid"].config.scaled(0.01).planned_epochs() == 500
        assert BUILTIN_PRESETS["bilateral-basic-resnet"].config.scaled(0.01).epochs == 500

    def test_scaled_rejects_non_positive(self):
        with pytest.raises(ValueError):
            TrainConfig().scaled(0.0)

    def test_config_hash(self):
        assert TrainConfig().config_hash() == TrainConfig().config_hash()
        assert TrainConfig(seed=1).config_hash() != TrainConfig().config_hash()


class TestBuiltinPresets:
    def test_expected_errors(self):
        errors = {name: p.expected_error for name, p in BUILTIN_PRESETS.items()}
        assert errors == {
            "bilateral-basic-resnet": 0.0481,
            "bilateral-basic-block": 0.0412,
            "bilateral-blockwise": 0.0437,
            "bilateral-multigrid": 0.0282,
            "compliance-basic-resnet": 0.0706,
            "compliance-basic-block": 0.0556,
            "compliance-blockwise": 0.0558,
            "compliance-multigrid": 0.0435,
        }

    @pytest.mark.parametrize("name", sorted(BUILTIN_PRESETS))
    def test_every_preset_runs_fifty_thousand_steps(self, name):
        assert BUILTIN_PRESETS[name].config.planned_epochs() == 50_000

    def test_activations_and_grids(self):
        assert BUILTIN_PRESETS["bilateral-multigrid"].config.arch.activation == Activation.TANH
        compliance = BUILTIN_PRESETS["compliance-multigrid"].config
        assert compliance.arch.activation == Activation.RELU_POWER
        assert compliance.grid_step == pytest.approx(1 / 200)
        assert compliance.problem == "normal-compliance"

    @pytest.mark.parametrize(
        "problem,algorithm,name",
        [
            ("bilateral", Algorithm.BASIC, "bilateral-basic-resnet"),
            ("bilateral", Algorithm.MULTIGRID, "bilateral-multigrid"),
            ("normal-compliance", Algorithm.BLOCKWISE, "compliance-blockwise"),
        ],
    )
    def test_default_config_follows_presets(self, problem, algorithm, name):
        assert default_config(problem, algorithm) == BUILTIN_PRESETS[name].config

    def test_default_config_is_a_copy(self):
        cfg = default_config("bilateral")
        cfg.seed = 17
        assert BUILTIN_PRESETS["bilateral-basic-resnet"].config.seed == 0

    def test_default_config_for_other_problems(self):
        assert default_config("manufactured").arch.kind == NetworkKind.PLAIN
        assert default_config("manufactured", Algorithm.BLOCKWISE).arch.is_block


class TestPresetManager:
    @pytest.fixture
    def manager(self, tmp_path):
        return PresetManager(tmp_path / "presets")

    @pytest.fixture
    def custom(self):
        return ExperimentPreset(
            name="quick-manufactured",
            description="smoke run",
            config=TrainConfig(problem="manufactured", epochs=10),
        )

    def test_save_and_load(self, manager, custom):
        assert manager.save_preset(custom)
        assert manager.list_custom_presets() == ["quick-manufactured"]
        assert manager.load_preset("quick-manufactured") == custom
        assert manager.list_all_presets()["quick-manufactured"] == "custom"

    def test_builtins_cannot_be_overwritten_or_deleted(self, manager):
        preset = BUILTIN_PRESETS["bilateral-multigrid"]
        assert not manager.save_preset(preset)
        assert not manager.delete_preset("bilateral-multigrid")

    def test_invalid_name(self, manager, custom):
        assert not manager.save_preset(custom.model_copy(update={"name": "bad name!"}))

    def test_unknown_preset(self, manager):
        assert manager.load_preset("nope") is None
        with pytest.raises(UnknownPresetError) as info:
            manager.get_preset("nope")
        assert "bilateral-multigrid" in info.value.details["available"]

    def test_delete(self, manager, custom):
        manager.save_preset(custom)
        assert manager.delete_preset(custom.name)
        assert not manager.delete_preset(custom.name)
        assert manager.list_custom_presets() == []

    def test_corrupt_file_loads_as_none(self, manager):
        manager.presets_dir.mkdir(parents=True)
        (manager.presets_dir / "broken.json").write_text("{not json")
        assert manager.load_preset("broken") is None

    def test_export(self, manager, tmp_path):
        out = tmp_path / "exported" / "preset.json"
        assert manager.export_preset("compliance-blockwise", out)
        data = json.loads(out.read_text())
        assert data["config"]["algorithm"] == "blockwise"
        assert not manager.export_preset("nope", out)

    def test_directory_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("HVI_PRESETS_DIR", str(tmp_path / "env"))
        assert PresetManager().presets_dir == tmp_path / "env"

    def test_info(self, manager):
        info = manager.get_preset_info("bilateral-multigrid")
        assert info["type"] == "built-in"
        assert info["epochs"] == 50_000
        assert info["schedule"] == "9000 + 41 x 1000"
        assert info["blocks"] == "input L=4 N=50, 5 x (L=4 N=10)"
        assert info["grid_step"] == pytest.approx(1 / 50)
        assert manager.get_preset_info("compliance-basic-resnet")["layers"] == "L=8 N=50"
