"""
Preset management for saving, loading, and listing experiment presets.
"""

import json
import os
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from ..config import BUILTIN_PRESETS, ExperimentPreset
from ..exceptions import UnknownPresetError
from ..utils import get_logger, validate_preset_name

logger = get_logger()


class PresetManager:
    """Manager for built-in and user-defined experiment presets."""

    def __init__(self, presets_dir: Optional[Path] = None):
        """
        Initialize PresetManager.

        Args:
            presets_dir: Custom directory for storing presets
        """
        if presets_dir:
            self.presets_dir = presets_dir
        else:
            # Try environment variable first, fallback to default
            env_dir = os.environ.get("HVI_PRESETS_DIR")
            if env_dir:
                self.presets_dir = Path(env_dir)
            else:
                self.presets_dir = Path.home() / ".deephvi" / "presets"

    def save_preset(self, preset: ExperimentPreset) -> bool:
        """
        Save a custom preset as JSON.

        Args:
            preset: ExperimentPreset to save

        Returns:
            True if saved successfully, False otherwise
        """
        try:
            is_valid, error = validate_preset_name(preset.name)
            if not is_valid:
                raise ValueError(f"Invalid preset name: {error}")

            # Don't allow overwriting built-in presets
            if preset.name in BUILTIN_PRESETS:
                raise ValueError(f"Cannot overwrite built-in preset: {preset.name}")

            self.presets_dir.mkdir(parents=True, exist_ok=True)
            preset_file = self.presets_dir / f"{preset.name}.json"
            preset_file.write_text(preset.model_dump_json(indent=2), encoding="utf-8")
            return True

        except (ValueError, OSError) as e:
            logger.error(f"Error saving preset: {e}")
            return False

    def load_preset(self, name: str) -> Optional[ExperimentPreset]:
        """
        Load a preset by name.

        Args:
            name: Preset name to load

        Returns:
            ExperimentPreset if found, None otherwise
        """
        if name in BUILTIN_PRESETS:
            return BUILTIN_PRESETS[name].model_copy(deep=True)

        preset_file = self.presets_dir / f"{name}.json"
        if not preset_file.exists():
            return None

        try:
            with open(preset_file, "r", encoding="utf-8") as f:
                return ExperimentPreset.model_validate(json.load(f))
        except (OSError, ValueError, ValidationError) as e:
            logger.error(f"Error loading preset '{name}': {e}")
            return None

    def get_preset(self, name: str) -> ExperimentPreset:
        """Like load_preset, but an unknown name raises UnknownPresetError."""
        preset = self.load_preset(name)
        if preset is None:
            raise UnknownPresetError(name, sorted(self.list_all_presets()))
        return preset

    def delete_preset(self, name: str) -> bool:
        """
        Delete a custom preset.

        Args:
            name: Preset name to delete

        Returns:
            True if deleted successfully, False otherwise
        """
        if name in BUILTIN_PRESETS:
            logger.error(f"Cannot delete built-in preset: {name}")
            return False

        preset_file = self.presets_dir / f"{name}.json"
        if not preset_file.exists():
            return False

        preset_file.unlink()
        return True

    def list_custom_presets(self) -> List[str]:
        """List all custom preset names."""
        if not self.presets_dir.is_dir():
            return []
        return sorted(p.stem for p in self.presets_dir.glob("*.json"))

    def list_all_presets(self) -> Dict[str, str]:
        """
        List all available presets (built-in and custom).

        Returns:
            Dictionary mapping preset names to types ("built-in" or "custom")
        """
        presets = {name: "built-in" for name in BUILTIN_PRESETS}
        for name in self.list_custom_presets():
            presets.setdefault(name, "custom")
        return presets

    def export_preset(self, name: str, output_path: Path) -> bool:
        """
        Export a preset to a specific file.

        Args:
            name: Preset name to export
            output_path: Output file path

        Returns:
            True if exported successfully, False otherwise
        """
        preset = self.load_preset(name)
        if not preset:
            return False

        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(preset.model_dump_json(indent=2), encoding="utf-8")
        return True

    def get_preset_info(self, name: str) -> Dict:
        """
        Get a flat summary of a preset for display.

        Args:
            name: Preset name

        Returns:
            Dictionary with preset information
        """
        preset = self.get_preset(name)
        cfg = preset.config
        arch = cfg.arch
        info = {
            "name": preset.name,
            "description": preset.description,
            "type": "built-in" if name in BUILTIN_PRESETS else "custom",
            "problem": cfg.problem,
            "algorithm": cfg.algorithm.value,
            "network": arch.kind.value,
            "activation": arch.activation.value,
            "epochs": cfg.planned_epochs(),
            "expected_error": preset.expected_error,
        }
        if arch.is_block:
            info["blocks"] = (
                f"input L={arch.input_depth} N={arch.input_width}, "
                f"{arch.parallel_blocks} x (L={arch.block_depth} N={arch.block_width})"
            )
        else:
            info["layers"] = f"L={arch.depth} N={arch.width}"
        if cfg.algorithm.value != "basic":
            info["schedule"] = f"{cfg.epoch_int} + {cfg.epoch_re} x {cfg.epoch_b}"
        if cfg.algorithm.value == "multigrid":
            info["grid_step"] = cfg.grid_step
        return info
