"""
Configuration models and experiment presets for deephvi.

This module defines all configuration structures using Pydantic models
for type safety and validation. Every field defaults to the value used in the
published experiments, so a JSON config file only needs the overrides.
"""

import hashlib
import math
from enum import Enum
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NetworkKind(str, Enum):
    """Solution ansatz families."""
    PLAIN = "plain_resnet"
    BLOCK = "block_resnet"


class Activation(str, Enum):
    """Hidden-layer activations."""
    TANH = "tanh"
    RELU_POWER = "relu_power"  # (max(x, 0))**alpha


class Algorithm(str, Enum):
    """Training strategies."""
    BASIC = "basic"
    BLOCKWISE = "blockwise"
    MULTIGRID = "multigrid"


class NetworkArch(BaseModel):
    """Architecture descriptor for a plain ResNet or a block ResNet."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: NetworkKind = NetworkKind.PLAIN
    depth: int = Field(8, gt=0)
    width: int = Field(50, gt=0)
    input_dim: int = Field(2, gt=0)
    output_dim: int = Field(2, gt=0)
    activation: Activation = Activation.TANH
    activation_power: int = Field(2, ge=1)
    # block ResNet only
    input_depth: int = Field(4, gt=0)
    input_width: int = Field(50, gt=0)
    parallel_blocks: int = Field(5, ge=1)
    block_depth: int = Field(4, gt=0)
    block_width: int = Field(10, gt=0)

    @classmethod
    def plain(cls, activation: Activation = Activation.TANH, **overrides) -> "NetworkArch":
        return cls(kind=NetworkKind.PLAIN, activation=activation, **overrides)

    @classmethod
    def block(cls, activation: Activation = Activation.TANH, **overrides) -> "NetworkArch":
        return cls(kind=NetworkKind.BLOCK, activation=activation, **overrides)

    @property
    def is_block(self) -> bool:
        return self.kind == NetworkKind.BLOCK


class AdamSettings(BaseModel):
    """Adam hyperparameters."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)


class SampleSizes(BaseModel):
    """Monte Carlo batch sizes per region (N, N_T, N_C)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    domain: int = Field(1024, gt=0)
    traction: int = Field(256, gt=0)
    contact: int = Field(256, gt=0)


class TrainConfig(BaseModel):
    """Complete description of one training run."""
    model_config = ConfigDict(extra="forbid")

    problem: str = "bilateral"
    algorithm: Algorithm = Algorithm.BASIC
    arch: NetworkArch = NetworkArch()
    epochs: int = Field(50_000, ge=0)
    epoch_int: int = Field(9000, ge=0)
    epoch_re: int = Field(41, ge=0)
    epoch_b: int = Field(1000, ge=0)
    total_epochs: Optional[int] = Field(50_000, ge=0)  # hard cap, blockwise only
    grid_step: float = Field(1 / 50, gt=0)
    sizes: SampleSizes = SampleSizes()
    seed: int = Field(0, ge=0, lt=2**64)
    adam: AdamSettings = AdamSettings()
    checkpoint_every: int = Field(1000, gt=0)
    log_every: int = Field(100, gt=0)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_arch_for_algorithm(self) -> "TrainConfig":
        if self.algorithm != Algorithm.BASIC and not self.arch.is_block:
            raise ValueError(
                f"Algorithm '{self.algorithm.value}' requires a block_resnet architecture"
            )
        return self

    @property
    def levels(self) -> int:
        """Number of parallel blocks, which is also the number of grid levels."""
        return self.arch.parallel_blocks

    def refinement_epochs(self) -> int:
        """Epochs executed after the initialization phase."""
        if self.algorithm == Algorithm.BASIC:
            return 0
        if self.algorithm == Algorithm.MULTIGRID:
            return self.epoch_re * self.epoch_b
        planned = self.epoch_re * self.levels * self.epoch_b
        if self.total_epochs is None:
            return planned
        return max(0, min(planned, self.total_epochs - self.epoch_int))

    def planned_epochs(self) -> int:
        """Total number of optimizer steps this configuration performs."""
        if self.algorithm == Algorithm.BASIC:
            return self.epochs
        return self.epoch_int + self.refinement_epochs()

    def scaled(self, factor: float) -> "TrainConfig":
        """
        Scale every epoch budget by ``factor`` (rounded up).

        The number of refinement sweeps is left alone, so phase proportions
        are preserved.
        """
        if factor <= 0:
            raise ValueError(f"Epoch scale must be positive, got {factor}")

        def up(n: int) -> int:
            return int(math.ceil(n * factor - 1e-9))

        return self.model_copy(
            update={
                "epochs": up(self.epochs),
                "epoch_int": up(self.epoch_int),
                "epoch_b": up(self.epoch_b),
                "total_epochs": None if self.total_epochs is None else up(self.total_epochs),
                "checkpoint_every": max(1, up(self.checkpoint_every)),
            }
        )

    def config_hash(self) -> str:
        """Stable SHA-256 of the canonical JSON form."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class ExperimentPreset(BaseModel):
    """A named, reproducible experiment."""
    name: str
    description: str = ""
    config: TrainConfig = TrainConfig()
    expected_error: Optional[float] = None  # informational


# Grid steps of the finest multigrid level
BILATERAL_GRID_STEP = 1 / 50
COMPLIANCE_GRID_STEP = 1 / 200


def _preset_family(
    prefix: str,
    problem: str,
    activation: Activation,
    grid_step: float,
    expected: Dict[str, float],
    label: str,
) -> Dict[str, ExperimentPreset]:
    plain = NetworkArch.plain(activation=activation)
    block = NetworkArch.block(activation=activation)
    common = {"problem": problem, "grid_step": grid_step}
    return {
        f"{prefix}-basic-resnet": ExperimentPreset(
            name=f"{prefix}-basic-resnet",
            description=f"{label}: basic training, ResNet L=8 N=50, 50,000 epochs",
            config=TrainConfig(algorithm=Algorithm.BASIC, arch=plain, **common),
            expected_error=expected["basic-resnet"],
        ),
        f"{prefix}-basic-block": ExperimentPreset(
            name=f"{prefix}-basic-block",
            description=f"{label}: basic training, block ResNet, 50,000 epochs",
            config=TrainConfig(algorithm=Algorithm.BASIC, arch=block, **common),
            expected_error=expected["basic-block"],
        ),
        f"{prefix}-blockwise": ExperimentPreset(
            name=f"{prefix}-blockwise",
            description=f"{label}: blockwise training 9000 + 9x5x1000, capped at 50,000",
            config=TrainConfig(
                algorithm=Algorithm.BLOCKWISE,
                arch=block,
                epoch_int=9000,
                epoch_re=9,
                epoch_b=1000,
                total_epochs=50_000,
                **common,
            ),
            expected_error=expected["blockwise"],
        ),
        f"{prefix}-multigrid": ExperimentPreset(
            name=f"{prefix}-multigrid",
            description=f"{label}: adaptive mesh-free multigrid 9000 + 41x1000",
            config=TrainConfig(
                algorithm=Algorithm.MULTIGRID,
                arch=block,
                epoch_int=9000,
                epoch_re=41,
                epoch_b=1000,
                **common,
            ),
            expected_error=expected["multigrid"],
        ),
    }


# Built-in experiment presets (one per cell of the published error tables)
BUILTIN_PRESETS: Dict[str, ExperimentPreset] = {
    **_preset_family(
        "bilateral",
        "bilateral",
        Activation.TANH,
        BILATERAL_GRID_STEP,
        {"basic-resnet": 0.0481, "basic-block": 0.0412, "blockwise": 0.0437, "multigrid": 0.0282},
        "Bilateral contact with friction",
    ),
    **_preset_family(
        "compliance",
        "normal-compliance",
        Activation.RELU_POWER,
        COMPLIANCE_GRID_STEP,
        {"basic-resnet": 0.0706, "basic-block": 0.0556, "blockwise": 0.0558, "multigrid": 0.0435},
        "Frictionless normal compliance",
    ),
}


_PRESET_PREFIX = {"bilateral": "bilateral", "normal-compliance": "compliance"}
_PRESET_SUFFIX = {
    Algorithm.BASIC: "basic-resnet",
    Algorithm.BLOCKWISE: "blockwise",
    Algorithm.MULTIGRID: "multigrid",
}


def default_config(problem: str, algorithm: Algorithm = Algorithm.BASIC) -> TrainConfig:
    """
    Published settings for a benchmark problem and algorithm.

    Problems without a published setting get the defaults with an architecture
    that fits the algorithm.
    """
    prefix = _PRESET_PREFIX.get(problem)
    if prefix is not None:
        return BUILTIN_PRESETS[f"{prefix}-{_PRESET_SUFFIX[algorithm]}"].config.model_copy(deep=True)
    arch = NetworkArch.plain() if algorithm == Algorithm.BASIC else NetworkArch.block()
    return TrainConfig(problem=problem, algorithm=algorithm, arch=arch)
