"""
Shared fixtures: small architectures and batches so that exact gradients and
finite differences stay cheap.
"""

import pytest

from deephvi.config import Algorithm, NetworkArch, SampleSizes, TrainConfig
from deephvi.modules.network import init_params
from deephvi.modules.problems import (
    bilateral_problem,
    manufactured_problem,
    normal_compliance_problem,
)
from deephvi.modules.sampling import make_rng, sample_uniform


@pytest.fixture(scope="session")
def bilateral():
    return bilateral_problem()


@pytest.fixture(scope="session")
def compliance():
    return normal_compliance_problem()


@pytest.fixture(scope="session")
def manufactured():
    return manufactured_problem()


@pytest.fixture
def tiny_plain():
    return NetworkArch.plain(depth=2, width=4)


@pytest.fixture
def tiny_block():
    return NetworkArch.block(
        input_depth=1, input_width=4, parallel_blocks=3, block_depth=1, block_width=3
    )


@pytest.fixture
def tiny_sizes():
    return SampleSizes(domain=8, traction=6, contact=6)


@pytest.fixture
def tiny_theta(tiny_plain):
    return init_params(tiny_plain, seed=7)


@pytest.fixture
def rng():
    return make_rng(12345, stream=1)


@pytest.fixture
def small_batch(compliance, tiny_sizes, rng):
    return sample_uniform(compliance, tiny_sizes, rng)


@pytest.fixture
def tiny_block_config(tiny_block, tiny_sizes):
    """Blockwise config over three parallel blocks with a handful of epochs."""
    return TrainConfig(
        problem="normal-compliance",
        algorithm=Algorithm.BLOCKWISE,
        arch=tiny_block,
        epoch_int=3,
        epoch_re=2,
        epoch_b=2,
        total_epochs=None,
        sizes=tiny_sizes,
        grid_step=1 / 200,
        checkpoint_every=1000,
        seed=3,
    )
