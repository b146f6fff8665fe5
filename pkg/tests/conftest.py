import numpy as np
import pytest

from onefractal.chaos import warmup
from onefractal.ifs import AffineMap, IfsCode, derive_probs


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT-compile the orbit kernels once so no individual test pays for it.
    warmup()


@pytest.fixture(scope="session")
def sierpinski() -> IfsCode:
    # Three half-scale maps with fixed points (0,0), (1,0), (0,1).
    maps = (
        AffineMap(0.5, 0.0, 0.0, 0.5, 0.0, 0.0),
        AffineMap(0.5, 0.0, 0.0, 0.5, 0.5, 0.0),
        AffineMap(0.5, 0.0, 0.0, 0.5, 0.0, 0.5),
    )
    return IfsCode(maps=maps, probs=derive_probs(maps))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
