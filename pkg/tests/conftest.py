import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trtlbm import GridSpec, burgers, d1q3  # noqa: E402
from trtlbm.config import named_datum  # noqa: E402


@pytest.fixture
def d1q3_1225():
    return d1q3(12 / 25)


@pytest.fixture
def flux():
    return burgers()


@pytest.fixture
def grid128():
    return GridSpec.uniform(1, 128, 2.0)


@pytest.fixture
def indicator():
    return named_datum("indicator", 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
