import numpy as np
import pytest

from refpack import CompressParams, build_index, random_sequence

REF_LEN = 30_000


@pytest.fixture(scope="session")
def reference():
    return random_sequence(REF_LEN, np.random.default_rng(0xC0FFEE))


@pytest.fixture(scope="session")
def index64(reference):
    return build_index(reference, 64)


@pytest.fixture
def params():
    return CompressParams(k=64, s=16)
